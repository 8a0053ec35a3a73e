use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Scenario;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub u0_range_mps: [f64; 2],
    pub w0_range_mps: [f64; 2],
    pub counts: SplitCounts,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_pitch")]
    pub pitch0_deg: f64,
    /// Validation and test pairs keep this fraction of each range away from
    /// the training box edges.
    #[serde(default = "default_margin")]
    pub inner_margin: f64,
}

fn default_pitch() -> f64 {
    6.0
}

fn default_margin() -> f64 {
    0.05
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            u0_range_mps: [66.88, 87.46],
            w0_range_mps: [0.61, 3.96],
            counts: SplitCounts { train: 323, val: 20, test: 30 },
            seed: 0,
            pitch0_deg: default_pitch(),
            inner_margin: default_margin(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Sweep {
    pub train: Vec<Scenario>,
    pub val: Vec<Scenario>,
    pub test: Vec<Scenario>,
}

impl Sweep {
    pub fn split(&self, split: Split) -> &[Scenario] {
        match split {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }
}

/// Point `n` of the additive R2 low-discrepancy sequence in the unit square.
pub fn r2_point(n: usize, offset: [f64; 2]) -> [f64; 2] {
    // plastic number: the real root of x^3 = x + 1
    const PLASTIC: f64 = 1.324_717_957_244_746;
    let a = [1.0 / PLASTIC, 1.0 / (PLASTIC * PLASTIC)];
    let n = n as f64 + 1.0;
    [(offset[0] + n * a[0]).fract(), (offset[1] + n * a[1]).fract()]
}

fn lerp(range: [f64; 2], s: f64) -> f64 {
    range[0] + s * (range[1] - range[0])
}

/// Velocity pairs for the three splits. Training takes the four box corners
/// first and fills the rest with a seeded R2 sequence; validation and test
/// pairs lie strictly inside the box. A split of one case sits at the
/// midpoint.
pub fn sweep(config: &SweepConfig, base: &Scenario) -> Result<Sweep> {
    for (name, r) in [("u0_range_mps", config.u0_range_mps), ("w0_range_mps", config.w0_range_mps)] {
        if !(r[1] > r[0]) || !r[0].is_finite() || !r[1].is_finite() {
            return Err(Error::config(format!("{name} [{}, {}] is empty", r[0], r[1])));
        }
    }
    let c = config.counts;
    if c.train == 0 || c.val == 0 || c.test == 0 {
        return Err(Error::config("sweep counts must be at least 1 per split"));
    }
    if !(0.0..0.5).contains(&config.inner_margin) || config.inner_margin == 0.0 {
        return Err(Error::config("inner_margin must lie in (0, 0.5)"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut offset = || [rng.gen::<f64>(), rng.gen::<f64>()];
    let scenario = |s: [f64; 2]| Scenario {
        u0_mps: lerp(config.u0_range_mps, s[0]),
        w0_mps: lerp(config.w0_range_mps, s[1]),
        pitch0_deg: config.pitch0_deg,
        ..base.clone()
    };
    let points = |count: usize, offset: [f64; 2], lo: f64| -> Vec<[f64; 2]> {
        if count == 1 {
            return vec![[0.5, 0.5]];
        }
        (0..count).map(|n| r2_point(n, offset).map(|v| lo + (1.0 - 2.0 * lo) * v)).collect()
    };
    let train_offset = offset();
    let train = if c.train >= 4 {
        let corners = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        let mut p = corners.to_vec();
        p.extend((0..c.train - 4).map(|n| r2_point(n, train_offset)));
        p
    } else {
        points(c.train, train_offset, 0.0)
    };
    let (val_offset, test_offset) = (offset(), offset());
    Ok(Sweep {
        train: train.into_iter().map(scenario).collect(),
        val: points(c.val, val_offset, config.inner_margin).into_iter().map(scenario).collect(),
        test: points(c.test, test_offset, config.inner_margin).into_iter().map(scenario).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> Scenario {
        Scenario::d150(70.0, 1.0)
    }

    #[test]
    fn full_counts_reproduce_split_sizes() {
        let s = sweep(&SweepConfig::default(), &base()).unwrap();
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (323, 20, 30));
        assert!(s.train.iter().all(|c| c.pitch0_deg == 6.0));
    }

    #[test]
    fn single_case_at_midpoint() {
        let cfg = SweepConfig { counts: SplitCounts { train: 1, val: 1, test: 1 }, ..Default::default() };
        let s = sweep(&cfg, &base()).unwrap();
        assert!((s.train[0].u0_mps - 77.17).abs() < 1e-12);
        assert!((s.test[0].w0_mps - 2.285).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_list_other_seed_differs() {
        let cfg = SweepConfig { counts: SplitCounts { train: 20, val: 4, test: 6 }, seed: 9, ..Default::default() };
        let a = sweep(&cfg, &base()).unwrap();
        assert_eq!(a, sweep(&cfg, &base()).unwrap());
        let b = sweep(&SweepConfig { seed: 10, ..cfg }, &base()).unwrap();
        assert_ne!(a.test, b.test);
    }

    #[test]
    fn held_out_pairs_strictly_inside() {
        let cfg = SweepConfig::default();
        let s = sweep(&cfg, &base()).unwrap();
        let inside = |c: &Scenario| {
            c.u0_mps > cfg.u0_range_mps[0]
                && c.u0_mps < cfg.u0_range_mps[1]
                && c.w0_mps > cfg.w0_range_mps[0]
                && c.w0_mps < cfg.w0_range_mps[1]
        };
        assert!(s.val.iter().chain(&s.test).all(inside));
        assert!(s.train.iter().all(|c| c.u0_mps >= 66.88 && c.u0_mps <= 87.46));
    }

    #[test]
    fn empty_range_rejected() {
        let cfg = SweepConfig { u0_range_mps: [80.0, 70.0], ..Default::default() };
        assert!(matches!(sweep(&cfg, &base()), Err(Error::Config(_))));
    }
}
