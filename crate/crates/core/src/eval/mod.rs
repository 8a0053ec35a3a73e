//! Error measures for predicted load sequences: normalized RMSE series,
//! seed aggregates, total average error, peak-time maps and winner counts.

mod plot;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::dataset::{CaseRecord, LoadFrame};
use crate::error::{Error, Result};
use crate::surrogates::{rollout_case, Surrogate};

pub use plot::{heatmap_svg, line_plot_svg, Series};

/// RMSE series of a rollout from the first `ell` frames of `case` against
/// the remaining frames, normalized by the case maximum.
pub fn rollout_rmse(model: &Surrogate<f32>, case: &CaseRecord, x_min: f64, x_max: f64, latent_only: bool) -> Result<Vec<f64>> {
    let pred = rollout_case(model, case, x_min, x_max, latent_only)?;
    rmse_series(&pred.frames, &case.frames[model.arch.ell..], case.max_load() as f64)
}

/// Frobenius norm of every frame.
pub fn frame_norms(frames: &[LoadFrame]) -> Vec<f64> {
    frames.iter().map(|f| f.data.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt()).collect()
}

/// Loads below this are masked in peak-time maps.
pub const PEAK_THRESHOLD_PA: f32 = 5e3;

/// Per-step RMSE between `pred` and `truth`, divided by `case_max`.
pub fn rmse_series(pred: &[LoadFrame], truth: &[LoadFrame], case_max: f64) -> Result<Vec<f64>> {
    if pred.len() != truth.len() {
        return Err(Error::Eval(format!("{} predicted frames for {} reference frames", pred.len(), truth.len())));
    }
    if !(case_max > 0.0) {
        return Err(Error::Eval(format!("case maximum {case_max} must be positive")));
    }
    pred.iter()
        .zip(truth)
        .enumerate()
        .map(|(t, (p, q))| {
            if (p.h, p.w) != (q.h, q.w) {
                return Err(Error::Eval(format!("step {t}: {}x{} vs {}x{}", p.h, p.w, q.h, q.w)));
            }
            let sq: f64 = p.data.iter().zip(&q.data).map(|(&a, &b)| (a as f64 - b as f64).powi(2)).sum();
            Ok((sq / p.data.len() as f64).sqrt() / case_max)
        })
        .collect()
}

pub fn time_mean(series: &[f64]) -> f64 {
    if series.is_empty() {
        0.0
    } else {
        series.iter().sum::<f64>() / series.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeedAggregate {
    pub avg: Vec<f64>,
    pub best: Vec<f64>,
    pub worst: Vec<f64>,
    pub best_seed: usize,
    pub worst_seed: usize,
}

/// Pointwise mean plus the whole series with the lowest and highest time
/// average (first index on ties).
pub fn aggregate_seeds(series: &[Vec<f64>]) -> Result<SeedAggregate> {
    let first = series.first().ok_or_else(|| Error::Eval("no seeds to aggregate".into()))?;
    if series.iter().any(|s| s.len() != first.len()) {
        return Err(Error::Eval("seed series differ in length".into()));
    }
    let n = series.len() as f64;
    let avg = (0..first.len()).map(|t| series.iter().map(|s| s[t]).sum::<f64>() / n).collect();
    let means: Vec<f64> = series.iter().map(|s| time_mean(s)).collect();
    let mut best_seed = 0;
    let mut worst_seed = 0;
    for (i, &m) in means.iter().enumerate() {
        if m < means[best_seed] {
            best_seed = i;
        }
        if m > means[worst_seed] {
            worst_seed = i;
        }
    }
    Ok(SeedAggregate { avg, best: series[best_seed].clone(), worst: series[worst_seed].clone(), best_seed, worst_seed })
}

/// RMSE series of every (model, case, seed) run.
#[derive(Clone, Debug, Default)]
pub struct RunGrid {
    pub models: Vec<String>,
    pub cases: Vec<usize>,
    pub seeds: Vec<u64>,
    pub runs: BTreeMap<(String, usize, u64), Vec<f64>>,
}

impl RunGrid {
    pub fn new(models: &[&str], cases: &[usize], seeds: &[u64]) -> Self {
        Self {
            models: models.iter().map(|m| m.to_string()).collect(),
            cases: cases.to_vec(),
            seeds: seeds.to_vec(),
            runs: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, model: &str, case: usize, seed: u64, series: Vec<f64>) {
        self.runs.insert((model.to_string(), case, seed), series);
    }

    pub fn get(&self, model: &str, case: usize, seed: u64) -> Result<&[f64]> {
        self.runs
            .get(&(model.to_string(), case, seed))
            .map(Vec::as_slice)
            .ok_or_else(|| Error::IncompleteGrid(format!("missing run: model {model}, case {case}, seed {seed}")))
    }

    fn seed_series(&self, model: &str, case: usize) -> Result<Vec<Vec<f64>>> {
        self.seeds.iter().map(|&s| self.get(model, case, s).map(<[f64]>::to_vec)).collect()
    }

    pub fn check_complete(&self) -> Result<()> {
        for m in &self.models {
            for &c in &self.cases {
                self.seed_series(m, c)?;
            }
        }
        Ok(())
    }

    /// Mean over seeds, then over time, then over cases.
    pub fn total_average_error(&self, model: &str) -> Result<f64> {
        if self.cases.is_empty() || self.seeds.is_empty() {
            return Err(Error::IncompleteGrid("grid has no cases or no seeds".into()));
        }
        let mut acc = 0.0;
        for &c in &self.cases {
            let agg = aggregate_seeds(&self.seed_series(model, c)?)?;
            acc += time_mean(&agg.avg);
        }
        Ok(acc / self.cases.len() as f64)
    }

    /// Cases won by each model: best seed per model, then lowest model
    /// (enumeration order breaks ties).
    pub fn winner_table(&self) -> Result<Vec<(String, usize)>> {
        let mut counts: Vec<(String, usize)> = self.models.iter().map(|m| (m.clone(), 0)).collect();
        for &c in &self.cases {
            let mut best: Option<(usize, f64)> = None;
            for (i, m) in self.models.iter().enumerate() {
                let agg = aggregate_seeds(&self.seed_series(m, c)?)?;
                let v = time_mean(&agg.best);
                match best {
                    Some((_, b)) if v > b => {}
                    Some((j, b)) if v == b => log::info!("case {c}: {m} ties with {}, kept {}", self.models[j], self.models[j]),
                    _ => best = Some((i, v)),
                }
            }
            if let Some((i, _)) = best {
                counts[i].1 += 1;
            }
        }
        Ok(counts)
    }

    /// One row per model, case and seed, plus the per-step values.
    pub fn rmse_csv(&self) -> String {
        let mut s = String::from("model,case,seed,step,rmse\n");
        for ((m, c, seed), series) in &self.runs {
            for (t, v) in series.iter().enumerate() {
                let _ = writeln!(s, "{m},{c},{seed},{t},{v:e}");
            }
        }
        s
    }

    pub fn totals_csv(&self) -> Result<String> {
        let mut s = String::from("model,total_average_error\n");
        for m in &self.models {
            let _ = writeln!(s, "{m},{:e}", self.total_average_error(m)?);
        }
        Ok(s)
    }

    pub fn winners_csv(&self) -> Result<String> {
        let table = self.winner_table()?;
        let n = self.cases.len().max(1) as f64;
        let mut s = String::from("model,wins,percent\n");
        for (m, w) in table {
            let _ = writeln!(s, "{m},{w},{:.1}", 100.0 * w as f64 / n);
        }
        Ok(s)
    }
}

/// Index of each point's maximum over time (earliest on ties), `None`
/// where that maximum is below `threshold`.
pub fn peak_time_map(sequence: &[LoadFrame], threshold: f32) -> Result<Vec<Option<usize>>> {
    let first = sequence.first().ok_or_else(|| Error::Eval("empty sequence".into()))?;
    if sequence.iter().any(|f| (f.h, f.w) != (first.h, first.w)) {
        return Err(Error::Eval("frames differ in shape".into()));
    }
    Ok((0..first.data.len())
        .map(|i| {
            let mut arg = 0;
            for (t, f) in sequence.iter().enumerate() {
                if f.data[i] > sequence[arg].data[i] {
                    arg = t;
                }
            }
            (sequence[arg].data[i] >= threshold).then_some(arg)
        })
        .collect())
}

/// Peak map as f32 with masked points set to NaN.
pub fn peak_map_grid(map: &[Option<usize>]) -> Vec<f32> {
    map.iter().map(|v| v.map_or(f32::NAN, |t| t as f32)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(data: &[f32]) -> LoadFrame {
        LoadFrame::new(1, data.len(), data.to_vec()).unwrap()
    }

    #[test]
    fn rmse_fixtures() {
        let truth = [LoadFrame::new(2, 2, vec![0.0, 0.0, 0.0, 4.0]).unwrap()];
        let pred = [LoadFrame::new(2, 2, vec![0.0, 0.0, 0.0, 2.0]).unwrap()];
        assert_eq!(rmse_series(&pred, &truth, 4.0).unwrap(), vec![0.25]);
        assert_eq!(rmse_series(&truth, &truth, 4.0).unwrap(), vec![0.0]);
        let shifted = [LoadFrame::new(2, 2, vec![0.5, 0.5, 0.5, 4.5]).unwrap()];
        assert_eq!(rmse_series(&shifted, &truth, 2.0).unwrap(), vec![0.25]);
        assert!(matches!(rmse_series(&pred, &[], 4.0), Err(Error::Eval(_))));
        assert!(rmse_series(&pred, &truth, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn rmse_scale_invariant(vals in prop::collection::vec((-1e4f32..1e4, -1e4f32..1e4), 1..20), k in 0.5f32..4.0) {
            let (a, b): (Vec<f32>, Vec<f32>) = vals.into_iter().unzip();
            let r1 = rmse_series(&[f(&a)], &[f(&b)], 1e4).unwrap()[0];
            let sa: Vec<f32> = a.iter().map(|v| v * k).collect();
            let sb: Vec<f32> = b.iter().map(|v| v * k).collect();
            let r2 = rmse_series(&[f(&sa)], &[f(&sb)], 1e4 * k as f64).unwrap()[0];
            // the scaled inputs are rounded to f32
            let mag = a.iter().chain(&b).fold(0f32, |m, v| m.max(v.abs())) as f64 / 1e4;
            prop_assert!((r1 - r2).abs() <= 1e-6 * mag.max(1e-6));
        }
    }

    #[test]
    fn aggregates() {
        let one = aggregate_seeds(&[vec![0.1, 0.2]]).unwrap();
        assert_eq!((one.avg.clone(), one.best.clone()), (vec![0.1, 0.2], vec![0.1, 0.2]));
        assert_eq!(one.worst, one.best);
        let two = aggregate_seeds(&[vec![0.1; 3], vec![0.3; 3]]).unwrap();
        assert!(two.avg.iter().all(|v| (v - 0.2).abs() < 1e-15));
        assert_eq!((two.best, two.worst), (vec![0.1; 3], vec![0.3; 3]));
        // crossing series: the pointwise minimum mixes both, the best run is whole
        let a = vec![0.0, 0.0, 0.9];
        let b = vec![0.2, 0.2, 0.2];
        let agg = aggregate_seeds(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(agg.best, b);
        assert_eq!(agg.worst, a);
        assert!(aggregate_seeds(&[]).is_err());
    }

    fn grid() -> RunGrid {
        let mut g = RunGrid::new(&["a", "b"], &[0, 1], &[1, 2]);
        for c in [0, 1] {
            g.insert("a", c, 1, vec![0.02; 4]);
            g.insert("a", c, 2, vec![0.04; 4]);
            g.insert("b", c, 1, vec![0.01 + 0.02 * c as f64; 4]);
            g.insert("b", c, 2, vec![0.05; 4]);
        }
        g
    }

    #[test]
    fn totals_and_winners() {
        let g = grid();
        assert!((g.total_average_error("a").unwrap() - 0.03).abs() < 1e-15);
        // b: case 0 seeds (0.01, 0.05) -> 0.03, case 1 (0.03, 0.05) -> 0.04
        assert!((g.total_average_error("b").unwrap() - 0.035).abs() < 1e-15);
        // case 0: best a 0.02 vs best b 0.01 -> b; case 1: 0.02 vs 0.03 -> a
        assert_eq!(g.winner_table().unwrap(), vec![("a".to_string(), 1), ("b".to_string(), 1)]);
        let csv = g.totals_csv().unwrap();
        assert_eq!(csv.lines().count(), 3);
        assert!(g.winners_csv().unwrap().contains("b,1,50.0"));
        let mut single = RunGrid::new(&["m"], &[0], &[0]);
        single.insert("m", 0, 0, vec![0.02; 5]);
        assert!((single.total_average_error("m").unwrap() - 0.02).abs() < 1e-15);
    }

    #[test]
    fn dominant_model_wins_everything() {
        let mut g = RunGrid::new(&["x", "y"], &[0, 1, 2], &[0]);
        for c in 0..3 {
            g.insert("x", c, 0, vec![0.1]);
            g.insert("y", c, 0, vec![0.01]);
        }
        let t = g.winner_table().unwrap();
        assert_eq!(t[1].1, 3);
        assert_eq!(t.iter().map(|x| x.1).sum::<usize>(), 3);
    }

    #[test]
    fn missing_run_named() {
        let mut g = grid();
        g.runs.remove(&("b".to_string(), 1, 2));
        match g.total_average_error("b") {
            Err(Error::IncompleteGrid(msg)) => assert!(msg.contains("model b, case 1, seed 2"), "{msg}"),
            other => panic!("{other:?}"),
        }
        assert!(g.check_complete().is_err());
        assert_eq!(g.totals_csv().unwrap_err().exit_code(), 5);
    }

    #[test]
    fn offset_gives_delta_over_max() {
        let truth: Vec<LoadFrame> = (0..4).map(|t| f(&[t as f32 * 100.0, 5.0, 80.0])).collect();
        let pred: Vec<LoadFrame> = truth.iter().map(|fr| f(&fr.data.iter().map(|v| v + 8.0).collect::<Vec<_>>())).collect();
        let s = rmse_series(&pred, &truth, 400.0).unwrap();
        assert!(s.iter().all(|v| (v - 0.02).abs() < 1e-12));
    }

    #[test]
    fn peak_maps() {
        let seq = [f(&[9e3, 1e3, 6e3, 7e3]), f(&[8e3, 2e3, 9e3, 7e3]), f(&[1e3, 3e3, 9e3, 6e3])];
        let map = peak_time_map(&seq, PEAK_THRESHOLD_PA).unwrap();
        assert_eq!(map, vec![Some(0), None, Some(1), Some(0)]);
        let decreasing = [f(&[9e3, 8e3]), f(&[7e3, 6e3])];
        assert_eq!(peak_time_map(&decreasing, PEAK_THRESHOLD_PA).unwrap(), vec![Some(0), Some(0)]);
        let low = [f(&[1.0, 2.0]), f(&[3.0, 4.0])];
        assert!(peak_time_map(&low, PEAK_THRESHOLD_PA).unwrap().iter().all(Option::is_none));
        assert!(peak_time_map(&[], 1.0).is_err());
        assert!(peak_map_grid(&map)[1].is_nan());
    }

    proptest! {
        #[test]
        fn peak_map_monotone_invariant(vals in prop::collection::vec(0f32..2e4, 12)) {
            let seq: Vec<LoadFrame> = vals.chunks(4).map(f).collect();
            let g = |v: f32| v * 2.0;
            let mapped: Vec<LoadFrame> = seq.iter().map(|fr| f(&fr.data.iter().map(|&v| g(v)).collect::<Vec<_>>())).collect();
            let a = peak_time_map(&seq, 5e3).unwrap();
            let b = peak_time_map(&mapped, g(5e3)).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
