use serde::{Deserialize, Serialize};

use super::{CaseRecord, LoadFrame, STEP_EVERY, STOP_THRESHOLD_PA};
use crate::dynamics::{FieldSnapshot, LoadHistory};
use crate::error::{Error, Result};
use crate::geometry::Scenario;

/// Contiguous sub-grid: `h` frames from `frame0`, `w` arc panels from `arc0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub frame0: usize,
    pub arc0: usize,
    pub h: usize,
    pub w: usize,
}

impl Window {
    pub fn check(&self, n_frames: usize, n_arc: usize) -> Result<()> {
        if self.h == 0 || self.w == 0 || self.frame0 + self.h > n_frames || self.arc0 + self.w > n_arc {
            return Err(Error::config(format!(
                "window {}x{} at ({}, {}) does not fit the {n_frames}x{n_arc} grid",
                self.h, self.w, self.frame0, self.arc0
            )));
        }
        Ok(())
    }

    fn cut(&self, grid: &[f32], n_arc: usize) -> LoadFrame {
        let mut data = Vec::with_capacity(self.h * self.w);
        for i in self.frame0..self.frame0 + self.h {
            let row = i * n_arc + self.arc0;
            data.extend_from_slice(&grid[row..row + self.w]);
        }
        LoadFrame { h: self.h, w: self.w, data }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatchOptions {
    pub step_every: usize,
    pub stop_threshold_pa: f64,
    /// Hard cap on the sequence length.
    pub max_frames: Option<usize>,
}

impl Default for PatchOptions {
    fn default() -> Self {
        Self { step_every: STEP_EVERY, stop_threshold_pa: STOP_THRESHOLD_PA, max_frames: None }
    }
}

/// Fields at impact and every `step_every` solver steps after it.
fn subsampled(history: &LoadHistory, step_every: usize) -> Result<impl Iterator<Item = &FieldSnapshot>> {
    if step_every == 0 || step_every % history.record_every.max(1) != 0 {
        return Err(Error::config(format!(
            "step_every {step_every} must be a positive multiple of the recording stride {}",
            history.record_every
        )));
    }
    let impact = history.impact_step;
    Ok(history
        .fields
        .iter()
        .filter(move |f| impact.is_some_and(|s| f.step >= s && (f.step - s) % step_every == 0)))
}

/// Frames from the first on, ending before the first frame under the
/// threshold that follows a frame at or above it.
pub(crate) fn loaded_span(frames: impl Iterator<Item = LoadFrame>, threshold: f64, max_frames: Option<usize>) -> Vec<LoadFrame> {
    let mut out = Vec::new();
    let mut loaded = false;
    for f in frames {
        if max_frames.is_some_and(|m| out.len() >= m) {
            break;
        }
        let above = f.max() as f64 >= threshold;
        if loaded && !above {
            break;
        }
        loaded |= above;
        out.push(f);
    }
    out
}

/// Dynamic-pressure patch sequence of one run from the impact frame on; it
/// ends once the patch has been loaded and then falls under the threshold.
pub fn extract_patches(
    history: &LoadHistory,
    scenario: &Scenario,
    window: Window,
    options: &PatchOptions,
) -> Result<CaseRecord> {
    window.check(history.n_frames, history.n_arc)?;
    let patches = subsampled(history, options.step_every)?.map(|f| window.cut(&f.dynamic, history.n_arc));
    let frames = loaded_span(patches, options.stop_threshold_pa, options.max_frames);
    Ok(CaseRecord {
        u0_mps: scenario.u0_mps,
        w0_mps: scenario.w0_mps,
        pitch0_deg: scenario.pitch0_deg,
        patch_origin: (window.frame0 as u32, window.arc0 as u32),
        frames,
    })
}

/// Sum of positive dynamic load per grid point over the subsampled fields.
pub fn accumulate_load(history: &LoadHistory, step_every: usize, into: &mut [f64]) -> Result<()> {
    if into.len() != history.n_frames * history.n_arc {
        return Err(Error::config("accumulator does not match the history grid"));
    }
    for field in subsampled(history, step_every)? {
        for (a, &v) in into.iter_mut().zip(&field.dynamic) {
            *a += v.max(0.0) as f64;
        }
    }
    Ok(())
}

/// Window of the given size with the largest accumulated load; ties go to
/// the smallest frame, then arc index.
pub fn best_window(load: &[f64], n_frames: usize, n_arc: usize, h: usize, w: usize) -> Result<Window> {
    let probe = Window { frame0: 0, arc0: 0, h, w };
    probe.check(n_frames, n_arc)?;
    let stride = n_arc + 1;
    let mut prefix = vec![0.0f64; (n_frames + 1) * stride];
    for i in 0..n_frames {
        for j in 0..n_arc {
            prefix[(i + 1) * stride + j + 1] =
                load[i * n_arc + j] + prefix[i * stride + j + 1] + prefix[(i + 1) * stride + j] - prefix[i * stride + j];
        }
    }
    let mut best = (f64::NEG_INFINITY, probe);
    for i in 0..=n_frames - h {
        for j in 0..=n_arc - w {
            let s = prefix[(i + h) * stride + j + w] - prefix[i * stride + j + w] - prefix[(i + h) * stride + j]
                + prefix[i * stride + j];
            if s > best.0 {
                best = (s, Window { frame0: i, arc0: j, h, w });
            }
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// History on a 4x5 grid, impact at step 10, recorded every 5 steps.
    fn history(peaks: &[f32]) -> LoadHistory {
        let (n_frames, n_arc) = (4, 5);
        let fields = peaks
            .iter()
            .enumerate()
            .map(|(k, &p)| {
                let mut dynamic = vec![0.0f32; n_frames * n_arc];
                dynamic[n_arc + 2] = p;
                FieldSnapshot { step: 10 + 5 * k, t: 0.0, dynamic, ..Default::default() }
            })
            .collect();
        LoadHistory { dt: 5e-3, n_frames, n_arc, record_every: 5, fields, impact_step: Some(10), ..Default::default() }
    }

    fn window() -> Window {
        Window { frame0: 1, arc0: 1, h: 2, w: 3 }
    }

    fn opts(step_every: usize) -> PatchOptions {
        PatchOptions { step_every, ..Default::default() }
    }

    #[test]
    fn never_impacting_history_gives_empty_record() {
        let mut h = history(&[]);
        h.impact_step = None;
        let rec = extract_patches(&h, &Scenario::d150(70.0, 1.0), window(), &opts(20)).unwrap();
        assert!(rec.is_empty());
    }

    #[test]
    fn sequence_stops_below_threshold() {
        // subsampled every 20 steps = every 4th recorded field
        let mut peaks = vec![0.0f32; 4 * 14];
        for k in 0..12 {
            peaks[4 * k] = 1e4 + k as f32;
        }
        let rec = extract_patches(&history(&peaks), &Scenario::d150(70.0, 1.0), window(), &opts(20)).unwrap();
        assert_eq!(rec.len(), 12);
        assert_eq!(rec.frames[3].data[1], 1e4 + 3.0);
        assert_eq!(rec.patch_origin, (1, 1));
    }

    #[test]
    fn impact_frame_kept_even_when_small() {
        let rec = extract_patches(&history(&[10.0, 2e4, 1.0]), &Scenario::d150(70.0, 1.0), window(), &opts(5)).unwrap();
        assert_eq!(rec.len(), 2);
    }

    #[test]
    fn quiet_frames_before_arrival_kept() {
        let rec = extract_patches(&history(&[1.0, 2.0, 3e4, 4e4, 1.0, 5e4]), &Scenario::d150(70.0, 1.0), window(), &opts(5)).unwrap();
        assert_eq!(rec.len(), 4);
    }

    #[test]
    fn max_frames_caps_length() {
        let h = history(&[1e4; 9]);
        let o = PatchOptions { max_frames: Some(4), ..opts(5) };
        assert_eq!(extract_patches(&h, &Scenario::d150(70.0, 1.0), window(), &o).unwrap().len(), 4);
    }

    #[test]
    fn out_of_bounds_window_and_bad_stride_rejected() {
        let h = history(&[1e4]);
        let s = Scenario::d150(70.0, 1.0);
        let w = Window { frame0: 3, arc0: 0, h: 2, w: 2 };
        assert!(matches!(extract_patches(&h, &s, w, &opts(20)), Err(Error::Config(_))));
        assert!(matches!(extract_patches(&h, &s, window(), &opts(7)), Err(Error::Config(_))));
    }

    #[test]
    fn best_window_matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let (n, m, h, w) = (9, 11, 4, 3);
        let load: Vec<f64> = (0..n * m).map(|_| rng.gen_range(0.0..1.0)).collect();
        let got = best_window(&load, n, m, h, w).unwrap();
        let mut brute = (f64::NEG_INFINITY, (0, 0));
        for i in 0..=n - h {
            for j in 0..=m - w {
                let s: f64 = (i..i + h).flat_map(|a| (j..j + w).map(move |b| (a, b))).map(|(a, b)| load[a * m + b]).sum();
                if s > brute.0 {
                    brute = (s, (i, j));
                }
            }
        }
        assert_eq!((got.frame0, got.arc0), brute.1);
    }

    #[test]
    fn accumulated_load_ignores_suction() {
        let mut h = history(&[3.0, 4.0]);
        h.fields[1].dynamic[0] = -7.0;
        let mut acc = vec![0.0; 20];
        accumulate_load(&h, 5, &mut acc).unwrap();
        assert_eq!(acc[7], 7.0);
        assert_eq!(acc[0], 0.0);
    }
}
