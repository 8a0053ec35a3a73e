use serde::{Deserialize, Serialize};

use super::patch::{extract_patches, PatchOptions, Window};
use super::{best_window, gaussian_blur3, normalization_constants, CaseRecord, Dataset, STOP_THRESHOLD_PA};
use rayon::prelude::*;

use crate::dynamics::{simulate, LoadHistory, SimOptions};
use crate::error::{Error, Result};
use crate::geometry::{HullMesh, Scenario};

/// Every subsampled dynamic-pressure field of a run on the whole grid, from
/// impact to the end of the run.
pub fn full_grid_record(history: &LoadHistory, scenario: &Scenario, step_every: usize) -> Result<CaseRecord> {
    let window = Window { frame0: 0, arc0: 0, h: history.n_frames, w: history.n_arc };
    let opts = PatchOptions { step_every, stop_threshold_pa: f64::NEG_INFINITY, max_frames: None };
    extract_patches(history, scenario, window, &opts)
}

/// Simulates every scenario (in parallel) and keeps its full-grid record.
pub fn simulate_cases(scenarios: &[Scenario], mesh: &HullMesh, step_every: usize) -> Result<Vec<CaseRecord>> {
    scenarios
        .par_iter()
        .enumerate()
        .map(|(i, s)| {
            let history = simulate(s, mesh, SimOptions { record_every: step_every }).map_err(|f| {
                log::error!("case {i} (u0 {} m/s, w0 {} m/s) failed: {}", s.u0_mps, s.w0_mps, f.error);
                Error::from(f)
            })?;
            full_grid_record(&history, s, step_every)
        })
        .collect()
}

/// Positive load summed over all frames of full-grid records.
pub fn accumulated_load(cases: &[CaseRecord]) -> Result<(Vec<f64>, usize, usize)> {
    let (h, w) = cases.iter().find_map(CaseRecord::shape).ok_or_else(|| Error::config("no loaded frames in the sweep"))?;
    let mut acc = vec![0.0; h * w];
    for f in cases.iter().flat_map(|c| &c.frames) {
        if (f.h, f.w) != (h, w) {
            return Err(Error::config(format!("grid {}x{} differs from {h}x{w}", f.h, f.w)));
        }
        for (a, &v) in acc.iter_mut().zip(&f.data) {
            *a += v.max(0.0) as f64;
        }
    }
    Ok((acc, h, w))
}

/// Cuts `window` out of a full-grid record with the same stopping rule as
/// `extract_patches`.
pub fn crop_case(case: &CaseRecord, window: Window, stop_threshold_pa: f64, max_frames: Option<usize>) -> Result<CaseRecord> {
    for f in &case.frames {
        window.check(f.h, f.w)?;
    }
    let patches = case.frames.iter().map(|f| {
        let mut data = Vec::with_capacity(window.h * window.w);
        for i in window.frame0..window.frame0 + window.h {
            let row = i * f.w + window.arc0;
            data.extend_from_slice(&f.data[row..row + window.w]);
        }
        super::LoadFrame { h: window.h, w: window.w, data }
    });
    let frames = super::patch::loaded_span(patches, stop_threshold_pa, max_frames);
    Ok(CaseRecord {
        patch_origin: (case.patch_origin.0 + window.frame0 as u32, case.patch_origin.1 + window.arc0 as u32),
        frames,
        ..case.clone()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub patch: usize,
    #[serde(default = "default_stop")]
    pub stop_threshold_pa: f64,
    #[serde(default)]
    pub max_frames: Option<usize>,
    #[serde(default = "default_blur")]
    pub blur: bool,
}

fn default_stop() -> f64 {
    STOP_THRESHOLD_PA
}

fn default_blur() -> bool {
    true
}

impl DatasetOptions {
    pub fn new(patch: usize) -> Self {
        Self { patch, stop_threshold_pa: STOP_THRESHOLD_PA, max_frames: None, blur: true }
    }
}

/// Train, validation and test datasets cut with one window.
#[derive(Clone, Debug)]
pub struct Splits {
    pub window: Window,
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
    /// Training cases before blurring (pairs for the unfilter network).
    pub train_raw: Dataset,
}

/// Chooses the patch with the most accumulated training load, crops every
/// split with it, blurs, and takes the scaling constants from the blurred
/// training split.
pub fn build_splits(train: &[CaseRecord], val: &[CaseRecord], test: &[CaseRecord], opts: &DatasetOptions) -> Result<Splits> {
    let (load, h, w) = accumulated_load(train)?;
    let window = best_window(&load, h, w, opts.patch, opts.patch)?;
    let crop = |cases: &[CaseRecord]| -> Result<Vec<CaseRecord>> {
        cases.iter().map(|c| crop_case(c, window, opts.stop_threshold_pa, opts.max_frames)).collect()
    };
    let blur = |cases: &[CaseRecord]| -> Vec<CaseRecord> {
        cases
            .iter()
            .map(|c| CaseRecord {
                frames: if opts.blur { c.frames.iter().map(gaussian_blur3).collect() } else { c.frames.clone() },
                ..c.clone()
            })
            .collect()
    };
    let raw = [crop(train)?, crop(val)?, crop(test)?];
    let [tr, va, te] = raw.each_ref().map(|c| blur(c));
    let (x_min, x_max) = normalization_constants(&tr)?;
    let (rmin, rmax) = normalization_constants(&raw[0])?;
    let [train_raw, _, _] = raw;
    Ok(Splits {
        window,
        train: Dataset { cases: tr, x_min, x_max },
        val: Dataset { cases: va, x_min, x_max },
        test: Dataset { cases: te, x_min, x_max },
        train_raw: Dataset { cases: train_raw, x_min: rmin, x_max: rmax },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LoadFrame;

    fn full(values: &[&[f32]], h: usize, w: usize) -> CaseRecord {
        CaseRecord {
            u0_mps: 60.0,
            w0_mps: 1.0,
            pitch0_deg: 6.0,
            patch_origin: (0, 0),
            frames: values.iter().map(|v| LoadFrame::new(h, w, v.to_vec()).unwrap()).collect(),
        }
    }

    #[test]
    fn crop_stops_and_offsets() {
        let a: Vec<f32> = (0..12).map(|i| i as f32 * 1e3).collect();
        let low = vec![0.0f32; 12];
        let case = full(&[&a, &a, &low, &a], 3, 4);
        let win = Window { frame0: 1, arc0: 2, h: 2, w: 2 };
        let c = crop_case(&case, win, 5e3, None).unwrap();
        assert_eq!(c.frames.len(), 2);
        assert_eq!(c.frames[0].data, vec![6e3, 7e3, 10e3, 11e3]);
        assert_eq!(c.patch_origin, (1, 2));
        assert_eq!(crop_case(&case, win, 5e3, Some(1)).unwrap().frames.len(), 1);
        // unloaded frames before the load arrives are kept
        assert_eq!(crop_case(&full(&[&low, &low, &a, &low], 3, 4), win, 5e3, None).unwrap().frames.len(), 3);
    }

    #[test]
    fn splits_share_window_and_train_scaling() {
        let mut hot = vec![0.0f32; 36];
        hot[3 * 6 + 4] = 9e4;
        hot[4 * 6 + 4] = 6e4;
        let train = vec![full(&[&hot, &hot], 6, 6)];
        let mut other = hot.clone();
        other[0] = 5e5;
        let test = vec![full(&[&other], 6, 6)];
        let s = build_splits(&train, &[], &test, &DatasetOptions::new(3)).unwrap();
        assert!(s.window.frame0 <= 3 && s.window.frame0 + 3 > 4 && s.window.arc0 + 3 > 4);
        assert_eq!(s.train.x_max, s.test.x_max);
        // blurred maximum is below the raw one
        assert!(s.train.x_max < 9e4 && s.train_raw.x_max == 9e4);
        let sum: f64 = s.train.cases[0].frames[0].sum();
        assert!((sum - s.train_raw.cases[0].frames[0].sum()).abs() < 1.0);
    }
}
