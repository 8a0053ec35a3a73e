//! Load datasets cut from simulated histories: patch windows, temporal
//! subsampling, sum-preserving blur, min-max scaling, velocity sweeps and
//! the DLF container.

mod blur;
mod build;
mod dlf;
mod patch;
mod sweep;

use crate::error::{Error, Result};

pub use blur::gaussian_blur3;
pub use build::{accumulated_load, build_splits, crop_case, full_grid_record, simulate_cases, DatasetOptions, Splits};
pub use dlf::{decode_dlf, encode_dlf, read_dlf, write_dlf, DLF_MAGIC, DLF_VERSION};
pub use patch::{accumulate_load, best_window, extract_patches, PatchOptions, Window};
pub use sweep::{r2_point, sweep, Split, SplitCounts, Sweep, SweepConfig};

/// Default subsampling stride in solver steps (5 ms steps give 0.1 s).
pub const STEP_EVERY: usize = 20;
/// Loads below this are treated as unloaded, Pa.
pub const STOP_THRESHOLD_PA: f64 = 5e3;

/// One load grid, row-major `h x w`, in Pa.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadFrame {
    pub h: usize,
    pub w: usize,
    pub data: Vec<f32>,
}

impl LoadFrame {
    pub fn new(h: usize, w: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != h * w {
            return Err(Error::config(format!("frame of {}x{} needs {} values, got {}", h, w, h * w, data.len())));
        }
        Ok(Self { h, w, data })
    }

    pub fn zeros(h: usize, w: usize) -> Self {
        Self { h, w, data: vec![0.0; h * w] }
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Subsampled patch sequence of one scenario. Frame 0 is the impact frame,
/// the spacing is constant.
#[derive(Clone, Debug, PartialEq)]
pub struct CaseRecord {
    pub u0_mps: f64,
    pub w0_mps: f64,
    pub pitch0_deg: f64,
    /// (frame index, arc index) of the patch corner in the full grid.
    pub patch_origin: (u32, u32),
    pub frames: Vec<LoadFrame>,
}

impl CaseRecord {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn shape(&self) -> Option<(usize, usize)> {
        self.frames.first().map(|f| (f.h, f.w))
    }

    /// Largest load over all frames, the scale of the normalized RMSE.
    pub fn max_load(&self) -> f32 {
        self.frames.iter().map(LoadFrame::max).fold(f32::NEG_INFINITY, f32::max)
    }
}

/// Cases of one split in Pa, with the scaling constants of the training
/// split they are evaluated against.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub cases: Vec<CaseRecord>,
    pub x_min: f64,
    pub x_max: f64,
}

impl Dataset {
    pub fn frame_shape(&self) -> Option<(usize, usize)> {
        self.cases.iter().find_map(CaseRecord::shape)
    }
}

/// Min-max scaling constants over every value of the given cases.
pub fn normalization_constants(train: &[CaseRecord]) -> Result<(f64, f64)> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in train.iter().flat_map(|c| c.frames.iter()).flat_map(|f| f.data.iter()) {
        lo = lo.min(*v as f64);
        hi = hi.max(*v as f64);
    }
    if !(hi > lo) {
        return Err(Error::config(format!("degenerate training range [{lo}, {hi}]")));
    }
    Ok((lo, hi))
}

fn check_range(x_min: f64, x_max: f64) -> Result<f64> {
    let range = x_max - x_min;
    if !(range > 0.0) || !range.is_finite() {
        return Err(Error::config(format!("normalization needs x_max > x_min, got [{x_min}, {x_max}]")));
    }
    Ok(range)
}

/// `(x - x_min) / (x_max - x_min)` without clamping.
pub fn normalize(values: &mut [f32], x_min: f64, x_max: f64) -> Result<()> {
    let range = check_range(x_min, x_max)?;
    for v in values {
        *v = ((*v as f64 - x_min) / range) as f32;
    }
    Ok(())
}

pub fn denormalize(values: &mut [f32], x_min: f64, x_max: f64) -> Result<()> {
    let range = check_range(x_min, x_max)?;
    for v in values {
        *v = (*v as f64 * range + x_min) as f32;
    }
    Ok(())
}

/// Frame-sequence windows of length `ell + 1` in a case: `n_t - ell`.
pub fn sequence_count(n_t: usize, ell: usize) -> usize {
    n_t.saturating_sub(ell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn case(values: &[f32]) -> CaseRecord {
        CaseRecord {
            u0_mps: 70.0,
            w0_mps: 1.0,
            pitch0_deg: 6.0,
            patch_origin: (0, 0),
            frames: values.iter().map(|&v| LoadFrame::new(1, 2, vec![v, 0.5 * v]).unwrap()).collect(),
        }
    }

    #[test]
    fn endpoints_map_to_unit_interval() {
        let mut v = vec![2.0, 6.0, 10.0];
        normalize(&mut v, 2.0, 10.0).unwrap();
        assert_eq!(v, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn out_of_range_values_are_not_clipped() {
        let mut v = vec![-2.0, 14.0];
        normalize(&mut v, 2.0, 10.0).unwrap();
        assert_eq!(v, vec![-0.5, 1.5]);
    }

    #[test]
    fn degenerate_range_is_config_error() {
        assert!(matches!(normalize(&mut [1.0], 3.0, 3.0), Err(Error::Config(_))));
        assert!(matches!(denormalize(&mut [1.0], 3.0, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn constants_come_from_train_only() {
        let train = vec![case(&[1.0, 8.0]), case(&[3.0])];
        assert_eq!(normalization_constants(&train).unwrap(), (0.5, 8.0));
        let mut swapped = train.clone();
        swapped.reverse();
        assert_eq!(normalization_constants(&swapped).unwrap(), (0.5, 8.0));
    }

    #[test]
    fn twelve_frames_give_nine_sequences() {
        assert_eq!(sequence_count(12, 3), 9);
        assert_eq!(sequence_count(2, 3), 0);
    }

    proptest! {
        #[test]
        fn round_trip_within_tolerance(fractions in prop::collection::vec(-0.5f64..1.5, 1..200), lo in -1e5f64..0.0, span in 1e3f64..5e6) {
            let hi = lo + span;
            let values: Vec<f32> = fractions.iter().map(|f| (lo + f * span) as f32).collect();
            let mut v = values.clone();
            normalize(&mut v, lo, hi).unwrap();
            denormalize(&mut v, lo, hi).unwrap();
            for (a, b) in v.iter().zip(&values) {
                prop_assert!(((a - b).abs() as f64) < 1e-6 * span);
            }
        }
    }
}
