//! Transverse half-sections and their submergence tables.
//!
//! A section is stored as a symmetric half: `y >= 0` is the lateral offset
//! from the centre plane and `z` the height above the section keel. The
//! depth table maps a submergence `T` (measured from the keel) to the
//! waterline half-breadth `c` and the submerged half-area `A`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of equidistant submergence samples per section table.
pub const DEPTH_SAMPLES: usize = 512;

/// Breadth below which `A/c` is treated through the tabulated ratio column.
const TINY_BREADTH: f64 = 1e-12;

/// Submerged half-breadth and half-area at one submergence.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SectionProps {
    pub breadth: f64,
    pub area: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthTable {
    step: f64,
    breadth: Vec<f64>,
    area: Vec<f64>,
    /// `A/c`, with the dry limit `0` at `T = 0`.
    ratio: Vec<f64>,
}

impl DepthTable {
    /// Samples closed-form `(c, A)` functions on `[0, max_depth]`.
    pub fn from_closed_form(max_depth: f64, f: impl Fn(f64) -> (f64, f64)) -> Result<Self> {
        if !(max_depth > 0.0) || !max_depth.is_finite() {
            return Err(Error::InvalidGeometry(format!("table depth must be positive, got {max_depth}")));
        }
        let step = max_depth / (DEPTH_SAMPLES - 1) as f64;
        let mut breadth = Vec::with_capacity(DEPTH_SAMPLES);
        let mut area = Vec::with_capacity(DEPTH_SAMPLES);
        for i in 0..DEPTH_SAMPLES {
            let (c, a) = f(i as f64 * step);
            breadth.push(c.max(0.0));
            area.push(a.max(0.0));
        }
        breadth[0] = 0.0;
        area[0] = 0.0;
        Ok(Self::with_ratio(step, breadth, area))
    }

    /// Builds the table from a half-breadth curve `c(z)` by trapezoid
    /// integration on a grid eight times finer than the table.
    pub fn from_breadth_curve(max_depth: f64, curve: impl Fn(f64) -> f64) -> Result<Self> {
        const REFINE: usize = 8;
        if !(max_depth > 0.0) || !max_depth.is_finite() {
            return Err(Error::InvalidGeometry(format!("table depth must be positive, got {max_depth}")));
        }
        let step = max_depth / (DEPTH_SAMPLES - 1) as f64;
        let fine = step / REFINE as f64;
        let mut breadth = vec![0.0; DEPTH_SAMPLES];
        let mut area = vec![0.0; DEPTH_SAMPLES];
        let mut acc = 0.0;
        let mut prev = curve(0.0).max(0.0);
        for i in 1..DEPTH_SAMPLES {
            for j in 1..=REFINE {
                let z = ((i - 1) * REFINE + j) as f64 * fine;
                let c = curve(z).max(0.0);
                acc += 0.5 * (prev + c) * fine;
                prev = c;
            }
            breadth[i] = prev;
            area[i] = acc;
        }
        Ok(Self::with_ratio(step, breadth, area))
    }

    fn with_ratio(step: f64, breadth: Vec<f64>, area: Vec<f64>) -> Self {
        let ratio = breadth
            .iter()
            .zip(&area)
            .map(|(&c, &a)| if c > TINY_BREADTH { a / c } else { 0.0 })
            .collect();
        Self { step, breadth, area, ratio }
    }

    pub fn max_depth(&self) -> f64 {
        self.step * (self.breadth.len() - 1) as f64
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let last = self.breadth.len() - 1;
        let s = t / self.step;
        if s >= last as f64 {
            return (last - 1, 1.0);
        }
        let i = s.floor() as usize;
        (i, s - i as f64)
    }

    pub fn props(&self, t: f64) -> SectionProps {
        if !(t > 0.0) {
            return SectionProps::default();
        }
        let (i, w) = self.locate(t);
        SectionProps {
            breadth: lerp(self.breadth[i], self.breadth[i + 1], w),
            area: lerp(self.area[i], self.area[i + 1], w),
        }
    }

    /// `A(T)/c(T)`, tending to zero in the dry limit.
    pub fn area_over_breadth(&self, t: f64) -> f64 {
        if !(t > 0.0) {
            return 0.0;
        }
        let (i, w) = self.locate(t);
        lerp(self.ratio[i], self.ratio[i + 1], w)
    }

    /// Slope of `A/c` with respect to `T` inside the table cell holding `t`.
    pub fn ratio_slope(&self, t: f64) -> f64 {
        if !(t > 0.0) || t >= self.max_depth() {
            return 0.0;
        }
        let (i, _) = self.locate(t);
        (self.ratio[i + 1] - self.ratio[i]) / self.step
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratio.iter().copied().fold(0.0, f64::max)
    }

    /// Submergence at which the half-area reaches `area` (inverse lookup).
    pub fn depth_for_area(&self, area: f64) -> f64 {
        if !(area > 0.0) {
            return 0.0;
        }
        let idx = self.area.partition_point(|&a| a < area);
        if idx >= self.area.len() {
            let last = self.area.len() - 1;
            let c = self.breadth[last].max(TINY_BREADTH);
            return self.max_depth() + (area - self.area[last]) / c;
        }
        let (a0, a1) = (self.area[idx - 1], self.area[idx]);
        let w = if a1 > a0 { (area - a0) / (a1 - a0) } else { 0.0 };
        (idx - 1) as f64 * self.step + w * self.step
    }
}

fn lerp(a: f64, b: f64, w: f64) -> f64 {
    a + (b - a) * w
}

/// One circumferential panel of a half-section. Pressures are sampled at
/// the panel midpoint; the edges bound the lateral extent used for force
/// integration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcPanel {
    pub y: f64,
    pub z: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossSection {
    arc: Vec<ArcPanel>,
    table: DepthTable,
}

impl CrossSection {
    /// Circular half-section from the keel up to the equator.
    pub fn circular(radius: f64, n_arc: usize) -> Result<Self> {
        Self::circular_arc(radius, std::f64::consts::FRAC_PI_2, n_arc, radius)
    }

    /// Circular half-section whose arc panels cover polar angles
    /// `[0, arc_half_angle]` from the keel, with a depth table up to
    /// `table_depth` (clamped to the radius).
    pub fn circular_arc(radius: f64, arc_half_angle: f64, n_arc: usize, table_depth: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::InvalidGeometry(format!("radius must be positive, got {radius}")));
        }
        if n_arc < 3 {
            return Err(Error::InvalidGeometry(format!("need at least 3 arc points, got {n_arc}")));
        }
        if !(arc_half_angle > 0.0 && arc_half_angle <= std::f64::consts::FRAC_PI_2 + 1e-12) {
            return Err(Error::InvalidGeometry(format!("arc half-angle {arc_half_angle} outside (0, pi/2]")));
        }
        let dphi = arc_half_angle / n_arc as f64;
        let arc = (0..n_arc)
            .map(|j| {
                let mid = (j as f64 + 0.5) * dphi;
                ArcPanel {
                    y: radius * mid.sin(),
                    z: radius * (1.0 - mid.cos()),
                    y_lo: radius * (j as f64 * dphi).sin(),
                    y_hi: radius * ((j + 1) as f64 * dphi).sin(),
                }
            })
            .collect();
        let depth = table_depth.min(radius);
        let table = DepthTable::from_closed_form(depth, |t| circle_props(radius, t))?;
        Ok(Self { arc, table })
    }

    pub fn arc(&self) -> &[ArcPanel] {
        &self.arc
    }

    pub fn table(&self) -> &DepthTable {
        &self.table
    }

    pub fn n_arc(&self) -> usize {
        self.arc.len()
    }

    pub fn props(&self, t: f64) -> SectionProps {
        self.table.props(t)
    }
}

/// Closed-form half-breadth and half-area of a circle of radius `r`
/// submerged to depth `t <= r`.
pub fn circle_props(r: f64, t: f64) -> (f64, f64) {
    let t = t.clamp(0.0, r);
    let c = (2.0 * r * t - t * t).max(0.0).sqrt();
    let full = r * r * ((r - t) / r).clamp(-1.0, 1.0).acos() - (r - t) * c;
    (c, 0.5 * full)
}

/// Interpolated `(c, A)`; negative submergence is a dry section.
pub fn section_props(section: &CrossSection, t: f64) -> (f64, f64) {
    let p = section.props(t);
    (p.breadth, p.area)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn unit_circle_closed_form_values() {
        let s = CrossSection::circular(1.0, 64).unwrap();
        let (c, a) = section_props(&s, 1.0);
        assert!((c - 1.0).abs() < 1e-12);
        assert!((a - PI / 4.0).abs() < 1e-12);
        assert_eq!(section_props(&s, 0.0), (0.0, 0.0));
        assert_eq!(section_props(&s, -0.3), (0.0, 0.0));
    }

    #[test]
    fn half_depth_matches_trapezoid_of_arc_polyline() {
        // oracle: integrate the half-breadth of a dense arc polyline
        let n = 200_000;
        let mut area = 0.0;
        let t = 0.5;
        let mut prev = 0.0;
        for i in 1..=n {
            let z = t * i as f64 / n as f64;
            let y = (2.0 * z - z * z).sqrt();
            area += 0.5 * (prev + y) * (t / n as f64);
            prev = y;
        }
        let (c, a) = circle_props(1.0, 0.5);
        assert!((c - 0.75f64.sqrt()).abs() < 1e-12);
        // 0.5 * (acos(0.5) - 0.5 sqrt(0.75))
        assert!((a - 0.307_092_424_3).abs() < 1e-9);
        assert!((a - area).abs() < 1e-6, "{a} vs {area}");
    }

    #[test]
    fn interpolation_is_linear_between_nodes_and_clamped() {
        let s = CrossSection::circular(1.0, 16).unwrap();
        let tab = s.table();
        let h = tab.step();
        let lo = tab.props(10.0 * h);
        let hi = tab.props(11.0 * h);
        let mid = tab.props(10.25 * h);
        assert!((mid.breadth - (0.75 * lo.breadth + 0.25 * hi.breadth)).abs() < 1e-14);
        assert!((mid.area - (0.75 * lo.area + 0.25 * hi.area)).abs() < 1e-14);
        assert_eq!(tab.props(5.0), tab.props(tab.max_depth()));
    }

    #[test]
    fn dense_table_tracks_closed_form_at_quarter_depth() {
        let s = CrossSection::circular(1.0, 16).unwrap();
        let (c, _) = section_props(&s, 0.25);
        let exact = 0.4375f64.sqrt();
        assert!(((c - exact) / exact).abs() < 1e-3);
    }

    #[test]
    fn area_rate_equals_breadth() {
        let s = CrossSection::circular(1.0, 16).unwrap();
        for k in 1..40 {
            let t = 0.02 + 0.024 * k as f64;
            let h = 1e-3;
            let da = (s.props(t + h).area - s.props(t - h).area) / (2.0 * h);
            let c = s.props(t).breadth;
            assert!(((da - c) / c).abs() < 0.01, "t={t}: dA/dT={da}, c={c}");
        }
    }

    #[test]
    fn curve_integration_agrees_with_closed_form() {
        let r = 2.0;
        let a = DepthTable::from_breadth_curve(1.5, |z| (2.0 * r * z - z * z).max(0.0).sqrt()).unwrap();
        let b = DepthTable::from_closed_form(1.5, |t| circle_props(r, t)).unwrap();
        for t in [0.1, 0.4, 0.9, 1.4] {
            let (pa, pb) = (a.props(t), b.props(t));
            assert!((pa.breadth - pb.breadth).abs() < 1e-9);
            assert!(((pa.area - pb.area) / pb.area).abs() < 1e-4);
        }
    }

    #[test]
    fn ratio_vanishes_in_dry_limit() {
        let s = CrossSection::circular(1.0, 16).unwrap();
        assert_eq!(s.table().area_over_breadth(0.0), 0.0);
        assert!(s.table().area_over_breadth(1e-6) < 1e-6);
    }

    #[test]
    fn depth_for_area_inverts_table() {
        let s = CrossSection::circular(1.5, 16).unwrap();
        for t in [0.05, 0.3, 0.77, 1.2] {
            let a = s.props(t).area;
            assert!((s.table().depth_for_area(a) - t).abs() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_radius_and_too_few_points() {
        assert!(matches!(CrossSection::circular(0.0, 16), Err(Error::InvalidGeometry(_))));
        assert!(matches!(CrossSection::circular(-1.0, 16), Err(Error::InvalidGeometry(_))));
        assert!(CrossSection::circular(1.0, 2).is_err());
    }

    #[test]
    fn arc_is_monotone_from_keel() {
        let s = CrossSection::circular_arc(2.0, 0.8, 40, 2.0).unwrap();
        for w in s.arc().windows(2) {
            assert!(w[1].z >= w[0].z);
            assert!(w[0].y >= 0.0);
            assert!((w[0].y_hi - w[1].y_lo).abs() < 1e-15);
        }
    }

    proptest::proptest! {
        #[test]
        fn table_monotone(r in 0.05f64..5.0, t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let s = CrossSection::circular(r, 8).unwrap();
            let (lo, hi) = if t1 < t2 { (t1 * r, t2 * r) } else { (t2 * r, t1 * r) };
            let (a, b) = (s.props(lo), s.props(hi));
            proptest::prop_assert!(a.breadth <= b.breadth + 1e-15);
            proptest::prop_assert!(a.area <= b.area + 1e-15);
        }
    }
}
