use serde::{Deserialize, Serialize};

use super::section::CrossSection;
use crate::error::{Error, Result};

/// One sample of the longitudinal profile. `x_m` is measured from the tail,
/// `keel_m` is the height of the section keel above the lowest bottom point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileStation {
    pub x_m: f64,
    pub radius_m: f64,
    pub keel_m: f64,
}

/// What part of each transverse section is discretized and tabulated.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SectionKind {
    /// Closed circular body: the arc covers `arc_half_angle_deg` from the
    /// keel, the depth table runs to the equator.
    Circular { arc_half_angle_deg: f64 },
    /// Open curved plate of the given half-width: arc and table both stop
    /// at the plate edge.
    Plate { half_width_m: f64 },
}

/// Piecewise-linear radius and keel-height curves over `[0, length_m]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub length_m: f64,
    pub stations: Vec<ProfileStation>,
    pub section: SectionKind,
}

fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl Profile {
    pub fn cylinder(length_m: f64, radius_m: f64) -> Self {
        Self {
            length_m,
            stations: vec![
                ProfileStation { x_m: 0.0, radius_m, keel_m: 0.0 },
                ProfileStation { x_m: length_m, radius_m, keel_m: 0.0 },
            ],
            section: SectionKind::Circular { arc_half_angle_deg: 90.0 },
        }
    }

    /// Cylinder with cubic-blended tail cone (with keel upsweep) and nose.
    #[allow(clippy::too_many_arguments)]
    pub fn tapered(
        length_m: f64,
        radius_m: f64,
        tail_len: f64,
        tail_radius: f64,
        tail_upsweep: f64,
        nose_len: f64,
        nose_radius: f64,
        nose_rise: f64,
        arc_half_angle_deg: f64,
    ) -> Self {
        const N: usize = 64;
        let stations = (0..=N)
            .map(|i| {
                let x = length_m * i as f64 / N as f64;
                let (mut radius, mut keel) = (radius_m, 0.0);
                if x < tail_len {
                    let s = smoothstep(x / tail_len);
                    radius = tail_radius + (radius_m - tail_radius) * s;
                    keel = tail_upsweep * (1.0 - s);
                } else if x > length_m - nose_len {
                    let t = (x - (length_m - nose_len)) / nose_len;
                    radius = radius_m - (radius_m - nose_radius) * t * t;
                    keel = nose_rise * smoothstep(t);
                }
                ProfileStation { x_m: x, radius_m: radius, keel_m: keel }
            })
            .collect();
        Self { length_m, stations, section: SectionKind::Circular { arc_half_angle_deg } }
    }

    /// Parametric stand-in for a single-aisle transport fuselage (37.25 m).
    /// The arc covers a quarter of the circumference.
    pub fn d150_standin() -> Self {
        Self::tapered(37.25, 1.98, 11.5, 0.3, 2.4, 4.25, 0.4, 0.9, 45.0)
    }

    /// Model D of the NACA TN2929 series: L = 1.219 m, R = 0.1016 m.
    pub fn tn2929_model_d() -> Self {
        Self::tapered(1.219, 0.1016, 0.45, 0.03, 0.09, 0.2, 0.02, 0.03, 90.0)
    }

    /// Curved plate: 1.0 m long, 0.5 m wide, transverse radius 2 m.
    pub fn curved_plate() -> Self {
        Self {
            length_m: 1.0,
            stations: vec![
                ProfileStation { x_m: 0.0, radius_m: 2.0, keel_m: 0.0 },
                ProfileStation { x_m: 1.0, radius_m: 2.0, keel_m: 0.0 },
            ],
            section: SectionKind::Plate { half_width_m: 0.25 },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m > 0.0) {
            return Err(Error::InvalidGeometry(format!("profile length {} must be positive", self.length_m)));
        }
        if self.stations.is_empty() {
            return Err(Error::InvalidGeometry("profile has no stations".into()));
        }
        for w in self.stations.windows(2) {
            if w[1].x_m <= w[0].x_m {
                return Err(Error::InvalidGeometry("profile stations must be strictly increasing in x".into()));
            }
        }
        if let Some(s) = self.stations.iter().find(|s| !(s.radius_m > 0.0) || !s.keel_m.is_finite()) {
            return Err(Error::InvalidGeometry(format!("non-positive radius {} at x={}", s.radius_m, s.x_m)));
        }
        Ok(())
    }

    /// Linear interpolation of (radius, keel), clamped at the ends.
    pub fn at(&self, x: f64) -> (f64, f64) {
        let st = &self.stations;
        if x <= st[0].x_m || st.len() == 1 {
            return (st[0].radius_m, st[0].keel_m);
        }
        let last = st[st.len() - 1];
        if x >= last.x_m {
            return (last.radius_m, last.keel_m);
        }
        let i = st.partition_point(|s| s.x_m <= x) - 1;
        let (a, b) = (st[i], st[i + 1]);
        let w = (x - a.x_m) / (b.x_m - a.x_m);
        (a.radius_m + w * (b.radius_m - a.radius_m), a.keel_m + w * (b.keel_m - a.keel_m))
    }
}

/// One longitudinal frame: station `x` from the tail, keel height in body
/// coordinates and the transverse half-section.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub x: f64,
    pub keel: f64,
    pub section: CrossSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HullMesh {
    pub frames: Vec<Frame>,
    pub dx: f64,
    pub n_frames: usize,
    pub n_arc: usize,
    pub length: f64,
}

impl HullMesh {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Default fuselage resolution.
pub const DEFAULT_FRAMES: usize = 150;
pub const DEFAULT_ARC: usize = 171;

/// Splits the profile into `n_frames` equal strips; each frame sits at its
/// strip centre so the strips tile `[0, L]` exactly.
pub fn build_fuselage_mesh(profile: &Profile, n_frames: usize, n_arc: usize) -> Result<HullMesh> {
    profile.validate()?;
    if n_frames < 2 {
        return Err(Error::InvalidGeometry(format!("need at least 2 frames, got {n_frames}")));
    }
    let dx = profile.length_m / n_frames as f64;
    let frames = (0..n_frames)
        .map(|i| {
            let x = (i as f64 + 0.5) * dx;
            let (radius, keel) = profile.at(x);
            let section = match profile.section {
                SectionKind::Circular { arc_half_angle_deg } => {
                    CrossSection::circular_arc(radius, arc_half_angle_deg.to_radians(), n_arc, radius)?
                }
                SectionKind::Plate { half_width_m } => {
                    let half_angle = (half_width_m / radius).clamp(0.0, 1.0).asin();
                    let top = radius * (1.0 - half_angle.cos());
                    CrossSection::circular_arc(radius, half_angle, n_arc, top)?
                }
            };
            Ok(Frame { x, keel, section })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HullMesh { frames, dx, n_frames, n_arc, length: profile.length_m })
}

/// Geometry block of a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub profile: Profile,
    #[serde(default = "default_frames")]
    pub n_frames: usize,
    #[serde(default = "default_arc")]
    pub n_arc: usize,
}

fn default_frames() -> usize {
    DEFAULT_FRAMES
}

fn default_arc() -> usize {
    DEFAULT_ARC
}

impl Default for GeometryConfig {
    /// Fuselage stand-in at the default resolution.
    fn default() -> Self {
        Self { profile: Profile::d150_standin(), n_frames: DEFAULT_FRAMES, n_arc: DEFAULT_ARC }
    }
}

impl GeometryConfig {
    pub fn build(&self) -> Result<HullMesh> {
        build_fuselage_mesh(&self.profile, self.n_frames, self.n_arc)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frames_are_equidistant() {
        let m = build_fuselage_mesh(&Profile::d150_standin(), 150, 171).unwrap();
        assert_eq!(m.frames.len(), 150);
        assert_eq!(m.n_arc, 171);
        for w in m.frames.windows(2) {
            assert!((w[1].x - w[0].x - m.dx).abs() < 1e-9);
        }
    }

    #[test]
    fn cylinder_sections_identical() {
        let m = build_fuselage_mesh(&Profile::cylinder(10.0, 1.0), 150, 20).unwrap();
        let first = &m.frames[0].section;
        assert!(m.frames.iter().all(|f| &f.section == first && f.keel == 0.0));
    }

    #[test]
    fn validation_configs_have_model_dimensions() {
        let d = Profile::tn2929_model_d();
        assert_eq!(d.length_m, 1.219);
        let rmax = d.stations.iter().map(|s| s.radius_m).fold(0.0, f64::max);
        assert!((rmax - 0.1016).abs() < 1e-12);
        let p = Profile::curved_plate();
        assert_eq!(p.length_m, 1.0);
        assert_eq!(p.section, SectionKind::Plate { half_width_m: 0.25 });
        assert_eq!(p.stations[0].radius_m, 2.0);
    }

    #[test]
    fn negative_radius_rejected() {
        let mut p = Profile::cylinder(5.0, 1.0);
        p.stations[1].radius_m = -0.1;
        assert!(matches!(build_fuselage_mesh(&p, 10, 8), Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn plate_table_stops_at_edge() {
        let m = build_fuselage_mesh(&Profile::curved_plate(), 20, 50).unwrap();
        let s = &m.frames[3].section;
        let top = s.table().max_depth();
        assert!((s.props(top + 1.0).breadth - 0.25).abs() < 1e-9);
    }

    #[test]
    fn mesh_json_round_trip_is_exact() {
        let m = build_fuselage_mesh(&Profile::tn2929_model_d(), 12, 9).unwrap();
        let back = HullMesh::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
