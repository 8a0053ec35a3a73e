//! Per-step load assembly over the hull frames and the added-mass matrix.

use nalgebra::Matrix3;

use super::BodyState;
use crate::error::{Error, Result};
use crate::geometry::{AeroConfig, HullMesh, PressureOptions, Scenario};
use crate::hydro::{
    dynamic_force, finite, immersion_velocity, material_rate, pileup_solve, pressure_distribution, Departure,
    SectionKinematics, Wetting,
};

/// Hydrodynamic state of one frame after a load evaluation. Forces refer to
/// the half-section; `fz` points into the water (negative lifts the body).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FrameState {
    pub wet: Wetting,
    pub a0: f64,
    /// Immersion velocity used for the load, floored at zero.
    pub v: f64,
    /// The geometric immersion velocity was negative (section leaving the
    /// water); the load then uses zero.
    pub separated: bool,
    pub dv_dt: f64,
    pub dc_dt: f64,
    pub dc2_dt: f64,
    pub fz: f64,
    pub k: f64,
    /// Dynamic force active; false when dry or when the section would pull
    /// the body down (no suction is modelled).
    pub loaded: bool,
    /// Immersion velocity taken from keel kinematics because `c` vanished.
    pub fallback: bool,
}

impl FrameState {
    pub fn kinematics(&self) -> SectionKinematics {
        SectionKinematics { c: self.wet.c, v: self.v, dv_dt: self.dv_dt, dc_dt: self.dc_dt, dc2_dt: self.dc2_dt }
    }

    pub fn is_wetted(&self) -> bool {
        self.wet.t0 > 0.0
    }
}

/// Linear lift model trimmed at the initial state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AeroModel {
    pub weight_n: f64,
    pub trim_pitch_rad: f64,
    pub trim_speed_mps: f64,
    pub lift_slope_per_rad: f64,
    pub moment_arm_m: f64,
}

impl AeroModel {
    pub fn trimmed(config: &AeroConfig, scenario: &Scenario) -> Self {
        Self {
            weight_n: scenario.mass_kg * scenario.g_mps2,
            trim_pitch_rad: scenario.pitch0_deg.to_radians(),
            trim_speed_mps: scenario.u0_mps,
            lift_slope_per_rad: config.lift_slope_per_rad,
            moment_arm_m: config.moment_arm_m,
        }
    }
}

/// Lift `m g (1 + slope (theta - theta_trim)) (u/u0)^2`, vertical, applied
/// `moment_arm_m` ahead of the CoG. Returns `(Fx, Fz, My)`.
pub fn aero_lift(state: &BodyState, aero: Option<&AeroModel>) -> [f64; 3] {
    let Some(aero) = aero else { return [0.0; 3] };
    let speed = state.u / aero.trim_speed_mps;
    let lift = aero.weight_n * (1.0 + aero.lift_slope_per_rad * (state.theta - aero.trim_pitch_rad)) * speed * speed;
    [0.0, lift, lift * aero.moment_arm_m * state.theta.cos()]
}

/// Everything the load assembly needs that does not change during a run.
#[derive(Clone, Debug)]
pub struct LoadContext<'a> {
    pub mesh: &'a HullMesh,
    /// Frame station relative to the CoG, positive towards the nose.
    pub xi: Vec<f64>,
    /// Keel height relative to the CoG.
    pub zeta: Vec<f64>,
    pub k: Vec<f64>,
    pub rho: f64,
    pub g: f64,
    pub aero: Option<AeroModel>,
    pub pressure: PressureOptions,
}

impl<'a> LoadContext<'a> {
    pub fn new(mesh: &'a HullMesh, scenario: &Scenario) -> Result<Self> {
        if scenario.cog_from_nose_m > mesh.length || scenario.cog_from_nose_m < 0.0 {
            return Err(Error::config(format!(
                "CoG {} m from nose lies outside the {} m hull",
                scenario.cog_from_nose_m, mesh.length
            )));
        }
        let cog_x = mesh.length - scenario.cog_from_nose_m;
        Ok(Self {
            mesh,
            xi: mesh.frames.iter().map(|f| f.x - cog_x).collect(),
            zeta: mesh.frames.iter().map(|f| f.keel - scenario.cog_above_keel_m).collect(),
            k: scenario.k_for_frames(mesh.n_frames),
            rho: scenario.rho_water_kgm3,
            g: scenario.g_mps2,
            aero: scenario.aero.as_ref().map(|a| AeroModel::trimmed(a, scenario)),
            pressure: scenario.pressure.clone(),
        })
    }

    pub fn cog_x(&self) -> f64 {
        self.mesh.frames[0].x - self.xi[0]
    }

    /// Earth height of the keel point of frame `i`.
    pub fn keel_height(&self, state: &BodyState, i: usize) -> f64 {
        state.z + self.xi[i] * state.theta.sin() + self.zeta[i] * state.theta.cos()
    }
}

/// Outcome of one load evaluation: per-frame state and resultant forces
/// `(Fx, Fz, My)` in earth axes about the CoG (My positive nose-up).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Assembly {
    pub frames: Vec<FrameState>,
    pub hydro: [f64; 3],
    pub aero: [f64; 3],
}

impl Assembly {
    pub fn total(&self) -> [f64; 3] {
        [self.hydro[0] + self.aero[0], self.hydro[1] + self.aero[1], self.hydro[2] + self.aero[2]]
    }

    pub fn wetted_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.is_wetted()).count()
    }

    pub fn fallback_frames(&self) -> usize {
        self.frames.iter().filter(|f| f.fallback).count()
    }
}

/// Evaluates every frame at `state` against the previous-step fields and
/// integrates the section forces with the midpoint rule over the strips.
pub fn assemble_loads(ctx: &LoadContext, state: &BodyState, prev: &[FrameState], dt: f64) -> Result<Assembly> {
    let mesh = ctx.mesh;
    let n = mesh.n_frames;
    if prev.len() != n {
        return Err(Error::shape("assemble_loads", format!("{} previous frames for {n} frames", prev.len())));
    }
    let (sin, cos) = state.theta.sin_cos();
    let along = state.u * cos + state.w * sin;
    let dx = mesh.dx;
    let prev_wet: Vec<Wetting> = prev.iter().map(|f| f.wet).collect();
    let mut frames = Vec::with_capacity(n);
    let (mut fx, mut fz_total, mut my) = (0.0, 0.0, 0.0);
    for (i, frame) in mesh.frames.iter().enumerate() {
        let keel = ctx.keel_height(state, i);
        let t0 = (-keel).max(0.0) / cos;
        if t0 <= 0.0 {
            frames.push(FrameState { k: ctx.k[i], ..Default::default() });
            continue;
        }
        let k = ctx.k[i];
        let pile = pileup_solve(&frame.section, t0, k).map_err(|e| e.at_frame(i))?;
        let wet = Wetting { t0, t: pile.depth, c: pile.breadth, a: pile.area };
        let dep = Departure::new(i, n, along, dx, dt);
        let before = Wetting::at_departure(&dep, &prev_wet);
        let (raw, fallback) = match immersion_velocity(&wet, &before, dt) {
            Some(v) => (v, false),
            None => {
                let keel_rate = state.w + state.q * (ctx.xi[i] * cos - ctx.zeta[i] * sin);
                (-keel_rate / cos, true)
            }
        };
        // a section whose immersion reverses sheds its flow
        let v = raw.max(0.0);
        let c = wet.c;
        let mut fs = FrameState {
            wet,
            a0: frame.section.props(t0).area,
            v,
            separated: raw < 0.0,
            dv_dt: material_rate(v, dep.sample(|j| prev[j].v), dt),
            dc_dt: material_rate(c, before.c, dt),
            dc2_dt: material_rate(c * c, dep.sample(|j| prev[j].wet.c.powi(2)), dt),
            k,
            loaded: true,
            fallback,
            ..Default::default()
        };
        let mut dynamic = dynamic_force(&fs.kinematics(), ctx.rho, k);
        if dynamic > 0.0 {
            // no suction: the section cannot pull the body into the water
            dynamic = 0.0;
            fs.loaded = false;
        }
        fs.fz = finite(dynamic - ctx.rho * ctx.g * fs.a0, "section force")?;
        // both half-sections, along the body normal
        let normal = -2.0 * fs.fz * dx;
        fx -= normal * sin;
        fz_total += normal * cos;
        my += ctx.xi[i] * normal;
        frames.push(fs);
    }
    let hydro = [finite(fx, "Fx")?, finite(fz_total, "Fz")?, finite(my, "My")?];
    Ok(Assembly { frames, hydro, aero: aero_lift(state, ctx.aero.as_ref()) })
}

/// Added-mass matrix in `(x, z, theta)` from the loaded frames, using the
/// full-section added mass `k rho pi c^2 / 2` and midpoint integration.
/// Surge entries are zero; heave and pitch couple through the lever arm
/// `x - cog_x` (pitch positive nose-up, x positive towards the nose).
pub fn added_mass_matrix(mesh: &HullMesh, frames: &[FrameState], cog_x: f64, rho: f64) -> Matrix3<f64> {
    let (mut heave, mut coupling, mut pitch) = (0.0, 0.0, 0.0);
    for (frame, fs) in mesh.frames.iter().zip(frames) {
        if !fs.loaded {
            continue;
        }
        let m_a = fs.k * rho * std::f64::consts::PI * fs.wet.c * fs.wet.c / 2.0 * mesh.dx;
        let arm = frame.x - cog_x;
        heave += m_a;
        coupling += m_a * arm;
        pitch += m_a * arm * arm;
    }
    Matrix3::new(0.0, 0.0, 0.0, 0.0, heave, coupling, 0.0, coupling, pitch)
}

/// Dynamic and hydrostatic pressure grids (`n_frames x n_arc`, row-major).
pub fn pressure_fields(ctx: &LoadContext, frames: &[FrameState], theta: f64) -> (Vec<f32>, Vec<f32>) {
    let n_arc = ctx.mesh.n_arc;
    let mut dynamic = vec![0f32; ctx.mesh.n_frames * n_arc];
    let mut hydrostatic = vec![0f32; ctx.mesh.n_frames * n_arc];
    let cos = theta.cos();
    for (i, (frame, fs)) in ctx.mesh.frames.iter().zip(frames).enumerate() {
        if !fs.is_wetted() {
            continue;
        }
        let field = pressure_distribution(
            frame.section.arc(),
            &fs.kinematics(),
            ctx.rho,
            fs.k,
            ctx.g,
            fs.wet.t0,
            cos,
            &ctx.pressure,
        );
        for j in 0..n_arc {
            dynamic[i * n_arc + j] = field.dynamic[j] as f32;
            hydrostatic[i * n_arc + j] = field.hydrostatic[j] as f32;
        }
    }
    (dynamic, hydrostatic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_fuselage_mesh, Profile};
    use std::f64::consts::PI;

    fn still_scenario() -> Scenario {
        let mut s = Scenario::d150(70.0, 1.0);
        s.cog_from_nose_m = 10.0;
        s.cog_above_keel_m = 2.0;
        s
    }

    fn cylinder(length: f64, radius: f64, n: usize) -> HullMesh {
        build_fuselage_mesh(&Profile::cylinder(length, radius), n, 41).unwrap()
    }

    #[test]
    fn airborne_body_has_no_hydro_load() {
        let mesh = cylinder(20.0, 2.0, 50);
        let s = still_scenario();
        let ctx = LoadContext::new(&mesh, &s).unwrap();
        let state = BodyState { z: 5.0, u: 70.0, w: -1.0, ..Default::default() };
        let prev = vec![FrameState::default(); mesh.n_frames];
        let asm = assemble_loads(&ctx, &state, &prev, 1e-3).unwrap();
        assert_eq!(asm.hydro, [0.0; 3]);
        assert_eq!(asm.wetted_frames(), 0);
    }

    #[test]
    fn static_prism_carries_its_buoyancy() {
        // level cylinder resting at depth 0.5 m with no motion
        let (length, radius, draft) = (20.0, 2.0, 0.5);
        let mesh = cylinder(length, radius, 50);
        let s = still_scenario();
        let ctx = LoadContext::new(&mesh, &s).unwrap();
        let state = BodyState { z: s.cog_above_keel_m - draft, ..Default::default() };
        let mut prev = vec![FrameState::default(); mesh.n_frames];
        let mut asm = Assembly::default();
        for _ in 0..3 {
            asm = assemble_loads(&ctx, &state, &prev, 1e-3).unwrap();
            prev = asm.frames.clone();
        }
        let segment = radius * radius * ((radius - draft) / radius).acos()
            - (radius - draft) * (2.0 * radius * draft - draft * draft).sqrt();
        let expected = s.rho_water_kgm3 * s.g_mps2 * segment * length;
        assert!(((asm.hydro[1] - expected) / expected).abs() < 1e-3, "{} vs {expected}", asm.hydro[1]);
        assert!(asm.hydro[2].abs() / (expected * length) < 1e-9 || asm.hydro[2].abs() < 1e-6 * expected);
    }

    #[test]
    fn symmetric_immersion_about_cog_gives_no_moment() {
        let mesh = cylinder(20.0, 2.0, 50);
        let mut s = still_scenario();
        s.cog_from_nose_m = 10.0;
        let ctx = LoadContext::new(&mesh, &s).unwrap();
        let state = BodyState { z: s.cog_above_keel_m - 0.3, u: 0.0, w: -2.0, ..Default::default() };
        let prev = vec![FrameState::default(); mesh.n_frames];
        let asm = assemble_loads(&ctx, &state, &prev, 1e-3).unwrap();
        assert!(asm.hydro[1] > 0.0);
        assert!(asm.hydro[2].abs() < 1e-9 * asm.hydro[1] * 20.0);
    }

    fn loaded_frames(mesh: &HullMesh, c: impl Fn(f64) -> f64) -> Vec<FrameState> {
        mesh.frames
            .iter()
            .map(|f| FrameState { wet: Wetting { c: c(f.x), ..Default::default() }, k: 1.0, loaded: true, ..Default::default() })
            .collect()
    }

    #[test]
    fn added_mass_cases() {
        let mesh = cylinder(10.0, 1.0, 100);
        let dry = vec![FrameState::default(); mesh.n_frames];
        assert_eq!(added_mass_matrix(&mesh, &dry, 5.0, 1025.0), Matrix3::zeros());

        let (rho, c) = (1025.0, 0.4);
        let ma = added_mass_matrix(&mesh, &loaded_frames(&mesh, |_| c), 5.0, rho);
        assert!((ma[(1, 1)] - rho * PI * c * c / 2.0 * 10.0).abs() < 1e-9 * ma[(1, 1)]);
        assert!(ma[(1, 2)].abs() < 1e-9 * ma[(1, 1)]);
        assert_eq!(ma.row(0).iter().chain(ma.column(0).iter()).filter(|v| **v != 0.0).count(), 0);
        assert_eq!(ma, ma.transpose());
    }

    #[test]
    fn added_mass_linear_breadth_matches_refined_quadrature() {
        let (rho, cog) = (1000.0, 3.5);
        let c = |x: f64| 0.1 + 0.05 * x;
        let mesh = cylinder(10.0, 1.0, 100);
        let ma = added_mass_matrix(&mesh, &loaded_frames(&mesh, c), cog, rho);
        let fine = 400;
        let h = 10.0 / fine as f64;
        let (mut heave, mut coupling, mut pitch) = (0.0, 0.0, 0.0);
        for j in 0..fine {
            let x = (j as f64 + 0.5) * h;
            let m = rho * PI * c(x).powi(2) / 2.0 * h;
            heave += m;
            coupling += m * (x - cog);
            pitch += m * (x - cog).powi(2);
        }
        for (got, want) in [(ma[(1, 1)], heave), (ma[(1, 2)], coupling), (ma[(2, 2)], pitch)] {
            assert!(((got - want) / want).abs() < 1e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn lift_model_trim_and_slope() {
        let s = Scenario::tn2929_model_d();
        let aero = AeroModel::trimmed(s.aero.as_ref().unwrap(), &s);
        let trim = BodyState { theta: s.pitch0_deg.to_radians(), u: s.u0_mps, ..Default::default() };
        assert_eq!(aero_lift(&trim, Some(&aero))[1], s.mass_kg * s.g_mps2);
        assert_eq!(aero_lift(&trim, None), [0.0; 3]);
        let delta = 0.02;
        let tilted = BodyState { theta: trim.theta + delta, u: 0.8 * s.u0_mps, ..trim };
        let lift = aero_lift(&tilted, Some(&aero))[1];
        // hand evaluation: weight * (1 + slope * delta) * 0.8^2
        let oracle = s.mass_kg * s.g_mps2 * (1.0 + aero.lift_slope_per_rad * 0.02) * 0.64;
        assert!((lift - oracle).abs() < 1e-9 * lift);
    }
}
