//! Time marching of a scenario and the recorded load history.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::loads::{added_mass_matrix, assemble_loads, pressure_fields, Assembly, FrameState, LoadContext};
use super::solver::{semi_implicit_euler, solve_accelerations, ACC_TOL, MAX_ITERATIONS};
use super::BodyState;
use crate::error::{Error, Result};
use crate::geometry::{HullMesh, MotionMode, Scenario};

/// Total vertical hydrodynamic force that counts as water contact.
pub const CONTACT_FORCE_N: f64 = 1.0;

/// One rigid-body sample per solver step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MotionSample {
    pub state: BodyState,
    pub acc: [f64; 3],
    pub hydro: [f64; 3],
    pub aero: [f64; 3],
    pub wetted_frames: usize,
    pub fallback_frames: usize,
    pub iterations: usize,
}

/// Pressure grids of one recorded step, `n_frames x n_arc` row-major, and
/// the half-section force per frame.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FieldSnapshot {
    pub step: usize,
    pub t: f64,
    pub dynamic: Vec<f32>,
    pub hydrostatic: Vec<f32>,
    pub fz: Vec<f32>,
}

impl FieldSnapshot {
    pub fn total(&self) -> Vec<f32> {
        self.dynamic.iter().zip(&self.hydrostatic).map(|(d, h)| d + h).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EndReason {
    #[default]
    EndTime,
    AfterImpactWindow,
    AtRest,
}

/// Motion at every step from `t = 0`; pressure fields from the impact step
/// on, every `record_every` steps. Fields before impact are all zero and
/// are not stored.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadHistory {
    pub dt: f64,
    pub n_frames: usize,
    pub n_arc: usize,
    pub record_every: usize,
    pub samples: Vec<MotionSample>,
    pub fields: Vec<FieldSnapshot>,
    pub impact_step: Option<usize>,
    pub exit_times: Vec<f64>,
    pub end: EndReason,
}

impl LoadHistory {
    pub fn impact_time(&self) -> Option<f64> {
        self.impact_step.map(|s| self.samples[s].state.t)
    }

    pub fn field_at_step(&self, step: usize) -> Option<&FieldSnapshot> {
        let first = self.fields.first()?.step;
        if step < first || (step - first) % self.record_every != 0 {
            return None;
        }
        self.fields.get((step - first) / self.record_every)
    }

    /// Dynamic pressure at one grid point over the recorded steps.
    pub fn pressure_trace(&self, frame: usize, arc: usize) -> Vec<(f64, f32)> {
        self.fields.iter().map(|f| (f.t, f.dynamic[frame * self.n_arc + arc])).collect()
    }

    pub fn motion_csv(&self) -> String {
        let mut out = String::from(
            "t_s,x_m,z_m,pitch_deg,u_mps,w_mps,q_degps,fx_hydro_n,fz_hydro_n,my_hydro_nm,fz_aero_n,wetted_frames,fallback_frames,iterations\n",
        );
        for s in &self.samples {
            let b = &s.state;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                b.t,
                b.x,
                b.z,
                b.theta.to_degrees(),
                b.u,
                b.w,
                b.q.to_degrees(),
                s.hydro[0],
                s.hydro[1],
                s.hydro[2],
                s.aero[1],
                s.wetted_frames,
                s.fallback_frames,
                s.iterations
            );
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SimOptions {
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { record_every: 1 }
    }
}

/// A failed run with everything recorded up to the failing step.
#[derive(Debug)]
pub struct SimulationFailure {
    pub error: Error,
    pub partial: LoadHistory,
}

impl From<Box<SimulationFailure>> for Error {
    fn from(f: Box<SimulationFailure>) -> Self {
        f.error
    }
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub state: BodyState,
    pub acc: Vector3<f64>,
    pub assembly: Assembly,
    pub iterations: usize,
}

pub fn rigid_mass(scenario: &Scenario) -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(scenario.mass_kg, scenario.mass_kg, scenario.inertia_yy_kgm2))
}

/// One free-motion step: added-mass iteration, then the semi-implicit
/// Euler update; loads are re-assembled at the converged state.
pub fn step(
    ctx: &LoadContext,
    mass: &Matrix3<f64>,
    state: &BodyState,
    prev: &[FrameState],
    guess: Vector3<f64>,
    dt: f64,
) -> Result<StepOutcome> {
    let weight = mass[(1, 1)] * ctx.g;
    let cog_x = ctx.cog_x();
    let forces = |acc: &Vector3<f64>| -> Result<(Vector3<f64>, Assembly)> {
        let trial = semi_implicit_euler(state, acc, dt);
        let asm = assemble_loads(ctx, &trial, prev, dt)?;
        let f = asm.total();
        Ok((Vector3::new(f[0], f[1] - weight, f[2]), asm))
    };
    let conv = solve_accelerations(mass, guess, ACC_TOL, MAX_ITERATIONS, state.t + dt, |acc| {
        let (f, asm) = forces(acc)?;
        let added = added_mass_matrix(ctx.mesh, &asm.frames, cog_x, ctx.rho);
        // the fixed point of (M + MA) a = f(a) + MA a is M a = f(a)
        Ok((f + added * acc, added))
    })?;
    let next = semi_implicit_euler(state, &conv.acc, dt);
    if !(next.theta.abs() < std::f64::consts::FRAC_PI_2) || !next.is_finite() {
        return Err(Error::NonFinite(format!("body state at t={}: {next:?}", next.t)));
    }
    let (_, assembly) = forces(&conv.acc)?;
    Ok(StepOutcome { state: next, acc: conv.acc, assembly, iterations: conv.iterations })
}

/// Initial state with the lowest keel point `initial_clearance_m` above
/// calm water.
pub fn initial_state(ctx: &LoadContext, scenario: &Scenario) -> BodyState {
    let theta = scenario.pitch0_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let lowest = ctx.xi.iter().zip(&ctx.zeta).map(|(x, z)| x * sin + z * cos).fold(f64::INFINITY, f64::min);
    BodyState {
        t: 0.0,
        x: 0.0,
        z: scenario.initial_clearance_m - lowest,
        theta,
        u: scenario.u0_mps,
        w: -scenario.w0_mps,
        q: 0.0,
    }
}

fn at_rest(s: &BodyState, u0: f64) -> bool {
    s.u.abs() < 1e-2 * u0 && s.w.abs() < 1e-2 && s.q.abs() < 1e-2
}

/// Marches the scenario until `t_end`, the post-impact window closes or the
/// body comes to rest.
pub fn simulate(
    scenario: &Scenario,
    mesh: &HullMesh,
    options: SimOptions,
) -> std::result::Result<LoadHistory, Box<SimulationFailure>> {
    let fail = |error: Error, partial: LoadHistory| Box::new(SimulationFailure { error, partial });
    let mut history = LoadHistory {
        dt: scenario.dt_s,
        n_frames: mesh.n_frames,
        n_arc: mesh.n_arc,
        record_every: options.record_every.max(1),
        ..Default::default()
    };
    if let Err(e) = scenario.validate() {
        return Err(fail(e, history));
    }
    let ctx = match LoadContext::new(mesh, scenario) {
        Ok(c) => c,
        Err(e) => return Err(fail(e, history)),
    };
    let mass = rigid_mass(scenario);
    let start = initial_state(&ctx, scenario);
    history.samples.push(MotionSample { state: start, ..Default::default() });

    let dt = scenario.dt_s;
    let n_steps = (scenario.t_end_s / dt).round() as usize;
    let mut state = start;
    let mut prev: Vec<FrameState> = ctx.k.iter().map(|&k| FrameState { k, ..Default::default() }).collect();
    let mut guess = Vector3::new(0.0, -scenario.g_mps2, 0.0);
    let mut in_contact = false;
    for n in 1..=n_steps {
        let outcome = match scenario.mode {
            MotionMode::Free => step(&ctx, &mass, &state, &prev, guess, dt),
            MotionMode::Guided => {
                let t = n as f64 * dt;
                let next = BodyState { t, x: start.x + start.u * t, z: start.z + start.w * t, ..start };
                assemble_loads(&ctx, &next, &prev, dt).map(|assembly| StepOutcome {
                    state: next,
                    acc: Vector3::zeros(),
                    assembly,
                    iterations: 0,
                })
            }
        };
        let out = match outcome {
            Ok(o) => o,
            Err(e) => return Err(fail(e, history)),
        };
        let asm = &out.assembly;
        history.samples.push(MotionSample {
            state: out.state,
            acc: [out.acc[0], out.acc[1], out.acc[2]],
            hydro: asm.hydro,
            aero: asm.aero,
            wetted_frames: asm.wetted_frames(),
            fallback_frames: asm.fallback_frames(),
            iterations: out.iterations,
        });

        let contact = asm.hydro[1] > CONTACT_FORCE_N;
        if history.impact_step.is_none() && contact {
            history.impact_step = Some(n);
        }
        if history.impact_step.is_some() && in_contact && !contact {
            history.exit_times.push(out.state.t);
        }
        in_contact = contact;
        if let Some(impact) = history.impact_step {
            if (n - impact) % history.record_every == 0 {
                let (dynamic, hydrostatic) = pressure_fields(&ctx, &asm.frames, out.state.theta);
                history.fields.push(FieldSnapshot {
                    step: n,
                    t: out.state.t,
                    dynamic,
                    hydrostatic,
                    fz: asm.frames.iter().map(|f| f.fz as f32).collect(),
                });
            }
        }

        state = out.state;
        guess = out.acc;
        prev = out.assembly.frames;
        if let Some(impact) = history.impact_step {
            let since = (n - impact) as f64 * dt;
            if scenario.stop_after_impact_s.is_some_and(|w| since >= w) {
                history.end = EndReason::AfterImpactWindow;
                break;
            }
            if scenario.mode == MotionMode::Free && since > 0.1 && at_rest(&state, scenario.u0_mps) {
                history.end = EndReason::AtRest;
                break;
            }
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_fuselage_mesh, Profile};

    fn small_cylinder_scenario() -> (Scenario, HullMesh) {
        let mesh = build_fuselage_mesh(&Profile::cylinder(10.0, 1.0), 40, 21).unwrap();
        let mut s = Scenario::d150(30.0, 0.0);
        s.mass_kg = 5000.0;
        s.inertia_yy_kgm2 = 5000.0 * 100.0 / 12.0;
        s.cog_from_nose_m = 5.0;
        s.cog_above_keel_m = 1.0;
        s.t_end_s = 0.5;
        s.stop_after_impact_s = None;
        (s, mesh)
    }

    #[test]
    fn airborne_step_accelerates_with_gravity() {
        let (s, mesh) = small_cylinder_scenario();
        let ctx = LoadContext::new(&mesh, &s).unwrap();
        let state = BodyState { z: 10.0, u: 30.0, ..Default::default() };
        let prev = vec![FrameState::default(); mesh.n_frames];
        let out = step(&ctx, &rigid_mass(&s), &state, &prev, Vector3::zeros(), s.dt_s).unwrap();
        assert_eq!(out.acc, Vector3::new(0.0, -s.g_mps2, 0.0));
    }

    #[test]
    fn level_flight_never_touches_water() {
        let (mut s, mesh) = small_cylinder_scenario();
        s.g_mps2 = 0.0;
        s.initial_clearance_m = 0.5;
        let h = simulate(&s, &mesh, SimOptions::default()).unwrap();
        assert!(h.impact_step.is_none());
        assert!(h.fields.is_empty());
        assert!(h.samples.iter().all(|m| m.hydro == [0.0; 3]));
        let last = h.samples.last().unwrap().state;
        assert!((last.u - 30.0).abs() < 1e-12 && last.w == 0.0);
    }

    #[test]
    fn free_fall_follows_discrete_parabola() {
        let (mut s, mesh) = small_cylinder_scenario();
        s.initial_clearance_m = 100.0;
        s.w0_mps = 1.5;
        s.t_end_s = 1.0;
        let h = simulate(&s, &mesh, SimOptions::default()).unwrap();
        let (z0, w0, g, dt) = (h.samples[0].state.z, -1.5, s.g_mps2, s.dt_s);
        for (n, m) in h.samples.iter().enumerate() {
            let t = n as f64 * dt;
            // semi-implicit Euler: exact parabola shifted by -g dt t / 2
            let z = z0 + w0 * t - g * t * t / 2.0 - g * dt * t / 2.0;
            assert!((m.state.z - z).abs() < 1e-9, "step {n}");
        }
    }

    #[test]
    fn constant_time_step_history() {
        let (mut s, mesh) = small_cylinder_scenario();
        s.w0_mps = 1.0;
        s.t_end_s = 0.2;
        let h = simulate(&s, &mesh, SimOptions { record_every: 4 }).unwrap();
        for pair in h.samples.windows(2) {
            assert!((pair[1].state.t - pair[0].state.t - s.dt_s).abs() < 1e-12);
        }
        let impact = h.impact_step.expect("sinking body must touch water");
        assert_eq!(h.fields[0].step, impact);
        assert!(h.fields.windows(2).all(|w| w[1].step - w[0].step == 4));
        assert!(h.field_at_step(impact + 4).is_some() && h.field_at_step(impact + 1).is_none());
    }
}
