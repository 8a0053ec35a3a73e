//! Planar rigid-body motion (surge, heave, pitch) driven by the integrated
//! strip loads, with the added-mass iteration in every step.

mod loads;
mod simulate;
mod solver;

use serde::{Deserialize, Serialize};

pub use loads::{
    added_mass_matrix, aero_lift, assemble_loads, pressure_fields, AeroModel, Assembly, FrameState, LoadContext,
};
pub use simulate::{
    initial_state, rigid_mass, simulate, step, EndReason, FieldSnapshot, LoadHistory, MotionSample, SimOptions,
    SimulationFailure, StepOutcome, CONTACT_FORCE_N,
};
pub use solver::{semi_implicit_euler, solve_accelerations, Convergence, ACC_TOL, MAX_ITERATIONS};

/// CoG position `(x, z)` in earth axes (z up, calm water at z = 0), pitch
/// `theta` positive nose-up, and their rates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub theta: f64,
    pub u: f64,
    pub w: f64,
    pub q: f64,
}

impl BodyState {
    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.z, self.theta, self.u, self.w, self.q].iter().all(|v| v.is_finite())
    }
}
