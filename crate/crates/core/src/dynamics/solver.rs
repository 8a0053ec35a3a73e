//! Added-mass fixed-point iteration and the semi-implicit Euler update.

use nalgebra::{Matrix3, Vector3};

use super::BodyState;
use crate::error::{Error, Result};

pub const ACC_TOL: f64 = 1e-6;
pub const MAX_ITERATIONS: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Convergence {
    pub acc: Vector3<f64>,
    pub iterations: usize,
}

/// Iterates `acc <- (M + MA(acc))^-1 f(acc)` until the componentwise change
/// drops below `tol`. `eval` returns the force vector and added-mass matrix
/// for a trial acceleration.
pub fn solve_accelerations<F>(
    mass: &Matrix3<f64>,
    guess: Vector3<f64>,
    tol: f64,
    max_iterations: usize,
    t: f64,
    mut eval: F,
) -> Result<Convergence>
where
    F: FnMut(&Vector3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)>,
{
    let mut acc = guess;
    let mut change = f64::INFINITY;
    for k in 0..max_iterations {
        let (force, added) = eval(&acc)?;
        let next = (mass + added)
            .lu()
            .solve(&force)
            .ok_or_else(|| Error::Step { t, iterations: k + 1, detail: "singular mass matrix".into() })?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("acceleration at t={t}")));
        }
        change = (next - acc).amax();
        acc = next;
        if change < tol {
            return Ok(Convergence { acc, iterations: k + 1 });
        }
    }
    Err(Error::Step {
        t,
        iterations: max_iterations,
        detail: format!("last acceleration change {change:e}, acc = {:?}", acc.as_slice()),
    })
}

/// Velocities first, then positions with the new velocities.
pub fn semi_implicit_euler(state: &BodyState, acc: &Vector3<f64>, dt: f64) -> BodyState {
    let u = state.u + acc[0] * dt;
    let w = state.w + acc[1] * dt;
    let q = state.q + acc[2] * dt;
    BodyState {
        t: state.t + dt,
        x: state.x + u * dt,
        z: state.z + w * dt,
        theta: state.theta + q * dt,
        u,
        w,
        q,
    }
}
