//! Ditching load simulation with a strip-theory momentum method, load
//! datasets built from simulation sweeps, recurrent and Koopman surrogate
//! models, reduced-order baselines and evaluation utilities.

pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod hydro;
mod io;
pub mod nn;
pub mod rom;
pub mod surrogates;

pub use error::{Error, Result};
