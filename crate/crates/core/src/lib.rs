//! Numerical laboratory for information scrambling in two weakly coupled,
//! strongly chaotic kicked rotors and in the matching random-matrix model.
//!
//! Modules follow the physics: [`operators`] and [`kicked_rotor`] build the
//! quantum system, [`otoc`] and [`rmt`] evolve observables and fit the two
//! relaxation phases, [`classical`] supplies the Lyapunov reference,
//! [`phasespace`] tracks delocalization, and [`cli`] runs experiments.

extern crate openblas_src;

pub mod classical;
pub mod cli;
pub mod error;
pub mod kicked_rotor;
pub mod linalg;
pub mod operators;
pub mod otoc;
pub mod phasespace;
pub mod rmt;
pub mod seeding;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
