//! Kinetic generation–recombination model on the periodic unit interval.
//!
//! Two species with densities f(x, v, t) and g(x, v, t) relax towards the
//! reaction profiles χ₁, χ₂ while being transported with velocity v. The crate
//! provides the phase-space discretization, a positivity-preserving splitting
//! solver, the linearized operators with their coercivity checks, the limiting
//! nonlinear diffusion equation and the diagnostics connecting them.

pub mod diagnostics;
pub mod error;
pub mod kinetic_solver;
pub mod linear_ops;
pub mod macro_solver;
pub mod phase_space;
pub mod spectral;

pub use error::{Error, Result, Species};
pub use phase_space::{DistributionPair, Model, PhaseGrid, ProfileKind};
