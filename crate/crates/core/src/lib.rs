//! Classical stochastic analog of a quantum Brownian particle.
//!
//! An ensemble of overdamped Brownian trajectories is coupled through a
//! Bohm drift computed from the ensemble's own kernel density estimate
//! (a McKean-Vlasov process). The crate also carries the closed-form
//! harmonic/Gaussian machinery and the statistics used to analyse runs.
//!
//! All quantities are nondimensional with `k_B T = gamma = 1`; the only
//! physics knob is `epsilon`.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bohm;
pub mod config;
pub mod density;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod observables;
pub mod output;
pub mod potentials;
pub mod quad;
pub mod rng;
pub mod sde;
pub mod special;

pub use bohm::{gaussian_quantum_drift, quantum_drift, BohmDrift};
pub use density::{estimate_density, DensityField, GridPolicy, GridSpec};
pub use error::{Error, Result};
pub use potentials::{PotentialSpec, StiffnessProtocol};
pub use sde::{run_classical, run_mckean_vlasov, Ensemble, SimulationConfig, TrajectoryArchive};
