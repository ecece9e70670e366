//! Periodic corrector, effective covariance and growth diagnostics.

mod generator;
mod sigma;
mod solver;
mod sublinearity;
mod trap_energy;

pub use generator::{assemble, GeneratorMatrix};
pub use sigma::{covariance_sigma, SigmaMatrix};
pub use solver::{
    check_connected, drift, harmonic_residual, pcg, solve_corrector, CgOutcome, CorrectorField,
    SolverOptions,
};
pub use sublinearity::{sublinearity_profile, SublinearityProfile};
pub use trap_energy::{trap_energy_check, TrapEnergyReport};
