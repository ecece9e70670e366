//! Random walks among random conductances on a discrete torus.
//!
//! The crate samples conductance environments (i.i.d. nearest-neighbour,
//! long-range percolation, stable-like, trap configurations), simulates the
//! jump chain and its continuous-time variants, solves the periodic corrector
//! equation, and evaluates functional inequalities and heat-kernel bounds
//! numerically.

pub mod analysis;
pub mod corrector;
pub mod env;
pub mod error;
pub mod lattice;
pub mod rng;
pub mod walk;

pub use env::{EnvMeta, Environment};
pub use error::{Error, Result};
pub use lattice::{Displacement, Geometry, Site, SiteSet};
