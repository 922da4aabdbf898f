//! Stability and Hopf-bifurcation toolkit for viscous strong detonations of
//! the one-dimensional reactive Navier-Stokes equations.

pub mod benchmarks;
pub mod bifurcation;
pub mod cli;
pub mod endstates;
pub mod evans;
pub mod error;
pub mod model;
pub mod numerics;
pub mod profile;
pub mod spectral;
pub mod structural_checks;
pub mod timesim;

pub use error::{DetonaError, Result};
pub use model::{ModelParams, State};
