//! Self-similar shocks, rarefactions, blow-up extensions and compactons of
//! fifth-order nonlinear dispersion equations.
//!
//! The crate is organised bottom-up: [`ode_core`] integrates initial-value
//! problems, [`models`] defines the similarity ODEs, [`shooting`] and [`bvp`]
//! compute profiles, [`asymptotics`] and [`analysis`] check them,
//! [`compactons`] and [`evolution`] cover travelling waves and smooth PDE runs,
//! and [`cli`] wires everything into the `nde5` binary.

pub mod analysis;
pub mod asymptotics;
pub mod band;
pub mod bvp;
pub mod cli;
pub mod compactons;
pub mod error;
pub mod evolution;
pub mod models;
pub mod ode_core;
pub mod parallel;
pub mod poly;
pub mod shooting;

pub use error::{Error, Result};
pub use models::{Jet5, NdeKind, Profile, ProfileKind, SimilarityParams};
