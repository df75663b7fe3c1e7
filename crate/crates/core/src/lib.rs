//! Magnifying-lens abstraction solvers for turn-based stochastic games.
//!
//! The concrete model and classical solvers live in [`game`]; [`partition`]
//! holds the region trees; [`mpre`] the region-aware predecessor operators;
//! [`discounted`] and [`longrun`] the abstraction-refinement solvers;
//! [`models`] the benchmark generators; and [`report`] the run reports.

mod error;
pub mod game;
pub mod discounted;
pub mod longrun;
pub mod models;
pub mod mpre;
pub mod partition;
pub mod report;

pub use error::{MlaError, Result};
