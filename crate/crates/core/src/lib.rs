//! Finite-volume solver suite for taxis-coupled reaction-diffusion systems
//! with an indirectly produced chemical signal, and for the fast-signal
//! limit in which the signal equals the prey/competitor density. Includes
//! trajectory analysis: a priori bound monitors and relaxation-rate sweeps.

pub mod analysis;
pub mod config;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod linalg;
pub mod mesh;
pub mod mms;
pub mod models;
pub mod operators;
pub mod snapshot;

pub use error::{Result, SimError};
