//! Contraction-theory toolkit for optimization flows.
//!
//! The crate is organised bottom-up:
//!
//! * [`objectives`] strongly convex, smooth objective oracles (optionally time-varying)
//! * [`flows`] the momentum family of optimization ODEs and the ACCONEST flow
//! * [`contraction`] weighted norms, matrix measures and sampled contraction certificates
//! * [`integrators`] explicit/implicit Euler, an RK4 reference integrator and Nesterov's method
//! * [`analysis`] theoretical convergence and tracking envelopes, Lyapunov checks, experiments
//! * [`cli`] experiment configuration, output files and the `contraflow` subcommands

pub mod analysis;
pub mod cli;
pub mod contraction;
mod error;
pub mod flows;
pub mod integrators;
pub mod linalg;
pub mod objectives;
pub mod sampling;

pub use error::{Error, Result};
