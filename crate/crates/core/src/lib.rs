//! Pulse synthesis and simulation of geometric SNAP gates on a dispersively
//! coupled qubit–oscillator.
//!
//! Units are SI throughout: angular frequencies in rad/s, times in seconds.

pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod metrics;
pub mod ode;
pub mod par;
pub mod pulse;
pub mod qocf;
pub mod system;

pub use error::{Error, Result};
pub use par::Execution;
