//! Time-optimal state transfer under constraints on the available Hamiltonians.

pub mod cli;
pub mod error;
pub mod general;
pub mod hilbert;
pub mod io;
pub mod isotropic;
pub mod optimize;
pub mod qubit_restricted;
pub mod propagator;

pub use error::{Error, Result};
