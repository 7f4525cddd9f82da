//! Exactly solvable non-Markovian qubit dynamics: a two-level system coupled
//! to a lossy cavity mode that is itself embedded in a bosonic bath.

pub mod dynamics;
pub mod error;
pub mod geomphase;
pub mod gfunction;
pub mod model;
pub mod ode;
pub mod phasediagram;
pub mod qsd;

pub use error::{Error, Result};
pub use model::{initial_state, validate_params, DensityMatrix2, Grid, ModelParams, PureState2, TimeSeries};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
