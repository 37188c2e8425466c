//! Doppler cooling of emitters in free space and in lossy cavities:
//! analytic rates, Floquet steady states, mean-field dynamics and the
//! figure/sweep/validation drivers built on them.

// `!(x > 0.0)` style guards are intentional: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod floquet;
pub mod model;
pub mod quadrature;
pub mod state;

pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use floquet::FloquetSolution;
pub use model::{Model, Params, Scenario};
pub use state::{EmitterState, SystemState};
