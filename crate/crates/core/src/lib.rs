//! Simulation and optimization toolkit for full-duplex RSMA systems whose base
//! station and user equipment carry movable antennas.
//!
//! The crate is organised bottom-up:
//!
//! - [`scalar`] and [`autodiff`]: a real scalar abstraction with a reverse-mode
//!   tape, so every channel and rate formula is written once and evaluated either
//!   on plain `f64` or on differentiable [`autodiff::Var`]s.
//! - [`channel`]: field-response channel synthesis and random instance sampling.
//! - [`rates`]: downlink common/private and uplink SIC rates, sum-rate objective.
//! - [`constraints`]: projections, the antenna step regulator, the penalised
//!   meta-loss and feasibility reporting.
//! - [`gml`]: the gradient-based meta-learning optimizer and a multi-start
//!   projected-gradient reference.
//! - [`experiment`]: batch sweeps, record emission and summaries.

pub mod autodiff;
pub mod channel;
pub mod config;
pub mod constraints;
pub mod error;
pub mod experiment;
pub mod gml;
pub mod rates;
pub mod scalar;
pub mod variables;

pub use config::{Scenario, StreamId, StreamKind, SystemConfig};
pub use error::{Error, Result};
pub use scalar::{Cx, Scalar};
pub use variables::{Block, DecisionVariables, Mobility, Positions};
