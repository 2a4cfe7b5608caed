//! Monte Carlo simulator of grant-free random access on a single-cell NOMA
//! uplink, where devices learn (slot, transmit level) choices with
//! stateless Q-learning and the central node separates colliding signals
//! with successive interference cancellation.
//!
//! Realizations are independent and are spread over a rayon pool when the
//! `parallel` feature (on by default) is enabled; without it the sweep runs
//! sequentially with bit-identical results.

pub mod agent;
pub mod channel;
pub mod engine;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod receiver;

pub use error::{Error, Result};
pub use model::{
    sinr_threshold_from_se, Device, LevelMode, Protocol, RunResult, SlotOutcome, SystemParams,
    TraceRecord, TransmissionAttempt,
};
