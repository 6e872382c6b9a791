//! Link-level simulation of the downlink of an FDD cell-free massive MIMO
//! network with limited feedback.
//!
//! The crate covers the whole chain from network geometry to Monte Carlo
//! sum-rate curves:
//!
//! * [`topology`]: scenario geometry on a wrap-around square, path loss,
//!   dominance factors and angles of departure (the long-term channel state).
//! * [`channel`]: Saleh-Valenzuela channel synthesis and the rate-distortion
//!   model of path-gain quantization.
//! * [`association`]: user-centric UE-AP association (initial clusters, the
//!   subset-search refinement and the beta/random baselines).
//! * [`allocation`]: water-filling of each AP's feedback budget over the
//!   paths of its UE group and the UE-side split of a per-UE budget.
//! * [`transmission`]: zero-forcing precoders, exact signal/interference
//!   powers and rates, and the closed-form surrogate rate.
//! * [`harness`]: per-drop protocol execution, parameter sweeps and CSV
//!   output.

pub mod allocation;
pub mod association;
pub mod channel;
pub mod config;
pub mod cvec;
pub mod error;
pub mod harness;
pub mod rng;
pub mod tensor;
pub mod topology;
pub mod transmission;
pub mod verify;

pub use allocation::{BitAllocation, WaterFill};
pub use association::Association;
pub use channel::{ChannelSet, QuantModel, QuantizedState, ShortTermState};
pub use config::{PhaseMode, SystemConfig};
pub use error::{Error, Result};
pub use harness::{ExperimentResult, SchemeSpec, SweepAxis};
pub use tensor::PathTensor;
pub use topology::{Geometry, LongTermState};
pub use transmission::{Precoder, RateReport, SurrogateReport};
