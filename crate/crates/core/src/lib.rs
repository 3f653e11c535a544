//! Adaptive purification planning for entanglement distribution.
//!
//! The crate is layered bottom-up:
//!
//! * [`physics`]: closed-form recurrence maps, noise conversion, decoherence
//!   and swapping on Werner and Bell-diagonal pairs.
//! * [`timing`]: generation probabilities, round times and waiting-time
//!   statistics.
//! * [`ghz`] and [`cv`]: post-stage models for multipartite states and
//!   continuous-variable amplification.
//! * [`planner`]: frontier dynamic programming over per-link purification
//!   depth and protocol.
//! * [`controller`]: the validated request/response facade.
//! * [`sweep`]: parameter sweeps, baselines and latency benchmarks.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod cv;
pub mod error;
pub mod ghz;
pub mod physics;
pub mod planner;
pub mod sweep;
pub mod timing;

pub use controller::{ApcController, Mode, PlanFile, PlanRequest, PlanResponse};
pub use error::{ApcError, IssueCode, Result, ValidationReport};
pub use physics::{
    BellDiagonal, DeviceNoise, Fidelity, GateCounts, PairState, Protocol, StateModel,
};
pub use planner::{
    plan_frontier, plan_path, LinkChoice, LinkOutcome, Objective, PathRequest, Plan, PlannerConfig,
};
pub use timing::{GenAgg, LinkParams, TimingParams};
