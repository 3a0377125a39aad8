//! Decentralized learning for optimal load shedding.
//!
//! The pipeline: parse a grid case ([`net_model`]), simulate pre- and
//! post-contingency steady states ([`power_flow`]), solve the DC optimal
//! load shedding problem for nodal marginal costs ([`ols`]), verify that
//! local measurements can distinguish contingencies ([`identifiability`]),
//! and train one small neural model per load bus that predicts its marginal
//! cost from local data only ([`learning`]).
//!
//! See the `examples/` directory for one runnable program per capability and
//! the `gridshed` binary for the batch-study CLI.

pub mod config;
pub mod identifiability;
pub mod learning;
pub mod net_model;
pub mod numerics;
pub mod ols;
pub mod power_flow;
pub mod report;
pub mod test_cases;
