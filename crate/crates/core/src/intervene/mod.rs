//! Token selectors and the zeroing / interchange / layer-swap interventions.

mod runner;
mod selector;

pub use runner::{run, run_interchange, run_layer_swap, run_zero, Intervention, ZeroMode};
pub use selector::{resolve, TokenSelector};
