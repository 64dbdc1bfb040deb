// Negated comparisons such as `!(dt > 0.0)` are used on purpose to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod filter;
pub mod harness;
pub mod lie;
pub mod models;
pub mod observability;
pub mod sim;
