// Negated comparisons reject NaN on purpose; index loops follow the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod channel;
pub mod config;
pub mod csit;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod link;
pub mod multigw;
pub mod precoders;
pub mod presets;
pub mod scheduler;

pub use error::{Error, Result};
