// NaN inputs must fail range checks, so `!(x >= 0.0)` style guards are deliberate.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dist;
pub mod engine;
pub mod error;
pub mod exact;
pub mod io;
pub mod quad;
pub mod rng;
pub mod ssr;
pub mod tost;
pub mod trial;
pub mod validate;

pub use error::{Error, Result};
