// `!(a < b)` keeps NaN on the failing side throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clearing;
pub mod cli;
pub mod economy;
pub mod equilibrium;
pub mod error;
pub mod preferences;
pub mod special_math;
pub mod verification;

pub use error::{PceError, Result};
