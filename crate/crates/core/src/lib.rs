// NaN-rejecting checks are written as `!(x > y)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotic;
pub mod corrector;
pub mod discretize;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod gradients;
pub mod interconnect;
pub mod io;
pub mod levelset;
pub mod linalg;
#[cfg(feature = "oracle")]
pub mod oracle;
pub mod synthesis;
pub mod system;
pub mod transfer;
