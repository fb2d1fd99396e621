// `!(x <= tol)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod darboux;
pub mod error;
pub mod evolution;
pub mod matrix;
pub mod oracle;
pub mod scenario;
pub mod seed;
