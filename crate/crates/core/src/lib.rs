//! Identification of linear systems with bilinear observations
//! `y_t = u_t' C x_t + z_t` from a single input-output trajectory.

// `!(x > 0.0)` is used on purpose so NaN is rejected along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod excitation;
pub mod experiment;
pub mod hokalman;
pub mod io;
pub mod linalg;
pub mod par;
pub mod rng;
pub mod sysmodel;

pub use error::{Error, Result};
