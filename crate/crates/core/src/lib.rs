#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::too_many_arguments, clippy::type_complexity)]

pub mod burgers;
pub mod congruence;
pub mod density;
pub mod error;
pub mod expr;
pub mod flow;
pub mod frame;
pub mod geometry;
pub mod glide;
pub mod kinematics;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};
