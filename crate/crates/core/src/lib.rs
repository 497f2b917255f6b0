// Negated float comparisons (`!(x > 0.0)`) are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod criteria;
pub mod error;
pub mod hypergeom;
pub mod kernels;
pub mod radialops;
pub mod solver;
pub mod verify;
