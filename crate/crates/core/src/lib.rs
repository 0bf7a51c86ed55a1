#![no_std]
// index loops follow the tensor notation; negated comparisons also reject NaN
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]
extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bath;
pub mod error;
pub mod hilbert;
pub mod langevin;
pub mod linalg;
pub mod master;
pub mod params;
pub mod quadrature;
pub mod tensor;

pub use error::{Error, Result};
pub use params::{PhysicalParams, Units};
