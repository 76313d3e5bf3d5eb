//! Ring-LWE encrypted linear controllers with a closed-loop simulation
//! harness.
//!
//! Two encrypted realizations of the same observer-based controller are
//! provided: a recursive one whose state stays encrypted across steps
//! (RLWE/RGSW with coefficient packing and homomorphic unpacking), and a
//! non-recursive input-output one over a BGV-style exact scheme with NTT
//! slot packing. The `harness` module runs either loop against the four-tank
//! plant and reports performance error and timing.

pub mod bgv;
pub mod control;
pub mod error;
pub mod harness;
pub mod rgsw;
pub mod ring;
pub mod rlwe;

pub use error::{Error, Result};
