//! Link-level simulation of a sub-band full-duplex (SBFD) cell-free massive
//! MIMO system that senses targets on the DL sub-bands and receives uplink
//! users on the UL sub-band.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod assign;
pub mod channel;
pub mod error;
pub mod esprit;
pub mod grid;
pub mod harness;
pub mod radar;
pub mod rng;
pub mod scenario;
pub mod signal;
pub mod uplink;

pub use error::{Error, Result};
