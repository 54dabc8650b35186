//! Cycle-level simulator of a sparse CNN core that skips ineffectual
//! multiplications by looking ahead over several output positions, and of a
//! 2D grid of such cores.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod accelerator;
pub mod error;
pub mod oracle;
pub mod pipeline;
pub mod sparse_mask;

pub use error::{Error, Result};
