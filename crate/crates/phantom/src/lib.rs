//! Model files, tensor files, seeded workloads, sweeps and reports around
//! the `phantom-core` simulator.

pub mod error;
pub mod format;
pub mod memcmp;
pub mod model;
pub mod report;
pub mod selftest;
pub mod sweep;
pub mod synth;

pub use error::{Error, Result};
pub use model::{load_model, parse_model};
pub use report::{Balance, Row, Tds};
pub use sweep::{load_spec, run_model, run_sweep, RunSpec, SweepSpec};
