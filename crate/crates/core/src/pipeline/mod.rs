//! One computational core: lookahead masking, top-down selection, the
//! intra-core balancer, the thread mapper, the multi-threaded compute
//! engine, the tagged output buffer and the output encoder.
//!
//! The core consumes a stream of [`Entry`] values. Each entry is one
//! lookahead position: a 9-element footprint of weight/activation operand
//! pairs split into 3 lanes of 3 slots, plus the index of the output it
//! contributes to. Several entries may feed the same output (e.g. the input
//! channels of a regular convolution); the output buffer accumulates them.

mod balance;
mod compute;
mod encode;
mod engine;
mod lam;
mod mapper;
mod outbuf;
mod tds;

pub use balance::{intra_balance, rotate_lanes_left, rotate_lanes_right, unrotate_lane, RotationSchedule};
pub use compute::{l1_reduce, L1Config, L1Sums};
pub use encode::relu_encode;
pub use engine::{run_stream, simulate_core_chunk, time_stream, Entry, StreamResult};
pub use lam::{lam_generate, LamBlock};
pub use mapper::{admissible_map_patterns, map_threads, MapperStorage, PeImage, ThreadMapImage, ThreadOperand};
pub use outbuf::{ob_accumulate, Accumulated, Coord, OutputBuffer, Partial, TaggedEntry};
pub use tds::{tds_select, tds_select_in_order, tds_select_out_of_order, LaneSelection, Selection};

use crate::error::{bail, Result};

/// Lanes per lookahead position; one per PE.
pub const LANES: usize = 3;
/// Bits per lane; one per multiplier thread.
pub const SLOTS: usize = 3;
/// Operand pairs covered by one lookahead position.
pub const FOOTPRINT: usize = LANES * SLOTS;
/// Largest supported lookahead factor.
pub const MAX_LF: usize = 27;

/// Selection algorithm of the top-down selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TdsVariant {
    /// Halts an iteration at the first entry that would overflow the PE.
    InOrder,
    /// Keeps scanning past entries that do not fit.
    OutOfOrder,
}

/// Per-core knobs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CoreConfig {
    /// Lookahead factor. `1` models a dense core.
    pub lf: usize,
    pub pe_count: usize,
    pub threads_per_pe: usize,
    pub tds: TdsVariant,
    pub intra_balance: bool,
}

impl CoreConfig {
    /// 3 PEs of 3 threads with the given lookahead and selector.
    pub fn new(lf: usize, tds: TdsVariant, intra_balance: bool) -> Self {
        CoreConfig { lf, pe_count: LANES, threads_per_pe: SLOTS, tds, intra_balance }
    }

    /// Configuration used for the dense baseline.
    pub fn dense() -> Self {
        Self::new(1, TdsVariant::InOrder, false)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lf == 0 || self.lf > MAX_LF {
            bail!(Config, "lookahead factor {} outside 1..={MAX_LF}", self.lf);
        }
        // The L1 adder configurations C1-C4 are defined for exactly three
        // threads, and the lane width of the workload equals the thread count.
        if self.pe_count != LANES || self.threads_per_pe != SLOTS {
            bail!(
                Config,
                "only the {LANES} PE x {SLOTS} thread compute engine is modelled, got {} x {}",
                self.pe_count,
                self.threads_per_pe
            );
        }
        Ok(())
    }

    /// Multiplier threads in the core.
    pub fn threads(&self) -> usize {
        self.pe_count * self.threads_per_pe
    }

    /// Pipeline fill paid once per chunk stream when one mapper is reused
    /// sequentially for every PE.
    pub fn mapper_fill_cycles(&self) -> u64 {
        (self.pe_count - 1) as u64
    }
}

/// Cycle and work counters of one core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CycleStats {
    pub cycles: u64,
    pub valid_macs: u64,
    /// `cycles * pe_count * threads_per_pe`.
    pub mac_slots: u64,
}

impl CycleStats {
    pub fn utilization(&self) -> f64 {
        if self.mac_slots == 0 {
            0.0
        } else {
            self.valid_macs as f64 / self.mac_slots as f64
        }
    }
}

#[inline]
pub(crate) fn lane_bits(mask: u16, lane: usize) -> u8 {
    ((mask >> (lane * SLOTS)) & ((1 << SLOTS) - 1)) as u8
}
