//! Thread mapper: turns one selector iteration into the operand registers of
//! the PEs.
//!
//! Each PE register is 50 bits: three 16-bit thread slots (weight in the low
//! byte, activation in the high byte) followed by the 2-bit L1 adder
//! configuration at bits 48..50.

use super::{unrotate_lane, Entry, L1Config, RotationSchedule, Selection, LANES, SLOTS};
use crate::error::{bail, Result};

/// Operands loaded into one multiplier thread. `source` is the
/// `(window position, original lane)` the product belongs to; `None` marks
/// a zero-padded thread.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThreadOperand {
    pub weight: i8,
    pub act: i8,
    pub source: Option<(u8, u8)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PeImage {
    pub threads: [ThreadOperand; SLOTS],
    pub l1: L1Config,
}

impl PeImage {
    /// Packed 50-bit register value.
    pub fn register(&self) -> u64 {
        let mut r = 0u64;
        for (t, th) in self.threads.iter().enumerate() {
            let slot = (th.weight as u8 as u64) | (th.act as u8 as u64) << 8;
            r |= slot << (16 * t);
        }
        r | (self.l1.bits() as u64) << (16 * SLOTS)
    }

    pub fn busy_threads(&self) -> usize {
        self.threads.iter().filter(|t| t.source.is_some()).count()
    }
}

/// Operand assignment of the whole compute engine for one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThreadMapImage {
    pub pes: [PeImage; LANES],
}

impl ThreadMapImage {
    pub const REGISTER_BITS: usize = 16 * SLOTS + 2;

    pub fn busy_threads(&self) -> usize {
        self.pes.iter().map(PeImage::busy_threads).sum()
    }
}

/// Builds the register image for iteration `t` of `sel`.
///
/// `window` holds the entries of the lookahead window (it may be shorter
/// than the lookahead factor at the end of a stream). Selected groups are
/// packed into their PE's threads in position order; when the block was
/// balanced, each group is traced back to its original lane through
/// `schedule` before the operands are read.
pub fn map_threads(sel: &Selection, t: usize, window: &[Entry], schedule: &RotationSchedule) -> Result<ThreadMapImage> {
    let mut image = ThreadMapImage::default();
    for (pe_idx, pe) in image.pes.iter_mut().enumerate() {
        let mut used = 0;
        let mut boundary = [false; SLOTS];
        let mut last_pos = None;
        for (pos, bits, _tag) in sel.lane(pe_idx).items(t) {
            let Some(entry) = window.get(pos) else {
                bail!(Invariant, "selection refers to padded position {pos}");
            };
            let lane = unrotate_lane(pe_idx, schedule.amount(pos));
            for slot in 0..SLOTS {
                if bits >> slot & 1 == 0 {
                    continue;
                }
                if used == SLOTS {
                    bail!(Invariant, "more than {SLOTS} ones mapped onto PE {pe_idx}");
                }
                let e = lane * SLOTS + slot;
                let (w, a) = (entry.weights[e], entry.acts[e]);
                if w == 0 || a == 0 {
                    bail!(Invariant, "selected product at position {pos} lane {lane} slot {slot} has a zero operand");
                }
                if used > 0 && last_pos != Some(pos) {
                    boundary[used] = true;
                }
                pe.threads[used] = ThreadOperand { weight: w, act: a, source: Some((pos as u8, lane as u8)) };
                last_pos = Some(pos);
                used += 1;
            }
        }
        pe.l1 = if used == 0 { L1Config::C1 } else { L1Config::from_boundaries(boundary[1], boundary[2]) };
    }
    Ok(image)
}

/// Number of `bits`-wide map patterns with at most `cap` ones.
pub fn admissible_map_patterns(bits: u32, cap: u32) -> usize {
    (0u32..1 << bits).filter(|p| p.count_ones() <= cap).count()
}

/// Storage model of the mapper lookup table: one register image per
/// admissible map pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapperStorage {
    pub patterns: usize,
    pub register_bits: usize,
}

impl MapperStorage {
    /// Table for a 3-position, 3-slot map with 3 threads per PE.
    pub fn canonical() -> Self {
        MapperStorage {
            patterns: admissible_map_patterns((LANES * SLOTS) as u32, SLOTS as u32),
            register_bits: ThreadMapImage::REGISTER_BITS,
        }
    }

    pub fn bytes_per_mapper(&self) -> f64 {
        (self.patterns * self.register_bits) as f64 / 8.0
    }

    /// Kilobytes (1000 bytes) for `mappers` copies of the table.
    pub fn kilobytes(&self, mappers: usize) -> f64 {
        self.bytes_per_mapper() * mappers as f64 / 1000.0
    }
}
