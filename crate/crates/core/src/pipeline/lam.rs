use alloc::vec::Vec;

use super::{lane_bits, CoreConfig, FOOTPRINT, LANES};
use crate::error::{bail, Result};

const FOOTPRINT_MASK: u16 = (1 << FOOTPRINT) - 1;

/// ANDed weight/activation masks for one lookahead window.
///
/// Each position is a 9-bit mask; lane `j` occupies bits `3j..3j+3`, slot
/// `k` of the lane being bit `3j + k`. Windows shorter than the lookahead
/// factor are padded with empty positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LamBlock {
    positions: Vec<u16>,
}

impl LamBlock {
    /// Block from already-ANDed masks, padded to `lf` positions.
    pub fn from_masks(masks: &[u16], lf: usize) -> Result<Self> {
        let mut b = LamBlock::default();
        b.fill(masks, lf)?;
        Ok(b)
    }

    pub(crate) fn fill(&mut self, masks: &[u16], lf: usize) -> Result<()> {
        if masks.len() > lf {
            bail!(Shape, "{} positions do not fit a lookahead window of {lf}", masks.len());
        }
        if let Some(m) = masks.iter().find(|&&m| m & !FOOTPRINT_MASK != 0) {
            bail!(Shape, "mask {m:#b} is wider than the {FOOTPRINT}-bit footprint");
        }
        self.positions.clear();
        self.positions.extend_from_slice(masks);
        self.positions.resize(lf, 0);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[u16] {
        &self.positions
    }

    pub(crate) fn positions_mut(&mut self) -> &mut [u16] {
        &mut self.positions
    }

    /// Bit group of `lane` at position `pos`.
    pub fn lane(&self, pos: usize, lane: usize) -> u8 {
        lane_bits(self.positions[pos], lane)
    }

    /// The per-lane sequence the selector for `lane` works on.
    pub fn lane_sequence(&self, lane: usize) -> Vec<u8> {
        (0..self.positions.len()).map(|p| self.lane(p, lane)).collect()
    }

    /// All-zero check of one position: `true` when any valid product exists.
    pub fn reduced(&self, pos: usize) -> bool {
        self.positions[pos] != 0
    }

    pub fn ones(&self) -> u32 {
        self.positions.iter().map(|m| m.count_ones()).sum()
    }

    /// Ones carried by each lane over the whole window.
    pub fn lane_loads(&self) -> [u32; LANES] {
        let mut loads = [0; LANES];
        for p in 0..self.positions.len() {
            for (j, load) in loads.iter_mut().enumerate() {
                *load += self.lane(p, j).count_ones();
            }
        }
        loads
    }
}

/// ANDs one kernel mask against up to `lf` window masks.
pub fn lam_generate(wmask: u16, amasks: &[u16], cfg: &CoreConfig) -> Result<LamBlock> {
    if wmask & !FOOTPRINT_MASK != 0 {
        bail!(Shape, "kernel mask {wmask:#b} is wider than the {FOOTPRINT}-bit footprint");
    }
    if let Some(m) = amasks.iter().find(|&&m| m & !FOOTPRINT_MASK != 0) {
        bail!(Shape, "window mask {m:#b} is wider than the {FOOTPRINT}-bit footprint");
    }
    let anded: Vec<u16> = amasks.iter().map(|&a| a & wmask).collect();
    LamBlock::from_masks(&anded, cfg.lf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::TdsVariant;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(lf: usize) -> CoreConfig {
        CoreConfig::new(lf, TdsVariant::OutOfOrder, false)
    }

    #[test]
    fn and_of_single_lane() {
        let b = lam_generate(0b101, &[0b111], &cfg(1)).unwrap();
        assert_eq!(b.lane(0, 0), 0b101);
    }

    #[test]
    fn reduced_bit_tracks_any_lane() {
        let b = lam_generate(0b111_111_111, &[0b000_010_000, 0], &cfg(3)).unwrap();
        assert!(b.reduced(0));
        assert_eq!(b.lane(0, 0), 0);
        assert!(!b.reduced(1));
        // padding
        assert_eq!(b.len(), 3);
        assert!(!b.reduced(2));
    }

    #[test]
    fn random_kernel_matches_bitwise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let w: [bool; 9] = core::array::from_fn(|_| rng.random_bool(0.5));
            let windows: [[bool; 9]; 3] = core::array::from_fn(|_| core::array::from_fn(|_| rng.random_bool(0.5)));
            let pack = |bits: &[bool; 9]| bits.iter().enumerate().fold(0u16, |m, (i, &b)| m | (b as u16) << i);
            let amasks: Vec<u16> = windows.iter().map(pack).collect();
            let b = lam_generate(pack(&w), &amasks, &cfg(3)).unwrap();
            for (i, win) in windows.iter().enumerate() {
                for j in 0..3 {
                    for k in 0..3 {
                        let expect = w[j * 3 + k] && win[j * 3 + k];
                        assert_eq!(b.lane(i, j) >> k & 1 == 1, expect);
                    }
                }
                assert_eq!(b.reduced(i), (0..9).any(|e| w[e] && win[e]));
            }
        }
    }

    #[test]
    fn oversized_masks_are_shape_errors() {
        assert!(matches!(lam_generate(1 << 9, &[1], &cfg(3)), Err(crate::Error::Shape(_))));
        assert!(matches!(lam_generate(1, &[1 << 12], &cfg(3)), Err(crate::Error::Shape(_))));
        assert!(matches!(lam_generate(1, &[1, 1, 1, 1], &cfg(3)), Err(crate::Error::Shape(_))));
    }
}
