//! Intra-core balancer.
//!
//! Position `i` of a lookahead window has its lane groups circularly shifted
//! right by `i mod 3` lanes before selection, so a lane that is dense for
//! every position is spread over all three selectors. The mapper undoes the
//! shift with the matching left rotation before looking up operands. The
//! core keeps a shifted window only when it selects in fewer iterations.

use alloc::vec::Vec;

use super::{LamBlock, LANES, SLOTS};

const LANE_MASK: u16 = (1 << SLOTS) - 1;

/// Right rotation (in lanes) applied to each position of a window.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RotationSchedule {
    amounts: Vec<u8>,
}

impl RotationSchedule {
    pub fn identity(len: usize) -> Self {
        RotationSchedule { amounts: alloc::vec![0; len] }
    }

    pub fn for_window(len: usize) -> Self {
        RotationSchedule { amounts: (0..len).map(|i| (i % LANES) as u8).collect() }
    }

    pub fn amount(&self, pos: usize) -> usize {
        self.amounts.get(pos).copied().unwrap_or(0) as usize
    }

    pub fn amounts(&self) -> &[u8] {
        &self.amounts
    }
}

/// Moves lane `j` of `mask` to lane `(j + by) mod 3`.
#[inline]
pub fn rotate_lanes_right(mask: u16, by: usize) -> u16 {
    let by = by % LANES;
    let mut out = 0;
    for j in 0..LANES {
        let group = (mask >> (j * SLOTS)) & LANE_MASK;
        out |= group << (((j + by) % LANES) * SLOTS);
    }
    out
}

/// Inverse of [`rotate_lanes_right`].
#[inline]
pub fn rotate_lanes_left(mask: u16, by: usize) -> u16 {
    rotate_lanes_right(mask, LANES - by % LANES)
}

/// Original lane of the data a selector sees on `lane` after a right
/// rotation by `amount`.
#[inline]
pub fn unrotate_lane(lane: usize, amount: usize) -> usize {
    (lane + LANES - amount % LANES) % LANES
}

/// Balanced copy of `block` plus the schedule needed to undo it.
pub fn intra_balance(block: &LamBlock) -> (LamBlock, RotationSchedule) {
    let mut out = block.clone();
    let schedule = balance_in_place(&mut out);
    (out, schedule)
}

pub(crate) fn balance_in_place(block: &mut LamBlock) -> RotationSchedule {
    let schedule = RotationSchedule::for_window(block.len());
    for (i, m) in block.positions_mut().iter_mut().enumerate() {
        *m = rotate_lanes_right(*m, i);
    }
    schedule
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn skewed_lane_is_spread() {
        let block = LamBlock::from_masks(&[0b111; 3], 3).unwrap();
        assert_eq!(block.lane_loads(), [9, 0, 0]);
        let (bal, sched) = intra_balance(&block);
        assert_eq!(bal.lane_loads(), [3, 3, 3]);
        assert_eq!(sched.amounts(), &[0, 1, 2]);
        assert_eq!(bal.positions(), &[0b000_000_111, 0b000_111_000, 0b111_000_000]);
    }

    #[test]
    fn symmetric_positions_keep_their_load() {
        let block = LamBlock::from_masks(&[0b011_011_011; 6], 6).unwrap();
        let (bal, _) = intra_balance(&block);
        assert_eq!(bal.lane_loads(), block.lane_loads());
        assert_eq!(bal.ones(), block.ones());
    }

    proptest! {
        #[test]
        fn rotation_inverts(mask in 0u16..512, by in 0usize..7) {
            prop_assert_eq!(rotate_lanes_left(rotate_lanes_right(mask, by), by), mask);
            prop_assert_eq!(rotate_lanes_right(mask, by).count_ones(), mask.count_ones());
        }

        #[test]
        fn unrotate_matches_mask_rotation(mask in 0u16..512, by in 0usize..3) {
            let rotated = rotate_lanes_right(mask, by);
            for lane in 0..LANES {
                let orig = unrotate_lane(lane, by);
                prop_assert_eq!((rotated >> (lane * SLOTS)) & 7, (mask >> (orig * SLOTS)) & 7);
            }
        }
    }
}
