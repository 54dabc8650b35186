//! Top-down selector.
//!
//! One selector per lane walks the lane's bit groups of a lookahead window
//! and packs whole groups into iterations holding at most `threads_per_pe`
//! ones. Every iteration costs one cycle. Groups are never split, so a
//! (position, lane) pair is complete, and its tag set, in the iteration
//! that selects it.

use alloc::vec::Vec;

use super::{CoreConfig, LamBlock, TdsVariant, LANES};

/// Iterations chosen by one selector. Each iteration is a bitset over
/// window positions.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct LaneSelection {
    groups: Vec<u8>,
    iterations: Vec<u32>,
}

impl LaneSelection {
    pub fn iterations(&self) -> &[u32] {
        &self.iterations
    }

    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// `(position, bit group, tag)` triples picked in iteration `t`, in
    /// position order.
    pub fn items(&self, t: usize) -> impl Iterator<Item = (usize, u8, bool)> + '_ {
        let set = self.iterations.get(t).copied().unwrap_or(0);
        BitIter(set).map(move |p| (p, self.groups[p], true))
    }

    /// Ones placed in iteration `t`.
    pub fn ones_in(&self, t: usize) -> u32 {
        self.items(t).map(|(_, g, _)| g.count_ones()).sum()
    }

    fn reset(&mut self, groups: &[u8]) {
        self.groups.clear();
        self.groups.extend_from_slice(groups);
        self.iterations.clear();
    }
}

struct BitIter(u32);

impl Iterator for BitIter {
    type Item = usize;
    fn next(&mut self) -> Option<usize> {
        if self.0 == 0 {
            return None;
        }
        let p = self.0.trailing_zeros() as usize;
        self.0 &= self.0 - 1;
        Some(p)
    }
}

fn in_order_into(groups: &[u8], cap: u32, out: &mut LaneSelection) {
    out.reset(groups);
    let n = groups.len();
    let mut i = 0;
    loop {
        while i < n && groups[i] == 0 {
            i += 1;
        }
        if i == n {
            break;
        }
        let mut set = 1u32 << i;
        let mut count = groups[i].count_ones();
        i += 1;
        while i < n {
            let c = groups[i].count_ones();
            if count + c > cap {
                break;
            }
            if c > 0 {
                set |= 1 << i;
                count += c;
            }
            i += 1;
        }
        out.iterations.push(set);
    }
}

fn out_of_order_into(groups: &[u8], cap: u32, reversed: bool, out: &mut LaneSelection) {
    out.reset(groups);
    let n = groups.len();
    let mut remaining: u32 = 0;
    for (p, &g) in groups.iter().enumerate() {
        if g != 0 {
            remaining |= 1 << p;
        }
    }
    while remaining != 0 {
        let mut set = 0u32;
        let mut count = 0;
        let mut consider = |p: usize| {
            if remaining >> p & 1 == 0 {
                return;
            }
            let c = groups[p].count_ones();
            if set == 0 || count + c <= cap {
                set |= 1 << p;
                count += c;
            }
        };
        if reversed {
            (0..n).rev().for_each(&mut consider);
        } else {
            (0..n).for_each(&mut consider);
        }
        remaining &= !set;
        out.iterations.push(set);
    }
}

/// In-order selection over one lane.
pub fn tds_select_in_order(lane: &[u8], cfg: &CoreConfig) -> LaneSelection {
    let mut out = LaneSelection::default();
    in_order_into(lane, cfg.threads_per_pe as u32, &mut out);
    out
}

/// Out-of-order selection over one lane. `reversed` scans bottom-up, the
/// priority used on every other window.
pub fn tds_select_out_of_order(lane: &[u8], cfg: &CoreConfig, reversed: bool) -> LaneSelection {
    let mut out = LaneSelection::default();
    out_of_order_into(lane, cfg.threads_per_pe as u32, reversed, &mut out);
    out
}

/// Selections of all lanes of one window.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Selection {
    lanes: [LaneSelection; LANES],
}

impl Selection {
    pub fn lane(&self, lane: usize) -> &LaneSelection {
        &self.lanes[lane]
    }

    /// Cycles the window occupies the selectors: the slowest lane.
    pub fn iterations(&self) -> usize {
        self.lanes.iter().map(LaneSelection::len).max().unwrap_or(0)
    }

    pub fn selected_ones(&self) -> u32 {
        self.lanes.iter().map(|l| (0..l.len()).map(|t| l.ones_in(t)).sum::<u32>()).sum()
    }
}

/// Runs every lane's selector over `block`. `window` is the index of the
/// block in its chunk stream; out-of-order priority flips on odd windows.
pub fn tds_select(block: &LamBlock, cfg: &CoreConfig, window: usize) -> Selection {
    let mut sel = Selection::default();
    tds_select_into(block, cfg, window, &mut sel);
    sel
}

pub(crate) fn tds_select_into(block: &LamBlock, cfg: &CoreConfig, window: usize, sel: &mut Selection) {
    let cap = cfg.threads_per_pe as u32;
    let mut groups = [0u8; super::MAX_LF];
    let n = block.len();
    for (j, lane) in sel.lanes.iter_mut().enumerate() {
        for (p, g) in groups[..n].iter_mut().enumerate() {
            *g = block.lane(p, j);
        }
        match cfg.tds {
            TdsVariant::InOrder => in_order_into(&groups[..n], cap, lane),
            TdsVariant::OutOfOrder => out_of_order_into(&groups[..n], cap, window % 2 == 1, lane),
        }
    }
}
