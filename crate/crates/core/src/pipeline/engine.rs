//! Drives a stream of lookahead positions through the whole core and counts
//! cycles.
//!
//! The stream is cut into windows of `lf` positions. Every window costs the
//! iteration count of its slowest selector, and at least one cycle; the
//! shared mapper adds its fill latency once per stream. A stream without a
//! single valid product issues no compute and costs nothing.

use alloc::vec;
use alloc::vec::Vec;

use super::balance::balance_in_place;
use super::tds::tds_select_into;
use super::{
    l1_reduce, lane_bits, map_threads, relu_encode, Coord, CoreConfig, CycleStats, LamBlock, OutputBuffer,
    RotationSchedule, Selection, TaggedEntry, FOOTPRINT, LANES,
};
use crate::error::{bail, Result};
use crate::sparse_mask::{Layout, SparseTensor};

/// One lookahead position: the operand pairs of a 9-element footprint and
/// the output they accumulate into. Footprint element `s` sits in lane
/// `s / 3`, slot `s % 3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Entry {
    pub weights: [i8; FOOTPRINT],
    pub acts: [i8; FOOTPRINT],
    pub output: u32,
}

impl Entry {
    /// Valid-product mask of this position.
    pub fn lam(&self) -> u16 {
        let mut m = 0;
        for s in 0..FOOTPRINT {
            if self.weights[s] != 0 && self.acts[s] != 0 {
                m |= 1 << s;
            }
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StreamResult {
    /// Accumulated value of every output, before ReLU.
    pub sums: Vec<i32>,
    /// Whether any valid product reached each output.
    pub reduced: Vec<bool>,
    pub stats: CycleStats,
}

struct Windows<'c> {
    cfg: &'c CoreConfig,
    block: LamBlock,
    sel: Selection,
    alt: Selection,
    identity: RotationSchedule,
}

impl<'c> Windows<'c> {
    fn new(cfg: &'c CoreConfig) -> Self {
        Windows {
            cfg,
            block: LamBlock::default(),
            sel: Selection::default(),
            alt: Selection::default(),
            identity: RotationSchedule::identity(cfg.lf),
        }
    }

    /// Selects window `w`; returns the rotation applied to it. With
    /// intra-core balancing the rotated window is kept only when it needs
    /// fewer iterations than the original.
    fn select(&mut self, masks: &[u16], w: usize) -> Result<RotationSchedule> {
        self.block.fill(masks, self.cfg.lf)?;
        tds_select_into(&self.block, self.cfg, w, &mut self.sel);
        if !self.cfg.intra_balance || self.sel.iterations() <= rotated_floor(&self.block, self.cfg) {
            return Ok(self.identity.clone());
        }
        let schedule = balance_in_place(&mut self.block);
        tds_select_into(&self.block, self.cfg, w, &mut self.alt);
        if self.alt.iterations() < self.sel.iterations() {
            core::mem::swap(&mut self.sel, &mut self.alt);
            Ok(schedule)
        } else {
            Ok(self.identity.clone())
        }
    }

    fn cost(&self) -> u64 {
        self.sel.iterations().max(1) as u64
    }
}

/// Fewest iterations the rotated window could need: each iteration takes
/// at most `threads_per_pe` ones from a lane, and at least one.
fn rotated_floor(block: &LamBlock, cfg: &CoreConfig) -> usize {
    let mut loads = [0u32; LANES];
    for (i, &m) in block.positions().iter().enumerate() {
        for j in 0..LANES {
            loads[(j + i) % LANES] += lane_bits(m, j).count_ones();
        }
    }
    let cap = cfg.threads_per_pe as u32;
    loads.iter().map(|l| l.div_ceil(cap)).max().unwrap_or(0).max(1) as usize
}

/// Cycle count of a stream given only its valid-product masks.
pub fn time_stream(masks: &[u16], cfg: &CoreConfig) -> Result<CycleStats> {
    cfg.validate()?;
    let valid_macs: u64 = masks.iter().map(|m| m.count_ones() as u64).sum();
    if valid_macs == 0 {
        return Ok(CycleStats::default());
    }
    let mut cycles = cfg.mapper_fill_cycles();
    if cfg.lf == 1 {
        // A single 3-bit group always fits a PE: one cycle per position.
        cycles += masks.len() as u64;
    } else {
        let mut win = Windows::new(cfg);
        for (w, chunk) in masks.chunks(cfg.lf).enumerate() {
            win.select(chunk, w)?;
            cycles += win.cost();
        }
    }
    Ok(stats(cycles, valid_macs, cfg))
}

fn stats(cycles: u64, valid_macs: u64, cfg: &CoreConfig) -> CycleStats {
    CycleStats { cycles, valid_macs, mac_slots: cycles * cfg.threads() as u64 }
}

/// Runs `entries` through selection, mapping, the compute engine and the
/// output buffer. `outputs` is the number of distinct output indices the
/// entries refer to.
pub fn run_stream(entries: &[Entry], outputs: usize, cfg: &CoreConfig) -> Result<StreamResult> {
    cfg.validate()?;
    let masks: Vec<u16> = entries.iter().map(Entry::lam).collect();
    let mut ob = OutputBuffer::new(outputs, entries.len());
    let mut reduced = vec![false; outputs];
    let mut valid_macs = 0u64;
    for (i, (e, &m)) in entries.iter().zip(&masks).enumerate() {
        if e.output as usize >= outputs {
            bail!(Shape, "entry {i} targets output {} of {outputs}", e.output);
        }
        for lane in 0..LANES {
            if lane_bits(m, lane) != 0 {
                ob.expect(Coord { output: e.output, entry: i as u32, lane: lane as u8 })?;
            }
        }
        reduced[e.output as usize] |= m != 0;
        valid_macs += m.count_ones() as u64;
    }
    if valid_macs == 0 {
        return Ok(StreamResult { sums: ob.finish()?, reduced, stats: CycleStats::default() });
    }

    let lf = cfg.lf;
    let mut win = Windows::new(cfg);
    let mut cycles = cfg.mapper_fill_cycles();
    let mut issued = 0u64;
    for (w, chunk) in masks.chunks(lf).enumerate() {
        let schedule = win.select(chunk, w)?;
        let base = w * lf;
        let window = &entries[base..base + chunk.len()];
        for t in 0..win.sel.iterations() {
            let image = map_threads(&win.sel, t, window, &schedule)?;
            for pe in &image.pes {
                let products = pe.threads.map(|th| th.weight as i32 * th.act as i32);
                let sums = l1_reduce(products, pe.l1);
                for (&start, &value) in pe.l1.group_starts().iter().zip(sums.as_slice()) {
                    let Some((pos, lane)) = pe.threads[start].source else { continue };
                    let entry = base + pos as usize;
                    let coord = Coord { output: entries[entry].output, entry: entry as u32, lane };
                    ob.accept(&TaggedEntry { value, tag: true, coord })?;
                }
                issued += pe.busy_threads() as u64;
            }
        }
        cycles += win.cost();
    }
    if issued != valid_macs {
        bail!(Invariant, "issued {issued} products for {valid_macs} valid pairs");
    }
    Ok(StreamResult { sums: ob.finish()?, reduced, stats: stats(cycles, valid_macs, cfg) })
}

/// Convolves a K x K kernel over a K x W activation slab (stride 1) on one
/// core and returns the ReLU-encoded output row.
///
/// Both tensors are column-major matrices. Kernel element `(kh, kw)` is
/// footprint element `kh + K * kw`; kernels larger than 9 elements are
/// split into consecutive groups of 9 that feed the same output.
pub fn simulate_core_chunk(
    weights: &SparseTensor,
    chunk: &SparseTensor,
    cfg: &CoreConfig,
) -> Result<(SparseTensor<i32>, CycleStats)> {
    let (&[k, kw_], &[rows, width]) = (weights.shape(), chunk.shape()) else {
        bail!(Shape, "kernel and chunk must be matrices");
    };
    if k != kw_ || k == 0 {
        bail!(Shape, "kernel {k}x{kw_} is not square");
    }
    if rows != k || width < k {
        bail!(Shape, "chunk {rows}x{width} does not fit a {k}x{k} kernel");
    }
    let (w, a) = (weights.decode()?, chunk.decode()?);
    let outputs = width - k + 1;
    let groups = (k * k).div_ceil(FOOTPRINT);
    let mut entries = Vec::with_capacity(outputs * groups);
    for x in 0..outputs {
        for g in 0..groups {
            let mut e = Entry { output: x as u32, ..Entry::default() };
            for s in 0..FOOTPRINT.min(k * k - g * FOOTPRINT) {
                let el = g * FOOTPRINT + s;
                let (kh, kw) = (el % k, el / k);
                e.weights[s] = w[kh + k * kw];
                e.acts[s] = a[kh + k * (x + kw)];
            }
            entries.push(e);
        }
    }
    let r = run_stream(&entries, outputs, cfg)?;
    let out = relu_encode(&r.sums, &r.reduced, true)?;
    debug_assert_eq!(out.layout(), Layout::Vector);
    Ok((out, r.stats))
}
