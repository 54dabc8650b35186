use alloc::vec;
use alloc::vec::Vec;

use super::schedule::filter_popcounts;
use super::streams::{MaskTables, Operands};
use super::{
    inter_core_balance, l3_accumulate, schedule_layer, AccelConfig, ColumnPartial, CoreWork, LayerKind, LayerSpec,
    LayerStats, WorkAssignment,
};
use crate::error::{bail, Result};
use crate::pipeline::{relu_encode, run_stream, time_stream, CoreConfig, CycleStats};
use crate::sparse_mask::{BitMask, Layout, SparseTensor};

/// Operands of one layer: `[filter_len, c_out]` weights and the unpadded
/// input (a volume, or any tensor with `c_in` elements for fc).
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTensors {
    pub weights: SparseTensor,
    pub acts: SparseTensor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Fraction of the filters (or fc neurons) to simulate.
    pub filter_fraction: f64,
    /// Compute output values. When off, or when filters are subsampled,
    /// only masks are pushed through the cores.
    pub functional: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions { filter_fraction: 1.0, functional: true }
    }
}

impl SimOptions {
    pub fn timing(filter_fraction: f64) -> Self {
        SimOptions { filter_fraction, functional: false }
    }
}

/// Counters of one core in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoreRun {
    pub row: usize,
    pub col: usize,
    pub stats: CycleStats,
    pub dense: CycleStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerResult {
    /// Activated (and pooled) output; `None` for timing-only runs.
    pub output: Option<SparseTensor<i32>>,
    pub stats: LayerStats,
    pub rounds: Vec<Vec<CoreRun>>,
    pub assignment: WorkAssignment,
}

fn check_tensors(layer: &LayerSpec, t: &LayerTensors) -> Result<()> {
    let ws = layer.weight_shape();
    if t.weights.shape() != ws || t.weights.layout() != Layout::Matrix {
        bail!(Shape, "layer '{}' expects {ws:?} weights, got {:?}", layer.name, t.weights.shape());
    }
    let (shape, layout) = layer.input_shape();
    let ok = match layer.kind {
        LayerKind::Fc => t.acts.len() == layer.c_in,
        _ => t.acts.shape() == shape.as_slice() && t.acts.layout() == layout,
    };
    if !ok {
        bail!(Shape, "layer '{}' expects {shape:?} activations, got {:?}", layer.name, t.acts.shape());
    }
    Ok(())
}

/// Completion order of the grid columns: finished columns by finish time,
/// then idle ones, ties broken by index.
fn completion_order(runs: &[CoreRun], cols: usize) -> Vec<usize> {
    let mut finish: Vec<Option<u64>> = vec![None; cols];
    for r in runs {
        let f = finish[r.col].get_or_insert(0);
        *f = (*f).max(r.stats.cycles);
    }
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by_key(|&c| (finish[c].is_none(), finish[c].unwrap_or(0), c));
    order
}

/// Simulates one layer on the grid.
pub fn simulate_layer(
    layer: &LayerSpec,
    tensors: &LayerTensors,
    cfg: &AccelConfig,
    opts: &SimOptions,
) -> Result<LayerResult> {
    cfg.validate()?;
    layer.validate()?;
    check_tensors(layer, tensors)?;
    if !(opts.filter_fraction > 0.0 && opts.filter_fraction <= 1.0) {
        bail!(Config, "filter fraction {} outside (0, 1]", opts.filter_fraction);
    }
    let mut plan = schedule_layer(layer, cfg, &tensors.weights, opts.filter_fraction)?;
    let ops = Operands::new(layer, &tensors.weights, &tensors.acts)?;
    let functional = opts.functional && plan.filters.len() == layer.c_out;
    let tables = if functional { None } else { Some(MaskTables::new(&ops, &plan.filters)?) };
    let dense_core = CoreConfig::dense();
    let (ho, wo) = ops.conv_out();
    let outputs = match layer.kind {
        LayerKind::Fc => layer.c_out,
        _ => ho * wo * layer.c_out,
    };

    let mut sums = if functional { vec![0i32; outputs] } else { Vec::new() };
    let mut reduced = if functional { vec![false; outputs] } else { Vec::new() };
    let mut partials = Vec::new();
    let mut active_cols = 0;
    let mut stats = LayerStats::default();
    let mut rounds: Vec<Vec<CoreRun>> = Vec::with_capacity(plan.rounds.len());
    let popcounts = if cfg.inter_balance { filter_popcounts(&tensors.weights) } else { Vec::new() };
    let rebalance = cfg.inter_balance && matches!(layer.kind, LayerKind::Regular | LayerKind::Depthwise);

    for ri in 0..plan.rounds.len() {
        if rebalance && ri > 0 {
            let order = completion_order(&rounds[ri - 1], cfg.cols);
            let round = &mut plan.rounds[ri];
            // Filters of the round, by the column they were scheduled on.
            let mut by_col: Vec<usize> = Vec::new();
            for t in &round.tasks {
                if let CoreWork::Conv { filter, .. } = t.work {
                    if by_col.len() <= t.col {
                        by_col.resize(t.col + 1, usize::MAX);
                    }
                    by_col[t.col] = filter;
                }
            }
            let dens: Vec<u32> = by_col.iter().map(|&f| popcounts[f]).collect();
            let cols = inter_core_balance(&dens, &order)?;
            for t in &mut round.tasks {
                t.col = cols[t.col];
            }
        }
        let mut runs = Vec::with_capacity(plan.rounds[ri].tasks.len());
        for task in &plan.rounds[ri].tasks {
            let dense = time_stream(&ops.dense_masks(&task.work), &dense_core)?;
            let core_stats = match &tables {
                Some(t) => time_stream(&t.masks(&task.work), &cfg.core)?,
                None => {
                    let entries = ops.entries(&task.work);
                    let r = run_stream(&entries, ops.local_outputs(&task.work), &cfg.core)?;
                    match &task.work {
                        CoreWork::Conv { filter, out_rows } => {
                            for (yi, &y) in out_rows.iter().enumerate() {
                                for x in 0..wo {
                                    let (li, gi) = (yi * wo + x, y + ho * (filter + layer.c_out * x));
                                    sums[gi] = r.sums[li];
                                    reduced[gi] = r.reduced[li];
                                }
                            }
                        }
                        CoreWork::Pointwise { filter, .. } => {
                            active_cols = active_cols.max(task.col + 1);
                            for x in 0..wo {
                                for y in 0..ho {
                                    let (li, gi) = (y + ho * x, y + ho * (filter + layer.c_out * x));
                                    partials.push(ColumnPartial { output: gi, col: task.col, value: r.sums[li] });
                                    reduced[gi] |= r.reduced[li];
                                }
                            }
                        }
                        CoreWork::Fc { neurons, .. } => {
                            active_cols = active_cols.max(task.col + 1);
                            for (li, &n) in neurons.iter().enumerate() {
                                partials.push(ColumnPartial { output: n, col: task.col, value: r.sums[li] });
                                reduced[n] |= r.reduced[li];
                            }
                        }
                    }
                    r.stats
                }
            };
            runs.push(CoreRun { row: task.row, col: task.col, stats: core_stats, dense });
        }
        stats.cycles += runs.iter().map(|r| r.stats.cycles).max().unwrap_or(0);
        stats.dense_cycles += runs.iter().map(|r| r.dense.cycles).max().unwrap_or(0);
        stats.valid_macs += runs.iter().map(|r| r.stats.valid_macs).sum::<u64>();
        stats.mac_slots += runs.iter().map(|r| r.stats.mac_slots).sum::<u64>();
        rounds.push(runs);
    }

    let output = if functional {
        if matches!(layer.kind, LayerKind::Pointwise | LayerKind::Fc) {
            sums = l3_accumulate(&partials, outputs, active_cols)?;
        }
        let flat = relu_encode(&sums, &reduced, !layer.no_relu)?;
        let (conv_shape, layout) = match layer.kind {
            LayerKind::Fc => (vec![layer.c_out], Layout::Vector),
            _ => (vec![ho, wo, layer.c_out], Layout::Volume),
        };
        let out = flat.reshaped(&conv_shape, layout)?;
        Some(if layer.pool > 1 { max_pool(&out, layer.pool)? } else { out })
    } else {
        None
    };
    Ok(LayerResult { output, stats, rounds, assignment: plan })
}

/// Non-overlapping `f` x `f` max-pool of a `[H, W, C]` volume; trailing
/// rows and columns that do not fill a window are dropped.
pub fn max_pool(t: &SparseTensor<i32>, f: usize) -> Result<SparseTensor<i32>> {
    let &[h, w, c] = t.shape() else {
        bail!(Shape, "max-pool needs a volume, got {:?}", t.shape());
    };
    if f == 0 || h < f || w < f {
        bail!(Shape, "cannot pool {h}x{w} by {f}");
    }
    let dense = t.decode()?;
    let (oh, ow) = (h / f, w / f);
    let mut out = vec![0i32; oh * ow * c];
    for x in 0..ow {
        for ch in 0..c {
            for y in 0..oh {
                let mut m = i32::MIN;
                for dx in 0..f {
                    for dy in 0..f {
                        m = m.max(dense[(y * f + dy) + h * (ch + c * (x * f + dx))]);
                    }
                }
                out[y + oh * (ch + c * x)] = m;
            }
        }
    }
    SparseTensor::encode_dense(&out, &[oh, ow, c], Layout::Volume)
}

/// Rescales 32-bit outputs into the 8-bit operand range for the next
/// layer. Values are scaled by `127 / max|v|` and every nonzero stays
/// nonzero, so the mask is carried over unchanged.
pub fn requantize(t: &SparseTensor<i32>) -> Result<SparseTensor> {
    let peak = t.values().iter().map(|v| v.unsigned_abs() as u64).max().unwrap_or(1).max(1);
    let values: Vec<i8> = t
        .values()
        .iter()
        .map(|&v| {
            let q = ((v.unsigned_abs() as u64 * 127) / peak).max(1) as i8;
            if v < 0 {
                -q
            } else {
                q
            }
        })
        .collect();
    let mask = BitMask::from_words(t.mask().words().to_vec(), t.mask().len())?;
    SparseTensor::from_parts(t.shape().to_vec(), t.layout(), mask, values)
}
