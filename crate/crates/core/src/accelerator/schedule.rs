use alloc::vec::Vec;

use super::{AccelConfig, LayerKind, LayerSpec};
use crate::error::{bail, Result};
use crate::sparse_mask::SparseTensor;

/// What one core computes during a round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CoreWork {
    /// One filter (regular) or channel (depthwise) over whole output rows.
    Conv { filter: usize, out_rows: Vec<usize> },
    /// One filter over every output position, restricted to some 9-channel
    /// input batches.
    Pointwise { filter: usize, batches: Vec<usize> },
    /// Several output neurons, restricted to some 9-element input batches.
    Fc { neurons: Vec<usize>, batches: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoreTask {
    pub row: usize,
    pub col: usize,
    pub work: CoreWork,
}

/// Tasks of one broadcast round; only active cores appear.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Round {
    pub tasks: Vec<CoreTask>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkAssignment {
    pub kind: LayerKind,
    /// Simulated filters in broadcast order.
    pub filters: Vec<usize>,
    pub rounds: Vec<Round>,
}

/// Ones in each filter (column) of a `[rows, filters]` weight matrix.
pub(crate) fn filter_popcounts(weights: &SparseTensor) -> Vec<u32> {
    let [rows, filters] = [weights.shape()[0], weights.shape()[1]];
    let mut counts = alloc::vec![0u32; filters];
    for i in weights.mask().iter_ones() {
        counts[i / rows] += 1;
    }
    counts
}

/// Assigns filters to grid columns: the densest filter goes to the column
/// that finished first in the previous round, and so on. Returns the column
/// of each filter. Equal densities keep their relative order.
pub fn inter_core_balance(densities: &[u32], completion_order: &[usize]) -> Result<Vec<usize>> {
    if completion_order.len() < densities.len() {
        bail!(Config, "{} filters for {} columns", densities.len(), completion_order.len());
    }
    let mut order: Vec<usize> = (0..densities.len()).collect();
    order.sort_by(|&a, &b| densities[b].cmp(&densities[a]));
    let mut cols = alloc::vec![0; densities.len()];
    for (rank, &f) in order.iter().enumerate() {
        cols[f] = completion_order[rank];
    }
    Ok(cols)
}

/// Regular and depthwise dataflow. With inter-core balancing on, filters
/// are broadcast in descending density so each round groups filters of
/// similar cost.
pub fn schedule_regular(
    layer: &LayerSpec,
    cfg: &AccelConfig,
    weights: &SparseTensor,
    fraction: f64,
) -> Result<WorkAssignment> {
    if !matches!(layer.kind, LayerKind::Regular | LayerKind::Depthwise) {
        bail!(Config, "layer '{}' is not a regular or depthwise convolution", layer.name);
    }
    layer.validate()?;
    let mut filters: Vec<usize> = (0..layer.simulated_filters(fraction)).collect();
    if cfg.inter_balance {
        let pop = filter_popcounts(weights);
        filters.sort_by(|&a, &b| pop[b].cmp(&pop[a]));
    }
    let (ho, _) = layer.conv_out();
    let rounds = filters
        .chunks(cfg.cols)
        .map(|chunk| {
            let mut tasks = Vec::new();
            for (col, &filter) in chunk.iter().enumerate() {
                for row in 0..cfg.rows.min(ho) {
                    let out_rows = (row..ho).step_by(cfg.rows).collect();
                    tasks.push(CoreTask { row, col, work: CoreWork::Conv { filter, out_rows } });
                }
            }
            Round { tasks }
        })
        .collect();
    Ok(WorkAssignment { kind: layer.kind, filters, rounds })
}

fn column_batches(c_in: usize, cols: usize) -> Vec<Vec<usize>> {
    let nb = c_in.div_ceil(crate::pipeline::FOOTPRINT);
    (0..cols.min(nb)).map(|c| (c..nb).step_by(cols).collect()).collect()
}

/// Pointwise dataflow: one filter per grid row per round, 9-channel batches
/// spread over the columns.
pub fn schedule_pointwise(layer: &LayerSpec, cfg: &AccelConfig, fraction: f64) -> Result<WorkAssignment> {
    if layer.kind != LayerKind::Pointwise {
        bail!(Config, "layer '{}' is not pointwise", layer.name);
    }
    layer.validate()?;
    let filters: Vec<usize> = (0..layer.simulated_filters(fraction)).collect();
    let batches = column_batches(layer.c_in, cfg.cols);
    let rounds = filters
        .chunks(cfg.rows)
        .map(|chunk| {
            let mut tasks = Vec::new();
            for (row, &filter) in chunk.iter().enumerate() {
                for (col, b) in batches.iter().enumerate() {
                    tasks.push(CoreTask { row, col, work: CoreWork::Pointwise { filter, batches: b.clone() } });
                }
            }
            Round { tasks }
        })
        .collect();
    Ok(WorkAssignment { kind: layer.kind, filters, rounds })
}

/// Fully connected dataflow: input batches pinned to columns, neurons
/// spread over rows, one round.
pub fn schedule_fc(layer: &LayerSpec, cfg: &AccelConfig, fraction: f64) -> Result<WorkAssignment> {
    if layer.kind != LayerKind::Fc {
        bail!(Config, "layer '{}' is not fully connected", layer.name);
    }
    layer.validate()?;
    let n = layer.simulated_filters(fraction);
    let batches = column_batches(layer.c_in, cfg.cols);
    let mut tasks = Vec::new();
    for row in 0..cfg.rows.min(n) {
        let neurons: Vec<usize> = (row..n).step_by(cfg.rows).collect();
        for (col, b) in batches.iter().enumerate() {
            tasks.push(CoreTask { row, col, work: CoreWork::Fc { neurons: neurons.clone(), batches: b.clone() } });
        }
    }
    Ok(WorkAssignment { kind: layer.kind, filters: (0..n).collect(), rounds: alloc::vec![Round { tasks }] })
}

pub fn schedule_layer(
    layer: &LayerSpec,
    cfg: &AccelConfig,
    weights: &SparseTensor,
    fraction: f64,
) -> Result<WorkAssignment> {
    match layer.kind {
        LayerKind::Regular | LayerKind::Depthwise => schedule_regular(layer, cfg, weights, fraction),
        LayerKind::Pointwise => schedule_pointwise(layer, cfg, fraction),
        LayerKind::Fc => schedule_fc(layer, cfg, fraction),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::TdsVariant;
    use crate::sparse_mask::Layout;

    fn grid() -> AccelConfig {
        AccelConfig::canonical(3, TdsVariant::OutOfOrder, false, false)
    }

    #[test]
    fn balance_rule() {
        assert_eq!(inter_core_balance(&[10, 2, 8, 4], &[2, 0, 3, 1]).unwrap(), vec![2, 1, 0, 3]);
        assert_eq!(inter_core_balance(&[5, 5, 5, 5], &[0, 1, 2, 3]).unwrap(), vec![0, 1, 2, 3]);
        assert!(inter_core_balance(&[1, 2], &[0]).is_err());
    }

    #[test]
    fn depthwise_example_fills_the_grid() {
        let l = LayerSpec::depthwise(9, 5, 4, 3, 1);
        let w = SparseTensor::zeros(&l.weight_shape(), Layout::Matrix).unwrap();
        let a = schedule_regular(&l, &grid(), &w, 1.0).unwrap();
        assert_eq!(a.rounds.len(), 1);
        assert_eq!(a.rounds[0].tasks.len(), 28);
        assert!(a.rounds[0].tasks.iter().all(|t| matches!(&t.work, CoreWork::Conv { out_rows, .. } if out_rows.len() == 1)));
    }

    #[test]
    fn single_output_uses_one_core() {
        let l = LayerSpec::regular(3, 3, 2, 1, 3, 1);
        let w = SparseTensor::zeros(&l.weight_shape(), Layout::Matrix).unwrap();
        let a = schedule_regular(&l, &grid(), &w, 1.0).unwrap();
        assert_eq!(a.rounds.len(), 1);
        assert_eq!(a.rounds[0].tasks.len(), 1);
    }

    #[test]
    fn pointwise_example() {
        let l = LayerSpec::pointwise(3, 3, 36, 7);
        let a = schedule_pointwise(&l, &grid(), 1.0).unwrap();
        assert_eq!(a.rounds.len(), 1);
        assert_eq!(a.rounds[0].tasks.len(), 28);
        let one = schedule_pointwise(&LayerSpec::pointwise(3, 3, 9, 7), &grid(), 1.0).unwrap();
        assert!(one.rounds[0].tasks.iter().all(|t| t.col == 0));
    }

    #[test]
    fn fc_example() {
        let a = schedule_fc(&LayerSpec::fc(36, 49), &grid(), 1.0).unwrap();
        assert_eq!(a.rounds[0].tasks.len(), 28);
        let CoreWork::Fc { neurons, batches } = &a.rounds[0].tasks[0].work else { panic!() };
        assert_eq!(neurons.len(), 7);
        assert_eq!(batches, &vec![0]);
    }

    #[test]
    fn balanced_broadcast_is_density_sorted() {
        let l = LayerSpec::regular(5, 5, 1, 4, 3, 1);
        let mut dense = vec![0i8; 36];
        for (f, n) in [2usize, 9, 5, 7].iter().enumerate() {
            dense[f * 9..f * 9 + n].fill(1);
        }
        let w = SparseTensor::encode_dense(&dense, &[9, 4], Layout::Matrix).unwrap();
        assert_eq!(filter_popcounts(&w), vec![2, 9, 5, 7]);
        let cfg = AccelConfig { inter_balance: true, ..grid() };
        assert_eq!(schedule_regular(&l, &cfg, &w, 1.0).unwrap().filters, vec![1, 3, 2, 0]);
    }
}
