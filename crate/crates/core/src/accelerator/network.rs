use alloc::vec::Vec;

use super::{requantize, simulate_layer, AccelConfig, LayerKind, LayerSpec, LayerStats, LayerTensors, SimOptions};
use crate::error::{bail, Result};
use crate::sparse_mask::{Layout, SparseTensor};

/// Supplies the operands of each layer.
pub trait TensorSource {
    fn weights(&mut self, index: usize, layer: &LayerSpec) -> Result<SparseTensor>;
    /// Input of layer `index`. Chained runs only ask for layer 0.
    fn activations(&mut self, index: usize, layer: &LayerSpec) -> Result<SparseTensor>;
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NetworkOptions {
    /// Feed each layer the (requantized) output of the previous one instead
    /// of asking the source.
    pub chain: bool,
    pub sim: SimOptions,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkReport {
    pub layers: Vec<(LayerSpec, LayerStats)>,
}

impl NetworkReport {
    pub fn total(&self) -> LayerStats {
        let mut t = LayerStats::default();
        for (_, s) in &self.layers {
            t.add(s);
        }
        t
    }

    /// Arithmetic mean of the per-layer speedups.
    pub fn mean_speedup(&self) -> f64 {
        if self.layers.is_empty() {
            return 0.0;
        }
        self.layers.iter().map(|(_, s)| s.speedup()).sum::<f64>() / self.layers.len() as f64
    }

    /// Mean of the per-layer thread utilizations.
    pub fn mean_utilization(&self) -> f64 {
        if self.layers.is_empty() {
            return 0.0;
        }
        self.layers.iter().map(|(_, s)| s.utilization()).sum::<f64>() / self.layers.len() as f64
    }
}

/// Checks that every layer consumes exactly what the previous one
/// produces. A fc layer accepts the flattened output of a volume.
pub fn validate_chain(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        bail!(Model, "model has no layers");
    }
    for (i, l) in layers.iter().enumerate() {
        if let Err(e) = l.validate() {
            bail!(Model, "layer {i} ('{}'): {e}", l.name);
        }
    }
    for (i, pair) in layers.windows(2).enumerate() {
        let (prev, next) = (&pair[0], &pair[1]);
        let (out, _) = prev.output_shape();
        let ok = match next.kind {
            LayerKind::Fc => out.iter().product::<usize>() == next.c_in,
            _ => out == [next.h, next.w, next.c_in],
        };
        if !ok {
            let (want, _) = next.input_shape();
            bail!(
                Model,
                "layer {} ('{}') produces {out:?} but layer {} ('{}') expects {want:?}",
                i,
                prev.name,
                i + 1,
                next.name
            );
        }
    }
    Ok(())
}

/// Simulates every layer and collects per-layer statistics.
pub fn simulate_network(
    layers: &[LayerSpec],
    source: &mut dyn TensorSource,
    cfg: &AccelConfig,
    opts: &NetworkOptions,
) -> Result<NetworkReport> {
    validate_chain(layers)?;
    if opts.chain && (!opts.sim.functional || opts.sim.filter_fraction < 1.0) {
        bail!(Config, "chained runs need full functional simulation");
    }
    let mut report = NetworkReport::default();
    let mut carried: Option<SparseTensor> = None;
    for (i, layer) in layers.iter().enumerate() {
        let weights = source.weights(i, layer)?;
        let acts = match carried.take() {
            Some(a) if layer.kind == LayerKind::Fc => {
                let n = a.len();
                a.reshaped(&[n], Layout::Vector)?
            }
            Some(a) => a,
            None => source.activations(i, layer)?,
        };
        let r = simulate_layer(layer, &LayerTensors { weights, acts }, cfg, &opts.sim)?;
        if opts.chain {
            let Some(out) = &r.output else {
                bail!(Invariant, "functional run of layer '{}' produced no output", layer.name);
            };
            carried = Some(requantize(out)?);
        }
        report.layers.push((layer.clone(), r.stats));
    }
    Ok(report)
}
