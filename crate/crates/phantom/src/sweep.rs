//! Experiment sweeps over lookahead, selector, balancing and density.
//!
//! ```json
//! {"lf_values": [6, 18], "tds_variants": ["io", "ooo"],
//!  "balancing": ["unbalanced", "full"], "densities": [[0.23, 0.32]],
//!  "seed": 7, "filter_fraction": 0.25}
//! ```
//!
//! Each (density, layer) pair is one job: its tensors are generated once
//! and every configuration is timed on them. Jobs run on the rayon pool
//! and rows come back in job order, so the CSV does not depend on the
//! number of threads.

use std::path::Path;

use phantom_core::accelerator::{simulate_layer, simulate_network, AccelConfig, LayerSpec, NetworkOptions, SimOptions};
use rayon::prelude::*;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::report::{Balance, Row, Tds};
use crate::synth::{layer_tensors, SeededSource};

fn full() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub lf_values: Vec<usize>,
    pub tds_variants: Vec<Tds>,
    pub balancing: Vec<Balance>,
    /// `(weight, activation)` density pairs.
    pub densities: Vec<(f64, f64)>,
    pub seed: u64,
    /// Fraction of filters simulated per layer.
    #[serde(default = "full")]
    pub filter_fraction: f64,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.lf_values.is_empty() || self.tds_variants.is_empty() || self.balancing.is_empty() || self.densities.is_empty()
        {
            return Err(Error::Invalid("sweep axes must be non-empty".into()));
        }
        for &(w, a) in &self.densities {
            if !(w > 0.0 && w <= 1.0 && a > 0.0 && a <= 1.0) {
                return Err(Error::Invalid(format!("density pair ({w}, {a}) outside (0, 1]")));
            }
        }
        if !(self.filter_fraction > 0.0 && self.filter_fraction <= 1.0) {
            return Err(Error::Invalid(format!("filter fraction {} outside (0, 1]", self.filter_fraction)));
        }
        for &lf in &self.lf_values {
            AccelConfig::canonical(lf, Tds::InOrder.variant(), false, false).validate()?;
        }
        Ok(())
    }

    fn configs(&self) -> Vec<(usize, Tds, Balance)> {
        let mut out = Vec::new();
        for &lf in &self.lf_values {
            for &tds in &self.tds_variants {
                for &b in &self.balancing {
                    out.push((lf, tds, b));
                }
            }
        }
        out
    }
}

pub fn load_spec(path: impl AsRef<Path>) -> Result<SweepSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SweepSpec = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.into(),
        line: e.line(),
        column: e.column(),
        msg: e.to_string(),
    })?;
    spec.validate()?;
    Ok(spec)
}

pub fn config(lf: usize, tds: Tds, balance: Balance) -> AccelConfig {
    let (intra, inter) = balance.flags();
    AccelConfig::canonical(lf, tds.variant(), intra, inter)
}

/// One row per (density, layer, lf, selector, balancing), in that nesting
/// order with each axis in spec order.
pub fn run_sweep(layers: &[LayerSpec], spec: &SweepSpec) -> Result<Vec<Row>> {
    spec.validate()?;
    phantom_core::accelerator::validate_chain(layers)?;
    let configs = spec.configs();
    let jobs: Vec<(usize, usize)> =
        (0..spec.densities.len()).flat_map(|d| (0..layers.len()).map(move |l| (d, l))).collect();
    let opts = SimOptions::timing(spec.filter_fraction);
    let per_job: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|&(d, i)| -> Result<Vec<Row>> {
            let dens = spec.densities[d];
            let layer = &layers[i];
            let tensors = layer_tensors(layer, i, Some(dens), spec.seed);
            configs
                .iter()
                .map(|&(lf, tds, b)| {
                    let r = simulate_layer(layer, &tensors, &config(lf, tds, b), &opts)?;
                    Ok(Row::new(i, layer, lf, tds, b, dens, &r.stats))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_job.into_iter().flatten().collect())
}

/// Settings of a single `run`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunSpec {
    pub lf: usize,
    pub tds: Tds,
    pub balance: Balance,
    pub seed: u64,
    /// Feed each layer the previous layer's output (functional simulation).
    pub chain: bool,
    pub filter_fraction: f64,
}

/// One row per layer. The density columns carry the model's values; in a
/// chained run only the first layer's activations are drawn at that density.
pub fn run_model(layers: &[LayerSpec], spec: &RunSpec) -> Result<Vec<Row>> {
    let cfg = config(spec.lf, spec.tds, spec.balance);
    let sim = if spec.chain { SimOptions::default() } else { SimOptions::timing(spec.filter_fraction) };
    let mut source = SeededSource { seed: spec.seed, densities: None };
    let report = simulate_network(layers, &mut source, &cfg, &NetworkOptions { chain: spec.chain, sim })?;
    Ok(report
        .layers
        .iter()
        .enumerate()
        .map(|(i, (l, s))| {
            Row::new(i, l, spec.lf, spec.tds, spec.balance, (l.weight_density, l.activation_density), s)
        })
        .collect())
}
