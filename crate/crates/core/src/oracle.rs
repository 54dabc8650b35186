//! Dense reference arithmetic and closed-form statistics used to check the
//! simulator. Nothing here calls into the pipeline.
//!
//! Volumes are `[H, W, C]` in the canonical order `h + H * (c + C * w)`.
//! Regular filters are `[K, K, C_in, C_out]`, depthwise filters `[K, K, C]`
//! and pointwise/fc weights `[C_in, C_out]`, first extent fastest.

use alloc::vec;
use alloc::vec::Vec;

use crate::accelerator::{AccelConfig, LayerKind, LayerSpec, LayerStats};
use crate::error::{bail, Result};
use crate::pipeline::{CycleStats, FOOTPRINT};
use crate::sparse_mask::{Element, SparseTensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseTensor {
    pub shape: Vec<usize>,
    pub values: Vec<i32>,
}

impl DenseTensor {
    pub fn new(shape: &[usize], values: Vec<i32>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != values.len() {
            bail!(Format, "shape {shape:?} holds {n} values, got {}", values.len());
        }
        Ok(DenseTensor { shape: shape.to_vec(), values })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        DenseTensor { shape: shape.to_vec(), values: vec![0; shape.iter().product()] }
    }

    pub fn from_sparse<V: Element + Into<i32>>(t: &SparseTensor<V>) -> Result<Self> {
        let values = t.decode()?.into_iter().map(Into::into).collect();
        DenseTensor::new(t.shape(), values)
    }

    /// Element `(h, w, c)` of a volume.
    pub fn at(&self, h: usize, w: usize, c: usize) -> i32 {
        let [hh, _, cc] = [self.shape[0], self.shape[1], self.shape[2]];
        self.values[h + hh * (c + cc * w)]
    }

    fn set(&mut self, h: usize, w: usize, c: usize, v: i32) {
        let [hh, _, cc] = [self.shape[0], self.shape[1], self.shape[2]];
        self.values[h + hh * (c + cc * w)] = v;
    }

    pub fn relu(mut self) -> Self {
        self.values.iter_mut().for_each(|v| *v = (*v).max(0));
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvMode {
    Regular,
    Depthwise,
    Pointwise,
}

/// Filter geometry: `(k, c_out)` after checking `filters` against `c_in`.
fn filter_geometry(filters: &DenseTensor, c_in: usize, mode: ConvMode) -> Result<(usize, usize)> {
    let s = &filters.shape;
    let ok = match mode {
        ConvMode::Regular => s.len() == 4 && s[0] == s[1] && s[2] == c_in,
        ConvMode::Depthwise => s.len() == 3 && s[0] == s[1] && s[2] == c_in,
        ConvMode::Pointwise => s.len() == 2 && s[0] == c_in,
    };
    if !ok {
        bail!(Shape, "{mode:?} filters {s:?} do not fit {c_in} input channels");
    }
    Ok(match mode {
        ConvMode::Regular => (s[0], s[3]),
        ConvMode::Depthwise => (s[0], s[2]),
        ConvMode::Pointwise => (1, s[1]),
    })
}

/// Calls `f(output index, input value, weight value)` for every product of
/// a valid-mode convolution. Returns the output shape.
fn each_product(
    input: &DenseTensor,
    filters: &DenseTensor,
    stride: usize,
    mode: ConvMode,
    mut f: impl FnMut([usize; 3], i32, i32),
) -> Result<[usize; 3]> {
    let &[h, w, c_in] = input.shape.as_slice() else {
        bail!(Shape, "input must be [H, W, C], got {:?}", input.shape);
    };
    let (k, c_out) = filter_geometry(filters, c_in, mode)?;
    if stride == 0 || h < k || w < k {
        bail!(Shape, "{k}x{k} kernel with stride {stride} does not fit {h}x{w}");
    }
    let (ho, wo) = ((h - k) / stride + 1, (w - k) / stride + 1);
    let fv = &filters.values;
    for o in 0..c_out {
        for y in 0..ho {
            for x in 0..wo {
                for kw in 0..k {
                    for kh in 0..k {
                        let (iy, ix) = (y * stride + kh, x * stride + kw);
                        match mode {
                            ConvMode::Regular => {
                                for c in 0..c_in {
                                    let wv = fv[kh + k * (kw + k * (c + c_in * o))];
                                    f([y, x, o], input.at(iy, ix, c), wv);
                                }
                            }
                            ConvMode::Depthwise => {
                                f([y, x, o], input.at(iy, ix, o), fv[kh + k * (kw + k * o)]);
                            }
                            ConvMode::Pointwise => {
                                for c in 0..c_in {
                                    f([y, x, o], input.at(iy, ix, c), fv[c + c_in * o]);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok([ho, wo, c_out])
}

/// Direct convolution without padding.
pub fn dense_conv(input: &DenseTensor, filters: &DenseTensor, stride: usize, mode: ConvMode) -> Result<DenseTensor> {
    let mut acc: Vec<([usize; 3], i32)> = Vec::new();
    let shape = each_product(input, filters, stride, mode, |at, a, w| acc.push((at, a * w)))?;
    let mut out = DenseTensor::zeros(&shape);
    for ([y, x, o], p) in acc {
        let v = out.at(y, x, o) + p;
        out.set(y, x, o, v);
    }
    Ok(out)
}

pub fn dense_fc(input: &[i32], weights: &DenseTensor) -> Result<Vec<i32>> {
    let &[n_in, n_out] = weights.shape.as_slice() else {
        bail!(Shape, "fc weights must be [n_in, n_out], got {:?}", weights.shape);
    };
    if input.len() != n_in {
        bail!(Shape, "input of length {} for {n_in}-input weights", input.len());
    }
    Ok((0..n_out)
        .map(|o| (0..n_in).map(|i| input[i] * weights.values[i + n_in * o]).sum())
        .collect())
}

/// Number of products with two nonzero operands in a convolution.
pub fn count_valid_macs(input: &DenseTensor, filters: &DenseTensor, stride: usize, mode: ConvMode) -> Result<u64> {
    let mut n = 0u64;
    each_product(input, filters, stride, mode, |_, a, w| n += (a != 0 && w != 0) as u64)?;
    Ok(n)
}

pub fn count_valid_macs_fc(input: &[i32], weights: &DenseTensor) -> Result<u64> {
    let n_in = input.len();
    if weights.shape.first() != Some(&n_in) {
        bail!(Shape, "input of length {n_in} for weights {:?}", weights.shape);
    }
    Ok(weights.values.iter().enumerate().filter(|(i, &w)| w != 0 && input[i % n_in] != 0).count() as u64)
}

/// Zero border of width `p` around every channel of a volume.
pub fn pad(input: &DenseTensor, p: usize) -> DenseTensor {
    let [h, w, c] = [input.shape[0], input.shape[1], input.shape[2]];
    let mut out = DenseTensor::zeros(&[h + 2 * p, w + 2 * p, c]);
    for x in 0..w {
        for ch in 0..c {
            for y in 0..h {
                out.set(y + p, x + p, ch, input.at(y, x, ch));
            }
        }
    }
    out
}

pub fn max_pool(input: &DenseTensor, f: usize) -> DenseTensor {
    let [h, w, c] = [input.shape[0], input.shape[1], input.shape[2]];
    let mut out = DenseTensor::zeros(&[h / f, w / f, c]);
    for x in 0..w / f {
        for ch in 0..c {
            for y in 0..h / f {
                let m = (0..f * f).map(|i| input.at(y * f + i % f, x * f + i / f, ch)).max().unwrap_or(0);
                out.set(y, x, ch, m);
            }
        }
    }
    out
}

/// Activated (and pooled) output of a whole layer and its valid-MAC count,
/// from dense arithmetic on decoded operands.
pub fn reference_layer(layer: &LayerSpec, weights: &SparseTensor, acts: &SparseTensor) -> Result<(DenseTensor, u64)> {
    let w: Vec<i32> = weights.decode()?.into_iter().map(i32::from).collect();
    let (out, macs) = if layer.kind == LayerKind::Fc {
        let a: Vec<i32> = acts.decode()?.into_iter().map(i32::from).collect();
        let wt = DenseTensor::new(&[layer.c_in, layer.c_out], w)?;
        (DenseTensor::new(&[layer.c_out], dense_fc(&a, &wt)?)?, count_valid_macs_fc(&a, &wt)?)
    } else {
        let (fshape, mode) = match layer.kind {
            LayerKind::Regular => (vec![layer.k, layer.k, layer.c_in, layer.c_out], ConvMode::Regular),
            LayerKind::Depthwise => (vec![layer.k, layer.k, layer.c_in], ConvMode::Depthwise),
            _ => (vec![layer.c_in, layer.c_out], ConvMode::Pointwise),
        };
        let f = DenseTensor::new(&fshape, w)?;
        let a = pad(&DenseTensor::from_sparse(acts)?, layer.pad);
        (dense_conv(&a, &f, layer.stride, mode)?, count_valid_macs(&a, &f, layer.stride, mode)?)
    };
    let out = if layer.no_relu { out } else { out.relu() };
    let out = if layer.pool > 1 { max_pool(&out, layer.pool) } else { out };
    Ok((out, macs))
}

/// Cycles of the dense baseline in closed form: with a lookahead of one,
/// every stream position costs exactly one cycle, so each round lasts as
/// long as its longest stream plus the mapper fill.
pub fn dense_cycle_model(layer: &LayerSpec, cfg: &AccelConfig, filter_fraction: f64) -> u64 {
    let n = layer.simulated_filters(filter_fraction) as u64;
    let (r, c) = (cfg.rows as u64, cfg.cols as u64);
    let fill = cfg.core.mapper_fill_cycles();
    let (ho, wo) = layer.conv_out();
    let (ho, wo) = (ho as u64, wo as u64);
    let batches = (layer.c_in as u64).div_ceil(FOOTPRINT as u64);
    let (rounds, longest) = match layer.kind {
        LayerKind::Regular | LayerKind::Depthwise => {
            let groups = ((layer.k * layer.k) as u64).div_ceil(FOOTPRINT as u64);
            let chans = if layer.kind == LayerKind::Regular { layer.c_in as u64 } else { 1 };
            (n.div_ceil(c), ho.div_ceil(r) * chans * wo * groups)
        }
        LayerKind::Pointwise => (n.div_ceil(r), ho * wo * batches.div_ceil(c)),
        LayerKind::Fc => (1, n.div_ceil(r) * batches.div_ceil(c)),
    };
    rounds * (longest + fill)
}

/// Layer totals from per-round core counters.
pub fn aggregate_stats(rounds: &[Vec<CycleStats>], dense_cycles: u64) -> Result<LayerStats> {
    if rounds.is_empty() {
        bail!(Config, "no rounds to aggregate");
    }
    let mut s = LayerStats { dense_cycles, ..LayerStats::default() };
    for round in rounds {
        s.cycles += round.iter().map(|c| c.cycles).max().unwrap_or(0);
        for c in round {
            s.valid_macs += c.valid_macs;
            s.mac_slots += c.mac_slots;
        }
    }
    Ok(s)
}
