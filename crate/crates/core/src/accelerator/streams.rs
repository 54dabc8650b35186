//! Per-core lookahead streams of each dataflow.
//!
//! A stream is walked by one visitor so that the value-carrying entries
//! and the mask-only fast path always see positions in the same order.
//! Conv cores walk `for y in rows, for c in channels, for x, for group`;
//! pointwise cores `for x, for y, for batch`; fc cores `for neuron, for
//! batch`.

use alloc::vec;
use alloc::vec::Vec;

use super::{CoreWork, LayerKind, LayerSpec};
use crate::error::{bail, Result};
use crate::pipeline::{Entry, FOOTPRINT};
use crate::sparse_mask::SparseTensor;

/// Dense operands of one layer with the input already zero-padded.
pub(crate) struct Operands<'l> {
    layer: &'l LayerSpec,
    /// Padded input, canonical volume order `h + ph * (c + c_in * w)`, or
    /// the input vector for fc.
    acts: Vec<i8>,
    /// `[filter_len, c_out]` weights, column-major.
    weights: Vec<i8>,
    ph: usize,
    ho: usize,
    wo: usize,
    groups: usize,
}

/// Footprint slots used by group `g` of an `n`-element reduction.
#[inline]
fn group_len(n: usize, g: usize) -> usize {
    FOOTPRINT.min(n - g * FOOTPRINT)
}

/// Mask of the structurally present slots of group `g`.
#[inline]
fn full_mask(n: usize, g: usize) -> u16 {
    (1u16 << group_len(n, g)) - 1
}

impl<'l> Operands<'l> {
    pub(crate) fn new(layer: &'l LayerSpec, weights: &SparseTensor, acts: &SparseTensor) -> Result<Self> {
        let weights = weights.decode()?;
        let raw = acts.decode()?;
        let (ho, wo) = layer.conv_out();
        let (ph, pw) = layer.padded();
        let acts = if layer.kind == LayerKind::Fc || layer.pad == 0 {
            raw
        } else {
            let (h, w, c, p) = (layer.h, layer.w, layer.c_in, layer.pad);
            let mut out = vec![0i8; ph * pw * c];
            for x in 0..w {
                for ch in 0..c {
                    let src = h * (ch + c * x);
                    let dst = p + ph * (ch + c * (x + p));
                    out[dst..dst + h].copy_from_slice(&raw[src..src + h]);
                }
            }
            out
        };
        Ok(Operands { layer, acts, weights, ph, ho, wo, groups: layer.groups() })
    }

    pub(crate) fn conv_out(&self) -> (usize, usize) {
        (self.ho, self.wo)
    }

    #[inline]
    fn act(&self, y: usize, x: usize, c: usize) -> i8 {
        self.acts[y + self.ph * (c + self.layer.c_in * x)]
    }

    #[inline]
    fn weight(&self, row: usize, filter: usize) -> i8 {
        self.weights[row + self.layer.filter_len() * filter]
    }

    /// Outputs produced by one core for `work`.
    pub(crate) fn local_outputs(&self, work: &CoreWork) -> usize {
        match work {
            CoreWork::Conv { out_rows, .. } => out_rows.len() * self.wo,
            CoreWork::Pointwise { .. } => self.ho * self.wo,
            CoreWork::Fc { neurons, .. } => neurons.len(),
        }
    }

    /// Visits the stream of `work`, calling `f(output, site)` per position.
    fn visit(&self, work: &CoreWork, mut f: impl FnMut(u32, Site)) {
        let l = self.layer;
        match work {
            CoreWork::Conv { filter, out_rows } => {
                let channels = match l.kind {
                    LayerKind::Depthwise => *filter..*filter + 1,
                    _ => 0..l.c_in,
                };
                for (yi, &y) in out_rows.iter().enumerate() {
                    for c in channels.clone() {
                        for x in 0..self.wo {
                            for g in 0..self.groups {
                                f((yi * self.wo + x) as u32, Site::Conv { filter: *filter, y, x, c, g });
                            }
                        }
                    }
                }
            }
            CoreWork::Pointwise { filter, batches } => {
                for x in 0..self.wo {
                    for y in 0..self.ho {
                        for &b in batches {
                            f((y + self.ho * x) as u32, Site::Vector { filter: *filter, y, x, b });
                        }
                    }
                }
            }
            CoreWork::Fc { neurons, batches } => {
                for (ni, &n) in neurons.iter().enumerate() {
                    for &b in batches {
                        f(ni as u32, Site::Vector { filter: n, y: 0, x: 0, b });
                    }
                }
            }
        }
    }

    fn entry(&self, output: u32, site: Site) -> Entry {
        let l = self.layer;
        let mut e = Entry { output, ..Entry::default() };
        match site {
            Site::Conv { filter, y, x, c, g } => {
                let kk = l.k * l.k;
                let wc = if l.kind == LayerKind::Depthwise { 0 } else { c };
                for s in 0..group_len(kk, g) {
                    let el = g * FOOTPRINT + s;
                    let (kh, kw) = (el % l.k, el / l.k);
                    e.weights[s] = self.weight(el + kk * wc, filter);
                    e.acts[s] = self.act(y * l.stride + kh, x * l.stride + kw, c);
                }
            }
            Site::Vector { filter, y, x, b } => {
                for s in 0..group_len(l.c_in, b) {
                    let ch = b * FOOTPRINT + s;
                    e.weights[s] = self.weight(ch, filter);
                    e.acts[s] = if l.kind == LayerKind::Fc {
                        self.acts[ch]
                    } else {
                        self.act(y * l.stride, x * l.stride, ch)
                    };
                }
            }
        }
        e
    }

    pub(crate) fn entries(&self, work: &CoreWork) -> Vec<Entry> {
        let mut out = Vec::new();
        self.visit(work, |o, site| out.push(self.entry(o, site)));
        out
    }

    /// Masks the dense baseline sees for `work`: every structural slot set.
    pub(crate) fn dense_masks(&self, work: &CoreWork) -> Vec<u16> {
        let l = self.layer;
        let n = match l.kind {
            LayerKind::Regular | LayerKind::Depthwise => l.k * l.k,
            _ => l.c_in,
        };
        let mut out = Vec::new();
        self.visit(work, |_, site| {
            let g = match site {
                Site::Conv { g, .. } => g,
                Site::Vector { b, .. } => b,
            };
            out.push(full_mask(n, g));
        });
        out
    }
}

#[derive(Debug, Clone, Copy)]
enum Site {
    Conv { filter: usize, y: usize, x: usize, c: usize, g: usize },
    Vector { filter: usize, y: usize, x: usize, b: usize },
}

/// Precomputed weight and activation masks for the timing-only path.
pub(crate) struct MaskTables<'o, 'l> {
    ops: &'o Operands<'l>,
    /// Per filter: one mask per (channel, group) or per batch.
    wmasks: Vec<u16>,
    /// Conv: per (y, c, x, group). Pointwise: per (x, y, batch). Fc: per batch.
    amasks: Vec<u16>,
    wstride: usize,
}

impl<'o, 'l> MaskTables<'o, 'l> {
    pub(crate) fn new(ops: &'o Operands<'l>, filters: &[usize]) -> Result<Self> {
        let l = ops.layer;
        let g = ops.groups;
        let mask_of = |e: &Entry, which: bool| {
            let v = if which { &e.weights } else { &e.acts };
            v.iter().enumerate().fold(0u16, |m, (s, &x)| if x != 0 { m | 1 << s } else { m })
        };
        let (wstride, wsite): (usize, &dyn Fn(usize, usize) -> Site) = match l.kind {
            LayerKind::Regular => (l.c_in * g, &|f, i| Site::Conv { filter: f, y: 0, x: 0, c: i / g, g: i % g }),
            LayerKind::Depthwise => (g, &|f, i| Site::Conv { filter: f, y: 0, x: 0, c: f, g: i }),
            _ => (g, &|f, i| Site::Vector { filter: f, y: 0, x: 0, b: i }),
        };
        let mut wmasks = vec![0u16; l.c_out * wstride];
        for &f in filters {
            for i in 0..wstride {
                wmasks[f * wstride + i] = mask_of(&ops.entry(0, wsite(f, i)), true);
            }
        }
        let (ho, wo) = (ops.ho, ops.wo);
        let mut amasks = Vec::new();
        match l.kind {
            LayerKind::Regular | LayerKind::Depthwise => {
                amasks.reserve(ho * l.c_in * wo * g);
                for y in 0..ho {
                    for c in 0..l.c_in {
                        for x in 0..wo {
                            for gi in 0..g {
                                let e = ops.entry(0, Site::Conv { filter: 0, y, x, c, g: gi });
                                amasks.push(mask_of(&e, false));
                            }
                        }
                    }
                }
            }
            LayerKind::Pointwise => {
                for x in 0..wo {
                    for y in 0..ho {
                        for b in 0..g {
                            amasks.push(mask_of(&ops.entry(0, Site::Vector { filter: 0, y, x, b }), false));
                        }
                    }
                }
            }
            LayerKind::Fc => {
                for b in 0..g {
                    amasks.push(mask_of(&ops.entry(0, Site::Vector { filter: 0, y: 0, x: 0, b }), false));
                }
            }
        }
        if wmasks.len() != l.c_out * wstride {
            bail!(Invariant, "weight mask table has the wrong size");
        }
        Ok(MaskTables { ops, wmasks, amasks, wstride })
    }

    /// Valid-product masks of the stream of `work`.
    pub(crate) fn masks(&self, work: &CoreWork) -> Vec<u16> {
        let ops = self.ops;
        let l = ops.layer;
        let g = ops.groups;
        let mut out = Vec::new();
        ops.visit(work, |_, site| {
            let m = match site {
                Site::Conv { filter, y, x, c, g: gi } => {
                    let wi = if l.kind == LayerKind::Depthwise { gi } else { c * g + gi };
                    let ai = ((y * l.c_in + c) * ops.wo + x) * g + gi;
                    self.wmasks[filter * self.wstride + wi] & self.amasks[ai]
                }
                Site::Vector { filter, y, x, b } => {
                    let ai = if l.kind == LayerKind::Fc { b } else { (x * ops.ho + y) * g + b };
                    self.wmasks[filter * self.wstride + b] & self.amasks[ai]
                }
            };
            out.push(m);
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::accelerator::{schedule_layer, AccelConfig};
    use crate::pipeline::TdsVariant;
    use crate::sparse_mask::Layout;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tensor(rng: &mut ChaCha8Rng, shape: &[usize], layout: Layout, d: f64) -> SparseTensor {
        let n: usize = shape.iter().product();
        let v: Vec<i8> = (0..n).map(|_| if rng.random_bool(d) { rng.random_range(1..=5) } else { 0 }).collect();
        SparseTensor::encode_dense(&v, shape, layout).unwrap()
    }

    #[test]
    fn mask_tables_match_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let layers = [
            LayerSpec::regular(9, 8, 3, 5, 3, 1).with_pad(1),
            LayerSpec::regular(11, 9, 2, 3, 5, 2),
            LayerSpec::depthwise(8, 7, 4, 3, 2).with_pad(1),
            LayerSpec::pointwise(4, 5, 20, 9),
            LayerSpec::fc(30, 11),
        ];
        let cfg = AccelConfig::canonical(3, TdsVariant::OutOfOrder, false, false);
        for l in &layers {
            let (shape, layout) = l.input_shape();
            let w = tensor(&mut rng, &l.weight_shape(), Layout::Matrix, 0.5);
            let a = tensor(&mut rng, &shape, layout, 0.5);
            let ops = Operands::new(l, &w, &a).unwrap();
            let plan = schedule_layer(l, &cfg, &w, 1.0).unwrap();
            let tables = MaskTables::new(&ops, &plan.filters).unwrap();
            for round in &plan.rounds {
                for t in &round.tasks {
                    let from_entries: Vec<u16> = ops.entries(&t.work).iter().map(Entry::lam).collect();
                    assert_eq!(tables.masks(&t.work), from_entries, "{:?}", l.kind);
                    assert_eq!(ops.dense_masks(&t.work).len(), from_entries.len());
                }
            }
        }
    }
}
