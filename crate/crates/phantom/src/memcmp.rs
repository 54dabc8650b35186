//! Metadata traffic of each layer's input activations, sparse mask vs CSC.
//!
//! A volume is accounted as one `H x W` CSC matrix per channel, so column
//! offsets only need to span a single plane. Vectors are a single column.

use phantom_core::accelerator::LayerSpec;
use phantom_core::sparse_mask::{BitMask, Layout, SparseTensor};
use serde::Serialize;

use crate::error::Result;
use crate::synth::SeededSource;
use phantom_core::accelerator::TensorSource;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemRow {
    pub layer_index: usize,
    pub layer: String,
    pub shape: String,
    pub elements: u64,
    pub nnz: u64,
    pub density: String,
    pub mask_bits: u64,
    pub csc_bits: u64,
    pub ratio: String,
}

/// Channel `c` of a `[H, W, C]` volume as an `[H, W]` matrix.
pub fn channel_plane(t: &SparseTensor, c: usize) -> Result<SparseTensor> {
    let &[h, w, ch] = t.shape() else {
        return Err(crate::error::Error::Invalid(format!("expected a volume, got {:?}", t.shape())));
    };
    let mut mask = BitMask::zeros(h * w);
    let mut values = Vec::new();
    for x in 0..w {
        let base = h * (c + ch * x);
        for y in 0..h {
            if t.mask().get(base + y) {
                mask.set(y + h * x, true);
                values.push(t.values()[t.mask().rank(base + y)]);
            }
        }
    }
    Ok(SparseTensor::from_parts(vec![h, w], Layout::Matrix, mask, values)?)
}

/// `(mask_bits, csc_bits)` of a tensor under the per-plane accounting.
pub fn account(t: &SparseTensor, index_bits: u32, offset_bits: u32) -> Result<(u64, u64)> {
    if t.layout() != Layout::Volume {
        let a = t.metadata_access_bits(index_bits, offset_bits)?;
        return Ok((a.mask_bits, a.csc_bits));
    }
    let (mut mask, mut csc) = (0, 0);
    for c in 0..t.shape()[2] {
        let a = channel_plane(t, c)?.metadata_access_bits(index_bits, offset_bits)?;
        mask += a.mask_bits;
        csc += a.csc_bits;
    }
    Ok((mask, csc))
}

/// One row per layer whose input the widths can describe. Layers that do
/// not fit are reported through `skipped` and left out.
pub fn memcmp(
    layers: &[LayerSpec],
    seed: u64,
    densities: Option<(f64, f64)>,
    index_bits: u32,
    offset_bits: u32,
    mut skipped: impl FnMut(&LayerSpec, &phantom_core::Error),
) -> Result<Vec<MemRow>> {
    phantom_core::accelerator::validate_chain(layers)?;
    let mut source = SeededSource { seed, densities };
    let mut rows = Vec::new();
    for (i, l) in layers.iter().enumerate() {
        let t = source.activations(i, l)?;
        let (mask_bits, csc_bits) = match account(&t, index_bits, offset_bits) {
            Ok(v) => v,
            Err(crate::error::Error::Sim(e @ phantom_core::Error::Config(_))) => {
                skipped(l, &e);
                continue;
            }
            Err(e) => return Err(e),
        };
        let shape: Vec<String> = t.shape().iter().map(|d| d.to_string()).collect();
        rows.push(MemRow {
            layer_index: i,
            layer: l.name.clone(),
            shape: shape.join("x"),
            elements: t.len() as u64,
            nnz: t.nnz() as u64,
            density: format!("{:.6}", t.density()),
            mask_bits,
            csc_bits,
            ratio: format!("{:.6}", csc_bits as f64 / mask_bits as f64),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::gen_tensor;

    #[test]
    fn planes_partition_the_volume() {
        let t = gen_tensor(&[5, 4, 3], Layout::Volume, 0.5, 1, 0);
        let dense = t.decode().unwrap();
        let mut nnz = 0;
        for c in 0..3 {
            let p = channel_plane(&t, c).unwrap();
            let pd = p.decode().unwrap();
            for x in 0..4 {
                for y in 0..5 {
                    assert_eq!(pd[y + 5 * x], dense[y + 5 * (c + 3 * x)]);
                }
            }
            nnz += p.nnz();
        }
        assert_eq!(nnz, t.nnz());
    }

    #[test]
    fn volume_accounting_is_per_plane() {
        let t = gen_tensor(&[10, 10, 4], Layout::Volume, 0.7, 3, 0);
        let (mask, csc) = account(&t, 8, 16).unwrap();
        assert_eq!(mask, 400);
        assert_eq!(csc, t.nnz() as u64 * 8 + 4 * 11 * 16);
    }
}
