//! Seeded synthetic operands.
//!
//! Every tensor draws from its own ChaCha8 stream (`2 * layer` for weights,
//! `2 * layer + 1` for activations) of a generator seeded with the run
//! seed, so a tensor depends only on (seed, layer index, density) and not
//! on the order or thread in which it is generated.

use phantom_core::accelerator::{LayerSpec, LayerTensors, TensorSource};
use phantom_core::sparse_mask::{BitMask, Layout, SparseTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bernoulli(`density`) mask with values uniform over `[-127, -1] ∪ [1, 127]`.
pub fn gen_tensor(shape: &[usize], layout: Layout, density: f64, seed: u64, stream: u64) -> SparseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let total: usize = shape.iter().product();
    let mut mask = BitMask::zeros(total);
    let mut values = Vec::with_capacity((total as f64 * density) as usize + 16);
    for i in 0..total {
        if density >= 1.0 || rng.random_bool(density) {
            mask.set(i, true);
            let m = rng.random_range(1..=127i8);
            values.push(if rng.random() { m } else { -m });
        }
    }
    SparseTensor::from_parts(shape.to_vec(), layout, mask, values).expect("generated tensor is well formed")
}

/// Weights and input of layer `index`. `densities` overrides the model's
/// (weight, activation) densities.
pub fn layer_tensors(layer: &LayerSpec, index: usize, densities: Option<(f64, f64)>, seed: u64) -> LayerTensors {
    let (wd, ad) = densities.unwrap_or((layer.weight_density, layer.activation_density));
    let (shape, layout) = layer.input_shape();
    LayerTensors {
        weights: gen_tensor(&layer.weight_shape(), Layout::Matrix, wd, seed, 2 * index as u64),
        acts: gen_tensor(&shape, layout, ad, seed, 2 * index as u64 + 1),
    }
}

pub fn gen_masks(layers: &[LayerSpec], densities: Option<(f64, f64)>, seed: u64) -> Vec<LayerTensors> {
    layers.iter().enumerate().map(|(i, l)| layer_tensors(l, i, densities, seed)).collect()
}

/// [`TensorSource`] drawing from the seeded generator.
#[derive(Debug, Clone, Copy)]
pub struct SeededSource {
    pub seed: u64,
    pub densities: Option<(f64, f64)>,
}

impl TensorSource for SeededSource {
    fn weights(&mut self, index: usize, layer: &LayerSpec) -> phantom_core::Result<SparseTensor> {
        let d = self.densities.map_or(layer.weight_density, |d| d.0);
        Ok(gen_tensor(&layer.weight_shape(), Layout::Matrix, d, self.seed, 2 * index as u64))
    }

    fn activations(&mut self, index: usize, layer: &LayerSpec) -> phantom_core::Result<SparseTensor> {
        let d = self.densities.map_or(layer.activation_density, |d| d.1);
        let (shape, layout) = layer.input_shape();
        Ok(gen_tensor(&shape, layout, d, self.seed, 2 * index as u64 + 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_density_is_all_ones() {
        let t = gen_tensor(&[10, 10], Layout::Matrix, 1.0, 1, 0);
        assert_eq!(t.nnz(), 100);
    }

    #[test]
    fn density_within_binomial_bound() {
        for d in [0.1, 0.23, 0.5, 0.9] {
            let t = gen_tensor(&[100_000], Layout::Vector, d, 42, 3);
            assert!((t.density() - d).abs() <= 0.01, "{d}: {}", t.density());
        }
    }

    #[test]
    fn values_are_nonzero_int8() {
        let t = gen_tensor(&[5000], Layout::Vector, 0.5, 9, 0);
        assert!(t.values().iter().all(|&v| v != 0 && v != i8::MIN));
        assert!(t.values().iter().any(|&v| v < 0) && t.values().iter().any(|&v| v > 0));
    }

    #[test]
    fn streams_are_independent_and_repeatable() {
        let a = gen_tensor(&[64, 64], Layout::Matrix, 0.3, 7, 0);
        assert_eq!(a, gen_tensor(&[64, 64], Layout::Matrix, 0.3, 7, 0));
        assert_ne!(a, gen_tensor(&[64, 64], Layout::Matrix, 0.3, 7, 1));
        assert_ne!(a, gen_tensor(&[64, 64], Layout::Matrix, 0.3, 8, 0));
    }
}
