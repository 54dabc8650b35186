use alloc::vec::Vec;

use crate::error::{bail, Result};
use crate::sparse_mask::{BitMask, Layout, SparseTensor};

/// Output encoder. `reduced[i]` is the all-zero check of output `i`: a
/// cleared bit means no valid product reached that output, so it is zero
/// without looking at the value. With `relu` on, non-positive outputs are
/// dropped; without it only exact zeros are. Survivors are compacted into
/// a vector-layout fragment.
pub fn relu_encode(outputs: &[i32], reduced: &[bool], relu: bool) -> Result<SparseTensor<i32>> {
    if outputs.len() != reduced.len() {
        bail!(Shape, "{} outputs but {} reduced bits", outputs.len(), reduced.len());
    }
    let mut mask = BitMask::zeros(outputs.len());
    let mut values = Vec::new();
    for (i, (&v, &r)) in outputs.iter().zip(reduced).enumerate() {
        let keep = r && if relu { v > 0 } else { v != 0 };
        if keep {
            mask.set(i, true);
            values.push(v);
        }
    }
    SparseTensor::from_parts(alloc::vec![outputs.len()], Layout::Vector, mask, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negatives_and_unreduced_positions_drop() {
        let t = relu_encode(&[5, -2, 0], &[true, true, false], true).unwrap();
        assert_eq!(t.decode().unwrap(), vec![5, 0, 0]);
        assert_eq!(t.values(), &[5]);
        assert_eq!(t.nnz(), 1);
    }

    #[test]
    fn all_negative_is_empty() {
        let t = relu_encode(&[-1, -7], &[true, true], true).unwrap();
        assert_eq!(t.nnz(), 0);
    }

    #[test]
    fn cancellation_clears_the_bit() {
        let t = relu_encode(&[0, 3], &[true, true], true).unwrap();
        assert!(!t.mask().get(0));
        let t = relu_encode(&[0, -3], &[true, true], false).unwrap();
        assert_eq!(t.values(), &[-3]);
    }

    #[test]
    fn length_mismatch() {
        assert!(matches!(relu_encode(&[1], &[], true), Err(crate::Error::Shape(_))));
    }
}
