//! Binary sparse-mask tensor format.
//!
//! A tensor is stored as two arrays: a one-bit-per-element mask and the
//! nonzero values packed in mask order. All tensors share one canonical
//! element order in which the first extent varies fastest:
//!
//! * vector `[n]`: `i`
//! * matrix `[rows, cols]`: `r + rows * c` (column-major)
//! * volume `[H, W, C]`: `h + H * (c + C * w)`, i.e. each spatial column
//!   `w` holds its channels one after another, each channel a run of `H`
//!   elements.
//!
//! Consecutive runs of `extents[0]` elements are the "columns" used by the
//! CSC metadata comparison.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Which family of tensor the shape describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Layout {
    Vector,
    Matrix,
    Volume,
}

impl Layout {
    pub fn rank(self) -> usize {
        match self {
            Layout::Vector => 1,
            Layout::Matrix => 2,
            Layout::Volume => 3,
        }
    }

    pub fn from_rank(rank: usize) -> Option<Layout> {
        match rank {
            1 => Some(Layout::Vector),
            2 => Some(Layout::Matrix),
            3 => Some(Layout::Volume),
            _ => None,
        }
    }

    /// Canonical linear position of `coords` (given in shape order).
    pub fn linear_index(self, shape: &[usize], coords: &[usize]) -> usize {
        match self {
            Layout::Vector => coords[0],
            Layout::Matrix => coords[0] + shape[0] * coords[1],
            // shape = [H, W, C], coords = [h, w, c]
            Layout::Volume => coords[0] + shape[0] * (coords[2] + shape[2] * coords[1]),
        }
    }
}

/// Fixed-length bit array packed into 64-bit words, bit `i` living in word
/// `i / 64` at position `i % 64`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct BitMask {
    words: Vec<u64>,
    len: usize,
}

impl BitMask {
    pub fn zeros(len: usize) -> Self {
        BitMask { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn ones(len: usize) -> Self {
        let mut m = Self::zeros(len);
        for w in m.words.iter_mut() {
            *w = u64::MAX;
        }
        m.clear_tail();
        m
    }

    /// Rebuilds a mask from packed words. Bits past `len` must be zero.
    pub fn from_words(words: Vec<u64>, len: usize) -> Result<Self> {
        if words.len() != len.div_ceil(64) {
            bail!(Format, "mask of {len} bits needs {} words, got {}", len.div_ceil(64), words.len());
        }
        let m = BitMask { words, len };
        let mut cleared = m.clone();
        cleared.clear_tail();
        if cleared != m {
            bail!(Format, "mask has bits set past its length {len}");
        }
        Ok(m)
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        let w = &mut self.words[i / 64];
        if bit {
            *w |= 1 << (i % 64);
        } else {
            *w &= !(1 << (i % 64));
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of ones strictly before position `i`.
    pub fn rank(&self, i: usize) -> usize {
        let full: usize = self.words[..i / 64].iter().map(|w| w.count_ones() as usize).sum();
        let rem = i % 64;
        if rem == 0 {
            full
        } else {
            full + (self.words[i / 64] & ((1u64 << rem) - 1)).count_ones() as usize
        }
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut bits = w;
            core::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let tz = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(wi * 64 + tz)
            })
        })
    }
}

/// Scalar types a [`SparseTensor`] can hold. Inputs and weights are 8-bit;
/// layer outputs keep the 32-bit accumulator value.
pub trait Element: Copy + PartialEq + Default + core::fmt::Debug {}

impl Element for i8 {}
impl Element for i32 {}

/// Tensor held as a sparse mask plus packed nonzero values.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SparseTensor<V = i8> {
    shape: Vec<usize>,
    layout: Layout,
    mask: BitMask,
    values: Vec<V>,
}

fn check_shape(shape: &[usize], layout: Layout) -> Result<usize> {
    if shape.len() != layout.rank() {
        bail!(Format, "{layout:?} needs rank {}, got shape {shape:?}", layout.rank());
    }
    if shape.contains(&0) {
        bail!(Format, "shape {shape:?} has a zero extent");
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &e| acc.checked_mul(e))
        .ok_or_else(|| crate::Error::Format(alloc::format!("shape {shape:?} overflows")))
}

impl<V: Element> SparseTensor<V> {
    /// Encodes a dense array given in canonical order.
    pub fn encode_dense(dense: &[V], shape: &[usize], layout: Layout) -> Result<Self> {
        let total = check_shape(shape, layout)?;
        if total != dense.len() {
            bail!(Format, "shape {shape:?} holds {total} elements but array has {}", dense.len());
        }
        let mut mask = BitMask::zeros(total);
        let mut values = Vec::new();
        for (i, &v) in dense.iter().enumerate() {
            if v != V::default() {
                mask.set(i, true);
                values.push(v);
            }
        }
        Ok(SparseTensor { shape: shape.to_vec(), layout, mask, values })
    }

    /// Assembles a tensor from already-separated parts, validating every
    /// invariant of the format.
    pub fn from_parts(shape: Vec<usize>, layout: Layout, mask: BitMask, values: Vec<V>) -> Result<Self> {
        let total = check_shape(&shape, layout)?;
        if mask.len() != total {
            bail!(Format, "mask has {} bits for {total} elements", mask.len());
        }
        let t = SparseTensor { shape, layout, mask, values };
        t.check_integrity()?;
        Ok(t)
    }

    /// All-zero tensor.
    pub fn zeros(shape: &[usize], layout: Layout) -> Result<Self> {
        let total = check_shape(shape, layout)?;
        Ok(SparseTensor { shape: shape.to_vec(), layout, mask: BitMask::zeros(total), values: Vec::new() })
    }

    pub fn check_integrity(&self) -> Result<()> {
        let ones = self.mask.count_ones();
        if ones != self.values.len() {
            bail!(Integrity, "mask popcount {ones} != stored values {}", self.values.len());
        }
        if let Some(pos) = self.values.iter().position(|&v| v == V::default()) {
            bail!(Integrity, "stored value #{pos} is zero");
        }
        Ok(())
    }

    /// Expands to a dense array in canonical order.
    pub fn decode(&self) -> Result<Vec<V>> {
        self.check_integrity()?;
        let mut dense = vec![V::default(); self.mask.len()];
        for (slot, i) in self.mask.iter_ones().enumerate() {
            dense[i] = self.values[slot];
        }
        Ok(dense)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn layout(&self) -> Layout {
        self.layout
    }

    pub fn mask(&self) -> &BitMask {
        &self.mask
    }

    pub fn values(&self) -> &[V] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.mask.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mask.is_empty()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Fraction of elements that are nonzero.
    pub fn density(&self) -> f64 {
        if self.mask.is_empty() {
            return 0.0;
        }
        self.mask.count_ones() as f64 / self.mask.len() as f64
    }

    /// Same data viewed under a different shape with the same element count.
    pub fn reshaped(mut self, shape: &[usize], layout: Layout) -> Result<Self> {
        let total = check_shape(shape, layout)?;
        if total != self.mask.len() {
            bail!(Shape, "cannot view {} elements as {shape:?}", self.mask.len());
        }
        self.shape = shape.to_vec();
        self.layout = layout;
        Ok(self)
    }

    /// Metadata traffic of this tensor as a sparse mask versus CSC.
    ///
    /// CSC columns are the canonical runs of `extents[0]` elements; row
    /// indices must address `extents[0]` rows and column offsets must be
    /// able to hold the element count.
    pub fn metadata_access_bits(&self, index_width: u32, offset_width: u32) -> Result<MetadataAccount> {
        let rows = self.shape[0];
        let total = self.mask.len();
        let columns = total / rows;
        let need_index = bits_to_address(rows);
        let need_offset = bits_to_hold(total);
        if index_width < need_index {
            bail!(Config, "index width {index_width} cannot address {rows} rows (need {need_index})");
        }
        if offset_width < need_offset {
            bail!(Config, "offset width {offset_width} cannot hold offset {total} (need {need_offset})");
        }
        let mask_bits = total as u64;
        let csc_bits = self.nnz() as u64 * index_width as u64 + (columns as u64 + 1) * offset_width as u64;
        Ok(MetadataAccount { mask_bits, csc_bits, ratio: csc_bits as f64 / mask_bits as f64 })
    }
}

/// Bits needed for indices `0..n`.
fn bits_to_address(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Bits needed to represent the value `n` itself.
fn bits_to_hold(n: usize) -> u32 {
    usize::BITS - n.leading_zeros()
}

/// Location-metadata bits touched when reading a tensor, mask vs CSC.
/// Value payloads are identical in both formats and are not counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetadataAccount {
    pub mask_bits: u64,
    pub csc_bits: u64,
    pub ratio: f64,
}
