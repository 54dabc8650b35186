//! On-disk sparse tensor file.
//!
//! ```text
//! "PHSM" | version u16 | rank u8 | extents u32 x rank | nnz u32
//! mask: ceil(total / 64) u64 words, bit i in word i / 64 at i % 64
//! values: nnz raw i8
//! ```
//!
//! Every integer is little-endian. The rank selects the layout (1 vector,
//! 2 matrix, 3 volume).

use std::io::{Read, Write};

use phantom_core::sparse_mask::{BitMask, Layout, SparseTensor};
use phantom_core::Error as CoreError;

use crate::error::Result;

pub const MAGIC: &[u8; 4] = b"PHSM";
pub const VERSION: u16 = 1;

fn format_err(msg: impl Into<String>) -> crate::Error {
    CoreError::Format(msg.into()).into()
}

pub fn write_tensor<W: Write>(mut w: W, t: &SparseTensor) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&[t.shape().len() as u8])?;
    for &e in t.shape() {
        w.write_all(&(e as u32).to_le_bytes())?;
    }
    w.write_all(&(t.nnz() as u32).to_le_bytes())?;
    for word in t.mask().words() {
        w.write_all(&word.to_le_bytes())?;
    }
    let bytes: Vec<u8> = t.values().iter().map(|&v| v as u8).collect();
    w.write_all(&bytes)
}

pub fn to_bytes(t: &SparseTensor) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, t).expect("writing to a Vec cannot fail");
    buf
}

fn read_array<const N: usize, R: Read>(r: &mut R, what: &str) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b).map_err(|e| format_err(format!("truncated {what}: {e}")))?;
    Ok(b)
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<SparseTensor> {
    let magic: [u8; 4] = read_array(&mut r, "magic")?;
    if &magic != MAGIC {
        return Err(format_err(format!("bad magic {magic:?}")));
    }
    let version = u16::from_le_bytes(read_array(&mut r, "version")?);
    if version != VERSION {
        return Err(format_err(format!("unsupported version {version}")));
    }
    let [rank] = read_array(&mut r, "rank")?;
    let layout = Layout::from_rank(rank as usize).ok_or_else(|| format_err(format!("unsupported rank {rank}")))?;
    let mut shape = Vec::with_capacity(rank as usize);
    for _ in 0..rank {
        shape.push(u32::from_le_bytes(read_array(&mut r, "extent")?) as usize);
    }
    let nnz = u32::from_le_bytes(read_array(&mut r, "nnz")?) as usize;
    let total = shape
        .iter()
        .try_fold(1usize, |a, &e| a.checked_mul(e))
        .ok_or_else(|| format_err(format!("shape {shape:?} overflows")))?;
    let mut words = Vec::with_capacity(total.div_ceil(64));
    for _ in 0..total.div_ceil(64) {
        words.push(u64::from_le_bytes(read_array(&mut r, "mask")?));
    }
    let mut values = vec![0u8; nnz];
    r.read_exact(&mut values).map_err(|e| format_err(format!("truncated values: {e}")))?;
    let mask = BitMask::from_words(words, total)?;
    let values = values.into_iter().map(|b| b as i8).collect();
    Ok(SparseTensor::from_parts(shape, layout, mask, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dense: Vec<i8> = (0..130).map(|i| if i % 3 == 0 { (i % 127) as i8 - 60 } else { 0 }).collect();
        let t = SparseTensor::encode_dense(&dense, &[5, 2, 13], Layout::Volume).unwrap();
        let bytes = to_bytes(&t);
        assert_eq!(&bytes[..4], b"PHSM");
        assert_eq!(bytes.len(), 4 + 2 + 1 + 12 + 4 + 3 * 8 + t.nnz());
        assert_eq!(read_tensor(bytes.as_slice()).unwrap(), t);
    }

    #[test]
    fn header_is_little_endian() {
        let t = SparseTensor::encode_dense(&[1i8, 0, 0, -1], &[2, 2], Layout::Matrix).unwrap();
        let b = to_bytes(&t);
        assert_eq!(&b[4..7], &[1, 0, 2]);
        assert_eq!(&b[7..15], &[2, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[15..19], &[2, 0, 0, 0]);
        assert_eq!(&b[19..27], &[0b1001, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&b[27..], &[1, 0xff]);
    }

    #[test]
    fn corrupt_files() {
        let t = SparseTensor::encode_dense(&[1i8, 0, 0, -1], &[4], Layout::Vector).unwrap();
        let mut b = to_bytes(&t);
        assert!(read_tensor(&b[..b.len() - 1]).is_err());
        let n = b.len();
        b[n - 1] = 0; // stored zero
        assert!(matches!(read_tensor(b.as_slice()), Err(crate::Error::Sim(CoreError::Integrity(_)))));
        let mut bad = to_bytes(&t);
        bad[0] = b'X';
        assert!(read_tensor(bad.as_slice()).is_err());
        let mut bits = to_bytes(&t);
        bits[4 + 2 + 1 + 4 + 4] |= 0b10; // popcount no longer matches nnz
        assert!(read_tensor(bits.as_slice()).is_err());
    }
}
