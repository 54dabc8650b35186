//! Output buffer with tag-driven L2 accumulation.
//!
//! Partial sums are keyed by output. An output turns valid once every
//! (entry, lane) pair with at least one valid product has delivered its
//! tag-1 value; until then its running sum is held as a partial together
//! with the number of tags still missing.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Destination of a partial sum: the output it accumulates into and the
/// (entry, lane) pair that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coord {
    pub output: u32,
    pub entry: u32,
    pub lane: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaggedEntry {
    pub value: i32,
    pub tag: bool,
    pub coord: Coord,
}

/// An output still waiting for tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Partial {
    pub output: u32,
    pub sum: i32,
    pub missing: u32,
}

#[derive(Debug, Clone, Default)]
pub struct OutputBuffer {
    sums: Vec<i32>,
    pending: Vec<u32>,
    touched: Vec<bool>,
    expected: Vec<u8>,
    completed: Vec<u8>,
}

impl OutputBuffer {
    pub fn new(outputs: usize, entries: usize) -> Self {
        OutputBuffer {
            sums: vec![0; outputs],
            pending: vec![0; outputs],
            touched: vec![false; outputs],
            expected: vec![0; entries],
            completed: vec![0; entries],
        }
    }

    fn check(&self, c: &Coord) -> Result<()> {
        if c.output as usize >= self.sums.len() || c.entry as usize >= self.expected.len() || c.lane >= 8 {
            bail!(Integrity, "coordinate {c:?} outside the output buffer");
        }
        Ok(())
    }

    /// Registers a pair that will deliver a tag-1 value.
    pub fn expect(&mut self, c: Coord) -> Result<()> {
        self.check(&c)?;
        let bit = 1u8 << c.lane;
        if self.expected[c.entry as usize] & bit != 0 {
            bail!(Integrity, "pair {c:?} registered twice");
        }
        self.expected[c.entry as usize] |= bit;
        self.pending[c.output as usize] += 1;
        Ok(())
    }

    /// Accumulates one L1 result. Returns the output and its value when
    /// this entry completes it.
    pub fn accept(&mut self, e: &TaggedEntry) -> Result<Option<(u32, i32)>> {
        let c = e.coord;
        self.check(&c)?;
        let (o, bit) = (c.output as usize, 1u8 << c.lane);
        if self.expected[c.entry as usize] & bit == 0 {
            bail!(Integrity, "value for unexpected pair {c:?}");
        }
        if self.completed[c.entry as usize] & bit != 0 {
            bail!(Integrity, "pair {c:?} already completed");
        }
        let Some(sum) = self.sums[o].checked_add(e.value) else {
            bail!(Invariant, "32-bit accumulator overflow at output {o}");
        };
        self.sums[o] = sum;
        self.touched[o] = true;
        if !e.tag {
            return Ok(None);
        }
        self.completed[c.entry as usize] |= bit;
        self.pending[o] -= 1;
        Ok((self.pending[o] == 0).then_some((c.output, sum)))
    }

    pub fn is_valid(&self, output: usize) -> bool {
        self.pending[output] == 0
    }

    /// Outputs that have received values but are still missing tags.
    pub fn partials(&self) -> Vec<Partial> {
        (0..self.sums.len())
            .filter(|&o| self.pending[o] > 0 && self.touched[o])
            .map(|o| Partial { output: o as u32, sum: self.sums[o], missing: self.pending[o] })
            .collect()
    }

    /// Final sums; fails if any expected tag never arrived.
    pub fn finish(self) -> Result<Vec<i32>> {
        if let Some(o) = self.pending.iter().position(|&p| p > 0) {
            bail!(Invariant, "output {o} still missing {} tags at end of stream", self.pending[o]);
        }
        Ok(self.sums)
    }
}

/// Outputs in the order they became valid, as `(output, value)`, and the
/// partials left over.
pub type Accumulated = (Vec<(u32, i32)>, Vec<Partial>);

/// Replays a stream of tagged values through an [`OutputBuffer`].
pub fn ob_accumulate(
    outputs: usize,
    entries: usize,
    expected: &[Coord],
    stream: &[TaggedEntry],
) -> Result<Accumulated> {
    let mut ob = OutputBuffer::new(outputs, entries);
    for &c in expected {
        ob.expect(c)?;
    }
    let mut valid = Vec::new();
    for e in stream {
        if let Some(v) = ob.accept(e)? {
            valid.push(v);
        }
    }
    Ok((valid, ob.partials()))
}
