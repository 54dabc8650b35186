use alloc::vec;
use alloc::vec::Vec;

use crate::error::{bail, Result};

/// Partial sum produced by one grid column for one output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnPartial {
    pub output: usize,
    pub col: usize,
    pub value: i32,
}

/// L3 adders: sums, for every output, the partials of the `cols` active
/// columns. Each output must receive exactly one partial from every column.
pub fn l3_accumulate(partials: &[ColumnPartial], outputs: usize, cols: usize) -> Result<Vec<i32>> {
    let mut sums = vec![0i32; outputs];
    let mut seen = vec![false; outputs * cols];
    for p in partials {
        if p.output >= outputs || p.col >= cols {
            bail!(Integrity, "partial {p:?} outside {outputs} outputs x {cols} columns");
        }
        let slot = &mut seen[p.output * cols + p.col];
        if *slot {
            bail!(Integrity, "column {} delivered output {} twice", p.col, p.output);
        }
        *slot = true;
        let Some(s) = sums[p.output].checked_add(p.value) else {
            bail!(Invariant, "32-bit accumulator overflow at output {}", p.output);
        };
        sums[p.output] = s;
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        bail!(Integrity, "output {} is missing the partial of column {}", i / cols, i % cols);
    }
    Ok(sums)
}
