//! CSV rows shared by `run` and `sweep`.

use std::io::Write;

use phantom_core::accelerator::{LayerSpec, LayerStats};
use phantom_core::pipeline::TdsVariant;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which balancers are switched on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Balance {
    #[serde(alias = "unbalanced")]
    None,
    #[serde(alias = "intra_core")]
    Intra,
    #[serde(alias = "inter_core")]
    Inter,
    Full,
}

impl Balance {
    /// `(intra, inter)` flags.
    pub fn flags(self) -> (bool, bool) {
        match self {
            Balance::None => (false, false),
            Balance::Intra => (true, false),
            Balance::Inter => (false, true),
            Balance::Full => (true, true),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Balance::None => "none",
            Balance::Intra => "intra",
            Balance::Inter => "inter",
            Balance::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tds {
    #[serde(rename = "io", alias = "in_order")]
    InOrder,
    #[serde(rename = "ooo", alias = "out_of_order")]
    OutOfOrder,
}

impl Tds {
    pub fn variant(self) -> TdsVariant {
        match self {
            Tds::InOrder => TdsVariant::InOrder,
            Tds::OutOfOrder => TdsVariant::OutOfOrder,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Tds::InOrder => "io",
            Tds::OutOfOrder => "ooo",
        }
    }
}

/// One CSV line. `utilization` and `speedup` are derived from the integer
/// columns and printed with six decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub layer_index: usize,
    pub layer: String,
    pub kind: String,
    pub lf: usize,
    pub tds: String,
    pub balance: String,
    pub weight_density: f64,
    pub activation_density: f64,
    pub cycles: u64,
    pub dense_cycles: u64,
    pub valid_macs: u64,
    pub mac_slots: u64,
    pub utilization: String,
    pub speedup: String,
}

impl Row {
    pub fn new(index: usize, layer: &LayerSpec, lf: usize, tds: Tds, balance: Balance, densities: (f64, f64), s: &LayerStats) -> Self {
        Row {
            layer_index: index,
            layer: layer.name.clone(),
            kind: layer.kind.name().into(),
            lf,
            tds: tds.name().into(),
            balance: balance.name().into(),
            weight_density: densities.0,
            activation_density: densities.1,
            cycles: s.cycles,
            dense_cycles: s.dense_cycles,
            valid_macs: s.valid_macs,
            mac_slots: s.mac_slots,
            utilization: format!("{:.6}", s.utilization()),
            speedup: format!("{:.6}", s.speedup()),
        }
    }

    pub fn stats(&self) -> LayerStats {
        LayerStats {
            cycles: self.cycles,
            dense_cycles: self.dense_cycles,
            valid_macs: self.valid_macs,
            mac_slots: self.mac_slots,
        }
    }
}

pub fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(r: R) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<std::result::Result<_, _>>()?)
}
