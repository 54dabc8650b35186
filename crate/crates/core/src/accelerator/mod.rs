//! The R x C grid of cores and the layer dataflows that drive it.
//!
//! * Regular and depthwise convolutions: each column receives one filter per
//!   broadcast round, grid row `r` produces output rows `r, r + R, ...`.
//! * Pointwise convolutions: each row receives one filter per round, input
//!   channels are cut into batches of 9 spread over the columns, and the L3
//!   adders sum the column partials.
//! * Fully connected layers: the input vector is pinned across the columns
//!   in batches of 9, output neurons are spread over the rows.
//!
//! A round lasts as long as its slowest core; a layer is the sum of its
//! rounds.

mod l3;
mod layer;
mod network;
mod schedule;
mod streams;

pub use l3::{l3_accumulate, ColumnPartial};
pub use layer::{max_pool, requantize, simulate_layer, CoreRun, LayerResult, LayerTensors, SimOptions};
pub use network::{simulate_network, validate_chain, NetworkOptions, NetworkReport, TensorSource};
pub use schedule::{
    inter_core_balance, schedule_fc, schedule_layer, schedule_pointwise, schedule_regular, CoreTask, CoreWork,
    Round, WorkAssignment,
};

use alloc::string::String;

use crate::error::{bail, Result};
use crate::pipeline::{CoreConfig, TdsVariant, FOOTPRINT};
use crate::sparse_mask::Layout;

/// Grid configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AccelConfig {
    pub rows: usize,
    pub cols: usize,
    pub core: CoreConfig,
    pub inter_balance: bool,
}

impl AccelConfig {
    /// The 7 x 4 grid.
    pub fn canonical(lf: usize, tds: TdsVariant, intra_balance: bool, inter_balance: bool) -> Self {
        AccelConfig { rows: 7, cols: 4, core: CoreConfig::new(lf, tds, intra_balance), inter_balance }
    }

    /// Same grid running the dense baseline.
    pub fn dense_baseline(&self) -> Self {
        AccelConfig { core: CoreConfig::dense(), inter_balance: false, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            bail!(Config, "grid must be at least 1x1, got {}x{}", self.rows, self.cols);
        }
        self.core.validate()
    }

    pub fn cores(&self) -> usize {
        self.rows * self.cols
    }

    /// Multiplier threads across the grid.
    pub fn threads(&self) -> usize {
        self.cores() * self.core.threads()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LayerKind {
    Regular,
    Depthwise,
    Pointwise,
    Fc,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Regular => "regular",
            LayerKind::Depthwise => "depthwise",
            LayerKind::Pointwise => "pointwise",
            LayerKind::Fc => "fc",
        }
    }
}

/// One layer. Inputs are `[h, w, c_in]` volumes (a `c_in` vector for FC).
/// `pad` zeros are added on every spatial border before the convolution and
/// a `pool` x `pool` max-pool follows the activation.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub kind: LayerKind,
    pub h: usize,
    pub w: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub stride: usize,
    pub pad: usize,
    pub pool: usize,
    pub no_relu: bool,
    pub weight_density: f64,
    pub activation_density: f64,
}

impl LayerSpec {
    fn base(kind: LayerKind, h: usize, w: usize, c_in: usize, c_out: usize, k: usize, stride: usize) -> Self {
        LayerSpec {
            name: String::new(),
            kind,
            h,
            w,
            c_in,
            c_out,
            k,
            stride,
            pad: 0,
            pool: 1,
            no_relu: false,
            weight_density: 1.0,
            activation_density: 1.0,
        }
    }

    pub fn regular(h: usize, w: usize, c_in: usize, c_out: usize, k: usize, stride: usize) -> Self {
        Self::base(LayerKind::Regular, h, w, c_in, c_out, k, stride)
    }

    pub fn depthwise(h: usize, w: usize, c: usize, k: usize, stride: usize) -> Self {
        Self::base(LayerKind::Depthwise, h, w, c, c, k, stride)
    }

    pub fn pointwise(h: usize, w: usize, c_in: usize, c_out: usize) -> Self {
        Self::base(LayerKind::Pointwise, h, w, c_in, c_out, 1, 1)
    }

    pub fn fc(n_in: usize, n_out: usize) -> Self {
        Self::base(LayerKind::Fc, 1, 1, n_in, n_out, 1, 1)
    }

    pub fn named(mut self, name: &str) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_pad(mut self, pad: usize) -> Self {
        self.pad = pad;
        self
    }

    pub fn with_pool(mut self, pool: usize) -> Self {
        self.pool = pool;
        self
    }

    pub fn with_densities(mut self, weight: f64, activation: f64) -> Self {
        self.weight_density = weight;
        self.activation_density = activation;
        self
    }

    pub fn without_relu(mut self) -> Self {
        self.no_relu = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = &self.name;
        if [self.h, self.w, self.c_in, self.c_out, self.k, self.stride, self.pool].contains(&0) {
            bail!(Shape, "layer '{n}' has a zero extent");
        }
        match self.kind {
            LayerKind::Pointwise if self.k != 1 => bail!(Shape, "pointwise layer '{n}' needs k = 1"),
            LayerKind::Depthwise if self.c_in != self.c_out => {
                bail!(Shape, "depthwise layer '{n}' maps {} channels to {}", self.c_in, self.c_out)
            }
            LayerKind::Fc if self.h != 1 || self.w != 1 || self.k != 1 || self.pad != 0 || self.pool != 1 => {
                bail!(Shape, "fc layer '{n}' must be 1x1 spatially with no padding or pooling")
            }
            _ => {}
        }
        if self.h + 2 * self.pad < self.k || self.w + 2 * self.pad < self.k {
            bail!(Shape, "layer '{n}': {}x{} kernel larger than padded input", self.k, self.k);
        }
        let (ho, wo) = self.conv_out();
        if ho < self.pool || wo < self.pool {
            bail!(Shape, "layer '{n}': {ho}x{wo} output cannot be pooled by {}", self.pool);
        }
        for d in [self.weight_density, self.activation_density] {
            if !(d > 0.0 && d <= 1.0) {
                bail!(Config, "layer '{n}': density {d} outside (0, 1]");
            }
        }
        Ok(())
    }

    /// Padded input extents.
    pub fn padded(&self) -> (usize, usize) {
        (self.h + 2 * self.pad, self.w + 2 * self.pad)
    }

    /// Convolution output extents before pooling.
    pub fn conv_out(&self) -> (usize, usize) {
        let (ph, pw) = self.padded();
        ((ph.saturating_sub(self.k)) / self.stride + 1, (pw.saturating_sub(self.k)) / self.stride + 1)
    }

    pub fn input_shape(&self) -> (alloc::vec::Vec<usize>, Layout) {
        match self.kind {
            LayerKind::Fc => (alloc::vec![self.c_in], Layout::Vector),
            _ => (alloc::vec![self.h, self.w, self.c_in], Layout::Volume),
        }
    }

    /// Output shape after pooling.
    pub fn output_shape(&self) -> (alloc::vec::Vec<usize>, Layout) {
        match self.kind {
            LayerKind::Fc => (alloc::vec![self.c_out], Layout::Vector),
            _ => {
                let (ho, wo) = self.conv_out();
                (alloc::vec![ho / self.pool, wo / self.pool, self.c_out], Layout::Volume)
            }
        }
    }

    /// Rows of the `[rows, c_out]` weight matrix: the reduction length of
    /// one output.
    pub fn filter_len(&self) -> usize {
        match self.kind {
            LayerKind::Regular => self.k * self.k * self.c_in,
            LayerKind::Depthwise => self.k * self.k,
            LayerKind::Pointwise | LayerKind::Fc => self.c_in,
        }
    }

    pub fn weight_shape(&self) -> [usize; 2] {
        [self.filter_len(), self.c_out]
    }

    /// Lookahead positions needed for one output of one channel (regular
    /// and depthwise) or one 9-channel batch (pointwise and fc).
    pub fn groups(&self) -> usize {
        match self.kind {
            LayerKind::Regular | LayerKind::Depthwise => (self.k * self.k).div_ceil(FOOTPRINT),
            LayerKind::Pointwise | LayerKind::Fc => self.c_in.div_ceil(FOOTPRINT),
        }
    }

    /// Number of filters (or neurons) simulated for `fraction`.
    pub fn simulated_filters(&self, fraction: f64) -> usize {
        if fraction >= 1.0 {
            return self.c_out;
        }
        // ceil without libm
        let x = fraction * self.c_out as f64;
        let n = x as usize + ((x as usize as f64) < x) as usize;
        n.clamp(1, self.c_out)
    }
}

/// Totals for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LayerStats {
    pub cycles: u64,
    pub dense_cycles: u64,
    pub valid_macs: u64,
    /// Sum over active cores of `cycles * threads`.
    pub mac_slots: u64,
}

impl LayerStats {
    pub fn utilization(&self) -> f64 {
        if self.mac_slots == 0 {
            0.0
        } else {
            self.valid_macs as f64 / self.mac_slots as f64
        }
    }

    pub fn speedup(&self) -> f64 {
        if self.cycles == 0 {
            if self.dense_cycles == 0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            self.dense_cycles as f64 / self.cycles as f64
        }
    }

    pub fn add(&mut self, other: &LayerStats) {
        self.cycles += other.cycles;
        self.dense_cycles += other.dense_cycles;
        self.valid_macs += other.valid_macs;
        self.mac_slots += other.mac_slots;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_grid_has_252_threads() {
        let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, true, true);
        assert_eq!(cfg.threads(), 252);
        cfg.validate().unwrap();
    }

    #[test]
    fn layer_geometry() {
        let l = LayerSpec::depthwise(9, 5, 4, 3, 1);
        l.validate().unwrap();
        assert_eq!(l.output_shape().0, vec![7, 3, 4]);
        let l = LayerSpec::regular(224, 224, 3, 64, 3, 1).with_pad(1).with_pool(2);
        assert_eq!(l.output_shape().0, vec![112, 112, 64]);
        assert_eq!(l.weight_shape(), [27, 64]);
        assert_eq!(LayerSpec::regular(7, 7, 1, 1, 3, 2).conv_out(), (3, 3));
    }

    #[test]
    fn invalid_layers() {
        assert!(LayerSpec::regular(2, 2, 1, 1, 3, 1).validate().is_err());
        assert!(LayerSpec::regular(4, 4, 1, 1, 3, 1).with_densities(0.0, 1.0).validate().is_err());
        let mut dw = LayerSpec::depthwise(4, 4, 2, 3, 1);
        dw.c_out = 3;
        assert!(dw.validate().is_err());
        assert!(LayerSpec::fc(4, 4).with_pool(2).validate().is_err());
    }
}
