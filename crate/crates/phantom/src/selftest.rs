//! Compact oracle-equivalence and golden-value checks for `phantom selftest`.

use phantom_core::accelerator::{simulate_layer, AccelConfig, LayerSpec, LayerTensors, SimOptions};
use phantom_core::oracle::{dense_cycle_model, reference_layer};
use phantom_core::pipeline::{
    admissible_map_patterns, time_stream, tds_select_out_of_order, CoreConfig, MapperStorage, TdsVariant,
};
use phantom_core::sparse_mask::{BitMask, Layout, SparseTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::synth::gen_tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, r: Result<String, String>) -> Check {
    match r {
        Ok(detail) => Check { name, passed: true, detail },
        Err(detail) => Check { name, passed: false, detail },
    }
}

fn random_layer(rng: &mut ChaCha8Rng, i: usize) -> LayerSpec {
    let (h, w) = (rng.random_range(3..=10), rng.random_range(3..=10));
    let (c_in, c_out) = (rng.random_range(1..=16), rng.random_range(1..=10));
    match i % 5 {
        0 => LayerSpec::regular(h, w, c_in, c_out, 3, 1),
        1 => LayerSpec::regular(h + 2, w + 2, c_in, c_out, 3, 2),
        2 => LayerSpec::depthwise(h, w, c_in, 3, 1),
        3 => LayerSpec::pointwise(h, w, c_in, c_out),
        _ => LayerSpec::fc(c_in * 4, c_out * 2),
    }
}

fn oracle_equivalence(layers: usize) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let configs = [
        AccelConfig::canonical(6, TdsVariant::InOrder, false, false),
        AccelConfig::canonical(18, TdsVariant::OutOfOrder, true, true),
    ];
    for i in 0..layers {
        let l = random_layer(&mut rng, i);
        let (wd, ad) = (rng.random_range(0.2..=1.0), rng.random_range(0.2..=1.0));
        let (shape, layout) = l.input_shape();
        let t = LayerTensors {
            weights: gen_tensor(&l.weight_shape(), Layout::Matrix, wd, i as u64, 0),
            acts: gen_tensor(&shape, layout, ad, i as u64, 1),
        };
        let (want, macs) = reference_layer(&l, &t.weights, &t.acts).map_err(|e| e.to_string())?;
        for cfg in &configs {
            let r = simulate_layer(&l, &t, cfg, &SimOptions::default()).map_err(|e| e.to_string())?;
            let got = r.output.ok_or("no output")?.decode().map_err(|e| e.to_string())?;
            if got != want.values {
                return Err(format!("layer {i} ({}) output differs from oracle", l.kind.name()));
            }
            if r.stats.valid_macs != macs {
                return Err(format!("layer {i}: {} valid MACs, oracle {macs}", r.stats.valid_macs));
            }
            if r.stats.dense_cycles != dense_cycle_model(&l, cfg, 1.0) {
                return Err(format!("layer {i}: dense cycles differ from closed form"));
            }
        }
    }
    Ok(format!("{layers} layers x {} configs bit-exact", configs.len()))
}

fn mapper_table() -> Result<String, String> {
    let n = admissible_map_patterns(9, 3);
    let s = MapperStorage::canonical();
    let (three, one) = (s.kilobytes(3), s.kilobytes(1));
    if n != 130 || (three - 2.5).abs() > 0.125 || (one - 0.83).abs() > 0.0415 {
        return Err(format!("{n} patterns, {three:.4} kB vs {one:.4} kB"));
    }
    Ok(format!("{n} patterns, {three:.4} kB -> {one:.4} kB"))
}

fn skewed_lane() -> Result<String, String> {
    let masks = [0b111u16; 3];
    let fill = CoreConfig::dense().mapper_fill_cycles();
    let run = |bal| time_stream(&masks, &CoreConfig::new(3, TdsVariant::OutOfOrder, bal)).map_err(|e| e.to_string());
    let (plain, bal) = (run(false)?, run(true)?);
    let (p, b) = (plain.cycles - fill, bal.cycles - fill);
    let util = |c: u64| 9.0 / (c as f64 * 9.0);
    if (p, b) != (3, 1) {
        return Err(format!("{p} cycles unbalanced, {b} balanced"));
    }
    Ok(format!("{p} -> {b} cycles, utilization {:.0}% -> {:.0}%", util(p) * 100.0, util(b) * 100.0))
}

fn out_of_order_instance() -> Result<String, String> {
    let sel = tds_select_out_of_order(&[0b011, 0b011, 0b010], &CoreConfig::new(3, TdsVariant::OutOfOrder, false), false);
    match sel.len() {
        2 => Ok("[011, 011, 010] in 2 iterations".into()),
        n => Err(format!("{n} iterations")),
    }
}

fn dense_degeneration() -> Result<String, String> {
    let l = LayerSpec::regular(10, 10, 4, 6, 3, 1);
    let cfg = AccelConfig::canonical(1, TdsVariant::InOrder, false, false);
    let dense = LayerTensors {
        weights: gen_tensor(&l.weight_shape(), Layout::Matrix, 1.0, 1, 0),
        acts: gen_tensor(&l.input_shape().0, Layout::Volume, 1.0, 1, 1),
    };
    let r = simulate_layer(&l, &dense, &cfg, &SimOptions::default()).map_err(|e| e.to_string())?;
    if r.stats.cycles != r.stats.dense_cycles {
        return Err(format!("{} cycles vs {} dense", r.stats.cycles, r.stats.dense_cycles));
    }
    let a = dense_cycle_model(&l.clone().with_densities(0.2, 0.3), &cfg, 1.0);
    let b = dense_cycle_model(&l.with_densities(0.9, 1.0), &cfg, 1.0);
    if a != b {
        return Err(format!("baseline depends on density: {a} vs {b}"));
    }
    Ok(format!("speedup {:.2}", r.stats.speedup()))
}

fn metadata_formula() -> Result<String, String> {
    let mut mask = BitMask::zeros(100);
    (0..70).for_each(|i| mask.set(i, true));
    let t = SparseTensor::from_parts(vec![10, 10], Layout::Matrix, mask, vec![1i8; 70]).map_err(|e| e.to_string())?;
    let a = t.metadata_access_bits(8, 16).map_err(|e| e.to_string())?;
    if (a.mask_bits, a.csc_bits) != (100, 736) {
        return Err(format!("{} mask bits, {} csc bits", a.mask_bits, a.csc_bits));
    }
    Ok(format!("ratio {:.2}", a.ratio))
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        check("oracle_equivalence", oracle_equivalence(25)),
        check("mapper_table", mapper_table()),
        check("skewed_lane_balancing", skewed_lane()),
        check("out_of_order_instance", out_of_order_instance()),
        check("dense_degeneration", dense_degeneration()),
        check("metadata_formula", metadata_formula()),
    ]
}

#[cfg(test)]
mod tests {
    #[test]
    fn all_checks_pass() {
        for c in super::run_selftest() {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }
}
