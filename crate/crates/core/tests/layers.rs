use phantom_core::accelerator::{
    simulate_layer, simulate_network, validate_chain, AccelConfig, LayerKind, LayerSpec, LayerTensors,
    NetworkOptions, SimOptions, TensorSource,
};
use phantom_core::oracle::{
    count_valid_macs, count_valid_macs_fc, dense_conv, dense_cycle_model, dense_fc, max_pool, pad, ConvMode,
    DenseTensor,
};
use phantom_core::pipeline::TdsVariant;
use phantom_core::sparse_mask::{Layout, SparseTensor};
use phantom_core::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize], layout: Layout, d: f64) -> SparseTensor {
    let n: usize = shape.iter().product();
    let v: Vec<i8> = (0..n)
        .map(|_| {
            if rng.random_bool(d) {
                let m = rng.random_range(1..=127i8);
                if rng.random() {
                    m
                } else {
                    -m
                }
            } else {
                0
            }
        })
        .collect();
    SparseTensor::encode_dense(&v, shape, layout).unwrap()
}

fn tensors(rng: &mut ChaCha8Rng, l: &LayerSpec, wd: f64, ad: f64) -> LayerTensors {
    let (shape, layout) = l.input_shape();
    LayerTensors {
        weights: random_tensor(rng, &l.weight_shape(), Layout::Matrix, wd),
        acts: random_tensor(rng, &shape, layout, ad),
    }
}

/// Expected activated output and valid-MAC count from the dense oracle.
fn reference(l: &LayerSpec, t: &LayerTensors) -> (Vec<i32>, u64) {
    let w = t.weights.decode().unwrap().into_iter().map(i32::from).collect::<Vec<_>>();
    let a = DenseTensor::from_sparse(&t.acts).unwrap();
    let (out, macs) = if l.kind == LayerKind::Fc {
        let wt = DenseTensor::new(&[l.c_in, l.c_out], w).unwrap();
        (
            DenseTensor::new(&[l.c_out], dense_fc(&a.values, &wt).unwrap()).unwrap(),
            count_valid_macs_fc(&a.values, &wt).unwrap(),
        )
    } else {
        let (fshape, mode) = match l.kind {
            LayerKind::Regular => (vec![l.k, l.k, l.c_in, l.c_out], ConvMode::Regular),
            LayerKind::Depthwise => (vec![l.k, l.k, l.c_in], ConvMode::Depthwise),
            _ => (vec![l.c_in, l.c_out], ConvMode::Pointwise),
        };
        let f = DenseTensor::new(&fshape, w).unwrap();
        let a = pad(&a, l.pad);
        (dense_conv(&a, &f, l.stride, mode).unwrap(), count_valid_macs(&a, &f, l.stride, mode).unwrap())
    };
    let out = if l.no_relu { out } else { out.relu() };
    let out = if l.pool > 1 { max_pool(&out, l.pool) } else { out };
    (out.values, macs)
}

fn random_layer(rng: &mut ChaCha8Rng, i: usize) -> LayerSpec {
    let kind = i % 5;
    let h = rng.random_range(3..=12);
    let w = rng.random_range(3..=12);
    let c_in = rng.random_range(1..=20);
    let c_out = rng.random_range(1..=10);
    match kind {
        0 => LayerSpec::regular(h, w, c_in, c_out, 3, 1),
        1 => LayerSpec::regular(h + 2, w + 2, c_in, c_out, [1, 3, 5][i % 3], 2),
        2 => LayerSpec::depthwise(h, w, c_in, 3, 1 + i % 2).with_pad(i % 2),
        3 => LayerSpec::pointwise(h, w, c_in * 2, c_out),
        _ => LayerSpec::fc(c_in * 3, c_out * 3),
    }
}

fn configs() -> Vec<AccelConfig> {
    vec![
        AccelConfig::canonical(1, TdsVariant::InOrder, false, false),
        AccelConfig::canonical(3, TdsVariant::InOrder, true, false),
        AccelConfig::canonical(6, TdsVariant::OutOfOrder, false, true),
        AccelConfig::canonical(27, TdsVariant::OutOfOrder, true, true),
        AccelConfig { rows: 2, cols: 3, ..AccelConfig::canonical(9, TdsVariant::OutOfOrder, true, true) },
    ]
}

#[test]
fn random_layers_match_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for i in 0..40 {
        let l = random_layer(&mut rng, i);
        let (wd, ad) = (rng.random_range(0.2..1.0), rng.random_range(0.2..1.0));
        let t = tensors(&mut rng, &l, wd, ad);
        let (want, macs) = reference(&l, &t);
        for cfg in configs() {
            let r = simulate_layer(&l, &t, &cfg, &SimOptions::default()).unwrap();
            let got = r.output.unwrap().decode().unwrap();
            assert_eq!(got, want, "layer {i} {l:?} cfg {cfg:?}");
            assert_eq!(r.stats.valid_macs, macs);
            assert!(r.stats.utilization() <= 1.0);
            assert_eq!(r.stats.dense_cycles, dense_cycle_model(&l, &cfg, 1.0), "{l:?}");
            let timing = simulate_layer(&l, &t, &cfg, &SimOptions::timing(1.0)).unwrap();
            assert_eq!(timing.stats, r.stats);
            assert!(timing.output.is_none());
        }
    }
}

#[test]
fn padding_pooling_and_no_relu() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let layers = [
        LayerSpec::regular(8, 8, 3, 5, 3, 1).with_pad(1).with_pool(2),
        LayerSpec::regular(9, 7, 2, 4, 3, 1).with_pool(3).without_relu(),
        LayerSpec::fc(20, 6).without_relu(),
    ];
    for l in &layers {
        let t = tensors(&mut rng, l, 0.6, 0.6);
        let (want, _) = reference(l, &t);
        let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, true, true);
        let out = simulate_layer(l, &t, &cfg, &SimOptions::default()).unwrap().output.unwrap();
        assert_eq!(out.shape(), l.output_shape().0.as_slice());
        assert_eq!(out.decode().unwrap(), want);
    }
}

#[test]
fn depthwise_example_end_to_end() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let l = LayerSpec::depthwise(9, 5, 4, 3, 1);
    let t = tensors(&mut rng, &l, 0.5, 0.5);
    let (want, _) = reference(&l, &t);
    let cfg = AccelConfig::canonical(3, TdsVariant::OutOfOrder, false, false);
    let r = simulate_layer(&l, &t, &cfg, &SimOptions::default()).unwrap();
    assert_eq!(r.output.unwrap().decode().unwrap(), want);
    assert_eq!(r.rounds.len(), 1);
    assert_eq!(r.rounds[0].len(), 28);
}

#[test]
fn dense_layer_has_unit_speedup() {
    let l = LayerSpec::regular(10, 10, 4, 8, 3, 1);
    let t = LayerTensors {
        weights: SparseTensor::encode_dense(&vec![1i8; 36 * 8], &[36, 8], Layout::Matrix).unwrap(),
        acts: SparseTensor::encode_dense(&vec![2i8; 400], &[10, 10, 4], Layout::Volume).unwrap(),
    };
    let r = simulate_layer(&l, &t, &AccelConfig::canonical(1, TdsVariant::InOrder, false, false), &SimOptions::default())
        .unwrap();
    assert_eq!(r.stats.speedup(), 1.0);
    assert_eq!(r.stats.utilization(), r.stats.valid_macs as f64 / r.stats.mac_slots as f64);
}

#[test]
fn dense_baseline_ignores_sparsity_and_scales_with_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, true, true);
    let l = LayerSpec::regular(16, 16, 4, 8, 3, 1);
    let a = simulate_layer(&l, &tensors(&mut rng, &l, 0.9, 0.9), &cfg, &SimOptions::timing(1.0)).unwrap();
    let b = simulate_layer(&l, &tensors(&mut rng, &l, 0.2, 0.3), &cfg, &SimOptions::timing(1.0)).unwrap();
    assert_eq!(a.stats.dense_cycles, b.stats.dense_cycles);
    // 14 -> 30 output columns over the same 14 output rows: the per-core
    // stream grows by 30/14 up to the fixed fill.
    let wide = LayerSpec::regular(16, 32, 4, 8, 3, 1);
    let fill = cfg.core.mapper_fill_cycles();
    let rounds = 2;
    let narrow = dense_cycle_model(&l, &cfg, 1.0) - rounds * fill;
    let wider = dense_cycle_model(&wide, &cfg, 1.0) - rounds * fill;
    assert_eq!(wider * 14, narrow * 30);
}

#[test]
fn subsampling_skips_outputs_and_scales_work() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let l = LayerSpec::regular(12, 12, 8, 16, 3, 1);
    let t = tensors(&mut rng, &l, 0.4, 0.4);
    let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, false, false);
    let r = simulate_layer(&l, &t, &cfg, &SimOptions { filter_fraction: 0.25, functional: true }).unwrap();
    assert!(r.output.is_none());
    assert_eq!(r.assignment.filters.len(), 4);
    assert_eq!(r.rounds.len(), 1);
    assert_eq!(r.stats.dense_cycles, dense_cycle_model(&l, &cfg, 0.25));
}

#[test]
fn balancing_never_changes_outputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..10 {
        let l = random_layer(&mut rng, i);
        let t = tensors(&mut rng, &l, 0.5, 0.5);
        let outs: Vec<_> = [(false, false), (true, false), (false, true), (true, true)]
            .iter()
            .map(|&(intra, inter)| {
                let cfg = AccelConfig::canonical(9, TdsVariant::OutOfOrder, intra, inter);
                simulate_layer(&l, &t, &cfg, &SimOptions::default()).unwrap().output.unwrap()
            })
            .collect();
        assert!(outs.windows(2).all(|w| w[0] == w[1]));
    }
}

/// Density-sorted broadcast on layers whose filters mix very different
/// densities: the total makespan never grows, and the spread between the
/// fastest and slowest column shrinks on aggregate.
#[test]
fn inter_core_balancing_on_density_mixes() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let (mut spread_plain, mut spread_bal) = (0u64, 0u64);
    for _ in 0..50 {
        let l = LayerSpec::regular(9, 9, 4, 16, 3, 1);
        let mut dense = vec![0i8; 36 * 16];
        for f in 0..16 {
            let d = rng.random_range(0.05..1.0);
            for v in &mut dense[f * 36..(f + 1) * 36] {
                if rng.random_bool(d) {
                    *v = rng.random_range(1..=9);
                }
            }
        }
        let t = LayerTensors {
            weights: SparseTensor::encode_dense(&dense, &[36, 16], Layout::Matrix).unwrap(),
            acts: random_tensor(&mut rng, &[9, 9, 4], Layout::Volume, 0.7),
        };
        let run = |inter| {
            let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, false, inter);
            simulate_layer(&l, &t, &cfg, &SimOptions::timing(1.0)).unwrap()
        };
        let (plain, bal) = (run(false), run(true));
        assert!(bal.stats.cycles <= plain.stats.cycles);
        let spread = |r: &phantom_core::accelerator::LayerResult| -> u64 {
            r.rounds
                .iter()
                .map(|round| {
                    let mut per_col = [0u64; 4];
                    for c in round {
                        per_col[c.col] = per_col[c.col].max(c.stats.cycles);
                    }
                    per_col.iter().max().unwrap() - per_col.iter().min().unwrap()
                })
                .sum()
        };
        spread_plain += spread(&plain);
        spread_bal += spread(&bal);
    }
    assert!(spread_bal <= spread_plain, "{spread_bal} > {spread_plain}");
}

struct Random {
    rng: ChaCha8Rng,
}

impl TensorSource for Random {
    fn weights(&mut self, _: usize, l: &LayerSpec) -> phantom_core::Result<SparseTensor> {
        Ok(random_tensor(&mut self.rng, &l.weight_shape(), Layout::Matrix, l.weight_density))
    }
    fn activations(&mut self, _: usize, l: &LayerSpec) -> phantom_core::Result<SparseTensor> {
        let (s, layout) = l.input_shape();
        Ok(random_tensor(&mut self.rng, &s, layout, l.activation_density))
    }
}

fn small_net() -> Vec<LayerSpec> {
    vec![
        LayerSpec::regular(12, 12, 3, 9, 3, 1).with_pad(1).with_densities(0.5, 1.0),
        LayerSpec::depthwise(12, 12, 9, 3, 2).with_pad(1).with_densities(0.6, 0.5),
        LayerSpec::pointwise(6, 6, 9, 18).with_pool(2).with_densities(0.4, 0.5),
        LayerSpec::fc(162, 10).without_relu().with_densities(0.3, 0.5),
    ]
}

#[test]
fn chained_network_runs_every_dataflow() {
    let layers = small_net();
    validate_chain(&layers).unwrap();
    let cfg = AccelConfig::canonical(6, TdsVariant::OutOfOrder, true, true);
    let opts = NetworkOptions { chain: true, sim: SimOptions::default() };
    let report = simulate_network(&layers, &mut Random { rng: ChaCha8Rng::seed_from_u64(3) }, &cfg, &opts).unwrap();
    assert_eq!(report.layers.len(), 4);
    assert!(report.layers.iter().all(|(_, s)| s.cycles > 0 && s.utilization() <= 1.0));
    let again = simulate_network(&layers, &mut Random { rng: ChaCha8Rng::seed_from_u64(3) }, &cfg, &opts).unwrap();
    assert_eq!(report, again);
}

#[test]
fn single_layer_network_equals_layer() {
    let l = LayerSpec::regular(8, 8, 2, 4, 3, 1).with_densities(0.5, 0.5);
    let cfg = AccelConfig::canonical(3, TdsVariant::InOrder, false, false);
    let mut src = Random { rng: ChaCha8Rng::seed_from_u64(8) };
    let report = simulate_network(std::slice::from_ref(&l), &mut src, &cfg, &NetworkOptions::default()).unwrap();
    let mut src = Random { rng: ChaCha8Rng::seed_from_u64(8) };
    let t = LayerTensors { weights: src.weights(0, &l).unwrap(), acts: src.activations(0, &l).unwrap() };
    assert_eq!(report.layers[0].1, simulate_layer(&l, &t, &cfg, &SimOptions::default()).unwrap().stats);
}

#[test]
fn broken_chain_is_a_model_error() {
    let mut layers = small_net();
    layers[2].c_in = 10;
    assert!(matches!(validate_chain(&layers), Err(Error::Model(_))));
    assert!(matches!(validate_chain(&[]), Err(Error::Model(_))));
}

#[test]
fn shape_mismatch_is_rejected() {
    let l = LayerSpec::regular(8, 8, 2, 4, 3, 1);
    let t = LayerTensors {
        weights: SparseTensor::zeros(&[18, 3], Layout::Matrix).unwrap(),
        acts: SparseTensor::zeros(&[8, 8, 2], Layout::Volume).unwrap(),
    };
    let cfg = AccelConfig::canonical(3, TdsVariant::InOrder, false, false);
    assert!(matches!(simulate_layer(&l, &t, &cfg, &SimOptions::default()), Err(Error::Shape(_))));
}
