use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

/// Noisy class prototypes: `n` samples of `features` pixels, 4 classes.
fn toy_split(n: usize, features: usize, seed: u64) -> Dataset {
    let mut proto_rng = ChaCha8Rng::seed_from_u64(99);
    let protos: Vec<Vec<f32>> = (0..4)
        .map(|_| (0..features).map(|_| proto_rng.random::<f32>()).collect())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * features);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let c = rng.random_range(0..4u8);
        for &p in &protos[usize::from(c)] {
            pixels.push((p + 0.3 * (rng.random::<f32>() - 0.5)).clamp(0.0, 1.0));
        }
        labels.push(c);
    }
    Dataset::new(features, 4, pixels, labels).unwrap()
}

fn toy() -> Mnist {
    Mnist {
        train: toy_split(400, 16, 1),
        test: toy_split(200, 16, 2),
    }
}

fn toy_cfg(epochs: usize) -> NetworkConfig {
    NetworkConfig {
        layer_sizes: vec![16, 12, 4],
        learning_rate: 0.5,
        epochs,
        seed: 3,
        ..NetworkConfig::default()
    }
}

fn toy_xbar() -> CrossbarConfig {
    CrossbarConfig {
        weight_scale: vec![2.0, 4.0],
        ..CrossbarConfig::default()
    }
}

fn idx_bytes(magic: u32, dims: &[u32], body: &[u8]) -> Vec<u8> {
    let mut out = magic.to_be_bytes().to_vec();
    for d in dims {
        out.extend(d.to_be_bytes());
    }
    out.extend_from_slice(body);
    out
}

#[test]
fn zero_idx_images_parse() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.idx");
    std::fs::write(&path, idx_bytes(0x803, &[3, 28, 28], &[0u8; 3 * 784])).unwrap();
    let (n, r, c, px) = read_idx_images(&path).unwrap();
    assert_eq!((n, r, c), (3, 28, 28));
    assert!(px.iter().all(|&p| p == 0.0));

    let gz = dir.path().join("z.idx.gz");
    let mut enc = flate2::write::GzEncoder::new(
        std::fs::File::create(&gz).unwrap(),
        flate2::Compression::fast(),
    );
    enc.write_all(&idx_bytes(0x803, &[1, 2, 2], &[0, 255, 51, 0]))
        .unwrap();
    enc.finish().unwrap();
    let (_, _, _, px) = read_idx_images(&gz).unwrap();
    assert_eq!(px, vec![0.0, 1.0, 0.2, 0.0]);
}

#[test]
fn idx_magic_and_truncation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad");
    std::fs::write(&path, idx_bytes(0x801, &[3, 28, 28], &[0u8; 3 * 784])).unwrap();
    assert!(matches!(read_idx_images(&path), Err(Error::Format(_))));
    std::fs::write(&path, idx_bytes(0x803, &[3, 28, 28], &[0u8; 100])).unwrap();
    assert!(matches!(read_idx_images(&path), Err(Error::Format(_))));
    std::fs::write(&path, [0u8, 0, 8]).unwrap();
    assert!(matches!(read_idx_labels(&path), Err(Error::Format(_))));
    std::fs::write(&path, idx_bytes(0x801, &[2], &[7, 1])).unwrap();
    assert_eq!(read_idx_labels(&path).unwrap(), vec![7, 1]);
}

#[test]
fn missing_dataset_names_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_mnist(dir.path()).unwrap_err().to_string();
    assert!(
        err.contains(TRAIN_IMAGES) && err.contains(TRAIN_LABELS),
        "{err}"
    );
}

#[test]
fn backprop_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut net = Network::float(&[4, 3, 2], &mut rng).unwrap();
    for layer in &mut net.layers {
        if let Layer::Float(l) = layer {
            l.w.iter_mut()
                .for_each(|w| *w = rng.random_range(-1.5..1.5));
        }
    }
    let x = [0.3, 0.9, 0.1, 0.6];
    let t = [1.0, 0.0];
    let (_, grads) = net.loss_and_gradients(&x, &t);
    let h = 1e-6;
    for l in 0..net.layers.len() {
        for k in 0..grads[l].len() {
            let probe = |dw: f64| {
                let mut n = net.clone();
                if let Layer::Float(f) = &mut n.layers[l] {
                    f.w[k] += dw;
                }
                n.loss_and_gradients(&x, &t).0
            };
            let fd = (probe(h) - probe(-h)) / (2.0 * h);
            let g = grads[l][k];
            let denom = g.abs().max(fd.abs()).max(1e-8);
            assert!((g - fd).abs() / denom < 1e-4, "layer {l} w{k}: {g} vs {fd}");
        }
    }
}

#[test]
fn zero_epochs_is_chance_level() {
    let out = train_numeric(&toy_cfg(0), &toy()).unwrap();
    assert!(out.history.is_empty());
    assert!((out.summary.final_test_acc - 0.25).abs() < 0.2);
    assert_eq!(out.summary.final_test_acc, out.summary.initial_test_acc);
}

#[test]
fn memorizes_a_single_sample() {
    let data = toy();
    let one = Mnist {
        train: data.train.head(1),
        test: data.train.head(1),
    };
    let out = train_numeric(&toy_cfg(100), &one).unwrap();
    assert_eq!(out.history.last().unwrap().train_acc, 1.0);
    assert_eq!(out.summary.final_test_acc, 1.0);
}

#[test]
fn numeric_training_learns_toy_task() {
    let out = train_numeric(&toy_cfg(10), &toy()).unwrap();
    assert!(out.summary.final_test_acc > 0.95, "{:?}", out.summary);
}

#[test]
fn ideal_crossbar_tracks_numeric() {
    let data = toy();
    let numeric = train_numeric(&toy_cfg(10), &data).unwrap();
    let xbar = train_crossbar(&toy_cfg(10), &toy_xbar(), AblationMode::Numeric, &data).unwrap();
    assert!(
        (numeric.summary.final_test_acc - xbar.summary.final_test_acc).abs() <= 0.03,
        "{:?} vs {:?}",
        numeric.summary,
        xbar.summary
    );
}

#[test]
fn runs_are_bit_reproducible() {
    let data = toy();
    let a = train_crossbar(&toy_cfg(2), &toy_xbar(), AblationMode::Full, &data).unwrap();
    let b = train_crossbar(&toy_cfg(2), &toy_xbar(), AblationMode::Full, &data).unwrap();
    assert_eq!(a.history, b.history);
    for (la, lb) in a.network.layers.iter().zip(&b.network.layers) {
        assert_eq!(la.weights(), lb.weights());
    }
}

#[test]
fn evaluation_does_not_perturb_training() {
    let mut xbar = toy_xbar();
    xbar.device = xbar.device.with_read_noise(0.05);
    let data = toy();
    let with_eval = train_crossbar(&toy_cfg(2), &xbar, AblationMode::Full, &data).unwrap();
    let cfg = NetworkConfig {
        test_subset: Some(0),
        ..toy_cfg(2)
    };
    let without = train_crossbar(&cfg, &xbar, AblationMode::Full, &data).unwrap();
    let train_acc = |o: &TrainOutcome| o.history.iter().map(|r| r.train_acc).collect::<Vec<_>>();
    assert_eq!(train_acc(&with_eval), train_acc(&without));
    for (la, lb) in with_eval.network.layers.iter().zip(&without.network.layers) {
        assert_eq!(la.weights(), lb.weights());
    }
}

#[test]
fn single_device_carry_equals_crossbar() {
    let data = toy();
    let carry = PeriodicCarryConfig {
        devices_per_weight: 1,
        carry_interval: 5,
        carry_threshold: 0.01,
        ..PeriodicCarryConfig::default()
    };
    let a = train_crossbar(&toy_cfg(2), &toy_xbar(), AblationMode::Full, &data).unwrap();
    let b =
        train_periodic_carry(&toy_cfg(2), &toy_xbar(), AblationMode::Full, &carry, &data).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(b.summary.carries, 0);
}

#[test]
fn ideal_carry_is_lossless_and_tracks_numeric() {
    let data = toy();
    let carry = PeriodicCarryConfig {
        carry_interval: 10,
        carry_threshold: 0.05,
        ..PeriodicCarryConfig::default()
    };
    let cfg = toy_cfg(10);
    let numeric = train_numeric(&cfg, &data).unwrap();
    let out =
        train_periodic_carry(&cfg, &toy_xbar(), AblationMode::Numeric, &carry, &data).unwrap();
    assert!(out.summary.carries > 0);
    assert!(
        (numeric.summary.final_test_acc - out.summary.final_test_acc).abs() <= 0.03,
        "{:?} vs {:?}",
        numeric.summary,
        out.summary
    );

    // A carry pass moves value between devices without changing the weight.
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut net = build_network(
        &cfg,
        &Backend::PeriodicCarry {
            xbar: toy_xbar(),
            mode: AblationMode::Numeric,
            carry: PeriodicCarryConfig {
                carry_interval: 1,
                carry_threshold: 0.01,
                ..carry
            },
        },
        &mut rng,
    )
    .unwrap();
    let Layer::Crossbar(layer) = &mut net.layers[0] else {
        panic!()
    };
    let before = layer.weights();
    let x = vec![0.0; 16];
    layer.update(&x, &[0.0; 12], 0.1, &mut rng).unwrap();
    assert!(layer.carried > 0);
    let step = 4.0 * toy_xbar().weight_scale[0] * 8.0 * 0.25 / 1024.0;
    for (a, b) in before.iter().zip(layer.weights()) {
        assert!((a - b).abs() <= step, "{a} vs {b}");
    }
}

#[test]
fn conductances_stay_in_range_through_training() {
    let data = toy();
    let carry = PeriodicCarryConfig {
        carry_interval: 20,
        carry_threshold: 0.1,
        ..PeriodicCarryConfig::default()
    };
    let cfg = NetworkConfig {
        learning_rate: 5.0,
        ..toy_cfg(2)
    };
    let out = train_periodic_carry(&cfg, &toy_xbar(), AblationMode::Full, &carry, &data).unwrap();
    for layer in &out.network.layers {
        let Layer::Crossbar(l) = layer else { panic!() };
        for core in l.cores() {
            let r = core.range();
            assert!(core.conductances().iter().all(|&g| r.contains(g)));
        }
    }
}

#[test]
fn strong_nonlinearity_hurts_and_modes_are_ordered() {
    let data = toy();
    let cfg = toy_cfg(5);
    let acc = |mode| {
        train_crossbar(&cfg, &toy_xbar(), mode, &data)
            .unwrap()
            .summary
            .final_test_acc
    };
    let numeric = acc(AblationMode::Numeric);
    let full = acc(AblationMode::Full);
    assert!(numeric >= full, "{numeric} vs {full}");
}

#[test]
fn mismatched_scales_are_config_errors() {
    let xbar = CrossbarConfig {
        weight_scale: vec![1.0],
        ..toy_xbar()
    };
    let err = train_crossbar(&toy_cfg(1), &xbar, AblationMode::Full, &toy()).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let cfg = NetworkConfig {
        layer_sizes: vec![15, 4],
        ..toy_cfg(1)
    };
    assert!(matches!(train_numeric(&cfg, &toy()), Err(Error::Config(_))));
}

#[test]
fn ablations_alter_the_device_as_described() {
    let dev = analytic_device(5.0, 0.3, 0.004);
    assert!((nominal_step(&dev).unwrap() - 0.004).abs() < 1e-6);
    let no_noise = ablate(&dev, AblationMode::NoNoise, 1e-3).unwrap();
    let lin = ablate(&dev, AblationMode::Linearized, 1e-3).unwrap();
    let num = ablate(&dev, AblationMode::Numeric, 1e-3).unwrap();
    let g = dev.range().g_min + 0.2 * dev.range().span();
    assert_eq!(
        no_noise
            .mean_delta(g, crate::device::Polarity::Set)
            .unwrap(),
        dev.mean_delta(g, crate::device::Polarity::Set).unwrap()
    );
    assert!(lin.is_ideal() && num.is_ideal());
    assert!((nominal_step(&lin).unwrap() - 0.004).abs() < 1e-6);
    assert!((nominal_step(&num).unwrap() - 1e-3).abs() < 1e-12);
}

#[test]
fn history_csv_layout() {
    let mut buf = Vec::new();
    write_history(
        &[EpochRecord {
            epoch: 1,
            train_acc: 0.5,
            test_acc: 0.25,
        }],
        &mut buf,
    )
    .unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,train_acc,test_acc\n1,0.5,0.25\n"
    );
    let mut buf = Vec::new();
    write_history(&[], &mut buf).unwrap();
    assert_eq!(
        String::from_utf8(buf).unwrap(),
        "epoch,train_acc,test_acc\n"
    );
}
