use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::device::{AnalyticUpdateParams, ConductanceRange, DeviceModel, VoltageResponseParams};

fn range() -> ConductanceRange {
    ConductanceRange::new(1e-9, 1e-8).unwrap()
}

/// Binary-friendly range: midpoint and half span are powers of two.
fn dyadic_range() -> ConductanceRange {
    let u = 2f64.powi(-30);
    ConductanceRange::new(u, 3.0 * u).unwrap()
}

fn ideal_core(rows: usize, cols: usize, step: f64) -> CrossbarCore {
    CrossbarCore::new(
        rows,
        cols,
        DeviceModel::ideal(range(), step),
        CodingConfig::EIGHT_BIT,
    )
    .unwrap()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_weights(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-1.0..=1.0)).collect()
}

fn random_codes(r: &mut ChaCha8Rng, n: usize, bits: u32) -> DigitalVector {
    let m = max_code(bits);
    DigitalVector::new(bits, (0..n).map(|_| r.random_range(-m..=m)).collect()).unwrap()
}

/// Float oracle: Σ x·w scaled to ADC codes, then rounded and saturated.
fn oracle_codes(core: &CrossbarCore, sums: &[f64], lsb: f64) -> Vec<i64> {
    let m = i64::from(core.coding().max_adc());
    sums.iter()
        .map(|&s| ((s * core.unit_charge() / lsb).round() as i64).clamp(-m, m))
        .collect()
}

#[test]
fn encode_endpoints_and_errors() {
    let core = ideal_core(1, 1, 1e-10);
    let (g, r) = core.encode_weight(0.0).unwrap();
    assert_eq!(g, range().mid());
    assert_eq!(r, range().mid());
    assert_eq!(core.encode_weight(1.0).unwrap().0, range().g_max);
    assert_eq!(core.encode_weight(-1.0).unwrap().0, range().g_min);
    assert!(core.encode_weight(1.01).is_err());
    assert!(core.encode_weight(f64::NAN).is_err());
}

#[test]
fn encode_decode_round_trip_exact() {
    let core = CrossbarCore::new(
        1,
        1,
        DeviceModel::ideal(dyadic_range(), 2f64.powi(-40)),
        CodingConfig::EIGHT_BIT,
    )
    .unwrap();
    let mut worst = 0.0f64;
    for k in -1024..=1024 {
        let w = f64::from(k) / 1024.0;
        let (g, r) = core.encode_weight(w).unwrap();
        worst = worst.max((core.decode_weight(g, r) - w).abs());
    }
    assert_eq!(worst, 0.0);

    // arbitrary range: bounded by a couple of ulps of the conductance
    let core = ideal_core(1, 1, 1e-10);
    let mut r = rng(1);
    for _ in 0..10_000 {
        let w: f64 = r.random_range(-1.0..=1.0);
        let (g, gr) = core.encode_weight(w).unwrap();
        assert!((core.decode_weight(g, gr) - w).abs() < 1e-14);
    }
}

#[test]
fn zero_input_reads_zero() {
    let mut core = ideal_core(5, 3, 1e-10);
    let mut r = rng(2);
    core.set_weights(&random_weights(&mut r, 15)).unwrap();
    let z = core.vmm(&DigitalVector::zeros(8, 5), &mut r).unwrap();
    assert!(z.values().iter().all(|&v| v == 0));
    let z = core.mvm(&DigitalVector::zeros(8, 3), &mut r).unwrap();
    assert!(z.values().iter().all(|&v| v == 0));
}

#[test]
fn length_and_width_mismatch_is_domain_error() {
    let mut core = ideal_core(4, 3, 1e-10);
    let mut r = rng(3);
    assert!(core.vmm(&DigitalVector::zeros(8, 3), &mut r).is_err());
    assert!(core.mvm(&DigitalVector::zeros(8, 4), &mut r).is_err());
    assert!(core.vmm(&DigitalVector::zeros(4, 4), &mut r).is_err());
    let x = DigitalVector::zeros(8, 4);
    assert!(core
        .outer_update(&x, &DigitalVector::zeros(8, 3), &mut r)
        .is_err());
    assert!(core
        .outer_update(&x, &DigitalVector::zeros(4, 2), &mut r)
        .is_err());
}

#[test]
fn vmm_and_mvm_match_float_oracle_up_to_16x16() {
    let mut r = rng(4);
    for case in 0..1000 {
        let rows = r.random_range(1..=16);
        let cols = r.random_range(1..=16);
        // saturation disabled: full scale covers the worst case
        let mut core = ideal_core(rows, cols, 1e-10).with_adc_saturation_fraction(1.0);
        let w = random_weights(&mut r, rows * cols);
        core.set_weights(&w).unwrap();
        let x = random_codes(&mut r, rows, 8);
        let y = random_codes(&mut r, cols, 8);

        let fwd: Vec<f64> = (0..cols)
            .map(|j| {
                (0..rows)
                    .map(|i| f64::from(x.values()[i]) * w[i * cols + j])
                    .sum()
            })
            .collect();
        let back: Vec<f64> = (0..rows)
            .map(|i| {
                (0..cols)
                    .map(|j| f64::from(y.values()[j]) * w[i * cols + j])
                    .sum()
            })
            .collect();

        let got = core.vmm(&x, &mut r).unwrap();
        for (g, o) in got
            .values()
            .iter()
            .zip(oracle_codes(&core, &fwd, core.vmm_lsb()))
        {
            assert!(
                (i64::from(*g) - o).abs() <= 1,
                "case {case}: vmm {g} vs {o}"
            );
        }
        let got = core.mvm(&y, &mut r).unwrap();
        for (g, o) in got
            .values()
            .iter()
            .zip(oracle_codes(&core, &back, core.mvm_lsb()))
        {
            assert!(
                (i64::from(*g) - o).abs() <= 1,
                "case {case}: mvm {g} vs {o}"
            );
        }
    }
}

#[test]
fn single_row_read_returns_stored_row() {
    let mut core = ideal_core(6, 5, 1e-10).with_adc_saturation_fraction(1.0);
    let mut r = rng(5);
    let w = random_weights(&mut r, 30);
    core.set_weights(&w).unwrap();
    let mut v = vec![0; 6];
    v[2] = 1;
    let x = DigitalVector::new(8, v).unwrap();
    let got = core.vmm(&x, &mut r).unwrap();
    let row: Vec<f64> = (0..5).map(|j| core.weight(2, j)).collect();
    let expect = oracle_codes(&core, &row, core.vmm_lsb());
    for (g, e) in got.values().iter().zip(expect) {
        assert!((i64::from(*g) - e).abs() <= 1);
    }
}

#[test]
fn symmetric_core_mvm_equals_vmm() {
    let mut r = rng(6);
    for _ in 0..200 {
        let n = r.random_range(1..=12);
        let mut core = ideal_core(n, n, 1e-10);
        let mut w = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = r.random_range(-1.0..=1.0);
                w[i * n + j] = v;
                w[j * n + i] = v;
            }
        }
        core.set_weights(&w).unwrap();
        let x = random_codes(&mut r, n, 8);
        assert_eq!(core.vmm(&x, &mut r).unwrap(), core.mvm(&x, &mut r).unwrap());
    }
}

#[test]
fn adc_saturates_without_wraparound() {
    let mut core = ideal_core(16, 1, 1e-10);
    core.set_weights(&[1.0; 16]).unwrap();
    let x = DigitalVector::new(8, vec![127; 16]).unwrap();
    let y = core.vmm(&x, &mut rng(7)).unwrap();
    assert_eq!(y.values(), &[127]);
    let x = DigitalVector::new(8, vec![-127; 16]).unwrap();
    assert_eq!(core.vmm(&x, &mut rng(7)).unwrap().values(), &[-127]);
}

#[test]
fn update_with_zero_input_changes_nothing() {
    let mut core = ideal_core(3, 4, 1e-10);
    let mut r = rng(8);
    core.set_weights(&random_weights(&mut r, 12)).unwrap();
    let before = core.clone();
    let s = random_codes(&mut r, 4, 4);
    core.outer_update(&DigitalVector::zeros(8, 3), &s, &mut r)
        .unwrap();
    assert_eq!(core, before);
    let x = random_codes(&mut r, 3, 8);
    core.outer_update(&x, &DigitalVector::zeros(4, 4), &mut r)
        .unwrap();
    assert_eq!(core, before);
}

#[test]
fn four_phases_partition_the_devices() {
    let mut core = ideal_core(2, 2, 1e-10);
    let x = DigitalVector::new(8, vec![3, -2]).unwrap();
    let s = DigitalVector::new(4, vec![5, -1]).unwrap();
    let stats = core.outer_update(&x, &s, &mut rng(9)).unwrap();
    assert_eq!(stats.writes_per_phase, [1, 1, 1, 1]);
    assert_eq!(stats.pulses, 3 + 3 + 2 + 2);
    assert_eq!(stats.disturbed, 0);
    // ++ and −− potentiate, mixed phases depress
    assert!(core.weight(0, 0) > 0.0);
    assert!(core.weight(0, 1) < 0.0);
    assert!(core.weight(1, 0) < 0.0);
    assert!(core.weight(1, 1) > 0.0);
    assert_eq!(core.reference_conductances(), &[range().mid(); 4]);
}

#[test]
fn ideal_update_matches_outer_product_over_all_codes() {
    // Every (x, s) code pair on a single device: the realized ΔW equals the
    // code product times one voltage-level quantum.
    let step = 1e-13;
    let base = ideal_core(1, 1, step);
    let quantum = step / 7.0 / (0.5 * range().span());
    let mut r = rng(10);
    let mut worst = 0.0f64;
    for xc in -127..=127 {
        for sc in -7..=7 {
            let mut core = base.clone();
            let x = DigitalVector::new(8, vec![xc]).unwrap();
            let s = DigitalVector::new(4, vec![sc]).unwrap();
            core.outer_update(&x, &s, &mut r).unwrap();
            let expect = f64::from(xc * sc) * quantum;
            worst = worst.max((core.weight(0, 0) - expect).abs());
        }
    }
    assert!(worst < 1e-9 * quantum * 127.0 * 7.0, "{worst}");

    // Coding error against a float outer product. The error is bilinear
    // inside each rounding cell, so its supremum sits on a cell corner.
    let bound = {
        let mut b = 0.0f64;
        for m in 0..=127 {
            for n in 0..=7 {
                let q = f64::from(m * n) / (127.0 * 7.0);
                for dx in [-0.5, 0.5] {
                    for ds in [-0.5, 0.5] {
                        let x = ((f64::from(m) + dx) / 127.0).clamp(0.0, 1.0);
                        let s = ((f64::from(n) + ds) / 7.0).clamp(0.0, 1.0);
                        b = b.max((q - x * s).abs());
                    }
                }
            }
        }
        b
    };
    let full = 127.0 * 7.0 * quantum;
    for _ in 0..2000 {
        let xf: f64 = r.random_range(-1.0..=1.0);
        let sf: f64 = r.random_range(-1.0..=1.0);
        let mut core = base.clone();
        let x = DigitalVector::quantize(&[xf], 1.0, 8);
        let s = DigitalVector::quantize(&[sf], 1.0, 4);
        core.outer_update(&x, &s, &mut r).unwrap();
        let err = (core.weight(0, 0) / full - xf * sf).abs();
        assert!(err <= bound + 1e-12, "{err} > {bound}");
    }
}

#[test]
fn voltage_levels_are_linear_in_response() {
    let vr = VoltageResponseParams::default();
    let core = CrossbarCore::new(
        1,
        1,
        DeviceModel::ideal(range(), 1e-10).with_voltage_response(vr),
        CodingConfig::EIGHT_BIT,
    )
    .unwrap();
    for pol in [crate::Polarity::Set, crate::Polarity::Reset] {
        let levels = core.level_scales(pol);
        assert_eq!(levels.len(), 8);
        for (k, l) in levels.iter().enumerate() {
            assert!((l - k as f64 / 7.0).abs() < 1e-12);
        }
        let volts = core.level_voltages(pol);
        assert!((volts[7].abs() - 1.8).abs() < 1e-12);
        // V/3 sits in the dead zone for these parameters
        assert_eq!(core.half_select_scale(pol), 0.0);
    }
}

#[test]
fn half_selected_devices_untouched_in_dead_zone() {
    let params = AnalyticUpdateParams {
        a_p: 2e-10,
        a_n: 2e-10,
        beta_p: 2.0,
        beta_n: 2.0,
        sigma_rel: 0.3,
        range: range(),
    };
    let device =
        DeviceModel::analytic(params).with_voltage_response(VoltageResponseParams::default());
    let mut core = CrossbarCore::new(6, 5, device, CodingConfig::EIGHT_BIT).unwrap();
    let mut r = rng(11);
    core.set_weights(&random_weights(&mut r, 30)).unwrap();
    for _ in 0..50 {
        let before = core.conductances().to_vec();
        let x = DigitalVector::new(8, vec![0, 9, 0, -4, 0, 0]).unwrap();
        let s = DigitalVector::new(4, vec![3, 0, -2, 0, 0]).unwrap();
        let stats = core.outer_update(&x, &s, &mut r).unwrap();
        assert_eq!(stats.disturbed, 0);
        for i in 0..6 {
            for j in 0..5 {
                let selected = x.values()[i] != 0 && s.values()[j] != 0;
                if !selected {
                    assert_eq!(core.conductance(i, j), before[i * 5 + j]);
                }
            }
        }
    }
}

#[test]
fn half_select_disturbs_outside_dead_zone() {
    let vr = VoltageResponseParams {
        v_min_p: 0.3,
        v_min_n: -0.3,
        ..VoltageResponseParams::default()
    };
    let device = DeviceModel::ideal(range(), 1e-12).with_voltage_response(vr);
    let mut core = CrossbarCore::new(2, 2, device, CodingConfig::EIGHT_BIT).unwrap();
    assert!(core.half_select_scale(crate::Polarity::Set) > 0.0);
    let x = DigitalVector::new(8, vec![10, 0]).unwrap();
    let s = DigitalVector::new(4, vec![7, 0]).unwrap();
    let stats = core.outer_update(&x, &s, &mut rng(12)).unwrap();
    assert_eq!(stats.writes_per_phase, [1, 0, 0, 0]);
    assert_eq!(stats.disturbed, 3);
    assert!(core.weight(0, 1) > 0.0);
    assert!(core.weight(1, 0) > 0.0);
    // both lines off: opposite polarity at V/3
    assert!(core.weight(1, 1) < 0.0);
}

#[test]
fn serial_write_ideal_pulse_count() {
    let half = 0.5 * range().span();
    let step = half / 20.0;
    let mut core = ideal_core(1, 1, step);
    let report = core
        .serial_write(0, 0, 0.5, 1000, 1e-6, &mut rng(13))
        .unwrap();
    let expect = (0.5 * half / step).ceil() as u32;
    assert!(report.converged);
    assert_eq!(report.pulses, expect);
    assert!(report.residual.abs() <= 1e-6);

    // step that does not divide the distance: last pulse at a reduced level
    let step = 0.07 * half;
    let mut core = ideal_core(1, 1, step);
    let report = core
        .serial_write(0, 0, 0.5, 1000, 0.07 / 14.0, &mut rng(13))
        .unwrap();
    assert!(report.converged);
    assert_eq!(report.pulses, (0.5 * half / step).ceil() as u32);

    let again = core
        .serial_write(0, 0, core.weight(0, 0), 1000, 0.0, &mut rng(13))
        .unwrap();
    assert_eq!(again.pulses, 0);
}

#[test]
fn serial_write_reports_unreachable_target() {
    let mut core = ideal_core(1, 1, 1e-12);
    let report = core
        .serial_write(0, 0, 0.9, 10, 1e-3, &mut rng(14))
        .unwrap();
    assert!(!report.converged);
    assert_eq!(report.pulses, 10);
    assert!(report.residual > 0.8);
    assert!(core.serial_write(1, 0, 0.0, 1, 0.1, &mut rng(14)).is_err());
}

#[test]
fn serial_write_nonideal_converges_over_seeds() {
    let params = AnalyticUpdateParams {
        a_p: 1e-10,
        a_n: 1e-10,
        beta_p: 3.0,
        beta_n: 3.0,
        sigma_rel: 0.5,
        range: range(),
    };
    let device =
        DeviceModel::analytic(params).with_voltage_response(VoltageResponseParams::default());
    let mut ok = 0;
    for seed in 0..100 {
        let mut r = rng(1000 + seed);
        let mut core = CrossbarCore::new(1, 1, device.clone(), CodingConfig::EIGHT_BIT).unwrap();
        let target = r.random_range(-0.9..=0.9);
        let report = core.serial_write(0, 0, target, 2000, 0.01, &mut r).unwrap();
        if report.converged && (core.weight(0, 0) - target).abs() <= 0.01 {
            ok += 1;
        }
    }
    assert!(ok >= 99, "{ok}/100");
}

#[test]
fn calibration_cancels_column_offsets() {
    let mut core = ideal_core(8, 8, 1e-13);
    let mut r = rng(15);
    core.set_weights(&random_weights(&mut r, 64)).unwrap();
    let lsb = core.vmm_lsb();

    // no offsets: nothing to do
    let mut clean = core.clone();
    let report = clean.calibrate_offset_row(&mut r).unwrap();
    assert_eq!(report.pulses, 0);
    assert_eq!(clean.offset_row(), &[range().mid(); 8]);

    // one constant offset
    core.set_column_offsets(&[7.3 * lsb; 8]).unwrap();
    core.calibrate_offset_row(&mut r).unwrap();
    let z = core.vmm(&DigitalVector::zeros(8, 8), &mut r).unwrap();
    assert!(z.values().iter().all(|&v| v == 0));

    // random per-column offsets
    let offsets: Vec<f64> = (0..8).map(|_| r.random_range(-20.0..20.0) * lsb).collect();
    core.set_column_offsets(&offsets).unwrap();
    let report = core.calibrate_offset_row(&mut r).unwrap();
    assert!(report.residual_lsb.iter().all(|q| q.abs() <= 1.0));
    let z = core.vmm(&DigitalVector::zeros(8, 8), &mut r).unwrap();
    assert!(z.values().iter().all(|&v| v == 0));
}

#[test]
fn snapshot_round_trip_is_exact() {
    let mut core = ideal_core(4, 3, 1e-10);
    let mut r = rng(16);
    core.set_weights(&random_weights(&mut r, 12)).unwrap();
    core.set_column_offsets(&[1e-15, -2e-15, 3.3e-16]).unwrap();
    let back = CrossbarCore::from_json(&core.to_json().unwrap()).unwrap();
    assert_eq!(back, core);

    let mut broken: serde_json::Value = serde_json::from_str(&core.to_json().unwrap()).unwrap();
    broken["g_pos"][0] = serde_json::json!(1.0);
    assert!(CrossbarCore::from_json(&broken.to_string()).is_err());
}

#[test]
fn same_seed_same_result() {
    let params = AnalyticUpdateParams {
        a_p: 1e-10,
        a_n: 1e-10,
        beta_p: 2.0,
        beta_n: 2.0,
        sigma_rel: 0.4,
        range: range(),
    };
    let device = DeviceModel::analytic(params).with_read_noise(0.05);
    let run = |seed| {
        let mut r = rng(seed);
        let mut core = CrossbarCore::new(5, 4, device.clone(), CodingConfig::EIGHT_BIT).unwrap();
        let x = random_codes(&mut r, 5, 8);
        let s = random_codes(&mut r, 4, 4);
        core.outer_update(&x, &s, &mut r).unwrap();
        let y = core.vmm(&x, &mut r).unwrap();
        (core, y)
    };
    assert_eq!(run(17), run(17));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn conductances_stay_in_range(seed in any::<u64>(), steps in 1usize..20) {
        let params = AnalyticUpdateParams {
            a_p: 8e-10,
            a_n: 6e-10,
            beta_p: 1.0,
            beta_n: 2.0,
            sigma_rel: 1.0,
            range: range(),
        };
        let device = DeviceModel::analytic(params).with_voltage_response(VoltageResponseParams {
            v_min_p: 0.4,
            v_min_n: -0.4,
            ..VoltageResponseParams::default()
        });
        let mut r = rng(seed);
        let mut core = CrossbarCore::new(4, 4, device, CodingConfig::EIGHT_BIT).unwrap();
        for _ in 0..steps {
            let x = random_codes(&mut r, 4, 8);
            let s = random_codes(&mut r, 4, 4);
            core.outer_update(&x, &s, &mut r).unwrap();
            let i = r.random_range(0..4);
            let j = r.random_range(0..4);
            core.serial_write(i, j, r.random_range(-1.0..=1.0), 20, 0.05, &mut r).unwrap();
        }
        let rg = range();
        prop_assert!(core.conductances().iter().all(|&g| rg.contains(g)));
        prop_assert!(core.offset_row().iter().all(|&g| rg.contains(g)));
    }
}
