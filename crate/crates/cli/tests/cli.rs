use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rramsim_core::charlab::{synthesize_trace, PulseProgram};
use rramsim_core::train::analytic_device;
use serde_json::Value;

fn rramsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rramsim"))
        .args(args)
        .env_remove("RRAMSIM_MNIST_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = rramsim(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Ten classes of 28×28 images, each a bright horizontal band at a
/// class-dependent height plus uniform noise.
fn write_idx(dir: &Path, prefix: &str, n: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = vec![0, 0, 8, 3];
    for d in [n as u32, 28, 28] {
        images.extend(d.to_be_bytes());
    }
    let mut labels = vec![0, 0, 8, 1];
    labels.extend((n as u32).to_be_bytes());
    for _ in 0..n {
        let c: u8 = rng.random_range(0..10);
        for r in 0..28 {
            for _ in 0..28 {
                let band = r / 3 == usize::from(c) % 10;
                let base = if band { 200 } else { 0 };
                images.push(base + rng.random_range(0..50u8));
            }
        }
        labels.push(c);
    }
    fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), images).unwrap();
    fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), labels).unwrap();
}

fn tiny_mnist(dir: &Path) {
    write_idx(dir, "train", 60, 1);
    write_idx(dir, "t10k", 40, 2);
}

#[test]
fn perf_all_writes_matrix_and_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("perf");
    ok(&["perf", "--all", "--format", "json", "--out", p(&dir)]);
    let reports = fs::read_dir(&dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name() != "ratios.json")
        .count();
    assert_eq!(reports, 9);
    let ratios = json(&dir.join("ratios.json"));
    let r8 = ratios
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["bits"] == 8)
        .unwrap();
    let e_d = r8["energy_vs_digital_reram"].as_f64().unwrap();
    let e_s = r8["energy_vs_sram"].as_f64().unwrap();
    assert!((200.0..=340.0).contains(&e_d), "{e_d}");
    assert!((320.0..=540.0).contains(&e_s), "{e_s}");
}

#[test]
fn perf_single_report_latency_total() {
    let out = ok(&["perf", "--arch", "analog-reram", "--bits", "8"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("variant,bits,table,component,kernel,value,unit\n"));
    let total = text
        .lines()
        .find(|l| l.starts_with("analog,8,latency,Analog ReRAM Total,total,"))
        .unwrap();
    let ns: f64 = total.split(',').nth(5).unwrap().parse().unwrap();
    assert!((ns / 1000.0 - 1.280).abs() < 5e-4, "{total}");
}

#[test]
fn empty_config_equals_defaults_and_output_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("empty.json");
    fs::write(&cfg, "").unwrap();
    for bits in ["8", "4", "2"] {
        let plain = ok(&["perf", "--bits", bits, "--format", "json"]).stdout;
        let again = ok(&["perf", "--bits", bits, "--format", "json"]).stdout;
        let with_cfg = ok(&[
            "perf",
            "--bits",
            bits,
            "--format",
            "json",
            "--config",
            p(&cfg),
        ])
        .stdout;
        assert_eq!(plain, again);
        assert_eq!(plain, with_cfg);
    }
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["perf", "--arch", "tpu"][..],
        &["perf", "--bits", "3"],
        &["char", "--trace", "t.csv", "--bins", "1", "--out", "x.json"],
        &["frobnicate"],
    ] {
        assert_eq!(rramsim(args).status.code(), Some(1), "{args:?}");
    }
}

#[test]
fn bad_inputs_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.json");
    fs::write(&cfg, "{\"n_rows\": ").unwrap();
    assert_eq!(
        rramsim(&["perf", "--config", p(&cfg)]).status.code(),
        Some(2)
    );

    let trace = tmp.path().join("t.csv");
    fs::write(
        &trace,
        "cycle,pulse,polarity,voltage_V,width_ns,conductance_S\n0,0,SET,1,1000,2e-9\n0,1,SET,1,1000,abc\n",
    )
    .unwrap();
    let out = rramsim(&[
        "char",
        "--trace",
        p(&trace),
        "--out",
        p(&tmp.path().join("o.json")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn missing_dataset_names_files() {
    let tmp = tempfile::tempdir().unwrap();
    let out = rramsim(&["train", "--mnist", p(tmp.path()), "--out", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train-images-idx3-ubyte"), "{err}");
    assert!(err.contains("fetch_mnist.sh"), "{err}");
}

#[test]
fn zero_epochs_gives_header_only_history() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_mnist(tmp.path());
    let out = tmp.path().join("run");
    ok(&[
        "train",
        "-q",
        "--mnist",
        p(tmp.path()),
        "--epochs",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        fs::read_to_string(out.join("history.csv")).unwrap(),
        "epoch,train_acc,test_acc\n"
    );
    let s = json(&out.join("summary.json"));
    let acc = s["final_test_acc"].as_f64().unwrap();
    assert!(acc < 0.35, "{acc}");
    assert_eq!(s["epochs"], 0);
}

#[test]
fn train_runs_are_reproducible_and_env_selects_dataset() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_mnist(tmp.path());
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_rramsim"))
            .args([
                "train",
                "-q",
                "--backend",
                "crossbar",
                "--epochs",
                "2",
                "--seed",
                "5",
            ])
            .args(["--out", p(&out)])
            .env("RRAMSIM_MNIST_DIR", tmp.path())
            .status()
            .unwrap();
        assert!(status.success());
        (
            fs::read(out.join("history.csv")).unwrap(),
            fs::read(out.join("summary.json")).unwrap(),
        )
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn nonideal_crossbar_trails_numeric() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_mnist(tmp.path());
    let data = p(tmp.path());
    let acc = |backend: &str, name: &str| {
        let out = tmp.path().join(name);
        ok(&[
            "train",
            "-q",
            "--mnist",
            data,
            "--backend",
            backend,
            "--epochs",
            "8",
            "--lr",
            "0.5",
            "--out",
            p(&out),
        ]);
        json(&out.join("summary.json"))["final_test_acc"]
            .as_f64()
            .unwrap()
    };
    let numeric = acc("numeric", "n");
    let crossbar = acc("crossbar", "x");
    assert!(numeric > 0.9, "{numeric}");
    assert!(numeric - crossbar > 0.0, "{numeric} vs {crossbar}");
}

#[test]
fn characterized_table_drives_training() {
    let tmp = tempfile::tempdir().unwrap();
    let device = analytic_device(3.0, 0.2, 0.01);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let program = PulseProgram {
        cycles: 4,
        pulses_per_polarity: 300,
        ..PulseProgram::default()
    };
    let trace = synthesize_trace(&device, &program, device.range().g_min, &mut rng).unwrap();
    let trace_path = tmp.path().join("dev1.csv.gz");
    trace.write(&trace_path).unwrap();
    let table = tmp.path().join("dev1.json");
    ok(&[
        "char",
        "--trace",
        p(&trace_path),
        "--bins",
        "16",
        "--out",
        p(&table),
    ]);
    let t = json(&table);
    assert_eq!(t["bin_edges"].as_array().unwrap().len(), 17);

    tiny_mnist(tmp.path());
    let out = tmp.path().join("run");
    ok(&[
        "train",
        "-q",
        "--mnist",
        p(tmp.path()),
        "--backend",
        "crossbar",
        "--device",
        p(&table),
        "--epochs",
        "1",
        "--out",
        p(&out),
    ]);
    assert_eq!(json(&out.join("summary.json"))["backend"], "crossbar");
}

#[test]
fn voltage_fit_recovers_generator() {
    let (d1, d2, vp, vn) = (2.5, 1.7, 0.9, -1.2);
    let mut csv = String::from("voltage,mean_dg\n");
    for k in -30..=30 {
        let v = f64::from(k) / 10.0;
        let dg = if v > vp {
            (d1 * (v - vp)).exp_m1()
        } else if v < vn {
            (d2 * (vn - v)).exp_m1()
        } else {
            0.0
        };
        csv.push_str(&format!("{v},{dg}\n"));
    }
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("resp.csv");
    fs::write(&input, csv).unwrap();
    let out = tmp.path().join("fit.json");
    ok(&["char", "--fit-voltage", p(&input), "--out", p(&out)]);
    let fit = json(&out);
    for (key, want) in [("d1", d1), ("d2", d2), ("v_min_p", vp), ("v_min_n", vn)] {
        let got = fit[key].as_f64().unwrap();
        assert!(((got - want) / want).abs() < 1e-6, "{key}: {got} vs {want}");
    }
}

#[test]
fn check_reports_and_strict_exit() {
    let out = ok(&["check"]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let i_max = r["electromigration"]["i_nudge_max_a"].as_f64().unwrap();
    let r_on = r["electromigration"]["r_on_min_ohm"].as_f64().unwrap();
    assert!((i_max / 32e-9 - 1.0).abs() < 0.05, "{i_max}");
    assert!((r_on / 31e6 - 1.0).abs() < 0.05, "{r_on}");
    let worst = r["endurance_worst"]["required_pulses"].as_f64().unwrap();
    assert!((worst / 8e14 - 1.0).abs() < 0.05, "{worst}");
    assert_eq!(rramsim(&["check", "--strict"]).status.code(), Some(3));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(&cfg, r#"{"analog": {"i_write_a": 1e-8}}"#).unwrap();
    let out = ok(&["check", "--config", p(&cfg)]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["electromigration"]["pass"], true);
    fs::write(&cfg, r#"{"analog": {"i_write_a": 1e-6}}"#).unwrap();
    let out = ok(&["check", "--config", p(&cfg)]);
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["electromigration"]["pass"], false);
}
