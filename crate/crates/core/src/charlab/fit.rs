use std::collections::BTreeMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::VoltageResponseParams;
use crate::error::{Error, Result};

use super::trace::{open_maybe_gz, PulseTrace};

/// Mean conductance change observed at one pulse voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponsePoint {
    pub voltage: f64,
    pub mean_dg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Points with |ΔG| at or below this are treated as dead-zone.
    pub floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { floor: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchResiduals {
    pub set: f64,
    pub reset: f64,
}

/// Result of fitting `ΔG = A·(exp(d·(V − V_min)) − 1)` on each branch.
/// Residuals are RMS relative errors, so they do not change when all ΔG are
/// scaled by a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub d1: f64,
    pub d2: f64,
    pub v_min_p: f64,
    pub v_min_n: f64,
    pub amplitude_set: f64,
    pub amplitude_reset: f64,
    pub residuals: BranchResiduals,
    pub n_points: [usize; 2],
}

impl FitReport {
    pub fn params(&self) -> VoltageResponseParams {
        VoltageResponseParams {
            d1: self.d1,
            d2: self.d2,
            v_min_p: self.v_min_p,
            v_min_n: self.v_min_n,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Averages ΔG per pulse voltage over all within-cycle transitions.
pub fn response_points(traces: &[PulseTrace]) -> Vec<ResponsePoint> {
    let mut acc: BTreeMap<u64, (f64, f64, usize)> = BTreeMap::new();
    for t in traces {
        for cycle in t.records().chunk_by(|a, b| a.cycle == b.cycle) {
            for w in cycle.windows(2) {
                let e = acc
                    .entry(w[1].voltage.to_bits())
                    .or_insert((w[1].voltage, 0.0, 0));
                e.1 += w[1].g_after - w[0].g_after;
                e.2 += 1;
            }
        }
    }
    let mut pts: Vec<ResponsePoint> = acc
        .into_values()
        .map(|(voltage, sum, n)| ResponsePoint {
            voltage,
            mean_dg: sum / n as f64,
        })
        .collect();
    pts.sort_by(|a, b| a.voltage.total_cmp(&b.voltage));
    pts
}

/// Reads voltage-response data: either a `voltage,mean_dg` CSV or a pulse
/// trace, which is reduced with [`response_points`].
pub fn read_response_points(path: &Path) -> Result<Vec<ResponsePoint>> {
    let mut reader = BufReader::new(open_maybe_gz(path)?);
    let is_points = reader
        .fill_buf()?
        .trim_ascii_start()
        .starts_with(b"voltage");
    if !is_points {
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok(response_points(&[PulseTrace::from_reader(
            reader, path, id,
        )?]));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut pts = Vec::new();
    for rec in rdr.deserialize::<ResponsePoint>() {
        pts.push(rec.map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: e.position().map_or(0, |p| p.line() as usize),
            msg: e.to_string(),
        })?);
    }
    Ok(pts)
}

struct Branch {
    d: f64,
    v_min: f64,
    amplitude: f64,
    residual: f64,
}

/// Weighted least squares for `y ≈ α·exp(d·(x − x0)) − A` at fixed `d`,
/// weights `1/y²`. Returns `(α, A, rms relative residual)`.
fn solve_linear(x: &[f64], y: &[f64], x0: f64, d: f64) -> (f64, f64, f64) {
    let (mut s11, mut s12, mut s22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&xi, &yi) in x.iter().zip(y) {
        let w = 1.0 / (yi * yi);
        let e = (d * (xi - x0)).exp();
        s11 += w * e * e;
        s12 -= w * e;
        s22 += w;
        b1 += w * e * yi;
        b2 -= w * yi;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det.abs() > 0.0) || !det.is_finite() {
        return (f64::NAN, f64::NAN, f64::INFINITY);
    }
    let alpha = (b1 * s22 - s12 * b2) / det;
    let amp = (s11 * b2 - s12 * b1) / det;
    let ss: f64 = x
        .iter()
        .zip(y)
        .map(|(&xi, &yi)| {
            let r = (alpha * (d * (xi - x0)).exp() - amp - yi) / yi;
            r * r
        })
        .sum();
    (alpha, amp, (ss / x.len() as f64).sqrt())
}

fn fit_branch(x: &[f64], y: &[f64], name: &str) -> Result<Branch> {
    if x.len() < 3 {
        return Err(Error::Fit(format!(
            "{name} branch needs at least 3 points outside the dead zone, got {}",
            x.len()
        )));
    }
    let x0 = x.iter().copied().fold(f64::INFINITY, f64::min);
    let cost = |ln_d: f64| solve_linear(x, y, x0, ln_d.exp()).2;

    let (lo, hi, n) = ((1e-3f64).ln(), (1e3f64).ln(), 240);
    let grid: Vec<f64> = (0..=n)
        .map(|k| lo + (hi - lo) * k as f64 / n as f64)
        .collect();
    let best = (0..=n)
        .min_by(|&a, &b| cost(grid[a]).total_cmp(&cost(grid[b])))
        .unwrap_or(0);
    let mut a = grid[best.saturating_sub(1)];
    let mut b = grid[(best + 1).min(n)];

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut e = a + inv_phi * (b - a);
    let (mut fc, mut fe) = (cost(c), cost(e));
    while b - a > 1e-12 {
        if fc < fe {
            b = e;
            e = c;
            fe = fc;
            c = b - inv_phi * (b - a);
            fc = cost(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + inv_phi * (b - a);
            fe = cost(e);
        }
    }
    let d = (0.5 * (a + b)).exp();
    let (alpha, amplitude, residual) = solve_linear(x, y, x0, d);
    if !(alpha > 0.0 && amplitude > 0.0 && residual.is_finite()) {
        return Err(Error::Fit(format!(
            "{name} branch shows no exponential voltage dependence"
        )));
    }
    Ok(Branch {
        d,
        v_min: x0 - (alpha / amplitude).ln() / d,
        amplitude,
        residual,
    })
}

/// Fits both branches of the voltage response. Positive voltages form the
/// SET branch and negative voltages the RESET branch (fitted on |ΔG|).
pub fn fit_voltage_response(points: &[ResponsePoint], opts: &FitOptions) -> Result<FitReport> {
    let mut set = (Vec::new(), Vec::new());
    let mut reset = (Vec::new(), Vec::new());
    for p in points {
        if !(p.voltage.is_finite() && p.mean_dg.is_finite()) {
            return Err(Error::Fit(format!("non-finite point {p:?}")));
        }
        if p.mean_dg.abs() <= opts.floor || p.mean_dg == 0.0 {
            continue;
        }
        if p.voltage > 0.0 {
            set.0.push(p.voltage);
            set.1.push(p.mean_dg.abs());
        } else if p.voltage < 0.0 {
            reset.0.push(-p.voltage);
            reset.1.push(p.mean_dg.abs());
        }
    }
    let s = fit_branch(&set.0, &set.1, "SET")?;
    let r = fit_branch(&reset.0, &reset.1, "RESET")?;
    Ok(FitReport {
        d1: s.d,
        d2: r.d,
        v_min_p: s.v_min,
        v_min_n: -r.v_min,
        amplitude_set: s.amplitude,
        amplitude_reset: r.amplitude,
        residuals: BranchResiduals {
            set: s.residual,
            reset: r.residual,
        },
        n_points: [set.0.len(), reset.0.len()],
    })
}
