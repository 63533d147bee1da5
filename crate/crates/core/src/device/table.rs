use serde::{Deserialize, Serialize};

use super::{ConductanceRange, Polarity};
use crate::error::{config, domain, Result};

/// Piecewise-linear CDF through the points `(dg[k], p[k])`.
///
/// Probability mass `p[0]` sits on `dg[0]`; between consecutive points the
/// distribution is uniform. A single point with `p = [1]` is a point mass.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalCdf {
    dg: Vec<f64>,
    p: Vec<f64>,
}

impl EmpiricalCdf {
    pub fn new(dg: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        let cdf = Self { dg, p };
        cdf.validate()?;
        Ok(cdf)
    }

    pub fn point_mass(value: f64) -> Self {
        Self {
            dg: vec![value],
            p: vec![1.0],
        }
    }

    /// Quantile summary of `samples` on `n_points` equally spaced
    /// probabilities (linear interpolation between order statistics).
    pub fn from_samples(samples: &[f64], n_points: usize) -> Result<Self> {
        if samples.is_empty() {
            return Err(domain("cannot build a CDF from zero samples"));
        }
        if n_points < 2 {
            return Err(config("a CDF needs at least 2 points"));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let first = sorted[0];
        if sorted.iter().all(|&v| v == first) {
            return Ok(Self::point_mass(first));
        }
        let last = (sorted.len() - 1) as f64;
        let mut dg = Vec::with_capacity(n_points);
        let mut p = Vec::with_capacity(n_points);
        for k in 0..n_points {
            let q = k as f64 / (n_points - 1) as f64;
            let pos = q * last;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            dg.push(sorted[lo] + frac * (sorted[hi] - sorted[lo]));
            p.push(q);
        }
        Ok(Self { dg, p })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dg.is_empty() || self.dg.len() != self.p.len() {
            return Err(config(
                "CDF support and probabilities must be non-empty and equal length",
            ));
        }
        if self.dg.iter().chain(&self.p).any(|v| !v.is_finite()) {
            return Err(config("CDF contains non-finite values"));
        }
        if self.dg.windows(2).any(|w| w[1] < w[0]) {
            return Err(config("CDF support must be nondecreasing"));
        }
        if self.p.windows(2).any(|w| w[1] < w[0]) || self.p[0] < 0.0 {
            return Err(config("CDF probabilities must be nondecreasing from >= 0"));
        }
        if (self.p[self.p.len() - 1] - 1.0).abs() > 1e-9 {
            return Err(config("CDF must end at probability 1"));
        }
        Ok(())
    }

    pub fn support(&self) -> &[f64] {
        &self.dg
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Inverse CDF at `u` in [0, 1].
    pub fn quantile(&self, u: f64) -> f64 {
        if u <= self.p[0] {
            return self.dg[0];
        }
        // first k with p[k] >= u
        let k = self.p.partition_point(|&pk| pk < u).min(self.p.len() - 1);
        let (p0, p1) = (self.p[k - 1], self.p[k]);
        let (d0, d1) = (self.dg[k - 1], self.dg[k]);
        if p1 == p0 {
            return d1;
        }
        d0 + (u - p0) / (p1 - p0) * (d1 - d0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x < self.dg[0] {
            return 0.0;
        }
        // last k with dg[k] <= x
        let k = self.dg.partition_point(|&d| d <= x) - 1;
        if k + 1 == self.dg.len() {
            return 1.0;
        }
        let (d0, d1) = (self.dg[k], self.dg[k + 1]);
        let (p0, p1) = (self.p[k], self.p[k + 1]);
        if d1 == d0 {
            return p1;
        }
        p0 + (x - d0) / (d1 - d0) * (p1 - p0)
    }

    pub fn mean(&self) -> f64 {
        let mut m = self.p[0] * self.dg[0];
        for k in 1..self.dg.len() {
            m += (self.p[k] - self.p[k - 1]) * 0.5 * (self.dg[k - 1] + self.dg[k]);
        }
        m
    }
}

/// Binned ΔG-vs-G₀ distributions for one pulse program.
///
/// The table covers the conductance window `[bin_edges[0], bin_edges[n]]`.
/// Each bin holds an optional CDF per polarity; absent bins had no observed
/// transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableDoc", into = "TableDoc")]
pub struct ConductanceTable {
    /// Signed SET pulse amplitude (V).
    pub set_voltage: f64,
    /// Signed RESET pulse amplitude (V).
    pub reset_voltage: f64,
    pub pulse_width_ns: f64,
    pub bin_edges: Vec<f64>,
    pub set: Vec<Option<EmpiricalCdf>>,
    pub reset: Vec<Option<EmpiricalCdf>>,
}

impl ConductanceTable {
    pub fn validate(&self) -> Result<()> {
        let e = &self.bin_edges;
        if e.len() < 2 {
            return Err(config("table needs at least one bin"));
        }
        if e.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(config("bin edges must be strictly increasing"));
        }
        ConductanceRange::new(e[0], e[e.len() - 1])?;
        let n = e.len() - 1;
        if self.set.len() != n || self.reset.len() != n {
            return Err(config(format!(
                "table has {n} bins but {} SET / {} RESET CDFs",
                self.set.len(),
                self.reset.len()
            )));
        }
        for cdf in self.set.iter().chain(&self.reset).flatten() {
            cdf.validate()?;
        }
        if !(self.pulse_width_ns > 0.0) {
            return Err(config("pulse width must be positive"));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.bin_edges.len() - 1
    }

    pub fn range(&self) -> ConductanceRange {
        ConductanceRange {
            g_min: self.bin_edges[0],
            g_max: self.bin_edges[self.bin_edges.len() - 1],
        }
    }

    /// Index of the bin containing `g`; the top edge belongs to the last bin.
    pub fn bin_of(&self, g: f64) -> usize {
        let inner = &self.bin_edges[1..self.bin_edges.len() - 1];
        inner.partition_point(|&edge| edge <= g)
    }

    pub fn cdf(&self, bin: usize, polarity: Polarity) -> Option<&EmpiricalCdf> {
        match polarity {
            Polarity::Set => self.set.get(bin)?.as_ref(),
            Polarity::Reset => self.reset.get(bin)?.as_ref(),
        }
    }

    fn bin_cdf(&self, g0: f64, polarity: Polarity) -> Result<&EmpiricalCdf> {
        let bin = self.bin_of(g0);
        self.cdf(bin, polarity).ok_or_else(|| {
            domain(format!(
                "no {polarity:?} statistics in bin {bin} (g0 = {g0:e} S)"
            ))
        })
    }

    pub fn sample_delta(&self, g0: f64, polarity: Polarity, u: f64) -> Result<f64> {
        Ok(self.bin_cdf(g0, polarity)?.quantile(u))
    }

    pub fn mean_delta(&self, g0: f64, polarity: Polarity) -> Result<f64> {
        Ok(self.bin_cdf(g0, polarity)?.mean())
    }

    /// Table with every CDF collapsed onto its mean.
    pub fn deterministic(&self) -> Self {
        let collapse = |v: &Vec<Option<EmpiricalCdf>>| {
            v.iter()
                .map(|c| c.as_ref().map(|c| EmpiricalCdf::point_mass(c.mean())))
                .collect()
        };
        Self {
            set: collapse(&self.set),
            reset: collapse(&self.reset),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

// On-disk layout. See docs/schemas.md.

#[derive(Serialize, Deserialize)]
struct PulseVoltages {
    set: f64,
    reset: f64,
}

#[derive(Serialize, Deserialize)]
struct Support {
    set: Vec<Option<Vec<f64>>>,
    reset: Vec<Option<Vec<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct TableDoc {
    pulse_voltage: PulseVoltages,
    pulse_width_ns: f64,
    bin_edges: Vec<f64>,
    set_cdfs: Vec<Option<Vec<f64>>>,
    reset_cdfs: Vec<Option<Vec<f64>>>,
    dg_support: Support,
}

fn join(
    probs: Vec<Option<Vec<f64>>>,
    support: Vec<Option<Vec<f64>>>,
    what: &str,
) -> Result<Vec<Option<EmpiricalCdf>>> {
    if probs.len() != support.len() {
        return Err(config(format!("{what}: cdf and support bin counts differ")));
    }
    probs
        .into_iter()
        .zip(support)
        .enumerate()
        .map(|(bin, pair)| match pair {
            (None, None) => Ok(None),
            (Some(p), Some(dg)) => EmpiricalCdf::new(dg, p).map(Some),
            _ => Err(config(format!(
                "{what}: bin {bin} has probabilities without support or vice versa"
            ))),
        })
        .collect()
}

impl TryFrom<TableDoc> for ConductanceTable {
    type Error = crate::Error;

    fn try_from(doc: TableDoc) -> Result<Self> {
        let table = Self {
            set_voltage: doc.pulse_voltage.set,
            reset_voltage: doc.pulse_voltage.reset,
            pulse_width_ns: doc.pulse_width_ns,
            bin_edges: doc.bin_edges,
            set: join(doc.set_cdfs, doc.dg_support.set, "set")?,
            reset: join(doc.reset_cdfs, doc.dg_support.reset, "reset")?,
        };
        table.validate()?;
        Ok(table)
    }
}

impl From<ConductanceTable> for TableDoc {
    fn from(t: ConductanceTable) -> Self {
        let split = |v: &[Option<EmpiricalCdf>]| {
            let p = v.iter().map(|c| c.as_ref().map(|c| c.p.clone())).collect();
            let dg = v.iter().map(|c| c.as_ref().map(|c| c.dg.clone())).collect();
            (p, dg)
        };
        let (set_p, set_dg) = split(&t.set);
        let (reset_p, reset_dg) = split(&t.reset);
        Self {
            pulse_voltage: PulseVoltages {
                set: t.set_voltage,
                reset: t.reset_voltage,
            },
            pulse_width_ns: t.pulse_width_ns,
            bin_edges: t.bin_edges,
            set_cdfs: set_p,
            reset_cdfs: reset_p,
            dg_support: Support {
                set: set_dg,
                reset: reset_dg,
            },
        }
    }
}
