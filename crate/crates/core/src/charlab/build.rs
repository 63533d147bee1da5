use crate::device::{ConductanceTable, EmpiricalCdf, Polarity};
use crate::error::{config, domain, Result};

use super::trace::{PulseRecord, PulseTrace};

pub const DEFAULT_BINS: usize = 64;
pub const DEFAULT_SAMPLES_PER_CDF: usize = 257;

/// Pulse program shared by a group of cycles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProgramKey {
    pub set_voltage: f64,
    pub reset_voltage: f64,
    pub width_ns: f64,
}

/// Conductance changes sorted by the state before each pulse.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionBins {
    pub edges: Vec<f64>,
    pub set: Vec<Vec<f64>>,
    pub reset: Vec<Vec<f64>>,
}

impl TransitionBins {
    pub fn total(&self) -> usize {
        self.set.iter().chain(&self.reset).map(Vec::len).sum()
    }
}

/// Uniform edges over `[lo, hi]`. A zero-width window is widened slightly so
/// a constant trace still gets valid bins.
fn uniform_edges(lo: f64, hi: f64, n_bins: usize) -> Vec<f64> {
    let (lo, hi) = if hi > lo {
        (lo, hi)
    } else {
        let pad = lo.abs().max(f64::MIN_POSITIVE) * 1e-6;
        (lo - pad, hi + pad)
    };
    let mut edges: Vec<f64> = (0..=n_bins)
        .map(|k| lo + (hi - lo) * k as f64 / n_bins as f64)
        .collect();
    edges[n_bins] = hi;
    edges
}

fn bin_index(edges: &[f64], g: f64) -> usize {
    edges[1..edges.len() - 1].partition_point(|&e| e <= g)
}

/// Consecutive record pairs inside one cycle.
fn transitions<'a>(
    records: impl IntoIterator<Item = &'a [PulseRecord]>,
) -> impl Iterator<Item = (&'a PulseRecord, &'a PulseRecord)> {
    records
        .into_iter()
        .flat_map(|cycle| cycle.windows(2).map(|w| (&w[0], &w[1])))
}

/// Assigns every within-cycle change `g[k] - g[k-1]` to the bin of `g[k-1]`,
/// under the polarity of pulse `k`.
pub fn bin_transitions(trace: &PulseTrace, n_bins: usize) -> Result<TransitionBins> {
    let cycles = split_cycles(trace.records());
    bin_cycles(
        &cycles,
        n_bins,
        trace.g_min_observed(),
        trace.g_max_observed(),
    )
}

fn bin_cycles(
    cycles: &[&[PulseRecord]],
    n_bins: usize,
    lo: f64,
    hi: f64,
) -> Result<TransitionBins> {
    if n_bins < 2 {
        return Err(config("a table needs at least 2 bins"));
    }
    let edges = uniform_edges(lo, hi, n_bins);
    let mut set = vec![Vec::new(); n_bins];
    let mut reset = vec![Vec::new(); n_bins];
    for (prev, cur) in transitions(cycles.iter().copied()) {
        let bin = bin_index(&edges, prev.g_after);
        let dg = cur.g_after - prev.g_after;
        match cur.polarity {
            Polarity::Set => set[bin].push(dg),
            Polarity::Reset => reset[bin].push(dg),
        }
    }
    Ok(TransitionBins { edges, set, reset })
}

fn split_cycles(records: &[PulseRecord]) -> Vec<&[PulseRecord]> {
    records.chunk_by(|a, b| a.cycle == b.cycle).collect()
}

fn program_of(cycle: &[PulseRecord]) -> Result<ProgramKey> {
    let mut set_v = None;
    let mut reset_v = None;
    let width = cycle[0].width_ns;
    for r in cycle {
        let slot = match r.polarity {
            Polarity::Set => &mut set_v,
            Polarity::Reset => &mut reset_v,
        };
        match *slot {
            None => *slot = Some(r.voltage),
            Some(v) if v != r.voltage => {
                return Err(config(format!(
                    "cycle {} mixes {:?} voltages {v} and {}",
                    r.cycle, r.polarity, r.voltage
                )))
            }
            Some(_) => {}
        }
        if r.width_ns != width {
            return Err(config(format!(
                "cycle {} mixes pulse widths {width} and {}",
                r.cycle, r.width_ns
            )));
        }
    }
    Ok(ProgramKey {
        set_voltage: set_v.unwrap_or(f64::NAN),
        reset_voltage: reset_v.unwrap_or(f64::NAN),
        width_ns: width,
    })
}

fn same_program(a: &ProgramKey, b: &ProgramKey) -> bool {
    let eq = |x: f64, y: f64| x == y || (x.is_nan() && y.is_nan());
    eq(a.set_voltage, b.set_voltage)
        && eq(a.reset_voltage, b.reset_voltage)
        && a.width_ns == b.width_ns
}

fn cdfs(bins: &[Vec<f64>], samples_per_cdf: usize) -> Result<Vec<Option<EmpiricalCdf>>> {
    bins.iter()
        .map(|s| {
            if s.is_empty() {
                Ok(None)
            } else {
                EmpiricalCdf::from_samples(s, samples_per_cdf).map(Some)
            }
        })
        .collect()
}

/// One ΔG-vs-G₀ table per distinct pulse program in the trace, in order of
/// first appearance. Bins span the conductance range seen under each program.
pub fn build_tables(
    trace: &PulseTrace,
    n_bins: usize,
    samples_per_cdf: usize,
) -> Result<Vec<(ProgramKey, ConductanceTable)>> {
    let mut groups: Vec<(ProgramKey, Vec<&[PulseRecord]>)> = Vec::new();
    for cycle in split_cycles(trace.records()) {
        let key = program_of(cycle)?;
        match groups.iter_mut().find(|(k, _)| same_program(k, &key)) {
            Some((_, g)) => g.push(cycle),
            None => groups.push((key, vec![cycle])),
        }
    }
    groups
        .into_iter()
        .map(|(key, cycles)| {
            let (lo, hi) = cycles
                .iter()
                .flat_map(|c| c.iter())
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
                    (lo.min(r.g_after), hi.max(r.g_after))
                });
            let bins = bin_cycles(&cycles, n_bins, lo, hi)?;
            if bins.set.iter().all(Vec::is_empty) || bins.reset.iter().all(Vec::is_empty) {
                return Err(domain(format!(
                    "program {key:?} needs at least one SET and one RESET transition"
                )));
            }
            let table = ConductanceTable {
                set_voltage: key.set_voltage,
                reset_voltage: key.reset_voltage,
                pulse_width_ns: key.width_ns,
                set: cdfs(&bins.set, samples_per_cdf)?,
                reset: cdfs(&bins.reset, samples_per_cdf)?,
                bin_edges: bins.edges,
            };
            table.validate()?;
            Ok((key, table))
        })
        .collect()
}

/// Table for a trace recorded under a single pulse program.
pub fn build_table(
    trace: &PulseTrace,
    n_bins: usize,
    samples_per_cdf: usize,
) -> Result<ConductanceTable> {
    let mut tables = build_tables(trace, n_bins, samples_per_cdf)?;
    if tables.len() != 1 {
        return Err(config(format!(
            "trace holds {} pulse programs; use build_tables",
            tables.len()
        )));
    }
    Ok(tables.remove(0).1)
}
