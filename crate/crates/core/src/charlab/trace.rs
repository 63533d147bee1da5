use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceModel, Polarity};
use crate::error::{domain, Error, Result};

pub const TRACE_HEADER: [&str; 6] = [
    "cycle",
    "pulse",
    "polarity",
    "voltage_V",
    "width_ns",
    "conductance_S",
];

/// One pulse and the conductance read after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRecord {
    pub cycle: u64,
    pub pulse: u64,
    pub polarity: Polarity,
    pub voltage: f64,
    pub width_ns: f64,
    pub g_after: f64,
}

/// Pulse-train measurement of one device.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseTrace {
    pub device_id: String,
    records: Vec<PulseRecord>,
    g_min_observed: f64,
    g_max_observed: f64,
}

#[derive(Deserialize)]
struct Row {
    cycle: u64,
    pulse: u64,
    polarity: String,
    #[serde(rename = "voltage_V")]
    voltage: f64,
    width_ns: f64,
    #[serde(rename = "conductance_S")]
    conductance: f64,
}

#[derive(Serialize)]
struct RowOut {
    cycle: u64,
    pulse: u64,
    polarity: &'static str,
    #[serde(rename = "voltage_V")]
    voltage: f64,
    width_ns: f64,
    #[serde(rename = "conductance_S")]
    conductance: f64,
}

fn parse_polarity(s: &str) -> Option<Polarity> {
    match s.trim().to_ascii_lowercase().as_str() {
        "set" | "+" | "pos" => Some(Polarity::Set),
        "reset" | "-" | "neg" => Some(Polarity::Reset),
        _ => None,
    }
}

/// Opens a file, transparently decompressing gzip.
pub(crate) fn open_maybe_gz(path: &Path) -> Result<Box<dyn Read>> {
    let mut reader = BufReader::new(File::open(path)?);
    let gz = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(MultiGzDecoder::new(reader))
    } else {
        Box::new(reader)
    })
}

impl PulseTrace {
    /// Validates records: conductances positive and finite, pulse indices
    /// strictly increasing within a cycle, cycles in nondecreasing order.
    pub fn new(device_id: impl Into<String>, records: Vec<PulseRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(domain("trace has no records"));
        }
        for (k, pair) in records.windows(2).enumerate() {
            check_order(&pair[0], &pair[1])
                .map_err(|m| domain(format!("record {}: {m}", k + 2)))?;
        }
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for (k, r) in records.iter().enumerate() {
            check_record(r).map_err(|m| domain(format!("record {}: {m}", k + 1)))?;
            lo = lo.min(r.g_after);
            hi = hi.max(r.g_after);
        }
        Ok(Self {
            device_id: device_id.into(),
            records,
            g_min_observed: lo,
            g_max_observed: hi,
        })
    }

    pub fn records(&self) -> &[PulseRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn g_min_observed(&self) -> f64 {
        self.g_min_observed
    }

    pub fn g_max_observed(&self) -> f64 {
        self.g_max_observed
    }

    /// Reads the CSV trace format (optionally gzip-compressed). The device
    /// id is the file name without extensions.
    pub fn read(path: &Path) -> Result<Self> {
        let id = path
            .file_name()
            .and_then(|n| n.to_str())
            .map(|n| n.split('.').next().unwrap_or(n).to_owned())
            .unwrap_or_default();
        Self::from_reader(open_maybe_gz(path)?, path, id)
    }

    /// Parses CSV from any reader. `path` only labels error messages.
    pub fn from_reader<R: Read>(reader: R, path: &Path, device_id: String) -> Result<Self> {
        let parse_err = |line: u64, msg: String| Error::Parse {
            path: PathBuf::from(path),
            line: line as usize,
            msg,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| parse_err(1, e.to_string()))?
            .clone();
        if headers.is_empty() {
            return Err(parse_err(1, "empty file".into()));
        }
        if headers.iter().ne(TRACE_HEADER.iter().copied()) {
            return Err(parse_err(
                1,
                format!("expected header '{}'", TRACE_HEADER.join(",")),
            ));
        }
        let mut records: Vec<PulseRecord> = Vec::new();
        let mut raw = csv::StringRecord::new();
        loop {
            let line = rdr.position().line();
            match rdr.read_record(&mut raw) {
                Ok(false) => break,
                Ok(true) => {}
                Err(e) => return Err(parse_err(line, e.to_string())),
            }
            let line = raw.position().map_or(line, |p| p.line());
            let row: Row = raw
                .deserialize(Some(&headers))
                .map_err(|e| parse_err(line, e.to_string()))?;
            let polarity = parse_polarity(&row.polarity)
                .ok_or_else(|| parse_err(line, format!("unknown polarity '{}'", row.polarity)))?;
            let rec = PulseRecord {
                cycle: row.cycle,
                pulse: row.pulse,
                polarity,
                voltage: row.voltage,
                width_ns: row.width_ns,
                g_after: row.conductance,
            };
            check_record(&rec).map_err(|m| parse_err(line, m))?;
            if let Some(prev) = records.last() {
                check_order(prev, &rec).map_err(|m| parse_err(line, m))?;
            }
            records.push(rec);
        }
        if records.is_empty() {
            return Err(parse_err(2, "trace has a header but no records".into()));
        }
        Self::new(device_id, records)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.records {
            out.serialize(RowOut {
                cycle: r.cycle,
                pulse: r.pulse,
                polarity: match r.polarity {
                    Polarity::Set => "SET",
                    Polarity::Reset => "RESET",
                },
                voltage: r.voltage,
                width_ns: r.width_ns,
                conductance: r.g_after,
            })?;
        }
        out.flush()?;
        Ok(())
    }

    /// Writes the trace, gzip-compressed when the path ends in `.gz`.
    pub fn write(&self, path: &Path) -> Result<()> {
        let file = std::io::BufWriter::new(File::create(path)?);
        if path.extension().is_some_and(|e| e == "gz") {
            let mut gz = GzEncoder::new(file, Compression::default());
            self.write_csv(&mut gz)?;
            gz.finish()?.flush()?;
        } else {
            let mut file = file;
            self.write_csv(&mut file)?;
            file.flush()?;
        }
        Ok(())
    }
}

fn check_record(r: &PulseRecord) -> std::result::Result<(), String> {
    if !(r.g_after > 0.0 && r.g_after.is_finite()) {
        return Err(format!("conductance must be positive, got {}", r.g_after));
    }
    if !(r.width_ns > 0.0 && r.width_ns.is_finite()) {
        return Err(format!("pulse width must be positive, got {}", r.width_ns));
    }
    if !r.voltage.is_finite() {
        return Err("voltage is not finite".into());
    }
    Ok(())
}

fn check_order(prev: &PulseRecord, rec: &PulseRecord) -> std::result::Result<(), String> {
    if rec.cycle < prev.cycle {
        return Err(format!("cycle {} follows cycle {}", rec.cycle, prev.cycle));
    }
    if rec.cycle == prev.cycle && rec.pulse <= prev.pulse {
        return Err(format!(
            "pulse index {} not increasing within cycle {}",
            rec.pulse, rec.cycle
        ));
    }
    Ok(())
}

/// Pulse program of a synthetic measurement: each cycle applies
/// `pulses_per_polarity` SET pulses then as many RESET pulses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseProgram {
    pub cycles: u64,
    pub pulses_per_polarity: u64,
    pub set_voltage: f64,
    pub reset_voltage: f64,
    pub width_ns: f64,
}

impl Default for PulseProgram {
    fn default() -> Self {
        Self {
            cycles: 10,
            pulses_per_polarity: 1000,
            set_voltage: 1.0,
            reset_voltage: -2.5,
            width_ns: 1000.0,
        }
    }
}

/// Simulates a pulse-train measurement of `model`, starting at `g_start`
/// and carrying the state across cycles.
pub fn synthesize_trace<R: Rng + ?Sized>(
    model: &DeviceModel,
    program: &PulseProgram,
    g_start: f64,
    rng: &mut R,
) -> Result<PulseTrace> {
    let mut g = g_start;
    let n = program.cycles * 2 * program.pulses_per_polarity;
    let mut records = Vec::with_capacity(n as usize);
    for cycle in 0..program.cycles {
        for k in 0..2 * program.pulses_per_polarity {
            let (polarity, voltage) = if k < program.pulses_per_polarity {
                (Polarity::Set, program.set_voltage)
            } else {
                (Polarity::Reset, program.reset_voltage)
            };
            g = model.sample_update(g, polarity, rng)?;
            records.push(PulseRecord {
                cycle,
                pulse: k,
                polarity,
                voltage,
                width_ns: program.width_ns,
                g_after: g,
            });
        }
    }
    PulseTrace::new("synthetic", records)
}
