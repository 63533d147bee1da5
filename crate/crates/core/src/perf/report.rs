use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Analog,
    DigitalReram,
    Sram,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Analog, Variant::DigitalReram, Variant::Sram];

    /// Label of the variant's total row.
    pub fn total_label(self) -> &'static str {
        match self {
            Variant::Analog => "Analog ReRAM Total",
            Variant::DigitalReram => "Digital ReRAM Total",
            Variant::Sram => "Digital SRAM Total",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Analog => "analog",
            Variant::DigitalReram => "digital-reram",
            Variant::Sram => "sram",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analog" | "analog-reram" => Ok(Variant::Analog),
            "digital-reram" | "reram" => Ok(Variant::DigitalReram),
            "sram" => Ok(Variant::Sram),
            _ => Err(config(format!(
                "unknown architecture '{s}' (expected analog, digital-reram or sram)"
            ))),
        }
    }
}

/// VMM, MVM and outer-product update.
pub const KERNELS: [&str; 3] = ["vmm", "mvm", "update"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRow {
    pub name: String,
    pub area_um2: f64,
    /// Whether the row counts toward the variant total. The analog arrays
    /// sit on top of their drivers and add no footprint.
    pub in_total: bool,
}

/// A per-operation cost and how many times each kernel incurs it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub name: String,
    pub value: f64,
    /// Multiplicity in (VMM, MVM, update).
    pub uses: [f64; 3],
}

impl KernelRow {
    pub(crate) fn new(name: &str, value: f64, uses: [f64; 3]) -> Self {
        Self {
            name: name.to_owned(),
            value,
            uses,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub area_um2: f64,
    /// Per kernel, (VMM, MVM, update).
    pub energy_nj: [f64; 3],
    pub latency_ns: [f64; 3],
    pub energy_total_nj: f64,
    pub latency_total_ns: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub variant: Variant,
    pub bits: u32,
    pub area: Vec<AreaRow>,
    /// Energy per occurrence (nJ).
    pub energy: Vec<KernelRow>,
    /// Latency per occurrence (ns).
    pub latency: Vec<KernelRow>,
    pub totals: Totals,
}

fn per_kernel(rows: &[KernelRow]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for r in rows {
        for (o, u) in out.iter_mut().zip(r.uses) {
            *o += r.value * u;
        }
    }
    out
}

impl CostReport {
    /// Builds the report and its totals from component rows.
    pub fn compose(
        variant: Variant,
        bits: u32,
        area: Vec<AreaRow>,
        energy: Vec<KernelRow>,
        latency: Vec<KernelRow>,
    ) -> Self {
        let area_um2 = area.iter().filter(|r| r.in_total).map(|r| r.area_um2).sum();
        let energy_nj = per_kernel(&energy);
        let latency_ns = per_kernel(&latency);
        Self {
            variant,
            bits,
            area,
            energy,
            latency,
            totals: Totals {
                area_um2,
                energy_nj,
                latency_ns,
                energy_total_nj: energy_nj.iter().sum(),
                latency_total_ns: latency_ns.iter().sum(),
            },
        }
    }

    pub fn area_row(&self, name: &str) -> Option<f64> {
        self.area
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.area_um2)
    }

    pub fn energy_row(&self, name: &str) -> Option<f64> {
        self.energy.iter().find(|r| r.name == name).map(|r| r.value)
    }

    pub fn latency_row(&self, name: &str) -> Option<f64> {
        self.latency
            .iter()
            .find(|r| r.name == name)
            .map(|r| r.value)
    }

    /// Energy per multiply-accumulate over one VMM + MVM + update cycle (J).
    pub fn energy_per_mac_j(&self, cells: f64) -> f64 {
        self.totals.energy_total_nj * 1e-9 / (3.0 * cells)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat CSV: one line per component row plus per-kernel and total lines.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        write_csv(std::slice::from_ref(self), w)
    }
}

#[derive(Serialize)]
struct CsvLine<'a> {
    variant: &'a str,
    bits: u32,
    table: &'a str,
    component: &'a str,
    kernel: &'a str,
    value: f64,
    unit: &'a str,
}

/// Writes several reports into one CSV stream.
pub fn write_csv<W: std::io::Write>(reports: &[CostReport], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in reports {
        let v = r.variant.as_str();
        let line = |table, component, kernel, value, unit| CsvLine {
            variant: v,
            bits: r.bits,
            table,
            component,
            kernel,
            value,
            unit,
        };
        for a in &r.area {
            out.serialize(line("area", &a.name, "", a.area_um2, "um2"))?;
        }
        out.serialize(line(
            "area",
            r.variant.total_label(),
            "",
            r.totals.area_um2,
            "um2",
        ))?;
        for (rows, table, unit, kernels, total) in [
            (
                &r.latency,
                "latency",
                "ns",
                r.totals.latency_ns,
                r.totals.latency_total_ns,
            ),
            (
                &r.energy,
                "energy",
                "nJ",
                r.totals.energy_nj,
                r.totals.energy_total_nj,
            ),
        ] {
            for row in rows {
                out.serialize(line(table, &row.name, "", row.value, unit))?;
            }
            for (k, val) in KERNELS.iter().zip(kernels) {
                out.serialize(line(table, r.variant.total_label(), k, val, unit))?;
            }
            out.serialize(line(table, r.variant.total_label(), "total", total, unit))?;
        }
    }
    out.flush()?;
    Ok(())
}
