//! Closed-form area, energy and latency of analog ReRAM, digital ReRAM and
//! SRAM training cores, plus wire-current and endurance checks.
//!
//! Areas are in µm², energies in nJ and latencies in ns unless a name says
//! otherwise.

mod config;
mod constraints;
mod model;
mod report;

pub use config::{
    AnalogCellParams, BinaryReramParams, CoreConfig, MacParams, PeripheryParams, SramParams,
    TechParams,
};
pub use constraints::{
    constraint_report, electromigration_check, endurance_requirement, ConstraintReport,
    Electromigration, Endurance, LITERATURE_ENDURANCE, SECONDS_PER_YEAR,
};
pub use model::{
    adc_latency_ns, analog_array_area, analog_line_capacitance, analog_read_energy, analog_report,
    analog_write_energy, analog_write_energy_terms, digital_reram_derived, digital_reram_report,
    ratios, report, sram_access_rate_ns, sram_report, sram_subarrays, temporal_driver_latency_ns,
    DigitalReramDerived, Ratios, WriteEnergyTerms,
};
pub use report::{write_csv, AreaRow, CostReport, KernelRow, Totals, Variant, KERNELS};
