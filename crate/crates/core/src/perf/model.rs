use serde::{Deserialize, Serialize};

use super::config::CoreConfig;
use super::report::{AreaRow, CostReport, KernelRow, Variant};
use crate::error::Result;

const AF: f64 = 1e-18;
const FJ: f64 = 1e-15;
const PJ: f64 = 1e-12;
const NS: f64 = 1e-9;
const TO_NJ: f64 = 1e9;

fn area(name: &str, um2: f64) -> AreaRow {
    AreaRow {
        name: name.to_owned(),
        area_um2: um2,
        in_total: true,
    }
}

/// Area of the weight and reference arrays (µm²).
pub fn analog_array_area(cfg: &CoreConfig) -> f64 {
    2.0 * cfg.cells() * cfg.pitch_um().powi(2)
}

/// Capacitance of one line of `n` cells (F).
fn line_capacitance(cfg: &CoreConfig, n: usize, c_cell_af: f64) -> f64 {
    n as f64 * (cfg.tech.wire_cap_af_per_um * cfg.pitch_um() + c_cell_af) * AF
}

/// Analog column line capacitance (F).
pub fn analog_line_capacitance(cfg: &CoreConfig) -> f64 {
    line_capacitance(cfg, cfg.n_cols, cfg.analog.c_cell_af)
}

fn magnitude_pulses(cfg: &CoreConfig) -> f64 {
    f64::from(cfg.coding.max_t())
}

/// Energy of one array read, dynamic line charging plus static cell current (J).
pub fn analog_read_energy(cfg: &CoreConfig) -> f64 {
    let n_t = f64::from(cfg.coding.n_bits_t);
    let v = cfg.analog.v_read;
    let c_line = analog_line_capacitance(cfg);
    let unit = f64::from(cfg.coding.pulse_unit_ns) * NS;
    let dynamic = 0.5 * 2.0 * (n_t - 1.0) * cfg.n_rows as f64 * c_line * v * v;
    let pulses = (2f64.powf(n_t - 1.0) - 1.0).max(0.0);
    let stat = 0.5 * cfg.cells() * cfg.analog.i_read_a * v * unit * pulses;
    dynamic + stat
}

/// The three contributions to the energy of one outer-product update (J).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WriteEnergyTerms {
    /// Line setup at the start of the write.
    pub setup: f64,
    /// Temporal-drive transitions.
    pub transition: f64,
    /// Cell current during the pulses, counting magnitude pulses only.
    pub iv: f64,
    /// Same term counting every code of the temporal word, for comparison.
    pub iv_full_code: f64,
}

impl WriteEnergyTerms {
    pub fn total(&self) -> f64 {
        self.setup + self.transition + self.iv
    }
}

pub fn analog_write_energy_terms(cfg: &CoreConfig) -> WriteEnergyTerms {
    let n_t = f64::from(cfg.coding.n_bits_t);
    let v = cfg.analog.v_write;
    let v3 = v / 3.0;
    let rows = cfg.n_rows as f64;
    let c_line = analog_line_capacitance(cfg);
    let unit = f64::from(cfg.coding.pulse_unit_ns) * NS;
    let setup = rows * c_line * (3.0 * v3 * v3 + 0.5 * v * v + 0.5 * v3 * v3);
    let transition =
        rows * (n_t - 2.0).max(0.0) * c_line * (0.5 * v3 * v3 + 0.5 * 4.0 / 9.0 * v * v);
    let iv_unit = 0.5 * cfg.cells() * cfg.analog.i_write_a * v * unit;
    WriteEnergyTerms {
        setup,
        transition,
        iv: iv_unit * magnitude_pulses(cfg),
        iv_full_code: iv_unit * (2f64.powf(n_t) - 1.0),
    }
}

pub fn analog_write_energy(cfg: &CoreConfig) -> f64 {
    analog_write_energy_terms(cfg).total()
}

/// Time the temporal drivers (and integrators) run for one read (ns).
pub fn temporal_drive_ns(cfg: &CoreConfig) -> f64 {
    f64::from(cfg.coding.max_pulse_ns())
}

/// Temporal-driver latency: the longest pulse plus one clock to load (ns).
pub fn temporal_driver_latency_ns(cfg: &CoreConfig) -> f64 {
    temporal_drive_ns(cfg) + cfg.tech.clock_ns
}

/// Ramp ADC run time: one level per clock (ns). With only one magnitude
/// level per sign the ramp skips its idle code.
pub fn adc_latency_ns(cfg: &CoreConfig) -> f64 {
    let levels = 2f64.powi(cfg.coding.n_bits_adc as i32);
    let steps = if cfg.coding.n_bits_adc <= 2 {
        levels - 1.0
    } else {
        levels
    };
    steps * cfg.tech.clock_ns
}

fn comm_energy(cfg: &CoreConfig, total_area_um2: f64, bits: f64) -> f64 {
    let c_edge = cfg.tech.wire_cap_af_per_um * AF * total_area_um2.sqrt();
    c_edge * cfg.tech.logic_vdd.powi(2) * bits
}

fn mac_energy(cfg: &CoreConfig) -> Result<f64> {
    Ok(cfg.cells() * cfg.mac.pj_per_op[cfg.mac_index()?] * PJ)
}

fn mac_latency_ns(cfg: &CoreConfig) -> f64 {
    (cfg.cells() / f64::from(cfg.mac.units_parallel)).ceil() * cfg.tech.clock_ns
}

/// Analog ReRAM core: rows for area, latency and energy.
pub fn analog_report(cfg: &CoreConfig) -> Result<CostReport> {
    cfg.validate()?;
    let p = &cfg.periphery;
    let t = &cfg.tech;
    let n_t = f64::from(cfg.coding.n_bits_t);
    let rows = cfg.n_rows as f64;
    let cols = cfg.n_cols as f64;
    let drivers = cfg.n_rows.max(cfg.n_cols) as f64;
    let rails = 1.0 + f64::from(cfg.coding.max_v() + 1);

    let area_rows = vec![
        AreaRow {
            name: "Arrays".into(),
            area_um2: analog_array_area(cfg),
            in_total: false,
        },
        area(
            "Temporal Driver Analog Transistors",
            drivers * p.td_hv_transistors * t.hv_tr_area_um2,
        ),
        area(
            "Temporal Driver Cache and Control Circuitry",
            drivers * (p.td_logic_um2_per_bit * n_t + p.td_logic_um2_base),
        ),
        area(
            "Voltage Drivers Analog Transistors",
            cols * p.vd_hv_tr_per_rail * rails * t.hv_tr_area_um2,
        ),
        area(
            "Voltage Drivers: Cache and Control Circuitry",
            cols * (p.vd_logic_um2_per_bit * n_t
                + p.vd_logic_um2_per_rail * rails
                + p.vd_logic_um2_base),
        ),
        area("Integrators", cols * p.integrator_um2),
        area("ADCs", cols * p.comparator_um2),
        area(
            "Analog Routing",
            cols * p.routing_hv_tr_per_col * t.hv_tr_area_um2,
        ),
    ];
    let total_area: f64 = area_rows
        .iter()
        .filter(|r| r.in_total)
        .map(|r| r.area_um2)
        .sum();

    let td = temporal_driver_latency_ns(cfg);
    let adc = adc_latency_ns(cfg);
    let latency = vec![
        KernelRow::new("Array", p.array_delay_ns, [0.0; 3]),
        KernelRow::new("Read: Temporal Driver", td, [1.0, 1.0, 0.0]),
        KernelRow::new("Read: ADC", adc, [1.0, 1.0, 0.0]),
        KernelRow::new("Write: Temporal Driver×4", 4.0 * td, [0.0, 0.0, 1.0]),
    ];

    let drive_s = temporal_drive_ns(cfg) * NS;
    let td_analog = drivers * p.level_shifter_fj * FJ * p.td_transitions_per_bit * n_t;
    let td_logic = drivers * p.td_logic_fj_per_bit * FJ * n_t;
    let vd_logic = cols * (p.vd_logic_fj_base + p.vd_logic_fj_per_bit * n_t) * FJ;
    let integ = cols * p.integrator_ua * 1e-6 * t.hv_vdd * drive_s;
    let adc_e = cols * p.comparator_ua * 1e-6 * t.hv_vdd * adc * NS;
    let comm = comm_energy(cfg, total_area, rows + cols);
    let energy = vec![
        KernelRow::new(
            "Read: Array",
            analog_read_energy(cfg) * TO_NJ,
            [1.0, 1.0, 0.0],
        ),
        KernelRow::new(
            "Write: Array",
            analog_write_energy(cfg) * TO_NJ,
            [0.0, 0.0, 1.0],
        ),
        KernelRow::new(
            "Temporal Driver Analog Transistors (1 cycle)",
            td_analog * TO_NJ,
            [1.0, 1.0, 2.0],
        ),
        KernelRow::new(
            "Temporal Driver Digital Logic (1 cycle)",
            td_logic * TO_NJ,
            [1.0, 1.0, 2.0],
        ),
        KernelRow::new(
            "Voltage Driver Analog Transistors (4 cycle write)",
            p.vd_analog_pj * PJ * TO_NJ,
            [0.0, 0.0, 1.0],
        ),
        KernelRow::new(
            "Voltage Driver Digital Logic (4 cycle write)",
            vd_logic * TO_NJ,
            [0.0, 0.0, 1.0],
        ),
        KernelRow::new("Read: Integrator", integ * TO_NJ, [1.0, 1.0, 0.0]),
        KernelRow::new("Read: ADC", adc_e * TO_NJ, [1.0, 1.0, 0.0]),
        KernelRow::new(
            "Analog Cross Core Communication",
            comm * TO_NJ,
            p.comm_split,
        ),
    ];

    Ok(CostReport::compose(
        Variant::Analog,
        cfg.coding.n_bits_t,
        area_rows,
        energy,
        latency,
    ))
}

/// Parallel-access and timing figures of the binary ReRAM memory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitalReramDerived {
    pub write_parallel: u32,
    pub read_parallel: u32,
    pub r_load_ohm: f64,
    pub r_line_ohm: f64,
    pub c_line_f: f64,
    /// Cell and load resistances in parallel (Ω).
    pub r_parallel_ohm: f64,
    pub tau_rc_ns: f64,
    /// 2.2·τ_RC, the 90 % settling time (ns).
    pub rc_read_latency_ns: f64,
    /// Read latency used for timing (override or RC estimate).
    pub read_latency_ns: f64,
    pub array_read_ns: f64,
    pub array_write_ns: f64,
    pub read_energy_j: f64,
    pub write_energy_j: f64,
}

/// Nearest power of two in the log domain, at least 1 and at most `cap`.
fn nearest_pow2(x: f64, cap: usize) -> u32 {
    let p = 2f64.powf(x.max(1.0).log2().round()) as u32;
    p.clamp(1, cap.max(1) as u32)
}

pub fn digital_reram_derived(cfg: &CoreConfig) -> DigitalReramDerived {
    let b = &cfg.binary_reram;
    let write_parallel = nearest_pow2(b.i_budget_a / b.i_write_a, cfg.n_cols);
    let read_parallel = nearest_pow2(b.i_budget_a / b.i_read_a, cfg.n_cols);
    let r_load = (b.r_on_ohm * b.r_off_ohm).sqrt();
    let r_line = cfg.n_rows as f64 * cfg.pitch_um() * cfg.tech.wire_res_ohm_per_um;
    let c_line = line_capacitance(cfg, cfg.n_rows, b.c_cell_af);
    let r_par = b.r_on_ohm * r_load / (b.r_on_ohm + r_load);
    let tau = r_line * c_line / 2.0 * (1.0 + 2.0 * r_par / r_line);
    let rc_latency = 2.2 * tau / NS;
    let read_latency = b.read_latency_ns.unwrap_or(rc_latency);
    let cells = cfg.cells();
    let bits = cfg.weight_storage_bits();
    let read_bit = 0.5 * c_line * b.v_read.powi(2)
        + 0.5 * b.i_read_a * b.v_read * read_latency * NS
        + b.sense_fj * FJ;
    let write_bit =
        0.5 * c_line * b.v_write.powi(2) + 0.5 * b.i_write_a * b.v_write * b.write_pulse_ns * NS;
    DigitalReramDerived {
        write_parallel,
        read_parallel,
        r_load_ohm: r_load,
        r_line_ohm: r_line,
        c_line_f: c_line,
        r_parallel_ohm: r_par,
        tau_rc_ns: tau / NS,
        rc_read_latency_ns: rc_latency,
        read_latency_ns: read_latency,
        // the bit-plane arrays operate concurrently
        array_read_ns: (cells / f64::from(read_parallel)).ceil() * read_latency,
        array_write_ns: (cells / f64::from(write_parallel)).ceil() * b.write_pulse_ns,
        read_energy_j: bits * read_bit,
        write_energy_j: bits * write_bit,
    }
}

fn input_buffer_area(cfg: &CoreConfig) -> f64 {
    cfg.n_rows as f64 * f64::from(cfg.coding.n_bits_t) * cfg.mac.input_buffer_um2_per_bit
}

fn mac_area(cfg: &CoreConfig) -> Result<f64> {
    Ok(cfg.mac.area_um2_total[cfg.mac_index()?])
}

/// Digital core with the weights in binary ReRAM bit-plane arrays.
pub fn digital_reram_report(cfg: &CoreConfig) -> Result<CostReport> {
    cfg.validate()?;
    let b = &cfg.binary_reram;
    let t = &cfg.tech;
    let d = digital_reram_derived(cfg);
    let per_array = b.hv_tr_per_col * cfg.n_cols as f64 * t.hv_tr_area_um2
        + b.decoder_area_um2
        + f64::from(b.sense_amps) * b.sense_amp_tr * t.logic_tr_area_um2;
    let area_rows = vec![
        area("Array: 1MB ReRAM", f64::from(cfg.weight_bits) * per_array),
        area("Multiply & Accumulate (256 in parallel)", mac_area(cfg)?),
        area("Input Buffers", input_buffer_area(cfg)),
    ];
    let total_area: f64 = area_rows.iter().map(|r| r.area_um2).sum();

    let latency = vec![
        KernelRow::new("Read: 1MB ReRAM", d.array_read_ns, [1.0, 0.0, 1.0]),
        KernelRow::new(
            "Read Transpose: 1MB ReRAM",
            d.array_read_ns,
            [0.0, 1.0, 0.0],
        ),
        KernelRow::new("Write: 1MB ReRAM", d.array_write_ns, [0.0, 0.0, 1.0]),
        // pipelined behind the array accesses
        KernelRow::new(
            "Multiply and Accumulate (256 in parallel)",
            mac_latency_ns(cfg),
            [0.0; 3],
        ),
    ];
    let comm = comm_energy(cfg, total_area, cfg.weight_storage_bits());
    let energy = vec![
        KernelRow::new("Read: 1MB ReRAM", d.read_energy_j * TO_NJ, [1.0, 0.0, 1.0]),
        KernelRow::new(
            "Read Transpose: 1MB ReRAM",
            d.read_energy_j * TO_NJ,
            [0.0, 1.0, 0.0],
        ),
        KernelRow::new(
            "Write: 1MB ReRAM",
            d.write_energy_j * TO_NJ,
            [0.0, 0.0, 1.0],
        ),
        KernelRow::new(
            "Multiply and Accumulate (1M operations)",
            mac_energy(cfg)? * TO_NJ,
            [1.0, 1.0, 1.0],
        ),
        KernelRow::new(
            "Digital ReRAM Cross Core Communication",
            comm * TO_NJ,
            [1.0, 1.0, 2.0],
        ),
    ];
    Ok(CostReport::compose(
        Variant::DigitalReram,
        cfg.coding.n_bits_t,
        area_rows,
        energy,
        latency,
    ))
}

/// SRAM subarrays needed to hold the weights.
pub fn sram_subarrays(cfg: &CoreConfig) -> u64 {
    (cfg.weight_storage_bits() / cfg.sram.bits_per_subarray as f64).ceil() as u64
}

/// Full-array access time from the subarray access rate (ns).
pub fn sram_access_rate_ns(cfg: &CoreConfig) -> f64 {
    let s = &cfg.sram;
    let per_access = sram_subarrays(cfg) as f64 * f64::from(s.bits_per_access);
    (cfg.weight_storage_bits() / per_access).ceil() * s.access_ns
}

/// Digital core with the weights in SRAM.
pub fn sram_report(cfg: &CoreConfig) -> Result<CostReport> {
    cfg.validate()?;
    let s = &cfg.sram;
    let area_rows = vec![
        area(
            "Array: 1MB SRAM",
            sram_subarrays(cfg) as f64 * s.subarray_area_um2,
        ),
        area("Multiply & Accumulate (256 in parallel)", mac_area(cfg)?),
        area("Input Buffers", input_buffer_area(cfg)),
    ];
    let total_area: f64 = area_rows.iter().map(|r| r.area_um2).sum();

    let access = s
        .array_access_ns
        .unwrap_or_else(|| sram_access_rate_ns(cfg));
    let latency = vec![
        KernelRow::new("Read: 1MB SRAM", access, [1.0, 0.0, 1.0]),
        KernelRow::new(
            "Read Transpose: 1MB SRAM",
            s.transpose_factor * access,
            [0.0, 1.0, 0.0],
        ),
        KernelRow::new("Write: 1MB SRAM", access, [0.0, 0.0, 1.0]),
        KernelRow::new(
            "Multiply and Accumulate (256 in parallel)",
            mac_latency_ns(cfg),
            [0.0; 3],
        ),
    ];
    let bits = cfg.weight_storage_bits();
    let read = bits * s.read_fj_per_bit * FJ;
    let write = bits * s.write_fj_per_bit * FJ;
    let comm = comm_energy(cfg, total_area, bits);
    let energy = vec![
        KernelRow::new("Read: 64 128kb SRAMs", read * TO_NJ, [1.0, 0.0, 1.0]),
        KernelRow::new(
            "Read Transpose: 64 128kb SRAMs",
            s.transpose_factor * read * TO_NJ,
            [0.0, 1.0, 0.0],
        ),
        KernelRow::new("Write: 64 128kb SRAMs", write * TO_NJ, [0.0, 0.0, 1.0]),
        KernelRow::new(
            "Multiply and Accumulate (1M operations)",
            mac_energy(cfg)? * TO_NJ,
            [1.0, 1.0, 1.0],
        ),
        KernelRow::new(
            "Digital SRAM Cross Core Communication",
            comm * TO_NJ,
            [1.0, 1.0, 2.0],
        ),
    ];
    Ok(CostReport::compose(
        Variant::Sram,
        cfg.coding.n_bits_t,
        area_rows,
        energy,
        latency,
    ))
}

pub fn report(cfg: &CoreConfig, variant: Variant) -> Result<CostReport> {
    match variant {
        Variant::Analog => analog_report(cfg),
        Variant::DigitalReram => digital_reram_report(cfg),
        Variant::Sram => sram_report(cfg),
    }
}

/// Digital-over-analog cost ratios (larger means analog is better).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub energy_vs_digital_reram: f64,
    pub energy_vs_sram: f64,
    pub latency_vs_digital_reram: f64,
    pub latency_vs_sram: f64,
    pub area_vs_digital_reram: f64,
    pub area_vs_sram: f64,
    /// Analog energy per multiply-accumulate over a full cycle (fJ).
    pub analog_fj_per_mac: f64,
}

pub fn ratios(cfg: &CoreConfig) -> Result<Ratios> {
    let a = analog_report(cfg)?;
    let d = digital_reram_report(cfg)?;
    let s = sram_report(cfg)?;
    let (at, dt, st) = (a.totals, d.totals, s.totals);
    Ok(Ratios {
        energy_vs_digital_reram: dt.energy_total_nj / at.energy_total_nj,
        energy_vs_sram: st.energy_total_nj / at.energy_total_nj,
        latency_vs_digital_reram: dt.latency_total_ns / at.latency_total_ns,
        latency_vs_sram: st.latency_total_ns / at.latency_total_ns,
        area_vs_digital_reram: dt.area_um2 / at.area_um2,
        area_vs_sram: st.area_um2 / at.area_um2,
        analog_fj_per_mac: a.energy_per_mac_j(cfg.cells()) / FJ,
    })
}
