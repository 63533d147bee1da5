use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::xbar::CodingConfig;

/// Process and interconnect properties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TechParams {
    /// M1 full pitch (nm).
    pub m1_full_pitch_nm: f64,
    pub wire_cap_af_per_um: f64,
    pub wire_res_ohm_per_um: f64,
    pub logic_tr_area_um2: f64,
    pub hv_tr_area_um2: f64,
    pub logic_vdd: f64,
    pub hv_vdd: f64,
    pub clock_ns: f64,
}

impl Default for TechParams {
    fn default() -> Self {
        Self {
            m1_full_pitch_nm: 64.0,
            wire_cap_af_per_um: 200.0,
            wire_res_ohm_per_um: 30.0,
            logic_tr_area_um2: 0.04,
            hv_tr_area_um2: 0.35,
            logic_vdd: 0.8,
            hv_vdd: 1.8,
            clock_ns: 1.0,
        }
    }
}

/// Analog ReRAM cell in series with its select device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalogCellParams {
    pub r_on_ohm: f64,
    pub on_off_ratio: f64,
    /// Cell plus select-device capacitance (aF).
    pub c_cell_af: f64,
    pub i_read_a: f64,
    pub i_write_a: f64,
    pub v_read: f64,
    pub v_write: f64,
}

impl Default for AnalogCellParams {
    fn default() -> Self {
        Self {
            r_on_ohm: 100e6,
            on_off_ratio: 10.0,
            c_cell_af: 35.0,
            i_read_a: 1e-9,
            i_write_a: 10.3e-9,
            v_read: 0.785,
            v_write: 1.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinaryReramParams {
    pub r_on_ohm: f64,
    pub r_off_ohm: f64,
    pub c_cell_af: f64,
    pub i_read_a: f64,
    pub i_write_a: f64,
    pub v_read: f64,
    pub v_write: f64,
    pub write_pulse_ns: f64,
    /// Line current budget shared by devices accessed in parallel (A).
    pub i_budget_a: f64,
    /// Number of 1024×1024 bit-plane arrays.
    pub n_arrays: u32,
    pub sense_fj: f64,
    /// Per-array peripheral counts and areas.
    pub hv_tr_per_col: f64,
    pub decoder_area_um2: f64,
    pub sense_amps: u32,
    pub sense_amp_tr: f64,
    /// Read latency of one parallel access (ns). `None` uses the RC estimate.
    pub read_latency_ns: Option<f64>,
}

impl Default for BinaryReramParams {
    fn default() -> Self {
        Self {
            r_on_ohm: 1e6,
            r_off_ohm: 10e6,
            c_cell_af: 35.0,
            i_read_a: 98e-9,
            i_write_a: 846e-9,
            v_read: 0.954,
            v_write: 1.8,
            write_pulse_ns: 10.0,
            i_budget_a: 54e-6,
            n_arrays: 8,
            sense_fj: 5.0,
            hv_tr_per_col: 24.0,
            decoder_area_um2: 200.0,
            sense_amps: 256,
            sense_amp_tr: 60.0,
            read_latency_ns: Some(86.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SramParams {
    pub n_subarrays: u32,
    pub bits_per_subarray: u64,
    pub read_fj_per_bit: f64,
    pub write_fj_per_bit: f64,
    pub subarray_area_um2: f64,
    pub bits_per_access: u32,
    pub access_ns: f64,
    /// Extra reads needed to access the stored matrix transposed.
    pub transpose_factor: f64,
    /// Full-array read/write time (ns). `None` uses the access-rate estimate.
    pub array_access_ns: Option<f64>,
}

impl Default for SramParams {
    fn default() -> Self {
        Self {
            n_subarrays: 64,
            bits_per_subarray: 128 * 1024,
            read_fj_per_bit: 34.0,
            write_fj_per_bit: 46.0,
            subarray_area_um2: 12_103.0,
            bits_per_access: 64,
            access_ns: 2.0,
            transpose_factor: 8.0,
            array_access_ns: Some(4000.0),
        }
    }
}

/// Synthesized multiply-accumulate figures for 8-, 4- and 2-bit inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MacParams {
    pub units_parallel: u32,
    pub pj_per_op: [f64; 3],
    pub area_um2_total: [f64; 3],
    /// Input register area per stored bit (µm²).
    pub input_buffer_um2_per_bit: f64,
}

impl Default for MacParams {
    fn default() -> Self {
        Self {
            units_parallel: 256,
            pj_per_op: [1.46, 0.86, 0.50],
            area_um2_total: [54_000.0, 35_000.0, 23_000.0],
            input_buffer_um2_per_bit: 7000.0 / 8192.0,
        }
    }
}

/// Circuit-level constants of the analog core periphery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeripheryParams {
    pub td_hv_transistors: f64,
    /// Control logic area per row: `slope·n_bits_t + intercept` (µm²).
    pub td_logic_um2_per_bit: f64,
    pub td_logic_um2_base: f64,
    pub level_shifter_fj: f64,
    /// Average driver transitions per input bit in one read.
    pub td_transitions_per_bit: f64,
    pub td_logic_fj_per_bit: f64,
    pub vd_hv_tr_per_rail: f64,
    /// Control logic area per column: `a·n_bits_t + b·rails + c` (µm²).
    pub vd_logic_um2_per_bit: f64,
    pub vd_logic_um2_per_rail: f64,
    pub vd_logic_um2_base: f64,
    pub vd_analog_pj: f64,
    /// Control logic energy per column: `a + b·n_bits_t` (fJ).
    pub vd_logic_fj_base: f64,
    pub vd_logic_fj_per_bit: f64,
    pub integrator_ua: f64,
    pub integrator_um2: f64,
    pub comparator_ua: f64,
    pub comparator_um2: f64,
    pub routing_hv_tr_per_col: f64,
    /// Row RC delay (ns), reported but hidden behind the drivers.
    pub array_delay_ns: f64,
    /// Share of the analog communication energy charged to each kernel
    /// (VMM, MVM, update).
    pub comm_split: [f64; 3],
}

impl Default for PeripheryParams {
    fn default() -> Self {
        Self {
            td_hv_transistors: 20.0,
            td_logic_um2_per_bit: 0.92,
            td_logic_um2_base: 1.24,
            level_shifter_fj: 15.0,
            td_transitions_per_bit: 170e-12 / (1024.0 * 15e-15 * 8.0),
            td_logic_fj_per_bit: 35e3 / (1024.0 * 8.0),
            vd_hv_tr_per_rail: 8.0,
            vd_logic_um2_per_bit: 1.42,
            vd_logic_um2_per_rail: 0.355,
            vd_logic_um2_base: 3.025,
            vd_analog_pj: 80.0,
            vd_logic_fj_base: 6.5,
            vd_logic_fj_per_bit: 1.63,
            integrator_ua: 12.0,
            integrator_um2: 6.4,
            comparator_ua: 20.0,
            comparator_um2: 5.7,
            routing_hv_tr_per_col: 8.0,
            array_delay_ns: 0.2,
            comm_split: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        }
    }
}

/// Everything needed to cost one core at one input/output precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub n_rows: usize,
    pub n_cols: usize,
    pub weight_bits: u32,
    pub coding: CodingConfig,
    pub tech: TechParams,
    pub analog: AnalogCellParams,
    pub binary_reram: BinaryReramParams,
    pub sram: SramParams,
    pub mac: MacParams,
    pub periphery: PeripheryParams,
}

impl Default for CoreConfig {
    fn default() -> Self {
        Self {
            n_rows: 1024,
            n_cols: 1024,
            weight_bits: 8,
            coding: CodingConfig::EIGHT_BIT,
            tech: TechParams::default(),
            analog: AnalogCellParams::default(),
            binary_reram: BinaryReramParams::default(),
            sram: SramParams::default(),
            mac: MacParams::default(),
            periphery: PeripheryParams::default(),
        }
    }
}

impl CoreConfig {
    /// Reference configuration at 8, 4 or 2 bits.
    pub fn reference(bits: u32) -> Result<Self> {
        Ok(Self {
            coding: CodingConfig::for_bits(bits)?,
            ..Self::default()
        })
    }

    /// Same configuration with the coding switched to another preset.
    pub fn with_bits(&self, bits: u32) -> Result<Self> {
        Ok(Self {
            coding: CodingConfig::for_bits(bits)?,
            ..self.clone()
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = if text.trim().is_empty() {
            Self::default()
        } else {
            serde_json::from_str(text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rows == 0 || self.n_cols == 0 {
            return Err(config("array dimensions must be positive"));
        }
        if self.weight_bits != 8 {
            return Err(config("digital weights are fixed at 8 bits"));
        }
        self.coding.validate()?;
        self.mac_index()?;
        let t = &self.tech;
        let a = &self.analog;
        let b = &self.binary_reram;
        let s = &self.sram;
        let positive = [
            t.m1_full_pitch_nm,
            t.wire_cap_af_per_um,
            t.wire_res_ohm_per_um,
            t.logic_tr_area_um2,
            t.hv_tr_area_um2,
            t.logic_vdd,
            t.hv_vdd,
            t.clock_ns,
            a.r_on_ohm,
            a.on_off_ratio,
            a.c_cell_af,
            a.i_read_a,
            a.i_write_a,
            a.v_read,
            a.v_write,
            b.r_on_ohm,
            b.r_off_ohm,
            b.c_cell_af,
            b.i_read_a,
            b.i_write_a,
            b.v_read,
            b.v_write,
            b.write_pulse_ns,
            b.i_budget_a,
            s.read_fj_per_bit,
            s.write_fj_per_bit,
            s.subarray_area_um2,
            s.access_ns,
            s.transpose_factor,
        ];
        if !positive.iter().all(|v| *v > 0.0 && v.is_finite()) {
            return Err(config("technology and device parameters must be positive"));
        }
        if b.n_arrays == 0
            || s.n_subarrays == 0
            || s.bits_per_access == 0
            || self.mac.units_parallel == 0
        {
            return Err(config("unit counts must be positive"));
        }
        if b.read_latency_ns.is_some_and(|v| !(v > 0.0))
            || s.array_access_ns.is_some_and(|v| !(v > 0.0))
        {
            return Err(config("latency overrides must be positive"));
        }
        let split = self.periphery.comm_split;
        if split.iter().any(|v| *v < 0.0) || (split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(config("comm_split must be nonnegative and sum to 1"));
        }
        Ok(())
    }

    /// Index into the per-precision MAC tables.
    pub(crate) fn mac_index(&self) -> Result<usize> {
        match self.coding.n_bits_t {
            8 => Ok(0),
            4 => Ok(1),
            2 => Ok(2),
            n => Err(config(format!("no MAC figures for {n}-bit inputs"))),
        }
    }

    pub fn pitch_um(&self) -> f64 {
        self.tech.m1_full_pitch_nm * 1e-3
    }

    pub fn cells(&self) -> f64 {
        (self.n_rows * self.n_cols) as f64
    }

    /// Stored weight bits of the digital variants.
    pub fn weight_storage_bits(&self) -> f64 {
        self.cells() * f64::from(self.weight_bits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_means_reference() {
        assert_eq!(CoreConfig::from_json("").unwrap(), CoreConfig::default());
        assert_eq!(CoreConfig::from_json("{}").unwrap(), CoreConfig::default());
    }

    #[test]
    fn partial_config_overrides_one_field() {
        let cfg = CoreConfig::from_json(r#"{"tech": {"m1_full_pitch_nm": 32.0}}"#).unwrap();
        assert_eq!(cfg.tech.m1_full_pitch_nm, 32.0);
        assert_eq!(cfg.tech.hv_tr_area_um2, 0.35);
    }

    #[test]
    fn round_trip_and_rejections() {
        let cfg = CoreConfig::reference(4).unwrap();
        assert_eq!(CoreConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
        assert!(CoreConfig::from_json(r#"{"n_rows": 0}"#).is_err());
        assert!(CoreConfig::from_json(r#"{"weight_bits": 4}"#).is_err());
        assert!(CoreConfig::from_json(r#"{"bogus": 1}"#).is_err());
        assert!(CoreConfig::from_json(r#"{"tech": {"hv_vdd": -1}}"#).is_err());
    }

    #[test]
    fn hv_transistor_is_about_eight_logic_transistors() {
        let t = TechParams::default();
        assert!((t.hv_tr_area_um2 / t.logic_tr_area_um2 - 8.0).abs() < 1.0);
    }
}
