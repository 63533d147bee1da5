use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::coding::{CodingConfig, DigitalVector};
use crate::device::{delta_g_of_voltage, ConductanceRange, DeviceModel, Polarity};
use crate::error::{config, domain, Result};

const NS: f64 = 1e-9;

/// Analog neural core: a weight array and a fixed reference array of equal
/// shape, plus one offset-correction row on the column (VMM) side.
///
/// A weight is the difference between a weight-array device and its
/// reference device, normalized by half the conductance span. The reference
/// array sits at the midpoint of the range, so weights cover [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossbarCore {
    n_rows: usize,
    n_cols: usize,
    g_pos: Vec<f64>,
    g_ref: Vec<f64>,
    offset_row: Vec<f64>,
    /// Integrator/comparator offset per column, as an equivalent charge (C)
    /// added to every VMM read.
    column_offset: Vec<f64>,
    device: DeviceModel,
    coding: CodingConfig,
    /// Read drive (V).
    pub v_read: f64,
    /// Full write voltage across a selected device (V).
    pub v_write: f64,
    /// ADC full scale as a fraction of the worst-case integrated charge.
    pub adc_saturation_fraction: f64,
}

/// Outcome of one outer-product update.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct UpdateStats {
    /// Devices written in the (++, +−, −+, −−) phases.
    pub writes_per_phase: [usize; 4],
    /// Total unit pulses delivered to selected devices.
    pub pulses: u64,
    /// Half-selected devices whose conductance was disturbed.
    pub disturbed: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SerialWriteReport {
    pub pulses: u32,
    /// Target minus final weight, as measured by the last verify read.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    /// Zero-input ADC reading per column after calibration (in LSB).
    pub residual_lsb: Vec<f64>,
    pub pulses: u64,
}

const PHASES: [(i32, i32); 4] = [(1, 1), (1, -1), (-1, 1), (-1, -1)];

impl CrossbarCore {
    /// All weights at zero, offset row at midpoint, no integrator offsets.
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        device: DeviceModel,
        coding: CodingConfig,
    ) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(config("crossbar dimensions must be positive"));
        }
        device.validate()?;
        coding.validate()?;
        let mid = device.range().mid();
        Ok(Self {
            n_rows,
            n_cols,
            g_pos: vec![mid; n_rows * n_cols],
            g_ref: vec![mid; n_rows * n_cols],
            offset_row: vec![mid; n_cols],
            column_offset: vec![0.0; n_cols],
            device,
            coding,
            v_read: 0.785,
            v_write: 1.8,
            adc_saturation_fraction: 0.05,
        })
    }

    pub fn with_adc_saturation_fraction(mut self, f: f64) -> Self {
        self.adc_saturation_fraction = f;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.coding.validate()?;
        let n = self.n_rows * self.n_cols;
        if self.g_pos.len() != n
            || self.g_ref.len() != n
            || self.offset_row.len() != self.n_cols
            || self.column_offset.len() != self.n_cols
        {
            return Err(config("crossbar arrays do not match the stated dimensions"));
        }
        let range = self.range();
        if !self
            .g_pos
            .iter()
            .chain(&self.g_ref)
            .chain(&self.offset_row)
            .all(|&g| range.contains(g))
        {
            return Err(config("crossbar conductance outside the device range"));
        }
        if !(self.v_read > 0.0 && self.v_write > 0.0) {
            return Err(config("read and write voltages must be positive"));
        }
        if !(self.adc_saturation_fraction > 0.0) {
            return Err(config("ADC saturation fraction must be positive"));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn device(&self) -> &DeviceModel {
        &self.device
    }

    pub fn coding(&self) -> &CodingConfig {
        &self.coding
    }

    pub fn range(&self) -> ConductanceRange {
        self.device.range()
    }

    fn half_span(&self) -> f64 {
        0.5 * self.range().span()
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n_cols + j
    }

    fn check_index(&self, i: usize, j: usize) -> Result<()> {
        if i >= self.n_rows || j >= self.n_cols {
            return Err(domain(format!(
                "index ({i}, {j}) outside {}×{} core",
                self.n_rows, self.n_cols
            )));
        }
        Ok(())
    }

    /// Weight-array conductance for weight `w`, paired with the reference.
    pub fn encode_weight(&self, w: f64) -> Result<(f64, f64)> {
        if !(w.abs() <= 1.0) {
            return Err(domain(format!("weight {w} outside [-1, 1]")));
        }
        let range = self.range();
        let mid = range.mid();
        let g = if w == 1.0 {
            range.g_max
        } else if w == -1.0 {
            range.g_min
        } else {
            range.clamp(mid + w * self.half_span())
        };
        Ok((g, mid))
    }

    pub fn decode_weight(&self, g_pos: f64, g_ref: f64) -> f64 {
        (g_pos - g_ref) / self.half_span()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let k = self.idx(i, j);
        self.decode_weight(self.g_pos[k], self.g_ref[k])
    }

    /// Row-major decoded weights.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.half_span();
        self.g_pos
            .iter()
            .zip(&self.g_ref)
            .map(|(p, r)| (p - r) / h)
            .collect()
    }

    pub fn conductance(&self, i: usize, j: usize) -> f64 {
        self.g_pos[self.idx(i, j)]
    }

    pub fn conductances(&self) -> &[f64] {
        &self.g_pos
    }

    pub fn reference_conductances(&self) -> &[f64] {
        &self.g_ref
    }

    pub fn offset_row(&self) -> &[f64] {
        &self.offset_row
    }

    /// Directly places weight `w` at `(i, j)` (exact open-loop programming).
    pub fn set_weight(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        self.check_index(i, j)?;
        let (g, _) = self.encode_weight(w)?;
        let k = self.idx(i, j);
        self.g_pos[k] = g;
        Ok(())
    }

    /// Directly places a row-major weight matrix.
    pub fn set_weights(&mut self, w: &[f64]) -> Result<()> {
        if w.len() != self.n_rows * self.n_cols {
            return Err(domain("weight matrix has the wrong size"));
        }
        for (k, &wk) in w.iter().enumerate() {
            self.g_pos[k] = self.encode_weight(wk)?.0;
        }
        Ok(())
    }

    pub fn set_conductance(&mut self, i: usize, j: usize, g: f64) -> Result<()> {
        self.check_index(i, j)?;
        if !self.range().contains(g) {
            return Err(domain(format!(
                "conductance {g:e} outside the device range"
            )));
        }
        let k = self.idx(i, j);
        self.g_pos[k] = g;
        Ok(())
    }

    pub fn set_reference_conductance(&mut self, i: usize, j: usize, g: f64) -> Result<()> {
        self.check_index(i, j)?;
        if !self.range().contains(g) {
            return Err(domain(format!(
                "conductance {g:e} outside the device range"
            )));
        }
        let k = self.idx(i, j);
        self.g_ref[k] = g;
        Ok(())
    }

    /// Sets the integrator offset charge (C) of every column.
    pub fn set_column_offsets(&mut self, offsets: &[f64]) -> Result<()> {
        if offsets.len() != self.n_cols {
            return Err(domain("one offset per column required"));
        }
        self.column_offset.copy_from_slice(offsets);
        Ok(())
    }

    // ---- reads -------------------------------------------------------------

    fn unit_s(&self) -> f64 {
        f64::from(self.coding.pulse_unit_ns) * NS
    }

    /// Drive duration of the always-on offset row.
    fn offset_drive_s(&self) -> f64 {
        f64::from(self.coding.max_pulse_ns()) * NS
    }

    /// Worst-case integrated charge magnitude with `n_inputs` lines driven.
    fn worst_case_charge(&self, n_inputs: usize) -> f64 {
        n_inputs as f64
            * f64::from(self.coding.max_pulse_ns())
            * NS
            * self.v_read
            * self.half_span()
    }

    /// Charge per ADC code for reads driving `n_inputs` lines.
    pub fn adc_lsb(&self, n_inputs: usize) -> f64 {
        let full_scale = 2.0 * self.adc_saturation_fraction * self.worst_case_charge(n_inputs);
        full_scale / f64::from(1u32 << self.coding.n_bits_adc)
    }

    pub fn vmm_lsb(&self) -> f64 {
        self.adc_lsb(self.n_rows)
    }

    pub fn mvm_lsb(&self) -> f64 {
        self.adc_lsb(self.n_cols)
    }

    /// Charge contributed by one unit input code through weight 1.
    pub fn unit_charge(&self) -> f64 {
        self.unit_s() * self.v_read * self.half_span()
    }

    fn digitize(&self, q: &[f64], lsb: f64) -> DigitalVector {
        let m = self.coding.max_adc();
        let values = q
            .iter()
            .map(|&c| ((c / lsb).round().clamp(-f64::from(m), f64::from(m))) as i32)
            .collect();
        DigitalVector::new(self.coding.n_bits_adc, values).expect("ADC codes are saturated")
    }

    fn check_input(&self, x: &DigitalVector, len: usize, bits: u32, what: &str) -> Result<()> {
        if x.len() != len {
            return Err(domain(format!(
                "{what}: expected {len} inputs, got {}",
                x.len()
            )));
        }
        if x.bits() != bits {
            return Err(domain(format!(
                "{what}: expected {bits}-bit input, got {}-bit",
                x.bits()
            )));
        }
        Ok(())
    }

    /// Integrated column charges of a row-driven read, before the ADC.
    pub fn vmm_charge<R: Rng + ?Sized>(&self, x: &DigitalVector, rng: &mut R) -> Result<Vec<f64>> {
        self.check_input(x, self.n_rows, self.coding.n_bits_t, "vmm")?;
        let unit = self.unit_s();
        let noisy = self.device.read_noise_rel > 0.0;
        let mut q = vec![0.0; self.n_cols];
        for (i, &xi) in x.values().iter().enumerate() {
            if xi == 0 {
                continue;
            }
            let drive = f64::from(xi) * unit * self.v_read;
            let row = i * self.n_cols;
            let gp = &self.g_pos[row..row + self.n_cols];
            let gr = &self.g_ref[row..row + self.n_cols];
            if noisy {
                for j in 0..self.n_cols {
                    let p = self.device.apply_read_noise(gp[j], rng);
                    let r = self.device.apply_read_noise(gr[j], rng);
                    q[j] += drive * (p - r);
                }
            } else {
                for j in 0..self.n_cols {
                    q[j] += drive * (gp[j] - gr[j]);
                }
            }
        }
        let mid = self.range().mid();
        let t_off = self.offset_drive_s();
        for j in 0..self.n_cols {
            let g = if noisy {
                self.device.apply_read_noise(self.offset_row[j], rng)
            } else {
                self.offset_row[j]
            };
            q[j] += t_off * self.v_read * (g - mid) + self.column_offset[j];
        }
        Ok(q)
    }

    /// Vector-matrix multiply: drive the rows with `x`, integrate and
    /// digitize every column.
    pub fn vmm<R: Rng + ?Sized>(&self, x: &DigitalVector, rng: &mut R) -> Result<DigitalVector> {
        let q = self.vmm_charge(x, rng)?;
        Ok(self.digitize(&q, self.vmm_lsb()))
    }

    /// Integrated row charges of a column-driven (transpose) read.
    pub fn mvm_charge<R: Rng + ?Sized>(&self, x: &DigitalVector, rng: &mut R) -> Result<Vec<f64>> {
        self.check_input(x, self.n_cols, self.coding.n_bits_t, "mvm")?;
        let unit = self.unit_s();
        let noisy = self.device.read_noise_rel > 0.0;
        let drives: Vec<f64> = x
            .values()
            .iter()
            .map(|&v| f64::from(v) * unit * self.v_read)
            .collect();
        let mut q = vec![0.0; self.n_rows];
        for (i, qi) in q.iter_mut().enumerate() {
            let row = i * self.n_cols;
            let mut acc = 0.0;
            for (j, &d) in drives.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let (p, r) = if noisy {
                    (
                        self.device.apply_read_noise(self.g_pos[row + j], rng),
                        self.device.apply_read_noise(self.g_ref[row + j], rng),
                    )
                } else {
                    (self.g_pos[row + j], self.g_ref[row + j])
                };
                acc += d * (p - r);
            }
            *qi = acc;
        }
        Ok(q)
    }

    /// Matrix-vector multiply: drive the columns with `x`, read the rows.
    pub fn mvm<R: Rng + ?Sized>(&self, x: &DigitalVector, rng: &mut R) -> Result<DigitalVector> {
        let q = self.mvm_charge(x, rng)?;
        Ok(self.digitize(&q, self.mvm_lsb()))
    }

    // ---- writes ------------------------------------------------------------

    /// Per-pulse ΔG multiplier of each voltage level `0..=max_v`.
    ///
    /// Levels are placed by inverting the device's voltage response so that
    /// the response at level `k` is `k/max_v` of the response at the full
    /// write voltage. Without a voltage response the levels are linear.
    pub fn level_scales(&self, polarity: Polarity) -> Vec<f64> {
        let max_v = self.coding.max_v();
        let m = f64::from(max_v);
        match &self.device.voltage_response {
            None => (0..=max_v).map(|k| f64::from(k) / m).collect(),
            Some(vr) => {
                let top = delta_g_of_voltage(polarity.sign() * self.v_write, vr);
                if top <= 0.0 {
                    return vec![0.0; max_v as usize + 1];
                }
                (0..=max_v)
                    .map(|k| {
                        let target = top * f64::from(k) / m;
                        let v = vr.voltage_for_response(target, polarity);
                        delta_g_of_voltage(v, vr) / top
                    })
                    .collect()
            }
        }
    }

    /// Level voltages actually applied for each code magnitude.
    pub fn level_voltages(&self, polarity: Polarity) -> Vec<f64> {
        let max_v = self.coding.max_v();
        let m = f64::from(max_v);
        match &self.device.voltage_response {
            None => (0..=max_v)
                .map(|k| polarity.sign() * self.v_write * f64::from(k) / m)
                .collect(),
            Some(vr) => {
                let top = delta_g_of_voltage(polarity.sign() * self.v_write, vr);
                (0..=max_v)
                    .map(|k| vr.voltage_for_response(top * f64::from(k) / m, polarity))
                    .collect()
            }
        }
    }

    /// Relative ΔG seen by a device biased at ±V_write/3 in a phase of the
    /// given polarity. Zero whenever V_write/3 falls in the dead zone.
    pub fn half_select_scale(&self, polarity: Polarity) -> f64 {
        match &self.device.voltage_response {
            None => 0.0,
            Some(vr) => {
                let top = delta_g_of_voltage(polarity.sign() * self.v_write, vr);
                if top <= 0.0 {
                    return 0.0;
                }
                delta_g_of_voltage(polarity.sign() * self.v_write / 3.0, vr) / top
            }
        }
    }

    /// Parallel rank-1 update `W += x ⊗ s` in four sign phases.
    ///
    /// `x` is temporally coded (pulse count per row) and `s` voltage coded
    /// (level per column). In each phase only devices whose row and column
    /// signs match the phase are selected. Every other device sees at most
    /// V_write/3 and changes only if that bias is outside the dead zone of
    /// the voltage response. The reference array is never written.
    pub fn outer_update<R: Rng + ?Sized>(
        &mut self,
        x: &DigitalVector,
        s: &DigitalVector,
        rng: &mut R,
    ) -> Result<UpdateStats> {
        self.check_input(x, self.n_rows, self.coding.n_bits_t, "outer_update x")?;
        self.check_input(s, self.n_cols, self.coding.n_bits_v, "outer_update s")?;
        let set_levels = self.level_scales(Polarity::Set);
        let reset_levels = self.level_scales(Polarity::Reset);
        let half_set = self.half_select_scale(Polarity::Set);
        let half_reset = self.half_select_scale(Polarity::Reset);
        let mut stats = UpdateStats::default();

        for (phase, &(sx, ss)) in PHASES.iter().enumerate() {
            let rows: Vec<usize> = (0..self.n_rows)
                .filter(|&i| x.values()[i].signum() == sx)
                .collect();
            let cols: Vec<usize> = (0..self.n_cols)
                .filter(|&j| s.values()[j].signum() == ss)
                .collect();
            if rows.is_empty() || cols.is_empty() {
                continue;
            }
            let polarity = if sx * ss > 0 {
                Polarity::Set
            } else {
                Polarity::Reset
            };
            let levels = match polarity {
                Polarity::Set => &set_levels,
                Polarity::Reset => &reset_levels,
            };
            for &i in &rows {
                let n = x.values()[i].unsigned_abs();
                for &j in &cols {
                    let scale = levels[s.values()[j].unsigned_abs() as usize];
                    let k = self.idx(i, j);
                    self.g_pos[k] =
                        self.device
                            .apply_pulses(self.g_pos[k], polarity, n, scale, rng)?;
                    stats.pulses += u64::from(n);
                }
            }
            stats.writes_per_phase[phase] = rows.len() * cols.len();

            // V/3 biasing of everything not selected in this phase.
            let (same, opposite) = match polarity {
                Polarity::Set => (half_set, half_reset),
                Polarity::Reset => (half_reset, half_set),
            };
            if same == 0.0 && opposite == 0.0 {
                continue;
            }
            let phase_len = rows
                .iter()
                .map(|&i| x.values()[i].unsigned_abs())
                .max()
                .unwrap_or(0);
            let mut row_on = vec![false; self.n_rows];
            rows.iter().for_each(|&i| row_on[i] = true);
            let mut col_on = vec![false; self.n_cols];
            cols.iter().for_each(|&j| col_on[j] = true);
            let opposite_pol = match polarity {
                Polarity::Set => Polarity::Reset,
                Polarity::Reset => Polarity::Set,
            };
            for i in 0..self.n_rows {
                for j in 0..self.n_cols {
                    let (pol, scale, n) = match (row_on[i], col_on[j]) {
                        (true, true) => continue,
                        (true, false) => (polarity, same, x.values()[i].unsigned_abs()),
                        (false, true) => (polarity, same, phase_len),
                        (false, false) => (opposite_pol, opposite, phase_len),
                    };
                    if scale == 0.0 || n == 0 {
                        continue;
                    }
                    let k = self.idx(i, j);
                    let g = self
                        .device
                        .apply_pulses(self.g_pos[k], pol, n, scale, rng)?;
                    if g != self.g_pos[k] {
                        stats.disturbed += 1;
                    }
                    self.g_pos[k] = g;
                }
            }
        }
        Ok(stats)
    }

    /// Closed-loop program-and-verify of one weight.
    ///
    /// Each iteration reads the device, stops if the decoded weight is
    /// within `tolerance` of `target_w`, and otherwise applies one pulse
    /// toward the target. The pulse uses the full write level while the
    /// error exceeds one expected step, and a proportionally lower voltage
    /// level for the final approach.
    pub fn serial_write<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        j: usize,
        target_w: f64,
        max_pulses: u32,
        tolerance: f64,
        rng: &mut R,
    ) -> Result<SerialWriteReport> {
        self.check_index(i, j)?;
        let k = self.idx(i, j);
        let g_ref = self.g_ref[k];
        let mut g = self.g_pos[k];
        let report = self.program(&mut g, g_ref, target_w, max_pulses, tolerance, rng)?;
        self.g_pos[k] = g;
        Ok(report)
    }

    /// Closed-loop programming of one offset-row device.
    pub fn serial_write_offset<R: Rng + ?Sized>(
        &mut self,
        j: usize,
        target_w: f64,
        max_pulses: u32,
        tolerance: f64,
        rng: &mut R,
    ) -> Result<SerialWriteReport> {
        if j >= self.n_cols {
            return Err(domain(format!("offset column {j} out of range")));
        }
        let mid = self.range().mid();
        let mut g = self.offset_row[j];
        let report = self.program(&mut g, mid, target_w, max_pulses, tolerance, rng)?;
        self.offset_row[j] = g;
        Ok(report)
    }

    fn program<R: Rng + ?Sized>(
        &self,
        g: &mut f64,
        g_ref: f64,
        target_w: f64,
        max_pulses: u32,
        tolerance: f64,
        rng: &mut R,
    ) -> Result<SerialWriteReport> {
        if !(target_w.abs() <= 1.0) {
            return Err(domain(format!("target weight {target_w} outside [-1, 1]")));
        }
        let h = self.half_span();
        let max_v = self.coding.max_v();
        let set_levels = self.level_scales(Polarity::Set);
        let reset_levels = self.level_scales(Polarity::Reset);
        let mut pulses = 0;
        loop {
            let measured = self.decode_weight(self.device.apply_read_noise(*g, rng), g_ref);
            let err = target_w - measured;
            if err.abs() <= tolerance {
                return Ok(SerialWriteReport {
                    pulses,
                    residual: err,
                    converged: true,
                });
            }
            if pulses >= max_pulses {
                return Ok(SerialWriteReport {
                    pulses,
                    residual: err,
                    converged: false,
                });
            }
            let polarity = Polarity::from_sign(err);
            let step_w = self.device.mean_delta(*g, polarity)?.abs() / h;
            let level = if step_w <= 0.0 || err.abs() >= step_w {
                max_v
            } else {
                ((err.abs() / step_w * f64::from(max_v)).round() as i32).clamp(1, max_v)
            };
            let scale = match polarity {
                Polarity::Set => set_levels[level as usize],
                Polarity::Reset => reset_levels[level as usize],
            };
            *g = self.device.apply_pulses(*g, polarity, 1, scale, rng)?;
            pulses += 1;
        }
    }

    /// Zero-input read with only the offset row driven.
    pub fn zero_input_charge<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let zero = DigitalVector::zeros(self.coding.n_bits_t, self.n_rows);
        self.vmm_charge(&zero, rng)
            .expect("zero vector matches the core")
    }

    /// Programs the offset row so that a zero-input read integrates zero
    /// charge, using only measurements of the zero-input read.
    pub fn calibrate_offset_row<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
    ) -> Result<CalibrationReport> {
        let lsb = self.vmm_lsb();
        let per_weight = self.offset_drive_s() * self.v_read * self.half_span();
        // verify tolerance: a quarter LSB of charge, expressed as weight
        let tolerance = 0.25 * lsb / per_weight;
        let mid = self.range().mid();
        let mut total_pulses = 0u64;
        for _round in 0..8 {
            let q = self.zero_input_charge(rng);
            let mut changed = false;
            for j in 0..self.n_cols {
                if q[j].abs() <= 0.5 * lsb {
                    continue;
                }
                let current_w = (self.offset_row[j] - mid) / self.half_span();
                let target = (current_w - q[j] / per_weight).clamp(-1.0, 1.0);
                let report = self.serial_write_offset(j, target, 1000, tolerance, rng)?;
                total_pulses += u64::from(report.pulses);
                changed |= report.pulses > 0;
            }
            if !changed {
                break;
            }
        }
        let q = self.zero_input_charge(rng);
        Ok(CalibrationReport {
            residual_lsb: q.iter().map(|c| c / lsb).collect(),
            pulses: total_pulses,
        })
    }

    // ---- snapshots ---------------------------------------------------------

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let core: Self = serde_json::from_str(text)?;
        core.validate()?;
        Ok(core)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
