use rand_chacha::ChaCha8Rng;

use crate::device::DeviceModel;
use crate::error::{config, Result};
use crate::xbar::{stochastic_round, CodingConfig, CrossbarCore, DigitalVector};

use super::network::FloatLayer;

/// Carry schedule of a multi-device weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Carry {
    pub interval: u64,
    pub threshold: f64,
    /// Program-and-verify tolerance in device steps.
    pub tolerance_steps: f64,
    pub max_pulses: u32,
}

/// A weight matrix held on `k` crossbar cores of decreasing significance.
///
/// The effective weight is `Σ_c weight_scale · base^(k-1-c) · w_c` where
/// `w_c` is the normalized weight stored on core `c`. Core `k-1` is the
/// least significant and has the same scale as a single-core layer; it
/// receives every gradient update and is initialized with the float
/// weights. With a single core this is a plain crossbar layer.
#[derive(Debug, Clone)]
pub struct CrossbarLayer {
    n_in: usize,
    n_out: usize,
    cores: Vec<CrossbarCore>,
    base: f64,
    weight_scale: f64,
    /// Expected normalized weight change of one full-level pulse.
    step_w: f64,
    vmm_fraction: f64,
    mvm_fraction: f64,
    carry: Option<Carry>,
    updates: u64,
    pub(crate) carried: u64,
}

pub(crate) struct LayerSpec<'a> {
    pub device: &'a DeviceModel,
    pub coding: CodingConfig,
    pub weight_scale: f64,
    pub step_w: f64,
    pub z_range: f64,
    pub backprop_range: f64,
    pub cores: usize,
    pub base: f64,
    pub carry: Option<Carry>,
}

impl CrossbarLayer {
    /// Programs the float layer's weights onto the least significant core.
    pub(crate) fn from_float(init: &FloatLayer, spec: &LayerSpec<'_>) -> Result<Self> {
        if !(spec.weight_scale > 0.0 && spec.step_w > 0.0) {
            return Err(config("weight scale and update step must be positive"));
        }
        if spec.cores == 0 || (spec.cores > 1 && !(spec.base >= 2.0)) {
            return Err(config(
                "periodic carry needs at least one core and base >= 2",
            ));
        }
        let rows = init.n_in + 1;
        let mut cores = Vec::with_capacity(spec.cores);
        for c in 0..spec.cores {
            let mut core = CrossbarCore::new(rows, init.n_out, spec.device.clone(), spec.coding)?;
            if c + 1 == spec.cores {
                let w: Vec<f64> = init
                    .w
                    .iter()
                    .map(|&w| (w / spec.weight_scale).clamp(-1.0, 1.0))
                    .collect();
                core.set_weights(&w)?;
            }
            cores.push(core);
        }
        Ok(Self {
            n_in: init.n_in,
            n_out: init.n_out,
            cores,
            base: spec.base,
            weight_scale: spec.weight_scale,
            step_w: spec.step_w,
            vmm_fraction: (spec.z_range / (rows as f64 * spec.weight_scale)).min(1.0),
            mvm_fraction: (spec.backprop_range / init.n_out as f64).min(1.0),
            carry: spec.carry,
            updates: 0,
            carried: 0,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn cores(&self) -> &[CrossbarCore] {
        &self.cores
    }

    fn significance(&self, c: usize) -> f64 {
        self.weight_scale * self.base.powi((self.cores.len() - 1 - c) as i32)
    }

    /// ADC range of core `c`, narrowed by its significance so every core
    /// digitizes the same span of pre-activation or error.
    fn adc_fraction(&self, base_fraction: f64, c: usize) -> f64 {
        base_fraction * self.weight_scale / self.significance(c)
    }

    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; (self.n_in + 1) * self.n_out];
        for (c, core) in self.cores.iter().enumerate() {
            let s = self.significance(c);
            for (acc, v) in w.iter_mut().zip(core.weights()) {
                *acc += s * v;
            }
        }
        w
    }

    pub(crate) fn forward(&mut self, x: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let mut xs = x.to_vec();
        xs.push(1.0);
        let coding = *self.cores[0].coding();
        let xq = DigitalVector::quantize(&xs, 1.0, coding.n_bits_t);
        let mut z = vec![0.0; self.n_out];
        for c in 0..self.cores.len() {
            let s = self.significance(c);
            let frac = self.adc_fraction(self.vmm_fraction, c);
            let core = &mut self.cores[c];
            core.adc_saturation_fraction = frac;
            let codes = core.vmm(&xq, rng)?;
            let scale = core.vmm_lsb() / (core.unit_charge() * f64::from(coding.max_t())) * s;
            for (zj, &q) in z.iter_mut().zip(codes.values()) {
                *zj += f64::from(q) * scale;
            }
        }
        Ok(z)
    }

    pub(crate) fn backward(&mut self, delta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let dmax = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut e = vec![0.0; self.n_in];
        if dmax == 0.0 {
            return Ok(e);
        }
        let coding = *self.cores[0].coding();
        let dq = DigitalVector::quantize(delta, dmax, coding.n_bits_t);
        for c in 0..self.cores.len() {
            let s = self.significance(c);
            let frac = self.adc_fraction(self.mvm_fraction, c);
            let core = &mut self.cores[c];
            core.adc_saturation_fraction = frac;
            let codes = core.mvm(&dq, rng)?;
            let scale =
                core.mvm_lsb() / (core.unit_charge() * f64::from(coding.max_t())) * s * dmax;
            for (ei, &q) in e.iter_mut().zip(codes.values()) {
                *ei += f64::from(q) * scale;
            }
        }
        Ok(e)
    }

    /// Applies `W -= lr·[x; 1] ⊗ delta` as one parallel outer-product
    /// update of the least significant core. Row pulse counts and column
    /// voltage levels are stochastically rounded so the expected change
    /// equals the requested one.
    pub(crate) fn update(
        &mut self,
        x: &[f64],
        delta: &[f64],
        lr: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<()> {
        let gmax = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        if gmax > 0.0 {
            let lsb = self.cores.len() - 1;
            let coding = *self.cores[lsb].coding();
            let max_t = coding.max_t();
            let max_v = coding.max_v();
            let pulses_per_x = lr * gmax / (self.significance(lsb) * self.step_w);
            let rows: Vec<i32> = x
                .iter()
                .chain(std::iter::once(&1.0))
                .map(|&xi| stochastic_round(xi * pulses_per_x, rng).clamp(0, max_t))
                .collect();
            let cols: Vec<i32> = delta
                .iter()
                .map(|&d| stochastic_round(-d / gmax * f64::from(max_v), rng).clamp(-max_v, max_v))
                .collect();
            let xr = DigitalVector::new(coding.n_bits_t, rows)?;
            let sc = DigitalVector::new(coding.n_bits_v, cols)?;
            self.cores[lsb].outer_update(&xr, &sc, rng)?;
        }
        self.updates += 1;
        if let Some(carry) = self.carry {
            if self.cores.len() > 1 && self.updates.is_multiple_of(carry.interval) {
                self.carry_pass(&carry, rng)?;
            }
        }
        Ok(())
    }

    /// Moves the content of devices past the threshold into the next more
    /// significant core, least significant level first. The moved amount is
    /// what the upper device actually changed by, and the lower device is
    /// reprogrammed to the remainder.
    fn carry_pass(&mut self, carry: &Carry, rng: &mut ChaCha8Rng) -> Result<()> {
        let tol = carry.tolerance_steps * self.step_w;
        for c in (1..self.cores.len()).rev() {
            let (upper, lower) = self.cores.split_at_mut(c);
            let (hi, lo) = (&mut upper[c - 1], &mut lower[0]);
            for i in 0..self.n_in + 1 {
                for j in 0..self.n_out {
                    let w = lo.weight(i, j);
                    if w.abs() < carry.threshold {
                        continue;
                    }
                    let before = hi.weight(i, j);
                    let target = (before + w / self.base).clamp(-1.0, 1.0);
                    hi.serial_write(i, j, target, carry.max_pulses, tol, rng)?;
                    let moved = hi.weight(i, j) - before;
                    let rest = (w - moved * self.base).clamp(-1.0, 1.0);
                    lo.serial_write(i, j, rest, carry.max_pulses, tol, rng)?;
                    self.carried += 1;
                }
            }
        }
        Ok(())
    }
}
