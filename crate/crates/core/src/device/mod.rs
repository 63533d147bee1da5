//! Single ReRAM cell in series with a select device.
//!
//! Three update behaviours are supported: an ideal fixed step, an analytic
//! state-dependent step with multiplicative Gaussian stochasticity, and an
//! empirical ΔG-vs-G₀ lookup table sampled by inverse CDF.

mod table;

use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Error, Result};

pub use table::{ConductanceTable, EmpiricalCdf};

/// Symmetrized-diode select device: `I = sign(V)·i0·(exp(|V|/v0) − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectDeviceParams {
    /// Saturation current (A).
    pub i0: f64,
    /// Characteristic voltage (V).
    pub v0: f64,
}

impl Default for SelectDeviceParams {
    fn default() -> Self {
        Self {
            i0: 8.7e-18,
            v0: 0.037,
        }
    }
}

impl SelectDeviceParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.i0 > 0.0 && self.v0 > 0.0) {
            return Err(config("select device needs i0 > 0 and v0 > 0"));
        }
        Ok(())
    }
}

pub fn select_current(v: f64, p: &SelectDeviceParams) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    v.signum() * p.i0 * (v.abs() / p.v0).exp_m1()
}

/// Exponential voltage dependence of the conductance change, with a dead
/// zone between `v_min_n` and `v_min_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageResponseParams {
    /// Positive-branch exponent (1/V).
    pub d1: f64,
    /// Negative-branch exponent (1/V).
    pub d2: f64,
    /// Smallest positive voltage that changes the state (V).
    pub v_min_p: f64,
    /// Smallest-magnitude negative voltage that changes the state (V, < 0).
    pub v_min_n: f64,
}

impl Default for VoltageResponseParams {
    fn default() -> Self {
        Self {
            d1: 3.0,
            d2: 3.0,
            v_min_p: 0.8,
            v_min_n: -0.8,
        }
    }
}

impl VoltageResponseParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d1 > 0.0 && self.d2 > 0.0) {
            return Err(config("voltage response needs d1 > 0 and d2 > 0"));
        }
        if !(self.v_min_p > 0.0 && self.v_min_n < 0.0) {
            return Err(config("voltage response needs v_min_p > 0 and v_min_n < 0"));
        }
        Ok(())
    }

    /// Inverse of [`delta_g_of_voltage`] on one branch: the voltage whose
    /// normalized response magnitude equals `response` (≥ 0).
    pub fn voltage_for_response(&self, response: f64, polarity: Polarity) -> f64 {
        let r = response.max(0.0);
        match polarity {
            Polarity::Set => self.v_min_p + r.ln_1p() / self.d1,
            Polarity::Reset => self.v_min_n - r.ln_1p() / self.d2,
        }
    }
}

/// Normalized conductance change produced by a pulse of amplitude `v`.
/// Positive above `v_min_p`, positive magnitude below `v_min_n` (the caller
/// applies the RESET sign), zero in between.
pub fn delta_g_of_voltage(v: f64, p: &VoltageResponseParams) -> f64 {
    if v > p.v_min_p {
        (p.d1 * (v - p.v_min_p)).exp_m1()
    } else if v < p.v_min_n {
        (p.d2 * (p.v_min_n - v)).exp_m1()
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Conductance-increasing pulse.
    Set,
    /// Conductance-decreasing pulse.
    Reset,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Set => 1.0,
            Polarity::Reset => -1.0,
        }
    }

    pub fn from_sign(s: f64) -> Self {
        if s >= 0.0 {
            Polarity::Set
        } else {
            Polarity::Reset
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceRange {
    pub g_min: f64,
    pub g_max: f64,
}

impl Default for ConductanceRange {
    /// 100 MΩ on-state with an on/off ratio of 10.
    fn default() -> Self {
        Self {
            g_min: 1e-9,
            g_max: 1e-8,
        }
    }
}

impl ConductanceRange {
    pub fn new(g_min: f64, g_max: f64) -> Result<Self> {
        let r = Self { g_min, g_max };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.g_min > 0.0 && self.g_min < self.g_max && self.g_max.is_finite()) {
            return Err(config(format!(
                "conductance range needs 0 < g_min < g_max (got {} .. {})",
                self.g_min, self.g_max
            )));
        }
        Ok(())
    }

    pub fn span(&self) -> f64 {
        self.g_max - self.g_min
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.g_min + self.g_max)
    }

    pub fn clamp(&self, g: f64) -> f64 {
        g.clamp(self.g_min, self.g_max)
    }

    pub fn contains(&self, g: f64) -> bool {
        g >= self.g_min && g <= self.g_max
    }

    /// Position of `g` in the range, 0 at `g_min` and 1 at `g_max`.
    pub fn fraction(&self, g: f64) -> f64 {
        (g - self.g_min) / self.span()
    }
}

/// State-independent, noise-free device: every full pulse moves the
/// conductance by exactly `step`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealParams {
    pub step: f64,
    pub range: ConductanceRange,
}

/// Exponential state dependence per polarity with multiplicative Gaussian
/// write noise.
///
/// Mean SET step is `a_p·exp(−beta_p·f)` and mean RESET step is
/// `−a_n·exp(−beta_n·(1 − f))`, where `f` is the position of `g0` in the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticUpdateParams {
    pub a_p: f64,
    pub a_n: f64,
    pub beta_p: f64,
    pub beta_n: f64,
    pub sigma_rel: f64,
    pub range: ConductanceRange,
}

impl AnalyticUpdateParams {
    pub fn validate(&self) -> Result<()> {
        self.range.validate()?;
        if !(self.a_p > 0.0 && self.a_n > 0.0) {
            return Err(config("analytic device needs a_p > 0 and a_n > 0"));
        }
        if !(self.beta_p >= 0.0 && self.beta_n >= 0.0 && self.sigma_rel >= 0.0) {
            return Err(config(
                "analytic device needs beta_p, beta_n, sigma_rel >= 0",
            ));
        }
        Ok(())
    }

    pub fn mean_delta(&self, g0: f64, polarity: Polarity) -> f64 {
        let f = self.range.fraction(g0);
        match polarity {
            Polarity::Set => self.a_p * (-self.beta_p * f).exp(),
            Polarity::Reset => -self.a_n * (-self.beta_n * (1.0 - f)).exp(),
        }
    }
}

impl AnalyticUpdateParams {
    /// State after `n` pulses of relative size `scale` along the continuous
    /// mean trajectory, plus `z` standard deviations of the summed
    /// per-pulse noise.
    ///
    /// With `x` the distance from the edge the pulses move away from and
    /// `b = scale·a`, `dx/dn = b·exp(−u·x)` with `u = beta/span`, so
    /// `x_n = x_0 + ln(1 + u·b·n·exp(−u·x_0))/u`. A perturbation at pulse
    /// `k` shrinks by `exp(u·(x_k − x_n))` before the end, so the summed
    /// noise has standard deviation `σ·b·sqrt(n)·exp(−u·x_n)`.
    pub fn lumped_pulses(&self, g0: f64, polarity: Polarity, n: f64, scale: f64, z: f64) -> f64 {
        let span = self.range.span();
        let (a, beta, x0) = match polarity {
            Polarity::Set => (self.a_p, self.beta_p, g0 - self.range.g_min),
            Polarity::Reset => (self.a_n, self.beta_n, self.range.g_max - g0),
        };
        let u = beta / span;
        let first = scale * a * (-u * x0).exp();
        let growth = u * first * n;
        let dx = if u > 0.0 {
            growth.ln_1p() / u
        } else {
            first * n
        };
        let sd = self.sigma_rel * first * n.sqrt() / (1.0 + growth);
        polarity.sign() * (dx + sd * z) + g0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum UpdateKind {
    Ideal(IdealParams),
    Analytic(AnalyticUpdateParams),
    Table(ConductanceTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceModel {
    pub kind: UpdateKind,
    #[serde(default)]
    pub voltage_response: Option<VoltageResponseParams>,
    #[serde(default)]
    pub select: SelectDeviceParams,
    #[serde(default)]
    pub read_noise_rel: f64,
}

impl DeviceModel {
    pub fn ideal(range: ConductanceRange, step: f64) -> Self {
        Self::from_kind(UpdateKind::Ideal(IdealParams { step, range }))
    }

    pub fn analytic(params: AnalyticUpdateParams) -> Self {
        Self::from_kind(UpdateKind::Analytic(params))
    }

    pub fn table(table: ConductanceTable) -> Self {
        Self::from_kind(UpdateKind::Table(table))
    }

    fn from_kind(kind: UpdateKind) -> Self {
        Self {
            kind,
            voltage_response: None,
            select: SelectDeviceParams::default(),
            read_noise_rel: 0.0,
        }
    }

    pub fn with_read_noise(mut self, rel: f64) -> Self {
        self.read_noise_rel = rel;
        self
    }

    pub fn with_voltage_response(mut self, vr: VoltageResponseParams) -> Self {
        self.voltage_response = Some(vr);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            UpdateKind::Ideal(p) => {
                p.range.validate()?;
                if !(p.step > 0.0) {
                    return Err(config("ideal device needs step > 0"));
                }
            }
            UpdateKind::Analytic(p) => p.validate()?,
            UpdateKind::Table(t) => t.validate()?,
        }
        if let Some(vr) = &self.voltage_response {
            vr.validate()?;
        }
        self.select.validate()?;
        if !(self.read_noise_rel >= 0.0) {
            return Err(config("read_noise_rel must be >= 0"));
        }
        Ok(())
    }

    pub fn range(&self) -> ConductanceRange {
        match &self.kind {
            UpdateKind::Ideal(p) => p.range,
            UpdateKind::Analytic(p) => p.range,
            UpdateKind::Table(t) => t.range(),
        }
    }

    pub fn is_ideal(&self) -> bool {
        matches!(self.kind, UpdateKind::Ideal(_))
    }

    fn check_in_range(&self, g0: f64) -> Result<ConductanceRange> {
        let range = self.range();
        if !range.contains(g0) {
            return Err(domain(format!(
                "conductance {g0:e} S outside [{:e}, {:e}]",
                range.g_min, range.g_max
            )));
        }
        Ok(range)
    }

    /// Expected signed conductance change of one full-strength pulse at `g0`.
    pub fn mean_delta(&self, g0: f64, polarity: Polarity) -> Result<f64> {
        self.check_in_range(g0)?;
        match &self.kind {
            UpdateKind::Ideal(p) => Ok(polarity.sign() * p.step),
            UpdateKind::Analytic(p) => Ok(p.mean_delta(g0, polarity)),
            UpdateKind::Table(t) => t.mean_delta(g0, polarity),
        }
    }

    /// One stochastic draw of the signed conductance change of a full pulse,
    /// before clipping.
    pub fn sample_delta<R: Rng + ?Sized>(
        &self,
        g0: f64,
        polarity: Polarity,
        rng: &mut R,
    ) -> Result<f64> {
        self.check_in_range(g0)?;
        match &self.kind {
            UpdateKind::Ideal(p) => Ok(polarity.sign() * p.step),
            UpdateKind::Analytic(p) => {
                let mean = p.mean_delta(g0, polarity);
                if p.sigma_rel == 0.0 {
                    Ok(mean)
                } else {
                    let z: f64 = rng.sample(StandardNormal);
                    Ok(mean * (1.0 + p.sigma_rel * z))
                }
            }
            UpdateKind::Table(t) => t.sample_delta(g0, polarity, rng.random::<f64>()),
        }
    }

    /// Conductance after one full pulse from `g0`, clipped to the range.
    pub fn sample_update<R: Rng + ?Sized>(
        &self,
        g0: f64,
        polarity: Polarity,
        rng: &mut R,
    ) -> Result<f64> {
        let dg = self.sample_delta(g0, polarity, rng)?;
        Ok(self.range().clamp(g0 + dg))
    }

    /// Conductance after `n` pulses whose per-pulse change is scaled by
    /// `scale` (the voltage-level response). Ideal devices take the closed
    /// form. Analytic devices follow the continuous mean trajectory with the
    /// per-pulse noise aggregated into one Gaussian draw. Tables are stepped
    /// pulse by pulse.
    pub fn apply_pulses<R: Rng + ?Sized>(
        &self,
        g0: f64,
        polarity: Polarity,
        n: u32,
        scale: f64,
        rng: &mut R,
    ) -> Result<f64> {
        let range = self.check_in_range(g0)?;
        if n == 0 || scale == 0.0 {
            return Ok(g0);
        }
        match &self.kind {
            UpdateKind::Ideal(p) => {
                return Ok(range.clamp(g0 + polarity.sign() * p.step * scale * f64::from(n)));
            }
            UpdateKind::Analytic(p) if n > 1 => {
                let z: f64 = if p.sigma_rel > 0.0 {
                    rng.sample(StandardNormal)
                } else {
                    0.0
                };
                return Ok(range.clamp(p.lumped_pulses(g0, polarity, f64::from(n), scale, z)));
            }
            _ => {}
        }
        let mut g = g0;
        for _ in 0..n {
            let dg = self.sample_delta(g, polarity, rng)?;
            g = range.clamp(g + scale * dg);
        }
        Ok(g)
    }

    /// Multiplicative Gaussian read fluctuation, clipped at zero.
    pub fn apply_read_noise<R: Rng + ?Sized>(&self, g: f64, rng: &mut R) -> f64 {
        if self.read_noise_rel == 0.0 || g == 0.0 {
            return g;
        }
        let z: f64 = rng.sample(StandardNormal);
        (g * (1.0 + self.read_noise_rel * z)).max(0.0)
    }

    /// Same device with write stochasticity removed.
    pub fn without_write_noise(&self) -> Self {
        let mut out = self.clone();
        match &mut out.kind {
            UpdateKind::Analytic(p) => p.sigma_rel = 0.0,
            UpdateKind::Table(t) => *t = t.deterministic(),
            UpdateKind::Ideal(_) => {}
        }
        out
    }

    /// Ideal device whose step equals the average mean |ΔG| of this device
    /// over its range and both polarities.
    pub fn linearized(&self) -> Result<Self> {
        let range = self.range();
        let n = 256;
        let mut acc = 0.0;
        let mut count = 0usize;
        for k in 0..n {
            let g = range.g_min + range.span() * (k as f64 + 0.5) / n as f64;
            for pol in [Polarity::Set, Polarity::Reset] {
                match self.mean_delta(g, pol) {
                    Ok(d) => {
                        acc += d.abs();
                        count += 1;
                    }
                    // absent table bins carry no information
                    Err(Error::Domain(_)) => {}
                    Err(e) => return Err(e),
                }
            }
        }
        if count == 0 {
            return Err(domain("device has no populated update statistics"));
        }
        let mut out = Self::ideal(range, acc / count as f64);
        out.voltage_response = self.voltage_response;
        out.select = self.select;
        out.read_noise_rel = self.read_noise_rel;
        Ok(out)
    }

    /// Loads either a full device-model document or a bare conductance
    /// table (as written by the characterization pipeline).
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let model = if value.get("kind").is_some() {
            serde_json::from_value::<DeviceModel>(value)?
        } else if value.get("bin_edges").is_some() {
            DeviceModel::table(serde_json::from_value::<ConductanceTable>(value)?)
        } else {
            return Err(Error::Format(format!(
                "{}: neither a device model nor a conductance table",
                path.display()
            )));
        };
        model.validate()?;
        Ok(model)
    }
}
