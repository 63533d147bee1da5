//! MLP backpropagation on MNIST with float weights or crossbar-backed
//! weights, including device-error ablations and multi-device periodic
//! carry.

mod crossbar;
mod mnist;
mod network;

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::device::{AnalyticUpdateParams, ConductanceRange, DeviceModel};
use crate::error::{config, Error, Result};
use crate::xbar::CodingConfig;

pub use crossbar::CrossbarLayer;
pub use mnist::{
    load_mnist, read_idx_images, read_idx_labels, Dataset, Mnist, TEST_IMAGES, TEST_LABELS,
    TRAIN_IMAGES, TRAIN_LABELS,
};
pub use network::{argmax, sigmoid, FloatLayer, Layer, Network, StepResult};

use crossbar::{Carry, LayerSpec};

/// Which device errors a crossbar run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblationMode {
    /// The device as given.
    Full,
    /// Write stochasticity removed, state dependence kept.
    NoNoise,
    /// Ideal fixed step equal to the device's average step.
    Linearized,
    /// Ideal fine-step device, no read noise, no half-select response.
    Numeric,
}

impl AblationMode {
    pub const ALL: [AblationMode; 4] = [
        AblationMode::Numeric,
        AblationMode::Linearized,
        AblationMode::NoNoise,
        AblationMode::Full,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoNoise => "no-noise",
            AblationMode::Linearized => "linearized",
            AblationMode::Numeric => "numeric",
        }
    }
}

impl fmt::Display for AblationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(AblationMode::Full),
            "no-noise" => Ok(AblationMode::NoNoise),
            "linearized" => Ok(AblationMode::Linearized),
            "numeric" => Ok(AblationMode::Numeric),
            _ => Err(config(format!(
                "unknown mode '{s}' (expected full, no-noise, linearized or numeric)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub layer_sizes: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Train on the first `n` training samples only.
    pub train_subset: Option<usize>,
    pub test_subset: Option<usize>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            layer_sizes: vec![784, 300, 10],
            learning_rate: 0.1,
            epochs: 20,
            seed: 1,
            train_subset: None,
            test_subset: None,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self, data: &Mnist) -> Result<()> {
        if self.layer_sizes.len() < 2 || self.layer_sizes.contains(&0) {
            return Err(config("layer_sizes needs at least two positive widths"));
        }
        if self.layer_sizes[0] != data.train.n_features {
            return Err(config(format!(
                "first layer width {} does not match {} input features",
                self.layer_sizes[0], data.train.n_features
            )));
        }
        let out = self.layer_sizes[self.layer_sizes.len() - 1];
        if out != data.train.n_classes {
            return Err(config(format!(
                "output width {out} does not match {} classes",
                data.train.n_classes
            )));
        }
        if !(self.learning_rate > 0.0) {
            return Err(config("learning rate must be positive"));
        }
        Ok(())
    }
}

/// Crossbar mapping shared by every layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossbarConfig {
    pub device: DeviceModel,
    pub coding: CodingConfig,
    /// Float weight represented by a normalized weight of 1, per layer.
    pub weight_scale: Vec<f64>,
    /// Pre-activation magnitude at ADC full scale in forward reads.
    pub z_range: f64,
    /// Backpropagated error at ADC full scale, relative to the largest
    /// incoming error times the weight scale.
    pub backprop_range: f64,
    /// Step of the ideal device used in `Numeric` mode (normalized weight).
    pub numeric_step: f64,
}

impl Default for CrossbarConfig {
    fn default() -> Self {
        Self {
            device: analytic_device(5.0, 0.3, 0.004),
            coding: CodingConfig::EIGHT_BIT,
            weight_scale: vec![1.0, 4.0],
            z_range: 8.0,
            backprop_range: 2.0,
            numeric_step: 1.0 / 1024.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PeriodicCarryConfig {
    pub devices_per_weight: usize,
    /// Significance ratio between adjacent devices.
    pub base: f64,
    /// Updates between carry passes.
    pub carry_interval: u64,
    /// Normalized weight magnitude (fraction of the half range) that
    /// triggers a carry.
    pub carry_threshold: f64,
    /// Program-and-verify tolerance of carry writes, in average device
    /// steps.
    pub write_tolerance_steps: f64,
    /// Pulse budget of each program-and-verify write.
    pub max_pulses: u32,
}

impl Default for PeriodicCarryConfig {
    fn default() -> Self {
        Self {
            devices_per_weight: 3,
            base: 8.0,
            carry_interval: 1000,
            carry_threshold: 0.8,
            write_tolerance_steps: 0.25,
            max_pulses: 2000,
        }
    }
}

impl PeriodicCarryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.devices_per_weight == 0 {
            return Err(config("devices_per_weight must be at least 1"));
        }
        if self.devices_per_weight > 1 && !(self.base >= 2.0) {
            return Err(config("carry base must be at least 2"));
        }
        if self.carry_interval == 0 {
            return Err(config("carry interval must be at least 1"));
        }
        if !(self.carry_threshold > 0.0 && self.carry_threshold <= 1.0) {
            return Err(config("carry threshold must be in (0, 1]"));
        }
        if !(self.write_tolerance_steps > 0.0) {
            return Err(config("carry write tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Backend {
    Numeric,
    Crossbar {
        xbar: CrossbarConfig,
        mode: AblationMode,
    },
    PeriodicCarry {
        xbar: CrossbarConfig,
        mode: AblationMode,
        carry: PeriodicCarryConfig,
    },
}

impl Backend {
    pub fn name(&self) -> &'static str {
        match self {
            Backend::Numeric => "numeric",
            Backend::Crossbar { .. } => "crossbar",
            Backend::PeriodicCarry { .. } => "periodic-carry",
        }
    }

    pub fn mode(&self) -> Option<AblationMode> {
        match self {
            Backend::Numeric => None,
            Backend::Crossbar { mode, .. } | Backend::PeriodicCarry { mode, .. } => Some(*mode),
        }
    }
}

/// Analytic device on the reference 1–10 nS window whose step, averaged
/// over the window and both polarities, is `mean_step_w` of the half range.
pub fn analytic_device(beta: f64, sigma_rel: f64, mean_step_w: f64) -> DeviceModel {
    let range = ConductanceRange {
        g_min: 1e-9,
        g_max: 1e-8,
    };
    let shape = if beta > 0.0 {
        (1.0 - (-beta).exp()) / beta
    } else {
        1.0
    };
    let a = mean_step_w * 0.5 * range.span() / shape;
    DeviceModel::analytic(AnalyticUpdateParams {
        a_p: a,
        a_n: a,
        beta_p: beta,
        beta_n: beta,
        sigma_rel,
        range,
    })
}

/// Device actually simulated under an ablation mode.
pub fn ablate(device: &DeviceModel, mode: AblationMode, numeric_step: f64) -> Result<DeviceModel> {
    Ok(match mode {
        AblationMode::Full => device.clone(),
        AblationMode::NoNoise => device.without_write_noise(),
        AblationMode::Linearized => device.linearized()?,
        AblationMode::Numeric => {
            let range = device.range();
            DeviceModel::ideal(range, numeric_step * 0.5 * range.span())
        }
    })
}

/// Average normalized weight change of one full-level pulse.
pub fn nominal_step(device: &DeviceModel) -> Result<f64> {
    let lin = device.linearized()?;
    match lin.kind {
        crate::device::UpdateKind::Ideal(p) => Ok(p.step / (0.5 * p.range.span())),
        _ => unreachable!("linearized devices are ideal"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_acc: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub backend: String,
    pub mode: Option<AblationMode>,
    pub seed: u64,
    pub epochs: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub initial_test_acc: f64,
    pub final_test_acc: f64,
    pub best_test_acc: f64,
    /// Device-level carries performed (periodic carry only).
    pub carries: u64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub history: Vec<EpochRecord>,
    pub summary: TrainSummary,
    pub network: Network,
}

/// Writes `epoch,train_acc,test_acc` lines.
pub fn write_history<W: std::io::Write>(history: &[EpochRecord], w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    out.write_record(["epoch", "train_acc", "test_acc"])?;
    for r in history {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

fn input(img: &[f32]) -> Vec<f64> {
    img.iter().map(|&p| f64::from(p)).collect()
}

/// Test accuracy. Reads draw only from `rng`, never from the training stream.
pub fn evaluate(net: &mut Network, data: &Dataset, rng: &mut ChaCha8Rng) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0usize;
    for k in 0..data.len() {
        if net.predict(&input(data.image(k)), rng)? == data.label(k) {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Builds the network for `backend` from the seeded float initialization.
pub fn build_network(
    cfg: &NetworkConfig,
    backend: &Backend,
    rng: &mut ChaCha8Rng,
) -> Result<Network> {
    let float = Network::float(&cfg.layer_sizes, rng)?;
    let (xbar, mode, carry) = match backend {
        Backend::Numeric => return Ok(float),
        Backend::Crossbar { xbar, mode } => (xbar, *mode, None),
        Backend::PeriodicCarry { xbar, mode, carry } => {
            carry.validate()?;
            (xbar, *mode, Some(*carry))
        }
    };
    let n_layers = float.layers.len();
    if xbar.weight_scale.len() != n_layers {
        return Err(config(format!(
            "{} weight scales given for {n_layers} layers",
            xbar.weight_scale.len()
        )));
    }
    let device = ablate(&xbar.device, mode, xbar.numeric_step)?;
    let step_w = nominal_step(&device)?;
    let layers = float
        .layers
        .iter()
        .zip(&xbar.weight_scale)
        .map(|(layer, &ws)| {
            let Layer::Float(f) = layer else {
                unreachable!("fresh networks are float")
            };
            let spec = LayerSpec {
                device: &device,
                coding: xbar.coding,
                weight_scale: ws,
                step_w,
                z_range: xbar.z_range,
                backprop_range: xbar.backprop_range,
                cores: carry.map_or(1, |c| c.devices_per_weight),
                base: carry.map_or(2.0, |c| c.base),
                carry: carry.map(|c| Carry {
                    interval: c.carry_interval,
                    threshold: c.carry_threshold,
                    tolerance_steps: c.write_tolerance_steps,
                    max_pulses: c.max_pulses,
                }),
            };
            Ok(Layer::Crossbar(CrossbarLayer::from_float(f, &spec)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

/// Full training run. `on_epoch` sees each record as it is produced.
pub fn train_with(
    cfg: &NetworkConfig,
    backend: &Backend,
    data: &Mnist,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome> {
    cfg.validate(data)?;
    let train = match cfg.train_subset {
        Some(n) => data.train.head(n),
        None => data.train.clone(),
    };
    let test = match cfg.test_subset {
        Some(n) => data.test.head(n),
        None => data.test.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    eval_rng.set_stream(1);

    let mut net = build_network(cfg, backend, &mut rng)?;
    let initial = evaluate(&mut net, &test, &mut eval_rng)?;
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut correct = 0usize;
        for &k in &order {
            let step = net.train_step(
                &input(train.image(k)),
                &train.target(k),
                cfg.learning_rate,
                &mut rng,
            )?;
            if step.predicted == train.label(k) {
                correct += 1;
            }
        }
        let rec = EpochRecord {
            epoch,
            train_acc: if train.is_empty() {
                0.0
            } else {
                correct as f64 / train.len() as f64
            },
            test_acc: evaluate(&mut net, &test, &mut eval_rng)?,
        };
        on_epoch(&rec);
        history.push(rec);
    }
    let final_test_acc = history.last().map_or(initial, |r| r.test_acc);
    let best_test_acc = history.iter().map(|r| r.test_acc).fold(initial, f64::max);
    let carries = net
        .layers
        .iter()
        .map(|l| match l {
            Layer::Crossbar(c) => c.carried,
            Layer::Float(_) => 0,
        })
        .sum();
    Ok(TrainOutcome {
        summary: TrainSummary {
            backend: backend.name().to_owned(),
            mode: backend.mode(),
            seed: cfg.seed,
            epochs: cfg.epochs,
            train_samples: train.len(),
            test_samples: test.len(),
            initial_test_acc: initial,
            final_test_acc,
            best_test_acc,
            carries,
        },
        history,
        network: net,
    })
}

pub fn train_numeric(cfg: &NetworkConfig, data: &Mnist) -> Result<TrainOutcome> {
    train_with(cfg, &Backend::Numeric, data, |_| {})
}

pub fn train_crossbar(
    cfg: &NetworkConfig,
    xbar: &CrossbarConfig,
    mode: AblationMode,
    data: &Mnist,
) -> Result<TrainOutcome> {
    let backend = Backend::Crossbar {
        xbar: xbar.clone(),
        mode,
    };
    train_with(cfg, &backend, data, |_| {})
}

pub fn train_periodic_carry(
    cfg: &NetworkConfig,
    xbar: &CrossbarConfig,
    mode: AblationMode,
    carry: &PeriodicCarryConfig,
    data: &Mnist,
) -> Result<TrainOutcome> {
    let backend = Backend::PeriodicCarry {
        xbar: xbar.clone(),
        mode,
        carry: *carry,
    };
    train_with(cfg, &backend, data, |_| {})
}

#[cfg(test)]
mod tests;
