//! Co-design simulator for analog ReRAM neural-training cores.
//!
//! - [`device`]: select-device I–V, voltage response and stochastic
//!   conductance updates of a single cell.
//! - [`xbar`]: numerical crossbar core with the VMM, MVM and outer-product
//!   update kernels, serial access and offset calibration.
//! - [`perf`]: closed-form area, energy and latency models for analog ReRAM,
//!   digital ReRAM and SRAM cores, plus physical constraint checks.
//! - [`charlab`]: pulse-trace ingestion, ΔG-vs-G₀ table construction and
//!   voltage-response fitting.
//! - [`train`]: MNIST loader and MLP backpropagation on float weights or on
//!   crossbar-backed weights, including periodic carry.

pub mod charlab;
pub mod device;
mod error;
pub mod perf;
pub mod train;
pub mod xbar;

pub use device::{
    ConductanceRange, ConductanceTable, DeviceModel, Polarity, SelectDeviceParams,
    VoltageResponseParams,
};
pub use error::{Error, Result};
pub use perf::{CoreConfig, CostReport, Variant};
pub use xbar::{CodingConfig, CrossbarCore, DigitalVector};
