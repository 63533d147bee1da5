//! Analog neural core: VMM, MVM and outer-product update on a ReRAM
//! crossbar with a fixed reference array and an offset-correction row.

mod coding;
mod core;

pub(crate) use self::coding::stochastic_round;
pub use self::coding::{max_code, temporal_encode, CodingConfig, DigitalVector, Pulse};
pub use self::core::{CalibrationReport, CrossbarCore, SerialWriteReport, UpdateStats};

#[cfg(test)]
mod tests;
