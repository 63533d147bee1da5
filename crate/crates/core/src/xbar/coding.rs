use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::device::Polarity;
use crate::error::{config, domain, Result};

/// Bit widths and pulse timing of the analog core's digital interfaces.
/// Every width includes one sign bit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingConfig {
    /// Temporal (pulse-length) coding of inputs and outputs.
    pub n_bits_t: u32,
    /// Voltage-level coding used by the update.
    pub n_bits_v: u32,
    pub n_bits_adc: u32,
    /// Length of one unit pulse.
    pub pulse_unit_ns: u32,
}

impl CodingConfig {
    /// 8-bit inputs/outputs with an 8×4-bit update.
    pub const EIGHT_BIT: Self = Self {
        n_bits_t: 8,
        n_bits_v: 4,
        n_bits_adc: 8,
        pulse_unit_ns: 1,
    };
    /// 4-bit inputs/outputs with a 4×2-bit update.
    pub const FOUR_BIT: Self = Self {
        n_bits_t: 4,
        n_bits_v: 2,
        n_bits_adc: 4,
        pulse_unit_ns: 1,
    };
    /// One data bit plus sign; pulses stretched to 7 ns.
    pub const TWO_BIT: Self = Self {
        n_bits_t: 2,
        n_bits_v: 2,
        n_bits_adc: 2,
        pulse_unit_ns: 7,
    };

    pub fn for_bits(bits: u32) -> Result<Self> {
        match bits {
            8 => Ok(Self::EIGHT_BIT),
            4 => Ok(Self::FOUR_BIT),
            2 => Ok(Self::TWO_BIT),
            _ => Err(config(format!(
                "unsupported bit width {bits} (expected 8, 4 or 2)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.n_bits_t) || !(2..=16).contains(&self.n_bits_adc) {
            return Err(config("temporal and ADC widths must be in 2..=16 bits"));
        }
        if !(2..=self.n_bits_t).contains(&self.n_bits_v) {
            return Err(config("voltage width must be in 2..=n_bits_t bits"));
        }
        if self.pulse_unit_ns == 0 {
            return Err(config("pulse unit must be at least 1 ns"));
        }
        Ok(())
    }

    pub fn max_t(&self) -> i32 {
        max_code(self.n_bits_t)
    }

    pub fn max_v(&self) -> i32 {
        max_code(self.n_bits_v)
    }

    pub fn max_adc(&self) -> i32 {
        max_code(self.n_bits_adc)
    }

    /// Longest temporal pulse (ns).
    pub fn max_pulse_ns(&self) -> u32 {
        self.max_t() as u32 * self.pulse_unit_ns
    }
}

/// Largest magnitude of a signed code with `bits` bits including the sign.
pub fn max_code(bits: u32) -> i32 {
    (1i32 << (bits - 1)) - 1
}

/// Signed fixed-width integer vector held in the core's digital registers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitalVector {
    bits: u32,
    values: Vec<i32>,
}

impl DigitalVector {
    pub fn new(bits: u32, values: Vec<i32>) -> Result<Self> {
        if !(2..=16).contains(&bits) {
            return Err(domain(format!("unsupported vector width {bits}")));
        }
        let m = max_code(bits);
        if let Some(v) = values.iter().find(|v| v.abs() > m) {
            return Err(domain(format!("value {v} exceeds {bits}-bit range ±{m}")));
        }
        Ok(Self { bits, values })
    }

    pub fn zeros(bits: u32, len: usize) -> Self {
        Self {
            bits,
            values: vec![0; len],
        }
    }

    /// Rounds `x / full_scale` onto the signed code grid, saturating.
    pub fn quantize(x: &[f64], full_scale: f64, bits: u32) -> Self {
        let m = max_code(bits);
        let values = x
            .iter()
            .map(|&v| {
                if full_scale > 0.0 {
                    ((v / full_scale * f64::from(m)).round() as i32).clamp(-m, m)
                } else {
                    0
                }
            })
            .collect();
        Self { bits, values }
    }

    /// Like [`quantize`](Self::quantize) but rounds stochastically so the
    /// expected code equals the scaled input.
    pub fn quantize_stochastic<R: Rng + ?Sized>(
        x: &[f64],
        full_scale: f64,
        bits: u32,
        rng: &mut R,
    ) -> Self {
        let m = max_code(bits);
        let values = x
            .iter()
            .map(|&v| {
                if full_scale > 0.0 {
                    stochastic_round(v / full_scale * f64::from(m), rng).clamp(-m, m)
                } else {
                    0
                }
            })
            .collect();
        Self { bits, values }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_code(&self) -> i32 {
        max_code(self.bits)
    }
}

pub(crate) fn stochastic_round<R: Rng + ?Sized>(v: f64, rng: &mut R) -> i32 {
    let floor = v.floor();
    let frac = v - floor;
    let up = frac > 0.0 && rng.random::<f64>() < frac;
    floor as i32 + i32::from(up)
}

/// One row (or column) drive: pulse length and polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub length_ns: u32,
    pub polarity: Polarity,
}

/// Temporal coding of a digital vector: `|value|` unit pulses, driven with
/// the value's sign.
pub fn temporal_encode(x: &DigitalVector, coding: &CodingConfig) -> Vec<Pulse> {
    x.values()
        .iter()
        .map(|&v| Pulse {
            length_ns: v.unsigned_abs() * coding.pulse_unit_ns,
            polarity: Polarity::from_sign(f64::from(v)),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn temporal_examples() {
        let c = CodingConfig::EIGHT_BIT;
        let x = DigitalVector::new(8, vec![0, 127, -5]).unwrap();
        let p = temporal_encode(&x, &c);
        assert_eq!(p[0].length_ns, 0);
        assert_eq!(p[1].length_ns, 127);
        assert_eq!(p[1].polarity, Polarity::Set);
        assert_eq!(p[2].length_ns, 5);
        assert_eq!(p[2].polarity, Polarity::Reset);
        assert_eq!(c.max_pulse_ns(), 127);
        assert_eq!(CodingConfig::TWO_BIT.max_pulse_ns(), 7);
    }

    #[test]
    fn vector_range_is_enforced() {
        assert!(DigitalVector::new(4, vec![7, -7]).is_ok());
        assert!(DigitalVector::new(4, vec![8]).is_err());
        assert!(DigitalVector::new(2, vec![-2]).is_err());
    }

    #[test]
    fn quantize_saturates() {
        let q = DigitalVector::quantize(&[0.5, 1.0, 2.0, -3.0, 0.0], 1.0, 4);
        assert_eq!(q.values(), &[4, 7, 7, -7, 0]);
    }

    #[test]
    fn stochastic_rounding_is_unbiased() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200_000;
        let sum: i64 = (0..n)
            .map(|_| i64::from(stochastic_round(2.3, &mut rng)))
            .sum();
        let mean = sum as f64 / n as f64;
        assert!((mean - 2.3).abs() < 0.005, "{mean}");
        assert_eq!(stochastic_round(-1.0, &mut rng), -1);
    }

    #[test]
    fn presets_validate() {
        for b in [8, 4, 2] {
            CodingConfig::for_bits(b).unwrap().validate().unwrap();
        }
        assert!(CodingConfig::for_bits(6).is_err());
    }
}
