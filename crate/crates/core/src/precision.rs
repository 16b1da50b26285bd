use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Mantissa width, in bits, of every arbitrary-precision real in a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionConfig {
    bits: u32,
}

impl PrecisionConfig {
    pub const MIN_BITS: u32 = 64;

    pub fn new(bits: u32) -> Result<Self> {
        if bits < Self::MIN_BITS {
            return Err(LabError::invalid(format!(
                "precision must be at least {} bits, got {bits}",
                Self::MIN_BITS
            )));
        }
        Ok(PrecisionConfig { bits })
    }

    /// `max(256, ceil(1.6·k·log2 max(k, 2)))`: `e_k` spans roughly
    /// `k·log2(k/(πe))` binary orders of magnitude.
    pub fn for_order(k: u32) -> Self {
        let k = f64::from(k.max(2));
        let bits = (1.6 * k * k.log2()).ceil() as u32;
        PrecisionConfig {
            bits: bits.max(256),
        }
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// Same config widened by `extra` guard bits.
    pub fn widened(&self, extra: u32) -> Self {
        PrecisionConfig {
            bits: self.bits + extra,
        }
    }
}

impl Default for PrecisionConfig {
    fn default() -> Self {
        PrecisionConfig { bits: 256 }
    }
}
