use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Detector constants for the noise operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorSpec {
    /// Full-well capacity [e⁻].
    pub full_well: f64,
    /// Fraction of the full well reached by the brightest pixel.
    pub headroom: f64,
    /// Photo-electrons per graylevel.
    pub gain: f64,
    /// Readout noise standard deviation [e⁻].
    pub readout_std: f64,
    pub bits: u32,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            full_well: 13500.0,
            headroom: 0.9,
            gain: 13.0,
            readout_std: 13.0,
            bits: 10,
        }
    }
}

impl SensorSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !(ok(self.full_well) && ok(self.headroom) && ok(self.gain) && ok(self.readout_std)) {
            return Err(invalid("sensor constants must be positive"));
        }
        if self.bits == 0 || self.bits > 24 {
            return Err(invalid("quantization bits must lie in 1..=24"));
        }
        Ok(())
    }

    /// Expected electrons of the brightest pixel.
    pub fn peak_electrons(&self) -> f64 {
        self.headroom * self.full_well
    }

    pub fn max_graylevel(&self) -> f64 {
        ((1u64 << self.bits) - 1) as f64
    }
}
