use serde::{Deserialize, Serialize};

use super::ReadoutError;

const SUM_TOL: f64 = 1e-9;

/// Ground/excited probability pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Populations {
    pub p0: f64,
    pub p1: f64,
}

impl Populations {
    pub fn new(p0: f64, p1: f64) -> Self {
        Self { p0, p1 }
    }

    pub fn from_counts(zeros: u64, ones: u64) -> Self {
        let n = (zeros + ones).max(1) as f64;
        Self { p0: zeros as f64 / n, p1: ones as f64 / n }
    }

    /// `P0 − P1`.
    pub fn z(&self) -> f64 {
        self.p0 - self.p1
    }

    fn check(&self) -> Result<(), ReadoutError> {
        let sum = self.p0 + self.p1;
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(ReadoutError::NotNormalized { sum });
        }
        Ok(())
    }
}

/// Readout confusion matrix `[[F0, 1−F1], [1−F0, F1]]`, mapping ideal
/// populations to measured ones. Columns sum to one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub f0: f64,
    pub f1: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corrected {
    pub populations: Populations,
    /// True when the raw inverse left `[0, 1]` and had to be clamped.
    pub clamped: bool,
}

impl ConfusionMatrix {
    pub const PERFECT: ConfusionMatrix = ConfusionMatrix { f0: 1.0, f1: 1.0 };

    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.f0, 1.0 - self.f1], [1.0 - self.f0, self.f1]]
    }

    /// Measured populations expected for ideal populations `ideal`.
    pub fn forward(&self, ideal: Populations) -> Populations {
        let m = self.matrix();
        Populations {
            p0: m[0][0] * ideal.p0 + m[0][1] * ideal.p1,
            p1: m[1][0] * ideal.p0 + m[1][1] * ideal.p1,
        }
    }

    /// Unclamped inverse map.
    pub fn invert(&self, measured: Populations) -> Result<Populations, ReadoutError> {
        let det = self.f0 + self.f1 - 1.0;
        if det.abs() < 1e-12 {
            return Err(ReadoutError::Singular { sum: self.f0 + self.f1 });
        }
        Ok(Populations {
            p0: (self.f1 * measured.p0 - (1.0 - self.f1) * measured.p1) / det,
            p1: (self.f0 * measured.p1 - (1.0 - self.f0) * measured.p0) / det,
        })
    }
}

/// Recovers ideal populations from measured ones by inverting the
/// confusion matrix, renormalizing and clamping to `[0, 1]`.
pub fn correct_populations(measured: Populations, cm: &ConfusionMatrix) -> Result<Corrected, ReadoutError> {
    measured.check()?;
    let raw = cm.invert(measured)?;
    let clamped = !(0.0..=1.0).contains(&raw.p0) || !(0.0..=1.0).contains(&raw.p1);
    let p0 = raw.p0.clamp(0.0, 1.0);
    let p1 = raw.p1.clamp(0.0, 1.0);
    let sum = p0 + p1;
    Ok(Corrected { populations: Populations { p0: p0 / sum, p1: p1 / sum }, clamped })
}

/// Final target populations when the target `p` is flipped whenever the
/// signal reads excited: `p0f = p0·P0 + p1·P1`, `p1f = p0·P1 + p1·P0`.
pub fn mixture_prediction(target: Populations, signal: Populations) -> Result<Populations, ReadoutError> {
    target.check()?;
    signal.check()?;
    Ok(Populations {
        p0: target.p0 * signal.p0 + target.p1 * signal.p1,
        p1: target.p0 * signal.p1 + target.p1 * signal.p0,
    })
}
