//! Dispersive readout: IQ clouds, discrimination, demodulation and
//! measurement correction.

mod correction;
mod demod;
mod histogram;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::physics::{project_z, DensityMatrix};

pub use correction::{correct_populations, mixture_prediction, ConfusionMatrix, Corrected, Populations};
pub use demod::{demodulate, reference_tone, DemodConfig, CLOCK_NS};
pub use histogram::{
    build_histogram, build_histogram_in, fit_two_modes, write_histogram_csv, write_scatter_csv, Histogram,
    ModeFit, DEFAULT_BINS,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReadoutError {
    #[error("invalid readout model: {0}")]
    InvalidModel(String),
    #[error("calibration impossible: {0}")]
    Calibration(String),
    #[error("series length {got} does not match window of {expected} cycles")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid demodulation config: {0}")]
    InvalidDemod(String),
    #[error("confusion matrix is singular (F0 + F1 = {sum})")]
    Singular { sum: f64 },
    #[error("populations must sum to 1 (got {sum})")]
    NotNormalized { sum: f64 },
    #[error("invalid histogram request: {0}")]
    InvalidHistogram(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IqPoint {
    pub i: f64,
    pub q: f64,
}

impl IqPoint {
    pub fn new(i: f64, q: f64) -> Self {
        Self { i, q }
    }
}

/// Bit produced by the discriminator: 0 = ground (right of threshold),
/// 1 = excited.
pub type Tag = u8;

/// Tag for a demodulated point. Points exactly on the threshold are
/// classified as excited.
pub fn discriminate(iq: IqPoint, threshold_i: f64) -> Tag {
    if iq.i > threshold_i {
        0
    } else {
        1
    }
}

/// Statistical model of one readout channel.
///
/// Two isotropic Gaussian clouds with a common width, rotated so both
/// centers lie on the I axis with the ground cloud on the right. An
/// excited-state shot decays during the readout with probability
/// `decay_mix`, in which case it is recorded in the ground cloud and the
/// qubit is left in `|0⟩`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutModel {
    pub center0: IqPoint,
    pub center1: IqPoint,
    /// Zero is the noiseless limit.
    pub sigma: f64,
    pub threshold_i: f64,
    pub tau_ro_ns: f64,
    pub decay_mix: f64,
}

/// One simulated shot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReadoutShot {
    /// Projective outcome before any decay during the readout.
    pub outcome: u8,
    pub iq: IqPoint,
    pub post_state: DensityMatrix,
    pub decayed: bool,
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        let bad = |m: String| Err(ReadoutError::InvalidModel(m));
        for v in [self.center0.i, self.center0.q, self.center1.i, self.center1.q, self.threshold_i] {
            if !v.is_finite() {
                return bad("non-finite geometry".into());
            }
        }
        if !(self.center0.i > self.threshold_i && self.threshold_i > self.center1.i) {
            return bad(format!(
                "need center0.i > threshold > center1.i, got {} / {} / {}",
                self.center0.i, self.threshold_i, self.center1.i
            ));
        }
        if (self.center0.q - self.center1.q).abs() > 1e-12 {
            return bad("cloud centers must share Q after rotation".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma {}", self.sigma));
        }
        if !(0.0..=1.0).contains(&self.decay_mix) {
            return bad(format!("decay_mix {}", self.decay_mix));
        }
        if !(self.tau_ro_ns >= 0.0) {
            return bad(format!("tau_ro {}", self.tau_ro_ns));
        }
        Ok(())
    }

    /// Noiseless readout with the given cloud separation.
    pub fn ideal(separation: f64, tau_ro_ns: f64) -> Self {
        Self {
            center0: IqPoint::new(0.5 * separation, 0.0),
            center1: IqPoint::new(-0.5 * separation, 0.0),
            sigma: 0.0,
            threshold_i: 0.0,
            tau_ro_ns,
            decay_mix: 0.0,
        }
    }

    /// Probability that a ground-cloud sample lands at or left of the
    /// threshold.
    pub fn ground_overlap(&self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        std_normal().cdf((self.threshold_i - self.center0.i) / self.sigma)
    }

    /// Probability that an excited-cloud sample lands right of the
    /// threshold.
    pub fn excited_overlap(&self) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        std_normal().cdf((self.center1.i - self.threshold_i) / self.sigma)
    }

    /// Readout fidelities `(F0, F1)` implied by the model for the pure
    /// states `|0⟩` and `|1⟩`.
    pub fn fidelities(&self) -> (f64, f64) {
        let e0 = self.ground_overlap();
        let e1 = self.excited_overlap();
        let f0 = 1.0 - e0;
        let f1 = (1.0 - self.decay_mix) * (1.0 - e1) + self.decay_mix * e0;
        (f0, f1)
    }

    pub fn confusion(&self) -> ConfusionMatrix {
        let (f0, f1) = self.fidelities();
        ConfusionMatrix { f0, f1 }
    }

    /// Histogram range spanning 4σ beyond both cloud centers.
    pub fn histogram_range(&self) -> (f64, f64) {
        let lo = self.center0.i.min(self.center1.i) - 4.0 * self.sigma;
        let hi = self.center0.i.max(self.center1.i) + 4.0 * self.sigma;
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    }

    /// Joint distribution of the discriminated tag and the post-readout
    /// state, without sampling. Returns `(P(tag), state | tag)` for tag 0
    /// and tag 1; the conditional state is `None` when `P(tag) = 0`.
    pub fn conditional_outcomes(&self, rho: &DensityMatrix) -> [(f64, Option<DensityMatrix>); 2] {
        let p0 = rho.p0().clamp(0.0, 1.0);
        let p1 = 1.0 - p0;
        let e0 = self.ground_overlap();
        let e1 = self.excited_overlap();
        let d = self.decay_mix;
        // (weight in |0⟩, weight in |1⟩) for each tag.
        let tag0 = ((p0 + p1 * d) * (1.0 - e0), p1 * (1.0 - d) * e1);
        let tag1 = ((p0 + p1 * d) * e0, p1 * (1.0 - d) * (1.0 - e1));
        let make = |(w0, w1): (f64, f64)| {
            let total = w0 + w1;
            let state = if total > 0.0 { DensityMatrix::diagonal(w1 / total).ok() } else { None };
            (total, state)
        };
        [make(tag0), make(tag1)]
    }
}

/// Builds a model whose shot statistics reproduce ground/excited readout
/// fidelities `f0`, `f1` for the pure states `|0⟩`, `|1⟩`.
///
/// The cloud width follows from `Φ(−separation/2σ) = 1 − f0`; the decay
/// mixture from `1 − f1 = d·f0 + (1 − d)(1 − f0)`.
pub fn calibrate_model_from_fidelities(
    f0: f64,
    f1: f64,
    separation: f64,
    tau_ro_ns: f64,
) -> Result<ReadoutModel, ReadoutError> {
    calibrate_with_residual_excitation(f0, f1, 0.0, separation, tau_ro_ns)
}

/// Like [`calibrate_model_from_fidelities`], but for fidelities measured on
/// imperfectly initialized states: a fraction `residual` of nominal
/// ground-state preparations is actually excited (and a π pulse maps that
/// fraction to `|0⟩`). Only the remaining error is attributed to the
/// readout itself.
pub fn calibrate_with_residual_excitation(
    f0: f64,
    f1: f64,
    residual: f64,
    separation: f64,
    tau_ro_ns: f64,
) -> Result<ReadoutModel, ReadoutError> {
    if !(separation > 0.0 && separation.is_finite()) {
        return Err(ReadoutError::Calibration(format!("separation {separation}")));
    }
    if !(0.5 < f1 && f1 <= f0 && f0 < 1.0) {
        return Err(ReadoutError::Calibration(format!("need 0.5 < f1 <= f0 < 1, got f0={f0} f1={f1}")));
    }
    if !(0.0..0.5).contains(&residual) {
        return Err(ReadoutError::Calibration(format!("residual excitation {residual}")));
    }
    // Linear in (ε, u) where ε is the Gaussian overlap and u = P(tag 1 | |1⟩):
    //   (1−p)ε + p·u = 1 − f0
    //   p·ε + (1−p)u = f1
    let p = residual;
    let det = 1.0 - 2.0 * p;
    let eps = ((1.0 - f0) * (1.0 - p) - p * f1) / det;
    let u = ((1.0 - p) * f1 - p * (1.0 - f0)) / det;
    if !(eps > 0.0 && eps < 0.5) {
        return Err(ReadoutError::Calibration(format!("overlap {eps} outside (0, 0.5)")));
    }
    let decay_mix = ((1.0 - eps) - u) / (1.0 - 2.0 * eps);
    if !(0.0..=1.0).contains(&decay_mix) {
        return Err(ReadoutError::Calibration(format!("decay mixture {decay_mix} outside [0, 1]")));
    }
    let z = std_normal().inverse_cdf(1.0 - eps);
    let sigma = separation / (2.0 * z);
    let model = ReadoutModel {
        center0: IqPoint::new(0.5 * separation, 0.0),
        center1: IqPoint::new(-0.5 * separation, 0.0),
        sigma,
        threshold_i: 0.0,
        tau_ro_ns,
        decay_mix,
    };
    model.validate()?;
    Ok(model)
}

/// Simulates one readout shot: projective collapse, decay during the
/// readout window, then a Gaussian IQ sample from the selected cloud.
///
/// The collapsed state is what the qubit holds at the end of the window;
/// relaxation inside the window is represented by `decay_mix` alone.
pub fn simulate_readout<R: Rng + ?Sized>(rho: &DensityMatrix, model: &ReadoutModel, rng: &mut R) -> ReadoutShot {
    let (outcome, mut post_state) = project_z(rho, rng.random::<f64>());
    let mut decayed = false;
    if outcome == 1 && model.decay_mix > 0.0 && rng.random::<f64>() < model.decay_mix {
        decayed = true;
        post_state = DensityMatrix::ground();
    }
    let center = if outcome == 0 || decayed { model.center0 } else { model.center1 };
    let ni: f64 = rng.sample(StandardNormal);
    let nq: f64 = rng.sample(StandardNormal);
    let iq = IqPoint::new(center.i + model.sigma * ni, center.q + model.sigma * nq);
    ReadoutShot { outcome, iq, post_state, decayed }
}
