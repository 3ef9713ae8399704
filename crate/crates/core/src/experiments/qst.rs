//! Single-qubit state tomography by linear inversion.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::physics::{apply_rotation, Axis, BlochAngles, BlochVector, DensityMatrix, PulseGate};
use crate::readout::{correct_populations, ConfusionMatrix, Populations};

/// Pre-rotation applied before a z readout.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    /// No rotation; reads `z`.
    Z,
    /// Reads `+x`.
    XPlus,
    /// Reads `−x`.
    XMinus,
    /// Reads `+y`.
    YPlus,
    /// Reads `−y`.
    YMinus,
}

impl Projection {
    pub const ALL: [Projection; 5] =
        [Projection::Z, Projection::XPlus, Projection::XMinus, Projection::YPlus, Projection::YMinus];

    /// Rotation mapping the measured component onto `+z`.
    pub fn pre_rotation(self) -> Option<(Axis, f64)> {
        match self {
            Projection::Z => None,
            Projection::XPlus => Some((Axis::MinusY, FRAC_PI_2)),
            Projection::XMinus => Some((Axis::PlusY, FRAC_PI_2)),
            Projection::YPlus => Some((Axis::PlusX, FRAC_PI_2)),
            Projection::YMinus => Some((Axis::MinusX, FRAC_PI_2)),
        }
    }

    pub fn waveform(self) -> &'static str {
        match self {
            Projection::Z => "tomo_z",
            Projection::XPlus => "tomo_xp",
            Projection::XMinus => "tomo_xm",
            Projection::YPlus => "tomo_yp",
            Projection::YMinus => "tomo_ym",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Projection::Z => "z",
            Projection::XPlus => "+x",
            Projection::XMinus => "-x",
            Projection::YPlus => "+y",
            Projection::YMinus => "-y",
        }
    }
}

/// Tomography outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QstResult {
    pub bloch: BlochVector,
    /// Linear-inversion estimate before projection onto the unit ball.
    pub raw: [f64; 3],
    /// True when the raw estimate was longer than one and was rescaled.
    pub projected: bool,
    /// True when readout correction had to clamp a population.
    pub clamped: bool,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub shots_per_projection: u64,
}

/// Reconstructs the Bloch vector from the ground/excited populations of
/// the five projections (in [`Projection::ALL`] order). With `correction`
/// each population pair is first passed through the inverse confusion
/// matrix.
pub fn qst_reconstruct(
    measured: &[Populations; 5],
    correction: Option<&ConfusionMatrix>,
    shots_per_projection: u64,
) -> Result<QstResult, ExperimentError> {
    let mut e = [0.0; 5];
    let mut clamped = false;
    for (k, p) in measured.iter().enumerate() {
        let p = match correction {
            Some(cm) => {
                let c = correct_populations(*p, cm)?;
                clamped |= c.clamped;
                c.populations
            }
            None => *p,
        };
        e[k] = p.z();
    }
    let raw = [0.5 * (e[1] - e[2]), 0.5 * (e[3] - e[4]), e[0]];
    let (bloch, projected) = BlochVector::projected(raw[0], raw[1], raw[2]);
    let angles = BlochAngles::from_bloch(&bloch);
    Ok(QstResult {
        bloch,
        raw,
        projected,
        clamped,
        theta_deg: angles.theta,
        phi_deg: angles.phi,
        shots_per_projection,
    })
}

/// Populations each projection would yield on `rho` with ideal
/// instantaneous pre-rotations and a perfect readout.
pub fn exact_populations(rho: &DensityMatrix) -> Result<[Populations; 5], ExperimentError> {
    let mut out = [Populations::new(1.0, 0.0); 5];
    for (k, p) in Projection::ALL.iter().enumerate() {
        let r = match p.pre_rotation() {
            Some((axis, angle)) => apply_rotation(rho, &PulseGate::instantaneous(axis, angle))?,
            None => *rho,
        };
        let p0 = r.p0();
        out[k] = Populations::new(p0, 1.0 - p0);
    }
    Ok(out)
}

/// Tomography of a known state without sampling.
pub fn qst_exact(rho: &DensityMatrix) -> Result<QstResult, ExperimentError> {
    qst_reconstruct(&exact_populations(rho)?, None, 0)
}

/// Polar angle from `+z` in degrees, positive towards `+x`.
pub fn signed_polar_angle(r: &BlochVector) -> f64 {
    BlochAngles::from_bloch(r).theta
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::bloch_from_rho;

    #[test]
    fn exact_tomography_matches_bloch_vector() {
        for (x, y, z) in [(0.3, -0.2, 0.5), (1.0, 0.0, 0.0), (0.0, 0.0, -1.0), (-0.6, 0.6, 0.1)] {
            let r = BlochVector::new(x, y, z).unwrap();
            let rho = crate::physics::rho_from_bloch(&r).unwrap();
            let q = qst_exact(&rho).unwrap();
            let b = bloch_from_rho(&rho);
            assert!((q.bloch.x - b.x).abs() < 1e-12);
            assert!((q.bloch.y - b.y).abs() < 1e-12);
            assert!((q.bloch.z - b.z).abs() < 1e-12);
        }
    }

    #[test]
    fn correction_undoes_confusion() {
        let rho = crate::physics::rho_from_bloch(&BlochVector::new(0.8, 0.1, -0.3).unwrap()).unwrap();
        let cm = ConfusionMatrix { f0: 0.961, f1: 0.931 };
        let exact = exact_populations(&rho).unwrap();
        let measured = exact.map(|p| cm.forward(p));
        let q = qst_reconstruct(&measured, Some(&cm), 0).unwrap();
        assert!((q.bloch.x - 0.8).abs() < 1e-12 && (q.bloch.z + 0.3).abs() < 1e-12);
        let raw = qst_reconstruct(&measured, None, 0).unwrap();
        assert!(raw.bloch.x < 0.8);
    }

    #[test]
    fn long_estimates_are_projected() {
        let p = [Populations::new(0.5, 0.5), Populations::new(1.0, 0.0), Populations::new(0.0, 1.0),
            Populations::new(0.9, 0.1), Populations::new(0.1, 0.9)];
        let q = qst_reconstruct(&p, None, 10).unwrap();
        assert!(q.projected);
        assert!((q.bloch.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signed_angle() {
        assert!((signed_polar_angle(&BlochVector::new(1.0, 0.0, 0.0).unwrap()) - 90.0).abs() < 1e-12);
        let r = BlochVector::new(-(22.5f64.to_radians().sin()), 0.0, 22.5f64.to_radians().cos()).unwrap();
        assert!((signed_polar_angle(&r) + 22.5).abs() < 1e-12);
    }
}
