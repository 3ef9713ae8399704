//! Single-qubit open-system physics.
//!
//! States are 2×2 density matrices in the qubit rotating frame. Gates are
//! rotations `exp(-iθ n·σ/2)`, applied either instantaneously or as a
//! rectangular drive integrated together with relaxation and dephasing.

mod dynamics;
mod state;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dynamics::{
    apply_rotation, apply_rotation_finite, evolve_lindblad, rotation_unitary, stark_compensation,
    stark_phase_deg, Axis, Channel, ChannelCache, LindbladModel, PulseGate,
};
pub use state::{
    bloch_fidelity, bloch_from_rho, mat_distance, project_z, rho_from_bloch, state_fidelity,
    wrap_degrees, BlochAngles, BlochVector, DensityMatrix, Mat2,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("matrix is not Hermitian (deviation {deviation:e})")]
    NotHermitian { deviation: f64 },
    #[error("trace {trace} differs from 1")]
    TraceNotUnit { trace: f64 },
    #[error("matrix has negative eigenvalue {min_eigenvalue:e}")]
    NotPositive { min_eigenvalue: f64 },
    #[error("state vector norm {norm} differs from 1")]
    NotNormalized { norm: f64 },
    #[error("Bloch vector length {norm} exceeds 1")]
    NonPhysicalBloch { norm: f64 },
    #[error("invalid gate {0}")]
    InvalidGate(String),
    #[error("invalid Lindblad model {0}")]
    InvalidModel(String),
    #[error("invalid qubit parameters: {0}")]
    InvalidParams(String),
    #[error("invalid integration step dt={dt_ns} ns over {duration_ns} ns")]
    InvalidStep { dt_ns: f64, duration_ns: f64 },
    #[error("step {dt_ns} ns too large for generator rate {rate} /ns")]
    StepTooLarge { dt_ns: f64, rate: f64 },
    #[error("integration trace drift {drift:e} exceeds tolerance")]
    IntegrationAccuracy { drift: f64 },
}

/// Static parameters of one transmon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    pub label: String,
    pub f_qubit_ghz: f64,
    pub f_resonator_ghz: f64,
    pub t1_us: f64,
    pub t2_star_us: f64,
    /// Excited population left over after nominal ground-state
    /// initialization (residual thermal excitation).
    #[serde(default)]
    pub residual_excitation: f64,
}

impl QubitParams {
    pub fn validate(&self) -> Result<(), PhysicsError> {
        let bad = |m: &str| Err(PhysicsError::InvalidParams(format!("{}: {m}", self.label)));
        if !(self.t1_us > 0.0) || !(self.t2_star_us > 0.0) {
            return bad("coherence times must be positive");
        }
        if self.t2_star_us > 2.0 * self.t1_us {
            return bad("T2* exceeds 2·T1");
        }
        if !(0.0..0.5).contains(&self.residual_excitation) {
            return bad("residual excitation outside [0, 0.5)");
        }
        Ok(())
    }

    pub fn lindblad(&self) -> Result<LindbladModel, PhysicsError> {
        self.validate()?;
        LindbladModel::from_times(self.t1_us, self.t2_star_us)
    }

    /// State produced by nominal ground-state initialization.
    pub fn initial_state(&self) -> DensityMatrix {
        DensityMatrix::diagonal(self.residual_excitation).unwrap_or_else(|_| DensityMatrix::ground())
    }
}
