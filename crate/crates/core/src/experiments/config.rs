use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::ExperimentError;
use crate::engine::LatencyModel;
use crate::physics::QubitParams;
use crate::readout::{calibrate_with_residual_excitation, ReadoutModel};

/// Readout fidelities of one channel and the free cloud-separation scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSpec {
    pub f0: f64,
    pub f1: f64,
    pub separation: f64,
}

/// How gate pulses are realized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// Rectangular drive integrated with decoherence over the pulse length.
    Finite,
    /// Instantaneous unitary at the start of the pulse slot.
    Ideal,
}

/// Back-action of the signal readout pulse on the target qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrosstalkConfig {
    pub enabled: bool,
    /// Target dephasing time while the signal resonator is driven.
    pub readout_t2_star_us: f64,
    pub stark_detuning_mhz: f64,
    /// Z compensation per step; `None` cancels the accumulated phase.
    pub compensation_deg: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitSet {
    /// Signal qubit at its sweet point.
    pub signal: QubitParams,
    /// Signal qubit biased away from the sweet point (feed-forward run).
    pub signal_biased: QubitParams,
    pub target: QubitParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutSet {
    pub signal: ReadoutSpec,
    pub target: ReadoutSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Shots per experiment, or per tomography projection for QST runs.
    /// `None` uses each protocol's own default.
    pub shots: Option<usize>,
    pub steps: usize,
    pub rounds: usize,
    pub theta_step_rad: f64,
    pub seed: u64,
    pub decoherence: bool,
    /// Noiseless readout with perfect initialization.
    pub ideal_readout: bool,
    pub gate_mode: GateMode,
    pub dt_ns: f64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Apply confusion-matrix correction to tomography populations.
    pub qst_correction: bool,
    pub histogram_bins: usize,
    pub latency: LatencyModel,
    pub qubits: QubitSet,
    pub readout: ReadoutSet,
    pub crosstalk: CrosstalkConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let residual = 0.02;
        Self {
            shots: None,
            steps: 3,
            rounds: 6,
            theta_step_rad: std::f64::consts::FRAC_PI_8,
            seed: 1,
            decoherence: true,
            ideal_readout: false,
            gate_mode: GateMode::Finite,
            dt_ns: 1.0,
            threads: 0,
            qst_correction: true,
            histogram_bins: crate::readout::DEFAULT_BINS,
            latency: LatencyModel::default(),
            qubits: QubitSet {
                signal: QubitParams {
                    label: "QA".into(),
                    f_qubit_ghz: 5.050,
                    f_resonator_ghz: 6.521,
                    t1_us: 16.0,
                    t2_star_us: 20.0,
                    residual_excitation: residual,
                },
                signal_biased: QubitParams {
                    label: "QA-biased".into(),
                    f_qubit_ghz: 4.840,
                    f_resonator_ghz: 6.521,
                    t1_us: 9.3,
                    t2_star_us: 1.2,
                    residual_excitation: residual,
                },
                target: QubitParams {
                    label: "QB".into(),
                    f_qubit_ghz: 5.079,
                    f_resonator_ghz: 6.438,
                    t1_us: 19.0,
                    t2_star_us: 33.0,
                    residual_excitation: residual,
                },
            },
            readout: ReadoutSet {
                signal: ReadoutSpec { f0: 0.961, f1: 0.931, separation: 2.0 },
                target: ReadoutSpec { f0: 0.973, f1: 0.903, separation: 2.0 },
            },
            crosstalk: CrosstalkConfig {
                enabled: true,
                readout_t2_star_us: 9.0,
                stark_detuning_mhz: 0.05,
                compensation_deg: None,
            },
        }
    }
}

/// Default shot count of the reset protocol.
pub const RESET_SHOTS: usize = 30_000;
/// Default shots per projection (or per run) of the other protocols.
pub const QST_SHOTS: usize = 15_000;

impl ExperimentConfig {
    pub fn shots_or(&self, default: usize) -> usize {
        self.shots.unwrap_or(default)
    }

    /// Built-in profile names accepted by [`ExperimentConfig::profile`].
    pub const PROFILES: [&'static str; 2] = ["paper-defaults", "ideal"];

    pub fn profile(name: &str) -> Result<Self, ExperimentError> {
        match name {
            "paper-defaults" => Ok(Self::default()),
            "ideal" => Ok(Self::default().idealized()),
            other => Err(ExperimentError::Config { key: "profile".into(), message: format!("unknown profile '{other}'") }),
        }
    }

    /// Decoherence, readout noise, residual excitation and crosstalk off.
    pub fn idealized(mut self) -> Self {
        self.decoherence = false;
        self.ideal_readout = true;
        self.crosstalk.enabled = false;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |key: &str, message: String| Err(ExperimentError::Config { key: key.into(), message });
        if self.shots == Some(0) {
            return bad("shots", "must be at least 1".into());
        }
        if self.steps == 0 {
            return bad("steps", "must be at least 1".into());
        }
        if !(self.dt_ns > 0.0) {
            return bad("dt_ns", "must be positive".into());
        }
        if self.histogram_bins < 2 {
            return bad("histogram_bins", "must be at least 2".into());
        }
        for (key, q) in [
            ("qubits.signal", &self.qubits.signal),
            ("qubits.signal_biased", &self.qubits.signal_biased),
            ("qubits.target", &self.qubits.target),
        ] {
            q.validate().map_err(|e| ExperimentError::Config { key: key.into(), message: e.to_string() })?;
        }
        if self.crosstalk.readout_t2_star_us <= 0.0 {
            return bad("crosstalk.readout_t2_star_us", "must be positive".into());
        }
        if self.latency.tau_gt == 0 {
            return bad("latency.tau_gt", "gate slot must be at least 1 ns".into());
        }
        for (key, spec) in [("readout.signal", &self.readout.signal), ("readout.target", &self.readout.target)] {
            self.readout_model(spec, 0.0)
                .map_err(|e| ExperimentError::Config { key: key.into(), message: e.to_string() })?;
        }
        Ok(())
    }

    /// Readout model for `spec`, accounting for imperfect initialization.
    pub fn readout_model(&self, spec: &ReadoutSpec, residual: f64) -> Result<ReadoutModel, ExperimentError> {
        if self.ideal_readout {
            return Ok(ReadoutModel::ideal(spec.separation, self.latency.tau_ro as f64));
        }
        Ok(calibrate_with_residual_excitation(spec.f0, spec.f1, residual, spec.separation, self.latency.tau_ro as f64)?)
    }

    /// Qubit parameters as simulated: perfect initialization in ideal mode.
    pub fn effective(&self, q: &QubitParams) -> QubitParams {
        let mut q = q.clone();
        if self.ideal_readout {
            q.residual_excitation = 0.0;
        }
        q
    }

    /// Applies a dotted-key override such as `latency.tau_ao=96`. The
    /// value is parsed as JSON, falling back to a bare string.
    pub fn set(&mut self, assignment: &str) -> Result<(), ExperimentError> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| ExperimentError::Config {
            key: assignment.into(),
            message: "expected key=value".into(),
        })?;
        let key = key.trim();
        let value: Value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        let mut slot = &mut doc;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| ExperimentError::Config { key: key.into(), message: "unknown key".into() })?;
        }
        *slot = value;
        *self = serde_json::from_value(doc)
            .map_err(|e| ExperimentError::Config { key: key.into(), message: e.to_string() })?;
        Ok(())
    }

    /// Applies a partial JSON document on top of `self`. A top-level
    /// `"profile"` key selects the base profile first. Unknown keys are
    /// rejected with their dotted path.
    pub fn overlay_json(&mut self, text: &str) -> Result<(), ExperimentError> {
        let mut patch: Value = serde_json::from_str(text).map_err(|e| ExperimentError::Config {
            key: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if let Some(name) = patch.as_object_mut().and_then(|o| o.remove("profile")) {
            let name = name.as_str().ok_or_else(|| ExperimentError::Config {
                key: "profile".into(),
                message: "expected a string".into(),
            })?;
            *self = Self::profile(name)?;
        }
        let mut doc = serde_json::to_value(&*self).expect("config serializes");
        merge(&mut doc, patch, "")?;
        *self = serde_json::from_value(doc).map_err(|e| ExperimentError::Config { key: "config".into(), message: e.to_string() })?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_error(&mut de)?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

fn merge(doc: &mut Value, patch: Value, path: &str) -> Result<(), ExperimentError> {
    match (doc, patch) {
        (Value::Object(d), Value::Object(p)) => {
            for (k, v) in p {
                let key = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                let slot = d
                    .get_mut(&k)
                    .ok_or_else(|| ExperimentError::Config { key: key.clone(), message: "unknown key".into() })?;
                merge(slot, v, &key)?;
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

fn serde_path_error(de: &mut serde_json::Deserializer<serde_json::de::StrRead<'_>>) -> Result<ExperimentConfig, ExperimentError> {
    ExperimentConfig::deserialize(de).map_err(|e| ExperimentError::Config {
        key: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}
