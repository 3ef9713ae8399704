//! Feedback stabilization of the signal qubit on the equator.

use serde::Serialize;

use super::backend::Register;
use super::config::{ExperimentConfig, QST_SHOTS};
use super::programs::{stabilization_plan, SIGNAL_QUBIT};
use super::qst::{qst_reconstruct, Projection, QstResult};
use super::{run_batch, ExperimentError, ShotTable};
use crate::engine::EventTimeline;
use crate::physics::{bloch_fidelity, wrap_degrees, BlochVector, ChannelCache};
use crate::readout::Populations;

#[derive(Clone, Debug, Serialize)]
pub struct RoundResult {
    /// Feedback loops applied before tomography; 0 is the prepared state.
    pub round: usize,
    pub qst: QstResult,
    /// Fidelity with `(|0⟩+|1⟩)/√2`.
    pub fidelity: f64,
    pub theta_error_deg: f64,
    pub phi_error_deg: f64,
    /// Measured populations per projection, in [`Projection::ALL`] order.
    pub populations: [Populations; 5],
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilizationResult {
    pub shots_per_projection: usize,
    pub corrected: bool,
    pub rounds: Vec<RoundResult>,
    #[serde(skip)]
    pub tables: Vec<ShotTable>,
    #[serde(skip)]
    pub timeline: EventTimeline,
    #[serde(skip)]
    pub sources: Vec<(String, String)>,
}

pub fn run_stabilization(cfg: &ExperimentConfig) -> Result<StabilizationResult, ExperimentError> {
    cfg.validate()?;
    let shots = cfg.shots_or(QST_SHOTS);
    let register = Register::new(cfg, false, false)?;
    let cm = register.qubits[SIGNAL_QUBIT].readout.confusion();
    let correction = cfg.qst_correction.then_some(&cm);
    let cache = ChannelCache::new();
    let ideal = BlochVector { x: 1.0, y: 0.0, z: 0.0 };
    let mut rounds = Vec::new();
    let mut tables = Vec::new();
    let mut timeline = EventTimeline::new();
    let mut sources = Vec::new();
    for loops in 0..=cfg.rounds {
        let mut populations = [Populations::new(1.0, 0.0); 5];
        for (k, p) in Projection::ALL.iter().enumerate() {
            let plan = stabilization_plan(cfg, loops, *p)?;
            let stream = 1 + (loops * Projection::ALL.len() + k) as u64;
            let variant = format!("round{loops}_{}", p.name());
            let batch = run_batch(cfg, &plan, &register, &cache, &variant, stream, shots)?;
            let ones = batch.table.rows.iter().filter(|r| r.measurement as usize == loops).map(|r| r.tag as u64).sum::<u64>();
            populations[k] = Populations::from_counts(shots as u64 - ones, ones);
            if loops == cfg.rounds.min(1) && *p == Projection::Z {
                timeline = batch.timeline;
                sources = plan.sources;
            }
            tables.push(batch.table);
        }
        let qst = qst_reconstruct(&populations, correction, shots as u64)?;
        rounds.push(RoundResult {
            round: loops,
            fidelity: bloch_fidelity(&qst.bloch, &ideal),
            theta_error_deg: qst.theta_deg - 90.0,
            phi_error_deg: wrap_degrees(qst.phi_deg),
            qst,
            populations,
        });
    }
    Ok(StabilizationResult { shots_per_projection: shots, corrected: correction.is_some(), rounds, tables, timeline, sources })
}
