//! Random walk of the target qubit on the xz great circle, steered by the
//! tags of the repeatedly stabilized signal qubit.

use serde::Serialize;

use super::backend::Register;
use super::config::{ExperimentConfig, QST_SHOTS};
use super::programs::{random_walk_plan, SIGNAL_QUBIT, TARGET_CHANNEL, TARGET_QUBIT};
use super::qst::{qst_exact, qst_reconstruct, Projection, QstResult};
use super::{run_batch, ExperimentError, ShotTable};
use crate::engine::{run_shot, EventTimeline};
use crate::physics::{bloch_from_rho, BlochVector, ChannelCache};
use crate::readout::Populations;

#[derive(Clone, Debug, Serialize)]
pub struct GroupResult {
    /// Tags in time order, e.g. `"010"`.
    pub history: String,
    pub shots: u64,
    pub percentage: f64,
    /// `None` when some projection saw no shot of this history.
    pub qst: Option<QstResult>,
    /// Target Bloch vector before tomography (exact mode only).
    pub state: Option<BlochVector>,
    pub ideal_deg: f64,
    pub theta_deg: Option<f64>,
    pub error_deg: Option<f64>,
    /// Out-of-plane component of the reconstructed vector.
    pub y_leakage: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RandomWalkResult {
    pub steps: usize,
    pub exact: bool,
    pub shots_per_projection: usize,
    pub theta_step_deg: f64,
    pub groups: Vec<GroupResult>,
    #[serde(skip)]
    pub tables: Vec<ShotTable>,
    #[serde(skip)]
    pub timeline: EventTimeline,
    #[serde(skip)]
    pub sources: Vec<(String, String)>,
}

impl RandomWalkResult {
    pub fn group(&self, history: &str) -> Option<&GroupResult> {
        self.groups.iter().find(|g| g.history == history)
    }
}

pub fn history_string(bits: usize, steps: usize) -> String {
    (0..steps).map(|k| if (bits >> (steps - 1 - k)) & 1 == 0 { '0' } else { '1' }).collect()
}

fn history_tags(bits: usize, steps: usize) -> Vec<u8> {
    (0..steps).map(|k| ((bits >> (steps - 1 - k)) & 1) as u8).collect()
}

/// Net rotation of a history: `+θ` per 0 tag, `−θ` per 1 tag, in degrees.
pub fn ideal_angle_deg(bits: usize, steps: usize, theta_step_deg: f64) -> f64 {
    let ones = history_tags(bits, steps).iter().filter(|&&t| t == 1).count() as f64;
    (steps as f64 - 2.0 * ones) * theta_step_deg
}

fn group_result(
    bits: usize,
    steps: usize,
    step_deg: f64,
    shots: u64,
    percentage: f64,
    qst: Option<QstResult>,
    state: Option<BlochVector>,
) -> GroupResult {
    let ideal = ideal_angle_deg(bits, steps, step_deg);
    let theta = qst.map(|q| q.theta_deg);
    GroupResult {
        history: history_string(bits, steps),
        shots,
        percentage,
        state,
        ideal_deg: ideal,
        theta_deg: theta,
        error_deg: theta.map(|t| t - ideal),
        y_leakage: qst.map(|q| q.bloch.y),
        qst,
    }
}

/// Monte-Carlo random walk with sampled tomography of every history group.
pub fn run_random_walk(cfg: &ExperimentConfig, steps: usize) -> Result<RandomWalkResult, ExperimentError> {
    cfg.validate()?;
    let shots = cfg.shots_or(QST_SHOTS);
    let register = Register::new(cfg, false, true)?;
    let cm = register.qubits[TARGET_QUBIT].readout.confusion();
    let correction = cfg.qst_correction.then_some(&cm);
    let cache = ChannelCache::new();
    let groups = 1usize << steps;
    // counts[group][projection] = (zeros, ones)
    let mut counts = vec![[(0u64, 0u64); 5]; groups];
    let mut tables = Vec::new();
    let mut timeline = EventTimeline::new();
    let mut sources = Vec::new();
    for (k, p) in Projection::ALL.iter().enumerate() {
        let plan = random_walk_plan(cfg, steps, *p)?;
        let batch = run_batch(cfg, &plan, &register, &cache, &format!("walk_{}", p.name()), 100 + k as u64, shots)?;
        let mut history = 0usize;
        for r in &batch.table.rows {
            if r.channel as usize == TARGET_CHANNEL {
                let c = &mut counts[history][k];
                if r.tag == 0 {
                    c.0 += 1;
                } else {
                    c.1 += 1;
                }
                history = 0;
            } else {
                history = (history << 1) | r.tag as usize;
            }
        }
        if *p == Projection::Z {
            timeline = batch.timeline;
            sources = plan.sources;
        }
        tables.push(batch.table);
    }
    let total = (shots * Projection::ALL.len()) as f64;
    let step_deg = cfg.theta_step_rad.to_degrees();
    let mut out = Vec::with_capacity(groups);
    for (bits, c) in counts.iter().enumerate() {
        let n: u64 = c.iter().map(|(a, b)| a + b).sum();
        let qst = if c.iter().all(|(a, b)| a + b > 0) {
            let pops = c.map(|(a, b)| Populations::from_counts(a, b));
            Some(qst_reconstruct(&pops, correction, c[0].0 + c[0].1)?)
        } else {
            None
        };
        out.push(group_result(bits, steps, step_deg, n, 100.0 * n as f64 / total, qst, None));
    }
    Ok(RandomWalkResult {
        steps,
        exact: false,
        shots_per_projection: shots,
        theta_step_deg: step_deg,
        groups: out,
        tables,
        timeline,
        sources,
    })
}

/// Density-matrix random walk: every tag history is enumerated with its
/// exact probability, and the target state is read off before tomography.
pub fn run_random_walk_exact(cfg: &ExperimentConfig, steps: usize) -> Result<RandomWalkResult, ExperimentError> {
    cfg.validate()?;
    let register = Register::new(cfg, false, true)?;
    let cache = ChannelCache::new();
    let plan = random_walk_plan(cfg, steps, Projection::Z)?;
    let step_deg = cfg.theta_step_rad.to_degrees();
    let mut out = Vec::new();
    let mut timeline = EventTimeline::new();
    for bits in 0..(1usize << steps) {
        let mut backend = register.forced(cfg, &cache, SIGNAL_QUBIT, history_tags(bits, steps));
        let run = run_shot(&plan.boards, &cfg.latency, &mut backend, bits == 0)?;
        if let Some(tl) = run.timeline {
            timeline = tl;
        }
        let weight = backend.weight();
        let rho = backend
            .captured(TARGET_QUBIT)
            .ok_or_else(|| ExperimentError::Schedule("target readout never reached".into()))?;
        let qst = qst_exact(&rho)?;
        out.push(group_result(bits, steps, step_deg, 0, 100.0 * weight, Some(qst), Some(bloch_from_rho(&rho))));
    }
    Ok(RandomWalkResult {
        steps,
        exact: true,
        shots_per_projection: 0,
        theta_step_deg: step_deg,
        groups: out,
        tables: Vec::new(),
        timeline,
        sources: plan.sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histories() {
        assert_eq!(history_string(0b011, 3), "011");
        assert_eq!(ideal_angle_deg(0b000, 3, 22.5), 67.5);
        assert_eq!(ideal_angle_deg(0b101, 3, 22.5), -22.5);
    }

    #[test]
    fn ideal_exact_walk_hits_multiples() {
        let cfg = ExperimentConfig::default().idealized();
        let r = run_random_walk_exact(&cfg, 2).unwrap();
        assert_eq!(r.groups.len(), 4);
        let total: f64 = r.groups.iter().map(|g| g.percentage).sum();
        assert!((total - 100.0).abs() < 1e-9);
        for g in &r.groups {
            assert!(g.error_deg.unwrap().abs() < 1e-6, "{g:?}");
            // RK4 pulse error only
            assert!((g.percentage - 25.0).abs() < 1e-4, "{g:?}");
        }
    }
}
