//! Feed-forward: the signal qubit's tag conditionally flips the target.

use serde::Serialize;

use super::backend::Register;
use super::config::{ExperimentConfig, QST_SHOTS};
use super::programs::{feedforward_plan, target_reference_plan, SIGNAL_CHANNEL, TARGET_CHANNEL};
use super::{run_batch, ExperimentError, ShotTable};
use crate::engine::EventTimeline;
use crate::physics::ChannelCache;
use crate::readout::{correct_populations, mixture_prediction, ConfusionMatrix, Corrected, Populations};

#[derive(Clone, Debug, Serialize)]
pub struct FeedforwardResult {
    pub shots: usize,
    /// Measured signal populations `(P0, P1)`.
    pub signal: Populations,
    /// Measured target populations without feed-forward.
    pub target_initial: Populations,
    /// Measured target populations after feed-forward.
    pub target_final: Populations,
    /// Ideal mixture of the initial target under the signal statistics.
    pub mixture: Populations,
    /// The mixture passed forward through the target's confusion matrix:
    /// what the target readout should report.
    pub calibrated: Populations,
    /// Final target populations with the readout error removed.
    pub target_final_corrected: Corrected,
    pub target_confusion: ConfusionMatrix,
    #[serde(skip)]
    pub tables: Vec<ShotTable>,
    #[serde(skip)]
    pub timeline: EventTimeline,
    #[serde(skip)]
    pub sources: Vec<(String, String)>,
}

fn populations(table: &ShotTable, channel: usize) -> Populations {
    let (mut zeros, mut ones) = (0u64, 0u64);
    for r in table.rows.iter().filter(|r| r.channel as usize == channel) {
        if r.tag == 0 {
            zeros += 1;
        } else {
            ones += 1;
        }
    }
    Populations::from_counts(zeros, ones)
}

/// Prediction path from measured inputs: the mixture and its image under
/// the target readout.
pub fn feedforward_prediction(
    target_initial: Populations,
    signal: Populations,
    target_confusion: &ConfusionMatrix,
) -> Result<(Populations, Populations), ExperimentError> {
    let mixture = mixture_prediction(target_initial, signal)?;
    Ok((mixture, target_confusion.forward(mixture)))
}

pub fn run_feedforward(cfg: &ExperimentConfig) -> Result<FeedforwardResult, ExperimentError> {
    cfg.validate()?;
    let shots = cfg.shots_or(QST_SHOTS);
    let register = Register::new(cfg, true, false)?;
    let cache = ChannelCache::new();
    let plan = feedforward_plan(cfg)?;
    let main = run_batch(cfg, &plan, &register, &cache, "feedforward", 0, shots)?;
    let reference_plan = target_reference_plan(cfg)?;
    let reference = run_batch(cfg, &reference_plan, &register, &cache, "target_reference", 1, shots)?;

    let signal = populations(&main.table, SIGNAL_CHANNEL);
    let target_final = populations(&main.table, TARGET_CHANNEL);
    let target_initial = populations(&reference.table, TARGET_CHANNEL);
    let spec = cfg.readout.target;
    let target_confusion = if cfg.ideal_readout { ConfusionMatrix::PERFECT } else { ConfusionMatrix { f0: spec.f0, f1: spec.f1 } };
    let (mixture, calibrated) = feedforward_prediction(target_initial, signal, &target_confusion)?;
    Ok(FeedforwardResult {
        shots,
        signal,
        target_initial,
        target_final,
        mixture,
        calibrated,
        target_final_corrected: correct_populations(target_final, &target_confusion)?,
        target_confusion,
        tables: vec![main.table, reference.table],
        timeline: main.timeline,
        sources: plan.sources,
    })
}
