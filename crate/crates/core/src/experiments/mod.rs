//! Reset, stabilization, feed-forward and random-walk protocols run on the
//! board engine against a density-matrix backend.

pub mod backend;
pub mod config;
pub mod export;
pub mod feedforward;
pub mod programs;
pub mod qst;
pub mod randomwalk;
pub mod reset;
pub mod stabilize;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{run_shot, EngineError, EventTimeline};
use crate::isa::IsaError;
use crate::physics::{ChannelCache, PhysicsError};
use crate::readout::ReadoutError;

pub use backend::{shot_rng, Crosstalk, PhysicsBackend, QubitSlot, Register, Sampling};
pub use config::{CrosstalkConfig, ExperimentConfig, GateMode, ReadoutSpec, QST_SHOTS, RESET_SHOTS};
pub use feedforward::{run_feedforward, FeedforwardResult};
pub use programs::Plan;
pub use qst::{exact_populations, qst_exact, qst_reconstruct, signed_polar_angle, Projection, QstResult};
pub use randomwalk::{run_random_walk, run_random_walk_exact, GroupResult, RandomWalkResult};
pub use reset::{analytic_reset_series, run_reset, ResetResult};
pub use stabilize::{run_stabilization, RoundResult, StabilizationResult};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config {key}: {message}")]
    Config { key: String, message: String },
    #[error("schedule: {0}")]
    Schedule(String),
    #[error("incomplete tomography: missing projection {0}")]
    IncompleteTomography(String),
    #[error("thread pool: {0}")]
    Thread(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}

/// One discriminated readout of one shot.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ShotRow {
    pub shot: u32,
    pub measurement: u16,
    pub channel: u8,
    pub tag: u8,
    pub ro_start_ns: u64,
    pub i: f64,
    pub q: f64,
}

/// Per-shot readouts of one protocol variant, ordered by shot.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ShotTable {
    pub variant: String,
    pub rows: Vec<ShotRow>,
}

/// Runs `f(shot)` for every shot on a pool of `threads` workers (0 = all
/// cores) and returns the results in shot order.
pub fn parallel_map<T, F>(threads: usize, shots: usize, f: F) -> Result<Vec<T>, ExperimentError>
where
    T: Send,
    F: Fn(usize) -> Result<T, ExperimentError> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| ExperimentError::Thread(e.to_string()))?;
    pool.install(|| (0..shots).into_par_iter().map(f).collect())
}

/// Output of a batch of sampled shots of one plan.
pub struct Batch {
    pub table: ShotTable,
    /// Timeline of shot 0.
    pub timeline: EventTimeline,
}

/// Samples `shots` shots of `plan`. `stream` keeps the random streams of
/// different variants apart.
pub fn run_batch(
    cfg: &ExperimentConfig,
    plan: &Plan,
    register: &Register,
    cache: &ChannelCache,
    variant: &str,
    stream: u64,
    shots: usize,
) -> Result<Batch, ExperimentError> {
    let runs = parallel_map(cfg.threads, shots, |shot| {
        let mut backend = register.sampled(cfg, cache, shot_rng(cfg.seed, stream, shot as u64));
        let run = run_shot(&plan.boards, &cfg.latency, &mut backend, shot == 0)?;
        let rows: Vec<ShotRow> = run
            .readouts
            .iter()
            .map(|r| ShotRow {
                shot: shot as u32,
                measurement: r.measurement as u16,
                channel: r.channel as u8,
                tag: r.tag,
                ro_start_ns: r.ro_start,
                i: r.iq.i,
                q: r.iq.q,
            })
            .collect();
        Ok((rows, run.timeline))
    })?;
    let mut table = ShotTable { variant: variant.to_string(), rows: Vec::new() };
    let mut timeline = EventTimeline::new();
    for (rows, tl) in runs {
        table.rows.extend(rows);
        if let Some(tl) = tl {
            timeline = tl;
        }
    }
    Ok(Batch { table, timeline })
}

/// Binomial standard error of a fraction.
pub fn binomial_stderr(p: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).sqrt()
}
