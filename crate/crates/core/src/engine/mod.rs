//! Discrete-event model of the measure and control boards.

mod control;
mod latency;
mod measure;
mod sim;
mod timeline;

use thiserror::Error;

pub use control::{execute_control, next_pc, BoardState, LatchedTag, PlayedSegment, DEFAULT_STEP_CAP};
pub use latency::{
    loopback_timing_check, LatencyModel, TimingReport, ADC_OUTPUT_NS, ADC_PIPELINE_NS, CLOCK_NS,
    DAC_ACTUATE_STAGES, DAC_CHIP_NS, MEASURED_LOOPBACK_NS, PROC_STAGES, RECORD_NS,
};
pub use measure::{measure_board_pipeline, ChannelWindow};
pub use sim::{
    run_feedback_round, run_shot, BoardSet, ControlBoard, FeedbackRound, GateAction, GateLibrary, QuantumBackend,
    ReadoutRecord, ScriptedBackend, ShotRun,
};
pub use timeline::{BoardId, Event, EventTimeline, Payload, Stage};

use crate::isa::IsaError;
use crate::physics::PhysicsError;
use crate::readout::ReadoutError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("board {board}: program counter {pc} outside {count} instructions")]
    PcOutOfRange { board: usize, pc: usize, count: usize },
    #[error("tag stream exhausted at branch {pc}")]
    TagStreamExhausted { pc: usize },
    #[error("board {board}: exceeded {cap} executed instructions")]
    StepLimit { board: usize, cap: usize },
    #[error("tag timing violation: board {board} branch at pc {pc} needs channel {channel} tag by {deadline_ns} ns")]
    TagTiming { board: usize, pc: usize, deadline_ns: u64, channel: usize },
    #[error("measure instruction {index}: delay {delay_ns} ns shorter than the analog return {tau_ao} ns")]
    DelayTooShort { index: usize, delay_ns: u64, tau_ao: u64 },
    #[error("measure channel {channel} has no qubit")]
    UnmappedChannel { channel: usize },
    #[error("program performed no readout")]
    NoReadout,
    #[error("backend: {0}")]
    Backend(String),
    #[error(transparent)]
    Isa(#[from] IsaError),
    #[error(transparent)]
    Readout(#[from] ReadoutError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
}
