use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::control::{next_pc, BoardState, DEFAULT_STEP_CAP};
use super::{BoardId, EngineError, EventTimeline, LatencyModel, Payload, Stage};
use crate::isa::{serialize_masked, Opcode, Program, CHANNELS};
use crate::physics::{DensityMatrix, PulseGate};
use crate::readout::{discriminate, IqPoint};

/// What a named waveform does to its qubit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GateAction {
    Idle,
    Rotation(PulseGate),
    /// Z rotation by `-degrees` (Stark compensation).
    ZPhase { degrees: f64 },
}

impl GateAction {
    pub fn is_pulse(&self) -> bool {
        !matches!(self, GateAction::Idle)
    }
}

/// Physical meaning of waveform names. Unlisted names are idle.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GateLibrary {
    map: HashMap<String, GateAction>,
}

impl GateLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, action: GateAction) {
        self.map.insert(name.to_string(), action);
    }

    pub fn get(&self, name: &str) -> GateAction {
        self.map.get(name).copied().unwrap_or(GateAction::Idle)
    }
}

/// Quantum system driven by the boards.
pub trait QuantumBackend {
    /// Readout of `qubit` with the pulse on the resonator over
    /// `[start_ns, end_ns]`; returns the demodulated point.
    fn readout(&mut self, qubit: usize, start_ns: u64, end_ns: u64) -> Result<IqPoint, EngineError>;

    /// Drive `qubit` with `action` over `[start_ns, end_ns]` at the mixer.
    fn play(&mut self, qubit: usize, action: &GateAction, start_ns: u64, end_ns: u64) -> Result<(), EngineError>;

    /// Current qubit states, when the backend tracks them.
    fn states(&self) -> Vec<DensityMatrix> {
        Vec::new()
    }
}

#[derive(Clone, Debug)]
pub struct ControlBoard {
    pub program: Arc<Program>,
    pub qubit: usize,
    pub library: Arc<GateLibrary>,
}

/// One measure board (board 0) and its control boards (1..).
#[derive(Clone, Debug)]
pub struct BoardSet {
    pub measure: Arc<Program>,
    /// Qubit read out by each measure channel.
    pub channel_qubit: [Option<usize>; CHANNELS],
    pub controls: Vec<ControlBoard>,
    pub step_cap: usize,
}

impl BoardSet {
    pub fn new(measure: Program, channel_qubit: [Option<usize>; CHANNELS], controls: Vec<ControlBoard>) -> Self {
        Self { measure: Arc::new(measure), channel_qubit, controls, step_cap: DEFAULT_STEP_CAP }
    }

    pub fn validate(&self, latency: &LatencyModel) -> Result<(), EngineError> {
        self.measure.validate()?;
        for (index, m) in self.measure.measure.iter().enumerate() {
            if m.channel_mask != 0 && m.repetition > 0 && 4 * (m.delay as u64) < latency.tau_ao {
                return Err(EngineError::DelayTooShort { index, delay_ns: 4 * m.delay as u64, tau_ao: latency.tau_ao });
            }
            if let Some(channel) = m.channels().find(|&c| self.channel_qubit[c].is_none()) {
                return Err(EngineError::UnmappedChannel { channel });
            }
        }
        for c in &self.controls {
            c.program.validate()?;
        }
        Ok(())
    }

    /// Readout windows issued by the measure stream.
    pub fn readouts_per_shot(&self) -> usize {
        self.measure
            .measure
            .iter()
            .filter(|m| m.channel_mask != 0)
            .map(|m| m.repetition as usize * m.channels().count())
            .sum()
    }
}

/// One discriminated readout.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutRecord {
    pub measurement: usize,
    pub channel: usize,
    pub qubit: usize,
    pub ro_start: u64,
    pub adc_in: u64,
    pub iq: IqPoint,
    pub tag: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ShotRun {
    pub readouts: Vec<ReadoutRecord>,
    pub timeline: Option<EventTimeline>,
}

impl ShotRun {
    /// Tags of `channel` in readout order.
    pub fn tags(&self, channel: usize) -> Vec<u8> {
        self.readouts.iter().filter(|r| r.channel == channel).map(|r| r.tag).collect()
    }
}

#[derive(Clone, Debug)]
enum Action {
    TagArrive { board: usize, tags: u8 },
    InstrEnd { board: usize, pc: usize },
    InstrStart { board: usize, pc: usize },
    MeasureStart { index: usize },
    RoStart { index: usize },
    Gate { board: usize, action: GateAction, waveform: Arc<str>, start: u64, end: u64 },
}

impl Action {
    /// Tie-break at equal times: tags land before a branch resolves.
    fn class(&self) -> u8 {
        match self {
            Action::TagArrive { .. } => 0,
            Action::InstrEnd { .. } => 1,
            _ => 2,
        }
    }
}

struct Queue {
    heap: BinaryHeap<Reverse<(u64, u8, u64)>>,
    actions: Vec<Option<Action>>,
}

impl Queue {
    fn push(&mut self, t: u64, action: Action) {
        let seq = self.actions.len() as u64;
        self.heap.push(Reverse((t, action.class(), seq)));
        self.actions.push(Some(action));
    }

    fn pop(&mut self) -> Option<(u64, Action)> {
        let Reverse((t, _, seq)) = self.heap.pop()?;
        Some((t, self.actions[seq as usize].take().expect("action popped twice")))
    }
}

/// Runs one shot of `boards` against `backend` on the global nanosecond
/// clock, starting from a common trigger at t = 0.
pub fn run_shot<B: QuantumBackend + ?Sized>(
    boards: &BoardSet,
    latency: &LatencyModel,
    backend: &mut B,
    record: bool,
) -> Result<ShotRun, EngineError> {
    let mut timeline = record.then(EventTimeline::new);
    let mut log = |t: u64, board: BoardId, stage: Stage, payload: Payload| {
        if let Some(tl) = timeline.as_mut() {
            tl.push(t, board, stage, payload);
        }
    };
    let mut queue = Queue { heap: BinaryHeap::new(), actions: Vec::new() };
    let mut states: Vec<BoardState> = vec![BoardState::default(); boards.controls.len()];
    let mut readouts = Vec::new();
    let mut measurement = 0usize;

    log(0, 0, Stage::Trigger, Payload::None);
    if !boards.measure.measure.is_empty() {
        queue.push(0, Action::MeasureStart { index: 0 });
    }
    for board in 0..boards.controls.len() {
        log(0, board + 1, Stage::Trigger, Payload::None);
        queue.push(0, Action::InstrStart { board, pc: 0 });
    }

    while let Some((t, action)) = queue.pop() {
        match action {
            Action::MeasureStart { index } => {
                let m = boards.measure.measure[index];
                let period = 4 * (m.delay as u64 + m.length as u64);
                if m.channel_mask != 0 {
                    if 4 * (m.delay as u64) < latency.tau_ao {
                        return Err(EngineError::DelayTooShort {
                            index,
                            delay_ns: 4 * m.delay as u64,
                            tau_ao: latency.tau_ao,
                        });
                    }
                    for rep in 0..m.repetition as usize {
                        let ro_start = t + rep as u64 * period + 4 * m.delay as u64 - latency.tau_ao;
                        queue.push(ro_start, Action::RoStart { index });
                    }
                }
                if index + 1 < boards.measure.measure.len() {
                    queue.push(t + period * (m.repetition.max(1) as u64), Action::MeasureStart { index: index + 1 });
                }
            }
            Action::RoStart { index } => {
                let m = boards.measure.measure[index];
                let ro_end = t + latency.tau_ro;
                let adc_in = t + latency.tau_ao + 4 * m.length as u64;
                let demod_done = adc_in + latency.tau_adc + latency.tau_proc;
                let tag_rx = demod_done + latency.tau_tag;
                let mut tags = 0u8;
                for channel in m.channels() {
                    let qubit = boards.channel_qubit[channel].ok_or(EngineError::UnmappedChannel { channel })?;
                    let iq = backend.readout(qubit, t, ro_end)?;
                    let tag = discriminate(iq, boards.measure.thresholds[channel]);
                    tags |= tag << channel;
                    readouts.push(ReadoutRecord { measurement, channel, qubit, ro_start: t, adc_in, iq, tag });
                    log(t, 0, Stage::RoStart, Payload::Readout { channel, measurement });
                    log(ro_end, 0, Stage::RoEnd, Payload::Readout { channel, measurement });
                    log(adc_in, 0, Stage::AdcIn, Payload::Readout { channel, measurement });
                    log(demod_done, 0, Stage::DemodDone, Payload::Demod { channel, i: iq.i, q: iq.q, tag });
                }
                let packet = serialize_masked(tags, m.channel_mask);
                let payload = Payload::Packet { measurement, lane_a: packet.lane_a, lane_b: packet.lane_b };
                log(demod_done, 0, Stage::TagTx, payload.clone());
                for board in 0..boards.controls.len() {
                    log(tag_rx, board + 1, Stage::TagRx, payload.clone());
                    queue.push(tag_rx, Action::TagArrive { board, tags: tags | !m.channel_mask });
                }
                measurement += 1;
            }
            Action::TagArrive { board, tags } => {
                for ch in 0..CHANNELS {
                    states[board].latch(ch, (tags >> ch) & 1, t);
                }
            }
            Action::InstrStart { board, pc } => {
                let cb = &boards.controls[board];
                let st = &mut states[board];
                st.steps += 1;
                if st.steps > boards.step_cap {
                    return Err(EngineError::StepLimit { board: board + 1, cap: boards.step_cap });
                }
                let instr = cb.program.control.get(pc).ok_or(EngineError::PcOutOfRange {
                    board: board + 1,
                    pc,
                    count: cb.program.control.len(),
                })?;
                st.pc = pc;
                st.cursor_ns = t;
                if instr.opcode == Opcode::Halt {
                    st.halted = true;
                    continue;
                }
                let waveform: Arc<str> = match cb.program.memory.name_of(instr.address0, instr.address1) {
                    Some(n) => Arc::from(n),
                    None => Arc::from(format!("@{:#x}-{:#x}", instr.address0, instr.address1)),
                };
                let end = t + instr.segment_len() as u64;
                log(t + latency.tau_dac, board + 1, Stage::DacOut, Payload::Segment { pc, waveform: waveform.to_string() });
                let action = cb.library.get(&waveform);
                if action.is_pulse() {
                    let (start, stop) = (t + latency.tau_dac, end + latency.tau_dac);
                    queue.push(start, Action::Gate { board, action, waveform, start, end: stop });
                }
                queue.push(end, Action::InstrEnd { board, pc });
            }
            Action::InstrEnd { board, pc } => {
                let cb = &boards.controls[board];
                let instr = cb.program.control[pc];
                let tag = if instr.opcode == Opcode::Branch {
                    let channel = cb.program.tag_select as usize;
                    let tag = states[board].consume(channel, t).ok_or(EngineError::TagTiming {
                        board: board + 1,
                        pc,
                        deadline_ns: t,
                        channel,
                    })?;
                    Some(tag)
                } else {
                    None
                };
                if let Some(n) = next_pc(pc, &instr, tag) {
                    queue.push(t, Action::InstrStart { board, pc: n });
                }
            }
            Action::Gate { board, action, waveform, start, end } => {
                let qubit = boards.controls[board].qubit;
                backend.play(qubit, &action, start, end)?;
                log(start, board + 1, Stage::GateStart, Payload::Gate { qubit, waveform: waveform.to_string() });
                log(end, board + 1, Stage::GateEnd, Payload::Gate { qubit, waveform: waveform.to_string() });
            }
        }
    }
    drop(log);
    if let Some(tl) = timeline.as_mut() {
        tl.sort();
    }
    Ok(ShotRun { readouts, timeline })
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeedbackRound {
    /// Tag of the first readout.
    pub tag: u8,
    pub timeline: EventTimeline,
    pub readouts: Vec<ReadoutRecord>,
    pub post_states: Vec<DensityMatrix>,
}

/// One recorded shot whose first readout drives the conditional gates.
pub fn run_feedback_round<B: QuantumBackend + ?Sized>(
    boards: &BoardSet,
    latency: &LatencyModel,
    backend: &mut B,
) -> Result<FeedbackRound, EngineError> {
    boards.validate(latency)?;
    let run = run_shot(boards, latency, backend, true)?;
    let tag = run.readouts.first().map(|r| r.tag).ok_or(EngineError::NoReadout)?;
    Ok(FeedbackRound {
        tag,
        timeline: run.timeline.unwrap_or_default(),
        readouts: run.readouts,
        post_states: backend.states(),
    })
}

/// Backend returning pre-set demodulated points in order and ignoring
/// gates. Useful for timing studies.
#[derive(Clone, Debug, Default)]
pub struct ScriptedBackend {
    pub points: Vec<IqPoint>,
    next: usize,
    pub played: Vec<(usize, GateAction, u64, u64)>,
}

impl ScriptedBackend {
    pub fn new(points: Vec<IqPoint>) -> Self {
        Self { points, next: 0, played: Vec::new() }
    }
}

impl QuantumBackend for ScriptedBackend {
    fn readout(&mut self, _qubit: usize, _start_ns: u64, _end_ns: u64) -> Result<IqPoint, EngineError> {
        let p = self.points.get(self.next).copied().ok_or_else(|| EngineError::Backend("script exhausted".into()))?;
        self.next += 1;
        Ok(p)
    }

    fn play(&mut self, qubit: usize, action: &GateAction, start_ns: u64, end_ns: u64) -> Result<(), EngineError> {
        self.played.push((qubit, *action, start_ns, end_ns));
        Ok(())
    }
}
