//! Generators for the measure and control programs of each protocol.
//!
//! Programs are emitted as assembly text and assembled, so every run goes
//! through the same encoder, memory allocator and label resolution as a
//! hand-written program. Waveform names carry the physical meaning through
//! a [`GateLibrary`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use super::config::ExperimentConfig;
use super::qst::Projection;
use super::ExperimentError;
use crate::engine::{BoardSet, ControlBoard, GateAction, GateLibrary, LatencyModel};
use crate::isa::{assemble, CHANNELS};
use crate::physics::{stark_phase_deg, Axis, PulseGate};

pub const SIGNAL_QUBIT: usize = 0;
pub const TARGET_QUBIT: usize = 1;
pub const SIGNAL_CHANNEL: usize = 0;
pub const TARGET_CHANNEL: usize = 1;

const PULSE_AMPLITUDE: i16 = 8000;

/// Timing of one readout window on the global clock.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Window {
    pub mask: u8,
    pub ro_start: u64,
    pub ro_end: u64,
    pub adc_in: u64,
    pub tag_rx: u64,
}

fn schedule_err(message: String) -> ExperimentError {
    ExperimentError::Schedule(message)
}

/// Measure-board instruction stream with an explicit time cursor.
#[derive(Clone, Debug)]
pub struct MeasureStream {
    latency: LatencyModel,
    delay: u64,
    length: u64,
    cursor: u64,
    lines: Vec<String>,
    windows: Vec<Window>,
}

impl MeasureStream {
    pub fn new(latency: &LatencyModel) -> Result<Self, ExperimentError> {
        let delay = latency.tau_ao.div_ceil(4);
        let length = latency.tau_ro.div_ceil(4);
        if delay > u16::MAX as u64 {
            return Err(schedule_err(format!("analog return {} ns exceeds the delay field", latency.tau_ao)));
        }
        if length == 0 || length > u8::MAX as u64 {
            return Err(schedule_err(format!("readout length {} ns outside the length field", latency.tau_ro)));
        }
        Ok(Self { latency: *latency, delay, length, cursor: 0, lines: Vec::new(), windows: Vec::new() })
    }

    /// Gap between the instruction start plus delay and the pulse start.
    fn offset(&self) -> u64 {
        4 * self.delay - self.latency.tau_ao
    }

    fn wait(&mut self, ns: u64) {
        let mut cycles = ns / 4;
        while cycles > 0 {
            let c = cycles.min(u16::MAX as u64);
            self.lines.push(format!("measure mask=0 rep=1 delay={c} len=0"));
            cycles -= c;
        }
    }

    /// Schedules a readout of `mask` whose pulse starts no earlier than
    /// `earliest_ro_start`.
    pub fn readout(&mut self, mask: u8, earliest_ro_start: u64) -> Window {
        let off = self.offset();
        let start = self.cursor.max(earliest_ro_start.saturating_sub(off)).next_multiple_of(4);
        self.wait(start - self.cursor);
        self.lines.push(format!("measure mask={mask:#04x} rep=1 delay={} len={}", self.delay, self.length));
        let l = &self.latency;
        let ro_start = start + off;
        let adc_in = ro_start + l.tau_ao + 4 * self.length;
        let w = Window {
            mask,
            ro_start,
            ro_end: ro_start + l.tau_ro,
            adc_in,
            tag_rx: adc_in + l.tau_adc + l.tau_proc + l.tau_tag,
        };
        self.cursor = start + 4 * (self.delay + self.length);
        self.windows.push(w);
        w
    }

    pub fn windows(&self) -> &[Window] {
        &self.windows
    }

    pub fn text(&self, thresholds: &[(usize, f64)]) -> String {
        let mut s = String::new();
        for (ch, v) in thresholds {
            let _ = writeln!(s, "threshold {ch} {v}");
        }
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        s
    }
}

/// Control-board instruction stream. Times are board times; the mixer
/// sees everything `tau_dac` later.
#[derive(Clone, Debug)]
pub struct ControlStream {
    latency: LatencyModel,
    cursor: u64,
    lines: Vec<String>,
    waveforms: BTreeMap<String, (u64, i16)>,
    branches: usize,
}

impl ControlStream {
    pub fn new(latency: &LatencyModel) -> Self {
        Self { latency: *latency, cursor: 0, lines: Vec::new(), waveforms: BTreeMap::new(), branches: 0 }
    }

    /// Board time at which the next instruction starts.
    pub fn cursor(&self) -> u64 {
        self.cursor
    }

    /// Mixer time at which everything played so far has finished.
    pub fn mixer_cursor(&self) -> u64 {
        self.cursor + self.latency.tau_dac
    }

    fn waveform(&mut self, name: &str, len: u64, value: i16) -> String {
        self.waveforms.insert(name.to_string(), (len, value));
        name.to_string()
    }

    fn wait_waveform(&mut self, len: u64) -> String {
        self.waveform(&format!("wait{len}"), len, 0)
    }

    fn slot(&mut self, gate: Option<&str>) -> String {
        let len = self.latency.tau_gt;
        match gate {
            Some(g) => self.waveform(g, len, PULSE_AMPLITUDE),
            None => self.waveform(&format!("idle{len}"), len, 0),
        }
    }

    pub fn wait_until(&mut self, t: u64) {
        if t > self.cursor {
            let w = self.wait_waveform(t - self.cursor);
            self.lines.push(format!("play {w} then next"));
            self.cursor = t;
        }
    }

    /// Plays one gate slot; `None` idles for the slot.
    pub fn pulse(&mut self, gate: Option<&str>) {
        let w = self.slot(gate);
        self.lines.push(format!("play {w} then next"));
        self.cursor += self.latency.tau_gt;
    }

    /// Conditional gate slot starting exactly at `deadline`. The branch
    /// instruction plays `pre` (a pulse of the given length) or a plain
    /// wait, and resolves when it ends at `deadline`.
    pub fn branch(
        &mut self,
        deadline: u64,
        pre: Option<(&str, u64)>,
        on0: Option<&str>,
        on1: Option<&str>,
    ) -> Result<(), ExperimentError> {
        let pre_name = match pre {
            Some((name, len)) => {
                if deadline < self.cursor + len {
                    return Err(schedule_err(format!("no room for '{name}' before the branch at {deadline} ns")));
                }
                self.wait_until(deadline - len);
                self.waveform(name, len, PULSE_AMPLITUDE)
            }
            None => {
                if deadline <= self.cursor {
                    return Err(schedule_err(format!(
                        "branch at {deadline} ns is not after the board cursor {} ns",
                        self.cursor
                    )));
                }
                self.wait_waveform(deadline - self.cursor)
            }
        };
        let k = self.branches;
        self.branches += 1;
        let a = self.slot(on0);
        let b = self.slot(on1);
        self.lines.push(format!("play {pre_name} then branch g{k} e{k}"));
        self.lines.push(format!("g{k}: play {a} then jump j{k}"));
        self.lines.push(format!("e{k}: play {b} then next"));
        self.lines.push(format!("j{k}:"));
        self.cursor = deadline + self.latency.tau_gt;
        Ok(())
    }

    pub fn text(&self, tag_select: usize) -> String {
        let mut s = String::new();
        for (name, (len, value)) in &self.waveforms {
            let _ = writeln!(s, "waveform {name} const={value} len={len}");
        }
        let _ = writeln!(s, "tag_select {tag_select}");
        for l in &self.lines {
            let _ = writeln!(s, "{l}");
        }
        s.push_str("halt\n");
        s
    }
}

/// Board programs of one protocol variant, with their sources.
#[derive(Clone, Debug)]
pub struct Plan {
    pub boards: BoardSet,
    pub windows: Vec<Window>,
    /// `(file stem, assembly text)` per board, measure board first.
    pub sources: Vec<(String, String)>,
}

/// Waveform names and their physical actions.
pub fn gate_library(cfg: &ExperimentConfig) -> Result<GateLibrary, ExperimentError> {
    use std::f64::consts::{FRAC_PI_2, PI};
    let d = cfg.latency.tau_gt as f64;
    let mut lib = GateLibrary::new();
    let mut add = |name: &str, axis: Axis, angle: f64| -> Result<(), ExperimentError> {
        lib.insert(name, GateAction::Rotation(PulseGate::new(axis, angle, d)?));
        Ok(())
    };
    add("pi", Axis::PlusY, PI)?;
    add("ry90p", Axis::PlusY, FRAC_PI_2)?;
    add("ry90m", Axis::MinusY, FRAC_PI_2)?;
    add("stepp", Axis::PlusY, cfg.theta_step_rad)?;
    add("stepm", Axis::MinusY, cfg.theta_step_rad)?;
    for p in Projection::ALL {
        if let Some((axis, angle)) = p.pre_rotation() {
            add(p.waveform(), axis, angle)?;
        }
    }
    lib.insert("zc", GateAction::ZPhase { degrees: compensation_deg(cfg) });
    Ok(lib)
}

/// Z correction applied to the target after each signal readout.
pub fn compensation_deg(cfg: &ExperimentConfig) -> f64 {
    match cfg.crosstalk.compensation_deg {
        Some(v) => v,
        None if cfg.crosstalk.enabled => stark_phase_deg(cfg.crosstalk.stark_detuning_mhz, cfg.latency.tau_ro as f64),
        None => 0.0,
    }
}

fn build(
    cfg: &ExperimentConfig,
    measure: &MeasureStream,
    controls: Vec<(&str, ControlStream, usize)>,
) -> Result<Plan, ExperimentError> {
    let lib = Arc::new(gate_library(cfg)?);
    let mtext = measure.text(&[(SIGNAL_CHANNEL, 0.0), (TARGET_CHANNEL, 0.0)]);
    let mut sources = vec![("measure".to_string(), mtext.clone())];
    let mut boards = Vec::new();
    for (stem, stream, qubit) in controls {
        let text = stream.text(SIGNAL_CHANNEL);
        let program = assemble(&text)?;
        boards.push(ControlBoard { program: Arc::new(program), qubit, library: lib.clone() });
        sources.push((stem.to_string(), text));
    }
    let mut map = [None; CHANNELS];
    map[SIGNAL_CHANNEL] = Some(SIGNAL_QUBIT);
    map[TARGET_CHANNEL] = Some(TARGET_QUBIT);
    let set = BoardSet::new(assemble(&mtext)?, map, boards);
    set.validate(&cfg.latency)?;
    Ok(Plan { boards: set, windows: measure.windows().to_vec(), sources })
}

const SIGNAL_MASK: u8 = 1 << SIGNAL_CHANNEL;
const TARGET_MASK: u8 = 1 << TARGET_CHANNEL;

/// Earliest readout start after the prepared qubit's first pulse.
fn first_readout(l: &LatencyModel) -> u64 {
    l.tau_dac + l.tau_gt
}

/// π pulse, then `rounds` measure-and-conditional-π loops, then a final
/// measurement: `rounds + 1` readouts of the signal qubit.
pub fn reset_plan(cfg: &ExperimentConfig, rounds: usize) -> Result<Plan, ExperimentError> {
    let l = &cfg.latency;
    let mut m = MeasureStream::new(l)?;
    let mut c = ControlStream::new(l);
    c.pulse(Some("pi"));
    let mut w = m.readout(SIGNAL_MASK, first_readout(l));
    for _ in 0..rounds {
        c.branch(w.tag_rx, None, None, Some("pi"))?;
        w = m.readout(SIGNAL_MASK, c.mixer_cursor());
    }
    build(cfg, &m, vec![("control_signal", c, SIGNAL_QUBIT)])
}

/// Equator preparation, `loops` feedback stabilization rounds, then one
/// tomography projection of the signal qubit.
pub fn stabilization_plan(cfg: &ExperimentConfig, loops: usize, projection: Projection) -> Result<Plan, ExperimentError> {
    let l = &cfg.latency;
    let mut m = MeasureStream::new(l)?;
    let mut c = ControlStream::new(l);
    c.pulse(Some("ry90p"));
    for _ in 0..loops {
        let w = m.readout(SIGNAL_MASK, c.mixer_cursor());
        c.branch(w.tag_rx, None, Some("ry90p"), Some("ry90m"))?;
    }
    c.pulse(projection.pre_rotation().map(|_| projection.waveform()));
    m.readout(SIGNAL_MASK, c.mixer_cursor());
    build(cfg, &m, vec![("control_signal", c, SIGNAL_QUBIT)])
}

/// Signal on the equator, measured; the target is flipped when the signal
/// reads excited, then measured.
pub fn feedforward_plan(cfg: &ExperimentConfig) -> Result<Plan, ExperimentError> {
    let l = &cfg.latency;
    let mut m = MeasureStream::new(l)?;
    let mut signal = ControlStream::new(l);
    let mut target = ControlStream::new(l);
    signal.pulse(Some("ry90p"));
    let w = m.readout(SIGNAL_MASK, signal.mixer_cursor());
    target.branch(w.tag_rx, None, None, Some("pi"))?;
    m.readout(TARGET_MASK, target.mixer_cursor());
    build(cfg, &m, vec![("control_signal", signal, SIGNAL_QUBIT), ("control_target", target, TARGET_QUBIT)])
}

/// Plain readout of the initialized target qubit.
pub fn target_reference_plan(cfg: &ExperimentConfig) -> Result<Plan, ExperimentError> {
    let l = &cfg.latency;
    let mut m = MeasureStream::new(l)?;
    m.readout(TARGET_MASK, first_readout(l));
    build(cfg, &m, vec![])
}

/// Random walk of the target driven by the stabilized signal qubit. Each
/// step measures the signal, re-stabilizes it, compensates the target's
/// Stark phase and rotates the target by ±θ. Ends with one tomography
/// projection of the target.
pub fn random_walk_plan(cfg: &ExperimentConfig, steps: usize, projection: Projection) -> Result<Plan, ExperimentError> {
    let l = &cfg.latency;
    let mut m = MeasureStream::new(l)?;
    let mut signal = ControlStream::new(l);
    let mut target = ControlStream::new(l);
    let zc = compensation_deg(cfg) != 0.0 && l.tau_z > 0;
    // The Z pulse overlaps the tag wait, but the step still budgets its
    // duration so the period matches the decoherence accounting.
    let pad = if zc { l.tau_z } else { 0 };
    signal.pulse(Some("ry90p"));
    for k in 0..steps {
        let ready = signal.mixer_cursor().max(target.mixer_cursor());
        let w = m.readout(SIGNAL_MASK, if k == 0 { ready } else { ready + pad });
        signal.branch(w.tag_rx, None, Some("ry90p"), Some("ry90m"))?;
        let pre = zc.then_some(("zc", l.tau_z));
        target.branch(w.tag_rx, pre, Some("stepp"), Some("stepm"))?;
    }
    target.pulse(projection.pre_rotation().map(|_| projection.waveform()));
    m.readout(TARGET_MASK, target.mixer_cursor());
    build(cfg, &m, vec![("control_signal", signal, SIGNAL_QUBIT), ("control_target", target, TARGET_QUBIT)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_shot, ScriptedBackend, Stage};
    use crate::readout::IqPoint;

    #[test]
    fn reset_windows_follow_the_loop() {
        let cfg = ExperimentConfig::default();
        let plan = reset_plan(&cfg, 6).unwrap();
        assert_eq!(plan.windows.len(), 7);
        assert_eq!(plan.windows[0].ro_start, 108);
        for w in plan.windows.windows(2) {
            // tag lands, gate plays after tau_dac, next readout follows the gate
            assert_eq!(w[1].ro_start, w[0].tag_rx + cfg.latency.tau_dac + cfg.latency.tau_gt);
        }
        let mut backend = ScriptedBackend::new(vec![IqPoint::new(-1.0, 0.0); 7]);
        let run = run_shot(&plan.boards, &cfg.latency, &mut backend, true).unwrap();
        let tl = run.timeline.unwrap();
        let ro: Vec<u64> = tl.of_stage(Stage::RoStart).map(|e| e.t_ns).collect();
        assert_eq!(ro, plan.windows.iter().map(|w| w.ro_start).collect::<Vec<_>>());
        assert_eq!(tl.count(Stage::GateStart), 7);
    }

    #[test]
    fn random_walk_gates_land_together() {
        let cfg = ExperimentConfig::default();
        let plan = random_walk_plan(&cfg, 3, Projection::XPlus).unwrap();
        let mut backend = ScriptedBackend::new(vec![IqPoint::new(1.0, 0.0); 4]);
        let run = run_shot(&plan.boards, &cfg.latency, &mut backend, true).unwrap();
        let tl = run.timeline.unwrap();
        let adc: Vec<u64> = tl.of_stage(Stage::AdcIn).map(|e| e.t_ns).collect();
        for (k, w) in plan.windows[..3].iter().enumerate() {
            assert_eq!(adc[k], w.adc_in);
            let starts: Vec<_> = backend.played.iter().filter(|p| p.2 == w.adc_in + 140).collect();
            assert_eq!(starts.len(), 2, "signal and target gates at step {k}");
        }
        let zc: Vec<_> = backend.played.iter().filter(|p| matches!(p.1, GateAction::ZPhase { .. })).collect();
        assert_eq!(zc.len(), 3);
        assert!(zc.iter().all(|p| p.3 - p.2 == cfg.latency.tau_z));
    }

    #[test]
    fn branch_needs_room() {
        let l = LatencyModel::default();
        let mut c = ControlStream::new(&l);
        c.pulse(None);
        assert!(c.branch(40, None, None, None).is_err());
        assert!(c.branch(45, Some(("zc", 10)), None, None).is_err());
        c.branch(50, Some(("zc", 10)), None, None).unwrap();
        assert_eq!(c.cursor(), 90);
    }
}
