use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::json;

/// Board 0 is the measure board; control boards are numbered from 1.
pub type BoardId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Trigger,
    RoStart,
    RoEnd,
    AdcIn,
    DemodDone,
    TagTx,
    TagRx,
    DacOut,
    GateStart,
    GateEnd,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Trigger => "trigger",
            Stage::RoStart => "ro_start",
            Stage::RoEnd => "ro_end",
            Stage::AdcIn => "adc_in",
            Stage::DemodDone => "demod_done",
            Stage::TagTx => "tag_tx",
            Stage::TagRx => "tag_rx",
            Stage::DacOut => "dac_out",
            Stage::GateStart => "gate_start",
            Stage::GateEnd => "gate_end",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    None,
    Readout { channel: usize, measurement: usize },
    Demod { channel: usize, i: f64, q: f64, tag: u8 },
    Packet { measurement: usize, lane_a: u8, lane_b: u8 },
    Segment { pc: usize, waveform: String },
    Gate { qubit: usize, waveform: String },
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::None => Ok(()),
            Payload::Readout { channel, measurement } => write!(f, "ch={channel};m={measurement}"),
            Payload::Demod { channel, i, q, tag } => write!(f, "ch={channel};i={i};q={q};tag={tag}"),
            Payload::Packet { measurement, lane_a, lane_b } => {
                write!(f, "m={measurement};a={lane_a:05b};b={lane_b:05b}")
            }
            Payload::Segment { pc, waveform } => write!(f, "pc={pc};wf={waveform}"),
            Payload::Gate { qubit, waveform } => write!(f, "q={qubit};wf={waveform}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t_ns: u64,
    pub board: BoardId,
    pub stage: Stage,
    pub payload: Payload,
}

/// Nanosecond-stamped record of every pipeline stage of one shot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EventTimeline {
    pub events: Vec<Event>,
}

impl EventTimeline {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t_ns: u64, board: BoardId, stage: Stage, payload: Payload) {
        self.events.push(Event { t_ns, board, stage, payload });
    }

    /// Stable sort by time; events at equal times keep emission order.
    pub fn sort(&mut self) {
        self.events.sort_by_key(|e| e.t_ns);
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].t_ns <= w[1].t_ns)
    }

    pub fn of_stage(&self, stage: Stage) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(move |e| e.stage == stage)
    }

    pub fn first(&self, stage: Stage) -> Option<&Event> {
        self.of_stage(stage).next()
    }

    pub fn count(&self, stage: Stage) -> usize {
        self.of_stage(stage).count()
    }

    /// Checks that every `tag_rx` has a matching `tag_tx` exactly
    /// `tau_tag` earlier.
    pub fn tags_consistent(&self, tau_tag: u64) -> bool {
        self.of_stage(Stage::TagRx).all(|rx| {
            let Payload::Packet { measurement, .. } = rx.payload else { return false };
            self.of_stage(Stage::TagTx).any(|tx| {
                matches!(tx.payload, Payload::Packet { measurement: m, .. } if m == measurement)
                    && tx.t_ns + tau_tag == rx.t_ns
            })
        })
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t_ns,board,stage,payload")?;
        for e in &self.events {
            writeln!(out, "{},{},{},{}", e.t_ns, e.board, e.stage.name(), e.payload)?;
        }
        Ok(())
    }

    /// Trace-event JSON (instant events, microsecond timestamps) with one
    /// track per board.
    pub fn to_trace_json(&self) -> serde_json::Value {
        let events: Vec<_> = self
            .events
            .iter()
            .map(|e| {
                json!({
                    "name": e.stage.name(),
                    "ph": "i",
                    "s": "t",
                    "ts": e.t_ns as f64 / 1000.0,
                    "pid": 0,
                    "tid": e.board,
                    "args": { "payload": e.payload.to_string() },
                })
            })
            .collect();
        json!({ "traceEvents": events, "displayTimeUnit": "ns" })
    }
}
