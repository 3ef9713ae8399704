//! Measure/control board instruction set, waveform memory, program images
//! and the feedback tag packet.

mod asm;
mod codec;
mod memory;
mod program;
mod tag;

use thiserror::Error;

pub use asm::{assemble, assemble_in, disassemble};
pub use codec::{
    decode_control, decode_measure, encode_control, encode_measure, ControlInstruction, MeasureInstruction, Opcode,
    CONTROL_WORD_BITS, MAX_ADDRESS, MEASURE_WORD_BITS,
};
pub use memory::{Segment, WaveformMemory, ALIGNMENT, MEMORY_CAPACITY};
pub use program::{Program, CHANNELS, MAGIC};
pub use tag::{deserialize_tag_packet, serialize_masked, serialize_tag_packet, TagPacket, TAG_CYCLES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IsaError {
    #[error("{field} = {value} exceeds {max}")]
    FieldRange { field: &'static str, value: u64, max: u64 },
    #[error("word {word:#x} wider than {bits} bits")]
    WordWidth { word: u64, bits: u32 },
    #[error("invalid opcode {0}")]
    InvalidOpcode(u8),
    #[error("address0 {address0:#x} > address1 {address1:#x}")]
    AddressOrder { address0: u32, address1: u32 },
    #[error("instruction {pc} targets {target} but program has {count} instructions")]
    BadTarget { pc: usize, target: usize, count: usize },
    #[error("tag packet framing: {0}")]
    Framing(String),
    #[error("waveform '{0}' already defined")]
    DuplicateWaveform(String),
    #[error("waveform '{0}' is empty")]
    EmptyWaveform(String),
    #[error("waveform memory exhausted placing '{0}'")]
    OutOfMemory(String),
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown label '{label}'")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: label '{label}' defined twice")]
    DuplicateLabel { line: usize, label: String },
    #[error("line {line}: label '{label}' points past the last instruction")]
    TargetPastEnd { line: usize, label: String },
    #[error("line {line}: {field} = {value} out of range")]
    RangeOverflow { line: usize, field: &'static str, value: u64 },
    #[error("line {line}: unknown waveform '{name}'")]
    UnknownWaveform { line: usize, name: String },
    #[error("program image: {0}")]
    Format(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl IsaError {
    /// Source line for assembler diagnostics.
    pub fn line(&self) -> Option<usize> {
        match self {
            IsaError::Syntax { line, .. }
            | IsaError::UnknownLabel { line, .. }
            | IsaError::DuplicateLabel { line, .. }
            | IsaError::TargetPastEnd { line, .. }
            | IsaError::RangeOverflow { line, .. }
            | IsaError::UnknownWaveform { line, .. } => Some(*line),
            _ => None,
        }
    }
}
