use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::isa::{ControlInstruction, Opcode, Program, CHANNELS};

/// Default cap on executed instructions per board.
pub const DEFAULT_STEP_CAP: usize = 10_000;

/// A tag latched by a control board.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatchedTag {
    pub tag: u8,
    /// Arrival time; the tag is usable by instructions ending at or after it.
    pub valid_from: u64,
    pub consumed: bool,
}

/// Execution state of one control board.
#[derive(Clone, Debug, PartialEq)]
pub struct BoardState {
    pub pc: usize,
    pub pending: [Option<LatchedTag>; CHANNELS],
    /// Board time at which the current instruction started playing.
    pub cursor_ns: u64,
    pub steps: usize,
    pub halted: bool,
}

impl Default for BoardState {
    fn default() -> Self {
        Self { pc: 0, pending: [None; CHANNELS], cursor_ns: 0, steps: 0, halted: false }
    }
}

impl BoardState {
    pub fn latch(&mut self, channel: usize, tag: u8, t_ns: u64) {
        self.pending[channel] = Some(LatchedTag { tag, valid_from: t_ns, consumed: false });
    }

    /// Takes the latched tag of `channel` if it is valid by `deadline`.
    pub fn consume(&mut self, channel: usize, deadline: u64) -> Option<u8> {
        match &mut self.pending[channel] {
            Some(l) if !l.consumed && l.valid_from <= deadline => {
                l.consumed = true;
                Some(l.tag)
            }
            _ => None,
        }
    }
}

/// Next program counter after `instr`, given the branch tag if needed.
/// `None` means halt.
pub fn next_pc(pc: usize, instr: &ControlInstruction, tag: Option<u8>) -> Option<usize> {
    match instr.opcode {
        Opcode::Halt => None,
        Opcode::Next => Some(pc + 1),
        Opcode::Jump => Some(instr.index0 as usize),
        Opcode::Branch => Some(if tag == Some(0) { instr.index0 as usize } else { instr.index1 as usize }),
    }
}

/// One waveform segment played by a control board.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayedSegment {
    pub pc: usize,
    pub address0: u32,
    pub address1: u32,
}

/// Runs the control stream of `program` without timing, drawing one tag
/// from `tags` for every opcode-3 instruction.
pub fn execute_control<I>(program: &Program, tags: I, step_cap: usize) -> Result<Vec<PlayedSegment>, EngineError>
where
    I: IntoIterator<Item = u8>,
{
    let mut tags = tags.into_iter();
    let mut played = Vec::new();
    let mut pc = 0;
    for _ in 0..step_cap {
        let instr = program
            .control
            .get(pc)
            .ok_or(EngineError::PcOutOfRange { board: 0, pc, count: program.control.len() })?;
        if instr.opcode == Opcode::Halt {
            return Ok(played);
        }
        played.push(PlayedSegment { pc, address0: instr.address0, address1: instr.address1 });
        let tag = if instr.opcode == Opcode::Branch {
            Some(tags.next().ok_or(EngineError::TagStreamExhausted { pc })?)
        } else {
            None
        };
        match next_pc(pc, instr, tag) {
            Some(n) => pc = n,
            None => return Ok(played),
        }
    }
    Err(EngineError::StepLimit { board: 0, cap: step_cap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::isa::assemble;

    #[test]
    fn halt_plays_nothing() {
        let p = assemble("halt").unwrap();
        assert!(execute_control(&p, [], 10).unwrap().is_empty());
    }

    #[test]
    fn branch_on_one_takes_index1() {
        let p = assemble(
            "waveform w const=0 len=4\nwaveform x const=1 len=4\nplay w then branch a b\na: play w then halt\nb: play x then halt\n",
        )
        .unwrap();
        let run = execute_control(&p, [1], 10).unwrap();
        assert_eq!(run.iter().map(|s| s.pc).collect::<Vec<_>>(), vec![0, 3]);
        let run = execute_control(&p, [0], 10).unwrap();
        assert_eq!(run.iter().map(|s| s.pc).collect::<Vec<_>>(), vec![0, 1]);
    }

    #[test]
    fn loop_hits_cap() {
        let p = assemble("waveform w const=0 len=4\ntop: play w then next\nplay w then next\nplay w then jump top\n")
            .unwrap();
        assert_eq!(execute_control(&p, [], 7), Err(EngineError::StepLimit { board: 0, cap: 7 }));
    }

    #[test]
    fn falling_off_the_end_faults() {
        let p = assemble("waveform w const=0 len=4\nplay w then next\n").unwrap();
        assert!(matches!(execute_control(&p, [], 10), Err(EngineError::PcOutOfRange { pc: 1, .. })));
    }

    #[test]
    fn latch_validity() {
        let mut b = BoardState::default();
        b.latch(0, 1, 100);
        assert_eq!(b.consume(0, 99), None);
        assert_eq!(b.consume(0, 100), Some(1));
        assert_eq!(b.consume(0, 200), None);
    }
}
