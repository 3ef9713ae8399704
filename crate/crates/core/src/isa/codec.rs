use serde::{Deserialize, Serialize};

use super::IsaError;

pub const MEASURE_WORD_BITS: u32 = 36;
pub const CONTROL_WORD_BITS: u32 = 60;
/// Highest addressable waveform sample.
pub const MAX_ADDRESS: u32 = (1 << 20) - 1;

/// Measure-board instruction: which channels to demodulate, how often, and
/// where the demodulation window sits relative to the instruction start.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MeasureInstruction {
    pub channel_mask: u8,
    /// 4-bit repetition count.
    pub repetition: u8,
    /// Window offset in 4 ns cycles.
    pub delay: u16,
    /// Window length in 4 ns cycles.
    pub length: u8,
}

impl MeasureInstruction {
    pub fn validate(&self) -> Result<(), IsaError> {
        if self.repetition > 0xF {
            return Err(IsaError::FieldRange { field: "repetition", value: self.repetition as u64, max: 0xF });
        }
        Ok(())
    }

    pub fn channels(&self) -> impl Iterator<Item = usize> + '_ {
        (0..8).filter(move |c| self.channel_mask & (1 << c) != 0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Opcode {
    Halt = 0,
    Next = 1,
    Jump = 2,
    Branch = 3,
}

impl Opcode {
    pub fn from_bits(bits: u8) -> Result<Self, IsaError> {
        match bits {
            0 => Ok(Opcode::Halt),
            1 => Ok(Opcode::Next),
            2 => Ok(Opcode::Jump),
            3 => Ok(Opcode::Branch),
            other => Err(IsaError::InvalidOpcode(other)),
        }
    }
}

/// Control-board instruction: play the waveform segment
/// `[address0, address1]`, then continue according to the opcode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ControlInstruction {
    pub opcode: Opcode,
    pub index0: u8,
    pub index1: u8,
    pub address0: u32,
    pub address1: u32,
}

impl ControlInstruction {
    pub const HALT: ControlInstruction =
        ControlInstruction { opcode: Opcode::Halt, index0: 0, index1: 0, address0: 0, address1: 0 };

    pub fn validate(&self) -> Result<(), IsaError> {
        for (field, v) in [("address0", self.address0), ("address1", self.address1)] {
            if v > MAX_ADDRESS {
                return Err(IsaError::FieldRange { field, value: v as u64, max: MAX_ADDRESS as u64 });
            }
        }
        if self.address0 > self.address1 {
            return Err(IsaError::AddressOrder { address0: self.address0, address1: self.address1 });
        }
        Ok(())
    }

    /// Samples played by this instruction (one per ns).
    pub fn segment_len(&self) -> u32 {
        self.address1 - self.address0 + 1
    }
}

/// Packs `channel_mask[7:0] | repetition[3:0] | delay[15:0] | length[7:0]`.
pub fn encode_measure(instr: &MeasureInstruction) -> Result<u64, IsaError> {
    instr.validate()?;
    Ok((instr.channel_mask as u64) << 28
        | (instr.repetition as u64) << 24
        | (instr.delay as u64) << 8
        | instr.length as u64)
}

pub fn decode_measure(word: u64) -> Result<MeasureInstruction, IsaError> {
    if word >> MEASURE_WORD_BITS != 0 {
        return Err(IsaError::WordWidth { word, bits: MEASURE_WORD_BITS });
    }
    Ok(MeasureInstruction {
        channel_mask: (word >> 28) as u8,
        repetition: ((word >> 24) & 0xF) as u8,
        delay: (word >> 8) as u16,
        length: word as u8,
    })
}

/// Packs `opcode[3:0] | index0[7:0] | index1[7:0] | address0[19:0] | address1[19:0]`.
pub fn encode_control(instr: &ControlInstruction) -> Result<u64, IsaError> {
    instr.validate()?;
    Ok((instr.opcode as u64) << 56
        | (instr.index0 as u64) << 48
        | (instr.index1 as u64) << 40
        | (instr.address0 as u64) << 20
        | instr.address1 as u64)
}

pub fn decode_control(word: u64) -> Result<ControlInstruction, IsaError> {
    if word >> CONTROL_WORD_BITS != 0 {
        return Err(IsaError::WordWidth { word, bits: CONTROL_WORD_BITS });
    }
    let mask20 = (1u64 << 20) - 1;
    let instr = ControlInstruction {
        opcode: Opcode::from_bits((word >> 56) as u8)?,
        index0: (word >> 48) as u8,
        index1: (word >> 40) as u8,
        address0: ((word >> 20) & mask20) as u32,
        address1: (word & mask20) as u32,
    };
    instr.validate()?;
    Ok(instr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_example_word() {
        let m = MeasureInstruction { channel_mask: 0x01, repetition: 1, delay: 0, length: 200 };
        assert_eq!(encode_measure(&m).unwrap(), 0x0_1100_00C8);
        assert_eq!(decode_measure(0x0_1100_00C8).unwrap(), m);
        let zero = MeasureInstruction { channel_mask: 0, repetition: 0, delay: 0, length: 0 };
        assert_eq!(encode_measure(&zero).unwrap(), 0);
    }

    #[test]
    fn control_example_word() {
        let c = ControlInstruction { opcode: Opcode::Branch, index0: 2, index1: 5, address0: 0x100, address1: 0x1FF };
        assert_eq!(encode_control(&c).unwrap(), 0x302_0500_1000_01FF);
        assert_eq!(encode_control(&ControlInstruction::HALT).unwrap(), 0);
    }

    #[test]
    fn range_errors() {
        let m = MeasureInstruction { channel_mask: 0, repetition: 16, delay: 0, length: 0 };
        assert!(matches!(encode_measure(&m), Err(IsaError::FieldRange { field: "repetition", .. })));
        assert!(matches!(decode_measure(1 << 36), Err(IsaError::WordWidth { .. })));
        assert!(matches!(decode_control(4 << 56), Err(IsaError::InvalidOpcode(4))));
        assert!(matches!(decode_control(1 << 60), Err(IsaError::WordWidth { .. })));
        let c = ControlInstruction { address0: 5, address1: 4, ..ControlInstruction::HALT };
        assert!(matches!(encode_control(&c), Err(IsaError::AddressOrder { .. })));
        let c = ControlInstruction { address1: 1 << 20, ..ControlInstruction::HALT };
        assert!(encode_control(&c).is_err());
    }
}
