use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{
    decode_control, decode_measure, encode_control, encode_measure, ControlInstruction, IsaError,
    MeasureInstruction, Opcode, WaveformMemory, MAX_ADDRESS,
};

pub const CHANNELS: usize = 8;
pub const MAGIC: &[u8; 5] = b"QFBK1";

/// Instruction streams and registers loaded into the boards for one run.
/// The measure stream runs on the measure board, the control stream on
/// every control board.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub measure: Vec<MeasureInstruction>,
    pub control: Vec<ControlInstruction>,
    /// Discrimination threshold on demodulated I, per channel.
    pub thresholds: [f64; CHANNELS],
    /// Channel whose tag drives opcode-3 branches.
    pub tag_select: u8,
    pub memory: WaveformMemory,
}

impl Default for Program {
    fn default() -> Self {
        Self {
            measure: Vec::new(),
            control: Vec::new(),
            thresholds: [0.0; CHANNELS],
            tag_select: 0,
            memory: WaveformMemory::new(),
        }
    }
}

impl Program {
    pub fn validate(&self) -> Result<(), IsaError> {
        if self.tag_select as usize >= CHANNELS {
            return Err(IsaError::FieldRange { field: "tag_select", value: self.tag_select as u64, max: 7 });
        }
        for m in &self.measure {
            m.validate()?;
        }
        let n = self.control.len();
        for (pc, c) in self.control.iter().enumerate() {
            c.validate()?;
            let targets: &[u8] = match c.opcode {
                Opcode::Jump => &[c.index0],
                Opcode::Branch => &[c.index0, c.index1],
                _ => &[],
            };
            for &t in targets {
                if t as usize >= n {
                    return Err(IsaError::BadTarget { pc, target: t as usize, count: n });
                }
            }
            if c.address1 > MAX_ADDRESS {
                return Err(IsaError::FieldRange { field: "address1", value: c.address1 as u64, max: MAX_ADDRESS as u64 });
            }
        }
        Ok(())
    }

    pub fn measure_words(&self) -> Result<Vec<u64>, IsaError> {
        self.measure.iter().map(encode_measure).collect()
    }

    pub fn control_words(&self) -> Result<Vec<u64>, IsaError> {
        self.control.iter().map(encode_control).collect()
    }

    /// Writes the binary program image (layout in `docs/program-format.md`).
    pub fn write_binary<W: Write>(&self, mut out: W) -> Result<(), IsaError> {
        self.validate()?;
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&[0; 3]);
        for words in [self.measure_words()?, self.control_words()?] {
            put(&mut buf, words.len() as u64);
            for w in words {
                put(&mut buf, w);
            }
        }
        put(&mut buf, CHANNELS as u64 + 1);
        for t in self.thresholds {
            put(&mut buf, t.to_bits());
        }
        put(&mut buf, self.tag_select as u64);
        let segments: Vec<_> = self.memory.segments().collect();
        put(&mut buf, segments.len() as u64);
        for (name, seg) in segments {
            put(&mut buf, name.len() as u64);
            put_padded(&mut buf, name.as_bytes());
            put(&mut buf, seg.start as u64);
            put(&mut buf, seg.len as u64);
            let samples = self.memory.read(seg.start, seg.end())?;
            let bytes: Vec<u8> = samples.iter().flat_map(|s| s.to_le_bytes()).collect();
            put_padded(&mut buf, &bytes);
        }
        out.write_all(&buf).map_err(|e| IsaError::Io(e.to_string()))
    }

    pub fn read_binary<R: Read>(mut input: R) -> Result<Self, IsaError> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes).map_err(|e| IsaError::Io(e.to_string()))?;
        let mut r = Reader { bytes: &bytes, pos: 0 };
        let header = r.take(8)?;
        if &header[..5] != MAGIC {
            return Err(IsaError::Format("bad magic".into()));
        }
        let measure = r.words()?.into_iter().map(decode_measure).collect::<Result<_, _>>()?;
        let control = r.words()?.into_iter().map(decode_control).collect::<Result<_, _>>()?;
        let nreg = r.u64()?;
        if nreg != CHANNELS as u64 + 1 {
            return Err(IsaError::Format(format!("expected {} registers, found {nreg}", CHANNELS + 1)));
        }
        let mut thresholds = [0.0; CHANNELS];
        for t in &mut thresholds {
            *t = f64::from_bits(r.u64()?);
        }
        let tag_select = u8::try_from(r.u64()?).map_err(|_| IsaError::Format("tag_select".into()))?;
        let mut memory = WaveformMemory::new();
        for _ in 0..r.u64()? {
            let name_len = r.len()?;
            let name = String::from_utf8(r.padded(name_len)?.to_vec())
                .map_err(|_| IsaError::Format("waveform name is not UTF-8".into()))?;
            let start = u32::try_from(r.u64()?).map_err(|_| IsaError::Format("segment start".into()))?;
            let len = r.len()?;
            let raw = r.padded(len * 2)?;
            let samples: Vec<i16> = raw.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])).collect();
            memory.place(&name, start, &samples)?;
        }
        if r.pos != bytes.len() {
            return Err(IsaError::Format("trailing bytes".into()));
        }
        let program = Program { measure, control, thresholds, tag_select, memory };
        program.validate()?;
        Ok(program)
    }
}

fn put(buf: &mut Vec<u8>, v: u64) {
    buf.extend_from_slice(&v.to_le_bytes());
}

fn put_padded(buf: &mut Vec<u8>, data: &[u8]) {
    buf.extend_from_slice(data);
    buf.resize(buf.len() + (8 - data.len() % 8) % 8, 0);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], IsaError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            IsaError::Format(format!("truncated at byte {}", self.pos))
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64, IsaError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, IsaError> {
        let v = self.u64()?;
        usize::try_from(v).ok().filter(|&n| n <= self.bytes.len()).ok_or_else(|| IsaError::Format(format!("length {v}")))
    }

    fn words(&mut self) -> Result<Vec<u64>, IsaError> {
        let n = self.len()?;
        (0..n).map(|_| self.u64()).collect()
    }

    fn padded(&mut self, n: usize) -> Result<&'a [u8], IsaError> {
        let s = self.take(n)?;
        self.take((8 - n % 8) % 8)?;
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let mut p = Program::default();
        let seg = p.memory.allocate("pi", &[100, -200, 300]).unwrap();
        p.measure.push(MeasureInstruction { channel_mask: 1, repetition: 1, delay: 40, length: 200 });
        p.control.push(ControlInstruction {
            opcode: Opcode::Branch,
            index0: 1,
            index1: 1,
            address0: seg.start,
            address1: seg.end(),
        });
        p.control.push(ControlInstruction::HALT);
        p.thresholds[3] = -1.5;
        p.tag_select = 2;
        let mut buf = Vec::new();
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"QFBK1");
        assert_eq!(buf.len() % 8, 0);
        assert_eq!(Program::read_binary(&buf[..]).unwrap(), p);
    }

    #[test]
    fn corrupt_images_rejected() {
        let mut buf = Vec::new();
        Program::default().write_binary(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(Program::read_binary(&bad[..]), Err(IsaError::Format(_))));
        assert!(Program::read_binary(&buf[..buf.len() - 8]).is_err());
    }

    #[test]
    fn branch_target_checked() {
        let mut p = Program::default();
        p.control.push(ControlInstruction { opcode: Opcode::Jump, index0: 3, ..ControlInstruction::HALT });
        assert!(matches!(p.validate(), Err(IsaError::BadTarget { target: 3, .. })));
    }
}
