use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{IsaError, MAX_ADDRESS};

pub const MEMORY_CAPACITY: u32 = MAX_ADDRESS + 1;
/// Allocation granularity; the BRAM is read four samples per clock.
pub const ALIGNMENT: u32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub start: u32,
    pub len: u32,
}

impl Segment {
    /// Last address (inclusive).
    pub fn end(&self) -> u32 {
        self.start + self.len - 1
    }
}

/// Named waveform segments in a 2²⁰-sample BRAM, one address per sample
/// at 1 GS/s. Unwritten addresses read as zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WaveformMemory {
    samples: Vec<i16>,
    segments: BTreeMap<String, Segment>,
}

impl WaveformMemory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `data` in the first 4-aligned gap that fits.
    pub fn allocate(&mut self, name: &str, data: &[i16]) -> Result<Segment, IsaError> {
        if self.segments.contains_key(name) {
            return Err(IsaError::DuplicateWaveform(name.to_string()));
        }
        if data.is_empty() {
            return Err(IsaError::EmptyWaveform(name.to_string()));
        }
        let len = u32::try_from(data.len()).map_err(|_| IsaError::OutOfMemory(name.to_string()))?;
        let mut taken: Vec<Segment> = self.segments.values().copied().collect();
        taken.sort_by_key(|s| s.start);
        let mut cursor = 0u32;
        for s in &taken {
            if cursor.checked_add(len).is_some_and(|e| e <= s.start) {
                break;
            }
            cursor = align_up(s.start + s.len);
        }
        if cursor as u64 + len as u64 > MEMORY_CAPACITY as u64 {
            return Err(IsaError::OutOfMemory(name.to_string()));
        }
        let seg = Segment { start: cursor, len };
        let end = (seg.start + seg.len) as usize;
        if self.samples.len() < end {
            self.samples.resize(end, 0);
        }
        self.samples[seg.start as usize..end].copy_from_slice(data);
        self.segments.insert(name.to_string(), seg);
        Ok(seg)
    }

    /// Places `data` at a fixed address, as when loading a program image.
    pub fn place(&mut self, name: &str, start: u32, data: &[i16]) -> Result<Segment, IsaError> {
        if self.segments.contains_key(name) {
            return Err(IsaError::DuplicateWaveform(name.to_string()));
        }
        if data.is_empty() {
            return Err(IsaError::EmptyWaveform(name.to_string()));
        }
        if start as u64 + data.len() as u64 > MEMORY_CAPACITY as u64 {
            return Err(IsaError::OutOfMemory(name.to_string()));
        }
        let seg = Segment { start, len: data.len() as u32 };
        if self.segments.values().any(|s| s.start <= seg.end() && seg.start <= s.end()) {
            return Err(IsaError::OutOfMemory(format!("{name} overlaps an existing segment")));
        }
        let end = (seg.start + seg.len) as usize;
        if self.samples.len() < end {
            self.samples.resize(end, 0);
        }
        self.samples[seg.start as usize..end].copy_from_slice(data);
        self.segments.insert(name.to_string(), seg);
        Ok(seg)
    }

    pub fn release(&mut self, name: &str) -> Option<Segment> {
        let seg = self.segments.remove(name)?;
        self.samples[seg.start as usize..(seg.start + seg.len) as usize].fill(0);
        Some(seg)
    }

    pub fn segment(&self, name: &str) -> Option<Segment> {
        self.segments.get(name).copied()
    }

    pub fn segments(&self) -> impl Iterator<Item = (&str, Segment)> {
        self.segments.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Name of the segment spanning exactly `[address0, address1]`.
    pub fn name_of(&self, address0: u32, address1: u32) -> Option<&str> {
        self.segments().find(|(_, s)| s.start == address0 && s.end() == address1).map(|(n, _)| n)
    }

    /// Samples at `[address0, address1]` inclusive.
    pub fn read(&self, address0: u32, address1: u32) -> Result<Vec<i16>, IsaError> {
        if address0 > address1 {
            return Err(IsaError::AddressOrder { address0, address1 });
        }
        if address1 > MAX_ADDRESS {
            return Err(IsaError::FieldRange { field: "address1", value: address1 as u64, max: MAX_ADDRESS as u64 });
        }
        Ok((address0..=address1).map(|a| self.samples.get(a as usize).copied().unwrap_or(0)).collect())
    }
}

fn align_up(x: u32) -> u32 {
    x.div_ceil(ALIGNMENT) * ALIGNMENT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_fit_aligned() {
        let mut m = WaveformMemory::new();
        let a = m.allocate("a", &[1; 5]).unwrap();
        let b = m.allocate("b", &[2; 3]).unwrap();
        assert_eq!((a.start, b.start), (0, 8));
        m.release("a");
        let c = m.allocate("c", &[3; 8]).unwrap();
        assert_eq!(c.start, 0);
        let d = m.allocate("d", &[4; 1]).unwrap();
        assert_eq!(d.start, 12);
        assert_eq!(m.read(8, 10).unwrap(), vec![2, 2, 2]);
        assert_eq!(m.name_of(8, 10), Some("b"));
    }

    #[test]
    fn errors() {
        let mut m = WaveformMemory::new();
        m.allocate("a", &[0]).unwrap();
        assert!(matches!(m.allocate("a", &[0]), Err(IsaError::DuplicateWaveform(_))));
        assert!(matches!(m.allocate("e", &[]), Err(IsaError::EmptyWaveform(_))));
        assert!(m.read(3, 2).is_err());
        assert!(m.read(0, MAX_ADDRESS + 1).is_err());
        assert!(matches!(m.place("z", MAX_ADDRESS, &[0, 0]), Err(IsaError::OutOfMemory(_))));
    }
}
