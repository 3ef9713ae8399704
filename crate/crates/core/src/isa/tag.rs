use serde::{Deserialize, Serialize};

use super::IsaError;

pub const TAG_CYCLES: usize = 5;

/// Feedback tag packet: two serial lanes of five cycles each. Bit 4 of
/// each lane is the first (head) cycle; the remaining bits carry qubits
/// 1, 3, 5, 7 on lane A and 2, 4, 6, 8 on lane B, in that order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TagPacket {
    pub lane_a: u8,
    pub lane_b: u8,
}

const HEAD: u8 = 1 << 4;

impl TagPacket {
    /// Packet carrying no measured channel.
    pub const IDLE: TagPacket = TagPacket { lane_a: 0x1F, lane_b: 0x1F };

    /// Tag of channel `ch` (0-based, qubit `ch + 1`).
    pub fn tag(&self, ch: usize) -> u8 {
        let lane = if ch % 2 == 0 { self.lane_a } else { self.lane_b };
        (lane >> (3 - ch / 2)) & 1
    }

    /// The (lane A, lane B) bit pair sent in each clock cycle.
    pub fn cycles(&self) -> [(u8, u8); TAG_CYCLES] {
        std::array::from_fn(|k| ((self.lane_a >> (4 - k)) & 1, (self.lane_b >> (4 - k)) & 1))
    }

    pub fn from_cycles(cycles: &[(u8, u8); TAG_CYCLES]) -> Result<Self, IsaError> {
        let mut lane_a = 0;
        let mut lane_b = 0;
        for &(a, b) in cycles {
            if a > 1 || b > 1 {
                return Err(IsaError::Framing("lane values must be single bits".into()));
            }
            lane_a = lane_a << 1 | a;
            lane_b = lane_b << 1 | b;
        }
        let packet = TagPacket { lane_a, lane_b };
        packet.check_head()?;
        Ok(packet)
    }

    fn check_head(&self) -> Result<(), IsaError> {
        if self.lane_a > 0x1F || self.lane_b > 0x1F {
            return Err(IsaError::Framing("lane wider than 5 bits".into()));
        }
        if self.lane_a & HEAD == 0 || self.lane_b & HEAD == 0 {
            return Err(IsaError::Framing("missing head bit".into()));
        }
        Ok(())
    }
}

/// Bit `k` of `tags` is the tag of qubit `k + 1`.
pub fn serialize_tag_packet(tags: u8) -> TagPacket {
    let mut lane_a = HEAD;
    let mut lane_b = HEAD;
    for ch in 0..8 {
        let bit = (tags >> ch) & 1;
        let pos = 3 - ch / 2;
        if ch % 2 == 0 {
            lane_a |= bit << pos;
        } else {
            lane_b |= bit << pos;
        }
    }
    TagPacket { lane_a, lane_b }
}

/// Packet for the measured channels in `mask`; every other channel carries
/// the default tag 1.
pub fn serialize_masked(tags: u8, mask: u8) -> TagPacket {
    serialize_tag_packet(tags | !mask)
}

pub fn deserialize_tag_packet(packet: &TagPacket) -> Result<u8, IsaError> {
    packet.check_head()?;
    Ok((0..8).fold(0u8, |acc, ch| acc | packet.tag(ch) << ch))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_unused_is_all_ones() {
        assert_eq!(serialize_masked(0, 0), TagPacket::IDLE);
        assert!(TagPacket::IDLE.cycles().iter().all(|&c| c == (1, 1)));
    }

    #[test]
    fn qubit_one_ground() {
        let p = serialize_masked(0, 0x01);
        assert_eq!(p.lane_a, 0b10111);
        assert_eq!(p.lane_b, 0b11111);
        let lane_a: Vec<u8> = p.cycles().iter().map(|c| c.0).collect();
        assert_eq!(lane_a, [1, 0, 1, 1, 1]);
    }

    #[test]
    fn missing_head_rejected() {
        assert!(matches!(
            deserialize_tag_packet(&TagPacket { lane_a: 0x0F, lane_b: 0x1F }),
            Err(IsaError::Framing(_))
        ));
        assert!(TagPacket::from_cycles(&[(1, 0), (1, 1), (1, 1), (1, 1), (1, 1)]).is_err());
    }

    #[test]
    fn exhaustive_round_trip() {
        for tags in 0..=255u8 {
            let p = serialize_tag_packet(tags);
            assert_eq!(deserialize_tag_packet(&p).unwrap(), tags);
            assert_eq!(TagPacket::from_cycles(&p.cycles()).unwrap(), p);
        }
    }
}
