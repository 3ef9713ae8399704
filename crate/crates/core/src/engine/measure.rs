use super::EngineError;
use crate::isa::{serialize_masked, TagPacket, CHANNELS};
use crate::readout::{demodulate, discriminate, DemodConfig, IqPoint};

/// Raw base-band samples of one enabled channel for one demod window.
#[derive(Clone, Debug)]
pub struct ChannelWindow<'a> {
    pub channel: usize,
    pub i: &'a [f64],
    pub q: &'a [f64],
    pub demod: DemodConfig,
}

/// Demodulates and discriminates every enabled channel and packs the tags.
/// Channels without a window carry the default tag 1.
pub fn measure_board_pipeline(
    windows: &[ChannelWindow<'_>],
    thresholds: &[f64; CHANNELS],
) -> Result<(TagPacket, Vec<IqPoint>), EngineError> {
    let mut tags = 0u8;
    let mut mask = 0u8;
    let mut points = Vec::with_capacity(windows.len());
    for w in windows {
        if w.channel >= CHANNELS {
            return Err(EngineError::UnmappedChannel { channel: w.channel });
        }
        let iq = demodulate(w.i, w.q, &w.demod)?;
        tags |= discriminate(iq, thresholds[w.channel]) << w.channel;
        mask |= 1 << w.channel;
        points.push(iq);
    }
    Ok((serialize_masked(tags, mask), points))
}
