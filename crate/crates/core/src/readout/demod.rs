use serde::{Deserialize, Serialize};

use super::{IqPoint, ReadoutError};

/// FPGA data-path clock period.
pub const CLOCK_NS: f64 = 4.0;

/// Digital demodulation settings of one qubit channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemodConfig {
    /// Reference frequency, MHz.
    pub ref_freq_mhz: f64,
    /// Window length N in 4 ns cycles.
    pub window_cycles: usize,
    pub delay_cycles: usize,
}

impl DemodConfig {
    pub fn validate(&self) -> Result<(), ReadoutError> {
        if self.window_cycles == 0 {
            return Err(ReadoutError::InvalidDemod("window must cover at least one cycle".into()));
        }
        if !self.ref_freq_mhz.is_finite() {
            return Err(ReadoutError::InvalidDemod(format!("reference {}", self.ref_freq_mhz)));
        }
        Ok(())
    }

    /// Reference phase `ω_r·t_n` for sample `n` (1-based), radians.
    pub fn phase(&self, n: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.ref_freq_mhz * 1e-3 * (n as f64) * CLOCK_NS
    }
}

/// Multiplies the base-band series by the complex reference
/// `cos ω_r t_n + i sin ω_r t_n` and accumulates over the window.
pub fn demodulate(i_in: &[f64], q_in: &[f64], cfg: &DemodConfig) -> Result<IqPoint, ReadoutError> {
    cfg.validate()?;
    for len in [i_in.len(), q_in.len()] {
        if len != cfg.window_cycles {
            return Err(ReadoutError::LengthMismatch { expected: cfg.window_cycles, got: len });
        }
    }
    let mut acc_i = 0.0;
    let mut acc_q = 0.0;
    for (k, (&si, &sq)) in i_in.iter().zip(q_in).enumerate() {
        let (s, c) = cfg.phase(k + 1).sin_cos();
        acc_i += si * c - sq * s;
        acc_q += si * s + sq * c;
    }
    Ok(IqPoint::new(acc_i, acc_q))
}

/// Base-band series `A·(cos(ωt_n + φ), −sin(ωt_n + φ))` at frequency
/// `freq_mhz`; at the channel's reference frequency it demodulates to
/// `N·A·(cos φ, −sin φ)`.
pub fn reference_tone(cfg: &DemodConfig, freq_mhz: f64, amplitude: f64, phase: f64) -> (Vec<f64>, Vec<f64>) {
    let probe = DemodConfig { ref_freq_mhz: freq_mhz, ..*cfg };
    (1..=cfg.window_cycles)
        .map(|n| {
            let (s, c) = (probe.phase(n) + phase).sin_cos();
            (amplitude * c, -amplitude * s)
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize) -> DemodConfig {
        DemodConfig { ref_freq_mhz: 50.0, window_cycles: n, delay_cycles: 0 }
    }

    #[test]
    fn zero_input_gives_origin() {
        let z = vec![0.0; 200];
        assert_eq!(demodulate(&z, &z, &cfg(200)).unwrap(), IqPoint::new(0.0, 0.0));
    }

    #[test]
    fn length_mismatch_rejected() {
        let err = demodulate(&[0.0; 3], &[0.0; 4], &cfg(4)).unwrap_err();
        assert_eq!(err, ReadoutError::LengthMismatch { expected: 4, got: 3 });
        assert!(demodulate(&[], &[], &cfg(0)).is_err());
    }
}
