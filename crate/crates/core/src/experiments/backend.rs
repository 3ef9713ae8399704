//! Density-matrix backend driven by the board engine.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{ExperimentConfig, GateMode};
use super::programs::{SIGNAL_QUBIT, TARGET_QUBIT};
use super::ExperimentError;
use crate::engine::{EngineError, GateAction, QuantumBackend};
use crate::physics::{stark_compensation, ChannelCache, DensityMatrix, LindbladModel, PulseGate, QubitParams};
use crate::readout::{simulate_readout, IqPoint, ReadoutModel};

/// One simulated transmon.
#[derive(Clone, Debug)]
pub struct QubitSlot {
    pub idle: LindbladModel,
    pub readout: ReadoutModel,
    pub state: DensityMatrix,
    /// Time up to which `state` has been evolved.
    pub t_ns: u64,
}

impl QubitSlot {
    pub fn new(params: &QubitParams, readout: ReadoutModel, decoherence: bool) -> Result<Self, ExperimentError> {
        let idle = if decoherence { params.lindblad()? } else { LindbladModel::closed() };
        Ok(Self { idle, readout, state: params.initial_state(), t_ns: 0 })
    }
}

/// Stark shift and extra dephasing of the target while the source
/// qubit's resonator is driven.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crosstalk {
    pub source: usize,
    pub target: usize,
    pub during_readout: LindbladModel,
}

/// How readout outcomes are chosen.
#[derive(Clone, Debug)]
pub enum Sampling {
    /// Born-rule sampling with Gaussian IQ noise.
    Random(ChaCha8Rng),
    /// Readouts of `qubit` follow `tags`; the backend accumulates the
    /// probability of that tag sequence. Readouts of any other qubit leave
    /// its state untouched and record it in `captured`.
    Forced { qubit: usize, tags: Vec<u8>, next: usize, weight: f64, captured: Vec<Option<DensityMatrix>> },
}

/// Qubit register plus the shared propagator cache.
pub struct PhysicsBackend<'c> {
    pub qubits: Vec<QubitSlot>,
    cache: &'c ChannelCache,
    dt_ns: f64,
    gate_mode: GateMode,
    crosstalk: Option<Crosstalk>,
    source_windows: Vec<(u64, u64)>,
    pub sampling: Sampling,
}

impl<'c> PhysicsBackend<'c> {
    pub fn new(
        qubits: Vec<QubitSlot>,
        cache: &'c ChannelCache,
        cfg: &ExperimentConfig,
        crosstalk: Option<Crosstalk>,
        sampling: Sampling,
    ) -> Self {
        Self { qubits, cache, dt_ns: cfg.dt_ns, gate_mode: cfg.gate_mode, crosstalk, source_windows: Vec::new(), sampling }
    }

    /// Probability of the forced tag sequence so far (1 when sampling).
    pub fn weight(&self) -> f64 {
        match &self.sampling {
            Sampling::Forced { weight, .. } => *weight,
            Sampling::Random(_) => 1.0,
        }
    }

    pub fn captured(&self, qubit: usize) -> Option<DensityMatrix> {
        match &self.sampling {
            Sampling::Forced { captured, .. } => captured.get(qubit).copied().flatten(),
            Sampling::Random(_) => None,
        }
    }

    fn evolve(&mut self, q: usize, model: &LindbladModel, drive: Option<&PulseGate>, dur: u64) -> Result<(), EngineError> {
        if dur == 0 {
            return Ok(());
        }
        let ch = self.cache.get(model, drive, dur as f64, self.dt_ns)?;
        let slot = &mut self.qubits[q];
        slot.state = ch.apply(&slot.state);
        Ok(())
    }

    /// Free evolution of qubit `q` up to `t`, switching to the crosstalk
    /// model inside the source's readout windows.
    pub fn advance(&mut self, q: usize, t: u64) -> Result<(), EngineError> {
        let from = self.qubits[q].t_ns;
        if t <= from {
            return Ok(());
        }
        let idle = self.qubits[q].idle;
        match self.crosstalk {
            Some(x) if x.target == q => {
                let mut cursor = from;
                let windows = self.source_windows.clone();
                for (s, e) in windows {
                    let (s, e) = (s.max(cursor), e.min(t));
                    if s >= e {
                        continue;
                    }
                    self.evolve(q, &idle, None, s - cursor)?;
                    self.evolve(q, &x.during_readout, None, e - s)?;
                    cursor = e;
                }
                self.evolve(q, &idle, None, t - cursor)?;
            }
            _ => self.evolve(q, &idle, None, t - from)?,
        }
        self.qubits[q].t_ns = t;
        Ok(())
    }
}

impl QuantumBackend for PhysicsBackend<'_> {
    fn readout(&mut self, qubit: usize, start_ns: u64, end_ns: u64) -> Result<IqPoint, EngineError> {
        if qubit >= self.qubits.len() {
            return Err(EngineError::Backend(format!("no qubit {qubit}")));
        }
        self.advance(qubit, start_ns)?;
        if self.crosstalk.is_some_and(|x| x.source == qubit) {
            self.source_windows.push((start_ns, end_ns));
        }
        let slot = &mut self.qubits[qubit];
        let model = slot.readout;
        let iq = match &mut self.sampling {
            Sampling::Random(rng) => {
                let shot = simulate_readout(&slot.state, &model, rng);
                slot.state = shot.post_state;
                shot.iq
            }
            Sampling::Forced { qubit: forced, tags, next, weight, .. } if *forced == qubit => {
                let tag = *tags.get(*next).ok_or(EngineError::TagStreamExhausted { pc: *next })? as usize;
                *next += 1;
                let (p, post) = model.conditional_outcomes(&slot.state)[tag & 1];
                *weight *= p;
                if let Some(post) = post {
                    slot.state = post;
                }
                if tag & 1 == 0 {
                    model.center0
                } else {
                    model.center1
                }
            }
            Sampling::Forced { captured, .. } => {
                captured[qubit] = Some(slot.state);
                model.center0
            }
        };
        slot.t_ns = end_ns;
        Ok(iq)
    }

    fn play(&mut self, qubit: usize, action: &GateAction, start_ns: u64, end_ns: u64) -> Result<(), EngineError> {
        if qubit >= self.qubits.len() {
            return Err(EngineError::Backend(format!("no qubit {qubit}")));
        }
        self.advance(qubit, start_ns)?;
        let dur = end_ns.saturating_sub(start_ns);
        let idle = self.qubits[qubit].idle;
        match action {
            GateAction::Idle => self.evolve(qubit, &idle, None, dur)?,
            GateAction::Rotation(g) => match self.gate_mode {
                GateMode::Finite if dur > 0 => {
                    let gate = PulseGate { duration_ns: dur as f64, ..*g };
                    self.evolve(qubit, &idle, Some(&gate), dur)?;
                }
                _ => {
                    let slot = &mut self.qubits[qubit];
                    slot.state = slot.state.conjugate_by(&g.unitary());
                    self.evolve(qubit, &idle, None, dur)?;
                }
            },
            GateAction::ZPhase { degrees } => {
                let slot = &mut self.qubits[qubit];
                slot.state = stark_compensation(&slot.state, *degrees);
                self.evolve(qubit, &idle, None, dur)?;
            }
        }
        self.qubits[qubit].t_ns = end_ns.max(start_ns);
        Ok(())
    }

    fn states(&self) -> Vec<DensityMatrix> {
        self.qubits.iter().map(|q| q.state).collect()
    }
}

/// Everything needed to build per-shot backends for one protocol.
#[derive(Clone, Debug)]
pub struct Register {
    pub qubits: Vec<QubitSlot>,
    pub crosstalk: Option<Crosstalk>,
}

impl Register {
    /// Signal qubit (sweet point or biased) plus the target qubit.
    pub fn new(cfg: &ExperimentConfig, biased_signal: bool, with_crosstalk: bool) -> Result<Self, ExperimentError> {
        let signal = cfg.effective(if biased_signal { &cfg.qubits.signal_biased } else { &cfg.qubits.signal });
        let target = cfg.effective(&cfg.qubits.target);
        let signal_ro = cfg.readout_model(&cfg.readout.signal, signal.residual_excitation)?;
        let target_ro = cfg.readout_model(&cfg.readout.target, target.residual_excitation)?;
        let qubits = vec![
            QubitSlot::new(&signal, signal_ro, cfg.decoherence)?,
            QubitSlot::new(&target, target_ro, cfg.decoherence)?,
        ];
        let crosstalk = if with_crosstalk && cfg.crosstalk.enabled {
            let base = if cfg.decoherence {
                LindbladModel::from_times(target.t1_us, cfg.crosstalk.readout_t2_star_us)?
            } else {
                LindbladModel::closed()
            };
            Some(Crosstalk {
                source: SIGNAL_QUBIT,
                target: TARGET_QUBIT,
                during_readout: base.with_detuning(cfg.crosstalk.stark_detuning_mhz),
            })
        } else {
            None
        };
        Ok(Self { qubits, crosstalk })
    }

    pub fn sampled<'c>(&self, cfg: &ExperimentConfig, cache: &'c ChannelCache, rng: ChaCha8Rng) -> PhysicsBackend<'c> {
        PhysicsBackend::new(self.qubits.clone(), cache, cfg, self.crosstalk, Sampling::Random(rng))
    }

    pub fn forced<'c>(&self, cfg: &ExperimentConfig, cache: &'c ChannelCache, qubit: usize, tags: Vec<u8>) -> PhysicsBackend<'c> {
        let captured = vec![None; self.qubits.len()];
        let sampling = Sampling::Forced { qubit, tags, next: 0, weight: 1.0, captured };
        PhysicsBackend::new(self.qubits.clone(), cache, cfg, self.crosstalk, sampling)
    }
}

/// Per-shot generator: the stream id separates protocol variants and the
/// shot index selects an independent ChaCha stream, so results do not
/// depend on how shots are spread over threads.
pub fn shot_rng(seed: u64, stream: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((stream << 40) | shot);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{bloch_from_rho, Axis};

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::default()
    }

    #[test]
    fn stark_phase_accumulates_only_in_windows() {
        let mut c = cfg();
        c.decoherence = false;
        let reg = Register::new(&c, false, true).unwrap();
        let cache = ChannelCache::new();
        let mut b = reg.forced(&c, &cache, SIGNAL_QUBIT, vec![0]);
        b.qubits[TARGET_QUBIT].state = DensityMatrix::plus();
        b.readout(SIGNAL_QUBIT, 100, 900).unwrap();
        b.advance(TARGET_QUBIT, 2000).unwrap();
        let r = bloch_from_rho(&b.qubits[TARGET_QUBIT].state);
        let phi = r.y.atan2(r.x).to_degrees();
        assert!((phi - 14.4).abs() < 1e-3, "phi {phi}");
        b.play(TARGET_QUBIT, &GateAction::ZPhase { degrees: 14.4 }, 2000, 2010).unwrap();
        let r = bloch_from_rho(&b.qubits[TARGET_QUBIT].state);
        assert!(r.y.abs() < 1e-5 && (r.x - 1.0).abs() < 1e-5);
    }

    #[test]
    fn forced_weights_sum_to_one() {
        let c = cfg();
        let reg = Register::new(&c, false, false).unwrap();
        let cache = ChannelCache::new();
        let mut total = 0.0;
        for tag in [0u8, 1] {
            let mut b = reg.forced(&c, &cache, SIGNAL_QUBIT, vec![tag]);
            let g = GateAction::Rotation(PulseGate::new(Axis::PlusY, std::f64::consts::FRAC_PI_2, 40.0).unwrap());
            b.play(SIGNAL_QUBIT, &g, 0, 40).unwrap();
            b.readout(SIGNAL_QUBIT, 40, 840).unwrap();
            total += b.weight();
        }
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rng_streams_are_independent_of_order() {
        use rand::Rng;
        let a: u64 = shot_rng(7, 1, 5).random();
        let _ = shot_rng(7, 1, 4).random::<u64>();
        let b: u64 = shot_rng(7, 1, 5).random();
        assert_eq!(a, b);
        assert_ne!(a, shot_rng(7, 2, 5).random::<u64>());
    }
}
