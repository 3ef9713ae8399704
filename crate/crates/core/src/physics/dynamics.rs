//! Rotations, the Lindblad master equation and cached evolution channels.

use std::collections::HashMap;
use std::sync::RwLock;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::state::{dagger, mat_add, mat_mul, mat_scale, DensityMatrix, Mat2, I, ONE, ZERO};
use super::PhysicsError;

const TRACE_DRIFT_LIMIT: f64 = 1e-6;
/// Upper bound on `dt · (largest generator rate)` accepted by the integrator.
const MAX_STEP_RATE_PRODUCT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    #[serde(rename = "+x")]
    PlusX,
    #[serde(rename = "-x")]
    MinusX,
    #[serde(rename = "+y")]
    PlusY,
    #[serde(rename = "-y")]
    MinusY,
    #[serde(rename = "+z")]
    PlusZ,
    #[serde(rename = "-z")]
    MinusZ,
}

impl Axis {
    pub fn unit(self) -> [f64; 3] {
        match self {
            Axis::PlusX => [1.0, 0.0, 0.0],
            Axis::MinusX => [-1.0, 0.0, 0.0],
            Axis::PlusY => [0.0, 1.0, 0.0],
            Axis::MinusY => [0.0, -1.0, 0.0],
            Axis::PlusZ => [0.0, 0.0, 1.0],
            Axis::MinusZ => [0.0, 0.0, -1.0],
        }
    }
}

/// `n·σ` for a unit vector `n`.
fn pauli_dot(n: [f64; 3]) -> Mat2 {
    [
        [C64::new(n[2], 0.0), C64::new(n[0], -n[1])],
        [C64::new(n[0], n[1]), C64::new(-n[2], 0.0)],
    ]
}

/// A rotation `U = exp(-i·angle·(n·σ)/2)` realized by a rectangular pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseGate {
    pub axis: Axis,
    /// Radians.
    pub angle: f64,
    /// Nanoseconds. Zero only for instantaneous (ideal) gates.
    pub duration_ns: f64,
}

impl PulseGate {
    pub fn new(axis: Axis, angle: f64, duration_ns: f64) -> Result<Self, PhysicsError> {
        let g = Self { axis, angle, duration_ns };
        g.validate()?;
        Ok(g)
    }

    pub fn instantaneous(axis: Axis, angle: f64) -> Self {
        Self { axis, angle, duration_ns: 0.0 }
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        if !self.angle.is_finite() || !self.duration_ns.is_finite() || self.duration_ns < 0.0 {
            return Err(PhysicsError::InvalidGate(format!("{self:?}")));
        }
        Ok(())
    }

    pub fn unitary(&self) -> Mat2 {
        rotation_unitary(self.axis.unit(), self.angle)
    }

    /// Rabi frequency of the rectangular envelope, rad/ns.
    pub fn rabi_rate(&self) -> f64 {
        if self.duration_ns > 0.0 {
            self.angle / self.duration_ns
        } else {
            0.0
        }
    }
}

pub fn rotation_unitary(n: [f64; 3], angle: f64) -> Mat2 {
    let (s, c) = (0.5 * angle).sin_cos();
    let ns = pauli_dot(n);
    mat_add(&[[C64::new(c, 0.0), ZERO], [ZERO, C64::new(c, 0.0)]], &mat_scale(&ns, -I * s))
}

/// Instantaneous `U ρ U†`.
pub fn apply_rotation(rho: &DensityMatrix, gate: &PulseGate) -> Result<DensityMatrix, PhysicsError> {
    rho.validate()?;
    gate.validate()?;
    Ok(rho.conjugate_by(&gate.unitary()))
}

/// Applies `Rz(-phase)`, undoing an accumulated azimuthal phase (degrees).
pub fn stark_compensation(rho: &DensityMatrix, phase_deg: f64) -> DensityMatrix {
    rho.conjugate_by(&rotation_unitary([0.0, 0.0, 1.0], -phase_deg.to_radians()))
}

/// Azimuthal phase in degrees accumulated under a detuning over a window.
pub fn stark_phase_deg(detuning_mhz: f64, duration_ns: f64) -> f64 {
    360.0 * detuning_mhz * duration_ns * 1e-3
}

/// Rotating-frame open-system model of one qubit.
///
/// Collapse operators are fixed: relaxation `√γ1·|0⟩⟨1|` and pure dephasing
/// `√γφ·|1⟩⟨1|`. With this convention the coherence decays at
/// `(γ1 + γφ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LindbladModel {
    /// MHz; enters as `H = π·Δ·σz` (angular units).
    pub detuning_mhz: f64,
    /// 1/µs.
    pub gamma1: f64,
    /// 1/µs.
    pub gamma_phi: f64,
}

impl LindbladModel {
    pub fn new(detuning_mhz: f64, gamma1: f64, gamma_phi: f64) -> Result<Self, PhysicsError> {
        let m = Self { detuning_mhz, gamma1, gamma_phi };
        m.validate()?;
        Ok(m)
    }

    /// No decoherence, no detuning.
    pub fn closed() -> Self {
        Self { detuning_mhz: 0.0, gamma1: 0.0, gamma_phi: 0.0 }
    }

    /// `γ1 = 1/T1`, `γφ = 2/T2*` with times in µs. Infinite times give zero
    /// rates.
    pub fn from_times(t1_us: f64, t2_star_us: f64) -> Result<Self, PhysicsError> {
        Self::new(0.0, 1.0 / t1_us, 2.0 / t2_star_us)
    }

    pub fn with_detuning(mut self, detuning_mhz: f64) -> Self {
        self.detuning_mhz = detuning_mhz;
        self
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let ok = self.gamma1 >= 0.0
            && self.gamma_phi >= 0.0
            && self.gamma1.is_finite()
            && self.gamma_phi.is_finite()
            && self.detuning_mhz.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PhysicsError::InvalidModel(format!("{self:?}")))
        }
    }

    fn key(&self) -> [u64; 3] {
        [self.detuning_mhz.to_bits(), self.gamma1.to_bits(), self.gamma_phi.to_bits()]
    }
}

/// Generator of the master equation in ns⁻¹ units.
struct Generator {
    h: Mat2,
    collapse: Vec<Mat2>,
    /// `Σ C†C`, precomputed.
    decay: Mat2,
    max_rate: f64,
}

impl Generator {
    fn new(model: &LindbladModel, drive: Option<&PulseGate>) -> Self {
        // Detuning term, rad/ns.
        let delta = 2.0 * std::f64::consts::PI * model.detuning_mhz * 1e-3;
        let mut h = mat_scale(&pauli_dot([0.0, 0.0, 1.0]), C64::new(0.5 * delta, 0.0));
        let mut rabi = 0.0;
        if let Some(g) = drive {
            rabi = g.rabi_rate();
            h = mat_add(&h, &mat_scale(&pauli_dot(g.axis.unit()), C64::new(0.5 * rabi, 0.0)));
        }
        let g1 = model.gamma1 * 1e-3;
        let gphi = model.gamma_phi * 1e-3;
        let lowering = [[ZERO, C64::new(g1.sqrt(), 0.0)], [ZERO, ZERO]];
        let excited = [[ZERO, ZERO], [ZERO, C64::new(gphi.sqrt(), 0.0)]];
        let collapse = vec![lowering, excited];
        let mut decay = [[ZERO; 2]; 2];
        for c in &collapse {
            decay = mat_add(&decay, &mat_mul(&dagger(c), c));
        }
        Self {
            h,
            collapse,
            decay,
            max_rate: delta.abs() + rabi.abs() + g1 + gphi,
        }
    }

    /// `-i[H, ρ] + Σ ½(2CρC† − ρC†C − C†Cρ)`.
    fn rhs(&self, rho: &Mat2) -> Mat2 {
        let hr = mat_mul(&self.h, rho);
        let rh = mat_mul(rho, &self.h);
        let mut out = [[ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = -I * (hr[r][c] - rh[r][c]);
            }
        }
        for col in &self.collapse {
            let jump = mat_mul(&mat_mul(col, rho), &dagger(col));
            out = mat_add(&out, &jump);
        }
        let left = mat_mul(&self.decay, rho);
        let right = mat_mul(rho, &self.decay);
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] -= 0.5 * (left[r][c] + right[r][c]);
            }
        }
        out
    }

    fn rk4_step(&self, rho: &Mat2, h: f64) -> Mat2 {
        let hc = C64::new(h, 0.0);
        let half = C64::new(0.5 * h, 0.0);
        let k1 = self.rhs(rho);
        let k2 = self.rhs(&mat_add(rho, &mat_scale(&k1, half)));
        let k3 = self.rhs(&mat_add(rho, &mat_scale(&k2, half)));
        let k4 = self.rhs(&mat_add(rho, &mat_scale(&k3, hc)));
        let mut out = *rho;
        let sixth = h / 6.0;
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] += (k1[r][c] + 2.0 * k2[r][c] + 2.0 * k3[r][c] + k4[r][c]) * sixth;
            }
        }
        out
    }
}

fn step_plan(duration_ns: f64, dt_ns: f64) -> Result<(usize, f64), PhysicsError> {
    if !(dt_ns > 0.0) || !dt_ns.is_finite() || duration_ns < 0.0 || !duration_ns.is_finite() {
        return Err(PhysicsError::InvalidStep { dt_ns, duration_ns });
    }
    if duration_ns == 0.0 {
        return Ok((0, 0.0));
    }
    let n = (duration_ns / dt_ns).ceil().max(1.0) as usize;
    Ok((n, duration_ns / n as f64))
}

fn integrate(
    rho: &Mat2,
    model: &LindbladModel,
    drive: Option<&PulseGate>,
    duration_ns: f64,
    dt_ns: f64,
) -> Result<Mat2, PhysicsError> {
    model.validate()?;
    if let Some(g) = drive {
        g.validate()?;
    }
    let (steps, h) = step_plan(duration_ns, dt_ns)?;
    let gen = Generator::new(model, drive);
    if gen.max_rate * h > MAX_STEP_RATE_PRODUCT {
        return Err(PhysicsError::StepTooLarge { dt_ns: h, rate: gen.max_rate });
    }
    let tr0 = rho[0][0] + rho[1][1];
    let mut cur = *rho;
    for _ in 0..steps {
        cur = gen.rk4_step(&cur, h);
    }
    let drift = (cur[0][0] + cur[1][1] - tr0).norm();
    if drift > TRACE_DRIFT_LIMIT {
        return Err(PhysicsError::IntegrationAccuracy { drift });
    }
    Ok(cur)
}

/// Integrates the master equation with fixed-step RK4 over `duration_ns`.
///
/// The step is shrunk so that an integer number of steps lands exactly on
/// `duration_ns`. A drive, when present, is a rectangular pulse whose Rabi
/// rate is `angle / gate.duration_ns`.
pub fn evolve_lindblad(
    rho: &DensityMatrix,
    model: &LindbladModel,
    drive: Option<&PulseGate>,
    duration_ns: f64,
    dt_ns: f64,
) -> Result<DensityMatrix, PhysicsError> {
    rho.validate()?;
    let out = DensityMatrix::from_raw(integrate(rho.elements(), model, drive, duration_ns, dt_ns)?).hermitize();
    out.validate()?;
    Ok(out)
}

/// Finite-duration rotation with concurrent decoherence.
pub fn apply_rotation_finite(
    rho: &DensityMatrix,
    gate: &PulseGate,
    model: &LindbladModel,
    dt_ns: f64,
) -> Result<DensityMatrix, PhysicsError> {
    if gate.duration_ns == 0.0 {
        return apply_rotation(rho, gate);
    }
    evolve_lindblad(rho, model, Some(gate), gate.duration_ns, dt_ns)
}

/// A linear map on density matrices, stored as the images of the four
/// matrix units `|i⟩⟨j|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    images: [[Mat2; 2]; 2],
}

impl Channel {
    pub fn identity() -> Self {
        let mut images = [[[[ZERO; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                images[i][j][i][j] = ONE;
            }
        }
        Self { images }
    }

    pub fn unitary(u: &Mat2) -> Self {
        let mut images = [[[[ZERO; 2]; 2]; 2]; 2];
        let ud = dagger(u);
        for i in 0..2 {
            for j in 0..2 {
                let mut e = [[ZERO; 2]; 2];
                e[i][j] = ONE;
                images[i][j] = mat_mul(&mat_mul(u, &e), &ud);
            }
        }
        Self { images }
    }

    /// RK4 propagator of the master equation. Because each RK4 step is
    /// linear in ρ, applying this channel reproduces [`evolve_lindblad`] up
    /// to rounding.
    pub fn from_lindblad(
        model: &LindbladModel,
        drive: Option<&PulseGate>,
        duration_ns: f64,
        dt_ns: f64,
    ) -> Result<Self, PhysicsError> {
        let mut images = [[[[ZERO; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let mut e = [[ZERO; 2]; 2];
                e[i][j] = ONE;
                images[i][j] = integrate(&e, model, drive, duration_ns, dt_ns)?;
            }
        }
        Ok(Self { images })
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        let m = rho.elements();
        let mut out = [[ZERO; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let coeff = m[i][j];
                let img = &self.images[i][j];
                for r in 0..2 {
                    for c in 0..2 {
                        out[r][c] += coeff * img[r][c];
                    }
                }
            }
        }
        DensityMatrix::from_raw(out).hermitize()
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &Channel) -> Channel {
        let mut images = [[[[ZERO; 2]; 2]; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                let first = self.images[i][j];
                let mut acc = [[ZERO; 2]; 2];
                for a in 0..2 {
                    for b in 0..2 {
                        acc = mat_add(&acc, &mat_scale(&other.images[a][b], first[a][b]));
                    }
                }
                images[i][j] = acc;
            }
        }
        Channel { images }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct ChannelKey {
    model: [u64; 3],
    drive: Option<(Axis, u64, u64)>,
    duration: u64,
    dt: u64,
}

/// Thread-safe memo of evolution channels keyed by their exact inputs.
/// Entries are deterministic functions of the key, so sharing the cache
/// across worker threads cannot change results.
#[derive(Debug, Default)]
pub struct ChannelCache {
    map: RwLock<HashMap<ChannelKey, Channel>>,
}

impl ChannelCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(
        &self,
        model: &LindbladModel,
        drive: Option<&PulseGate>,
        duration_ns: f64,
        dt_ns: f64,
    ) -> Result<Channel, PhysicsError> {
        let key = ChannelKey {
            model: model.key(),
            drive: drive.map(|g| (g.axis, g.angle.to_bits(), g.duration_ns.to_bits())),
            duration: duration_ns.to_bits(),
            dt: dt_ns.to_bits(),
        };
        if let Some(ch) = self.map.read().expect("channel cache poisoned").get(&key) {
            return Ok(*ch);
        }
        let ch = Channel::from_lindblad(model, drive, duration_ns, dt_ns)?;
        self.map.write().expect("channel cache poisoned").insert(key, ch);
        Ok(ch)
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("channel cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::state::{bloch_from_rho, rho_from_bloch, BlochVector};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn random_states() -> Vec<DensityMatrix> {
        [(0.3, -0.5, 0.2), (-0.7, 0.1, 0.6), (0.0, 0.9, -0.4)]
            .iter()
            .map(|&(x, y, z)| rho_from_bloch(&BlochVector::new(x, y, z).unwrap()).unwrap())
            .collect()
    }

    #[test]
    fn pi_pulse_inverts_population() {
        let g = PulseGate::instantaneous(Axis::PlusY, PI);
        let out = apply_rotation(&DensityMatrix::ground(), &g).unwrap();
        assert!(out.distance(&DensityMatrix::excited()) < 1e-12);
    }

    #[test]
    fn half_pi_about_y_points_along_x() {
        let g = PulseGate::instantaneous(Axis::PlusY, FRAC_PI_2);
        let r = bloch_from_rho(&apply_rotation(&DensityMatrix::ground(), &g).unwrap());
        assert!((r.x - 1.0).abs() < 1e-12 && r.y.abs() < 1e-12 && r.z.abs() < 1e-12);
    }

    #[test]
    fn zero_angle_is_identity() {
        for rho in random_states() {
            for axis in [Axis::PlusX, Axis::MinusY, Axis::PlusZ] {
                let out = apply_rotation(&rho, &PulseGate::instantaneous(axis, 0.0)).unwrap();
                assert!(out.distance(&rho) < 1e-15);
            }
        }
    }

    #[test]
    fn z_rotation_from_xy_sequence() {
        // R(−x, π/2), then R(+y, φ), then R(+x, π/2) acts as Rz(φ).
        for phi in [0.3, 1.1, -2.0] {
            for rho in random_states() {
                let seq = [
                    PulseGate::instantaneous(Axis::MinusX, FRAC_PI_2),
                    PulseGate::instantaneous(Axis::PlusY, phi),
                    PulseGate::instantaneous(Axis::PlusX, FRAC_PI_2),
                ];
                let mut s = rho;
                for g in &seq {
                    s = apply_rotation(&s, g).unwrap();
                }
                let direct = apply_rotation(&rho, &PulseGate::instantaneous(Axis::PlusZ, phi)).unwrap();
                assert!(s.distance(&direct) < 1e-9);
            }
        }
    }

    #[test]
    fn stark_compensation_restores_azimuth() {
        let rho = DensityMatrix::plus();
        let drift = rho.conjugate_by(&rotation_unitary([0.0, 0.0, 1.0], 15f64.to_radians()));
        let r = bloch_from_rho(&drift);
        assert!((r.y.atan2(r.x).to_degrees() - 15.0).abs() < 1e-9);
        let fixed = stark_compensation(&drift, 15.0);
        assert!(fixed.distance(&rho) < 1e-9);
        assert!(stark_compensation(&rho, 0.0).distance(&rho) < 1e-15);
        assert!((stark_phase_deg(0.05, 800.0) - 14.4).abs() < 1e-12);
    }

    #[test]
    fn detuning_accumulates_expected_phase() {
        let model = LindbladModel::closed().with_detuning(0.05);
        let out = evolve_lindblad(&DensityMatrix::plus(), &model, None, 800.0, 1.0).unwrap();
        let r = bloch_from_rho(&out);
        assert!((r.y.atan2(r.x).to_degrees() - 14.4).abs() < 1e-6);
    }

    #[test]
    fn closed_idle_is_identity() {
        for rho in random_states() {
            let out = evolve_lindblad(&rho, &LindbladModel::closed(), None, 500.0, 1.0).unwrap();
            assert!(out.distance(&rho) < 1e-9);
        }
    }

    #[test]
    fn closed_drive_matches_unitary() {
        let gate = PulseGate::new(Axis::MinusY, 1.3, 40.0).unwrap();
        for rho in random_states() {
            let finite = apply_rotation_finite(&rho, &gate, &LindbladModel::closed(), 1.0).unwrap();
            let ideal = apply_rotation(&rho, &gate).unwrap();
            assert!(finite.distance(&ideal) < 1e-8);
        }
    }

    #[test]
    fn channel_matches_direct_integration() {
        let model = LindbladModel::from_times(19.0, 9.0).unwrap().with_detuning(0.05);
        let gate = PulseGate::new(Axis::PlusY, 0.4, 40.0).unwrap();
        let ch = Channel::from_lindblad(&model, Some(&gate), 40.0, 1.0).unwrap();
        for rho in random_states() {
            let direct = evolve_lindblad(&rho, &model, Some(&gate), 40.0, 1.0).unwrap();
            assert!(ch.apply(&rho).distance(&direct) < 1e-14);
        }
        let u = Channel::unitary(&gate.unitary());
        let composed = Channel::identity().then(&u);
        for rho in random_states() {
            assert!(composed.apply(&rho).distance(&rho.conjugate_by(&gate.unitary())) < 1e-14);
        }
    }

    #[test]
    fn oversized_step_rejected() {
        let model = LindbladModel::from_times(0.001, 0.001).unwrap();
        let err = evolve_lindblad(&DensityMatrix::excited(), &model, None, 100.0, 10.0).unwrap_err();
        assert!(matches!(err, PhysicsError::StepTooLarge { .. }));
        assert!(matches!(
            evolve_lindblad(&DensityMatrix::excited(), &model, None, 100.0, 0.0),
            Err(PhysicsError::InvalidStep { .. })
        ));
    }

    #[test]
    fn cache_reuses_entries() {
        let cache = ChannelCache::new();
        let m = LindbladModel::from_times(16.0, 20.0).unwrap();
        let a = cache.get(&m, None, 100.0, 1.0).unwrap();
        let b = cache.get(&m, None, 100.0, 1.0).unwrap();
        assert_eq!(a, b);
        assert_eq!(cache.len(), 1);
    }
}
