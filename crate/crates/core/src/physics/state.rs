//! Single-qubit states: density matrices, Bloch vectors and angles.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::PhysicsError;

/// Raw 2×2 complex matrix, row-major.
pub type Mat2 = [[C64; 2]; 2];

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-9;
const POSITIVITY_TOL: f64 = 1e-9;
const BLOCH_TOL: f64 = 1e-9;

pub(crate) fn mat_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[ZERO; 2]; 2];
    for r in 0..2 {
        for c in 0..2 {
            out[r][c] = a[r][0] * b[0][c] + a[r][1] * b[1][c];
        }
    }
    out
}

pub(crate) fn dagger(a: &Mat2) -> Mat2 {
    [
        [a[0][0].conj(), a[1][0].conj()],
        [a[0][1].conj(), a[1][1].conj()],
    ]
}

pub(crate) fn mat_add(a: &Mat2, b: &Mat2) -> Mat2 {
    [
        [a[0][0] + b[0][0], a[0][1] + b[0][1]],
        [a[1][0] + b[1][0], a[1][1] + b[1][1]],
    ]
}

pub(crate) fn mat_scale(a: &Mat2, s: C64) -> Mat2 {
    [[a[0][0] * s, a[0][1] * s], [a[1][0] * s, a[1][1] * s]]
}

/// Largest element-wise modulus of `a - b`.
pub fn mat_distance(a: &Mat2, b: &Mat2) -> f64 {
    let mut d: f64 = 0.0;
    for r in 0..2 {
        for c in 0..2 {
            d = d.max((a[r][c] - b[r][c]).norm());
        }
    }
    d
}

/// Density matrix of one qubit in the computational basis `{|0⟩, |1⟩}`.
///
/// Construction through [`DensityMatrix::new`] checks Hermiticity, unit
/// trace and positivity. The remaining constructors produce states that are
/// physical by construction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat2,
}

impl DensityMatrix {
    pub fn new(elements: Mat2) -> Result<Self, PhysicsError> {
        let rho = Self { m: elements };
        rho.validate()?;
        Ok(rho)
    }

    /// Wraps a matrix without validation. Callers own the invariants.
    pub(crate) fn from_raw(elements: Mat2) -> Self {
        Self { m: elements }
    }

    pub fn ground() -> Self {
        Self::from_raw([[ONE, ZERO], [ZERO, ZERO]])
    }

    pub fn excited() -> Self {
        Self::from_raw([[ZERO, ZERO], [ZERO, ONE]])
    }

    /// `(|0⟩ + |1⟩)/√2`.
    pub fn plus() -> Self {
        let h = C64::new(0.5, 0.0);
        Self::from_raw([[h, h], [h, h]])
    }

    pub fn maximally_mixed() -> Self {
        let h = C64::new(0.5, 0.0);
        Self::from_raw([[h, ZERO], [ZERO, h]])
    }

    /// Diagonal state with excited population `p1`.
    pub fn diagonal(p1: f64) -> Result<Self, PhysicsError> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(PhysicsError::NotPositive { min_eigenvalue: p1.min(1.0 - p1) });
        }
        Ok(Self::from_raw([
            [C64::new(1.0 - p1, 0.0), ZERO],
            [ZERO, C64::new(p1, 0.0)],
        ]))
    }

    pub fn from_pure(psi: [C64; 2]) -> Result<Self, PhysicsError> {
        let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
        if (norm - 1.0).abs() > TRACE_TOL {
            return Err(PhysicsError::NotNormalized { norm });
        }
        let mut m = [[ZERO; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                m[r][c] = psi[r] * psi[c].conj();
            }
        }
        Ok(Self::from_raw(m))
    }

    pub fn elements(&self) -> &Mat2 {
        &self.m
    }

    pub fn trace(&self) -> C64 {
        self.m[0][0] + self.m[1][1]
    }

    /// Ground-state population `ρ00`.
    pub fn p0(&self) -> f64 {
        self.m[0][0].re
    }

    /// Excited-state population `ρ11`.
    pub fn p1(&self) -> f64 {
        self.m[1][1].re
    }

    pub fn coherence(&self) -> C64 {
        self.m[0][1]
    }

    /// Eigenvalues in ascending order (the matrix is assumed Hermitian).
    pub fn eigenvalues(&self) -> [f64; 2] {
        let a = self.m[0][0].re;
        let d = self.m[1][1].re;
        let b = self.m[0][1].norm_sqr();
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b).sqrt();
        [mean - half_gap, mean + half_gap]
    }

    pub fn validate(&self) -> Result<(), PhysicsError> {
        let m = &self.m;
        let herm = (m[0][1] - m[1][0].conj())
            .norm()
            .max(m[0][0].im.abs())
            .max(m[1][1].im.abs());
        if herm > HERMITIAN_TOL {
            return Err(PhysicsError::NotHermitian { deviation: herm });
        }
        let tr = self.trace().re;
        if (tr - 1.0).abs() > TRACE_TOL {
            return Err(PhysicsError::TraceNotUnit { trace: tr });
        }
        let min_eig = self.eigenvalues()[0];
        if min_eig < -POSITIVITY_TOL {
            return Err(PhysicsError::NotPositive { min_eigenvalue: min_eig });
        }
        Ok(())
    }

    /// Replaces the matrix by its Hermitian part, removing rounding
    /// asymmetry accumulated by numerical evolution.
    pub(crate) fn hermitize(self) -> Self {
        let m = self.m;
        let off = 0.5 * (m[0][1] + m[1][0].conj());
        Self::from_raw([
            [C64::new(m[0][0].re, 0.0), off],
            [off.conj(), C64::new(m[1][1].re, 0.0)],
        ])
    }

    /// `U ρ U†`.
    pub fn conjugate_by(&self, u: &Mat2) -> Self {
        Self::from_raw(mat_mul(&mat_mul(u, &self.m), &dagger(u))).hermitize()
    }

    pub fn distance(&self, other: &DensityMatrix) -> f64 {
        mat_distance(&self.m, &other.m)
    }
}

/// Bloch vector `r = (x, y, z)` with `ρ = (I + r·σ)/2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self, PhysicsError> {
        let r = Self { x, y, z };
        if !(x.is_finite() && y.is_finite() && z.is_finite()) || r.norm() > 1.0 + BLOCH_TOL {
            return Err(PhysicsError::NonPhysicalBloch { norm: r.norm() });
        }
        Ok(r)
    }

    /// Builds a vector from possibly over-long linear-inversion estimates,
    /// rescaling onto the unit sphere when `|r| > 1`. The flag reports
    /// whether rescaling happened.
    pub fn projected(x: f64, y: f64, z: f64) -> (Self, bool) {
        let r = Self { x, y, z };
        let n = r.norm();
        if n > 1.0 {
            (Self { x: x / n, y: y / n, z: z / n }, true)
        } else {
            (r, false)
        }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn dot(&self, other: &BlochVector) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }
}

pub fn bloch_from_rho(rho: &DensityMatrix) -> BlochVector {
    let m = rho.elements();
    BlochVector {
        x: 2.0 * m[0][1].re,
        y: -2.0 * m[0][1].im,
        z: (m[0][0] - m[1][1]).re,
    }
}

pub fn rho_from_bloch(r: &BlochVector) -> Result<DensityMatrix, PhysicsError> {
    if r.norm() > 1.0 + BLOCH_TOL {
        return Err(PhysicsError::NonPhysicalBloch { norm: r.norm() });
    }
    let off = C64::new(0.5 * r.x, -0.5 * r.y);
    Ok(DensityMatrix::from_raw([
        [C64::new(0.5 * (1.0 + r.z), 0.0), off],
        [off.conj(), C64::new(0.5 * (1.0 - r.z), 0.0)],
    ]))
}

/// Polar and azimuth angles of a Bloch vector, in degrees.
///
/// `theta` is the polar angle measured from +z, carrying the sign of the x
/// component: positive for states tipped towards +x (clockwise when the
/// xz-plane is viewed from −y), negative towards −x. `phi` is the azimuth in
/// `[0, 360)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochAngles {
    pub theta: f64,
    pub phi: f64,
}

impl BlochAngles {
    pub fn from_bloch(r: &BlochVector) -> Self {
        let n = r.norm();
        let polar = if n > 0.0 {
            (r.z / n).clamp(-1.0, 1.0).acos().to_degrees()
        } else {
            0.0
        };
        let mut theta = if r.x < 0.0 { -polar } else { polar };
        if theta <= -180.0 {
            theta = 180.0;
        }
        let mut phi = r.y.atan2(r.x).to_degrees();
        if phi < 0.0 {
            phi += 360.0;
        }
        if phi >= 360.0 {
            phi -= 360.0;
        }
        Self { theta, phi }
    }

    /// Unsigned polar angle in `[0, 180]`.
    pub fn polar(&self) -> f64 {
        self.theta.abs()
    }
}

/// Wraps an angle difference into `(-180, 180]`.
pub fn wrap_degrees(a: f64) -> f64 {
    let mut w = a % 360.0;
    if w <= -180.0 {
        w += 360.0;
    } else if w > 180.0 {
        w -= 360.0;
    }
    w
}

/// `⟨ψ|ρ|ψ⟩` for a normalized pure state.
pub fn state_fidelity(rho: &DensityMatrix, psi: [C64; 2]) -> Result<f64, PhysicsError> {
    let norm = psi[0].norm_sqr() + psi[1].norm_sqr();
    if (norm - 1.0).abs() > TRACE_TOL {
        return Err(PhysicsError::NotNormalized { norm });
    }
    let m = rho.elements();
    let mut acc = ZERO;
    for r in 0..2 {
        for c in 0..2 {
            acc += psi[r].conj() * m[r][c] * psi[c];
        }
    }
    Ok(acc.re.clamp(0.0, 1.0))
}

/// Fidelity of a Bloch-vector estimate with a pure target state `n̂`,
/// `(1 + r·n̂)/2`. Equal to [`state_fidelity`] for physical `r`.
pub fn bloch_fidelity(r: &BlochVector, target: &BlochVector) -> f64 {
    (0.5 * (1.0 + r.dot(target))).clamp(0.0, 1.0)
}

/// Samples a projective z-measurement. `draw` is uniform on `[0, 1)`;
/// outcome 0 is selected when `draw < ρ00`.
pub fn project_z(rho: &DensityMatrix, draw: f64) -> (u8, DensityMatrix) {
    let raw = rho.p0();
    let p0 = raw.clamp(0.0, 1.0);
    if (raw - p0).abs() > 1e-9 {
        log::warn!("ground population {raw} clamped to {p0}");
    }
    if draw < p0 {
        (0, DensityMatrix::ground())
    } else {
        (1, DensityMatrix::excited())
    }
}
