//! Poincaré-sphere geometry and the SAM ⊗ OAM state space.
//!
//! Both degrees of freedom are two-level systems. Their poles are
//!
//! | sphere | north (`z = +1`) | south (`z = −1`) |
//! |--------|------------------|------------------|
//! | SAM    | `|L⟩`            | `|R⟩`            |
//! | OAM    | `|+1⟩`           | `|−1⟩`           |
//!
//! and a state `c₊|north⟩ + c₋|south⟩` sits at the Bloch vector
//! `x = 2Re(c₊c₋*)`, `y = 2Im(c₊c₋*)`, `z = |c₊|² − |c₋|²`. On the SAM sphere
//! `+x` is `|H⟩` and `+y` is `|A⟩ = (|H⟩ + |V⟩)/√2`.

mod waveplate;

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::ops::Neg;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use waveplate::{jones_vector, transmission, waveplate_projection_angles, WaveplateSetting};

/// Tolerance on `|v|² = 1` accepted by [`PoincareVector::new`].
pub const UNIT_TOLERANCE: f64 = 1e-12;

/// Amplitudes below this magnitude are treated as zero when fixing the global
/// phase.
const PHASE_EPS: f64 = 1e-14;

/// A unit vector on a Poincaré sphere.
///
/// Serves as a measurement setting (`a`, `b`) as well as a hidden spin-like
/// state (`u`, `v`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct PoincareVector {
    x: f64,
    y: f64,
    z: f64,
}

impl PoincareVector {
    pub const X: Self = Self { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: Self = Self { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: Self = Self { x: 0.0, y: 0.0, z: 1.0 };

    /// Builds a vector, rejecting anything whose squared norm is not 1 within
    /// [`UNIT_TOLERANCE`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !n2.is_finite() || (n2 - 1.0).abs() > UNIT_TOLERANCE {
            return Err(invalid(format!("Poincaré vector ({x}, {y}, {z}) is not unit (|v|² = {n2})")));
        }
        Ok(Self { x, y, z })
    }

    /// Normalizes an arbitrary non-zero 3-vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !n.is_finite() || n < 1e-300 {
            return Err(invalid("cannot normalize a zero or non-finite vector"));
        }
        Ok(Self { x: x / n, y: y / n, z: z / n })
    }

    /// Point at polar angle `theta` (from `+z`) and azimuth `phi` (from `+x`),
    /// both in radians.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self { x: st * cp, y: st * sp, z: ct }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    /// Great-circle angle to `other`, in radians.
    pub fn angle_to(&self, other: &Self) -> f64 {
        angle_between(self.to_array(), other.to_array())
    }

    /// `(polar, azimuth)` in radians; azimuth is 0 at the poles.
    pub fn to_angles(&self) -> (f64, f64) {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = if self.x == 0.0 && self.y == 0.0 { 0.0 } else { self.y.atan2(self.x) };
        (theta, phi)
    }
}

impl Neg for PoincareVector {
    type Output = Self;

    fn neg(self) -> Self {
        Self { x: -self.x, y: -self.y, z: -self.z }
    }
}

impl TryFrom<[f64; 3]> for PoincareVector {
    type Error = Error;

    fn try_from(v: [f64; 3]) -> Result<Self> {
        Self::new(v[0], v[1], v[2])
    }
}

impl From<PoincareVector> for [f64; 3] {
    fn from(v: PoincareVector) -> Self {
        v.to_array()
    }
}

impl fmt::Display for PoincareVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.6}, {:.6}, {:.6})", self.x, self.y, self.z)
    }
}

/// Angle between two arbitrary non-zero 3-vectors, in radians.
///
/// Uses `atan2(|u×v|, u·v)`, which stays accurate for nearly parallel and
/// nearly antiparallel inputs where `acos` loses precision.
pub fn angle_between(u: [f64; 3], v: [f64; 3]) -> f64 {
    let cross = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = u[0] * v[0] + u[1] * v[1] + u[2] * v[2];
    sin.atan2(cos)
}

/// Which degree of freedom a two-level state belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sphere {
    /// Spin angular momentum (polarization).
    Sam,
    /// Orbital angular momentum restricted to `m = ±1`.
    Oam,
}

/// A normalized pure state `c₊|north⟩ + c₋|south⟩` on one sphere.
///
/// The global phase is canonical: the first non-zero amplitude is real and
/// positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QubitState {
    c_plus: C64,
    c_minus: C64,
    sphere: Sphere,
}

impl QubitState {
    /// Normalizes the amplitudes and fixes the global phase.
    pub fn from_amplitudes(c_plus: C64, c_minus: C64, sphere: Sphere) -> Result<Self> {
        let norm = (c_plus.norm_sqr() + c_minus.norm_sqr()).sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(invalid("zero-norm qubit state"));
        }
        let [c_plus, c_minus] = canonical_phase([c_plus / norm, c_minus / norm]);
        Ok(Self { c_plus, c_minus, sphere })
    }

    /// The north-pole basis state (`|L⟩` or `|+1⟩`).
    pub fn north(sphere: Sphere) -> Self {
        Self { c_plus: C64::new(1.0, 0.0), c_minus: C64::new(0.0, 0.0), sphere }
    }

    /// The south-pole basis state (`|R⟩` or `|−1⟩`).
    pub fn south(sphere: Sphere) -> Self {
        Self { c_plus: C64::new(0.0, 0.0), c_minus: C64::new(1.0, 0.0), sphere }
    }

    pub fn c_plus(&self) -> C64 {
        self.c_plus
    }

    pub fn c_minus(&self) -> C64 {
        self.c_minus
    }

    pub fn sphere(&self) -> Sphere {
        self.sphere
    }

    pub fn amplitudes(&self) -> [C64; 2] {
        [self.c_plus, self.c_minus]
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        self.c_plus.conj() * other.c_plus + self.c_minus.conj() * other.c_minus
    }

    /// Equality up to global phase, within `tol` on each amplitude.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.sphere == other.sphere
            && (self.c_plus - other.c_plus).norm() <= tol
            && (self.c_minus - other.c_minus).norm() <= tol
    }
}

/// Pure state whose Bloch vector on `sphere` is `v`.
///
/// `c₊ = √((1+z)/2)` is real and non-negative; the phase of `c₋` carries the
/// azimuth. At the south pole the state is exactly the south basis vector.
pub fn vector_to_state(v: &PoincareVector, sphere: Sphere) -> QubitState {
    let c_plus = ((1.0 + v.z) / 2.0).max(0.0).sqrt();
    let c_minus_mag = ((1.0 - v.z) / 2.0).max(0.0).sqrt();
    let rho = v.x.hypot(v.y);
    let phase = if rho > 0.0 { C64::new(v.x / rho, -v.y / rho) } else { C64::new(1.0, 0.0) };
    let c_minus = phase * c_minus_mag;
    if c_plus > PHASE_EPS {
        QubitState { c_plus: C64::new(c_plus, 0.0), c_minus, sphere }
    } else {
        QubitState::south(sphere)
    }
}

/// Bloch vector of a state; inverse of [`vector_to_state`].
pub fn state_to_vector(s: &QubitState) -> PoincareVector {
    let cross = s.c_plus * s.c_minus.conj();
    let x = 2.0 * cross.re;
    let y = 2.0 * cross.im;
    let z = s.c_plus.norm_sqr() - s.c_minus.norm_sqr();
    // The state is normalized, so this only strips rounding.
    let n = (x * x + y * y + z * z).sqrt();
    PoincareVector { x: x / n, y: y / n, z: z / n }
}

/// Born-rule overlap `|⟨a|b⟩|² = (1 + a·b)/2` between two states of one sphere.
pub fn overlap_probability(a: &PoincareVector, b: &PoincareVector) -> f64 {
    ((1.0 + a.dot(b)) / 2.0).clamp(0.0, 1.0)
}

/// The projection state used to measure setting `v` on `sphere`.
///
/// OAM settings are expressed in coordinates whose `x` and `y` axes are
/// inverted relative to [`vector_to_state`]. With that orientation the
/// correlation of [`prepare_phi_plus`] is exactly `−a·b`. This is the only
/// place the inversion is applied.
pub fn measurement_state(v: &PoincareVector, sphere: Sphere) -> QubitState {
    match sphere {
        Sphere::Sam => vector_to_state(v, sphere),
        Sphere::Oam => {
            let flipped = PoincareVector { x: -v.x, y: -v.y, z: v.z };
            vector_to_state(&flipped, sphere)
        }
    }
}

/// Index of a basis vector in the ordered basis
/// `|L,+1⟩, |L,−1⟩, |R,+1⟩, |R,−1⟩`.
pub const fn basis_index(sam_north: bool, oam_north: bool) -> usize {
    (if sam_north { 0 } else { 2 }) + if oam_north { 0 } else { 1 }
}

/// A normalized pure state of SAM ⊗ OAM over the ordered basis
/// `|L,+1⟩, |L,−1⟩, |R,+1⟩, |R,−1⟩`, with canonical global phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinOrbitState {
    amplitudes: [C64; 4],
}

impl SpinOrbitState {
    pub fn new(amplitudes: [C64; 4]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !norm.is_finite() || norm < 1e-300 {
            return Err(invalid("zero-norm spin-orbit state"));
        }
        Ok(Self { amplitudes: canonical_phase(amplitudes.map(|a| a / norm)) })
    }

    /// `sam ⊗ oam`.
    pub fn product(sam: &QubitState, oam: &QubitState) -> Self {
        let s = sam.amplitudes();
        let o = oam.amplitudes();
        let amplitudes = [s[0] * o[0], s[0] * o[1], s[1] * o[0], s[1] * o[1]];
        Self { amplitudes: canonical_phase(amplitudes) }
    }

    pub fn amplitudes(&self) -> [C64; 4] {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|⟨sam ⊗ oam|self⟩|²`.
    pub fn projection_probability(&self, sam: &QubitState, oam: &QubitState) -> f64 {
        let s = sam.amplitudes();
        let o = oam.amplitudes();
        let amp = (0..4).fold(C64::new(0.0, 0.0), |acc, k| acc + (s[k / 2] * o[k % 2]).conj() * self.amplitudes[k]);
        amp.norm_sqr()
    }

    /// Reduced density matrix of the SAM subsystem, `Tr_OAM |ψ⟩⟨ψ|`.
    pub fn reduced_sam(&self) -> [[C64; 2]; 2] {
        let a = &self.amplitudes;
        let mut rho = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in rho.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = (0..2).map(|m| a[2 * i + m] * a[2 * j + m].conj()).sum();
            }
        }
        rho
    }

    /// Expectation of the ±1 observable "found in state `v`" on one side,
    /// with the other side unmeasured.
    pub fn marginal_expectation(&self, v: &PoincareVector, sphere: Sphere) -> f64 {
        let plus = measurement_state(v, sphere);
        let minus = measurement_state(&-*v, sphere);
        let other = match sphere {
            Sphere::Sam => Sphere::Oam,
            Sphere::Oam => Sphere::Sam,
        };
        let basis = [QubitState::north(other), QubitState::south(other)];
        let prob = |s: &QubitState| -> f64 {
            basis
                .iter()
                .map(|o| match sphere {
                    Sphere::Sam => self.projection_probability(s, o),
                    Sphere::Oam => self.projection_probability(o, s),
                })
                .sum()
        };
        prob(&plus) - prob(&minus)
    }

    /// Equality up to global phase.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.amplitudes.iter().zip(other.amplitudes.iter()).all(|(a, b)| (a - b).norm() <= tol)
    }
}

/// Eigenvalues of a 2×2 Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: &[[C64; 2]; 2]) -> [f64; 2] {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let b = m[0][1].norm();
    let mean = (a + d) / 2.0;
    let half_gap = (((a - d) / 2.0).powi(2) + b * b).sqrt();
    [mean - half_gap, mean + half_gap]
}

/// A tuned q-plate of topological charge `q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QPlate {
    q: f64,
    tuned: bool,
}

impl QPlate {
    /// Rejects charges for which `2q` is not an integer.
    pub fn new(q: f64) -> Result<Self> {
        let twice = 2.0 * q;
        if !twice.is_finite() || (twice - twice.round()).abs() > 1e-12 {
            return Err(invalid(format!("q-plate charge {q} is not a half-integer")));
        }
        Ok(Self { q, tuned: true })
    }

    /// The `q = 1/2` plate used to reach the `m = ±1` subspace.
    pub fn half() -> Self {
        Self { q: 0.5, tuned: true }
    }

    pub fn charge(&self) -> f64 {
        self.q
    }

    pub fn is_tuned(&self) -> bool {
        self.tuned
    }
}

/// Passes a polarized photon with `m = 0` through a tuned q-plate.
///
/// `|L⟩|0⟩ → |R⟩|+2q⟩` and `|R⟩|0⟩ → |L⟩|−2q⟩`, so `α|L⟩ + β|R⟩` becomes
/// `α|R,+1⟩ + β|L,−1⟩` for `q = 1/2`. Other charges leave the modeled
/// subspace and are rejected.
pub fn apply_qplate(pol: &QubitState, qp: &QPlate) -> Result<SpinOrbitState> {
    if pol.sphere() != Sphere::Sam {
        return Err(invalid("q-plate input must be a polarization (SAM) state"));
    }
    if (qp.charge() - 0.5).abs() > 1e-12 {
        return Err(Error::UnsupportedCharge(qp.charge()));
    }
    let zero = C64::new(0.0, 0.0);
    let mut amplitudes = [zero; 4];
    amplitudes[basis_index(false, true)] = pol.c_plus();
    amplitudes[basis_index(true, false)] = pol.c_minus();
    Ok(SpinOrbitState { amplitudes: canonical_phase(amplitudes) })
}

/// `|Φ⁺⟩ = (|L,−1⟩ + |R,+1⟩)/√2`.
pub fn prepare_phi_plus() -> SpinOrbitState {
    let zero = C64::new(0.0, 0.0);
    let h = C64::new(FRAC_1_SQRT_2, 0.0);
    SpinOrbitState { amplitudes: [zero, h, h, zero] }
}

fn canonical_phase<const N: usize>(mut amps: [C64; N]) -> [C64; N] {
    if let Some(lead) = amps.iter().find(|a| a.norm() > PHASE_EPS) {
        let rot = lead.conj() / lead.norm();
        for a in amps.iter_mut() {
            *a *= rot;
        }
        if let Some(lead) = amps.iter_mut().find(|a| a.norm() > PHASE_EPS) {
            lead.im = 0.0;
        }
    }
    amps
}
