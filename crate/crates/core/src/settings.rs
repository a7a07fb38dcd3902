//! Measurement-setting triads `{aᵢ, bᵢ, b′ᵢ}` for the three-pair Leggett
//! inequality.
//!
//! A triad is admissible when, for each `i`, the pair `bᵢ, b′ᵢ` spans the
//! angle `φ`, the differences `bᵢ − b′ᵢ` are mutually orthogonal, and the sums
//! `bᵢ + b′ᵢ` point along `aᵢ`. [`build_triad`] produces the canonical family
//! used in the single-photon experiment; [`validate_triad`] accepts any triad.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::format::{sig3, Sig};
use crate::statespace::{angle_between, PoincareVector};

/// Residual tolerance for triads built by [`build_triad`].
pub const CONSTRUCTED_TOLERANCE: f64 = 1e-9;
/// Residual tolerance for triads read from external documents.
pub const INGESTED_TOLERANCE: f64 = 1e-6;
/// Difference or sum vectors shorter than this are treated as vanishing.
const DEGENERATE_NORM: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettingsTriad {
    pub phi_deg: f64,
    /// SAM settings.
    pub a: [PoincareVector; 3],
    /// OAM settings, measurement coordinates.
    pub b: [PoincareVector; 3],
    pub b_prime: [PoincareVector; 3],
}

impl SettingsTriad {
    /// The six `(a, b)` pairs in file order `1, 1p, 2, 2p, 3, 3p`.
    pub fn pairs(&self) -> [(PoincareVector, PoincareVector); 6] {
        [
            (self.a[0], self.b[0]),
            (self.a[0], self.b_prime[0]),
            (self.a[1], self.b[1]),
            (self.a[1], self.b_prime[1]),
            (self.a[2], self.b[2]),
            (self.a[2], self.b_prime[2]),
        ]
    }

    /// Same triad with `bᵢ` and `b′ᵢ` exchanged.
    pub fn swapped(&self) -> Self {
        Self { b: self.b_prime, b_prime: self.b, ..*self }
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = TriadOut {
            phi_deg: Sig(self.phi_deg),
            a: self.a.map(|v| sig3(v.to_array())),
            b: self.b.map(|v| sig3(v.to_array())),
            b_prime: self.b_prime.map(|v| sig3(v.to_array())),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    /// Parses a triad document. Vectors within [`INGESTED_TOLERANCE`] of unit
    /// length are renormalized; the three constraints are not checked here.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: TriadIn = serde_json::from_str(text)?;
        let unit = |v: [f64; 3]| -> Result<PoincareVector> {
            let n2 = v.iter().map(|c| c * c).sum::<f64>();
            if !n2.is_finite() || (n2 - 1.0).abs() > INGESTED_TOLERANCE {
                return Err(invalid(format!("triad vector {v:?} is not unit")));
            }
            PoincareVector::normalized(v[0], v[1], v[2])
        };
        let three =
            |vs: [[f64; 3]; 3]| -> Result<[PoincareVector; 3]> { Ok([unit(vs[0])?, unit(vs[1])?, unit(vs[2])?]) };
        if !(0.0..=180.0).contains(&doc.phi_deg) {
            return Err(invalid(format!("phi_deg {} outside [0, 180]", doc.phi_deg)));
        }
        Ok(Self { phi_deg: doc.phi_deg, a: three(doc.a)?, b: three(doc.b)?, b_prime: three(doc.b_prime)? })
    }
}

#[derive(Serialize)]
struct TriadOut {
    phi_deg: Sig,
    a: [[Sig; 3]; 3],
    b: [[Sig; 3]; 3],
    b_prime: [[Sig; 3]; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TriadIn {
    phi_deg: f64,
    a: [[f64; 3]; 3],
    b: [[f64; 3]; 3],
    b_prime: [[f64; 3]; 3],
}

fn check_phi(phi_deg: f64) -> Result<()> {
    if !(0.0..=180.0).contains(&phi_deg) {
        return Err(invalid(format!("phi = {phi_deg}° outside [0°, 180°]")));
    }
    Ok(())
}

/// The canonical triad at aperture `phi_deg`.
///
/// `a₁ = |H⟩`, `a₂ = a₃ = |A⟩`. The first two OAM pairs sit on the equator at
/// `±φ/2` around `a₁` and `a₂`; the third sits on the meridian through `a₃` at
/// polar offsets `±φ/2`.
pub fn build_triad(phi_deg: f64) -> Result<SettingsTriad> {
    check_phi(phi_deg)?;
    let (s, c) = (phi_deg.to_radians() / 2.0).sin_cos();
    let v = |x, y, z| PoincareVector::normalized(x, y, z);
    Ok(SettingsTriad {
        phi_deg,
        a: [PoincareVector::X, PoincareVector::Y, PoincareVector::Y],
        b: [v(c, s, 0.0)?, v(-s, c, 0.0)?, v(0.0, c, s)?],
        b_prime: [v(c, -s, 0.0)?, v(s, c, 0.0)?, v(0.0, c, -s)?],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintStatus {
    Pass,
    Fail,
    /// The constraint's vectors vanish at this endpoint (`φ = 0` for the
    /// differences, `φ = 180°` for the sums).
    VacuousPass,
}

impl ConstraintStatus {
    pub fn passed(self) -> bool {
        !matches!(self, Self::Fail)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub status: ConstraintStatus,
    /// Worst residual over the three pairs (radians for angles, `|d̂ᵢ·d̂ⱼ|`
    /// for orthogonality). Zero when vacuous.
    pub residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConstraintReport {
    /// `max |angle(bᵢ, b′ᵢ) − φ|`.
    pub equal_angles: ConstraintCheck,
    /// `max |d̂ᵢ·d̂ⱼ|` over `i ≠ j` with `dᵢ = bᵢ − b′ᵢ`.
    pub orthogonal_differences: ConstraintCheck,
    /// `max angle(bᵢ + b′ᵢ, aᵢ)`.
    pub parallel_sums: ConstraintCheck,
}

impl ConstraintReport {
    pub fn all_pass(&self) -> bool {
        self.equal_angles.status.passed()
            && self.orthogonal_differences.status.passed()
            && self.parallel_sums.status.passed()
    }
}

impl fmt::Display for ConstraintReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (name, c) in [
            ("equal angles", self.equal_angles),
            ("orthogonal differences", self.orthogonal_differences),
            ("parallel sums", self.parallel_sums),
        ] {
            writeln!(f, "{name:<24} {:?} (residual {:.3e})", c.status, c.residual)?;
        }
        Ok(())
    }
}

fn check(residual: f64, tol: f64) -> ConstraintCheck {
    let status = if residual <= tol { ConstraintStatus::Pass } else { ConstraintStatus::Fail };
    ConstraintCheck { status, residual }
}

const VACUOUS: ConstraintCheck = ConstraintCheck { status: ConstraintStatus::VacuousPass, residual: 0.0 };

fn combine(u: PoincareVector, v: PoincareVector, sign: f64) -> [f64; 3] {
    let (u, v) = (u.to_array(), v.to_array());
    [u[0] + sign * v[0], u[1] + sign * v[1], u[2] + sign * v[2]]
}

fn norm(v: [f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Measures how well `t` meets the three triad constraints at tolerance `tol`.
pub fn validate_triad(t: &SettingsTriad, tol: f64) -> ConstraintReport {
    let phi = t.phi_deg.to_radians();

    let angle_residual = (0..3).map(|i| (t.b[i].angle_to(&t.b_prime[i]) - phi).abs()).fold(0.0, f64::max);

    let diffs: Vec<[f64; 3]> = (0..3).map(|i| combine(t.b[i], t.b_prime[i], -1.0)).collect();
    let orthogonal_differences = if diffs.iter().any(|d| norm(*d) <= DEGENERATE_NORM) {
        VACUOUS
    } else {
        let unit: Vec<[f64; 3]> = diffs.iter().map(|d| d.map(|c| c / norm(*d))).collect();
        let worst = [(0, 1), (0, 2), (1, 2)]
            .iter()
            .map(|&(i, j)| (unit[i][0] * unit[j][0] + unit[i][1] * unit[j][1] + unit[i][2] * unit[j][2]).abs())
            .fold(0.0, f64::max);
        check(worst, tol)
    };

    let sums: Vec<[f64; 3]> = (0..3).map(|i| combine(t.b[i], t.b_prime[i], 1.0)).collect();
    let parallel_sums = if sums.iter().any(|s| norm(*s) <= DEGENERATE_NORM) {
        VACUOUS
    } else {
        let worst = (0..3).map(|i| angle_between(sums[i], t.a[i].to_array())).fold(0.0, f64::max);
        check(worst, tol)
    };

    ConstraintReport { equal_angles: check(angle_residual, tol), orthogonal_differences, parallel_sums }
}

/// Triads at `start, start + step, …` up to and including `stop`.
pub fn sweep_grid(start: f64, stop: f64, step: f64) -> Result<Vec<SettingsTriad>> {
    grid_angles(start, stop, step)?.into_iter().map(build_triad).collect()
}

/// The angles of [`sweep_grid`] without building triads.
pub fn grid_angles(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !step.is_finite() {
        return Err(invalid(format!("grid step must be positive, got {step}")));
    }
    if !(start <= stop) {
        return Err(invalid(format!("grid start {start} exceeds stop {stop}")));
    }
    check_phi(start)?;
    check_phi(stop)?;
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|k| start + k as f64 * step).collect())
}
