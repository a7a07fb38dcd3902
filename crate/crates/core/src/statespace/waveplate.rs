//! Polarization projection with a half-wave plate, a quarter-wave plate and a
//! horizontal polarizer.
//!
//! Jones vectors are written in the `(H, V)` basis with
//! `|L⟩ = (|H⟩ − i|V⟩)/√2` and `|R⟩ = (|H⟩ + i|V⟩)/√2`, which puts `|H⟩` at
//! `+x` and `|A⟩` at `+y` on the SAM sphere. A retarder with fast axis at
//! angle `θ` from horizontal and retardance `Γ` is
//! `R(−θ)·diag(1, e^{iΓ})·R(θ)` with `R(θ) = [[cos θ, sin θ], [−sin θ, cos θ]]`.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

use num_complex::Complex64 as C64;

use super::{vector_to_state, PoincareVector, QubitState, Sphere};

type Jones = [C64; 2];
type JonesMatrix = [[C64; 2]; 2];

/// Transmission accepted as "passes with certainty" by the angle solver.
const TRANSMISSION_TOL: f64 = 1e-12;

/// Plate orientations (degrees) selecting one polarization state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveplateSetting {
    /// Half-wave plate fast axis, in `[0°, 90°)`.
    pub hwp_deg: f64,
    /// Quarter-wave plate fast axis, in `[0°, 180°)`.
    pub qwp_deg: f64,
    /// Self-check: transmission of the target state through the sequence.
    pub transmission: f64,
}

/// Jones vector `(E_H, E_V)` of a SAM state.
pub fn jones_vector(s: &QubitState) -> Jones {
    let [l, r] = s.amplitudes();
    let h = (l + r) * FRAC_1_SQRT_2;
    let v = C64::new(0.0, 1.0) * (r - l) * FRAC_1_SQRT_2;
    [h, v]
}

fn retarder(theta: f64, retardance: f64) -> JonesMatrix {
    let (s, c) = theta.sin_cos();
    let e = C64::from_polar(1.0, retardance);
    // R(−θ)·diag(1, e)·R(θ)
    [[c * c + e * s * s, (C64::new(1.0, 0.0) - e) * c * s], [(C64::new(1.0, 0.0) - e) * c * s, s * s + e * c * c]]
}

fn apply(m: &JonesMatrix, v: &Jones) -> Jones {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn adjoint(m: &JonesMatrix) -> JonesMatrix {
    [[m[0][0].conj(), m[1][0].conj()], [m[0][1].conj(), m[1][1].conj()]]
}

/// Probability that `state` passes HWP(`hwp_deg`) → QWP(`qwp_deg`) → H
/// polarizer.
pub fn transmission(state: &QubitState, hwp_deg: f64, qwp_deg: f64) -> f64 {
    let hwp = retarder(hwp_deg.to_radians(), PI);
    let qwp = retarder(qwp_deg.to_radians(), FRAC_PI_2);
    let out = apply(&qwp, &apply(&hwp, &jones_vector(state)));
    out[0].norm_sqr()
}

/// Stokes azimuth `atan2(S₂, S₁)` and `S₃` of a Jones vector.
fn stokes(j: &Jones) -> (f64, f64) {
    let cross = j[0].conj() * j[1];
    let s1 = j[0].norm_sqr() - j[1].norm_sqr();
    let s2 = 2.0 * cross.re;
    (s2.atan2(s1), 2.0 * cross.im)
}

fn wrap(deg: f64, period: f64) -> f64 {
    let w = deg.rem_euclid(period);
    if period - w < 1e-9 {
        0.0
    } else {
        w
    }
}

/// Wave-plate orientations that transmit the SAM state `a` with certainty.
///
/// The QWP angle is fixed by the ellipticity of `a` (two branches per sign of
/// `S₃`); the HWP then reflects the state produced by the QWP onto `a` about
/// the bisecting linear axis. Every candidate is checked by propagating the
/// Jones matrices. Among passing candidates the smallest HWP angle wins, then
/// the smallest QWP angle.
pub fn waveplate_projection_angles(a: &PoincareVector) -> WaveplateSetting {
    let target = vector_to_state(a, Sphere::Sam);
    let (az_target, s3) = stokes(&jones_vector(&target));
    let horizontal: Jones = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];

    let mut best: Option<WaveplateSetting> = None;
    for sign in [1.0, -1.0] {
        let half = (sign * s3).clamp(-1.0, 1.0).asin().to_degrees() / 2.0;
        for qwp in [half, 90.0 - half] {
            let qwp = wrap(qwp, 180.0);
            // State that the QWP sends to |H⟩.
            let pre = apply(&adjoint(&retarder(qwp.to_radians(), FRAC_PI_2)), &horizontal);
            let (az_pre, _) = stokes(&pre);
            let bisector = wrap((az_pre + az_target).to_degrees() / 4.0, 90.0);
            for hwp in [bisector, wrap(bisector + 45.0, 90.0), 0.0] {
                let t = transmission(&target, hwp, qwp);
                if t < 1.0 - TRANSMISSION_TOL {
                    continue;
                }
                let candidate = WaveplateSetting { hwp_deg: hwp, qwp_deg: qwp, transmission: t };
                let better = match &best {
                    None => true,
                    Some(b) => hwp < b.hwp_deg - 1e-9 || ((hwp - b.hwp_deg).abs() <= 1e-9 && qwp < b.qwp_deg - 1e-9),
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
    }
    best.expect("every polarization state is reachable by a HWP + QWP pair")
}
