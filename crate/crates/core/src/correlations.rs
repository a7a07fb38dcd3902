//! Quantum correlations, the Leggett statistic `E₃(φ)` and its bound `L₃(φ)`.

use std::io::{Read, Write};

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::format;
use crate::settings::{build_triad, SettingsTriad};
use crate::statespace::{measurement_state, prepare_phi_plus, PoincareVector, Sphere, SpinOrbitState};

/// Slack allowed on `|C| ≤ 1` before a correlation is rejected.
pub const CORRELATION_SLACK: f64 = 1e-9;

/// A correlation coefficient with its one-sigma uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorrelationValue {
    pub value: f64,
    /// Zero for exact values.
    pub sigma: f64,
    /// Set when `sigma` comes from the zero-count floor rather than plain
    /// propagation.
    pub sigma_floored: bool,
}

impl CorrelationValue {
    pub fn exact(value: f64) -> Self {
        Self { value, sigma: 0.0, sigma_floored: false }
    }

    pub fn with_sigma(value: f64, sigma: f64) -> Self {
        Self { value, sigma, sigma_floored: false }
    }
}

/// One point of an `E₃` curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E3Point {
    pub phi_deg: f64,
    pub e3: f64,
    pub l3: f64,
    pub sigma_e3: f64,
}

impl E3Point {
    pub fn new(phi_deg: f64, e3: f64, l3: f64, sigma_e3: f64) -> Result<Self> {
        if !(-1e-12..=2.0 + 1e-12).contains(&e3) {
            return Err(invalid(format!("E3 = {e3} outside [0, 2]")));
        }
        if !(4.0 / 3.0 - 1e-12..=2.0 + 1e-12).contains(&l3) {
            return Err(invalid(format!("L3 = {l3} outside [4/3, 2]")));
        }
        if !(sigma_e3 >= 0.0) {
            return Err(invalid(format!("negative sigma {sigma_e3}")));
        }
        Ok(Self { phi_deg, e3, l3, sigma_e3 })
    }
}

/// `E₃` assembled from six measured correlations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E3Statistic {
    pub e3: f64,
    pub sigma: f64,
    /// Pairs `i` with `|Cᵢ + C′ᵢ| < 3σ`, where the frozen-sign linearization
    /// of the absolute value is unreliable.
    pub near_zero: [bool; 3],
    /// Any input sigma came from the zero-count floor.
    pub sigma_floored: bool,
}

impl E3Statistic {
    pub fn any_near_zero(&self) -> bool {
        self.near_zero.iter().any(|&f| f)
    }
}

/// Born-rule joint probabilities `P(x, y)` for projective measurements along
/// `±a` (SAM) and `±b` (OAM), indexed `[x == −1][y == −1]`.
pub fn joint_probabilities(state: &SpinOrbitState, a: &PoincareVector, b: &PoincareVector) -> [[f64; 2]; 2] {
    let sam = [measurement_state(a, Sphere::Sam), measurement_state(&-*a, Sphere::Sam)];
    let oam = [measurement_state(b, Sphere::Oam), measurement_state(&-*b, Sphere::Oam)];
    let mut p = [[0.0; 2]; 2];
    for (i, s) in sam.iter().enumerate() {
        for (j, o) in oam.iter().enumerate() {
            p[i][j] = state.projection_probability(s, o);
        }
    }
    p
}

/// `C(a, b) = Σ x·y·P(x, y)` for an arbitrary pure spin-orbit state.
///
/// `b` is in OAM measurement coordinates; for `|Φ⁺⟩` the result is `−a·b`.
pub fn quantum_correlation(state: &SpinOrbitState, a: &PoincareVector, b: &PoincareVector) -> CorrelationValue {
    let p = joint_probabilities(state, a, b);
    CorrelationValue::exact(p[0][0] + p[1][1] - p[0][1] - p[1][0])
}

fn e3_of(c: [f64; 6]) -> f64 {
    ((c[0] + c[1]).abs() + (c[2] + c[3]).abs() + (c[4] + c[5]).abs()) / 3.0
}

/// `E₃` for `state` measured with `triad`.
pub fn e3_for_state(state: &SpinOrbitState, triad: &SettingsTriad) -> f64 {
    e3_of(triad.pairs().map(|(a, b)| quantum_correlation(state, &a, &b).value))
}

fn check_phi(phi_deg: f64) -> Result<()> {
    if !(0.0..=180.0).contains(&phi_deg) {
        return Err(invalid(format!("phi = {phi_deg}° outside [0°, 180°]")));
    }
    Ok(())
}

/// Quantum prediction of `E₃(φ)` for `|Φ⁺⟩` on the canonical triad,
/// evaluated through the projectors (equals `2|cos(φ/2)|`).
pub fn e3_quantum(phi_deg: f64) -> Result<f64> {
    let triad = build_triad(phi_deg)?;
    Ok(e3_for_state(&prepare_phi_plus(), &triad))
}

/// The hidden-variable bound `L₃(φ) = 2 − (2/3)|sin(φ/2)|`.
pub fn leggett_bound(phi_deg: f64) -> Result<f64> {
    check_phi(phi_deg)?;
    Ok(2.0 - 2.0 / 3.0 * (phi_deg.to_radians() / 2.0).sin().abs())
}

/// Endpoint accuracy of [`violation_windows`], in degrees.
pub const WINDOW_TOLERANCE_DEG: f64 = 1e-10;

/// Maximal sub-intervals of `[lo, hi]` on which `gap(φ) > 0`.
///
/// The range is scanned at `scan_step` and each sign change is refined by
/// bisection to [`WINDOW_TOLERANCE_DEG`]. Windows narrower than the scan step
/// can be missed.
pub fn violation_windows<F>(gap: F, lo: f64, hi: f64, scan_step: f64) -> Vec<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let bisect = |mut inside: f64, mut outside: f64| {
        while (inside - outside).abs() > WINDOW_TOLERANCE_DEG {
            let mid = 0.5 * (inside + outside);
            if gap(mid) > 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };

    let n = ((hi - lo) / scan_step).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|k| (lo + k as f64 * scan_step).min(hi)).collect();
    let mut windows = Vec::new();
    let mut start = if gap(lo) > 0.0 { Some(lo) } else { None };
    for pair in grid.windows(2) {
        let (x0, x1) = (pair[0], pair[1]);
        let (in0, in1) = (gap(x0) > 0.0, gap(x1) > 0.0);
        match (in0, in1) {
            (false, true) => start = Some(bisect(x1, x0)),
            (true, false) => {
                windows.push((start.take().unwrap_or(x0), bisect(x0, x1)));
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        windows.push((s, hi));
    }
    windows
}

fn ideal_gap(phi_deg: f64) -> f64 {
    let e3 = e3_quantum(phi_deg).unwrap_or(f64::NAN);
    let l3 = leggett_bound(phi_deg).unwrap_or(f64::NAN);
    e3 - l3
}

/// Open interval of `φ` (degrees) where the quantum `E₃` exceeds `L₃`.
pub fn ideal_violation_window() -> (f64, f64) {
    violation_windows(ideal_gap, 0.0, 180.0, 1.0)
        .first()
        .copied()
        .expect("the ideal curve violates the bound near φ = 0")
}

/// Location and value of the largest `gap` inside `[lo, hi]`, assuming a
/// single interior maximum. Bisects on the sign of a central-difference slope,
/// which pins the argmax far more tightly than comparing function values.
pub fn maximize_gap<F>(gap: F, lo: f64, hi: f64) -> (f64, f64)
where
    F: Fn(f64) -> f64,
{
    const H: f64 = 1e-4;
    let slope = |x: f64| gap(x + H) - gap(x - H);
    let (mut a, mut b) = (lo + H, hi - H);
    while b - a > WINDOW_TOLERANCE_DEG {
        let mid = 0.5 * (a + b);
        if slope(mid) > 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    let x = 0.5 * (a + b);
    (x, gap(x))
}

/// Largest ideal violation `max (E₃ − L₃)` and where it occurs.
pub fn ideal_max_gap() -> (f64, f64) {
    let (lo, hi) = ideal_violation_window();
    maximize_gap(ideal_gap, lo, hi)
}

/// `E₃ = (1/3)Σ|Cᵢ + C′ᵢ|` from correlations ordered `1, 1p, 2, 2p, 3, 3p`.
///
/// The sigma is first-order propagation with the sign of each `Cᵢ + C′ᵢ`
/// frozen at its measured value: `σ = (1/3)√Σ σ²`.
pub fn e3_from_correlations(c: &[CorrelationValue; 6]) -> Result<E3Statistic> {
    if let Some(bad) = c.iter().find(|v| !(v.value.abs() <= 1.0 + CORRELATION_SLACK)) {
        return Err(invalid(format!("correlation {} outside [-1, 1]", bad.value)));
    }
    let e3 = e3_of(c.map(|v| v.value));
    let sigma = c.iter().map(|v| v.sigma * v.sigma).sum::<f64>().sqrt() / 3.0;
    let near_zero = [0, 2, 4].map(|k| {
        let sum = c[k].value + c[k + 1].value;
        let s = c[k].sigma.hypot(c[k + 1].sigma);
        sum.abs() < 3.0 * s
    });
    let sigma_floored = c.iter().any(|v| v.sigma_floored);
    Ok(E3Statistic { e3, sigma, near_zero, sigma_floored })
}

/// Exact theory curve on the given angles.
pub fn theory_curve(angles: &[f64]) -> Result<Vec<E3Point>> {
    angles.iter().map(|&phi| E3Point::new(phi, e3_quantum(phi)?, leggett_bound(phi)?, 0.0)).collect()
}

pub const E3_CSV_HEADER: [&str; 4] = ["phi_deg", "e3", "l3", "sigma_e3"];

pub fn write_e3_csv<W: Write>(out: W, points: &[E3Point]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    w.write_record(E3_CSV_HEADER)?;
    for p in points {
        w.write_record([format::angle(p.phi_deg), format::sig(p.e3), format::sig(p.l3), format::sig(p.sigma_e3)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_e3_csv<R: Read>(input: R) -> Result<Vec<E3Point>> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != E3_CSV_HEADER {
        return Err(Error::Schema { line: 1, message: format!("expected header {}", E3_CSV_HEADER.join(",")) });
    }
    let mut points = Vec::new();
    for record in r.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<f64> {
            record
                .get(k)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::Schema { line, message: format!("bad {} field", E3_CSV_HEADER[k]) })
        };
        let point = E3Point::new(field(0)?, field(1)?, field(2)?, field(3)?)
            .map_err(|e| Error::Schema { line, message: e.to_string() })?;
        points.push(point);
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::settings::grid_angles;
    use crate::statespace::{vector_to_state, QubitState, SpinOrbitState};
    use num_complex::Complex64 as C64;
    use proptest::prelude::*;

    fn unit_vector() -> impl Strategy<Value = PoincareVector> {
        (-1.0f64..=1.0, 0.0f64..std::f64::consts::TAU).prop_map(|(z, phi)| PoincareVector::from_angles(z.acos(), phi))
    }

    #[test]
    fn phi_plus_examples() {
        let phi = prepare_phi_plus();
        let z = PoincareVector::Z;
        assert!((quantum_correlation(&phi, &z, &z).value + 1.0).abs() < 1e-15);
        assert!(quantum_correlation(&phi, &PoincareVector::X, &z).value.abs() < 1e-15);
        let t = build_triad(28.0).unwrap();
        let c = quantum_correlation(&phi, &t.a[0], &t.b[0]).value;
        assert!((c + 14f64.to_radians().cos()).abs() < 1e-12);
        assert!((c + 0.970296).abs() < 1e-6);
    }

    #[test]
    fn uninverted_oam_axes_give_the_mixed_sign_form() {
        // Without the OAM x/y inversion |Φ⁺⟩ yields a_x b_x + a_y b_y − a_z b_z.
        let phi = prepare_phi_plus();
        let a = PoincareVector::normalized(0.3, -0.4, 0.5).unwrap();
        let b = PoincareVector::normalized(-0.7, 0.2, 0.6).unwrap();
        let sam = [vector_to_state(&a, Sphere::Sam), vector_to_state(&-a, Sphere::Sam)];
        let oam = [vector_to_state(&b, Sphere::Oam), vector_to_state(&-b, Sphere::Oam)];
        let p = |i: usize, j: usize| phi.projection_probability(&sam[i], &oam[j]);
        let naive = p(0, 0) + p(1, 1) - p(0, 1) - p(1, 0);
        let expected = a.x() * b.x() + a.y() * b.y() - a.z() * b.z();
        assert!((naive - expected).abs() < 1e-12);
    }

    #[test]
    fn product_state_correlation_factorizes() {
        let a = PoincareVector::normalized(0.1, 0.9, -0.2).unwrap();
        let b = PoincareVector::normalized(0.5, -0.5, 0.5).unwrap();
        let s = vector_to_state(&PoincareVector::Y, Sphere::Sam);
        let o = QubitState::north(Sphere::Oam);
        let psi = SpinOrbitState::product(&s, &o);
        let c = quantum_correlation(&psi, &a, &b).value;
        let ma = psi.marginal_expectation(&a, Sphere::Sam);
        let mb = psi.marginal_expectation(&b, Sphere::Oam);
        assert!((c - ma * mb).abs() < 1e-12);
        assert!((ma - a.y()).abs() < 1e-12);
    }

    #[test]
    fn general_state_joint_probabilities_sum_to_one() {
        let psi =
            SpinOrbitState::new([C64::new(0.1, 0.2), C64::new(-0.3, 0.4), C64::new(0.5, 0.0), C64::new(0.0, -0.6)])
                .unwrap();
        let p = joint_probabilities(&psi, &PoincareVector::Y, &PoincareVector::X);
        let total: f64 = p.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(p.iter().flatten().all(|&x| x >= 0.0));
    }

    #[test]
    fn e3_quantum_examples() {
        assert!((e3_quantum(0.0).unwrap() - 2.0).abs() < 1e-15);
        assert!(e3_quantum(180.0).unwrap().abs() < 1e-15);
        // 2·cos(14°)
        assert!((e3_quantum(28.0).unwrap() - 1.940_591_452_551_993).abs() < 1e-12);
        assert!(e3_quantum(181.0).is_err());
    }

    #[test]
    fn e3_quantum_matches_closed_form_on_grid() {
        for phi in grid_angles(0.0, 180.0, 4.0).unwrap() {
            let closed = 2.0 * (phi.to_radians() / 2.0).cos().abs();
            assert!((e3_quantum(phi).unwrap() - closed).abs() < 1e-10, "phi = {phi}");
        }
    }

    #[test]
    fn leggett_bound_examples() {
        assert_eq!(leggett_bound(0.0).unwrap(), 2.0);
        assert!((leggett_bound(180.0).unwrap() - 4.0 / 3.0).abs() < 1e-15);
        // 2 − (2/3)·sin(14°)
        assert!((leggett_bound(28.0).unwrap() - 1.838_718_736_266_888).abs() < 1e-12);
        assert!(leggett_bound(-1.0).is_err());
    }

    #[test]
    fn leggett_bound_strictly_decreasing() {
        let values: Vec<f64> = (0..=180).map(|k| leggett_bound(k as f64).unwrap()).collect();
        assert!(values.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn window_matches_closed_form() {
        let (lo, hi) = ideal_violation_window();
        assert!(lo.abs() < 1e-6);
        let oracle = 4.0 * (1.0f64 / 3.0).atan().to_degrees();
        assert!((hi - oracle).abs() < 1e-8, "{hi} vs {oracle}");
    }

    #[test]
    fn window_sign_near_endpoint() {
        // 0.01° grid on both sides of 4·atan(1/3) ≈ 73.7398°
        for k in 7300..=7373 {
            let phi = k as f64 / 100.0;
            assert!(ideal_gap(phi) > 0.0, "phi = {phi}");
        }
        for k in 7374..=7500 {
            let phi = k as f64 / 100.0;
            assert!(ideal_gap(phi) < 0.0, "phi = {phi}");
        }
        assert!(ideal_gap(0.01) > 0.0);
    }

    #[test]
    fn max_gap_matches_calculus_and_grid() {
        let (phi, gap) = ideal_max_gap();
        let phi_oracle = 2.0 * (1.0f64 / 3.0).atan().to_degrees();
        let gap_oracle = 2.0 * 10f64.sqrt() / 3.0 - 2.0;
        assert!((phi - phi_oracle).abs() < 1e-6);
        assert!((gap - gap_oracle).abs() < 1e-12);
        let grid_best = (0..=7400)
            .map(|k| k as f64 / 100.0)
            .map(|p| 2.0 * (p.to_radians() / 2.0).cos() - 2.0 + 2.0 / 3.0 * (p.to_radians() / 2.0).sin())
            .fold(f64::MIN, f64::max);
        assert!(grid_best <= gap + 1e-12 && gap - grid_best < 1e-7);
    }

    #[test]
    fn generic_windows_on_visibility_curve() {
        // V = 0.96 lifts the lower endpoint off zero.
        let gap = |p: f64| 0.96 * 2.0 * (p.to_radians() / 2.0).cos() - leggett_bound(p).unwrap();
        let w = violation_windows(gap, 0.0, 180.0, 1.0);
        assert_eq!(w.len(), 1);
        assert!(w[0].0 > 1.0 && w[0].1 < 73.74);
        assert!(gap(w[0].0).abs() < 1e-9 && gap(w[0].1).abs() < 1e-9);
        assert!(violation_windows(|_| -1.0, 0.0, 10.0, 1.0).is_empty());
        assert_eq!(violation_windows(|_| 1.0, 0.0, 10.0, 1.0), vec![(0.0, 10.0)]);
    }

    #[test]
    fn e3_from_correlation_examples() {
        let all = [CorrelationValue::exact(-1.0); 6];
        let s = e3_from_correlations(&all).unwrap();
        assert_eq!((s.e3, s.sigma), (2.0, 0.0));

        let s = e3_from_correlations(&[CorrelationValue::exact(-0.97); 6]).unwrap();
        assert!((s.e3 - 1.94).abs() < 1e-15);

        let s = e3_from_correlations(&[CorrelationValue::with_sigma(-0.97, 0.003); 6]).unwrap();
        // (1/3)·√(6·0.003²)
        assert!((s.sigma - 0.002_449_489_742_783_178).abs() < 1e-15);
        assert!(!s.any_near_zero());

        let bad = [CorrelationValue::exact(1.1); 6];
        assert!(e3_from_correlations(&bad).is_err());
    }

    #[test]
    fn near_zero_sums_are_flagged() {
        let mut c = [CorrelationValue::with_sigma(-0.9, 0.01); 6];
        c[2] = CorrelationValue::with_sigma(0.5, 0.01);
        c[3] = CorrelationValue::with_sigma(-0.49, 0.01);
        let s = e3_from_correlations(&c).unwrap();
        assert_eq!(s.near_zero, [false, true, false]);
    }

    #[test]
    fn csv_round_trip() {
        let pts = theory_curve(&grid_angles(0.0, 180.0, 4.0).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_e3_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("phi_deg,e3,l3,sigma_e3\n"));
        assert!(!text.contains('\r'));
        let back = read_e3_csv(buf.as_slice()).unwrap();
        assert_eq!(back.len(), 46);
        for (p, q) in pts.iter().zip(&back) {
            assert_eq!(p.phi_deg, q.phi_deg);
            assert!((p.e3 - q.e3).abs() <= 1e-14 * p.e3.abs().max(1e-300));
            assert!((p.l3 - q.l3).abs() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn phi_plus_correlation_is_minus_dot(a in unit_vector(), b in unit_vector()) {
            let c = quantum_correlation(&prepare_phi_plus(), &a, &b).value;
            prop_assert!((c + a.dot(&b)).abs() < 1e-10);
        }
    }
}
