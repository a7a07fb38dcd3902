//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Tolerances and runtime limits are pinned below.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use leggett_core::correlations::{
    e3_quantum, ideal_max_gap, ideal_violation_window, leggett_bound, quantum_correlation,
};
use leggett_core::counting::{estimate_correlation, run_sweep, simulate_counts_with};
use leggett_core::hvmodel::{
    correlation_range, maximize_e3, model_e3, CorrelationChoice, HiddenModel, HiddenState, SearchConfig,
};
use leggett_core::settings::{build_triad, grid_angles, sweep_grid, validate_triad, CONSTRUCTED_TOLERANCE};
use leggett_core::statespace::{apply_qplate, prepare_phi_plus, vector_to_state};
use leggett_core::{ExperimentConfig, PoincareVector, QPlate, SettingsTriad, Sphere};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const EXACT_TOL: f64 = 1e-9;
const WINDOW_TOL_DEG: f64 = 1e-6;
const GAP_TOL: f64 = 1e-6;
const TRIAD_TOL: f64 = 1e-9;
const CALIBRATION_REL_TOL: f64 = 0.10;
const BOUND_SLACK: f64 = 1e-9;
const IDENTITY_TOL: f64 = 1e-10;

// φ = 28°, evaluated independently in 50-digit arithmetic.
const E3_28: f64 = 1.940_591_452_551_993;
const L3_28: f64 = 1.838_718_736_266_888;

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn exact_theory() -> Outcome {
    for phi in grid_angles(0.0, 180.0, 4.0).map_err(|e| e.to_string())? {
        let (e3, l3) = (e3_quantum(phi).unwrap(), leggett_bound(phi).unwrap());
        let closed = 2.0 * (phi.to_radians() / 2.0).cos().abs();
        check((e3 - closed).abs() < EXACT_TOL, format!("E3({phi}) = {e3}, expected {closed}"))?;
        check(l3.is_finite(), format!("L3({phi}) not finite"))?;
    }
    let (e0, l0) = (e3_quantum(0.0).unwrap(), leggett_bound(0.0).unwrap());
    check((e0 - 2.0).abs() < EXACT_TOL && (l0 - 2.0).abs() < EXACT_TOL, format!("phi 0: {e0}, {l0}"))?;
    let (e180, l180) = (e3_quantum(180.0).unwrap(), leggett_bound(180.0).unwrap());
    check(e180.abs() < EXACT_TOL, format!("E3(180) = {e180}"))?;
    check((l180 - 4.0 / 3.0).abs() < EXACT_TOL, format!("L3(180) = {l180}"))?;
    let (e28, l28) = (e3_quantum(28.0).unwrap(), leggett_bound(28.0).unwrap());
    check((e28 - E3_28).abs() < EXACT_TOL, format!("E3(28) = {e28}"))?;
    check((l28 - L3_28).abs() < EXACT_TOL, format!("L3(28) = {l28}"))?;
    check(((e28 - l28) - (E3_28 - L3_28)).abs() < EXACT_TOL, "gap at 28")?;
    Ok(format!("E3(28)={e28:.9} L3(28)={l28:.9} gap={:.9}", e28 - l28))
}

fn violation_window() -> Outcome {
    let (lo, hi) = ideal_violation_window();
    let want_hi = 4.0 * (1.0f64 / 3.0).atan().to_degrees();
    check(lo.abs() < WINDOW_TOL_DEG, format!("window start {lo}"))?;
    check((hi - want_hi).abs() < WINDOW_TOL_DEG, format!("window end {hi}, expected {want_hi}"))?;
    let (at, gap) = ideal_max_gap();
    let want_gap = 2.0 * 10f64.sqrt() / 3.0 - 2.0;
    // d/dφ of the gap vanishes where tan(φ/2) = 1/3
    let want_at = 2.0 * (1.0f64 / 3.0).atan().to_degrees();
    check((gap - want_gap).abs() < GAP_TOL, format!("max gap {gap}, expected {want_gap}"))?;
    check((at - want_at).abs() < WINDOW_TOL_DEG, format!("argmax {at}, expected {want_at}"))?;
    Ok(format!("window ({lo:.7}, {hi:.7}) max gap {gap:.9} at {at:.7}"))
}

fn triad_constraints() -> Outcome {
    let mut worst = 0.0f64;
    for k in 1..180 {
        let phi = f64::from(k);
        let t = build_triad(phi).map_err(|e| e.to_string())?;
        let r = validate_triad(&t, CONSTRUCTED_TOLERANCE);
        check(r.all_pass(), format!("phi {phi}: {r}"))?;
        for c in [r.equal_angles, r.orthogonal_differences, r.parallel_sums] {
            check(c.residual < TRIAD_TOL, format!("phi {phi}: residual {}", c.residual))?;
            worst = worst.max(c.residual);
        }
    }
    Ok(format!("179 triads, worst residual {worst:.2e}"))
}

fn estimator_calibration() -> Outcome {
    const TRIALS: usize = 10_000;
    let c = -0.9703;
    let cfg = ExperimentConfig::new(1e3, 1.0, 2024).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut values = Vec::with_capacity(TRIALS);
    let mut sigmas = Vec::with_capacity(TRIALS);
    for _ in 0..TRIALS {
        let table = simulate_counts_with(c, &cfg, &mut rng).map_err(|e| e.to_string())?;
        let est = estimate_correlation(&table).map_err(|e| e.to_string())?;
        values.push(est.value);
        sigmas.push(est.sigma);
    }
    let n = TRIALS as f64;
    let mean = values.iter().sum::<f64>() / n;
    let empirical = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let predicted = sigmas.iter().sum::<f64>() / n;
    let rel = (empirical / predicted - 1.0).abs();
    check(rel < CALIBRATION_REL_TOL, format!("empirical {empirical:.5} vs closed form {predicted:.5}"))?;
    Ok(format!("sd {empirical:.5} vs sigma {predicted:.5} ({:.1}% off)", 100.0 * rel))
}

fn sweep_reproduction() -> Outcome {
    let grid = sweep_grid(0.0, 180.0, 4.0).map_err(|e| e.to_string())?;
    let reports = run_sweep(&grid, &ExperimentConfig::default()).map_err(|e| e.to_string())?;
    let significant: Vec<usize> = (0..reports.len()).filter(|&i| reports[i].n_sigma >= 3.0).collect();
    check(!significant.is_empty(), "no phi with n_sigma >= 3")?;
    let (first, last) = (significant[0], *significant.last().unwrap());
    check(last - first + 1 == significant.len(), "n_sigma >= 3 region is not contiguous")?;
    let (lo, hi) = (reports[first].phi_deg, reports[last].phi_deg);
    check(lo <= 28.0 && 28.0 <= hi, format!("region [{lo}, {hi}] misses 28"))?;
    check(lo > 0.0 && hi < 73.74, format!("region [{lo}, {hi}] not inside (0, 73.74)"))?;
    for r in reports.iter().filter(|r| r.phi_deg >= 80.0) {
        check(r.n_sigma < 0.0, format!("n_sigma {} at {}", r.n_sigma, r.phi_deg))?;
    }
    let peak =
        reports
            .iter()
            .map(|r| (r.n_sigma, r.phi_deg))
            .fold((f64::NEG_INFINITY, 0.0), |a, b| if b.0 > a.0 { b } else { a });
    let at28 = reports.iter().find(|r| r.phi_deg == 28.0).map(|r| r.n_sigma).unwrap_or(f64::NAN);
    Ok(format!("n_sigma >= 3 on [{lo}, {hi}], {at28:.1} sigma at 28, peak {:.1} at {}", peak.0, peak.1))
}

fn random_unit(rng: &mut impl Rng) -> PoincareVector {
    let z: f64 = rng.gen_range(-1.0..=1.0);
    PoincareVector::from_angles(z.acos(), rng.gen_range(0.0..std::f64::consts::TAU))
}

fn random_model_e3(seed: u64, grid: &[f64]) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi = grid[rng.gen_range(0..grid.len())];
    let t = build_triad(phi).unwrap();
    let k = rng.gen_range(1..=8);
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let support: Vec<(HiddenState, f64)> =
        raw.iter().map(|w| (HiddenState::new(random_unit(&mut rng), random_unit(&mut rng)), w / total)).collect();
    let selectors: Vec<[CorrelationChoice; 6]> = support
        .iter()
        .map(|(h, _)| {
            let mut row = [CorrelationChoice::Max; 6];
            for (j, (a, b)) in t.pairs().iter().enumerate() {
                let (lo, hi) = correlation_range(h.u.dot(a), h.v.dot(b)).unwrap();
                row[j] = match rng.gen_range(0..3) {
                    0 => CorrelationChoice::Max,
                    1 => CorrelationChoice::Min,
                    _ => CorrelationChoice::Value(rng.gen_range(lo..=hi)),
                };
            }
            row
        })
        .collect();
    let model = HiddenModel::new(support).unwrap();
    (model_e3(&model, &t, &selectors).unwrap(), leggett_bound(phi).unwrap())
}

/// Exhaustive single-state maximum on a 2° grid of both spheres, each pair
/// at the best of its four Fréchet corners.
fn brute_force_grid(t: &SettingsTriad) -> f64 {
    const STEP: u32 = 2;
    let mut grid = vec![PoincareVector::Z, -PoincareVector::Z];
    for k in 1..180 / STEP {
        for j in 0..360 / STEP {
            grid.push(PoincareVector::from_angles(f64::from(k * STEP).to_radians(), f64::from(j * STEP).to_radians()));
        }
    }
    let ua: Vec<[f64; 3]> = grid.iter().map(|u| t.a.map(|a| u.dot(&a))).collect();
    let vb: Vec<[f64; 6]> = grid
        .iter()
        .map(|v| [0, 1, 2].map(|i| [v.dot(&t.b[i]), v.dot(&t.b_prime[i])]).concat().try_into().unwrap())
        .collect();
    ua.par_iter()
        .map(|m| {
            let mut best = f64::NEG_INFINITY;
            for n in &vb {
                let mut sum = 0.0;
                for i in 0..3 {
                    let (hi1, lo1) = (1.0 - (m[i] - n[2 * i]).abs(), -1.0 + (m[i] + n[2 * i]).abs());
                    let (hi2, lo2) = (1.0 - (m[i] - n[2 * i + 1]).abs(), -1.0 + (m[i] + n[2 * i + 1]).abs());
                    sum += [(hi1 + hi2).abs(), (lo1 + lo2).abs(), (hi1 + lo2).abs(), (lo1 + hi2).abs()]
                        .into_iter()
                        .fold(0.0, f64::max);
                }
                best = best.max(sum / 3.0);
            }
            best
        })
        .reduce(|| f64::NEG_INFINITY, f64::max)
}

fn hidden_variable_bound() -> Outcome {
    const MODELS: u64 = 100_000;
    let grid = grid_angles(0.0, 180.0, 4.0).map_err(|e| e.to_string())?;
    let violations: Vec<(f64, f64)> = (0..MODELS)
        .into_par_iter()
        .map(|s| random_model_e3(s, &grid))
        .filter(|(e3, l3)| *e3 > l3 + BOUND_SLACK)
        .collect();
    check(
        violations.is_empty(),
        format!("{} random models above L3, e.g. {:?}", violations.len(), violations.first()),
    )?;

    let mut notes = Vec::new();
    for phi in [0.0, 28.0, 60.0, 90.0, 180.0] {
        let t = build_triad(phi).map_err(|e| e.to_string())?;
        let r = maximize_e3(&t, &SearchConfig::default()).map_err(|e| e.to_string())?;
        check(r.best_e3 <= r.l3 + BOUND_SLACK, format!("phi {phi}: maximize {} > L3 {}", r.best_e3, r.l3))?;
        let oracle = brute_force_grid(&t);
        check(r.best_e3 >= oracle - 1e-12, format!("phi {phi}: maximize {} below grid oracle {oracle}", r.best_e3))?;
        if phi == 0.0 {
            check(r.best_e3 == 2.0, format!("phi 0: maximize gave {}", r.best_e3))?;
        }
        notes.push(format!("{phi}:{:.3e}", r.gap));
    }
    Ok(format!("{MODELS} models, 0 above L3; maximize gap to L3 {}", notes.join(" ")))
}

fn correlation_identity() -> Outcome {
    let state = prepare_phi_plus();
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    let mut worst = 0.0f64;
    for _ in 0..1_000 {
        let (a, b) = (random_unit(&mut rng), random_unit(&mut rng));
        let c = quantum_correlation(&state, &a, &b).value;
        worst = worst.max((c + a.dot(&b)).abs());
    }
    check(worst < IDENTITY_TOL, format!("max |C + a.b| = {worst:e}"))?;
    let h = vector_to_state(&PoincareVector::X, Sphere::Sam);
    let prepared = apply_qplate(&h, &QPlate::half()).map_err(|e| e.to_string())?;
    check(prepared.approx_eq(&state, IDENTITY_TOL), "apply_qplate(|H>) differs from |Phi+>")?;
    Ok(format!("max |C + a.b| = {worst:.1e}; q-plate output equals |Phi+>"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        ("1 exact theory values", Duration::from_secs(1), exact_theory),
        ("2 ideal violation window", Duration::from_secs(1), violation_window),
        ("3 triad constraints", Duration::from_secs(1), triad_constraints),
        ("4 estimator calibration", Duration::from_secs(30), estimator_calibration),
        ("5 qualitative sweep", Duration::from_secs(60), sweep_reproduction),
        ("6 hidden-variable bound", Duration::from_secs(300), hidden_variable_bound),
        ("7 correlation identity", Duration::from_secs(1), correlation_identity),
    ];
    let mut failed = 0;
    for (name, limit, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:.2?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("[PASS] {name}: {detail} ({elapsed:.2?})"),
            Err(why) => {
                failed += 1;
                println!("[FAIL] {name}: {why} ({elapsed:.2?})");
            }
        }
    }
    if failed == 0 {
        println!("acceptance: 7/7 passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of 7 failed");
        ExitCode::FAILURE
    }
}
