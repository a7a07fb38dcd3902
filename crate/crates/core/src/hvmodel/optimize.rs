//! Numerical maximization of `E₃` over crypto-contextual models.

use std::cmp::Ordering;
use std::sync::atomic::{AtomicU64, Ordering as AtomicOrdering};

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::correlations::leggett_bound;
use crate::error::{invalid, Result};
use crate::format::{sig3, Sig};
use crate::settings::SettingsTriad;
use crate::statespace::PoincareVector;

/// Smallest accepted evaluation budget.
pub const MIN_BUDGET: u64 = 1_000;
/// Enough for the 5° coarse grid plus refinement.
pub const DEFAULT_BUDGET: u64 = 20_000_000;

/// Candidate coarse-grid steps (degrees), finest first. All divide 90, so
/// the poles and the equator are always on the grid.
const GRID_STEPS_DEG: [u32; 9] = [5, 6, 9, 10, 15, 18, 30, 45, 90];
const GRID_STARTS: usize = 4;
const RANDOM_STARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchConfig {
    /// Upper limit on `E₃` evaluations (grid plus refinement).
    pub budget: u64,
    pub seed: u64,
}

impl SearchConfig {
    pub fn new(budget: u64, seed: u64) -> Result<Self> {
        if budget < MIN_BUDGET {
            return Err(invalid(format!("budget {budget} below minimum {MIN_BUDGET}")));
        }
        Ok(Self { budget, seed })
    }
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET, seed: crate::counting::DEFAULT_SEED }
    }
}

/// Best single hidden state found, with the correlation signs it uses
/// (`+1` = `c_max`, `−1` = `c_min`) in pair order `1, 1p, 2, 2p, 3, 3p`.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub phi_deg: f64,
    pub best_e3: f64,
    pub l3: f64,
    /// `L₃ − best_e3`; negative only if the bound were broken.
    pub gap: f64,
    pub u: PoincareVector,
    pub v: PoincareVector,
    pub selector_signs: [i8; 6],
    pub budget: u64,
    pub evaluations: u64,
    pub grid_step_deg: u32,
}

#[derive(Serialize)]
struct ResultOut {
    phi_deg: Sig,
    best_e3: Sig,
    l3: Sig,
    gap: Sig,
    u: [Sig; 3],
    v: [Sig; 3],
    selector_signs: [i8; 6],
    budget: u64,
    evaluations: u64,
    grid_step_deg: u32,
}

impl OptimizerResult {
    pub fn to_json(&self) -> Result<String> {
        let out = ResultOut {
            phi_deg: Sig(self.phi_deg),
            best_e3: Sig(self.best_e3),
            l3: Sig(self.l3),
            gap: Sig(self.gap),
            u: sig3(self.u.to_array()),
            v: sig3(self.v.to_array()),
            selector_signs: self.selector_signs,
            budget: self.budget,
            evaluations: self.evaluations,
            grid_step_deg: self.grid_step_deg,
        };
        Ok(serde_json::to_string_pretty(&out)?)
    }
}

/// Points on a `step_deg` latitude/longitude grid, poles included once.
pub fn sphere_grid(step_deg: u32) -> Vec<PoincareVector> {
    assert!(step_deg > 0 && 180 % step_deg == 0, "grid step must divide 180");
    let rings = 180 / step_deg;
    let around = 360 / step_deg;
    let mut points = vec![PoincareVector::Z];
    for k in 1..rings {
        let theta = f64::from(k * step_deg).to_radians();
        for j in 0..around {
            points.push(PoincareVector::from_angles(theta, f64::from(j * step_deg).to_radians()));
        }
    }
    points.push(-PoincareVector::Z);
    points
}

fn upper(m: f64, n: f64) -> f64 {
    1.0 - (m - n).abs()
}

fn lower(m: f64, n: f64) -> f64 {
    -1.0 + (m + n).abs()
}

const SIGN_PATTERNS: [(i8, i8); 4] = [(1, 1), (-1, -1), (1, -1), (-1, 1)];

/// Best `|c + c′|` for one pair, given `u·aᵢ`, `v·bᵢ`, `v·b′ᵢ`.
/// `|c + c′|` is convex in `(c, c′)` over a box, so a corner wins.
fn pair_best(m: f64, n: f64, n_prime: f64) -> (f64, (i8, i8)) {
    let pick = |s: i8, nn: f64| if s > 0 { upper(m, nn) } else { lower(m, nn) };
    let mut best = (f64::NEG_INFINITY, (1, 1));
    for (s, s_prime) in SIGN_PATTERNS {
        let value = (pick(s, n) + pick(s_prime, n_prime)).abs();
        if value > best.0 {
            best = (value, (s, s_prime));
        }
    }
    best
}

fn e3_from_projections(ua: &[f64; 3], vb: &[f64; 6]) -> (f64, [i8; 6]) {
    let mut total = 0.0;
    let mut signs = [0i8; 6];
    for i in 0..3 {
        let (value, (s, s_prime)) = pair_best(ua[i], vb[2 * i], vb[2 * i + 1]);
        total += value;
        signs[2 * i] = s;
        signs[2 * i + 1] = s_prime;
    }
    (total / 3.0, signs)
}

fn project_u(t: &SettingsTriad, u: &PoincareVector) -> [f64; 3] {
    t.a.map(|a| u.dot(&a).clamp(-1.0, 1.0))
}

fn project_v(t: &SettingsTriad, v: &PoincareVector) -> [f64; 6] {
    let mut out = [0.0; 6];
    for i in 0..3 {
        out[2 * i] = v.dot(&t.b[i]).clamp(-1.0, 1.0);
        out[2 * i + 1] = v.dot(&t.b_prime[i]).clamp(-1.0, 1.0);
    }
    out
}

/// Largest `E₃` reachable by the single hidden state `(u, v)` with the best
/// Fréchet-extreme correlation choice per context.
pub fn single_state_e3(t: &SettingsTriad, u: &PoincareVector, v: &PoincareVector) -> (f64, [i8; 6]) {
    e3_from_projections(&project_u(t, u), &project_v(t, v))
}

/// Higher value first, then the earlier candidate.
fn rank<K: Ord>(a: &(f64, K), b: &(f64, K)) -> Ordering {
    b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1))
}

struct Objective<'a> {
    triad: &'a SettingsTriad,
    calls: &'a AtomicU64,
}

fn angles_to_state(p: &[f64]) -> (PoincareVector, PoincareVector) {
    (PoincareVector::from_angles(p[0], p[1]), PoincareVector::from_angles(p[2], p[3]))
}

impl CostFunction for Objective<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, p: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        self.calls.fetch_add(1, AtomicOrdering::Relaxed);
        let (u, v) = angles_to_state(p);
        Ok(-single_state_e3(self.triad, &u, &v).0)
    }
}

/// Nelder–Mead over `(θ_u, φ_u, θ_v, φ_v)` from `start`, using at most
/// `max_evals` evaluations. Returns the best value, its angles and the
/// evaluations spent.
fn refine(t: &SettingsTriad, start: [f64; 4], step: f64, max_evals: u64) -> (f64, [f64; 4], u64) {
    const DIM: u64 = 4;
    let calls = AtomicU64::new(0);
    let start_value = single_state_e3(
        t,
        &PoincareVector::from_angles(start[0], start[1]),
        &PoincareVector::from_angles(start[2], start[3]),
    )
    .0;
    // DIM + 1 evaluations seed the simplex; an iteration costs at most DIM + 2.
    if max_evals < 2 * DIM + 3 {
        return (start_value, start, 1);
    }
    let iters = (max_evals - 1 - (DIM + 1)) / (DIM + 2);
    let mut simplex = vec![start.to_vec()];
    for k in 0..4 {
        let mut p = start.to_vec();
        p[k] += step;
        simplex.push(p);
    }
    let solver = NelderMead::new(simplex).with_sd_tolerance(1e-15).expect("tolerance is non-negative");
    let run = Executor::new(Objective { triad: t, calls: &calls }, solver)
        .configure(|s| s.max_iters(iters))
        .timer(false)
        .run();
    let spent = calls.load(AtomicOrdering::Relaxed) + 1;
    let Ok(run) = run else {
        return (start_value, start, spent);
    };
    let state = run.state();
    match state.get_best_param() {
        Some(p) if -state.get_best_cost() > start_value => (-state.get_best_cost(), [p[0], p[1], p[2], p[3]], spent),
        _ => (start_value, start, spent),
    }
}

/// Maximizes `E₃` over crypto-contextual models on the triad `t`.
///
/// Only single-point models are searched. With per-state optimal
/// correlations, `E₃(ρ) = (1/3)Σᵢ|Σ_λ ρ(λ)(cᵢ + c′ᵢ)(λ)| ≤ Σ_λ ρ(λ)·E₃(λ)`, so a
/// mixture never beats its best component. Per state, `|c + c′|` is convex
/// in the correlations, so each pair is maximized at one of four Fréchet
/// corners.
///
/// A coarse grid over both spheres (finest step such that the grid pairs use
/// at most half of the budget) is scanned in parallel; the top grid points
/// and a few seeded random points are then refined with Nelder–Mead on the
/// spherical angles. Results do not depend on the thread count.
pub fn maximize_e3(t: &SettingsTriad, cfg: &SearchConfig) -> Result<OptimizerResult> {
    if cfg.budget < MIN_BUDGET {
        return Err(invalid(format!("budget {} below minimum {MIN_BUDGET}", cfg.budget)));
    }
    let l3 = leggett_bound(t.phi_deg)?;
    let (step, grid) = GRID_STEPS_DEG
        .iter()
        .map(|&s| (s, sphere_grid(s)))
        .find(|(_, g)| (g.len() as u64).pow(2) <= cfg.budget / 2)
        .expect("the 90° grid fits any accepted budget");
    let ua: Vec<[f64; 3]> = grid.iter().map(|u| project_u(t, u)).collect();
    let vb: Vec<[f64; 6]> = grid.iter().map(|v| project_v(t, v)).collect();

    let mut per_u: Vec<(f64, (usize, usize))> = ua
        .par_iter()
        .enumerate()
        .map(|(iu, pu)| {
            let mut best = (f64::NEG_INFINITY, (iu, 0));
            for (iv, pv) in vb.iter().enumerate() {
                let value = e3_from_projections(pu, pv).0;
                if value > best.0 {
                    best = (value, (iu, iv));
                }
            }
            best
        })
        .collect();
    per_u.sort_by(rank);
    let mut evaluations = (grid.len() as u64).pow(2);

    let mut starts: Vec<[f64; 4]> = per_u
        .iter()
        .take(GRID_STARTS)
        .map(|&(_, (iu, iv))| {
            let (tu, pu) = grid[iu].to_angles();
            let (tv, pv) = grid[iv].to_angles();
            [tu, pu, tv, pv]
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for _ in 0..RANDOM_STARTS {
        let mut draw = || {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            (z.acos(), rng.gen_range(0.0..std::f64::consts::TAU))
        };
        let (tu, pu) = draw();
        let (tv, pv) = draw();
        starts.push([tu, pu, tv, pv]);
    }

    let per_start = (cfg.budget - evaluations) / starts.len() as u64;
    let simplex_step = f64::from(step).to_radians() / 2.0;
    let refined: Vec<(f64, [f64; 4], u64)> =
        starts.par_iter().map(|&s| refine(t, s, simplex_step, per_start)).collect();
    evaluations += refined.iter().map(|r| r.2).sum::<u64>();

    let (grid_value, (iu, iv)) = per_u[0];
    let mut best = (grid_value, grid[iu], grid[iv]);
    for (value, p, _) in &refined {
        if *value > best.0 {
            let (u, v) = angles_to_state(p);
            best = (*value, u, v);
        }
    }
    let (best_e3, signs) = single_state_e3(t, &best.1, &best.2);
    Ok(OptimizerResult {
        phi_deg: t.phi_deg,
        best_e3,
        l3,
        gap: l3 - best_e3,
        u: best.1,
        v: best.2,
        selector_signs: signs,
        budget: cfg.budget,
        evaluations,
        grid_step_deg: step,
    })
}
