//! Leggett's crypto-contextual hidden-variable model.
//!
//! A hidden state `λ = (u, v)` fixes the local averages `⟨x⟩ = u·a` and
//! `⟨y⟩ = v·b`, but leaves the joint outcome distribution free, so a model may
//! pick any correlation per measurement context. For ±1 outcomes with means
//! `m₁, m₂` every admissible joint distribution is
//!
//! ```text
//! p(x, y) = (1 + x·m₁ + y·m₂ + x·y·c) / 4,   −1 + |m₁ + m₂| ≤ c ≤ 1 − |m₁ − m₂|,
//! ```
//!
//! so the model is parameterized exactly by one correlation `c` per
//! `(λ, setting pair)`. `ρ(λ)` is a finite mixture.

mod optimize;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::settings::SettingsTriad;
use crate::statespace::PoincareVector;

pub use optimize::{
    maximize_e3, single_state_e3, sphere_grid, OptimizerResult, SearchConfig, DEFAULT_BUDGET, MIN_BUDGET,
};

/// Slack on correlation bounds and probability sums.
pub const PROBABILITY_SLACK: f64 = 1e-12;

/// Hidden spin-like states on the SAM (`u`) and OAM (`v`) spheres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub u: PoincareVector,
    pub v: PoincareVector,
}

impl HiddenState {
    pub fn new(u: PoincareVector, v: PoincareVector) -> Self {
        Self { u, v }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// SAM, measured along `a`.
    X,
    /// OAM, measured along `b`.
    Y,
}

/// `⟨x⟩_λ = u·a` or `⟨y⟩_λ = v·b`.
pub fn marginal_mean(h: &HiddenState, setting: &PoincareVector, side: Side) -> f64 {
    let m = match side {
        Side::X => h.u.dot(setting),
        Side::Y => h.v.dot(setting),
    };
    m.clamp(-1.0, 1.0)
}

/// Attainable correlation range of two ±1 variables with means `m1`, `m2`.
pub fn correlation_range(m1: f64, m2: f64) -> Result<(f64, f64)> {
    for m in [m1, m2] {
        if !(m.abs() <= 1.0 + PROBABILITY_SLACK) {
            return Err(invalid(format!("mean {m} outside [-1, 1]")));
        }
    }
    let (m1, m2) = (m1.clamp(-1.0, 1.0), m2.clamp(-1.0, 1.0));
    Ok((-1.0 + (m1 + m2).abs(), 1.0 - (m1 - m2).abs()))
}

/// `P(x, y)` over `(+,+), (+,−), (−,+), (−,−)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JointOutcomeDistribution {
    p: [f64; 4],
}

fn slot(x: i8, y: i8) -> usize {
    (if x > 0 { 0 } else { 2 }) + if y > 0 { 0 } else { 1 }
}

impl JointOutcomeDistribution {
    /// Entries in `[−1e−12, 0)` are clamped to zero and the rest
    /// renormalized; anything more negative, or a sum off by more than
    /// `1e−12`, is rejected.
    pub fn new(p: [f64; 4]) -> Result<Self> {
        if p.iter().any(|&q| !(q >= -PROBABILITY_SLACK)) {
            return Err(invalid(format!("negative probability in {p:?}")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SLACK {
            return Err(invalid(format!("probabilities sum to {sum}")));
        }
        let clamped = p.map(|q| q.max(0.0));
        let total: f64 = clamped.iter().sum();
        Ok(Self { p: clamped.map(|q| q / total) })
    }

    pub fn probabilities(&self) -> [f64; 4] {
        self.p
    }

    pub fn prob(&self, x: i8, y: i8) -> f64 {
        self.p[slot(x, y)]
    }

    /// `P(x) = Σ_y P(x, y)`.
    pub fn marginal_x(&self, x: i8) -> f64 {
        self.prob(x, 1) + self.prob(x, -1)
    }

    pub fn marginal_y(&self, y: i8) -> f64 {
        self.prob(1, y) + self.prob(-1, y)
    }

    pub fn mean_x(&self) -> f64 {
        self.marginal_x(1) - self.marginal_x(-1)
    }

    pub fn mean_y(&self) -> f64 {
        self.marginal_y(1) - self.marginal_y(-1)
    }

    pub fn correlation(&self) -> f64 {
        self.p[0] - self.p[1] - self.p[2] + self.p[3]
    }
}

/// Joint distribution for hidden state `h`, settings `a`, `b` and
/// correlation `c`.
pub fn build_joint(
    h: &HiddenState,
    a: &PoincareVector,
    b: &PoincareVector,
    c: f64,
) -> Result<JointOutcomeDistribution> {
    let m1 = marginal_mean(h, a, Side::X);
    let m2 = marginal_mean(h, b, Side::Y);
    let (lo, hi) = correlation_range(m1, m2)?;
    if !(c >= lo - PROBABILITY_SLACK && c <= hi + PROBABILITY_SLACK) {
        return Err(invalid(format!("correlation {c} outside admissible range [{lo}, {hi}]")));
    }
    let c = c.clamp(lo, hi);
    let mut p = [0.0; 4];
    for x in [1i8, -1] {
        for y in [1i8, -1] {
            let (xf, yf) = (f64::from(x), f64::from(y));
            p[slot(x, y)] = (1.0 + xf * m1 + yf * m2 + xf * yf * c) / 4.0;
        }
    }
    JointOutcomeDistribution::new(p)
}

/// Finite-support distribution `ρ(λ)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HiddenModel {
    support: Vec<(HiddenState, f64)>,
}

impl HiddenModel {
    pub fn new(support: Vec<(HiddenState, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(invalid("hidden model needs at least one support point"));
        }
        if support.iter().any(|(_, w)| !(*w >= 0.0)) {
            return Err(invalid("negative or NaN weight in hidden model"));
        }
        let total: f64 = support.iter().map(|(_, w)| w).sum();
        if (total - 1.0).abs() > PROBABILITY_SLACK {
            return Err(invalid(format!("weights sum to {total}")));
        }
        Ok(Self { support })
    }

    pub fn single(h: HiddenState) -> Self {
        Self { support: vec![(h, 1.0)] }
    }

    pub fn support(&self) -> &[(HiddenState, f64)] {
        &self.support
    }
}

/// How a model picks the correlation of one `(λ, pair)` context.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrelationChoice {
    /// Upper end of the admissible range.
    Max,
    /// Lower end of the admissible range.
    Min,
    /// An explicit value, which must lie in the admissible range.
    Value(f64),
}

impl CorrelationChoice {
    pub fn resolve(self, range: (f64, f64)) -> Result<f64> {
        match self {
            Self::Max => Ok(range.1),
            Self::Min => Ok(range.0),
            Self::Value(c) if c >= range.0 - PROBABILITY_SLACK && c <= range.1 + PROBABILITY_SLACK => {
                Ok(c.clamp(range.0, range.1))
            }
            Self::Value(c) => Err(invalid(format!("selected correlation {c} outside [{}, {}]", range.0, range.1))),
        }
    }
}

/// The six model correlations `C(aᵢ, bᵢ)`, `C(aᵢ, b′ᵢ)` in pair order.
///
/// `selectors[k]` holds the choices for support point `k`.
pub fn model_correlations(
    model: &HiddenModel,
    t: &SettingsTriad,
    selectors: &[[CorrelationChoice; 6]],
) -> Result<[f64; 6]> {
    if selectors.len() != model.support.len() {
        return Err(invalid(format!("{} selector rows for {} support points", selectors.len(), model.support.len())));
    }
    let pairs = t.pairs();
    let mut c = [0.0; 6];
    for ((h, w), row) in model.support.iter().zip(selectors) {
        for (j, (a, b)) in pairs.iter().enumerate() {
            let range = correlation_range(marginal_mean(h, a, Side::X), marginal_mean(h, b, Side::Y))?;
            c[j] += w * row[j].resolve(range)?;
        }
    }
    Ok(c)
}

/// `E₃` of a hidden-variable model; never exceeds `L₃(φ)` beyond rounding.
pub fn model_e3(model: &HiddenModel, t: &SettingsTriad, selectors: &[[CorrelationChoice; 6]]) -> Result<f64> {
    let c = model_correlations(model, t, selectors)?;
    Ok(((c[0] + c[1]).abs() + (c[2] + c[3]).abs() + (c[4] + c[5]).abs()) / 3.0)
}
