//! Heralded coincidence counting: Poissonian count simulation with finite
//! visibility, the four-count correlation estimator and violation
//! significance.
//!
//! Each setting pair `(a, b)` is measured in the four projection combinations
//! `(a, b)`, `(−a, −b)`, `(a, −b)`, `(−a, b)`, giving a [`CountTable`]. The
//! estimator is `C = (N₊₊ + N₋₋ − N₊₋ − N₋₊) / N`. With independent Poisson
//! entries, first-order propagation gives
//!
//! ```text
//! σ_C = 2√(S·D) / N^{3/2} = √((1 − C²) / N),   S = N₊₊ + N₋₋,  D = N₊₋ + N₋₊.
//! ```

mod io;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlations::{e3_from_correlations, leggett_bound, quantum_correlation, CorrelationValue};
use crate::error::{invalid, Error, Result};
use crate::settings::SettingsTriad;
use crate::statespace::prepare_phi_plus;

pub use io::{
    group_by_phi, ingest_counts, read_report_csv, write_counts_csv, write_report_csv, CountDocument, GridSpec,
    IncompletePair, IncompletePhi, LabeledTable, ReportRow, SweepMetadata, COUNT_CSV_HEADER, REPORT_CSV_HEADER,
};

/// Name of the random generator recorded in run metadata.
pub const GENERATOR_NAME: &str = "rand_chacha::ChaCha8Rng (seed_from_u64; stream = 6*phi_index + pair_index + 1)";

/// Illustrative sweep defaults: 10⁴ expected coincidences per projection and
/// 96 % visibility.
pub const DEFAULT_MEAN_COUNTS: f64 = 1e4;
pub const DEFAULT_VISIBILITY: f64 = 0.96;
pub const DEFAULT_SEED: u64 = 7;

/// One of the six setting pairs of a triad, in file order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PairLabel {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "1p")]
    OnePrime,
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "2p")]
    TwoPrime,
    #[serde(rename = "3")]
    Three,
    #[serde(rename = "3p")]
    ThreePrime,
}

impl PairLabel {
    pub const ALL: [Self; 6] = [Self::One, Self::OnePrime, Self::Two, Self::TwoPrime, Self::Three, Self::ThreePrime];

    /// Position in [`SettingsTriad::pairs`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::One => "1",
            Self::OnePrime => "1p",
            Self::Two => "2",
            Self::TwoPrime => "2p",
            Self::Three => "3",
            Self::ThreePrime => "3p",
        }
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PairLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown pair_index {s:?} (expected 1,1p,2,2p,3,3p)"))
    }
}

/// Projection combination `(sign of a, sign of b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Combo {
    Pp,
    Mm,
    Pm,
    Mp,
}

impl Combo {
    pub const ALL: [Self; 4] = [Self::Pp, Self::Mm, Self::Pm, Self::Mp];

    /// Outcome signs `(x, y)`.
    pub fn signs(self) -> (i8, i8) {
        match self {
            Self::Pp => (1, 1),
            Self::Mm => (-1, -1),
            Self::Pm => (1, -1),
            Self::Mp => (-1, 1),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Pp => "pp",
            Self::Mm => "mm",
            Self::Pm => "pm",
            Self::Mp => "mp",
        }
    }
}

impl FromStr for Combo {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| format!("unknown combo {s:?} (expected pp,mm,pm,mp)"))
    }
}

/// Coincidence counts for `(a,b)`, `(−a,−b)`, `(a,−b)`, `(−a,b)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountTable {
    pub n_pp: u64,
    pub n_mm: u64,
    pub n_pm: u64,
    pub n_mp: u64,
}

impl CountTable {
    pub fn new(n_pp: u64, n_mm: u64, n_pm: u64, n_mp: u64) -> Self {
        Self { n_pp, n_mm, n_pm, n_mp }
    }

    pub fn total(&self) -> u64 {
        self.n_pp + self.n_mm + self.n_pm + self.n_mp
    }

    pub fn get(&self, combo: Combo) -> u64 {
        match combo {
            Combo::Pp => self.n_pp,
            Combo::Mm => self.n_mm,
            Combo::Pm => self.n_pm,
            Combo::Mp => self.n_mp,
        }
    }

    pub fn set(&mut self, combo: Combo, n: u64) {
        match combo {
            Combo::Pp => self.n_pp = n,
            Combo::Mm => self.n_mm = n,
            Combo::Pm => self.n_pm = n,
            Combo::Mp => self.n_mp = n,
        }
    }
}

/// Parameters of a simulated counting run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Expected coincidences for one projection combination when the joint
    /// probability is 1/4.
    pub mean_counts_per_setting: f64,
    /// Uniform contrast factor applied to every correlation, `C → V·C`.
    pub visibility: f64,
    pub rng_seed: u64,
}

impl ExperimentConfig {
    pub fn new(mean_counts_per_setting: f64, visibility: f64, rng_seed: u64) -> Result<Self> {
        if !(mean_counts_per_setting > 0.0) || !mean_counts_per_setting.is_finite() {
            return Err(invalid(format!("mean counts must be positive, got {mean_counts_per_setting}")));
        }
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid(format!("visibility {visibility} outside [0, 1]")));
        }
        Ok(Self { mean_counts_per_setting, visibility, rng_seed })
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self { mean_counts_per_setting: DEFAULT_MEAN_COUNTS, visibility: DEFAULT_VISIBILITY, rng_seed: DEFAULT_SEED }
    }
}

/// `E₃` estimate at one angle compared against `L₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignificanceReport {
    pub phi_deg: f64,
    pub e3_est: f64,
    pub sigma_e3: f64,
    pub l3: f64,
    /// `(e3_est − l3) / sigma_e3`; negative when the bound holds.
    pub n_sigma: f64,
    /// Some count table needed the zero-count sigma floor.
    pub sigma_floored: bool,
    /// Some `|Cᵢ + C′ᵢ|` was within 3σ of zero.
    pub near_zero_sum: bool,
}

/// `P(x, y) = (1 + x·y·c)/4` for zero-marginal ±1 outcomes.
pub fn joint_probability(c: f64, x: i8, y: i8) -> Result<f64> {
    if !(c.abs() <= 1.0) {
        return Err(invalid(format!("correlation {c} outside [-1, 1]")));
    }
    if x.abs() != 1 || y.abs() != 1 {
        return Err(invalid("outcomes must be ±1"));
    }
    Ok((1.0 + f64::from(x * y) * c) / 4.0)
}

/// Random stream for `(seed, φ index, pair index)`. Stream 0 is used by the
/// stand-alone [`simulate_counts`].
pub fn pair_rng(seed: u64, phi_index: usize, pair_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(6 * phi_index as u64 + pair_index as u64 + 1);
    rng
}

/// Draws the four counts for a pair with ideal correlation `c`.
pub fn simulate_counts(c: f64, cfg: &ExperimentConfig) -> Result<CountTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    simulate_counts_with(c, cfg, &mut rng)
}

/// [`simulate_counts`] drawing from a caller-provided generator.
pub fn simulate_counts_with<R: Rng + ?Sized>(c: f64, cfg: &ExperimentConfig, rng: &mut R) -> Result<CountTable> {
    let observed = cfg.visibility * c;
    let mut table = CountTable::default();
    for combo in Combo::ALL {
        let (x, y) = combo.signs();
        let mean = cfg.mean_counts_per_setting * 4.0 * joint_probability(observed, x, y)?;
        let n = if mean > 0.0 {
            let law = Poisson::new(mean).map_err(|e| invalid(format!("Poisson mean {mean}: {e}")))?;
            law.sample(rng) as u64
        } else {
            0
        };
        table.set(combo, n);
    }
    Ok(table)
}

fn propagated_sigma(same: f64, diff: f64) -> f64 {
    let n = same + diff;
    2.0 * (same * diff).sqrt() / n.powf(1.5)
}

/// Correlation estimate and Poisson sigma from one count table.
///
/// When `S·D = 0` the propagated sigma vanishes; it is then replaced by the
/// sigma obtained after raising every zero count to 1, and `sigma_floored` is
/// set.
pub fn estimate_correlation(t: &CountTable) -> Result<CorrelationValue> {
    let n = t.total();
    if n == 0 {
        return Err(Error::NoData);
    }
    let same = (t.n_pp + t.n_mm) as f64;
    let diff = (t.n_pm + t.n_mp) as f64;
    let value = (same - diff) / n as f64;
    if same > 0.0 && diff > 0.0 {
        return Ok(CorrelationValue::with_sigma(value, propagated_sigma(same, diff)));
    }
    let lift = |k: u64| k.max(1) as f64;
    let sigma = propagated_sigma(lift(t.n_pp) + lift(t.n_mm), lift(t.n_pm) + lift(t.n_mp));
    Ok(CorrelationValue { value, sigma, sigma_floored: true })
}

/// Count tables for all six pairs at one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiCounts {
    pub phi_deg: f64,
    /// Ordered as [`PairLabel::ALL`].
    pub tables: [CountTable; 6],
}

/// Simulates the six count tables for every triad of `grid`, sorted by `φ`.
///
/// Each `(φ index, pair)` draws from its own stream, so the result does not
/// depend on evaluation order.
pub fn simulate_sweep(grid: &[SettingsTriad], cfg: &ExperimentConfig) -> Result<Vec<PhiCounts>> {
    if grid.is_empty() {
        return Err(invalid("empty settings grid"));
    }
    let mut sorted: Vec<&SettingsTriad> = grid.iter().collect();
    sorted.sort_by(|a, b| a.phi_deg.total_cmp(&b.phi_deg));
    let state = prepare_phi_plus();
    sorted
        .par_iter()
        .enumerate()
        .map(|(phi_index, triad)| {
            let mut tables = [CountTable::default(); 6];
            for (pair_index, (a, b)) in triad.pairs().iter().enumerate() {
                let c = quantum_correlation(&state, a, b).value.clamp(-1.0, 1.0);
                let mut rng = pair_rng(cfg.rng_seed, phi_index, pair_index);
                tables[pair_index] = simulate_counts_with(c, cfg, &mut rng)?;
            }
            Ok(PhiCounts { phi_deg: triad.phi_deg, tables })
        })
        .collect()
}

/// Estimates `E₃`, its sigma and the significance against `L₃` at one angle.
pub fn significance(counts: &PhiCounts) -> Result<SignificanceReport> {
    let mut correlations = [CorrelationValue::exact(0.0); 6];
    for (c, t) in correlations.iter_mut().zip(&counts.tables) {
        *c = estimate_correlation(t)?;
    }
    let stat = e3_from_correlations(&correlations)?;
    let l3 = leggett_bound(counts.phi_deg)?;
    let excess = stat.e3 - l3;
    let n_sigma = if stat.sigma > 0.0 {
        excess / stat.sigma
    } else if excess == 0.0 {
        0.0
    } else {
        excess.signum() * f64::INFINITY
    };
    Ok(SignificanceReport {
        phi_deg: counts.phi_deg,
        e3_est: stat.e3,
        sigma_e3: stat.sigma,
        l3,
        n_sigma,
        sigma_floored: stat.sigma_floored,
        near_zero_sum: stat.any_near_zero(),
    })
}

/// Simulated experiment over `grid`: counts, estimates and significance per
/// angle, ordered by `φ`.
pub fn run_sweep(grid: &[SettingsTriad], cfg: &ExperimentConfig) -> Result<Vec<SignificanceReport>> {
    simulate_sweep(grid, cfg)?.iter().map(significance).collect()
}
