//! Desk-scale simulator for Leggett-type inequality tests on a single photon
//! entangled in its spin (SAM) and orbital (OAM, `m = ±1`) angular momentum.
//!
//! The crate is organized bottom-up:
//!
//! * [`statespace`]: Poincaré-sphere vectors, qubit and spin-orbit states,
//!   the q-plate preparation and the wave-plate projection optics.
//! * [`settings`]: the measurement-setting triads `{aᵢ, bᵢ, b′ᵢ}` and their
//!   constraint validator.
//! * [`correlations`]: exact quantum correlations, the statistic `E₃(φ)` and
//!   the hidden-variable bound `L₃(φ)`.
//! * [`counting`]: Poissonian coincidence-count simulation, the count-based
//!   correlation estimator and violation significance.
//! * [`hvmodel`]: the crypto-contextual hidden-variable model and a numerical
//!   maximizer of `E₃` over admissible models.

// `!(x >= lo)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod correlations;
pub mod counting;
mod error;
pub mod format;
pub mod hvmodel;
pub mod settings;
pub mod statespace;

pub use correlations::{CorrelationValue, E3Point, E3Statistic};
pub use counting::{CountTable, ExperimentConfig, PairLabel, SignificanceReport};
pub use error::{Error, Result};
pub use hvmodel::{HiddenModel, HiddenState, JointOutcomeDistribution};
pub use settings::SettingsTriad;
pub use statespace::{PoincareVector, QPlate, QubitState, Sphere, SpinOrbitState};
