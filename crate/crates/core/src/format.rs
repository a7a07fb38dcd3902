//! Text formatting shared by the CSV and JSON writers.

use serde::{Serialize, Serializer};
use serde_json::value::RawValue;

/// Significant digits used for every real written to disk.
pub const SIGNIFICANT_DIGITS: usize = 15;

/// Formats `x` as a plain decimal with [`SIGNIFICANT_DIGITS`] significant
/// digits. Non-finite values use Rust's `NaN` / `inf` spelling, which
/// `str::parse::<f64>` accepts.
pub fn sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exponent = x.abs().log10().floor() as i32;
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Formats an angle in degrees with the shortest round-trip representation,
/// so grid values such as `28` stay readable and parse back exactly.
pub fn angle(x: f64) -> String {
    format!("{x}")
}

/// A real that serializes to JSON through [`sig`]. Non-finite values become
/// `null`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sig(pub f64);

impl Serialize for Sig {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return s.serialize_none();
        }
        let raw = RawValue::from_string(sig(self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

pub(crate) fn sig3(v: [f64; 3]) -> [Sig; 3] {
    v.map(Sig)
}
