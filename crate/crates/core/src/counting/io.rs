//! Count CSV, report CSV and run metadata.
//!
//! Count files hold one coincidence count per row:
//!
//! ```text
//! phi_deg,pair_index,combo,count
//! 28,1,pp,295
//! ```
//!
//! with `pair_index ∈ {1,1p,2,2p,3,3p}` and `combo ∈ {pp,mm,pm,mp}`.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Combo, CountTable, PairLabel, PhiCounts, SignificanceReport};
use crate::error::{Error, Result};
use crate::format;

pub const COUNT_CSV_HEADER: [&str; 4] = ["phi_deg", "pair_index", "combo", "count"];
pub const REPORT_CSV_HEADER: [&str; 5] = ["phi_deg", "e3_est", "sigma_e3", "l3", "n_sigma"];

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

fn schema(line: u64, message: impl Into<String>) -> Error {
    Error::Schema { line, message: message.into() }
}

fn csv_to_schema(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::Io(_) => Error::Csv(e),
        _ => schema(line, e.to_string()),
    }
}

fn check_header(found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    if found.iter().ne(expected.iter().copied()) {
        return Err(schema(
            1,
            format!("expected header {:?}, found {:?}", expected.join(","), found.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    Ok(())
}

/// A count table tagged with its angle and pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledTable {
    pub phi_deg: f64,
    pub pair: PairLabel,
    pub table: CountTable,
}

/// A pair that appears in the file with fewer than four combos.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompletePair {
    pub phi_deg: f64,
    pub pair: PairLabel,
    pub missing: Vec<Combo>,
}

/// Parsed count file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountDocument {
    /// Pairs with all four combos, sorted by `(φ, pair)`.
    pub tables: Vec<LabeledTable>,
    pub incomplete_pairs: Vec<IncompletePair>,
}

/// Sort key for angles. Bit order matches numeric order for non-negative
/// finite floats.
fn phi_key(phi: f64) -> u64 {
    phi.to_bits()
}

/// Parses a count CSV. Malformed rows, negative counts and repeated
/// `(φ, pair, combo)` keys are rejected with their line number.
pub fn ingest_counts<R: Read>(input: R) -> Result<CountDocument> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(reader.headers().map_err(csv_to_schema)?, &COUNT_CSV_HEADER)?;

    let mut cells: BTreeMap<(u64, PairLabel), (f64, BTreeMap<Combo, u64>)> = BTreeMap::new();
    for record in reader.records() {
        let record = record.map_err(csv_to_schema)?;
        let line = record.position().map_or(0, |p| p.line());
        let phi: f64 =
            record[0].parse().map_err(|_| schema(line, format!("phi_deg {:?} is not a number", &record[0])))?;
        if !(0.0..=180.0).contains(&phi) {
            return Err(schema(line, format!("phi_deg {phi} outside [0, 180]")));
        }
        let pair: PairLabel = record[1].parse().map_err(|e: String| schema(line, e))?;
        let combo: Combo = record[2].parse().map_err(|e: String| schema(line, e))?;
        let count: i128 =
            record[3].parse().map_err(|_| schema(line, format!("count {:?} is not an integer", &record[3])))?;
        if count < 0 {
            return Err(schema(line, format!("negative count {count}")));
        }
        let count = u64::try_from(count).map_err(|_| schema(line, format!("count {count} too large")))?;
        // -0.0 and 0.0 name the same angle
        let phi = if phi == 0.0 { 0.0 } else { phi };
        let entry = cells.entry((phi_key(phi), pair)).or_insert_with(|| (phi, BTreeMap::new()));
        if entry.1.insert(combo, count).is_some() {
            return Err(schema(line, format!("duplicate entry for phi {phi}, pair {pair}, combo {}", combo.as_str())));
        }
    }

    let mut doc = CountDocument::default();
    for ((_, pair), (phi_deg, combos)) in cells {
        if combos.len() == 4 {
            let mut table = CountTable::default();
            for (combo, n) in combos {
                table.set(combo, n);
            }
            doc.tables.push(LabeledTable { phi_deg, pair, table });
        } else {
            let missing = Combo::ALL.into_iter().filter(|c| !combos.contains_key(c)).collect();
            doc.incomplete_pairs.push(IncompletePair { phi_deg, pair, missing });
        }
    }
    Ok(doc)
}

/// An angle lacking one or more complete pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct IncompletePhi {
    pub phi_deg: f64,
    pub missing: Vec<PairLabel>,
}

/// Assembles complete angles (all six pairs present) and lists the rest.
/// Both outputs are sorted by `φ`.
pub fn group_by_phi(doc: &CountDocument) -> (Vec<PhiCounts>, Vec<IncompletePhi>) {
    let mut by_phi: BTreeMap<u64, (f64, [Option<CountTable>; 6])> = BTreeMap::new();
    for t in &doc.tables {
        by_phi.entry(phi_key(t.phi_deg)).or_insert((t.phi_deg, [None; 6])).1[t.pair.index()] = Some(t.table);
    }
    for p in &doc.incomplete_pairs {
        by_phi.entry(phi_key(p.phi_deg)).or_insert((p.phi_deg, [None; 6]));
    }
    let mut complete = Vec::new();
    let mut incomplete = Vec::new();
    for (_, (phi_deg, slots)) in by_phi {
        if slots.iter().all(Option::is_some) {
            complete.push(PhiCounts { phi_deg, tables: slots.map(Option::unwrap) });
        } else {
            let missing = PairLabel::ALL.into_iter().filter(|p| slots[p.index()].is_none()).collect();
            incomplete.push(IncompletePhi { phi_deg, missing });
        }
    }
    (complete, incomplete)
}

pub fn write_counts_csv<W: Write>(out: W, counts: &[PhiCounts]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(COUNT_CSV_HEADER)?;
    for c in counts {
        let phi = format::angle(c.phi_deg);
        for pair in PairLabel::ALL {
            let table = &c.tables[pair.index()];
            for combo in Combo::ALL {
                w.write_record([phi.as_str(), pair.as_str(), combo.as_str(), &table.get(combo).to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One line of a report: either a full estimate or an angle that could not
/// be analyzed.
#[derive(Debug, Clone, PartialEq)]
pub enum ReportRow {
    Complete(SignificanceReport),
    Incomplete(IncompletePhi),
}

impl ReportRow {
    pub fn phi_deg(&self) -> f64 {
        match self {
            Self::Complete(r) => r.phi_deg,
            Self::Incomplete(i) => i.phi_deg,
        }
    }
}

/// Writes `phi_deg,e3_est,sigma_e3,l3,n_sigma`. Incomplete angles carry `NaN`
/// in the estimate columns and the bound in `l3`.
pub fn write_report_csv<W: Write>(out: W, rows: &[ReportRow]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(REPORT_CSV_HEADER)?;
    for row in rows {
        let record = match row {
            ReportRow::Complete(r) => [
                format::angle(r.phi_deg),
                format::sig(r.e3_est),
                format::sig(r.sigma_e3),
                format::sig(r.l3),
                format::sig(r.n_sigma),
            ],
            ReportRow::Incomplete(i) => {
                let l3 = crate::correlations::leggett_bound(i.phi_deg).unwrap_or(f64::NAN);
                let nan = format::sig(f64::NAN);
                [format::angle(i.phi_deg), nan.clone(), nan.clone(), format::sig(l3), nan]
            }
        };
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a report written by [`write_report_csv`]. Rows with a `NaN` estimate
/// come back as [`ReportRow::Incomplete`] with an empty `missing` list; flag
/// fields are not stored in the CSV and read back as `false`.
pub fn read_report_csv<R: Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    check_header(reader.headers().map_err(csv_to_schema)?, &REPORT_CSV_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_to_schema)?;
        let line = record.position().map_or(0, |p| p.line());
        let mut v = [0.0f64; 5];
        for (k, slot) in v.iter_mut().enumerate() {
            *slot = record[k]
                .parse()
                .map_err(|_| schema(line, format!("{} {:?} is not a number", REPORT_CSV_HEADER[k], &record[k])))?;
        }
        rows.push(if v[1].is_nan() {
            ReportRow::Incomplete(IncompletePhi { phi_deg: v[0], missing: Vec::new() })
        } else {
            ReportRow::Complete(SignificanceReport {
                phi_deg: v[0],
                e3_est: v[1],
                sigma_e3: v[2],
                l3: v[3],
                n_sigma: v[4],
                sigma_floored: false,
                near_zero_sum: false,
            })
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

/// JSON sidecar written next to a simulated report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub seed: u64,
    pub generator_name: String,
    pub mean_counts_per_setting: f64,
    pub visibility: f64,
    pub grid: GridSpec,
}
