//! `leggett`: theory curves, simulated sweeps, count-file analysis and
//! hidden-variable optimization from the command line.
//!
//! Exit status: 0 on success, 2 on usage errors, 3 on data or schema errors.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use leggett_core::correlations::{ideal_max_gap, ideal_violation_window, theory_curve, write_e3_csv};
use leggett_core::counting::{
    group_by_phi, ingest_counts, significance, simulate_sweep, write_counts_csv, write_report_csv, GridSpec,
    IncompletePhi, ReportRow, SweepMetadata, DEFAULT_MEAN_COUNTS, DEFAULT_SEED, DEFAULT_VISIBILITY, GENERATOR_NAME,
};
use leggett_core::format::Sig;
use leggett_core::hvmodel::{maximize_e3, SearchConfig, DEFAULT_BUDGET, MIN_BUDGET};
use leggett_core::settings::{build_triad, grid_angles, sweep_grid};
use leggett_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "leggett", version, about = "Spin-orbit Leggett-inequality simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact quantum E3 and the bound L3 over a grid, with the ideal violation window.
    Curves {
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Simulate coincidence counts over a grid and report the violation significance.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = DEFAULT_MEAN_COUNTS)]
        mean_counts: f64,
        #[arg(long, default_value_t = DEFAULT_VISIBILITY)]
        visibility: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Also write the simulated counts in the count CSV schema.
        #[arg(long)]
        counts: Option<PathBuf>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Significance report for a coincidence-count CSV.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Maximize E3 over crypto-contextual hidden-variable models at one angle.
    Hvmax {
        #[arg(long)]
        phi: f64,
        #[arg(long, default_value_t = DEFAULT_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[command(flatten)]
        out: OutputArgs,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 0.0)]
    phi_start: f64,
    #[arg(long, default_value_t = 180.0)]
    phi_stop: f64,
    #[arg(long, default_value_t = 4.0)]
    phi_step: f64,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        GridSpec { start_deg: self.phi_start, stop_deg: self.phi_stop, step_deg: self.phi_step }
    }
}

#[derive(Args)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::UnsupportedCharge(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display())))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

#[derive(Serialize)]
struct WindowFooter {
    violation_window_deg: [Sig; 2],
    max_gap: Sig,
    max_gap_phi_deg: Sig,
}

#[derive(Serialize)]
struct CurveRow {
    phi_deg: Sig,
    e3_quantum: Sig,
    l3: Sig,
}

#[derive(Serialize)]
struct CurvesJson {
    rows: Vec<CurveRow>,
    #[serde(flatten)]
    window: WindowFooter,
}

fn curves(grid: &GridArgs, out: &OutputArgs) -> Outcome {
    let angles = grid_angles(grid.phi_start, grid.phi_stop, grid.phi_step)?;
    let points = theory_curve(&angles)?;
    let (lo, hi) = ideal_violation_window();
    let (at, gap) = ideal_max_gap();
    let window = WindowFooter { violation_window_deg: [Sig(lo), Sig(hi)], max_gap: Sig(gap), max_gap_phi_deg: Sig(at) };
    let mut w = open_output(out.output.as_deref())?;
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            write_e3_csv(&mut w, &points)?;
            writeln!(w, "# {}", serde_json::to_string(&window)?)?;
        }
        Format::Json => {
            let rows = points
                .iter()
                .map(|p| CurveRow { phi_deg: Sig(p.phi_deg), e3_quantum: Sig(p.e3), l3: Sig(p.l3) })
                .collect();
            serde_json::to_writer_pretty(&mut w, &CurvesJson { rows, window })?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ReportJson {
    phi_deg: Sig,
    complete: bool,
    e3_est: Sig,
    sigma_e3: Sig,
    l3: Sig,
    n_sigma: Sig,
    sigma_floored: bool,
    near_zero_sum: bool,
    missing_pairs: Vec<&'static str>,
}

fn report_json(row: &ReportRow) -> ReportJson {
    match row {
        ReportRow::Complete(r) => ReportJson {
            phi_deg: Sig(r.phi_deg),
            complete: true,
            e3_est: Sig(r.e3_est),
            sigma_e3: Sig(r.sigma_e3),
            l3: Sig(r.l3),
            n_sigma: Sig(r.n_sigma),
            sigma_floored: r.sigma_floored,
            near_zero_sum: r.near_zero_sum,
            missing_pairs: Vec::new(),
        },
        ReportRow::Incomplete(i) => ReportJson {
            phi_deg: Sig(i.phi_deg),
            complete: false,
            e3_est: Sig(f64::NAN),
            sigma_e3: Sig(f64::NAN),
            l3: Sig(leggett_core::correlations::leggett_bound(i.phi_deg).unwrap_or(f64::NAN)),
            n_sigma: Sig(f64::NAN),
            sigma_floored: false,
            near_zero_sum: false,
            missing_pairs: i.missing.iter().map(|p| p.as_str()).collect(),
        },
    }
}

fn write_report(rows: &[ReportRow], out: &OutputArgs) -> Outcome {
    let mut w = open_output(out.output.as_deref())?;
    match out.format.unwrap_or(Format::Csv) {
        Format::Csv => write_report_csv(&mut w, rows)?,
        Format::Json => {
            let json: Vec<ReportJson> = rows.iter().map(report_json).collect();
            serde_json::to_writer_pretty(&mut w, &json)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".meta.json");
    PathBuf::from(name)
}

fn sweep(grid: &GridArgs, cfg: ExperimentConfig, counts_path: Option<&Path>, out: &OutputArgs) -> Outcome {
    let triads = sweep_grid(grid.phi_start, grid.phi_stop, grid.phi_step)?;
    let counts = simulate_sweep(&triads, &cfg)?;
    let rows = counts.iter().map(|c| significance(c).map(ReportRow::Complete)).collect::<Result<Vec<_>, _>>()?;
    if let Some(path) = counts_path {
        let mut w = open_output(Some(path))?;
        write_counts_csv(&mut w, &counts)?;
        w.flush()?;
    }
    write_report(&rows, out)?;

    let meta = SweepMetadata {
        seed: cfg.rng_seed,
        generator_name: GENERATOR_NAME.to_string(),
        mean_counts_per_setting: cfg.mean_counts_per_setting,
        visibility: cfg.visibility,
        grid: grid.spec(),
    };
    let text = serde_json::to_string_pretty(&meta)?;
    match &out.output {
        Some(p) => std::fs::write(sidecar_path(p), text + "\n")?,
        None => eprintln!("{text}"),
    }
    Ok(())
}

fn analyze(input: &Path, out: &OutputArgs) -> Outcome {
    let file = File::open(input).map_err(|e| Failure::Data(format!("cannot read {}: {e}", input.display())))?;
    let doc = ingest_counts(io::BufReader::new(file))?;
    let (complete, incomplete) = group_by_phi(&doc);
    if complete.is_empty() {
        return Err(Failure::Data(format!("no angle in {} has all six setting pairs", input.display())));
    }
    let mut rows = Vec::with_capacity(complete.len() + incomplete.len());
    let mut analyzed = 0;
    for c in &complete {
        match significance(c) {
            Ok(r) => {
                analyzed += 1;
                rows.push(ReportRow::Complete(r));
            }
            Err(e) => {
                eprintln!("warning: phi {}: {e}", c.phi_deg);
                rows.push(ReportRow::Incomplete(IncompletePhi { phi_deg: c.phi_deg, missing: Vec::new() }));
            }
        }
    }
    if analyzed == 0 {
        return Err(Failure::Data(format!("no angle in {} could be analyzed", input.display())));
    }
    for i in incomplete {
        let missing: Vec<&str> = i.missing.iter().map(|p| p.as_str()).collect();
        eprintln!("warning: phi {} incomplete, missing pairs {}", i.phi_deg, missing.join(","));
        rows.push(ReportRow::Incomplete(i));
    }
    rows.sort_by(|a, b| a.phi_deg().total_cmp(&b.phi_deg()));
    write_report(&rows, out)
}

fn hvmax(phi: f64, budget: u64, seed: u64, out: &OutputArgs) -> Outcome {
    if out.format == Some(Format::Csv) {
        return Err(Failure::Usage("hvmax writes JSON only".into()));
    }
    if budget < MIN_BUDGET {
        return Err(Failure::Usage(format!("--budget must be at least {MIN_BUDGET}, got {budget}")));
    }
    let triad = build_triad(phi)?;
    let result = maximize_e3(&triad, &SearchConfig::new(budget, seed)?)?;
    let mut w = open_output(out.output.as_deref())?;
    writeln!(w, "{}", result.to_json()?)?;
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Outcome {
    match &cli.command {
        Command::Curves { grid, out } => curves(grid, out),
        Command::Sweep { grid, mean_counts, visibility, seed, counts, out } => {
            let cfg = ExperimentConfig::new(*mean_counts, *visibility, *seed)?;
            sweep(grid, cfg, counts.as_deref(), out)
        }
        Command::Analyze { input, out } => analyze(input, out),
        Command::Hvmax { phi, budget, seed, out } => hvmax(*phi, *budget, *seed, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}
