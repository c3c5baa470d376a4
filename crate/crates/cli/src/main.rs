//! `lagrangian-engine`: run a classification and its numeric suite, emit a report.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use lagrangian_core::classifier::{
    classify_einstein_tensor, classify_matter_with, classify_scalar_with, numeric_invariance_suite, requires_heavy,
    verify_bray_corollary_with, ClassificationReport, ClassifyError, ClassifyOptions, SlotStatus, Theorem,
};
use serde::Serialize;
use thiserror::Error;

const THREADS_ENV: &str = "LAGRANGIAN_ENGINE_THREADS";
const BRAY_MATTER_RANK: usize = 3;

#[derive(Parser, Debug)]
#[command(name = "lagrangian-engine", version, about = "Exact classification of invariant Lagrangians")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve every slot for a theorem and check invariance numerically.
    Classify(ClassifyArgs),
}

#[derive(clap::Args, Debug)]
struct ClassifyArgs {
    #[arg(long, value_enum)]
    theorem: TheoremArg,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    matter_rank: Option<usize>,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Allow systems wider than 4^8 columns.
    #[arg(long)]
    allow_heavy: bool,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
enum TheoremArg {
    Scalar,
    EinsteinTensor,
    Matter,
    BrayCorollary,
}

impl From<TheoremArg> for Theorem {
    fn from(t: TheoremArg) -> Self {
        match t {
            TheoremArg::Scalar => Theorem::Scalar,
            TheoremArg::EinsteinTensor => Theorem::EinsteinTensor,
            TheoremArg::Matter => Theorem::Matter,
            TheoremArg::BrayCorollary => Theorem::BrayCorollary,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Json,
    Text,
}

#[derive(Debug, Clone, Serialize)]
struct RunConfig {
    theorem: Theorem,
    dim: usize,
    matter_rank: Option<usize>,
    trials: usize,
    seed: u64,
    tol: f64,
    format: Format,
    allow_heavy: bool,
}

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialising report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Classify(ClassifyError::UnsupportedDimension { .. })
            | CliError::Classify(ClassifyError::UnsupportedMatterRank { .. }) => 2,
            _ => 1,
        }
    }
}

fn validate(args: &ClassifyArgs) -> Result<RunConfig, CliError> {
    let theorem = Theorem::from(args.theorem);
    let n = args.dim;
    let (lo, hi) = match theorem {
        Theorem::Scalar => (2, 5),
        Theorem::EinsteinTensor | Theorem::Matter => (2, 4),
        Theorem::BrayCorollary => (3, 4),
    };
    if !(lo..=hi).contains(&n) {
        return Err(CliError::Config(format!("--dim {n} outside {lo}..={hi} for {theorem}")));
    }
    let matter_rank = match (theorem, args.matter_rank) {
        (Theorem::Scalar | Theorem::EinsteinTensor, Some(_)) => {
            return Err(CliError::Config(format!("--matter-rank does not apply to {theorem}")));
        }
        (Theorem::Scalar | Theorem::EinsteinTensor, None) => None,
        (Theorem::Matter, None) => return Err(CliError::Config("--matter-rank is required for matter".into())),
        (Theorem::Matter, Some(m)) if m < 1 || m > n => {
            return Err(CliError::Config(format!("--matter-rank {m} outside 1..={n}")));
        }
        (Theorem::BrayCorollary, Some(m)) if m != BRAY_MATTER_RANK => {
            return Err(CliError::Config(format!("bray-corollary fixes --matter-rank {BRAY_MATTER_RANK}, got {m}")));
        }
        (Theorem::BrayCorollary, _) => Some(BRAY_MATTER_RANK),
        (Theorem::Matter, m) => m,
    };
    if !(args.tol.is_finite() && args.tol >= 0.0) {
        return Err(CliError::Config(format!("--tol must be a non-negative number, got {}", args.tol)));
    }
    if requires_heavy(theorem, n, matter_rank) && !args.allow_heavy {
        return Err(CliError::Config(format!("{theorem} at this size needs --allow-heavy")));
    }
    Ok(RunConfig {
        theorem,
        dim: n,
        matter_rank,
        trials: args.trials,
        seed: args.seed,
        tol: args.tol,
        format: args.format,
        allow_heavy: args.allow_heavy,
    })
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|t| *t > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn classify(cfg: &RunConfig) -> Result<ClassificationReport, CliError> {
    let opts = ClassifyOptions { allow_heavy: cfg.allow_heavy };
    let report = match cfg.theorem {
        Theorem::Scalar => classify_scalar_with(cfg.dim, &opts)?,
        Theorem::EinsteinTensor => classify_einstein_tensor(cfg.dim)?,
        Theorem::Matter => classify_matter_with(cfg.dim, cfg.matter_rank.unwrap_or(1), &opts)?,
        Theorem::BrayCorollary => verify_bray_corollary_with(cfg.dim, &opts)?,
    };
    Ok(numeric_invariance_suite(report, cfg.trials, cfg.seed, cfg.tol))
}

#[derive(Serialize)]
struct JsonReport<'a> {
    config: &'a RunConfig,
    pass: bool,
    slots: &'a [lagrangian_core::classifier::SlotReport],
    numeric: &'a Option<lagrangian_core::classifier::NumericSummary>,
    provenance: &'a [String],
}

fn render_json(cfg: &RunConfig, report: &ClassificationReport) -> Result<String, CliError> {
    let doc = JsonReport {
        config: cfg,
        pass: report.passed(),
        slots: &report.slots,
        numeric: &report.numeric,
        provenance: &report.provenance,
    };
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

fn render_text(cfg: &RunConfig, report: &ClassificationReport) -> String {
    let mut s = String::new();
    let m = cfg.matter_rank.map(|m| format!(" m={m}")).unwrap_or_default();
    let _ = writeln!(s, "{} n={}{m}: {}", cfg.theorem, cfg.dim, if report.passed() { "PASS" } else { "FAIL" });
    for slot in &report.slots {
        let dim = slot.dimension.map(|d| d.to_string()).unwrap_or_else(|| "-".into());
        let span = match slot.span_match {
            Some(true) => "span match",
            Some(false) => "span MISMATCH",
            None => "not solved",
        };
        let status = match slot.status {
            SlotStatus::Pass => "pass",
            SlotStatus::Fail => "FAIL",
            SlotStatus::Flagged => "flagged",
            SlotStatus::Skipped => "skipped",
        };
        let _ = writeln!(
            s,
            "  {:<24} rank {:>2}  dim {:>2} (expected {:>2})  {span}  [{status}]",
            slot.name, slot.rank, dim, slot.expected_dimension
        );
    }
    if let Some(num) = &report.numeric {
        let _ = writeln!(
            s,
            "  numeric: {} trials, max residual {:.3e} (tol {:e}) {}",
            num.trials,
            num.max_residual,
            num.tol,
            if num.pass { "pass" } else { "FAIL" }
        );
    }
    let _ = writeln!(s, "  constraint families: {}", report.provenance.join(", "));
    s
}

fn run(args: ClassifyArgs) -> Result<bool, CliError> {
    let cfg = validate(&args)?;
    configure_threads()?;
    let report = classify(&cfg)?;
    let body = match cfg.format {
        Format::Json => render_json(&cfg, &report)?,
        Format::Text => render_text(&cfg, &report),
    };
    match &args.out {
        Some(path) => std::fs::write(path, body)?,
        None => print!("{body}"),
    }
    Ok(report.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Classify(args) = cli.command;
    match run(args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("lagrangian-engine: assertion failure, see report");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("lagrangian-engine: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
