//! `riskstab`: evaluate mean-risk models, compare measures and run
//! stability experiments from JSON files.
//!
//! Exit codes: 0 success, 2 configuration error, 3 model or numerical
//! error, 4 failed trend gate. Payloads go to stdout, diagnostics to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskstab::meanrisk::{moment_feasibility, Evaluator, DEFAULT_ARGMIN_TOL};
use riskstab::metrics::{bounded_lipschitz, fortet_mourier, psi_metric, wasserstein};
use riskstab::recourse::certify_growth;
use riskstab::stability::{run_experiment_with, trend_check, ExperimentOptions};
use riskstab::{DiscreteMeasureF64, MeanRiskModelF64, PerturbationSchemeF64, SamplerF64};
use serde_json::json;

#[derive(Parser)]
#[command(
    name = "riskstab",
    version,
    about = "Mean-risk two-stage models and their stability under measure perturbation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Q, phi and the argmin set of a model under a measure.
    Eval(EvalArgs),
    /// Distance between two measures.
    Metrics(MetricsArgs),
    /// Run a perturbation experiment and write report.csv, report.json, report.svg.
    Stability(StabilityArgs),
    /// Sample growth ratios |f(x,z)| / (||z||^gamma + 1) at the model's decisions.
    Certify(CertifyArgs),
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    measure: PathBuf,
    /// Index into the decision set.
    #[arg(long, conflicts_with = "all", required_unless_present = "all")]
    x: Option<usize>,
    /// Evaluate every decision and report phi and the argmin set.
    #[arg(long)]
    all: bool,
    /// Argmin tolerance.
    #[arg(long, default_value_t = DEFAULT_ARGMIN_TOL)]
    tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricKind {
    Bl,
    Wasserstein,
    Fm,
    Psi,
}

#[derive(Args)]
struct MetricsArgs {
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    measure2: PathBuf,
    #[arg(long, value_enum)]
    kind: MetricKind,
    /// Order of wasserstein/fm, gauge exponent of psi.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
}

#[derive(Args)]
struct StabilityArgs {
    #[arg(long)]
    model: PathBuf,
    /// Base measure.
    #[arg(long)]
    measure: PathBuf,
    #[arg(long)]
    scheme: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    out: PathBuf,
    /// Replaces the scheme seed (saa and jitter).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_ARGMIN_TOL)]
    tol: f64,
    /// Trend gate `COLUMN:FACTOR` (or `COLUMN factor FACTOR`); repeatable.
    #[arg(long)]
    gate: Vec<String>,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    model: PathBuf,
    /// Sampler JSON, or a measure whose atoms are sampled.
    #[arg(long)]
    measure: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Overrides the model's growth exponent.
    #[arg(long)]
    q: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    /// Directory for the full certificate.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Model(String),
    #[error("{0}")]
    Gate(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(_) => 3,
            CliError::Gate(_) => 4,
        }
    }
}

impl From<riskstab::Error> for CliError {
    fn from(e: riskstab::Error) -> Self {
        use riskstab::Error as E;
        match e {
            E::RecourseInfeasible { .. }
            | E::RecourseUnbounded { .. }
            | E::NumericalFailure(_)
            | E::BoxTooLarge { .. }
            | E::ConstraintLimitExceeded { .. } => CliError::Model(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> CliResult<T> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{what} {}: {e}", path.display())))
}

/// Writes through a temporary file in the same directory, then renames.
fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> CliResult<()> {
    let io =
        |e: std::io::Error| CliError::Config(format!("writing {name} in {}: {e}", dir.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.persist(dir.join(name)).map_err(|e| io(e.error))?;
    Ok(())
}

fn print(value: &serde_json::Value) -> CliResult<()> {
    let s = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    println!("{s}");
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CliResult<()> {
    let model: MeanRiskModelF64 = read_json(&a.model, "model")?;
    let nu: DiscreteMeasureF64 = read_json(&a.measure, "measure")?;
    let ev = Evaluator::new(&model);
    let points = model.decisions.points();
    if let Some(i) = a.x {
        if i >= points.len() {
            return Err(CliError::Config(format!(
                "--x {i} outside the {} decisions",
                points.len()
            )));
        }
        let q = ev.q_value(i, &nu)?;
        return print(&json!({ "index": i, "x": points[i], "q": q }));
    }
    let q = ev.q_all(&nu)?;
    let phi = ev.phi(&nu)?;
    let argmin = ev.argmin_indices(&nu, a.tol)?;
    let per: Vec<_> = q
        .iter()
        .enumerate()
        .map(|(i, v)| json!({ "index": i, "x": points[i], "q": v }))
        .collect();
    print(&json!({
        "phi": phi,
        "q": per,
        "argmin": argmin.iter().map(|&i| json!({ "index": i, "x": points[i] })).collect::<Vec<_>>(),
        "tol": a.tol,
        "moment": moment_feasibility(&model, &nu),
    }))
}

fn cmd_metrics(a: MetricsArgs) -> CliResult<()> {
    let mu: DiscreteMeasureF64 = read_json(&a.measure, "measure")?;
    let nu: DiscreteMeasureF64 = read_json(&a.measure2, "measure")?;
    let d = match a.kind {
        MetricKind::Bl => bounded_lipschitz(&mu, &nu),
        MetricKind::Wasserstein => wasserstein(&mu, &nu, a.q),
        MetricKind::Fm => fortet_mourier(&mu, &nu, a.q),
        MetricKind::Psi => psi_metric(&mu, &nu, a.q),
    }
    .map_err(|e| CliError::Config(e.to_string()))?;
    println!("{d}");
    Ok(())
}

fn parse_gate(g: &str) -> CliResult<(String, f64)> {
    let bad = || CliError::Config(format!("gate `{g}`: expected COLUMN:FACTOR"));
    let parts: Vec<&str> = if g.contains(':') {
        g.split(':').map(str::trim).collect()
    } else {
        g.split_whitespace().filter(|t| *t != "factor").collect()
    };
    match parts.as_slice() {
        [col, f] => Ok((col.to_string(), f.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn cmd_stability(a: StabilityArgs) -> CliResult<()> {
    let model: MeanRiskModelF64 = read_json(&a.model, "model")?;
    let base: DiscreteMeasureF64 = read_json(&a.measure, "measure")?;
    let mut scheme: PerturbationSchemeF64 = read_json(&a.scheme, "scheme")?;
    if let Some(s) = a.seed {
        match &mut scheme {
            PerturbationSchemeF64::Saa { seed, .. }
            | PerturbationSchemeF64::Jitter { seed, .. } => *seed = s,
            _ => eprintln!("note: --seed ignored for a {} scheme", scheme.kind()),
        }
    }
    let gates = a
        .gate
        .iter()
        .map(|g| parse_gate(g))
        .collect::<CliResult<Vec<_>>>()?;
    fs::create_dir_all(&a.out)
        .map_err(|e| CliError::Config(format!("{}: {e}", a.out.display())))?;
    let options = ExperimentOptions {
        argmin_tol: a.tol,
        ..ExperimentOptions::default()
    };
    let report = run_experiment_with(&model, &base, &scheme, options)?;
    write_atomic(&a.out, "report.csv", report.to_csv()?.as_bytes())?;
    write_atomic(&a.out, "report.json", report.to_json()?.as_bytes())?;
    write_atomic(&a.out, "report.svg", report.to_svg().as_bytes())?;
    for row in report.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!(
            "step {}: {}",
            row.step,
            row.error.as_deref().unwrap_or_default()
        );
    }

    let mut verdicts = Vec::new();
    let mut failed = Vec::new();
    for (col, factor) in &gates {
        let v = trend_check(&report, col, *factor)?;
        if !v.pass {
            failed.push(format!(
                "{col} (first {}, last {}, factor {factor})",
                v.first, v.last
            ));
        }
        verdicts.push(json!({ "column": col, "factor": factor, "verdict": v }));
    }
    print(&json!({
        "out": a.out.display().to_string(),
        "rows": report.rows.len(),
        "integrability_verdict": report.integrability.verdict,
        "gates": verdicts,
    }))?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Gate(format!(
            "trend gate failed: {}",
            failed.join(", ")
        )))
    }
}

fn cmd_certify(a: CertifyArgs) -> CliResult<()> {
    let model: MeanRiskModelF64 = read_json(&a.model, "model")?;
    let text = fs::read_to_string(&a.measure)
        .map_err(|e| CliError::Config(format!("sampler {}: {e}", a.measure.display())))?;
    let sampler: SamplerF64 = match serde_json::from_str(&text) {
        Ok(s) => s,
        Err(_) => SamplerF64::Atoms {
            measure: serde_json::from_str(&text).map_err(|e| {
                CliError::Config(format!(
                    "{}: neither a sampler nor a measure: {e}",
                    a.measure.display()
                ))
            })?,
        },
    };
    let gamma = a.q.unwrap_or(model.gamma);
    let cert = certify_growth(
        &model.recourse,
        model.decisions.points(),
        &sampler,
        gamma,
        a.samples,
        a.seed,
    )?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
        let full =
            serde_json::to_string_pretty(&cert).map_err(|e| CliError::Config(e.to_string()))?;
        write_atomic(dir, "certificate.json", full.as_bytes())?;
    }
    print(&json!({
        "gamma": cert.gamma,
        "samples": cert.samples,
        "decisions": cert.decisions,
        "eta_hat": cert.eta_hat,
        "max_residual_margin": cert.max_residual_margin,
    }))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Eval(a) => cmd_eval(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Stability(a) => cmd_stability(a),
        Command::Certify(a) => cmd_certify(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
