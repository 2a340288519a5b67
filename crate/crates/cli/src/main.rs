//! `perfrec` command line: experiment runs, graph audits, analytic checks
//! and report merging.
//!
//! Exit status is 0 on success, 1 on runtime failure and 2 on usage or
//! configuration errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use perfrec::config::{ExperimentConfig, NoiseMode, Profile};
use perfrec::graph::{audit_performative_validity, CausalGraph};
use perfrec::perform::{merge_reports, run_experiment, summary_header, ExperimentReport};
use perfrec::recourse::Method;
use perfrec::{analytic, Error};

const OUT_ENV: &str = "PERFREC_OUT";

#[derive(Parser)]
#[command(name = "perfrec", version, about = "Performative effects of algorithmic recourse")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its reports.
    Run(RunArgs),
    /// Check whether a recourse configuration is certifiably valid.
    Audit(AuditArgs),
    /// Evaluate the closed-form oracles.
    VerifyAnalytic,
    /// Merge per-run metric CSVs into one table.
    Report(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config, or a JSON report whose embedded config is re-run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Setting name, used when no config file is given.
    #[arg(long, required_unless_present = "config")]
    setting: Option<String>,
    #[arg(long, required_unless_present = "config")]
    method: Option<Method>,
    #[arg(long)]
    profile: Option<Profile>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Graph file: `target: Y` and one `A -> B` edge per line.
    #[arg(long)]
    graph: PathBuf,
    /// Features the recourse policy reads.
    #[arg(long, value_delimiter = ',')]
    inputs: Vec<String>,
    /// Features the recommendations intervene on.
    #[arg(long, value_delimiter = ',')]
    targets: Vec<String>,
    /// Post-recourse noise of Y and its descendants is drawn afresh.
    #[arg(long)]
    resampled: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// Metric CSVs written by `run`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, env = OUT_ENV)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Audit(a) => audit(a),
        Command::VerifyAnalytic => verify_analytic(),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::UnknownSetting(_) | Error::GraphParse { .. } | Error::UnknownNode(_) => 2,
        _ => 1,
    }
}

fn load_config(path: &Path) -> perfrec::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        let report = ExperimentReport::from_json(&text).map_err(|e| Error::Config(e.to_string()))?;
        return ExperimentConfig::from_toml(&report.config_toml);
    }
    ExperimentConfig::from_toml(&text)
}

fn run(a: RunArgs) -> perfrec::Result<ExitCode> {
    let mut config = match &a.config {
        Some(p) => load_config(p)?,
        None => ExperimentConfig::new(a.setting.as_deref().unwrap_or_default(), a.method.unwrap_or(Method::Ce)),
    };
    if a.config.is_some() {
        if let Some(s) = a.setting {
            config.setting = s;
        }
        if let Some(m) = a.method {
            config.method = m;
        }
    }
    if let Some(p) = a.profile {
        config.profile = p;
    }
    if let Some(s) = a.seeds {
        config.seeds = s;
    }
    match a.noise.as_deref() {
        None => {}
        Some("persistent") => config.noise = NoiseMode::Persistent,
        Some("resampled") => config.noise = NoiseMode::Resampled,
        Some(other) => return Err(Error::Config(format!("noise: unknown mode '{other}' (expected persistent or resampled)"))),
    }
    let out = a.out.or_else(|| config.out_dir.clone()).unwrap_or_else(|| PathBuf::from("reports"));
    config.out_dir = Some(out.clone());
    let config = config.resolve()?;
    let setting = config.build_setting().map_err(|e| match e {
        Error::Io(_) | Error::Csv(_) | Error::MissingColumns(_) | Error::InvalidDataset(_) => Error::Config(format!("gpa_csv: {e}")),
        e => e,
    })?;
    let report = run_experiment(&config, &setting)?;
    for path in report.write(&out)? {
        eprintln!("wrote {}", path.display());
    }
    println!("{}", summary_header());
    println!("{}", report.summary_row());
    Ok(ExitCode::SUCCESS)
}

fn audit(a: AuditArgs) -> perfrec::Result<ExitCode> {
    let text = std::fs::read_to_string(&a.graph).map_err(|e| Error::Config(format!("{}: {e}", a.graph.display())))?;
    let graph = CausalGraph::parse(&text)?;
    let inputs: Vec<&str> = a.inputs.iter().map(String::as_str).collect();
    let targets: Vec<&str> = a.targets.iter().map(String::as_str).collect();
    let report = audit_performative_validity(&graph, &inputs, &targets, a.resampled).map_err(|e| match e {
        Error::TargetIntervention(_) | Error::InvalidParameter(_) => Error::Config(e.to_string()),
        e => e,
    })?;
    print!("{report}");
    Ok(ExitCode::SUCCESS)
}

fn verify_analytic() -> perfrec::Result<ExitCode> {
    let checks = analytic::verify_analytic();
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("{} checks, {failed} failed", checks.len());
    Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn report(a: ReportArgs) -> perfrec::Result<ExitCode> {
    for p in &a.inputs {
        if !p.is_file() {
            return Err(Error::Config(format!("{}: no such report", p.display())));
        }
    }
    let merged = merge_reports(&a.inputs)?;
    match a.out {
        Some(dir) => {
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("table.csv");
            std::fs::write(&path, merged)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{merged}"),
    }
    Ok(ExitCode::SUCCESS)
}
