use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use adsgd_core::audit::{audit_trace, evaluate_bounds, BoundParams};
use adsgd_core::config::{load_config, ExperimentConfig};
use adsgd_core::metrics::{self, parse_metrics_csv};
use adsgd_core::runner::{collect_hashes, output_root, run_suite, write_run_dir, Summary};
use adsgd_core::sim::{DelayCase, EventTrace};
use adsgd_core::LabError;
use clap::{Parser, Subcommand};

/// Discrete-event lab for asynchronous decentralized SGD.
///
/// Output goes under $ADSGD_LAB_OUT (default ./runs). Exit status is 0 on
/// success, 2 when any run diverged, 1 on configuration or input errors.
#[derive(Parser)]
#[command(name = "adsgd-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config under its delay case.
    Run {
        config: PathBuf,
        /// Override the config's delay case.
        #[arg(long)]
        case: Option<String>,
    },
    /// Run a config over several delay cases, and optionally agent counts.
    Suite {
        config: PathBuf,
        /// Comma-separated delay cases; defaults to the five presets.
        #[arg(long, value_delimiter = ',')]
        cases: Vec<String>,
        /// Comma-separated agent counts for a scaling study. The target loss
        /// is rescaled by `n / n_agents`, since the objective sums over agents.
        #[arg(long, value_delimiter = ',')]
        agents: Vec<usize>,
    },
    /// Audit a trace CSV: virtual index, staleness, B and D.
    Audit {
        trace: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate the rate bounds for a parameter file (TOML or JSON).
    Bounds { params: PathBuf },
    /// Summarize a run directory and check its config hashes agree.
    Report { run_dir: PathBuf },
}

enum Failure {
    Config(String),
    Diverged,
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        Failure::Config(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn parse_cases(names: &[String]) -> Result<Vec<DelayCase>, Failure> {
    if names.is_empty() {
        return Ok(DelayCase::TABLE.to_vec());
    }
    Ok(names.iter().map(|n| DelayCase::parse(n.trim())).collect::<Result<_, _>>()?)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

fn execute(cfg: &ExperimentConfig, cases: &[DelayCase], root: &Path) -> Result<Summary, Failure> {
    let results = run_suite(cfg, cases)?;
    let (dir, summary) = write_run_dir(root, cfg, &results)?;
    for r in &summary.runs {
        let ttt = r.time_to_target.map_or("-".to_string(), |t| format!("{t:.3}"));
        let loss = r.final_loss.map_or("-".to_string(), |l| format!("{l:.6e}"));
        let flag = if r.diverged { "  DIVERGED" } else { "" };
        println!(
            "{:<20} seed {:<4} updates {:<9} end {:<12.3} loss {:<14} target {}{}",
            r.case.name(),
            r.seed,
            r.updates,
            r.end_time,
            loss,
            ttt,
            flag
        );
    }
    println!("wrote {}", dir.display());
    Ok(summary)
}

fn run(config: &Path, case: Option<String>) -> Outcome {
    let mut cfg = load_config(config)?;
    if let Some(c) = case {
        cfg.delay_case = DelayCase::parse(&c)?;
        cfg.validate()?;
    }
    let summary = execute(&cfg, &[cfg.delay_case], &output_root())?;
    if summary.any_divergence {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn suite(config: &Path, cases: &[String], agents: &[usize]) -> Outcome {
    let base = load_config(config)?;
    let cases = parse_cases(cases)?;
    let root = output_root();
    let mut diverged = false;
    if agents.is_empty() {
        diverged = execute(&base, &cases, &root)?.any_divergence;
    } else {
        let mut times = BTreeMap::new();
        for &n in agents {
            let mut cfg = base.clone();
            cfg.n_agents = n;
            cfg.name = format!("{}-n{n}", base.name);
            cfg.target_loss = base.target_loss.map(|t| t * n as f64 / base.n_agents as f64);
            cfg.validate()?;
            let s = execute(&cfg, &cases, &root)?;
            diverged |= s.any_divergence;
            let mean = s.time_to_target.values().find_map(|t| t.mean);
            times.insert(n, mean);
        }
        let speedup = metrics::speedup(&times)?;
        let table = serde_json::json!({
            "config_hash": base.hash(),
            "time_to_target": times,
            "speedup": speedup,
        });
        let path = root.join(format!("{}-scaling.json", base.name));
        std::fs::write(&path, to_json(&table) + "\n").map_err(LabError::from)?;
        for (n, s) in &speedup {
            println!("n={n:<4} speedup {}", s.map_or("-".into(), |v| format!("{v:.3}")));
        }
        println!("wrote {}", path.display());
    }
    if diverged {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn audit(trace: &Path, out: Option<PathBuf>) -> Outcome {
    let t = EventTrace::read_csv(trace)?;
    let report = audit_trace(&t)?;
    let text = to_json(&report);
    println!("{text}");
    if let Some(p) = out {
        std::fs::write(p, text + "\n").map_err(LabError::from)?;
    }
    Ok(())
}

fn bounds(params: &Path) -> Outcome {
    let text = std::fs::read_to_string(params).map_err(LabError::from)?;
    let p: BoundParams = if text.trim_start().starts_with('{') {
        serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?
    };
    println!("{}", to_json(&evaluate_bounds(&p)?));
    Ok(())
}

fn report(dir: &Path) -> Outcome {
    let text = std::fs::read_to_string(dir.join("summary.json")).map_err(LabError::from)?;
    let summary: Summary = serde_json::from_str(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let hashes = collect_hashes(dir)?;
    let mismatched: Vec<&String> = hashes
        .iter()
        .filter(|(_, h)| h.as_deref() != Some(summary.config_hash.as_str()))
        .map(|(p, _)| p)
        .collect();
    if !mismatched.is_empty() {
        return Err(Failure::Config(format!("config hash mismatch in {mismatched:?}")));
    }
    let metrics_text = std::fs::read_to_string(dir.join("metrics.csv")).map_err(LabError::from)?;
    let (_, rows) = parse_metrics_csv(&metrics_text)?;
    println!("{} ({}) n={} hash {}", summary.name, summary.algorithm, summary.n_agents, summary.config_hash);
    println!("{} metric rows, {} artifacts with matching hashes", rows.len(), hashes.len());
    for r in &summary.runs {
        let b = r
            .bounds
            .map_or("-".to_string(), |b| format!("B={} D_asbcd={} D_adsgd={}", b.b_measured, b.d_asbcd, b.d_adsgd));
        println!(
            "{:<20} seed {:<4} {:<9} loss {:<14} {} lemma2 {}",
            r.case.name(),
            r.seed,
            if r.diverged { "DIVERGED" } else { "ok" },
            r.final_loss.map_or("-".into(), |l| format!("{l:.6e}")),
            b,
            r.lemma2_passed.map_or("-", |p| if p { "pass" } else { "FAIL" }),
        );
    }
    for (case, t) in &summary.time_to_target {
        println!(
            "time-to-target {case:<20} reached {}/{} mean {}",
            t.reached,
            t.per_seed.len(),
            t.mean.map_or("-".into(), |m| format!("{m:.3}"))
        );
    }
    if summary.any_divergence {
        return Err(Failure::Diverged);
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, case } => run(&config, case),
        Command::Suite { config, cases, agents } => suite(&config, &cases, &agents),
        Command::Audit { trace, out } => audit(&trace, out),
        Command::Bounds { params } => bounds(&params),
        Command::Report { run_dir } => report(&run_dir),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Diverged) => {
            eprintln!("at least one run diverged");
            ExitCode::from(2)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
