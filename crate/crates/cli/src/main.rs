//! `dqma`: batch runner for the protocol simulator.
//!
//! ```text
//! dqma run   --config exp.json [--seed S] [--trials T] [--mode exact|sample] [--out-dir D] [--format json|csv]
//! dqma sweep --config sweep.json [...]
//! dqma plan  --r 1 --n 1 [--c 1] [--eta 0] [--epsilon 0.1] [--delta 0.1]
//! ```
//!
//! `DQMA_WORKERS` sets the number of worker threads. Exit codes: 0 success,
//! 2 configuration error, 3 capacity exceeded, 1 anything else.

mod config;
mod report;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dqma::protocols::{plan_parameters, PlanRequest};
use serde_json::json;

use config::{Config, ModeName};

#[derive(Parser)]
#[command(name = "dqma", version, about = "Run dQMA protocol experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write result.json and result.csv.
    Run(RunArgs),
    /// Run a grid over one parameter and write sweep.csv and sweep.json.
    Sweep(RunArgs),
    /// Print the parameters for a line of length r.
    Plan(PlanArgs),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    r: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    #[arg(long, default_value_t = 0.0)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// de Finetti K (default k+1).
    #[arg(long)]
    big_k: Option<u64>,
    /// de Finetti N (default m+k+1).
    #[arg(long)]
    big_n: Option<u64>,
    /// Natural log of the local dimension (default n(r+1)·ln 2).
    #[arg(long)]
    ln_d: Option<f64>,
    /// Constant C in N = ⌈(C/ε)·ln(1/δ)⌉.
    #[arg(long, default_value_t = 1.0)]
    epr_constant: f64,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<dqma::Error>() {
            return match err {
                dqma::Error::Capacity { .. } => 3,
                dqma::Error::Config(_)
                | dqma::Error::Argument(_)
                | dqma::Error::Json(_)
                | dqma::Error::Layout(_) => 2,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 2;
        }
    }
    1
}

fn workers() -> Result<()> {
    let Ok(v) = std::env::var("DQMA_WORKERS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| dqma::Error::Config(format!("DQMA_WORKERS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("starting the worker pool")
}

fn load(args: &RunArgs) -> Result<Config> {
    let text = std::fs::read_to_string(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    let mut cfg = Config::parse(&text).with_context(|| format!("in {}", args.config.display()))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.trials {
        if t == 0 {
            return Err(dqma::Error::Config("--trials must be at least 1".into()).into());
        }
        cfg.trials = t;
    }
    if let Some(m) = args.mode {
        cfg.mode = m;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let res = run::evaluate(&cfg)?;
    let json = report::json_string(&res)?;
    let header: Vec<String> = report::HEADER.iter().map(|s| s.to_string()).collect();
    let csv = report::csv_string(&header, &[report::row(&res)])?;
    report::write(&args.out_dir, "result.json", &json)?;
    report::write(&args.out_dir, "result.csv", &csv)?;
    print!("{}", if args.format == Format::Json { &json } else { &csv });
    Ok(())
}

fn cmd_sweep(args: &RunArgs) -> Result<()> {
    let cfg = load(args)?;
    let (axis, values) = cfg.axis()?;
    let mut header = vec![axis.clone()];
    header.extend(report::HEADER.iter().map(|s| s.to_string()));
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for v in &values {
        let point = cfg.with_value(&axis, v)?;
        let res = run::evaluate(&point).with_context(|| format!("at {axis} = {v}"))?;
        let mut row = vec![report::cell(v)];
        row.extend(report::row(&res));
        rows.push(row);
        results.push(json!({ "value": v, "result": res }));
    }
    let csv = report::csv_string(&header, &rows)?;
    let json = report::json_string(&json!({ "axis": axis, "points": results }))?;
    report::write(&args.out_dir, "sweep.csv", &csv)?;
    report::write(&args.out_dir, "sweep.json", &json)?;
    print!("{}", if args.format == Format::Json { &json } else { &csv });
    Ok(())
}

fn cmd_plan(a: &PlanArgs) -> Result<()> {
    let req = PlanRequest {
        r: a.r,
        n: a.n,
        c: a.c,
        eta: a.eta,
        epsilon: a.epsilon,
        delta: a.delta,
        ln_d: a.ln_d,
        big_k: a.big_k,
        big_n: a.big_n,
        epr_constant: a.epr_constant,
    };
    let out = plan_parameters(&req)?;
    match a.format {
        None => print!("{out}"),
        Some(Format::Json) => print!("{}", report::json_string(&out)?),
        Some(Format::Csv) => {
            let header = ["r", "n", "c", "eta", "k", "m", "K", "N", "ln_d", "de_finetti", "epr_copies", "soundness"];
            let row = vec![
                a.r.to_string(),
                a.n.to_string(),
                a.c.to_string(),
                a.eta.to_string(),
                out.k.to_string(),
                out.m.to_string(),
                out.big_k.to_string(),
                out.big_n.to_string(),
                out.ln_d.to_string(),
                out.de_finetti.to_string(),
                out.epr_copies.to_string(),
                out.soundness.to_string(),
            ];
            let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
            print!("{}", report::csv_string(&header, &[row])?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = workers().and_then(|()| match &cli.cmd {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Plan(a) => cmd_plan(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
