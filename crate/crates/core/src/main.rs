use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use vplb_core::exactnum::format_ratio;
use vplb_core::harness::bounds::{bounds, to_csv};
use vplb_core::harness::config::{RunFile, SweepConfig};
use vplb_core::harness::verify::{verify_trace, VerifyError};
use vplb_core::harness::{run, trace};
use vplb_core::setfamily::FamilyKind;

#[derive(Parser)]
#[command(name = "vplb", version, about = "Adaptive lower-bound adversaries for online vector bin packing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Play one adversary against one algorithm and certify the result.
    Run(Box<RunArgs>),
    /// Re-check a trace written by `run`.
    Verify { trace: PathBuf },
    /// Print the lower-bound table for a range of dimensions.
    Bounds {
        #[arg(long, default_value_t = 2)]
        d_min: usize,
        #[arg(long, default_value_t = 20)]
        d_max: usize,
        #[arg(long)]
        csv: bool,
    },
    /// Run a grid of strategies and algorithms from a TOML file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    /// large-d, medium-d, d3 or d8.
    #[arg(long)]
    strategy: Option<String>,
    /// first-fit, next-fit, best-fit, always-new, random:<seed> or extern:<cmd>.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<usize>,
    #[arg(long)]
    beta: Option<usize>,
    #[arg(long)]
    nu: Option<u32>,
    #[arg(long, value_parser = parse_family)]
    family: Option<FamilyKind>,
    /// Seed for the code family's relabelling.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    /// Evaluate fork branches in parallel.
    #[arg(long)]
    parallel: bool,
    /// TOML file with defaults for any of the flags above.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn parse_family(s: &str) -> Result<FamilyKind, String> {
    match s {
        "powerset" => Ok(FamilyKind::Powerset),
        "code" => Ok(FamilyKind::Code),
        _ => Err(format!("unknown family {s:?} (powerset or code)")),
    }
}

fn cmd_run(a: RunArgs) -> anyhow::Result<u8> {
    let flags = RunFile {
        strategy: a.strategy,
        algorithm: a.algorithm,
        d: a.d,
        n: a.n,
        k: a.k,
        alpha: a.alpha,
        beta: a.beta,
        nu: a.nu,
        family: a.family,
        seed: a.seed,
        trace: a.trace,
        report: a.report,
        parallel: a.parallel.then_some(true),
    };
    let file = match &a.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let cfg = match flags.over(file).resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(4);
        }
    };
    let outcome = match run(&cfg.strategy, &cfg.algorithm, cfg.parallel) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(e.exit_code() as u8);
        }
    };
    if let Some(p) = &cfg.trace {
        trace::write_trace(p, &outcome.records).with_context(|| format!("writing {}", p.display()))?;
    }
    let report = outcome.report();
    if let Some(p) = &cfg.report {
        std::fs::write(p, serde_json::to_string_pretty(&report)?).with_context(|| format!("writing {}", p.display()))?;
    }
    let cert = &outcome.certificate;
    println!("strategy   {}  algorithm {}", cert.strategy, cert.algorithm);
    for b in &report.branches {
        println!(
            "branch {:<6} ALG {:>6}  offline {:>6}  ratio {:.4}",
            b.label, b.alg_cost, b.offline_cost, b.measured_ratio
        );
    }
    println!(
        "certified  {} ({:.4})  guaranteed {} ({:.4})",
        format_ratio(&cert.certified_ratio),
        report.certified_ratio_decimal,
        format_ratio(&cert.guaranteed_bound),
        report.guaranteed_bound_decimal
    );
    println!("checks     {}/{} pass", cert.checks.len() - report.failed_checks.len(), cert.checks.len());
    for f in &report.failed_checks {
        println!("FAILED     {f}");
    }
    Ok(if report.passed { 0 } else { 3 })
}

fn cmd_verify(path: PathBuf) -> anyhow::Result<u8> {
    match verify_trace(&path) {
        Ok(cert) => {
            println!(
                "ok: {} vs {}, {} checks, certified ratio {}",
                cert.strategy,
                cert.algorithm,
                cert.checks.len(),
                format_ratio(&cert.certified_ratio)
            );
            Ok(0)
        }
        Err(VerifyError::Violations(vs)) => {
            for v in &vs {
                println!("violation: {v}");
            }
            Ok(3)
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_bounds(d_min: usize, d_max: usize, csv: bool) -> u8 {
    if d_min < 2 || d_min > d_max {
        eprintln!("error: need 2 <= d-min <= d-max");
        return 4;
    }
    let table = bounds(d_min, d_max);
    if csv {
        print!("{}", to_csv(&table));
        return 0;
    }
    println!("{:>5}  {:<10} {:<18} {:>10}  {:>8}", "d", "best", "parameters", "bound", "decimal");
    for e in &table {
        let b = &e.best;
        println!(
            "{:>5}  {:<10} {:<18} {:>10}  {:>8.4}",
            e.d,
            b.construction,
            b.parameters,
            format_ratio(&b.bound),
            num_traits::ToPrimitive::to_f64(&b.bound).unwrap_or(f64::NAN)
        );
    }
    0
}

fn cmd_sweep(path: PathBuf) -> anyhow::Result<u8> {
    let sweep = SweepConfig::load(&path)?;
    let results = sweep.run()?;
    let mut worst = 0;
    for r in &results {
        println!(
            "{:<9} {:<28} {:<4} ratio {:<12} {}",
            r.strategy.id(),
            r.algorithm,
            if r.passed { "ok" } else { "FAIL" },
            r.certified_ratio.as_deref().unwrap_or("-"),
            r.error.as_deref().unwrap_or("")
        );
        worst = worst.max(r.exit_code);
    }
    Ok(worst as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => cmd_run(*a),
        Command::Verify { trace } => cmd_verify(trace),
        Command::Bounds { d_min, d_max, csv } => Ok(cmd_bounds(d_min, d_max, csv)),
        Command::Sweep { config } => cmd_sweep(config),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
