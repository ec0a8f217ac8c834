use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::builder::PossibleValuesParser;
use clap::{CommandFactory, Parser};
use qbc_core::suites::{run_suite, RunConfig, SuiteReport, SUITES};

/// Runs verification suites and writes one JSON report per suite.
#[derive(Parser, Debug)]
#[command(name = "qbc", version)]
struct Args {
    /// JSON file with run parameters; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Deformation parameter in (0, 1).
    #[arg(long)]
    q: Option<f64>,
    /// Spin bound of the exact Hopf checks and the pentagon window.
    #[arg(long)]
    max_spin: Option<u32>,
    /// Suite to run; repeat for several. Defaults to all suites.
    #[arg(long = "suite", value_parser = PossibleValuesParser::new(SUITES))]
    suites: Vec<String>,
    /// σ-grid as LEVEL or LEVEL:GRADING (2^LEVEL + 1 points).
    #[arg(long)]
    grid: Option<String>,
    /// Tolerance applied to every numerical check.
    #[arg(long)]
    tol: Option<f64>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for randomized trials.
    #[arg(long)]
    seed: Option<u64>,
}

fn parse_grid(s: &str, cfg: &mut RunConfig) -> Result<(), String> {
    let (level, grading) = match s.split_once(':') {
        Some((l, g)) => (l, Some(g)),
        None => (s, None),
    };
    cfg.grid_level = level.trim().parse().map_err(|_| format!("bad grid level {level:?}"))?;
    if let Some(g) = grading {
        cfg.grading = g.trim().parse().map_err(|_| format!("bad grid grading {g:?}"))?;
    }
    Ok(())
}

fn build_config(args: &Args) -> Result<RunConfig, String> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
        None => RunConfig::default(),
    };
    if let Some(q) = args.q {
        cfg.q = q;
    }
    if let Some(n) = args.max_spin {
        cfg.max_spin = n;
    }
    if !args.suites.is_empty() {
        cfg.suites = args.suites.clone();
    }
    if let Some(g) = &args.grid {
        parse_grid(g, &mut cfg)?;
    }
    if args.tol.is_some() {
        cfg.tol = args.tol;
    }
    if let Some(o) = &args.out {
        cfg.out = o.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if cfg.suites.is_empty() {
        cfg.suites = SUITES.iter().map(|s| s.to_string()).collect();
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn write_report(cfg: &RunConfig, rep: &SuiteReport) -> std::io::Result<()> {
    fs::write(cfg.out.join(format!("{}.json", rep.suite)), rep.to_json())?;
    for (name, csv) in &rep.tables {
        fs::write(cfg.out.join(format!("{}-{name}.csv", rep.suite)), csv)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if e.use_stderr() => {
            eprintln!("{e}\n{}", Args::command().render_long_help());
            return ExitCode::from(2);
        }
        Err(e) => e.exit(),
    };
    let cfg = match build_config(&args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n\n{}", Args::command().render_usage());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = fs::create_dir_all(&cfg.out) {
        eprintln!("error: {}: {e}", cfg.out.display());
        return ExitCode::from(2);
    }
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = cfg.suites.iter().map(|name| s.spawn(|| run_suite(name, &cfg))).collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    });
    let mut ok = true;
    for (name, res) in cfg.suites.iter().zip(results) {
        match res {
            Ok(rep) => {
                let failed = rep.checks.iter().filter(|c| c.status == qbc_core::suites::Status::Fail).count();
                println!("{name}: {} ({} checks, {failed} failed)", if failed == 0 { "pass" } else { "FAIL" }, rep.checks.len());
                ok &= failed == 0;
                if let Err(e) = write_report(&cfg, &rep) {
                    eprintln!("error: writing {name} report: {e}");
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                println!("{name}: ERROR {e}");
                ok = false;
            }
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
