use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;

use dwms::run::{execute, Mode, Run};

/// Distorted-wave multiple scattering driver.
///
/// Exit status: 0 when every check passes, 1 on errors, 2 on usage errors,
/// 3 when artifacts were written but some check failed.
#[derive(Debug, Parser)]
#[command(name = "dwms", version)]
struct Cli {
    /// single_scatter, msw_continuum, msw_bound_scan or verify
    mode: Mode,
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "dwms-out")]
    out: PathBuf,
    /// Worker threads for the energy and center loops.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match drive(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn drive(cli: &Cli) -> anyhow::Result<bool> {
    if let Some(n) = cli.workers {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("configuring worker pool")?;
    }
    let run = Run::load(cli.mode, &cli.config).with_context(|| format!("loading {}", cli.config.display()))?;
    for w in &run.warnings {
        eprintln!("warning: {w}");
    }
    let outcome = execute(&run, &cli.out).with_context(|| format!("running {}", cli.mode))?;
    if cli.verbose {
        for c in &outcome.checks {
            let verdict = if c.passed { "PASS" } else { "FAIL" };
            eprintln!("{verdict} {} defect {:.3e} tol {:.1e}", c.name, c.defect, c.tolerance);
        }
    }
    let failed = outcome.checks.iter().filter(|c| !c.passed).count();
    eprintln!(
        "{}: {} checks, {failed} failed; artifacts in {}",
        cli.mode,
        outcome.checks.len(),
        cli.out.display()
    );
    Ok(failed == 0)
}
