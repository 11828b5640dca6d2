use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use usc_cascade::experiment::{self, parse_grid, sibling_path, Axis, RunConfig, Table};
use usc_cascade::Error;

/// Single-photon joint excitation of two cascaded ultrastrong-coupling
/// subsystems. Frequencies in units of omega_q, times in 1/omega_q.
#[derive(Parser, Debug)]
#[command(name = "usc-cascade", version, about)]
struct Cli {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output CSV; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Worker threads for scans and sweeps.
    #[arg(long, global = true, value_name = "N")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Composite spectrum versus omega_c, with an avoided-crossing summary.
    Spectrum {
        /// omega_c grid as a:b:n
        #[arg(long)]
        grid: Option<String>,
        /// Number of levels kept per point.
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Qubit excitations and equal-time correlation under a single photon.
    Dynamics {
        /// Run without the photon.
        #[arg(long)]
        vacuum: bool,
    },
    /// Delayed correlation C(t) at the configured separation.
    Correlation {
        /// Separation d/(cT).
        #[arg(long)]
        delay: Option<f64>,
    },
    /// c_max along one parameter axis.
    Sweep {
        /// gamma | delay | gain | omega_c
        #[arg(long)]
        axis: Option<Axis>,
        /// Axis grid as a:b:n
        #[arg(long)]
        grid: Option<String>,
    },
    /// Cross-check the hierarchy against the source-cavity model.
    Validate,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) => 2,
        Error::InvariantBreach { .. } => 3,
        Error::Crossing(_) => 4,
        _ => 1,
    }
}

fn emit(table: &Table, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(p) => {
            table.save(p)?;
            log::info!("wrote {}", p.display());
            Ok(())
        }
        None => table.write_to(&mut std::io::stdout().lock()),
    }
}

fn run(cli: Cli) -> Result<u8, Error> {
    let mut cfg = RunConfig::load(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Spectrum { grid, levels } => {
            if let Some(g) = grid {
                parse_grid(&g)?;
                cfg.spectrum.grid = g;
            }
            if let Some(k) = levels {
                cfg.spectrum.levels = k;
            }
            let res = experiment::with_workers(cli.workers, || experiment::cmd_spectrum(&cfg))??;
            emit(&res.levels_table(&cfg), out)?;
            let summary = res.crossings_table(&cfg);
            match out {
                Some(p) => emit(&summary, Some(&sibling_path(p, "crossings")))?,
                None => {
                    for c in &res.crossings {
                        eprintln!("avoided crossing {}-{}: omega_c = {:.8}, gap = {:.4e}", c.lower, c.upper, c.omega_c, c.gap);
                    }
                }
            }
        }
        Command::Dynamics { vacuum } => {
            cfg.pulse.vacuum |= vacuum;
            let res = experiment::cmd_dynamics(&cfg)?;
            emit(&res.table(&cfg), out)?;
        }
        Command::Correlation { delay } => {
            if let Some(d) = delay {
                cfg.correlation.delay = d;
            }
            let res = experiment::cmd_correlation(&cfg)?;
            emit(&res.table(&cfg), out)?;
            eprintln!("c_max = {:.6e}", res.c_max());
        }
        Command::Sweep { axis, grid } => {
            let axis = axis.unwrap_or(cfg.sweep.axis);
            let grid = grid.map(|g| parse_grid(&g)).transpose()?;
            let res = experiment::with_workers(cli.workers, || experiment::cmd_sweep(&cfg, axis, grid.as_deref()))??;
            emit(&res.table(&cfg), out)?;
        }
        Command::Validate => {
            let res = experiment::with_workers(cli.workers, || experiment::cmd_validate(&cfg))??;
            emit(&res.table(&cfg), out)?;
            eprint!("{}", res.report());
            if !res.passed() {
                return Ok(3);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
