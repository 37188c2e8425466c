use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use purcell_core::config::load_config;
use purcell_core::experiments::{
    rate_report, run_figure, run_sweep, run_validate, simulate_artifacts, Artifacts, Axis, FigureName, SweepSpec,
};
use purcell_core::Error;

/// Doppler cooling of emitters in free space and in lossy cavities.
#[derive(Debug, Parser)]
#[command(name = "purcell", version)]
struct Cli {
    /// Worker threads for sweeps and figure panels (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate one configuration and write its trajectory and manifest.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "PURCELL_OUT_DIR", default_value = "purcell-out")]
        out: PathBuf,
        /// Artifact name (default: the config file stem).
        #[arg(long)]
        name: Option<String>,
    },
    /// Print the analytic rates of a configuration.
    Rates {
        #[arg(long)]
        config: PathBuf,
        /// Also simulate and report the fitted friction rate.
        #[arg(long)]
        fit: bool,
    },
    /// Scan one parameter of a configuration.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// `cooperativity`, `kv0` or a parameter name such as `delta_a`.
        #[arg(long)]
        axis: String,
        /// Comma-separated, strictly monotone values.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Also run each point's free-space twin.
        #[arg(long)]
        paired: bool,
        #[arg(long, env = "PURCELL_OUT_DIR", default_value = "purcell-out")]
        out: PathBuf,
        #[arg(long)]
        name: Option<String>,
    },
    /// Run the oracle suite; exits 1 if any check fails.
    Validate {
        /// Also write the report as CSV + manifest.
        #[arg(long, env = "PURCELL_OUT_DIR")]
        out: Option<PathBuf>,
    },
    /// Reproduce a figure's data (fig2, fig3a, fig3b, fig4ab, fig4cd, fig5, fig7 or all).
    Figure {
        name: String,
        #[arg(long, env = "PURCELL_OUT_DIR", default_value = "purcell-out")]
        out: PathBuf,
    },
}

enum Failure {
    Usage(Error),
    Runtime(Error),
    Validation(usize),
}

fn usage(e: Error) -> Failure {
    Failure::Usage(e)
}

fn runtime(e: Error) -> Failure {
    match e {
        Error::Config { .. } | Error::InvalidParams(_) | Error::UnknownFigure(_) => Failure::Usage(e),
        e => Failure::Runtime(e),
    }
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
}

fn write(artifacts: &Artifacts, out: &Path) -> Result<(), Failure> {
    let manifest = artifacts.write(out).map_err(Failure::Runtime)?;
    for m in &artifacts.summary {
        println!("{:<40} {}", m.key, purcell_core::experiments::output::format_number(m.value));
    }
    for n in &artifacts.notes {
        println!("note: {n}");
    }
    println!("wrote {}", manifest.display());
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, out, name } => {
            let cfg = load_config(&config).map_err(usage)?;
            let name = name.unwrap_or_else(|| stem(&config));
            write(&simulate_artifacts(&cfg, &name).map_err(runtime)?, &out)
        }
        Command::Rates { config, fit } => {
            let cfg = load_config(&config).map_err(usage)?;
            let report = rate_report(&cfg, fit).map_err(runtime)?;
            print!("{}", report.to_toml().map_err(Failure::Runtime)?);
            Ok(())
        }
        Command::Sweep {
            config,
            axis,
            values,
            paired,
            out,
            name,
        } => {
            let base = load_config(&config).map_err(usage)?;
            let spec = SweepSpec {
                name: name.unwrap_or_else(|| format!("{}_sweep", stem(&config))),
                base,
                axis: axis.parse::<Axis>().map_err(usage)?,
                values,
                paired,
            };
            spec.validate().map_err(usage)?;
            write(&run_sweep(&spec).map_err(runtime)?, &out)
        }
        Command::Validate { out } => {
            let report = run_validate();
            for c in &report.checks {
                println!(
                    "{} {:<48} measured {:<12.4e} threshold {:.4e}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.measured,
                    c.threshold
                );
            }
            if let Some(out) = out {
                write(&report.to_artifacts(), &out)?;
            }
            match report.failures().count() {
                0 => Ok(()),
                n => Err(Failure::Validation(n)),
            }
        }
        Command::Figure { name, out } => {
            let names = if name == "all" {
                FigureName::ALL.to_vec()
            } else {
                vec![name.parse::<FigureName>().map_err(usage)?]
            };
            for f in names {
                let start = Instant::now();
                let artifacts = run_figure(f).map_err(runtime)?;
                println!("== {f} ({:.1} s)", start.elapsed().as_secs_f64());
                write(&artifacts, &out)?;
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Validation(n)) => {
            eprintln!("{n} validation check(s) failed");
            ExitCode::from(1)
        }
    }
}
