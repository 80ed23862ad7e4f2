use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use mhdtc::lab::{emit_results, parse_config, run_dir, Lab, Preset};

/// Environment variable holding the worker-pool size.
const WORKERS_VAR: &str = "MHDTC_WORKERS";

#[derive(Parser, Debug)]
#[command(
    name = "mhdtc",
    version,
    about = "Taylor-Couette MHD instability laboratory",
    after_help = "Any configuration value can be overridden with a dotted flag, e.g. `--physics.eps 3e-3` or \
                  `--experiment.delta_list '[1e-3,1e-4,1e-5,1e-6]'`. Set MHDTC_WORKERS to bound the worker pool."
)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Named preset applied before the file and the overrides.
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,

    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Residual of the steady Taylor-Couette state.
    SteadyCheck,
    /// Leading dynamo eigenpair and its retained spectrum.
    Spectrum,
    /// Growth rate against magnetic diffusivity.
    Scaling,
    /// Smoothing envelopes of the dynamo semigroup under refinement.
    SemigroupCheck,
    /// Kinematic dynamo run from the leading eigenmode.
    EvolveLinear,
    /// One nonlinear run from the first perturbation size.
    EvolveNonlinear,
    /// Escape time against perturbation size.
    InstabilitySweep,
    /// Large-viscosity run seeded by a magnetic perturbation.
    EnergyTransfer,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::SteadyCheck => "steady-check",
            Command::Spectrum => "spectrum",
            Command::Scaling => "scaling",
            Command::SemigroupCheck => "semigroup-check",
            Command::EvolveLinear => "evolve-linear",
            Command::EvolveNonlinear => "evolve-nonlinear",
            Command::InstabilitySweep => "instability-sweep",
            Command::EnergyTransfer => "energy-transfer",
        }
    }
}

const OWN_FLAGS: [&str; 3] = ["--config", "--preset", "--print-config"];

/// Splits `--section.key value` and `--section.key=value` out of argv.
fn split_overrides(args: Vec<String>) -> anyhow::Result<(Vec<String>, Vec<(String, String)>)> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let Some(flag) = a.strip_prefix("--") else {
            rest.push(a);
            continue;
        };
        let (key, inline) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), Some(v.to_string())),
            None => (flag.to_string(), None),
        };
        if !key.contains('.') || OWN_FLAGS.contains(&a.as_str()) {
            rest.push(a);
            continue;
        }
        let value = match inline {
            Some(v) => v,
            None => it.next().with_context(|| format!("--{key} needs a value"))?,
        };
        overrides.push((key, value));
    }
    Ok((rest, overrides))
}

fn configure_workers() -> anyhow::Result<()> {
    let Ok(raw) = std::env::var(WORKERS_VAR) else { return Ok(()) };
    let n: usize = raw.trim().parse().with_context(|| format!("{WORKERS_VAR} = {raw:?} is not a count"))?;
    anyhow::ensure!(n >= 1, "{WORKERS_VAR} must be at least 1");
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("worker pool")?;
    Ok(())
}

fn run() -> anyhow::Result<bool> {
    let (args, overrides) = split_overrides(std::env::args().collect())?;
    let cli = Cli::parse_from(args);
    configure_workers()?;
    let preset = cli.preset.as_deref().map(Preset::parse).transpose()?;
    let cfg = parse_config(cli.config.as_deref(), preset, &overrides)?;
    if cli.print_config {
        println!("{}", cfg.to_json());
        return Ok(true);
    }
    let name = cli.command.name();
    let dir = run_dir(&cfg, name);
    let lab = Lab::new(cfg)?;
    let report = lab.run(name)?;
    print!("{}", report.render_checks());
    let manifest = emit_results(&report, &lab.cfg, &dir)?;
    println!("results: {}", manifest.display());
    Ok(report.passed())
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
