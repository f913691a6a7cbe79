use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tdmpc_cli::commands::{self, OutputOptions, RunTarget, Setup};
use tdmpc_cli::config::{ExperimentConfig, RawConfig};
use tdmpc_cli::CliError;

/// Time-distributed MPC experiments: certified constants, gap sweeps and
/// empirical stability probes.
#[derive(Debug, Parser)]
#[command(name = "tdmpc", version)]
struct Cli {
    /// Experiment config file.
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in experiment (`pendulum`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed (overrides `seed` in the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Also write SVG plots.
    #[arg(long, global = true)]
    svg: bool,
    /// Timing repeats per control step (overrides `repeats`).
    #[arg(long, global = true)]
    repeats: Option<usize>,
    /// Skip wall-clock timing; time columns are written as 0.
    #[arg(long, global = true)]
    no_timing: bool,
    /// Override a config entry, e.g. `--set N=5` or `--set probe.pairs=50`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the certified constants.
    Constants,
    /// Gap and bounds for every ℓ in `ells`.
    Sweep,
    /// Empirical E-δISS fit, contraction, Lipschitz, ψ-decay and Lyapunov checks.
    Probe,
    /// One closed-loop trajectory: `benchmark` or an iteration count.
    Run { target: RunTarget },
    /// Find the first horizon N whose η^ℓ lands in the calibration window.
    #[command(name = "calibrate-N")]
    CalibrateN,
}

fn load(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let mut raw = match (&cli.config, &cli.preset) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::config(&path.display().to_string(), None, format!("cannot read: {e}")))?;
            RawConfig::parse(&text, &path.display().to_string())?
        }
        (None, Some(name)) => ExperimentConfig::preset(name)?,
        (None, None) => return Err(CliError::Config("pass --config PATH or --preset NAME".into())),
    };
    for o in &cli.overrides {
        raw.set(o)?;
    }
    let mut cfg = ExperimentConfig::from_raw(&raw)?;
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(r) = cli.repeats {
        if r == 0 {
            return Err(CliError::Config("--repeats must be at least 1".into()));
        }
        cfg.repeats = r;
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let cfg = load(cli)?;
    let out = OutputOptions { out_dir: cfg.out_dir.clone(), svg: cli.svg, timing: !cli.no_timing };
    let setup = Setup::new(cfg)?;
    match &cli.command {
        Command::Constants => {
            let path = commands::cmd_constants(&setup, &out)?;
            print!("{}", std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?);
        }
        Command::Sweep => {
            let res = commands::cmd_sweep(&setup, &out)?;
            println!("x0 is {}", setup.roa_label()?);
            let unstable = res.rows.iter().filter(|r| !r.stable).count();
            println!("{} rows written to {}", res.rows.len(), out.out_dir.join(commands::SWEEP_FILE).display());
            if unstable > 0 {
                println!("{unstable} unstable run(s) flagged with stable_flag = 0");
            }
        }
        Command::Probe => {
            let res = commands::cmd_probe(&setup, &out);
            let report = out.out_dir.join(commands::PROBE_REPORT);
            if let Ok(text) = std::fs::read_to_string(&report) {
                print!("{text}");
            }
            res?;
        }
        Command::Run { target } => {
            let (run, path) = commands::cmd_run(&setup, *target, &out)?;
            if matches!(target, RunTarget::Iterations(_)) {
                println!("x0 with zero warm start is {}", setup.roa_label()?);
            }
            println!("{} steps ({:?}) written to {}", run.len(), run.status, path.display());
        }
        Command::CalibrateN => {
            let res = commands::cmd_calibrate(&setup, &out);
            if let Ok(text) = std::fs::read_to_string(out.out_dir.join(commands::CALIBRATE_FILE)) {
                print!("{text}");
            }
            let cal = res?;
            println!(
                "selected N = {} (config written to {})",
                cal.selected.unwrap_or_default(),
                out.out_dir.join(commands::CALIBRATED_CONFIG).display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tdmpc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
