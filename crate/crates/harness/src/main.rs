use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ris_occult_harness::experiments::{run_gradcheck, run_nmse_sweep, run_optimize, run_rate_cdf, run_spectra};
use ris_occult_harness::{parse_config, HarnessError, Overrides, Preset, RunDir, ScenarioConfig};

#[derive(Parser)]
#[command(name = "ris-occult", version, about = "RIS-assisted secure sensing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML file overlaid on the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = Preset::Paper)]
    preset: Preset,
    /// Phase designer for the optimized configuration.
    #[arg(long)]
    designer: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// BS and wiretapper MUSIC spectra for one scene.
    Spectra(Common),
    /// NMSE of both parties across the transmit-power sweep.
    Nmse(Common),
    /// Rate CDFs of the optimized, random and identity configurations.
    RateCdf(Common),
    /// Design one scene's configuration and dump it with the optimizer trace.
    Optimize(Common),
    /// Compare the analytic gradient with finite differences.
    Gradcheck(Common),
}

fn resolve(c: &Common) -> Result<(ScenarioConfig, RunDir), HarnessError> {
    let overrides = Overrides { seed: c.seed, trials: c.trials, designer: c.designer.clone() };
    let cfg = parse_config(c.preset, c.config.as_deref(), &overrides)?;
    Ok((cfg, RunDir::create(&c.out)?))
}

fn run(cli: Cli) -> Result<serde_json::Value, HarnessError> {
    let summary = match &cli.command {
        Command::Spectra(c) => {
            let (cfg, dir) = resolve(c)?;
            serde_json::to_value(run_spectra(&cfg, &dir)?.summary)?
        }
        Command::Nmse(c) => {
            let (cfg, dir) = resolve(c)?;
            serde_json::to_value(run_nmse_sweep(&cfg, &cfg.sweep_powers(), &dir)?.summary)?
        }
        Command::RateCdf(c) => {
            let (cfg, dir) = resolve(c)?;
            serde_json::to_value(run_rate_cdf(&cfg, &dir)?.summary)?
        }
        Command::Optimize(c) => {
            let (cfg, dir) = resolve(c)?;
            serde_json::to_value(run_optimize(&cfg, &dir)?.summary)?
        }
        Command::Gradcheck(c) => {
            let (cfg, dir) = resolve(c)?;
            serde_json::to_value(run_gradcheck(&cfg, &dir)?.summary)?
        }
    };
    Ok(summary)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let line = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{line}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
