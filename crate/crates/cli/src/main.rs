use std::fs;
use std::process::ExitCode;

use clap::Parser;
use tracemark::cli::{Cli, Command};
use tracemark::commands;
use tracemark::{CliError, CliResult, RunConfig};

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => {
            let data = fs::read_to_string(path).map_err(|e| {
                CliError::Input(format!("cannot read config {}: {e}", path.display()))
            })?;
            serde_json::from_str(&data).map_err(|e| {
                CliError::Input(format!("invalid config {}: {e}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(created) = &cli.created {
        config.created = Some(created.clone());
    }
    Ok(config)
}

fn run(cli: Cli) -> CliResult<()> {
    let config = resolve_config(&cli)?;
    match cli.command {
        Command::Frequencies {
            manifest,
            band,
            json,
        } => commands::cmd_frequencies(&config, manifest, &band, json),
        Command::Distribute {
            manifest,
            ledger,
            output,
            users,
            min_tokens,
            max_tokens,
            band,
            scheme,
            force,
        } => commands::cmd_distribute(
            &config, manifest, ledger, output, users, min_tokens, max_tokens, &band, &scheme,
            force,
        ),
        Command::InjectTwa {
            manifest,
            output,
            token,
            auto_token,
            count,
            first_m,
            ledger,
            user_id,
            scheme,
            force,
        } => commands::cmd_inject_twa(
            &config, manifest, output, token, auto_token, count, first_m, ledger, user_id,
            &scheme, force,
        ),
        Command::TrainDetector {
            output,
            scheme,
            substitute_models,
            samples_per_model,
            epochs,
            learning_rate,
            render_size,
        } => commands::cmd_train_detector(
            &config,
            output,
            &scheme,
            substitute_models,
            samples_per_model,
            epochs,
            learning_rate,
            render_size,
        ),
        Command::Probe {
            ledger,
            detector,
            token,
            oracle,
            probe,
            json,
        } => commands::cmd_probe(&config, ledger, detector, &token, &oracle, &probe, json),
        Command::Trace {
            ledger,
            detector,
            manifest,
            band,
            oracle,
            probe,
            json,
        } => commands::cmd_trace(
            &config, ledger, detector, manifest, &band, &oracle, &probe, json,
        ),
        Command::Degrade {
            manifest,
            output,
            spec,
            force,
        } => commands::cmd_degrade(&config, manifest, output, &spec, force),
        Command::Simulate {
            users,
            min_tokens,
            max_tokens,
            q,
            r,
            manifest,
            band,
            scheme,
            probe,
            render_size,
            json,
        } => commands::cmd_simulate(
            &config, users, min_tokens, max_tokens, q, r, manifest, &band, &scheme, &probe,
            render_size, json,
        ),
        Command::Eval {
            manifest,
            detector,
            retrain,
            scheme,
            sample,
            json,
        } => commands::cmd_eval(&config, manifest, detector, retrain, &scheme, sample, json),
        Command::GenFixture {
            output,
            kind,
            images,
            size,
            force,
        } => commands::cmd_gen_fixture(&config, output, kind, images, size, force),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
