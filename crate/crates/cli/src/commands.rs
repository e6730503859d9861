//! Command implementations. Each wraps library calls, prints a
//! human-readable summary, and writes JSON artifacts that embed the
//! resolved run configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use tracemark_core::harness::{
    run_tracking_experiment, train_render_detector, DetectorTrainConfig, ExperimentConfig,
};
use tracemark_core::tokens::{ActivationTokenSet, TokenKind};
use tracemark_core::{
    construct_new_token, probe_token, select_preexisting, token_frequencies, trace_leaker,
    CandidatePool, DatasetManifest, Ledger, LedgerEntry, Seed, TwaSelection,
};

use crate::cli::{
    BandArgs, DegradeArgs, FixtureKind, OracleArgs, OracleKind, ProbeArgs, SchemeArgs,
};
use crate::config::{Artifact, RunConfig};
use crate::detector_io::{load_detector, save_detector};
use crate::error::{CliError, CliResult};
use crate::eval::{default_degradations, robustness_eval, EvalDetector};
use crate::fixtures::{write_robustness_corpus, write_token_corpus, MARKER_TOKENS};
use crate::ledger_io::{load_ledger, record_release};
use crate::manifest::{load_image, load_manifest, resolve_image_path};
use crate::oracle::{build_oracle, OracleSpec};
use crate::release::{degrade_release, prepare_output_dir, release_twa, release_waa};
use crate::report::{frequency_table, robustness_table, tracking_table};

fn required_path(
    flag: Option<PathBuf>,
    fallback: &Option<PathBuf>,
    name: &str,
) -> CliResult<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| CliError::Input(format!("--{name} is required (flag or config file)")))
}

fn load_manifest_cli(path: &Path) -> CliResult<DatasetManifest> {
    load_manifest(path).map_err(CliError::input)
}

fn write_artifact<T: Serialize>(path: &Path, artifact: &Artifact<T>) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    fs::write(path, artifact.to_json_pretty().map_err(anyhow::Error::from)?)
        .map_err(anyhow::Error::from)?;
    Ok(())
}

fn pool_from_band(manifest: &DatasetManifest, band: &BandArgs) -> CliResult<CandidatePool> {
    let stats = token_frequencies(manifest)?;
    Ok(select_preexisting(
        &stats,
        band.f_min,
        band.f_max,
        band.pool_size,
    )?)
}

/// The bundled marker pool, for simulation runs without a manifest.
fn marker_pool() -> CandidatePool {
    let (tokens, freqs): (Vec<String>, Vec<f64>) = MARKER_TOKENS
        .iter()
        .map(|(t, c)| (t.to_string(), *c as f64 / 1000.0))
        .unzip();
    CandidatePool::new(tokens, freqs).expect("aligned by construction")
}

pub fn cmd_frequencies(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    band: &BandArgs,
    json: Option<PathBuf>,
) -> CliResult<()> {
    let manifest_path = required_path(manifest, &config.manifest, "manifest")?;
    let manifest = load_manifest_cli(&manifest_path)?;
    let pool = pool_from_band(&manifest, band)?;
    print!("{}", frequency_table(&pool));
    if let Some(path) = json {
        write_artifact(&path, &Artifact::new(config.clone(), pool))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_distribute(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    ledger: Option<PathBuf>,
    output: Option<PathBuf>,
    users: usize,
    min_tokens: usize,
    max_tokens: usize,
    band: &BandArgs,
    scheme: &SchemeArgs,
    force: bool,
) -> CliResult<()> {
    let manifest_path = required_path(manifest, &config.manifest, "manifest")?;
    let ledger_path = required_path(ledger, &config.ledger, "ledger")?;
    let output_root = required_path(output, &config.output, "output")?;
    let template = scheme.resolve(&config.scheme);
    let seed = Seed::new(config.seed);

    let source = load_manifest_cli(&manifest_path)?;
    let pool = pool_from_band(&source, band)?;
    let sets = tracemark_core::assign_token_sets(
        users,
        min_tokens,
        max_tokens,
        &pool,
        seed.derive("assign"),
    )?;

    if ledger_path.exists() {
        if !force {
            return Err(CliError::OutputConflict(format!(
                "{} already exists; pass --force to overwrite",
                ledger_path.display()
            )));
        }
        fs::remove_file(&ledger_path).map_err(anyhow::Error::from)?;
    }
    prepare_output_dir(&output_root, force)?;

    for (t, set) in sets.iter().enumerate() {
        let user_id = (t + 1) as u64;
        let user_scheme = template.instantiate(seed.derive("user-key").derive_index(user_id));
        let dir = output_root.join(format!("user_{user_id:03}"));
        let outcome = release_waa(&source, set, &user_scheme, &dir, force)?;
        let entry = LedgerEntry {
            user_id,
            token_set: set.clone(),
            scheme: user_scheme,
            created: config.created.clone(),
            report: outcome.report.clone(),
        };
        write_artifact(
            &dir.join("release.json"),
            &Artifact::new(config.clone(), entry.clone()),
        )?;
        record_release(&ledger_path, entry)?;
        println!(
            "user {user_id:>3}: tokens [{}] watermarked {}/{} pairs (p = {:.3})",
            set.tokens().join(", "),
            outcome.report.modified,
            outcome.report.total,
            outcome.report.p
        );
    }
    println!(
        "wrote {} releases under {} and ledger {}",
        sets.len(),
        output_root.display(),
        ledger_path.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_inject_twa(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    output: Option<PathBuf>,
    token: Option<String>,
    auto_token: bool,
    count: usize,
    first_m: bool,
    ledger: Option<PathBuf>,
    user_id: u64,
    scheme: &SchemeArgs,
    force: bool,
) -> CliResult<()> {
    let manifest_path = required_path(manifest, &config.manifest, "manifest")?;
    let output_dir = required_path(output, &config.output, "output")?;
    let seed = Seed::new(config.seed);
    let source = load_manifest_cli(&manifest_path)?;
    let stats = token_frequencies(&source)?;

    let token = match (token, auto_token) {
        (Some(t), _) => t,
        (None, true) => construct_new_token(seed.derive("new-token"), &stats)?,
        (None, false) => {
            return Err(CliError::Input(
                "pass --token <TOKEN> or --auto-token".into(),
            ))
        }
    };
    if stats.contains(&token) {
        eprintln!("warning: token \"{token}\" already appears in the corpus vocabulary");
    }

    let template = scheme.resolve(&config.scheme);
    let user_scheme = template.instantiate(seed.derive("twa-key").derive_index(user_id));
    let selection = if first_m {
        TwaSelection::FirstM
    } else {
        TwaSelection::Uniform
    };
    let outcome = release_twa(
        &source,
        &token,
        count,
        selection,
        &user_scheme,
        seed.derive("twa-select"),
        &output_dir,
        force,
    )?;

    let entry = LedgerEntry {
        user_id,
        token_set: ActivationTokenSet::single(token.clone(), TokenKind::NewToken)?,
        scheme: user_scheme,
        created: config.created.clone(),
        report: outcome.report.clone(),
    };
    write_artifact(
        &output_dir.join("release.json"),
        &Artifact::new(config.clone(), entry.clone()),
    )?;
    if let Some(ledger_path) = ledger.or_else(|| config.ledger.clone()) {
        record_release(&ledger_path, entry)?;
    }
    println!(
        "token \"{token}\": modified {}/{} pairs (p = {:.3}) into {}",
        outcome.report.modified,
        outcome.report.total,
        outcome.report.p,
        output_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_train_detector(
    config: &RunConfig,
    output: Option<PathBuf>,
    scheme: &SchemeArgs,
    substitute_models: usize,
    samples_per_model: usize,
    epochs: usize,
    learning_rate: f64,
    render_size: usize,
) -> CliResult<()> {
    let output_path = required_path(output, &config.detector, "output")?;
    let template = scheme.resolve(&config.scheme);
    let train_config = DetectorTrainConfig {
        substitute_models,
        samples_per_model,
        epochs,
        learning_rate,
    };
    let (detector, trace) = train_render_detector(
        &template,
        &train_config,
        render_size,
        render_size,
        Seed::new(config.seed).derive("detector"),
    )?;
    save_detector(&detector, config, &output_path)?;
    println!(
        "trained on {} samples for {} epochs; final loss {:.6}; wrote {}",
        2 * substitute_models * samples_per_model,
        trace.len(),
        trace.last().copied().unwrap_or(f64::NAN),
        output_path.display()
    );
    Ok(())
}

fn oracle_spec_from_args(args: &OracleArgs) -> CliResult<OracleSpec> {
    match args.oracle {
        OracleKind::Clean => Ok(OracleSpec::Clean),
        OracleKind::User => {
            let user_id = args.oracle_user.ok_or_else(|| {
                CliError::Input("--oracle user requires --oracle-user <ID>".into())
            })?;
            Ok(OracleSpec::User {
                user_id,
                trigger_fidelity: args.q,
                false_rate: args.r,
                drop_tokens: args.drop_token.clone(),
            })
        }
    }
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_probe(
    config: &RunConfig,
    ledger: Option<PathBuf>,
    detector: Option<PathBuf>,
    token: &str,
    oracle_args: &OracleArgs,
    probe_args: &ProbeArgs,
    json: Option<PathBuf>,
) -> CliResult<()> {
    let ledger_path = required_path(ledger, &config.ledger, "ledger")?;
    let detector_path = required_path(detector, &config.detector, "detector")?;
    let ledger = load_ledger(&ledger_path)?;
    let detector = load_detector(&detector_path)?;
    let probe = probe_args.resolve(&config.probe);
    let seed = Seed::new(config.seed);
    let oracle = build_oracle(
        &oracle_spec_from_args(oracle_args)?,
        &ledger,
        seed.derive("oracle"),
        oracle_args.render_size,
    )?;
    let vote = probe_token(&oracle, token, &detector, &probe, seed.derive("probe"));
    println!(
        "token \"{}\": {}/{} generations flagged; triggered = {}",
        vote.token, vote.flagged, vote.generations, vote.triggered
    );
    if let Some(path) = json {
        write_artifact(&path, &Artifact::new(config.clone(), vote))?;
    }
    Ok(())
}

/// Candidate pool for tracing: recomputed from a manifest when given,
/// otherwise the union of all ledger token sets.
fn trace_pool(
    manifest: Option<PathBuf>,
    config: &RunConfig,
    band: &BandArgs,
    ledger: &Ledger,
) -> CliResult<CandidatePool> {
    let manifest_path = manifest.or_else(|| config.manifest.clone());
    if let Some(path) = manifest_path {
        let manifest = load_manifest_cli(&path)?;
        return pool_from_band(&manifest, band);
    }
    let mut tokens: Vec<String> = ledger
        .entries()
        .iter()
        .flat_map(|e| e.token_set.tokens().iter().cloned())
        .collect();
    tokens.sort();
    tokens.dedup();
    let n = tokens.len();
    Ok(CandidatePool::new(tokens, vec![0.0; n])?)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_trace(
    config: &RunConfig,
    ledger: Option<PathBuf>,
    detector: Option<PathBuf>,
    manifest: Option<PathBuf>,
    band: &BandArgs,
    oracle_args: &OracleArgs,
    probe_args: &ProbeArgs,
    json: Option<PathBuf>,
) -> CliResult<()> {
    let ledger_path = required_path(ledger, &config.ledger, "ledger")?;
    let detector_path = required_path(detector, &config.detector, "detector")?;
    let ledger = load_ledger(&ledger_path)?;
    let detector = load_detector(&detector_path)?;
    let pool = trace_pool(manifest, config, band, &ledger)?;
    let probe = probe_args.resolve(&config.probe);
    let seed = Seed::new(config.seed);
    let oracle = build_oracle(
        &oracle_spec_from_args(oracle_args)?,
        &ledger,
        seed.derive("oracle"),
        oracle_args.render_size,
    )?;
    let report = trace_leaker(&oracle, &pool, &ledger, &detector, &probe, seed.derive("trace"))?;
    let artifact = Artifact::new(config.clone(), report);
    println!(
        "{}",
        artifact.to_json_pretty().map_err(anyhow::Error::from)?
    );
    if let Some(path) = json {
        write_artifact(&path, &artifact)?;
    }
    Ok(())
}

pub fn cmd_degrade(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    output: Option<PathBuf>,
    spec_args: &DegradeArgs,
    force: bool,
) -> CliResult<()> {
    let manifest_path = required_path(manifest, &config.manifest, "manifest")?;
    let output_dir = required_path(output, &config.output, "output")?;
    let source = load_manifest_cli(&manifest_path)?;
    if source.is_empty() {
        return Err(CliError::Input("release manifest is empty".into()));
    }
    let first = load_image(&resolve_image_path(&source, &source.pairs()[0]))
        .map_err(CliError::input)?;
    let spec = spec_args.to_spec(Seed::new(config.seed), first.dims());
    degrade_release(&source, &spec, &output_dir, force)?;
    write_artifact(
        &output_dir.join("release.json"),
        &Artifact::new(config.clone(), json!({ "degradation": spec })),
    )?;
    println!(
        "degraded {} images with {} into {}",
        source.len(),
        spec.kind_name(),
        output_dir.display()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_simulate(
    config: &RunConfig,
    users: usize,
    min_tokens: usize,
    max_tokens: usize,
    q: f64,
    r: f64,
    manifest: Option<PathBuf>,
    band: &BandArgs,
    scheme: &SchemeArgs,
    probe_args: &ProbeArgs,
    render_size: usize,
    json: Option<PathBuf>,
) -> CliResult<()> {
    let pool = match manifest.or_else(|| config.manifest.clone()) {
        Some(path) => pool_from_band(&load_manifest_cli(&path)?, band)?,
        None => marker_pool(),
    };
    let experiment = ExperimentConfig {
        users,
        min_tokens,
        max_tokens,
        trigger_fidelity: q,
        false_rate: r,
        render_width: render_size,
        render_height: render_size,
        scheme: scheme.resolve(&config.scheme),
        probe: probe_args.resolve(&config.probe),
        detector: DetectorTrainConfig::default(),
    };
    let report = run_tracking_experiment(&pool, &experiment, Seed::new(config.seed).derive("experiment"))?;
    print!("{}", tracking_table(&report));
    if let Some(path) = json {
        write_artifact(&path, &Artifact::new(config.clone(), report))?;
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_eval(
    config: &RunConfig,
    manifest: Option<PathBuf>,
    detector: Option<PathBuf>,
    retrain: bool,
    scheme: &SchemeArgs,
    sample: Option<usize>,
    json: Option<PathBuf>,
) -> CliResult<()> {
    let manifest_path = required_path(manifest, &config.manifest, "manifest")?;
    let source = load_manifest_cli(&manifest_path)?;
    if source.is_empty() {
        return Err(CliError::Input("manifest is empty".into()));
    }
    let fixed = if retrain {
        None
    } else {
        let detector_path = required_path(detector, &config.detector, "detector")?;
        Some(load_detector(&detector_path)?)
    };
    let eval_detector = match &fixed {
        Some(d) => EvalDetector::Fixed(d),
        None => EvalDetector::RetrainPerDegradation {
            epochs: 150,
            learning_rate: 0.1,
        },
    };
    let seed = Seed::new(config.seed);

    let take = sample.unwrap_or(source.len()).min(source.len());
    let originals: Vec<_> = source.pairs()[..take]
        .iter()
        .map(|pair| load_image(&resolve_image_path(&source, pair)).map_err(CliError::input))
        .collect::<CliResult<_>>()?;

    let template = scheme.resolve(&config.scheme);
    let user_scheme = template.instantiate(seed.derive("eval-key"));
    let dims = originals[0].dims();
    let specs = default_degradations(seed, ((dims.0 / 2).max(1), (dims.1 / 2).max(1)));
    let report = robustness_eval(&originals, &user_scheme, &eval_detector, &specs)?;
    print!("{}", robustness_table(&report));
    if let Some(path) = json {
        write_artifact(&path, &Artifact::new(config.clone(), report))?;
    }
    Ok(())
}

pub fn cmd_gen_fixture(
    config: &RunConfig,
    output: Option<PathBuf>,
    kind: FixtureKind,
    images: Option<usize>,
    size: Option<usize>,
    force: bool,
) -> CliResult<()> {
    let output_dir = required_path(output, &config.output, "output")?;
    prepare_output_dir(&output_dir, force)?;
    let seed = Seed::new(config.seed).derive("fixture");
    let manifest_path = match kind {
        FixtureKind::TokenCorpus => {
            write_token_corpus(&output_dir, size.unwrap_or(64), seed)?
        }
        FixtureKind::Robustness => write_robustness_corpus(
            &output_dir,
            images.unwrap_or(100),
            size.unwrap_or(512),
            seed,
        )?,
    };
    println!("wrote fixture manifest {}", manifest_path.display());
    Ok(())
}
