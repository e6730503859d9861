//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use tracemark_core::degrade::DegradeSpec;
use tracemark_core::harness::SchemeTemplate;
use tracemark_core::watermark::{DEFAULT_ADV_ETA, DEFAULT_ADV_STEPS};
use tracemark_core::{ProbeConfig, Seed};

#[derive(Parser, Debug)]
#[command(
    name = "tracemark",
    version,
    about = "Dataset watermarking, activation tokens, and leak tracing for image-caption datasets"
)]
pub struct Cli {
    /// Global seed; all randomness derives from it by labeled splits.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON config file with RunConfig fields; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Creation stamp recorded in ledger entries. Omitted by default so
    /// identical invocations produce identical bytes.
    #[arg(long, global = true)]
    pub created: Option<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Token frequencies over a manifest, filtered to a candidate band.
    Frequencies {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        band: BandArgs,
        /// Also write the table as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Assign distinct token sets and write one WAA release per user.
    Distribute {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        ledger: Option<PathBuf>,
        /// Directory receiving one release subdirectory per user.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Number of data users (T).
        #[arg(long)]
        users: usize,
        /// Minimum tokens per set (L).
        #[arg(long, default_value_t = 2)]
        min_tokens: usize,
        /// Maximum tokens per set (R).
        #[arg(long, default_value_t = 5)]
        max_tokens: usize,
        #[command(flatten)]
        band: BandArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        force: bool,
    },
    /// Prefix M captions with an activation token and watermark the pairs.
    InjectTwa {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Activation token; conflicts with --auto-token.
        #[arg(long, conflicts_with = "auto_token")]
        token: Option<String>,
        /// Construct a fresh token absent from the corpus vocabulary.
        #[arg(long)]
        auto_token: bool,
        /// Number of pairs to modify (M).
        #[arg(short = 'm', long)]
        count: usize,
        /// Take the first M pairs instead of sampling uniformly.
        #[arg(long)]
        first_m: bool,
        /// Also record the release in this ledger.
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        user_id: u64,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long)]
        force: bool,
    },
    /// Train the unified watermark detector on simulated generations.
    TrainDetector {
        /// Detector JSON output path.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 4)]
        substitute_models: usize,
        #[arg(long, default_value_t = 16)]
        samples_per_model: usize,
        #[arg(long, default_value_t = 150)]
        epochs: usize,
        #[arg(long, default_value_t = 0.1)]
        learning_rate: f64,
        #[arg(long, default_value_t = 128)]
        render_size: usize,
    },
    /// Probe one token against a suspected model.
    Probe {
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        detector: Option<PathBuf>,
        #[arg(long)]
        token: String,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Probe every candidate token and attribute the leak.
    Trace {
        #[arg(long)]
        ledger: Option<PathBuf>,
        #[arg(long)]
        detector: Option<PathBuf>,
        /// Recompute the candidate pool from this manifest; defaults to
        /// the union of ledger token sets.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        band: BandArgs,
        #[command(flatten)]
        oracle: OracleArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Apply one degradation to every image of a release.
    Degrade {
        /// Manifest of the release to damage.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        spec: DegradeArgs,
        #[arg(long)]
        force: bool,
    },
    /// Run the multi-user tracking experiment on simulated models.
    Simulate {
        #[arg(long, default_value_t = 100)]
        users: usize,
        #[arg(long, default_value_t = 2)]
        min_tokens: usize,
        #[arg(long, default_value_t = 5)]
        max_tokens: usize,
        /// Trigger fidelity q.
        #[arg(long, default_value_t = 0.95)]
        q: f64,
        /// False trigger rate r.
        #[arg(long, default_value_t = 0.02)]
        r: f64,
        /// Build the pool from this manifest; defaults to the bundled
        /// marker pool.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[command(flatten)]
        band: BandArgs,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        probe: ProbeArgs,
        #[arg(long, default_value_t = 128)]
        render_size: usize,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Detection-accuracy table under the five damage types.
    Eval {
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Detector applied to every row; superseded by --retrain.
        #[arg(long)]
        detector: Option<PathBuf>,
        /// Retrain the detector per degradation on half the degraded
        /// images and score the other half.
        #[arg(long)]
        retrain: bool,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Evaluate only the first N images.
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Write a deterministic fixture dataset.
    GenFixture {
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "token-corpus")]
        kind: FixtureKind,
        /// Image count (robustness fixture only).
        #[arg(long)]
        images: Option<usize>,
        /// Image side length in pixels.
        #[arg(long)]
        size: Option<usize>,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Args, Clone, Debug)]
pub struct BandArgs {
    /// Lower frequency bound for candidate tokens.
    #[arg(long, default_value_t = 0.009)]
    pub f_min: f64,
    /// Upper frequency bound for candidate tokens.
    #[arg(long, default_value_t = 0.018)]
    pub f_max: f64,
    /// Candidate pool size (k).
    #[arg(long, default_value_t = 10)]
    pub pool_size: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchemeKind {
    Gaussian,
    Dwt,
    Adversarial,
}

/// Scheme flags. Gaussian sigma and DWT amplitudes are taken on the 8-bit
/// scale and divided by 255; the adversarial budget is already normalized.
#[derive(Args, Clone, Debug)]
pub struct SchemeArgs {
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeKind>,
    /// Gaussian mean (8-bit scale).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Gaussian standard deviation (8-bit scale).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// DWT amplitude lower bound (8-bit scale).
    #[arg(long)]
    pub amp_low: Option<f64>,
    /// DWT amplitude upper bound (8-bit scale).
    #[arg(long)]
    pub amp_high: Option<f64>,
    /// Adversarial noise budget (normalized).
    #[arg(long)]
    pub eta: Option<f64>,
    /// PGD iteration count.
    #[arg(long)]
    pub steps: Option<usize>,
}

impl SchemeArgs {
    /// Resolves flags over the config-file template; flags win.
    pub fn resolve(&self, base: &SchemeTemplate) -> SchemeTemplate {
        let kind = self.scheme.unwrap_or(match base {
            SchemeTemplate::Gaussian { .. } => SchemeKind::Gaussian,
            SchemeTemplate::Dwt { .. } => SchemeKind::Dwt,
            SchemeTemplate::Adversarial { .. } => SchemeKind::Adversarial,
        });
        match kind {
            SchemeKind::Gaussian => {
                let (base_mean, base_sigma) = match base {
                    SchemeTemplate::Gaussian { mean, sigma } => (*mean, *sigma),
                    _ => (0.0, 5.0 / 255.0),
                };
                SchemeTemplate::Gaussian {
                    mean: self.mu.map(|m| m / 255.0).unwrap_or(base_mean),
                    sigma: self.sigma.map(|s| s / 255.0).unwrap_or(base_sigma),
                }
            }
            SchemeKind::Dwt => {
                let (base_low, base_high) = match base {
                    SchemeTemplate::Dwt { amp_low, amp_high } => (*amp_low, *amp_high),
                    _ => (0.0, 10.0 / 255.0),
                };
                SchemeTemplate::Dwt {
                    amp_low: self.amp_low.map(|a| a / 255.0).unwrap_or(base_low),
                    amp_high: self.amp_high.map(|a| a / 255.0).unwrap_or(base_high),
                }
            }
            SchemeKind::Adversarial => {
                let (base_eta, base_steps) = match base {
                    SchemeTemplate::Adversarial { eta, steps } => (*eta, *steps),
                    _ => (DEFAULT_ADV_ETA, DEFAULT_ADV_STEPS),
                };
                SchemeTemplate::Adversarial {
                    eta: self.eta.unwrap_or(base_eta),
                    steps: self.steps.unwrap_or(base_steps),
                }
            }
        }
    }
}

#[derive(Args, Clone, Debug)]
pub struct ProbeArgs {
    /// Generations per probed token (K).
    #[arg(long)]
    pub generations: Option<usize>,
    /// Trigger threshold tau in (0, 1].
    #[arg(long)]
    pub tau: Option<f64>,
    /// Task prompt appended after the probed token.
    #[arg(long)]
    pub prompt_stub: Option<String>,
}

impl ProbeArgs {
    pub fn resolve(&self, base: &ProbeConfig) -> ProbeConfig {
        ProbeConfig {
            generations: self.generations.unwrap_or(base.generations),
            tau: self.tau.unwrap_or(base.tau),
            prompt_stub: self
                .prompt_stub
                .clone()
                .unwrap_or_else(|| base.prompt_stub.clone()),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    Clean,
    User,
}

#[derive(Args, Clone, Debug)]
pub struct OracleArgs {
    /// Suspected model kind.
    #[arg(long, value_enum, default_value = "user")]
    pub oracle: OracleKind,
    /// Ledger user the oracle was "fine-tuned" for.
    #[arg(long)]
    pub oracle_user: Option<u64>,
    /// Trigger fidelity q.
    #[arg(long, default_value_t = 1.0)]
    pub q: f64,
    /// False trigger rate r.
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    /// Remove these tokens from the oracle's trigger set.
    #[arg(long)]
    pub drop_token: Vec<String>,
    /// Render side length of generated images.
    #[arg(long, default_value_t = 128)]
    pub render_size: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum DegradeMethod {
    Jpeg,
    Sharpen,
    Noise,
    Blur,
    Resize,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum NoiseScale {
    /// Variance stated on 0..255 values (divided by 255^2 on ingestion).
    EightBit,
    /// Variance stated on normalized 0..1 values.
    Unit,
}

/// Degradation flags with the reference parameters preloaded: JPEG quality
/// 5, sharpen factor 10, noise mean 0 / variance 1 on the 8-bit scale,
/// blur sigma 1, resize to half and back.
#[derive(Args, Clone, Debug)]
pub struct DegradeArgs {
    #[arg(long, value_enum)]
    pub method: DegradeMethod,
    #[arg(long, default_value_t = 5)]
    pub quality: u8,
    #[arg(long, default_value_t = 10.0)]
    pub factor: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise_mean: f64,
    #[arg(long, default_value_t = 1.0)]
    pub noise_variance: f64,
    /// Scale the noise variance is stated on; the 8-bit reading is the
    /// default interpretation of "variance 1".
    #[arg(long, value_enum, default_value = "eight-bit")]
    pub noise_scale: NoiseScale,
    #[arg(long, default_value_t = 1.0)]
    pub blur_sigma: f64,
    /// Downscale target; defaults to half the source dimensions.
    #[arg(long)]
    pub down_width: Option<usize>,
    #[arg(long)]
    pub down_height: Option<usize>,
}

impl DegradeArgs {
    pub fn to_spec(&self, seed: Seed, source_dims: (usize, usize)) -> DegradeSpec {
        match self.method {
            DegradeMethod::Jpeg => DegradeSpec::Jpeg {
                quality: self.quality,
            },
            DegradeMethod::Sharpen => DegradeSpec::Sharpen {
                factor: self.factor,
            },
            DegradeMethod::Noise => {
                let scale: f64 = match self.noise_scale {
                    NoiseScale::EightBit => 255.0 * 255.0,
                    NoiseScale::Unit => 1.0,
                };
                DegradeSpec::GaussianNoise {
                    mean: self.noise_mean / scale.sqrt(),
                    variance: self.noise_variance / scale,
                    seed: seed.derive("degrade"),
                }
            }
            DegradeMethod::Blur => DegradeSpec::GaussianBlur {
                sigma: self.blur_sigma,
            },
            DegradeMethod::Resize => DegradeSpec::ResizeRoundtrip {
                down_width: self.down_width.unwrap_or((source_dims.0 / 2).max(1)),
                down_height: self.down_height.unwrap_or((source_dims.1 / 2).max(1)),
            },
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixtureKind {
    /// 1000 caption pairs with the marker-token frequency profile.
    TokenCorpus,
    /// N large renders with neutral captions.
    Robustness,
}
