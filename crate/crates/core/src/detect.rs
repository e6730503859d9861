//! Watermark detector and the activation-and-detection protocol.
//!
//! The detector is logistic regression over wavelet-statistic features,
//! trained with binary cross-entropy by full-batch gradient descent.
//! Features are per-dimension z-scored with statistics frozen at training
//! time, so a serialized detector is self-contained.
//!
//! Tracing enumerates the candidate pool, probes the suspected model with
//! each token, and attributes the leak to the user whose ledger token set
//! exactly equals the triggered set.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::authorize::Ledger;
use crate::error::{Error, Result};
use crate::raster::{Image, CHANNELS};
use crate::seed::Seed;
use crate::tokens::{tokenize, CandidatePool};
use crate::wavelet::dwt2_haar;

/// 3 channels x 3 detail subbands x 4 statistics + global pixel variance.
pub const FEATURE_LEN: usize = 37;
pub const FEATURE_SPEC: &str = "haar-detail-stats/37";

const PROB_EPS: f64 = 1e-7;

fn moment_stats(data: &[f64]) -> [f64; 4] {
    let n = data.len() as f64;
    if data.is_empty() {
        return [0.0; 4];
    }
    let mean = data.iter().sum::<f64>() / n;
    let mut m2 = 0.0;
    let mut m4 = 0.0;
    let mut mean_abs = 0.0;
    for &v in data {
        let d = v - mean;
        m2 += d * d;
        m4 += d * d * d * d;
        mean_abs += v.abs();
    }
    m2 /= n;
    m4 /= n;
    mean_abs /= n;
    // Excess kurtosis; zero-variance data is pinned at 0 by convention.
    let kurtosis = if m2 == 0.0 { 0.0 } else { m4 / (m2 * m2) - 3.0 };
    [mean, m2, mean_abs, kurtosis]
}

/// Fixed-length wavelet-statistic feature vector.
///
/// Layout: for each channel, for each of (cH, cV, cD), the four statistics
/// (mean, variance, mean absolute value, excess kurtosis); the final slot
/// is the variance of all pixels.
pub fn extract_features(img: &Image) -> Vec<f64> {
    let mut out = Vec::with_capacity(FEATURE_LEN);
    for c in 0..CHANNELS {
        match dwt2_haar(&img.channel(c)) {
            Ok(bands) => {
                for band in [&bands.ch, &bands.cv, &bands.cd] {
                    out.extend_from_slice(&moment_stats(band.data()));
                }
            }
            Err(_) => out.extend_from_slice(&[0.0; 12]),
        }
    }
    let pixel_stats = moment_stats(img.pixels());
    out.push(pixel_stats[1]);
    debug_assert_eq!(out.len(), FEATURE_LEN);
    out
}

/// Mean binary cross-entropy with predictions clipped to
/// `[1e-7, 1 - 1e-7]`.
pub fn bce_loss(predictions: &[f64], labels: &[u8]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: labels.len(),
        });
    }
    let n = predictions.len() as f64;
    let mut total = 0.0;
    for (&p, &y) in predictions.iter().zip(labels.iter()) {
        let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
        total += if y == 1 {
            libm::log(p)
        } else {
            libm::log(1.0 - p)
        };
    }
    Ok(-total / n)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: u8,
}

/// Logistic-regression watermark detector with frozen standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feat_mean: Vec<f64>,
    pub feat_std: Vec<f64>,
    pub threshold: f64,
    pub feature_spec: String,
}

impl Detector {
    fn standardize(&self, features: &[f64]) -> Vec<f64> {
        features
            .iter()
            .zip(self.feat_mean.iter().zip(self.feat_std.iter()))
            .map(|(&x, (&m, &s))| (x - m) / s)
            .collect()
    }

    /// Probability that the image behind these features carries a
    /// watermark.
    pub fn predict_proba(&self, features: &[f64]) -> f64 {
        let z = self.standardize(features);
        let logit: f64 = self
            .weights
            .iter()
            .zip(z.iter())
            .map(|(w, x)| w * x)
            .sum::<f64>()
            + self.bias;
        sigmoid(logit)
    }

    /// Decision at the configured threshold.
    pub fn flags(&self, features: &[f64]) -> bool {
        self.predict_proba(features) >= self.threshold
    }

    /// Weights and bias folded into raw (unstandardized) feature space.
    /// Probabilities are invariant under this re-expression.
    pub fn raw_weights(&self) -> (Vec<f64>, f64) {
        let weights: Vec<f64> = self
            .weights
            .iter()
            .zip(self.feat_std.iter())
            .map(|(w, s)| w / s)
            .collect();
        let bias = self.bias
            - self
                .weights
                .iter()
                .zip(self.feat_mean.iter().zip(self.feat_std.iter()))
                .map(|(w, (m, s))| w * m / s)
                .sum::<f64>();
        (weights, bias)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

/// Full-batch gradient descent on the BCE loss. Returns the detector and
/// the per-epoch loss trace (recorded after each update).
pub fn train_detector(
    samples: &[LabeledSample],
    epochs: usize,
    learning_rate: f64,
) -> Result<(Detector, Vec<f64>)> {
    let has_pos = samples.iter().any(|s| s.label == 1);
    let has_neg = samples.iter().any(|s| s.label == 0);
    if !has_pos || !has_neg {
        return Err(Error::SingleClassTrainingSet);
    }
    let dim = samples[0].features.len();
    for s in samples {
        if s.features.len() != dim {
            return Err(Error::LengthMismatch {
                left: dim,
                right: s.features.len(),
            });
        }
    }
    let n = samples.len() as f64;

    let mut feat_mean = alloc::vec![0.0f64; dim];
    for s in samples {
        for (m, &x) in feat_mean.iter_mut().zip(&s.features) {
            *m += x;
        }
    }
    for m in feat_mean.iter_mut() {
        *m /= n;
    }
    let mut feat_std = alloc::vec![0.0f64; dim];
    for s in samples {
        for ((v, &x), &m) in feat_std.iter_mut().zip(&s.features).zip(&feat_mean) {
            *v += (x - m) * (x - m);
        }
    }
    for v in feat_std.iter_mut() {
        *v = libm::sqrt(*v / n);
        if *v == 0.0 {
            *v = 1.0;
        }
    }

    let standardized: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| {
            s.features
                .iter()
                .zip(feat_mean.iter().zip(feat_std.iter()))
                .map(|(&x, (&m, &sd))| (x - m) / sd)
                .collect()
        })
        .collect();
    let labels: Vec<u8> = samples.iter().map(|s| s.label).collect();

    let mut weights = alloc::vec![0.0f64; dim];
    let mut bias = 0.0f64;
    let mut trace = Vec::with_capacity(epochs);
    let mut predictions = alloc::vec![0.0f64; samples.len()];

    for epoch in 0..epochs {
        for (p, z) in predictions.iter_mut().zip(standardized.iter()) {
            let logit: f64 =
                weights.iter().zip(z.iter()).map(|(w, x)| w * x).sum::<f64>() + bias;
            *p = sigmoid(logit);
        }
        let mut grad_w = alloc::vec![0.0f64; dim];
        let mut grad_b = 0.0f64;
        for (z, (&p, &y)) in standardized.iter().zip(predictions.iter().zip(labels.iter())) {
            let err = p - f64::from(y);
            for (g, &x) in grad_w.iter_mut().zip(z.iter()) {
                *g += err * x;
            }
            grad_b += err;
        }
        for (w, g) in weights.iter_mut().zip(grad_w.iter()) {
            *w -= learning_rate * g / n;
        }
        bias -= learning_rate * grad_b / n;

        for (p, z) in predictions.iter_mut().zip(standardized.iter()) {
            let logit: f64 =
                weights.iter().zip(z.iter()).map(|(w, x)| w * x).sum::<f64>() + bias;
            *p = sigmoid(logit);
        }
        let loss = bce_loss(&predictions, &labels)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        trace.push(loss);
    }

    Ok((
        Detector {
            weights,
            bias,
            feat_mean,
            feat_std,
            threshold: 0.5,
            feature_spec: String::from(FEATURE_SPEC),
        },
        trace,
    ))
}

/// A suspected text-to-image model behind a generation interface.
/// Implementations must be deterministic in (prompt, rng).
pub trait ModelOracle {
    fn generate(&self, prompt: &[String], rng: Seed) -> Image;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Generations per probed token (K).
    pub generations: usize,
    /// Flagged fraction at or above which the token counts as triggering.
    pub tau: f64,
    /// Task prompt appended after the probed token.
    pub prompt_stub: String,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            generations: 16,
            tau: 0.5,
            prompt_stub: String::from("A painting in the style of Baroque"),
        }
    }
}

/// Vote record for one probed token.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenVote {
    pub token: String,
    pub flagged: usize,
    pub generations: usize,
    pub triggered: bool,
}

/// Realizes P(v, M): prompts the model K times with
/// `"<token>, <prompt_stub>"` and majority-votes the detector decisions at
/// threshold tau.
pub fn probe_token<O: ModelOracle + ?Sized>(
    oracle: &O,
    token: &str,
    detector: &Detector,
    config: &ProbeConfig,
    rng: Seed,
) -> TokenVote {
    let prompt = tokenize(&format!("{token}, {}", config.prompt_stub));
    let mut flagged = 0usize;
    for k in 0..config.generations {
        let img = oracle.generate(&prompt, rng.derive_index(k as u64));
        if detector.flags(&extract_features(&img)) {
            flagged += 1;
        }
    }
    let triggered =
        (flagged as f64 / config.generations as f64) >= config.tau;
    TokenVote {
        token: String::from(token),
        flagged,
        generations: config.generations,
        triggered,
    }
}

/// Attribution outcome of one trace run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum TraceOutcome {
    Traced { user_id: u64 },
    NoWatermarkFound,
    NoLedgerMatch { triggered: Vec<String> },
    /// Unreachable when ledger token sets are pairwise distinct, which
    /// [`trace_leaker`] enforces up front.
    Ambiguous { user_ids: Vec<u64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub outcome: TraceOutcome,
    pub triggered_tokens: Vec<String>,
    pub per_token_votes: Vec<TokenVote>,
}

/// Probes every pool token, forms the triggered set W, and attributes the
/// leak to the user whose token set equals W exactly.
pub fn trace_leaker<O: ModelOracle + ?Sized>(
    oracle: &O,
    pool: &CandidatePool,
    ledger: &Ledger,
    detector: &Detector,
    config: &ProbeConfig,
    rng: Seed,
) -> Result<TraceReport> {
    ledger.check_distinct_token_sets()?;
    let probe_rng = rng.derive("probe");
    let votes: Vec<TokenVote> = pool
        .tokens()
        .iter()
        .enumerate()
        .map(|(i, token)| probe_token(oracle, token, detector, config, probe_rng.derive_index(i as u64)))
        .collect();
    let triggered: Vec<String> = votes
        .iter()
        .filter(|v| v.triggered)
        .map(|v| v.token.clone())
        .collect();

    let outcome = if triggered.is_empty() {
        TraceOutcome::NoWatermarkFound
    } else {
        let matches: Vec<u64> = ledger
            .entries()
            .iter()
            .filter(|e| e.token_set.matches(&triggered))
            .map(|e| e.user_id)
            .collect();
        match matches.as_slice() {
            [] => TraceOutcome::NoLedgerMatch {
                triggered: triggered.clone(),
            },
            [user_id] => TraceOutcome::Traced { user_id: *user_id },
            _ => TraceOutcome::Ambiguous { user_ids: matches },
        }
    };
    Ok(TraceReport {
        outcome,
        triggered_tokens: triggered,
        per_token_votes: votes,
    })
}
