//! Detection-accuracy evaluation under transmission damage.
//!
//! For each degradation the detector is scored on degraded marked images
//! against degraded clean images; for the DWT scheme the informed presence
//! score against the undegraded original is reported alongside.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tracemark_core::degrade::{apply_degradation, DegradeSpec};
use tracemark_core::watermark::{dwt_score, WatermarkScheme};
use tracemark_core::{extract_features, train_detector, Detector, Image, LabeledSample, Seed};

use crate::error::CliResult;
use crate::release::per_image_spec;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvalRow {
    pub degradation: String,
    /// (correctly flagged marked + correctly passed clean) / (2 * n).
    pub accuracy: f64,
    pub marked_flagged: usize,
    pub clean_flagged: usize,
    pub images_per_class: usize,
    /// Mean informed score of degraded marked images against their
    /// originals; DWT scheme only.
    pub mean_informed_score: Option<f64>,
    /// Fraction of images whose informed score stays at or above 0.5.
    pub frac_informed_ge_half: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RobustnessReport {
    /// Accuracy on undegraded images, for reference.
    pub baseline_accuracy: f64,
    pub rows: Vec<EvalRow>,
}

/// The five damage types at their reference parameters. Noise variance 1
/// is interpreted on the 8-bit scale; `resize_to` names the downscale
/// target (classically half of a 512x512 source).
pub fn default_degradations(seed: Seed, resize_to: (usize, usize)) -> Vec<DegradeSpec> {
    vec![
        DegradeSpec::Jpeg { quality: 5 },
        DegradeSpec::Sharpen { factor: 10.0 },
        DegradeSpec::GaussianNoise {
            mean: 0.0,
            variance: 1.0 / (255.0 * 255.0),
            seed: seed.derive("eval-noise"),
        },
        DegradeSpec::GaussianBlur { sigma: 1.0 },
        DegradeSpec::ResizeRoundtrip {
            down_width: resize_to.0,
            down_height: resize_to.1,
        },
    ]
}

fn accuracy(
    detector: &Detector,
    marked: &[Image],
    clean: &[Image],
) -> (f64, usize, usize) {
    let marked_flagged = marked
        .par_iter()
        .filter(|img| detector.flags(&extract_features(img)))
        .count();
    let clean_flagged = clean
        .par_iter()
        .filter(|img| detector.flags(&extract_features(img)))
        .count();
    let n = marked.len() + clean.len();
    let correct = marked_flagged + (clean.len() - clean_flagged);
    (correct as f64 / n as f64, marked_flagged, clean_flagged)
}

/// How each degradation row is scored.
pub enum EvalDetector<'a> {
    /// One detector, trained elsewhere, applied to every row.
    Fixed(&'a Detector),
    /// Retrain per degradation on the even-indexed half of the degraded
    /// populations and score the odd-indexed half, mirroring the
    /// retrain-after-damage robustness protocol.
    RetrainPerDegradation { epochs: usize, learning_rate: f64 },
}

fn split_halves(images: &[Image]) -> (Vec<&Image>, Vec<&Image>) {
    let train = images.iter().step_by(2).collect();
    let test = images.iter().skip(1).step_by(2).collect();
    (train, test)
}

fn retrained_accuracy(
    marked: &[Image],
    clean: &[Image],
    epochs: usize,
    learning_rate: f64,
) -> CliResult<(f64, usize, usize, usize)> {
    let (marked_train, marked_test) = split_halves(marked);
    let (clean_train, clean_test) = split_halves(clean);
    let mut samples: Vec<LabeledSample> = Vec::new();
    for img in marked_train {
        samples.push(LabeledSample {
            features: extract_features(img),
            label: 1,
        });
    }
    for img in clean_train {
        samples.push(LabeledSample {
            features: extract_features(img),
            label: 0,
        });
    }
    let (detector, _) = train_detector(&samples, epochs, learning_rate)?;
    let marked_flagged = marked_test
        .par_iter()
        .filter(|img| detector.flags(&extract_features(img)))
        .count();
    let clean_flagged = clean_test
        .par_iter()
        .filter(|img| detector.flags(&extract_features(img)))
        .count();
    let n = marked_test.len() + clean_test.len();
    let correct = marked_flagged + (clean_test.len() - clean_flagged);
    Ok((
        correct as f64 / n as f64,
        marked_flagged,
        clean_flagged,
        marked_test.len(),
    ))
}

/// Embeds the scheme into every original, degrades both populations with
/// each spec, and scores detection. Deterministic in its inputs.
pub fn robustness_eval(
    originals: &[Image],
    scheme: &WatermarkScheme,
    detector: &EvalDetector,
    specs: &[DegradeSpec],
) -> CliResult<RobustnessReport> {
    let marked: Vec<Image> = originals.par_iter().map(|img| scheme.embed(img)).collect();
    let score = |marked: &[Image], clean: &[Image]| -> CliResult<(f64, usize, usize, usize)> {
        match detector {
            EvalDetector::Fixed(d) => {
                let (acc, mf, cf) = accuracy(d, marked, clean);
                Ok((acc, mf, cf, marked.len()))
            }
            EvalDetector::RetrainPerDegradation {
                epochs,
                learning_rate,
            } => retrained_accuracy(marked, clean, *epochs, *learning_rate),
        }
    };
    let (baseline_accuracy, _, _, _) = score(&marked, originals)?;

    let mut rows = Vec::with_capacity(specs.len());
    for spec in specs {
        let degraded_marked: Vec<Image> = marked
            .par_iter()
            .enumerate()
            .map(|(i, img)| apply_degradation(img, &per_image_spec(spec, i)))
            .collect::<Result<_, _>>()?;
        let clean_spec = match spec {
            DegradeSpec::GaussianNoise { seed, .. } => spec.reseeded(seed.derive("clean-side")),
            other => other.clone(),
        };
        let degraded_clean: Vec<Image> = originals
            .par_iter()
            .enumerate()
            .map(|(i, img)| apply_degradation(img, &per_image_spec(&clean_spec, i)))
            .collect::<Result<_, _>>()?;

        let (acc, marked_flagged, clean_flagged, per_class) =
            score(&degraded_marked, &degraded_clean)?;

        let (mean_informed_score, frac_informed_ge_half) = match scheme {
            WatermarkScheme::Dwt(key) => {
                let scores: Vec<f64> = degraded_marked
                    .par_iter()
                    .zip(originals.par_iter())
                    .map(|(dm, orig)| dwt_score(dm, Some(orig), key))
                    .collect::<Result<_, _>>()?;
                let mean = scores.iter().sum::<f64>() / scores.len() as f64;
                let ge_half =
                    scores.iter().filter(|&&s| s >= 0.5).count() as f64 / scores.len() as f64;
                (Some(mean), Some(ge_half))
            }
            _ => (None, None),
        };

        rows.push(EvalRow {
            degradation: spec.kind_name().to_string(),
            accuracy: acc,
            marked_flagged,
            clean_flagged,
            images_per_class: per_class,
            mean_informed_score,
            frac_informed_ge_half,
        });
    }
    Ok(RobustnessReport {
        baseline_accuracy,
        rows,
    })
}
