//! Image watermark embedding schemes and the informed presence score.
//!
//! Three schemes are supported: additive white Gaussian noise, additive
//! perturbation of the horizontal-detail wavelet coefficients under a
//! seeded key matrix, and projected gradient ascent against a surrogate
//! loss under an l-infinity budget. Every scheme is a pure function of
//! (image, parameters, seed); embedding the same image twice yields
//! bit-identical output.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{correlation, Matrix};
use crate::raster::{clamp_unit, Image, CHANNELS};
use crate::seed::Seed;
use crate::surrogate::SurrogateModel;

/// Reference Gaussian standard deviation (8-bit value 5, normalized).
pub const DEFAULT_GAUSSIAN_SIGMA: f64 = 5.0 / 255.0;
/// Reference DWT key amplitude range (8-bit values 0..10, normalized).
pub const DEFAULT_DWT_AMP: (f64, f64) = (0.0, 10.0 / 255.0);
/// Reference adversarial noise budget.
pub const DEFAULT_ADV_ETA: f64 = 0.05;
/// Default PGD iteration count.
pub const DEFAULT_ADV_STEPS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: f64,
    pub sigma: f64,
    pub seed: Seed,
}

impl GaussianParams {
    pub fn new(mean: f64, sigma: f64, seed: Seed) -> Self {
        debug_assert!(sigma >= 0.0);
        GaussianParams { mean, sigma, seed }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwtKey {
    pub seed: Seed,
    pub amp_low: f64,
    pub amp_high: f64,
}

impl DwtKey {
    pub fn new(seed: Seed, amp_low: f64, amp_high: f64) -> Self {
        debug_assert!(amp_low <= amp_high);
        DwtKey {
            seed,
            amp_low,
            amp_high,
        }
    }

    /// The key matrix W for subband dimensions `rows x cols`: entries
    /// uniform in `[amp_low, amp_high]`, deterministic in (seed, dims).
    /// Sampling directly at the target dimensions stands in for resizing a
    /// fixed-size matrix and avoids picking a resampling kernel.
    pub fn key_matrix(&self, rows: usize, cols: usize) -> Matrix {
        let mut rng = self
            .seed
            .derive("dwt-key")
            .derive_index(rows as u64)
            .derive_index(cols as u64)
            .rng();
        if self.amp_low == self.amp_high {
            return Matrix::from_fn(rows, cols, |_, _| self.amp_low);
        }
        Matrix::from_fn(rows, cols, |_, _| {
            rng.gen_range(self.amp_low..=self.amp_high)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdversarialParams {
    /// l-infinity budget for the perturbation.
    pub eta: f64,
    pub steps: usize,
    pub step_size: f64,
}

impl AdversarialParams {
    /// FGSM-iterated defaults: `step_size = eta / steps`.
    pub fn new(eta: f64, steps: usize) -> Self {
        let step_size = if steps == 0 { eta } else { eta / steps as f64 };
        AdversarialParams {
            eta,
            steps,
            step_size,
        }
    }

    pub fn with_step_size(mut self, step_size: f64) -> Self {
        debug_assert!(step_size <= self.eta);
        self.step_size = step_size;
        self
    }
}

/// Per-user watermark scheme: the `W_i(.)` applied to every selected image
/// of user i's release.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "SchemeRepr", into = "SchemeRepr")]
pub enum WatermarkScheme {
    Gaussian(GaussianParams),
    Dwt(DwtKey),
    Adversarial {
        params: AdversarialParams,
        /// Seeds the surrogate operator; the surrogate itself is anchored
        /// per image at embed time.
        operator_seed: Seed,
    },
}

impl WatermarkScheme {
    pub fn embed(&self, img: &Image) -> Image {
        match self {
            WatermarkScheme::Gaussian(p) => embed_gaussian(img, p),
            WatermarkScheme::Dwt(k) => embed_dwt(img, k),
            WatermarkScheme::Adversarial {
                params,
                operator_seed,
            } => {
                let surrogate = SurrogateModel::new(*operator_seed, img.clone());
                let (out, _) = embed_adversarial(img, &surrogate, params)
                    .expect("surrogate anchored at the input image");
                out
            }
        }
    }

    /// The seed that identifies this scheme instance in a ledger.
    pub fn seed(&self) -> Seed {
        match self {
            WatermarkScheme::Gaussian(p) => p.seed,
            WatermarkScheme::Dwt(k) => k.seed,
            WatermarkScheme::Adversarial { operator_seed, .. } => *operator_seed,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            WatermarkScheme::Gaussian(_) => "gaussian",
            WatermarkScheme::Dwt(_) => "dwt",
            WatermarkScheme::Adversarial { .. } => "adversarial",
        }
    }
}

/// Ledger wire form of a scheme, e.g.
/// `{"kind":"dwt","seed":1234,"amp":[0.0,0.0392]}`.
#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SchemeRepr {
    Gaussian { seed: u64, mu: f64, sigma: f64 },
    Dwt { seed: u64, amp: [f64; 2] },
    Adversarial {
        operator_seed: u64,
        eta: f64,
        steps: usize,
        step_size: f64,
    },
}

impl From<SchemeRepr> for WatermarkScheme {
    fn from(r: SchemeRepr) -> Self {
        match r {
            SchemeRepr::Gaussian { seed, mu, sigma } => {
                WatermarkScheme::Gaussian(GaussianParams::new(mu, sigma, Seed(seed)))
            }
            SchemeRepr::Dwt { seed, amp } => {
                WatermarkScheme::Dwt(DwtKey::new(Seed(seed), amp[0], amp[1]))
            }
            SchemeRepr::Adversarial {
                operator_seed,
                eta,
                steps,
                step_size,
            } => WatermarkScheme::Adversarial {
                params: AdversarialParams::new(eta, steps).with_step_size(step_size),
                operator_seed: Seed(operator_seed),
            },
        }
    }
}

impl From<WatermarkScheme> for SchemeRepr {
    fn from(s: WatermarkScheme) -> Self {
        match s {
            WatermarkScheme::Gaussian(p) => SchemeRepr::Gaussian {
                seed: p.seed.value(),
                mu: p.mean,
                sigma: p.sigma,
            },
            WatermarkScheme::Dwt(k) => SchemeRepr::Dwt {
                seed: k.seed.value(),
                amp: [k.amp_low, k.amp_high],
            },
            WatermarkScheme::Adversarial {
                params,
                operator_seed,
            } => SchemeRepr::Adversarial {
                operator_seed: operator_seed.value(),
                eta: params.eta,
                steps: params.steps,
                step_size: params.step_size,
            },
        }
    }
}

/// `x' = clamp(x + z)` with `z ~ N(mean, sigma^2)` i.i.d. per sample,
/// drawn from the params seed.
pub fn embed_gaussian(img: &Image, p: &GaussianParams) -> Image {
    let normal = Normal::new(p.mean, p.sigma).expect("sigma >= 0");
    let mut rng = p.seed.derive("gaussian-noise").rng();
    let mut out = img.clone();
    for v in out.pixels_mut() {
        *v += normal.sample(&mut rng);
    }
    clamp_unit(out)
}

/// Adds the key matrix to the horizontal-detail coefficients of every
/// channel, then reconstructs and clamps.
///
/// By linearity of the synthesis this equals adding the synthesized
/// W-only detail pattern directly in pixel space, which is what the
/// implementation does: each key entry spreads as +W/2 over its block's
/// top row and -W/2 over the bottom row. The literal
/// analyze-add-synthesize route is kept as a test cross-check.
pub fn embed_dwt(img: &Image, key: &DwtKey) -> Image {
    if img.width() == 0 || img.height() == 0 {
        return img.clone();
    }
    let (width, height) = img.dims();
    let (rows, cols) = (height.div_ceil(2), width.div_ceil(2));
    let w = key.key_matrix(rows, cols);
    let mut out = img.clone();
    let pixels = out.pixels_mut();
    for y in 0..height {
        let w_row = &w.data()[(y / 2) * cols..(y / 2 + 1) * cols];
        let sign = if y % 2 == 0 { 0.5 } else { -0.5 };
        let row = &mut pixels[y * width * CHANNELS..(y + 1) * width * CHANNELS];
        for x in 0..width {
            let delta = sign * w_row[x / 2];
            for c in 0..CHANNELS {
                row[x * CHANNELS + c] += delta;
            }
        }
    }
    clamp_unit(out)
}

/// The literal analyze-add-synthesize route; used to cross-check the
/// fused pixel-space embedding.
#[cfg(test)]
fn embed_dwt_via_transform(img: &Image, key: &DwtKey) -> Image {
    let mut out = img.clone();
    let mut w: Option<Matrix> = None;
    for c in 0..CHANNELS {
        let mut bands = crate::wavelet::dwt2_haar(&img.channel(c)).expect("non-empty channel");
        let (rows, cols) = bands.subband_dims();
        let w = w.get_or_insert_with(|| key.key_matrix(rows, cols));
        bands.ch.add_assign(w).expect("key matches subband dims");
        let rebuilt = crate::wavelet::idwt2_haar(&bands).expect("subbands agree");
        out.set_channel(c, &rebuilt).expect("dims preserved");
    }
    clamp_unit(out)
}

/// Correlation-based presence score in `[-1, 1]`.
///
/// Informed mode (original present) correlates the horizontal-detail
/// residual against the key matrix; with an unsaturated additive embedding
/// the residual is exactly W and the score is 1. Blind mode correlates the
/// suspect's detail band directly. Scores are averaged over channels.
pub fn dwt_score(suspect: &Image, original: Option<&Image>, key: &DwtKey) -> Result<f64> {
    if let Some(orig) = original {
        if orig.dims() != suspect.dims() {
            return Err(Error::DimensionMismatch {
                expected: suspect.dims(),
                got: orig.dims(),
            });
        }
    }
    let mut w: Option<Matrix> = None;
    let mut total = 0.0;
    for c in 0..CHANNELS {
        let ch_suspect = crate::wavelet::dwt2_haar(&suspect.channel(c))?.ch;
        let residual = match original {
            Some(orig) => {
                let ch_orig = crate::wavelet::dwt2_haar(&orig.channel(c))?.ch;
                let mut r = ch_suspect;
                for (a, b) in r.data_mut().iter_mut().zip(ch_orig.data().iter()) {
                    *a -= b;
                }
                r
            }
            None => ch_suspect,
        };
        let (rows, cols) = residual.dims();
        let w = w.get_or_insert_with(|| key.key_matrix(rows, cols));
        total += correlation(&residual, w)?;
    }
    Ok(total / CHANNELS as f64)
}

/// Outcome trail of one projected-gradient-ascent embedding.
#[derive(Clone, Debug)]
pub struct PgdReport {
    /// `max |delta|` after each iterate; never exceeds eta by construction.
    pub iterate_linf: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

/// Sign-gradient ascent on the surrogate loss, projected onto the
/// l-infinity ball of radius eta, followed by a single clamp to `[0, 1]`.
///
/// At an exactly-zero gradient (the anchor is the loss minimum, so the
/// first iterate starts there) the ascent direction is undefined; a seeded
/// +-1 dither field breaks the tie so the iteration can leave the minimum.
pub fn embed_adversarial(
    img: &Image,
    surrogate: &SurrogateModel,
    p: &AdversarialParams,
) -> Result<(Image, PgdReport)> {
    let initial_loss = surrogate.loss(img)?;
    let n = img.sample_count();
    let mut delta = alloc::vec![0.0f64; n];
    let mut iterate_linf = Vec::with_capacity(p.steps);

    for step in 0..p.steps {
        let current = offset_image(img, &delta);
        let grad = surrogate.grad(&current)?;
        let all_zero = grad.iter().all(|&g| g == 0.0);
        let mut linf = 0.0f64;
        if all_zero {
            let mut rng = surrogate
                .seed()
                .derive("pgd-dither")
                .derive_index(step as u64)
                .rng();
            for d in delta.iter_mut() {
                let dir = if rng.gen::<bool>() { 1.0 } else { -1.0 };
                *d = (*d + p.step_size * dir).clamp(-p.eta, p.eta);
                linf = linf.max(d.abs());
            }
        } else {
            for (d, &g) in delta.iter_mut().zip(grad.iter()) {
                let dir = if g > 0.0 {
                    1.0
                } else if g < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                *d = (*d + p.step_size * dir).clamp(-p.eta, p.eta);
                linf = linf.max(d.abs());
            }
        }
        debug_assert!(linf <= p.eta + 1e-12, "budget violated at step {step}");
        iterate_linf.push(linf);
    }

    let out = clamp_unit(offset_image(img, &delta));
    let final_loss = surrogate.loss(&out)?;
    Ok((
        out,
        PgdReport {
            iterate_linf,
            initial_loss,
            final_loss,
        },
    ))
}

fn offset_image(img: &Image, delta: &[f64]) -> Image {
    let pixels = img
        .pixels()
        .iter()
        .zip(delta.iter())
        .map(|(p, d)| p + d)
        .collect();
    Image::from_pixels(img.width(), img.height(), pixels).expect("same length")
}
