//! The five transmission-damage degradations applied to released datasets:
//! JPEG compression, unsharp-mask sharpening, additive Gaussian noise,
//! Gaussian blur, and a bilinear resize round trip.
//!
//! All variants preserve dimensions and channel count. Noise parameters are
//! stated in normalized `[0, 1]` pixel units; callers interpreting 8-bit
//! figures divide by 255 first.

use alloc::format;
use alloc::vec::Vec;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::raster::{clamp_unit, Image, CHANNELS};
use crate::seed::Seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradeSpec {
    /// Encode/decode through a real JPEG codec at the given quality.
    Jpeg { quality: u8 },
    /// Unsharp mask: `x + (factor - 1) * (x - blur(x, 1))`.
    Sharpen { factor: f64 },
    /// Additive seeded Gaussian noise in normalized units.
    GaussianNoise { mean: f64, variance: f64, seed: Seed },
    /// Separable Gaussian blur, radius `ceil(3 sigma)`, replicate padding.
    GaussianBlur { sigma: f64 },
    /// Bilinear downscale to (down_width, down_height), then bilinear back
    /// to the original dimensions.
    ResizeRoundtrip { down_width: usize, down_height: usize },
}

impl DegradeSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            DegradeSpec::Jpeg { .. } => "jpeg",
            DegradeSpec::Sharpen { .. } => "sharpen",
            DegradeSpec::GaussianNoise { .. } => "gaussian_noise",
            DegradeSpec::GaussianBlur { .. } => "gaussian_blur",
            DegradeSpec::ResizeRoundtrip { .. } => "resize_roundtrip",
        }
    }

    /// The same degradation with its stochastic part re-seeded; identity
    /// for deterministic variants. Release pipelines derive one seed per
    /// image so noise fields stay independent across a dataset.
    pub fn reseeded(&self, seed: Seed) -> DegradeSpec {
        match self {
            DegradeSpec::GaussianNoise { mean, variance, .. } => DegradeSpec::GaussianNoise {
                mean: *mean,
                variance: *variance,
                seed,
            },
            other => other.clone(),
        }
    }
}

pub fn apply_degradation(img: &Image, spec: &DegradeSpec) -> Result<Image> {
    match spec {
        DegradeSpec::Jpeg { quality } => jpeg_roundtrip(img, *quality),
        DegradeSpec::Sharpen { factor } => Ok(sharpen(img, *factor)),
        DegradeSpec::GaussianNoise {
            mean,
            variance,
            seed,
        } => {
            if *variance < 0.0 {
                return Err(Error::BadDegradeParam {
                    what: "noise variance must be non-negative",
                });
            }
            Ok(gaussian_noise(img, *mean, *variance, *seed))
        }
        DegradeSpec::GaussianBlur { sigma } => {
            if *sigma <= 0.0 {
                return Err(Error::BadDegradeParam {
                    what: "blur sigma must be positive",
                });
            }
            Ok(gaussian_blur(img, *sigma))
        }
        DegradeSpec::ResizeRoundtrip {
            down_width,
            down_height,
        } => {
            if *down_width == 0 || *down_height == 0 {
                return Err(Error::BadDegradeParam {
                    what: "resize target must be at least 1x1",
                });
            }
            let down = resize_bilinear(img, *down_width, *down_height);
            Ok(resize_bilinear(&down, img.width(), img.height()))
        }
    }
}

/// Quantizes to 8-bit, runs the JPEG encoder at `quality`, and decodes
/// back to the float domain. Dimensions are preserved.
pub fn jpeg_roundtrip(img: &Image, quality: u8) -> Result<Image> {
    if !(1..=100).contains(&quality) {
        return Err(Error::BadDegradeParam {
            what: "jpeg quality must be in 1..=100",
        });
    }
    let rgb = img.to_rgb8();
    let mut encoded: Vec<u8> = Vec::new();
    let encoder = jpeg_encoder::Encoder::new(&mut encoded, quality);
    encoder
        .encode(
            &rgb,
            img.width() as u16,
            img.height() as u16,
            jpeg_encoder::ColorType::Rgb,
        )
        .map_err(|e| Error::CodecFailure {
            detail: format!("encode: {e:?}"),
        })?;

    let options = zune_core::options::DecoderOptions::default()
        .jpeg_set_out_colorspace(zune_core::colorspace::ColorSpace::RGB);
    let mut decoder = zune_jpeg::JpegDecoder::new_with_options(&encoded, options);
    let pixels = decoder.decode().map_err(|e| Error::CodecFailure {
        detail: format!("decode: {e:?}"),
    })?;
    Image::from_rgb8(img.width(), img.height(), &pixels)
}

/// Unsharp mask with a sigma-1 Gaussian base blur. Factor 1 is the
/// identity; larger factors amplify the detail residual.
pub fn sharpen(img: &Image, factor: f64) -> Image {
    let blurred = gaussian_blur(img, 1.0);
    let pixels = img
        .pixels()
        .iter()
        .zip(blurred.pixels())
        .map(|(&x, &b)| x + (factor - 1.0) * (x - b))
        .collect();
    clamp_unit(Image::from_pixels(img.width(), img.height(), pixels).expect("same length"))
}

pub fn gaussian_noise(img: &Image, mean: f64, variance: f64, seed: Seed) -> Image {
    let sigma = libm::sqrt(variance);
    let normal = Normal::new(mean, sigma).expect("sigma >= 0");
    let mut rng = seed.derive("degrade-noise").rng();
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| p + normal.sample(&mut rng))
        .collect();
    clamp_unit(Image::from_pixels(img.width(), img.height(), pixels).expect("same length"))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = libm::ceil(3.0 * sigma) as usize;
    let mut kernel = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    for i in 0..=2 * radius {
        let d = i as f64 - radius as f64;
        kernel.push(libm::exp(-d * d / denom));
    }
    let sum: f64 = kernel.iter().sum();
    for k in kernel.iter_mut() {
        *k /= sum;
    }
    kernel
}

/// Separable Gaussian blur with replicate padding. The normalized kernel
/// keeps constant images exactly constant (no brightness drift).
pub fn gaussian_blur(img: &Image, sigma: f64) -> Image {
    let kernel = gaussian_kernel(sigma);
    let radius = kernel.len() / 2;
    let (width, height) = img.dims();
    let mut out = img.clone();
    for c in 0..CHANNELS {
        let src = img.channel(c);
        // Horizontal pass.
        let horiz = Matrix::from_fn(height, width, |r, q| {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let col = (q as isize + k as isize - radius as isize)
                    .clamp(0, width as isize - 1) as usize;
                acc += kv * src.get(r, col);
            }
            acc
        });
        // Vertical pass.
        let blurred = Matrix::from_fn(height, width, |r, q| {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                let row = (r as isize + k as isize - radius as isize)
                    .clamp(0, height as isize - 1) as usize;
                acc += kv * horiz.get(row, q);
            }
            acc
        });
        out.set_channel(c, &blurred).expect("dims preserved");
    }
    out
}

/// Bilinear resampling on the source-aligned grid (`sx = x * scale`),
/// with edge clamping.
///
/// The alignment matters here: the center-aligned mapping at an integer
/// downscale factor averages each Haar block's row pair exactly, which
/// zeroes any detail-band payload and turns the resize round trip into a
/// degenerate erasure instead of a lossy channel. Source alignment keeps
/// it a genuine degradation.
pub fn resize_bilinear(img: &Image, new_width: usize, new_height: usize) -> Image {
    let (src_w, src_h) = img.dims();
    let scale_x = src_w as f64 / new_width as f64;
    let scale_y = src_h as f64 / new_height as f64;
    let mut out = Image::filled(new_width, new_height, 0.0);
    for y in 0..new_height {
        let sy = (y as f64 * scale_y).min((src_h - 1) as f64);
        let y0 = libm::floor(sy) as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let fy = sy - y0 as f64;
        for x in 0..new_width {
            let sx = (x as f64 * scale_x).min((src_w - 1) as f64);
            let x0 = libm::floor(sx) as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let fx = sx - x0 as f64;
            for c in 0..CHANNELS {
                let top = img.get(x0, y0, c) * (1.0 - fx) + img.get(x1, y0, c) * fx;
                let bottom = img.get(x0, y1, c) * (1.0 - fx) + img.get(x1, y1, c) * fx;
                out.set(x, y, c, top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}
