//! Canonical image representation and pixel-level metrics.
//!
//! Pixels are normalized `[0, 1]` floats, three interleaved RGB channels,
//! row-major. All watermark arithmetic happens in this float domain;
//! quantization to 8-bit happens exactly once, at save time.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const CHANNELS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image {
    /// Image filled with a constant value (clamped to `[0, 1]`).
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        let v = value.clamp(0.0, 1.0);
        Image {
            width,
            height,
            pixels: vec![v; width * height * CHANNELS],
        }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        let expected = width * height * CHANNELS;
        if pixels.len() != expected {
            return Err(Error::BadPixelBuffer {
                expected,
                got: pixels.len(),
            });
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    /// Total number of scalar samples (width x height x 3).
    pub fn sample_count(&self) -> usize {
        self.pixels.len()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, channel: usize) -> f64 {
        self.pixels[(y * self.width + x) * CHANNELS + channel]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, channel: usize, value: f64) {
        self.pixels[(y * self.width + x) * CHANNELS + channel] = value;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    /// One channel as a height x width matrix.
    pub fn channel(&self, channel: usize) -> Matrix {
        let mut data = Vec::with_capacity(self.width * self.height);
        data.extend(
            self.pixels[channel..]
                .iter()
                .step_by(CHANNELS)
                .take(self.width * self.height),
        );
        Matrix::from_vec(self.height, self.width, data).expect("sized by construction")
    }

    pub fn set_channel(&mut self, channel: usize, m: &Matrix) -> Result<()> {
        if m.dims() != (self.height, self.width) {
            return Err(Error::DimensionMismatch {
                expected: (self.height, self.width),
                got: m.dims(),
            });
        }
        for (dst, &src) in self.pixels[channel..]
            .iter_mut()
            .step_by(CHANNELS)
            .zip(m.data().iter())
        {
            *dst = src;
        }
        Ok(())
    }

    /// Quantize to interleaved 8-bit RGB, round-to-nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .map(|&p| libm::round(p.clamp(0.0, 1.0) * 255.0) as u8)
            .collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let expected = width * height * CHANNELS;
        if bytes.len() != expected {
            return Err(Error::BadPixelBuffer {
                expected,
                got: bytes.len(),
            });
        }
        Ok(Image {
            width,
            height,
            pixels: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }
}

/// Clamp every sample into `[0, 1]`. Idempotent; mandatory after any
/// perturbation before an image is considered public.
pub fn clamp_unit(mut img: Image) -> Image {
    for p in img.pixels.iter_mut() {
        *p = p.clamp(0.0, 1.0);
    }
    img
}

/// Peak signal-to-noise ratio in decibels over all channels.
///
/// Returns `f64::INFINITY` when the images are identical.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            got: b.dims(),
        });
    }
    let n = a.pixels.len() as f64;
    let mse: f64 = a
        .pixels
        .iter()
        .zip(b.pixels.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<f64>()
        / n;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * libm::log10(1.0 / mse))
}
