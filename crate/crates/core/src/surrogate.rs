//! Differentiable stand-in for a fine-tuned model's training loss.
//!
//! The model is a convex quadratic anchored at a clean image: the anchor is
//! the global loss minimizer, which is what "fully trained on x" means for
//! the adversarial embedding. The operator is a seeded 3x3 convolution with
//! replicate padding; its kernel is mean-subtracted so the loss responds to
//! detail structure rather than brightness shifts.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::raster::{Image, CHANNELS};
use crate::seed::Seed;

pub type Kernel3 = [[f64; 3]; 3];

#[derive(Clone, Debug)]
pub struct SurrogateModel {
    kernel: Kernel3,
    anchor: Image,
    seed: Seed,
}

impl SurrogateModel {
    /// Surrogate with a seeded kernel: entries uniform in `[-1, 1]`, then
    /// mean-subtracted.
    pub fn new(operator_seed: Seed, anchor: Image) -> Self {
        let mut rng = operator_seed.derive("surrogate-kernel").rng();
        let mut kernel = [[0.0; 3]; 3];
        let mut sum = 0.0;
        for row in kernel.iter_mut() {
            for v in row.iter_mut() {
                *v = rng.gen_range(-1.0..=1.0);
                sum += *v;
            }
        }
        let mean = sum / 9.0;
        for row in kernel.iter_mut() {
            for v in row.iter_mut() {
                *v -= mean;
            }
        }
        SurrogateModel {
            kernel,
            anchor,
            seed: operator_seed,
        }
    }

    /// Surrogate with an explicit kernel, for tests and oracles.
    pub fn from_kernel(kernel: Kernel3, anchor: Image, seed: Seed) -> Self {
        SurrogateModel {
            kernel,
            anchor,
            seed,
        }
    }

    pub fn anchor(&self) -> &Image {
        &self.anchor
    }

    pub fn kernel(&self) -> &Kernel3 {
        &self.kernel
    }

    pub fn seed(&self) -> Seed {
        self.seed
    }

    fn check_dims(&self, x: &Image) -> Result<()> {
        if x.dims() != self.anchor.dims() {
            return Err(Error::DimensionMismatch {
                expected: self.anchor.dims(),
                got: x.dims(),
            });
        }
        Ok(())
    }

    fn conv_channel(&self, ch: &Matrix) -> Matrix {
        let (rows, cols) = ch.dims();
        let rmax = rows as isize - 1;
        let cmax = cols as isize - 1;
        Matrix::from_fn(rows, cols, |i, j| {
            let mut acc = 0.0;
            for (du, krow) in self.kernel.iter().enumerate() {
                for (dv, &k) in krow.iter().enumerate() {
                    let r = (i as isize + du as isize - 1).clamp(0, rmax) as usize;
                    let c = (j as isize + dv as isize - 1).clamp(0, cmax) as usize;
                    acc += k * ch.get(r, c);
                }
            }
            acc
        })
    }

    /// `L(x) = 1/2 * ||K (x - anchor)||^2`, summed over channels.
    pub fn loss(&self, x: &Image) -> Result<f64> {
        self.check_dims(x)?;
        let mut total = 0.0;
        for c in 0..CHANNELS {
            let diff = diff_channel(x, &self.anchor, c);
            total += self.conv_channel(&diff).energy();
        }
        Ok(0.5 * total)
    }

    /// `grad L(x) = K^T K (x - anchor)`, flattened in image sample order.
    ///
    /// The transpose scatters each residual sample back through the same
    /// clamped tap positions the forward pass read from, which is the exact
    /// adjoint of convolution with replicate padding.
    pub fn grad(&self, x: &Image) -> Result<Vec<f64>> {
        self.check_dims(x)?;
        let (width, height) = x.dims();
        let rmax = height as isize - 1;
        let cmax = width as isize - 1;
        let mut out = vec![0.0; x.sample_count()];
        for c in 0..CHANNELS {
            let diff = diff_channel(x, &self.anchor, c);
            let residual = self.conv_channel(&diff);
            for i in 0..height {
                for j in 0..width {
                    let r = residual.get(i, j);
                    if r == 0.0 {
                        continue;
                    }
                    for (du, krow) in self.kernel.iter().enumerate() {
                        for (dv, &k) in krow.iter().enumerate() {
                            let rr = (i as isize + du as isize - 1).clamp(0, rmax) as usize;
                            let cc = (j as isize + dv as isize - 1).clamp(0, cmax) as usize;
                            out[(rr * width + cc) * CHANNELS + c] += k * r;
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

fn diff_channel(x: &Image, anchor: &Image, channel: usize) -> Matrix {
    let (width, height) = x.dims();
    Matrix::from_fn(height, width, |r, c| {
        x.get(c, r, channel) - anchor.get(c, r, channel)
    })
}

pub const IDENTITY_KERNEL: Kernel3 = [[0.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]];
