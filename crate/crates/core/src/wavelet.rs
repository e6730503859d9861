//! Single-level orthonormal 2-D Haar analysis and synthesis.
//!
//! For each 2x2 block `[[a, b], [c, d]]` the four subband samples are
//!
//! ```text
//! cA = (a + b + c + d) / 2      cH = ((a + b) - (c + d)) / 2
//! cV = ((a + c) - (b + d)) / 2  cD = ((a - b) - (c - d)) / 2
//! ```
//!
//! The basis is orthonormal, so the transform conserves energy and inverts
//! exactly up to floating-point rounding. Odd dimensions are handled by
//! replicating the last row/column before analysis and cropping after
//! synthesis.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// The four subbands of one analysis level, plus the synthesis output shape.
#[derive(Clone, Debug, PartialEq)]
pub struct SubbandSet {
    pub ca: Matrix,
    pub ch: Matrix,
    pub cv: Matrix,
    pub cd: Matrix,
    /// Dimensions `idwt2_haar` crops its output to. Differ from twice the
    /// subband dimensions only when the analyzed matrix had odd sides.
    pub out_rows: usize,
    pub out_cols: usize,
}

impl SubbandSet {
    /// Assembles a set whose synthesis output is exactly twice the subband
    /// dimensions (i.e., an even-sized target).
    pub fn new(ca: Matrix, ch: Matrix, cv: Matrix, cd: Matrix) -> Result<Self> {
        let dims = ca.dims();
        if ch.dims() != dims || cv.dims() != dims || cd.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: ch.dims(),
            });
        }
        let (rows, cols) = dims;
        Ok(SubbandSet {
            ca,
            ch,
            cv,
            cd,
            out_rows: rows * 2,
            out_cols: cols * 2,
        })
    }

    pub fn subband_dims(&self) -> (usize, usize) {
        self.ca.dims()
    }

    /// Total energy across all four subbands.
    pub fn energy(&self) -> f64 {
        self.ca.energy() + self.ch.energy() + self.cv.energy() + self.cd.energy()
    }
}

fn pad_to_even(m: &Matrix) -> Matrix {
    let (rows, cols) = m.dims();
    let pr = rows + rows % 2;
    let pc = cols + cols % 2;
    Matrix::from_fn(pr, pc, |r, c| m.get(r.min(rows - 1), c.min(cols - 1)))
}

/// Single-level 2-D Haar analysis.
pub fn dwt2_haar(channel: &Matrix) -> Result<SubbandSet> {
    if channel.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (orig_rows, orig_cols) = channel.dims();
    let even = orig_rows % 2 == 0 && orig_cols % 2 == 0;
    let padded;
    let input = if even {
        channel
    } else {
        padded = pad_to_even(channel);
        &padded
    };
    let (rows, cols) = input.dims();
    let (hr, hc) = (rows / 2, cols / 2);

    let mut ca = Matrix::zeros(hr, hc);
    let mut ch = Matrix::zeros(hr, hc);
    let mut cv = Matrix::zeros(hr, hc);
    let mut cd = Matrix::zeros(hr, hc);
    let src = input.data();
    for i in 0..hr {
        let top = &src[2 * i * cols..(2 * i + 1) * cols];
        let bottom = &src[(2 * i + 1) * cols..(2 * i + 2) * cols];
        let row = i * hc;
        let ca_row = &mut ca.data_mut()[row..row + hc];
        let ch_row = &mut ch.data_mut()[row..row + hc];
        let cv_row = &mut cv.data_mut()[row..row + hc];
        let cd_row = &mut cd.data_mut()[row..row + hc];
        for j in 0..hc {
            let a = top[2 * j];
            let b = top[2 * j + 1];
            let c = bottom[2 * j];
            let d = bottom[2 * j + 1];
            ca_row[j] = (a + b + c + d) / 2.0;
            ch_row[j] = ((a + b) - (c + d)) / 2.0;
            cv_row[j] = ((a + c) - (b + d)) / 2.0;
            cd_row[j] = ((a - b) - (c - d)) / 2.0;
        }
    }
    Ok(SubbandSet {
        ca,
        ch,
        cv,
        cd,
        out_rows: orig_rows,
        out_cols: orig_cols,
    })
}

/// Single-level 2-D Haar synthesis; exact inverse of [`dwt2_haar`].
pub fn idwt2_haar(bands: &SubbandSet) -> Result<Matrix> {
    let dims = bands.ca.dims();
    for m in [&bands.ch, &bands.cv, &bands.cd] {
        if m.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: m.dims(),
            });
        }
    }
    let (hr, hc) = dims;
    let cols = hc * 2;
    let mut out = Matrix::zeros(hr * 2, cols);
    for i in 0..hr {
        let row = i * hc;
        let ca_row = &bands.ca.data()[row..row + hc];
        let ch_row = &bands.ch.data()[row..row + hc];
        let cv_row = &bands.cv.data()[row..row + hc];
        let cd_row = &bands.cd.data()[row..row + hc];
        let (top, bottom) = out.data_mut()[2 * i * cols..(2 * i + 2) * cols].split_at_mut(cols);
        for j in 0..hc {
            let ca = ca_row[j];
            let ch = ch_row[j];
            let cv = cv_row[j];
            let cd = cd_row[j];
            top[2 * j] = (ca + ch + cv + cd) / 2.0;
            top[2 * j + 1] = (ca + ch - cv - cd) / 2.0;
            bottom[2 * j] = (ca - ch + cv - cd) / 2.0;
            bottom[2 * j + 1] = (ca - ch - cv + cd) / 2.0;
        }
    }
    if (bands.out_rows, bands.out_cols) == out.dims() {
        return Ok(out);
    }
    Ok(Matrix::from_fn(bands.out_rows, bands.out_cols, |r, c| {
        out.get(r, c)
    }))
}
