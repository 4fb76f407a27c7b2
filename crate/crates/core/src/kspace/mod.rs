//! 2-D Fourier transforms with centered k-space indexing, and the
//! respiratory phase-error model used to manufacture paired training data.

mod fft;
mod motion;

use num_complex::Complex;

use crate::error::{shape_err, Result};
use crate::image::Image2D;
use crate::scalar::Scalar;

pub use fft::{fft2_in_place, FftPlan};
pub use motion::{corrupt_kspace, respiratory_displacement, CorruptedPair, MotionParams, MotionRanges};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Complex image-domain grid, natural (uncentered) pixel indexing.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexImage<T> {
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

/// Complex k-space grid with centered indexing: row `r` holds
/// `ky = r - H/2`, column `c` holds `kx = c - W/2`, so DC sits at
/// `(H/2, W/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KSpace2D<T> {
    height: usize,
    width: usize,
    data: Vec<Complex<T>>,
}

fn check_even(op: &'static str, h: usize, w: usize) -> Result<()> {
    if h < 4 || w < 4 || !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return shape_err(op, format!("dims H={h}, W={w} must be even and at least 4"));
    }
    Ok(())
}

macro_rules! grid_common {
    ($t:ident) => {
        impl<T: Scalar> $t<T> {
            pub fn height(&self) -> usize {
                self.height
            }

            pub fn width(&self) -> usize {
                self.width
            }

            pub fn data(&self) -> &[Complex<T>] {
                &self.data
            }

            pub fn data_mut(&mut self) -> &mut [Complex<T>] {
                &mut self.data
            }

            pub fn get(&self, row: usize, col: usize) -> Complex<T> {
                self.data[row * self.width + col]
            }

            /// `Σ |v|²`
            pub fn energy(&self) -> f64 {
                self.data.iter().map(|v| v.norm_sqr().as_f64()).sum()
            }
        }
    };
}

grid_common!(ComplexImage);
grid_common!(KSpace2D);

impl<T: Scalar> ComplexImage<T> {
    pub fn new(height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        if data.len() != height * width {
            return shape_err("ComplexImage::new", "data length differs from H*W");
        }
        Ok(Self { height, width, data })
    }

    pub fn from_real(img: &Image2D<T>) -> Self {
        Self {
            height: img.height(),
            width: img.width(),
            data: img.data().iter().map(|&v| Complex::new(v, T::zero())).collect(),
        }
    }

    pub fn magnitude(&self) -> Image2D<T> {
        Image2D::new(self.height, self.width, self.data.iter().map(|v| v.norm()).collect())
            .expect("finite magnitudes")
    }
}

impl<T: Scalar> KSpace2D<T> {
    pub fn new(height: usize, width: usize, data: Vec<Complex<T>>) -> Result<Self> {
        check_even("KSpace2D::new", height, width)?;
        if data.len() != height * width {
            return shape_err("KSpace2D::new", "data length differs from H*W");
        }
        Ok(Self { height, width, data })
    }

    /// Phase-encode frequency of storage row `row`.
    pub fn ky(&self, row: usize) -> i64 {
        row as i64 - (self.height / 2) as i64
    }

    pub fn kx(&self, col: usize) -> i64 {
        col as i64 - (self.width / 2) as i64
    }

    pub fn row_mut(&mut self, row: usize) -> &mut [Complex<T>] {
        &mut self.data[row * self.width..(row + 1) * self.width]
    }
}

/// Half-size circular shift on both axes; its own inverse for even dims.
fn half_shift<T: Copy>(data: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(data.len());
    for r in 0..h {
        let src = (r + h / 2) % h;
        for c in 0..w {
            out.push(data[src * w + (c + w / 2) % w]);
        }
    }
    out
}

/// Forward transform, unnormalized, output centered.
pub fn fft2_forward<T: Scalar>(img: &ComplexImage<T>) -> Result<KSpace2D<T>> {
    check_even("fft2", img.height, img.width)?;
    let mut data = img.data.clone();
    fft2_in_place(&mut data, img.height, img.width, false);
    Ok(KSpace2D { height: img.height, width: img.width, data: half_shift(&data, img.height, img.width) })
}

/// Inverse transform of centered k-space, scaled by `1 / (H·W)`.
pub fn fft2_inverse<T: Scalar>(k: &KSpace2D<T>) -> Result<ComplexImage<T>> {
    check_even("fft2", k.height, k.width)?;
    let mut data = half_shift(&k.data, k.height, k.width);
    fft2_in_place(&mut data, k.height, k.width, true);
    let scale = T::one() / T::from_usize_lossy(k.height * k.width);
    for v in &mut data {
        *v *= scale;
    }
    Ok(ComplexImage { height: k.height, width: k.width, data })
}

/// Real-image convenience wrapper over [`fft2_forward`].
pub fn fft2_real<T: Scalar>(img: &Image2D<T>) -> Result<KSpace2D<T>> {
    fft2_forward(&ComplexImage::from_real(img))
}

fn dft2_naive_raw<T: Scalar>(data: &[Complex<T>], h: usize, w: usize, inverse: bool) -> Vec<Complex<T>> {
    let mut rows: Vec<Complex<T>> = Vec::with_capacity(h * w);
    for r in data.chunks_exact(w) {
        rows.extend(fft::dft_naive_1d(r, inverse));
    }
    let mut out = rows.clone();
    for x in 0..w {
        let col: Vec<Complex<T>> = (0..h).map(|y| rows[y * w + x]).collect();
        for (y, v) in fft::dft_naive_1d(&col, inverse).into_iter().enumerate() {
            out[y * w + x] = v;
        }
    }
    out
}

/// Same contract as [`fft2_forward`], by direct summation. Test oracle.
pub fn dft2_naive_forward<T: Scalar>(img: &ComplexImage<T>) -> Result<KSpace2D<T>> {
    check_even("dft2_naive", img.height, img.width)?;
    let data = dft2_naive_raw(&img.data, img.height, img.width, false);
    Ok(KSpace2D { height: img.height, width: img.width, data: half_shift(&data, img.height, img.width) })
}

/// Same contract as [`fft2_inverse`], by direct summation. Test oracle.
pub fn dft2_naive_inverse<T: Scalar>(k: &KSpace2D<T>) -> Result<ComplexImage<T>> {
    check_even("dft2_naive", k.height, k.width)?;
    let shifted = half_shift(&k.data, k.height, k.width);
    let scale = T::one() / T::from_usize_lossy(k.height * k.width);
    let data = dft2_naive_raw(&shifted, k.height, k.width, true)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    Ok(ComplexImage { height: k.height, width: k.width, data })
}
