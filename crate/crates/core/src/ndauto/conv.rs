//! 2-D convolution (cross-correlation) via im2col + GEMM.

use crate::error::{arg_err, shape_err, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Zero padding of `(k - 1) / 2` on each side; output is `ceil(H / stride)`.
    SameZero,
    /// No padding; output is `(H - k) / stride + 1`.
    Valid,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    pad_h: usize,
    pad_w: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn patch(&self) -> usize {
        self.c * self.kh * self.kw
    }

    fn positions(&self) -> usize {
        self.oh * self.ow
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1
    }
}

fn geometry(input: &[usize], kernel: &[usize], stride: usize, padding: Padding) -> Result<Geometry> {
    if input.len() != 4 {
        return shape_err("conv2d", format!("input must be [N,C,H,W], got {input:?}"));
    }
    if kernel.len() != 4 {
        return shape_err("conv2d", format!("kernel must be [K,C,kh,kw], got {kernel:?}"));
    }
    if !(1..=2).contains(&stride) {
        return arg_err("conv2d", format!("stride must be 1 or 2, got {stride}"));
    }
    let (c, h, w) = (input[1], input[2], input[3]);
    let (kc, kh, kw) = (kernel[1], kernel[2], kernel[3]);
    if kc != c {
        return shape_err(
            "conv2d",
            format!("channel dim C: input has {c}, kernel has {kc}"),
        );
    }
    if kh % 2 == 0 || kw % 2 == 0 {
        return shape_err("conv2d", format!("kernel dims kh={kh}, kw={kw} must be odd"));
    }
    let (pad_h, pad_w) = match padding {
        Padding::SameZero => ((kh - 1) / 2, (kw - 1) / 2),
        Padding::Valid => (0, 0),
    };
    if h + 2 * pad_h < kh || w + 2 * pad_w < kw {
        return shape_err(
            "conv2d",
            format!("spatial dims H={h}, W={w} smaller than kernel {kh}x{kw}"),
        );
    }
    let oh = (h + 2 * pad_h - kh) / stride + 1;
    let ow = (w + 2 * pad_w - kw) / stride + 1;
    Ok(Geometry { c, h, w, kh, kw, stride, pad_h, pad_w, oh, ow })
}

/// Output spatial size for the given input size.
pub fn output_size(size: usize, kernel: usize, stride: usize, padding: Padding) -> usize {
    let pad = match padding {
        Padding::SameZero => (kernel - 1) / 2,
        Padding::Valid => 0,
    };
    (size + 2 * pad - kernel) / stride + 1
}

fn im2col<T: Scalar>(img: &[T], g: &Geometry, cols: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let dst = &mut cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad_h as isize;
                    let line = &mut dst[oy * g.ow..(oy + 1) * g.ow];
                    if iy < 0 || iy >= g.h as isize {
                        line.fill(T::zero());
                        continue;
                    }
                    let src = &plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for (ox, out) in line.iter_mut().enumerate() {
                        let ix = (ox * g.stride + kj) as isize - g.pad_w as isize;
                        *out = if ix < 0 || ix >= g.w as isize {
                            T::zero()
                        } else {
                            src[ix as usize]
                        };
                    }
                }
            }
        }
    }
}

fn col2im<T: Scalar>(cols: &[T], g: &Geometry, img: &mut [T]) {
    let p = g.positions();
    for c in 0..g.c {
        let plane = &mut img[c * g.h * g.w..(c + 1) * g.h * g.w];
        for ki in 0..g.kh {
            for kj in 0..g.kw {
                let row = (c * g.kh + ki) * g.kw + kj;
                let src = &cols[row * p..(row + 1) * p];
                for oy in 0..g.oh {
                    let iy = (oy * g.stride + ki) as isize - g.pad_h as isize;
                    if iy < 0 || iy >= g.h as isize {
                        continue;
                    }
                    let dst = &mut plane[iy as usize * g.w..(iy as usize + 1) * g.w];
                    for ox in 0..g.ow {
                        let ix = (ox * g.stride + kj) as isize - g.pad_w as isize;
                        if ix >= 0 && ix < g.w as isize {
                            dst[ix as usize] += src[oy * g.ow + ox];
                        }
                    }
                }
            }
        }
    }
}

pub(crate) fn forward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    padding: Padding,
) -> Result<Tensor<T>> {
    let g = geometry(input.dims(), kernel.dims(), stride, padding)?;
    let n = input.dims()[0];
    let k = kernel.dims()[0];
    if let Some(b) = bias {
        if b.dims() != [k] {
            return shape_err(
                "conv2d",
                format!("bias must be [K={k}], got {:?}", b.dims()),
            );
        }
    }
    let (ckk, p) = (g.patch(), g.positions());
    let in_stride = g.c * g.h * g.w;
    let mut out = vec![T::zero(); n * k * p];
    let mut cols = if g.is_pointwise() { Vec::new() } else { vec![T::zero(); ckk * p] };
    for b in 0..n {
        let img = &input.data()[b * in_stride..(b + 1) * in_stride];
        let rhs: &[T] = if g.is_pointwise() {
            img
        } else {
            im2col(img, &g, &mut cols);
            &cols
        };
        let dst = &mut out[b * k * p..(b + 1) * k * p];
        if let Some(bias) = bias {
            for (row, &bv) in dst.chunks_exact_mut(p).zip(bias.data()) {
                row.fill(bv);
            }
        }
        let beta = if bias.is_some() { T::one() } else { T::zero() };
        T::gemm(k, ckk, p, T::one(), kernel.data(), (ckk as isize, 1), rhs, (p as isize, 1), beta, dst, (p as isize, 1));
    }
    Ok(Tensor::from_parts(vec![n, k, g.oh, g.ow], out))
}

pub(crate) struct ConvGrads<T> {
    pub input: Option<Vec<T>>,
    pub kernel: Option<Vec<T>>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward<T: Scalar>(
    input: &Tensor<T>,
    kernel: &Tensor<T>,
    grad_out: &[T],
    out_dims: &[usize],
    stride: usize,
    padding: Padding,
    want_input: bool,
    want_kernel: bool,
) -> ConvGrads<T> {
    let g = geometry(input.dims(), kernel.dims(), stride, padding).expect("validated in forward");
    let n = input.dims()[0];
    let k = out_dims[1];
    let (ckk, p) = (g.patch(), g.positions());
    let in_stride = g.c * g.h * g.w;

    let mut gx = want_input.then(|| vec![T::zero(); input.len()]);
    let mut gk = want_kernel.then(|| vec![T::zero(); kernel.len()]);
    let mut cols = vec![T::zero(); if g.is_pointwise() { 0 } else { ckk * p }];
    let mut dcols = vec![T::zero(); if want_input && !g.is_pointwise() { ckk * p } else { 0 }];

    for b in 0..n {
        let go = &grad_out[b * k * p..(b + 1) * k * p];
        let img = &input.data()[b * in_stride..(b + 1) * in_stride];
        if let Some(gk) = gk.as_mut() {
            let cols_ref: &[T] = if g.is_pointwise() {
                img
            } else {
                im2col(img, &g, &mut cols);
                &cols
            };
            // dK[K, ckk] += dY[K, P] · colsᵀ[P, ckk]
            T::gemm(k, p, ckk, T::one(), go, (p as isize, 1), cols_ref, (1, p as isize), T::one(), gk, (ckk as isize, 1));
        }
        if let Some(gx) = gx.as_mut() {
            let dst = &mut gx[b * in_stride..(b + 1) * in_stride];
            if g.is_pointwise() {
                T::gemm(ckk, k, p, T::one(), kernel.data(), (1, ckk as isize), go, (p as isize, 1), T::one(), dst, (p as isize, 1));
            } else {
                // dcols[ckk, P] = Kᵀ[ckk, K] · dY[K, P]
                T::gemm(ckk, k, p, T::one(), kernel.data(), (1, ckk as isize), go, (p as isize, 1), T::zero(), &mut dcols, (p as isize, 1));
                col2im(&dcols, &g, dst);
            }
        }
    }
    ConvGrads { input: gx, kernel: gk }
}

pub(crate) fn bias_grad<T: Scalar>(grad_out: &[T], out_dims: &[usize]) -> Vec<T> {
    let (n, k, p) = (out_dims[0], out_dims[1], out_dims[2] * out_dims[3]);
    let mut gb = vec![T::zero(); k];
    for b in 0..n {
        for (c, acc) in gb.iter_mut().enumerate() {
            let start = (b * k + c) * p;
            *acc += grad_out[start..start + p].iter().copied().sum::<T>();
        }
    }
    gb
}
