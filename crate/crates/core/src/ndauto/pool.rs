//! Max and average pooling.
//!
//! Output is always `H / stride x W / stride`. A window of `size` is centered
//! with a leading offset of `(size - 1) / 2`; taps that fall outside the
//! image are ignored (max) or excluded from the average's count.

use crate::error::{arg_err, shape_err, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolKind {
    Max,
    Avg,
}

fn window(o: usize, stride: usize, size: usize, extent: usize) -> (usize, usize) {
    let lead = (size - 1) / 2;
    let start = (o * stride).saturating_sub(lead);
    let end = (o * stride + size - lead).min(extent);
    (start, end)
}

pub(crate) fn forward<T: Scalar>(
    input: &Tensor<T>,
    kind: PoolKind,
    size: usize,
    stride: usize,
) -> Result<(Tensor<T>, Vec<usize>)> {
    if input.rank() != 4 {
        return shape_err("pool2d", format!("input must be [N,C,H,W], got {:?}", input.dims()));
    }
    if size == 0 || stride == 0 {
        return arg_err("pool2d", "size and stride must be positive");
    }
    let [n, c, h, w] = input.dims4();
    if h % stride != 0 || w % stride != 0 {
        return shape_err(
            "pool2d",
            format!("spatial dims H={h}, W={w} not divisible by stride {stride}"),
        );
    }
    let (oh, ow) = (h / stride, w / stride);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut argmax = Vec::new();
    for plane in input.data().chunks_exact(h * w) {
        for oy in 0..oh {
            let (y0, y1) = window(oy, stride, size, h);
            for ox in 0..ow {
                let (x0, x1) = window(ox, stride, size, w);
                match kind {
                    PoolKind::Max => {
                        let mut best = y0 * w + x0;
                        for y in y0..y1 {
                            for x in x0..x1 {
                                if plane[y * w + x] > plane[best] {
                                    best = y * w + x;
                                }
                            }
                        }
                        out.push(plane[best]);
                        argmax.push(best);
                    }
                    PoolKind::Avg => {
                        let mut s = T::zero();
                        for y in y0..y1 {
                            for x in x0..x1 {
                                s += plane[y * w + x];
                            }
                        }
                        out.push(s / T::from_usize_lossy((y1 - y0) * (x1 - x0)));
                    }
                }
            }
        }
    }
    Ok((Tensor::from_parts(vec![n, c, oh, ow], out), argmax))
}

pub(crate) fn backward<T: Scalar>(
    in_dims: &[usize],
    kind: PoolKind,
    size: usize,
    stride: usize,
    argmax: &[usize],
    grad_out: &[T],
) -> Vec<T> {
    let (h, w) = (in_dims[2], in_dims[3]);
    let (oh, ow) = (h / stride, w / stride);
    let planes = in_dims[0] * in_dims[1];
    let mut gx = vec![T::zero(); planes * h * w];
    for p in 0..planes {
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        let go = &grad_out[p * oh * ow..(p + 1) * oh * ow];
        match kind {
            PoolKind::Max => {
                let am = &argmax[p * oh * ow..(p + 1) * oh * ow];
                for (&idx, &g) in am.iter().zip(go) {
                    dst[idx] += g;
                }
            }
            PoolKind::Avg => {
                for oy in 0..oh {
                    let (y0, y1) = window(oy, stride, size, h);
                    for ox in 0..ow {
                        let (x0, x1) = window(ox, stride, size, w);
                        let share = go[oy * ow + ox] / T::from_usize_lossy((y1 - y0) * (x1 - x0));
                        for y in y0..y1 {
                            for x in x0..x1 {
                                dst[y * w + x] += share;
                            }
                        }
                    }
                }
            }
        }
    }
    gx
}
