//! 2x bilinear upsampling, align-corners convention.
//!
//! Output sample `i` of a `2n`-long axis reads source position
//! `i * (n - 1) / (2n - 1)`, so both end samples land exactly on the input's
//! end samples and linear ramps are reproduced exactly. A length-1 axis is
//! replicated.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

use super::tensor::Tensor;

/// Per output index: left and right source indices and the right weight.
pub(crate) fn taps<T: Scalar>(n: usize) -> Vec<(usize, usize, T)> {
    let m = 2 * n;
    if n == 1 {
        return vec![(0, 0, T::zero()); m];
    }
    (0..m)
        .map(|i| {
            let num = i * (n - 1);
            let den = m - 1;
            let mut i0 = num / den;
            if i0 >= n - 1 {
                i0 = n - 2;
            }
            let frac = T::from_usize_lossy(num - i0 * den) / T::from_usize_lossy(den);
            (i0, i0 + 1, frac)
        })
        .collect()
}

pub(crate) fn forward<T: Scalar>(input: &Tensor<T>) -> Result<Tensor<T>> {
    if input.rank() != 4 {
        return shape_err("upsample_bilinear2x", format!("input must be [N,C,H,W], got {:?}", input.dims()));
    }
    let [n, c, h, w] = input.dims4();
    let ty = taps::<T>(h);
    let tx = taps::<T>(w);
    let (oh, ow) = (2 * h, 2 * w);
    let mut out = Vec::with_capacity(n * c * oh * ow);
    let mut rows = vec![T::zero(); h * ow];
    for plane in input.data().chunks_exact(h * w) {
        // horizontal pass
        for y in 0..h {
            let src = &plane[y * w..(y + 1) * w];
            for (x, &(x0, x1, fx)) in tx.iter().enumerate() {
                rows[y * ow + x] = src[x0] * (T::one() - fx) + src[x1] * fx;
            }
        }
        // vertical pass
        for &(y0, y1, fy) in &ty {
            let (r0, r1) = (&rows[y0 * ow..(y0 + 1) * ow], &rows[y1 * ow..(y1 + 1) * ow]);
            out.extend(r0.iter().zip(r1).map(|(&a, &b)| a * (T::one() - fy) + b * fy));
        }
    }
    Ok(Tensor::from_parts(vec![n, c, oh, ow], out))
}

pub(crate) fn backward<T: Scalar>(in_dims: &[usize], grad_out: &[T]) -> Vec<T> {
    let (h, w) = (in_dims[2], in_dims[3]);
    let planes = in_dims[0] * in_dims[1];
    let ty = taps::<T>(h);
    let tx = taps::<T>(w);
    let (oh, ow) = (2 * h, 2 * w);
    let mut gx = vec![T::zero(); planes * h * w];
    let mut rows = vec![T::zero(); h * ow];
    for p in 0..planes {
        let go = &grad_out[p * oh * ow..(p + 1) * oh * ow];
        rows.fill(T::zero());
        for (oy, &(y0, y1, fy)) in ty.iter().enumerate() {
            let g = &go[oy * ow..(oy + 1) * ow];
            for (x, &gv) in g.iter().enumerate() {
                rows[y0 * ow + x] += gv * (T::one() - fy);
                rows[y1 * ow + x] += gv * fy;
            }
        }
        let dst = &mut gx[p * h * w..(p + 1) * h * w];
        for y in 0..h {
            for (x, &(x0, x1, fx)) in tx.iter().enumerate() {
                let gv = rows[y * ow + x];
                dst[y * w + x0] += gv * (T::one() - fx);
                dst[y * w + x1] += gv * fx;
            }
        }
    }
    gx
}
