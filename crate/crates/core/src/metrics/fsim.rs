use crate::error::{shape_err, Result};
use crate::image::Image2D;
use crate::scalar::Scalar;

use super::phasecong::{compute as pc_compute, MIN_PC_SIZE};
use super::{to_f64, MetricConfig};

/// Scharr derivative kernel along x, applied as a true convolution.
const SCHARR_X: [[f64; 3]; 3] = [
    [3.0 / 16.0, 0.0, -3.0 / 16.0],
    [10.0 / 16.0, 0.0, -10.0 / 16.0],
    [3.0 / 16.0, 0.0, -3.0 / 16.0],
];

/// Zero-padded "same" 2-D convolution with a 3x3 kernel.
fn conv3_same(src: &[f64], h: usize, w: usize, k: &[[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0;
            for (i, krow) in k.iter().enumerate() {
                let sy = y as isize + 1 - i as isize;
                if sy < 0 || sy >= h as isize {
                    continue;
                }
                for (j, &kv) in krow.iter().enumerate() {
                    let sx = x as isize + 1 - j as isize;
                    if sx >= 0 && sx < w as isize {
                        s += kv * src[sy as usize * w + sx as usize];
                    }
                }
            }
            out[y * w + x] = s;
        }
    }
    out
}

/// Scharr gradient magnitude of a plane.
pub fn gradient_magnitude(src: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut ky = [[0.0; 3]; 3];
    for (i, row) in ky.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = SCHARR_X[j][i];
        }
    }
    let gx = conv3_same(src, h, w, &SCHARR_X);
    let gy = conv3_same(src, h, w, &ky);
    gx.iter().zip(&gy).map(|(a, b)| (a * a + b * b).sqrt()).collect()
}

/// Feature similarity index.
pub fn fsim<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>) -> Result<f64> {
    fsim_with(x, y, &MetricConfig::default())
}

pub fn fsim_with<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>, cfg: &MetricConfig) -> Result<f64> {
    x.same_dims(y, "fsim")?;
    let (h, w) = x.dims();
    if h < MIN_PC_SIZE || w < MIN_PC_SIZE {
        return shape_err("fsim", format!("image {h}x{w} smaller than {MIN_PC_SIZE}x{MIN_PC_SIZE}"));
    }
    let a: Vec<f64> = to_f64(x).into_iter().map(|v| v * cfg.fsim_range).collect();
    let b: Vec<f64> = to_f64(y).into_iter().map(|v| v * cfg.fsim_range).collect();
    // the PC stage sees the same 0-255 planes
    let pc_cfg = super::PhaseCongruencyConfig { intensity_scale: 1.0, ..cfg.pc };
    let pc_a = pc_compute(&a, h, w, &pc_cfg);
    let pc_b = pc_compute(&b, h, w, &pc_cfg);
    let g_a = gradient_magnitude(&a, h, w);
    let g_b = gradient_magnitude(&b, h, w);

    let (t1, t2) = (cfg.fsim_t1, cfg.fsim_t2);
    let mut num = 0.0;
    let mut den = 0.0;
    let mut plain = 0.0;
    for i in 0..h * w {
        let (p, q) = (pc_a[i], pc_b[i]);
        let s_pc = (2.0 * p * q + t1) / (p * p + q * q + t1);
        let (g, k) = (g_a[i], g_b[i]);
        let s_g = (2.0 * g * k + t2) / (g * g + k * k + t2);
        let pcm = p.max(q);
        num += s_pc * s_g * pcm;
        den += pcm;
        plain += s_pc * s_g;
    }
    if den == 0.0 {
        // no phase-congruent structure in either image
        return Ok(plain / (h * w) as f64);
    }
    Ok(num / den)
}
