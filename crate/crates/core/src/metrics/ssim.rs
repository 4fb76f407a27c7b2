use crate::error::{shape_err, Result};
use crate::image::Image2D;
use crate::scalar::Scalar;

use super::window::{gaussian_taps, separable_valid};
use super::{to_f64, MetricConfig};

/// Mean SSIM over all valid 11x11 Gaussian-weighted windows.
pub fn ssim<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>) -> Result<f64> {
    ssim_with(x, y, &MetricConfig::default())
}

pub fn ssim_with<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>, cfg: &MetricConfig) -> Result<f64> {
    x.same_dims(y, "ssim")?;
    let (h, w) = x.dims();
    let k = cfg.ssim_window;
    if h < k || w < k {
        return shape_err("ssim", format!("image {h}x{w} smaller than the {k}x{k} window"));
    }
    let c1 = cfg.ssim_k1 * cfg.ssim_k1;
    let c2 = cfg.ssim_k2 * cfg.ssim_k2;
    let taps = gaussian_taps(k, cfg.ssim_sigma);

    let xs = to_f64(x);
    let ys = to_f64(y);
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a * b).collect();

    let mu_x = separable_valid(&xs, h, w, &taps);
    let mu_y = separable_valid(&ys, h, w, &taps);
    let e_xx = separable_valid(&xx, h, w, &taps);
    let e_yy = separable_valid(&yy, h, w, &taps);
    let e_xy = separable_valid(&xy, h, w, &taps);

    let n = mu_x.len();
    let mut total = 0.0;
    for i in 0..n {
        total += ssim_term(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i], c1, c2);
    }
    Ok(total / n as f64)
}

/// One window's SSIM from weighted first and second moments.
pub(crate) fn ssim_term(mx: f64, my: f64, exx: f64, eyy: f64, exy: f64, c1: f64, c2: f64) -> f64 {
    let vx = exx - mx * mx;
    let vy = eyy - my * my;
    let cov = exy - mx * my;
    let s = ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    s.clamp(-1.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Per-window loop with 2-D weights built directly from the Gaussian.
    #[allow(clippy::needless_range_loop)]
    fn naive(x: &Image2D<f64>, y: &Image2D<f64>) -> f64 {
        let (h, w) = x.dims();
        let mut wts = [[0.0; 11]; 11];
        let mut total_w = 0.0;
        for (i, row) in wts.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                let (di, dj) = (i as f64 - 5.0, j as f64 - 5.0);
                *v = (-(di * di + dj * dj) / (2.0 * 1.5 * 1.5)).exp();
                total_w += *v;
            }
        }
        let (c1, c2) = (1e-4, 9e-4);
        let mut acc = 0.0;
        let mut count = 0;
        for oy in 0..=h - 11 {
            for ox in 0..=w - 11 {
                let (mut mx, mut my, mut exx, mut eyy, mut exy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..11 {
                    for j in 0..11 {
                        let wv = wts[i][j] / total_w;
                        let (a, b) = (x.get(oy + i, ox + j), y.get(oy + i, ox + j));
                        mx += wv * a;
                        my += wv * b;
                        exx += wv * a * a;
                        eyy += wv * b * b;
                        exy += wv * a * b;
                    }
                }
                let (vx, vy, cov) = (exx - mx * mx, eyy - my * my, exy - mx * my);
                acc += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn identical_is_exactly_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = Image2D::<f64>::from_fn(16, 20, |_, _| rng.gen());
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn constant_images_closed_form() {
        let a = Image2D::<f64>::filled(12, 12, 0.0);
        let b = Image2D::<f64>::filled(12, 12, 1.0);
        let c1 = 1e-4;
        assert!((ssim(&a, &b).unwrap() - c1 / (1.0 + c1)).abs() < 1e-9);
    }

    #[test]
    fn matches_naive_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Image2D::<f64>::from_fn(16, 16, |_, _| rng.gen());
        let b = Image2D::<f64>::from_fn(16, 16, |_, _| rng.gen());
        assert!((ssim(&a, &b).unwrap() - naive(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn too_small() {
        let a = Image2D::<f64>::filled(10, 30, 0.0);
        assert!(ssim(&a, &a).is_err());
    }
}
