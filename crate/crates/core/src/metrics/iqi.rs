use crate::error::{shape_err, Result};
use crate::image::Image2D;
use crate::scalar::Scalar;

use super::window::Integral;
use super::{to_f64, MetricConfig};

/// Universal image quality index: mean over all valid 8x8 windows of
/// `(2σxy + ε)/(σx² + σy² + ε) · (2μxμy + ε)/(μx² + μy² + ε)`.
///
/// With `ε = 0` this is `4σxy·μx·μy / ((σx² + σy²)(μx² + μy²))`. The
/// stabilizer also enters the numerators so that a flat window compared
/// with itself scores 1.
pub fn iqi<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>) -> Result<f64> {
    iqi_with(x, y, &MetricConfig::default())
}

pub fn iqi_with<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>, cfg: &MetricConfig) -> Result<f64> {
    x.same_dims(y, "iqi")?;
    let (h, w) = x.dims();
    let k = cfg.iqi_window;
    if h < k || w < k {
        return shape_err("iqi", format!("image {h}x{w} smaller than the {k}x{k} window"));
    }
    let xs = to_f64(x);
    let ys = to_f64(y);
    let xx: Vec<f64> = xs.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = ys.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = xs.iter().zip(&ys).map(|(a, b)| a * b).collect();
    let [sx, sy, sxx, syy, sxy] = [&xs, &ys, &xx, &yy, &xy].map(|p| Integral::new(p, h, w));

    let n = (k * k) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for oy in 0..=h - k {
        for ox in 0..=w - k {
            let mx = sx.window(oy, ox, k) / n;
            let my = sy.window(oy, ox, k) / n;
            let exx = sxx.window(oy, ox, k) / n;
            let eyy = syy.window(oy, ox, k) / n;
            let exy = sxy.window(oy, ox, k) / n;
            total += iqi_term(mx, my, exx, eyy, exy, cfg.iqi_epsilon);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub(crate) fn iqi_term(mx: f64, my: f64, exx: f64, eyy: f64, exy: f64, eps: f64) -> f64 {
    let vx = exx - mx * mx;
    let vy = eyy - my * my;
    let cov = exy - mx * my;
    // cancellation in the raw moments can push a near-flat window a hair
    // past the Cauchy-Schwarz bound
    let q = ((2.0 * cov + eps) / (vx + vy + eps)) * ((2.0 * mx * my + eps) / (mx * mx + my * my + eps));
    q.clamp(-1.0, 1.0)
}
