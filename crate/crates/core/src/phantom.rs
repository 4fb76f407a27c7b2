//! Procedural test images: a few soft-edged ellipses over a linear ramp.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::image::Image2D;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhantomConfig {
    pub height: usize,
    pub width: usize,
    pub min_ellipses: usize,
    pub max_ellipses: usize,
    /// Largest ramp amplitude; the ramp direction is random.
    pub ramp_amplitude: f64,
    /// Edge softness in pixels.
    pub edge_px: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self { height: 64, width: 64, min_ellipses: 3, max_ellipses: 6, ramp_amplitude: 0.3, edge_px: 0.75 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub cy: f64,
    pub cx: f64,
    pub ry: f64,
    pub rx: f64,
    pub angle: f64,
    pub intensity: f64,
}

impl Ellipse {
    /// Normalized radius: < 1 inside.
    fn rho(&self, y: f64, x: f64) -> f64 {
        let (s, c) = self.angle.sin_cos();
        let dy = y - self.cy;
        let dx = x - self.cx;
        let u = c * dx + s * dy;
        let v = -s * dx + c * dy;
        ((u / self.rx).powi(2) + (v / self.ry).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    pub seed: u64,
    pub ellipses: Vec<Ellipse>,
    pub image: Image2D<f64>,
}

impl Phantom {
    /// Deterministic in `(cfg, seed)`. Values lie in `[0, 1]`.
    pub fn generate(cfg: &PhantomConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (h, w) = (cfg.height as f64, cfg.width as f64);
        let scale = h.min(w);

        let ramp_dir: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        let ramp_amp: f64 = rng.gen_range(0.0..=cfg.ramp_amplitude);
        let base: f64 = rng.gen_range(0.05..0.2);

        // one large body ellipse, then smaller inclusions inside it
        let mut ellipses = vec![Ellipse {
            cy: h / 2.0 + rng.gen_range(-0.05..0.05) * h,
            cx: w / 2.0 + rng.gen_range(-0.05..0.05) * w,
            ry: rng.gen_range(0.30..0.42) * h,
            rx: rng.gen_range(0.30..0.42) * w,
            angle: rng.gen_range(-0.4..0.4),
            intensity: rng.gen_range(0.25..0.45),
        }];
        let extra = rng.gen_range(cfg.min_ellipses..=cfg.max_ellipses.max(cfg.min_ellipses));
        for _ in 0..extra {
            ellipses.push(Ellipse {
                cy: h / 2.0 + rng.gen_range(-0.22..0.22) * h,
                cx: w / 2.0 + rng.gen_range(-0.22..0.22) * w,
                ry: rng.gen_range(0.04..0.14) * scale,
                rx: rng.gen_range(0.04..0.14) * scale,
                angle: rng.gen_range(0.0..std::f64::consts::PI),
                intensity: rng.gen_range(-0.2..0.35),
            });
        }

        let (rs, rc) = ramp_dir.sin_cos();
        let edge = cfg.edge_px.max(1e-6);
        let image = Image2D::from_fn(cfg.height, cfg.width, |y, x| {
            let (yf, xf) = (y as f64 + 0.5, x as f64 + 0.5);
            let mut v = base;
            for e in &ellipses {
                // logistic edge, width measured along the minor radius
                let d = (e.rho(yf, xf) - 1.0) * e.ry.min(e.rx) / edge;
                v += e.intensity / (1.0 + d.exp());
            }
            let t = (rc * (xf / w - 0.5) + rs * (yf / h - 0.5)) * 2.0;
            v += ramp_amp * 0.5 * t;
            v.clamp(0.0, 1.0)
        });
        Self { seed, ellipses, image }
    }
}

/// `count` phantoms with seeds `first_seed..first_seed + count`.
pub fn phantom_set(cfg: &PhantomConfig, first_seed: u64, count: usize) -> Vec<Phantom> {
    (0..count as u64).map(|i| Phantom::generate(cfg, first_seed + i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_bounded() {
        let cfg = PhantomConfig::default();
        let a = Phantom::generate(&cfg, 11);
        assert_eq!(a, Phantom::generate(&cfg, 11));
        assert_ne!(a.image, Phantom::generate(&cfg, 12).image);
        assert_eq!(a.image.dims(), (64, 64));
        assert!(a.image.data().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn has_structure() {
        let img = Phantom::generate(&PhantomConfig::default(), 5).image;
        let d = img.data();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let var = d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64;
        assert!(var > 1e-3, "var {var}");
        // body is brighter than the corner background
        assert!(img.get(32, 32) > img.get(1, 1));
    }
}
