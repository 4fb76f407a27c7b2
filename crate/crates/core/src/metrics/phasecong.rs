//! Log-Gabor phase congruency (Kovesi's formulation, as used by FSIM).
//!
//! Each orientation sums the energy of the filter responses projected on
//! their mean phase, subtracts a noise threshold estimated from the median
//! response of the finest scale, and the orientation totals are normalized
//! by the summed response amplitudes.

use num_complex::Complex;

use crate::error::{shape_err, Result};
use crate::image::Image2D;
use crate::kspace::fft2_in_place;
use crate::scalar::Scalar;

use super::{to_f64, PhaseCongruencyConfig};

pub const MIN_PC_SIZE: usize = 32;

/// Per-pixel phase congruency in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PCMap {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl PCMap {
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

pub fn phase_congruency<T: Scalar>(img: &Image2D<T>) -> Result<PCMap> {
    phase_congruency_with(img, &PhaseCongruencyConfig::default())
}

pub fn phase_congruency_with<T: Scalar>(img: &Image2D<T>, cfg: &PhaseCongruencyConfig) -> Result<PCMap> {
    let (h, w) = img.dims();
    if h < MIN_PC_SIZE || w < MIN_PC_SIZE {
        return shape_err(
            "phase_congruency",
            format!("image {h}x{w} smaller than {MIN_PC_SIZE}x{MIN_PC_SIZE}"),
        );
    }
    let scaled: Vec<f64> = to_f64(img).into_iter().map(|v| v * cfg.intensity_scale).collect();
    let values = compute(&scaled, h, w, cfg);
    Ok(PCMap { height: h, width: w, values })
}

/// Normalized frequency coordinate of unshifted FFT index `i` on an axis of
/// length `n`.
fn freq(i: usize, n: usize) -> f64 {
    let j = (i + n / 2) % n;
    if n % 2 == 1 {
        (j as f64 - ((n - 1) / 2) as f64) / (n - 1) as f64
    } else {
        (j as f64 - (n / 2) as f64) / n as f64
    }
}

fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, &mut upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lower + upper) / 2.0
    }
}

pub(crate) fn compute(img: &[f64], h: usize, w: usize, cfg: &PhaseCongruencyConfig) -> Vec<f64> {
    let n = h * w;
    let mut spectrum: Vec<Complex<f64>> = img.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft2_in_place(&mut spectrum, h, w, false);

    let mut radius = vec![0.0; n];
    let mut sin_t = vec![0.0; n];
    let mut cos_t = vec![0.0; n];
    let mut lowpass = vec![0.0; n];
    for r in 0..h {
        let fy = freq(r, h);
        for c in 0..w {
            let fx = freq(c, w);
            let i = r * w + c;
            let rad = (fx * fx + fy * fy).sqrt();
            lowpass[i] = 1.0 / (1.0 + (rad / cfg.lowpass_cutoff).powi(2 * cfg.lowpass_order));
            radius[i] = rad;
            let theta = (-fy).atan2(fx);
            sin_t[i] = theta.sin();
            cos_t[i] = theta.cos();
        }
    }
    radius[0] = 1.0;

    let log_gabor: Vec<Vec<f64>> = (0..cfg.scales)
        .map(|s| {
            let wavelength = cfg.min_wavelength * cfg.mult.powi(s as i32);
            let fo = 1.0 / wavelength;
            let denom = 2.0 * cfg.sigma_onf.ln().powi(2);
            let mut g: Vec<f64> = radius
                .iter()
                .zip(&lowpass)
                .map(|(&r, &lp)| (-(r / fo).ln().powi(2) / denom).exp() * lp)
                .collect();
            g[0] = 0.0;
            g
        })
        .collect();

    let theta_sigma = std::f64::consts::PI / cfg.orientations as f64 / cfg.d_theta_on_sigma;
    let sqrt_n = (n as f64).sqrt();
    let inv_n = 1.0 / n as f64;

    let mut energy_all = vec![0.0; n];
    let mut an_all = vec![0.0; n];
    let mut filter = vec![0.0; n];
    let mut buf = vec![Complex::new(0.0, 0.0); n];

    for o in 0..cfg.orientations {
        let angle = o as f64 * std::f64::consts::PI / cfg.orientations as f64;
        let (sa, ca) = angle.sin_cos();
        let spread: Vec<f64> = (0..n)
            .map(|i| {
                let ds = sin_t[i] * ca - cos_t[i] * sa;
                let dc = cos_t[i] * ca + sin_t[i] * sa;
                let dtheta = ds.atan2(dc).abs();
                (-(dtheta * dtheta) / (2.0 * theta_sigma * theta_sigma)).exp()
            })
            .collect();

        let mut sum_e = vec![0.0; n];
        let mut sum_o = vec![0.0; n];
        let mut sum_an = vec![0.0; n];
        let mut responses: Vec<Vec<Complex<f64>>> = Vec::with_capacity(cfg.scales);
        let mut spatial_filters: Vec<Vec<f64>> = Vec::with_capacity(cfg.scales);
        let mut em_n = 0.0;

        for (s, lg) in log_gabor.iter().enumerate() {
            for i in 0..n {
                filter[i] = lg[i] * spread[i];
            }
            if s == 0 {
                em_n = filter.iter().map(|f| f * f).sum();
            }
            // spatial-domain filter, real part, scaled by sqrt(n)
            for i in 0..n {
                buf[i] = Complex::new(filter[i], 0.0);
            }
            fft2_in_place(&mut buf, h, w, true);
            spatial_filters.push(buf.iter().map(|v| v.re * inv_n * sqrt_n).collect());

            for i in 0..n {
                buf[i] = spectrum[i] * filter[i];
            }
            fft2_in_place(&mut buf, h, w, true);
            for v in buf.iter_mut() {
                *v *= inv_n;
            }
            for i in 0..n {
                sum_an[i] += buf[i].norm();
                sum_e[i] += buf[i].re;
                sum_o[i] += buf[i].im;
            }
            responses.push(buf.clone());
        }

        let mut energy = vec![0.0; n];
        for i in 0..n {
            let x_energy = (sum_e[i] * sum_e[i] + sum_o[i] * sum_o[i]).sqrt() + cfg.epsilon;
            let mean_e = sum_e[i] / x_energy;
            let mean_o = sum_o[i] / x_energy;
            for resp in &responses {
                let (e, od) = (resp[i].re, resp[i].im);
                energy[i] += e * mean_e + od * mean_o - (e * mean_o - od * mean_e).abs();
            }
        }

        let mut e2: Vec<f64> = responses[0].iter().map(|v| v.norm_sqr()).collect();
        let mean_e2n = -median(&mut e2) / 0.5f64.ln();
        let noise_power = mean_e2n / em_n;

        let mut est_sum_an2 = 0.0;
        for f in &spatial_filters {
            est_sum_an2 += f.iter().map(|v| v * v).sum::<f64>();
        }
        let mut est_sum_ai_aj = 0.0;
        for si in 0..spatial_filters.len() {
            for sj in si + 1..spatial_filters.len() {
                est_sum_ai_aj += spatial_filters[si]
                    .iter()
                    .zip(&spatial_filters[sj])
                    .map(|(a, b)| a * b)
                    .sum::<f64>();
            }
        }
        let est_noise_energy2 = 2.0 * noise_power * est_sum_an2 + 4.0 * noise_power * est_sum_ai_aj;
        let tau = (est_noise_energy2 / 2.0).sqrt();
        let est_noise_energy = tau * (std::f64::consts::PI / 2.0).sqrt();
        let est_noise_sigma = ((2.0 - std::f64::consts::PI / 2.0) * tau * tau).sqrt();
        let threshold = (est_noise_energy + cfg.k * est_noise_sigma) / 1.7;

        for i in 0..n {
            energy_all[i] += (energy[i] - threshold).max(0.0);
            an_all[i] += sum_an[i];
        }
    }

    energy_all
        .iter()
        .zip(&an_all)
        .map(|(&e, &a)| (e / (a + cfg.epsilon)).clamp(0.0, 1.0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Sharp rise at column `at`, smooth raised-cosine return over the last
    /// quarter so the periodic wrap adds no second step.
    fn step_edge(h: usize, w: usize, at: usize) -> Image2D<f64> {
        let ramp = w / 4;
        Image2D::from_fn(h, w, |_, x| {
            if x < at {
                0.2
            } else if x < w - ramp {
                0.7
            } else {
                let t = (x - (w - ramp)) as f64 / ramp as f64;
                0.45 + 0.25 * (std::f64::consts::PI * t).cos()
            }
        })
    }

    #[test]
    fn constant_image_has_no_features() {
        let pc = phase_congruency(&Image2D::<f64>::filled(32, 40, 0.6)).unwrap();
        assert!(pc.values.iter().all(|&v| v < 1e-6));
    }

    #[test]
    fn contrast_invariant() {
        let img = step_edge(48, 48, 20);
        let base = phase_congruency(&img).unwrap();
        for (a, b) in [(2.0, 0.1), (0.5, -0.3), (1.3, 0.0)] {
            let other = phase_congruency(&img.map(|v| a * v + b)).unwrap();
            let diff = base.values.iter().zip(&other.values).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            assert!(diff < 1e-4, "a={a} b={b} diff={diff}");
        }
    }

    #[test]
    fn ridge_on_step_edge() {
        let img = step_edge(48, 64, 30);
        let pc = phase_congruency(&img).unwrap();
        for y in [10, 24, 40] {
            let (mut best, mut arg) = (-1.0, 0);
            // the smooth return near the right border is a feature too
            for x in 14..46 {
                if pc.get(y, x) > best {
                    best = pc.get(y, x);
                    arg = x;
                }
            }
            // the step lies between columns 29 and 30
            assert!((29..=30).contains(&arg), "row {y}: peak at {arg}");
            assert!(best > 0.5);
        }
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn too_small() {
        assert!(phase_congruency(&Image2D::<f32>::filled(31, 64, 0.0)).is_err());
    }
}
