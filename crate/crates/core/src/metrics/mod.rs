//! Full-reference image quality: PSNR, SSIM, IQI (universal quality index)
//! and FSIM. Inputs are `[0, 1]` images; all arithmetic is in `f64`.

mod fsim;
mod iqi;
mod phasecong;
mod psnr;
mod ssim;
pub(crate) mod window;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::image::Image2D;
use crate::scalar::Scalar;

pub use fsim::{fsim, fsim_with, gradient_magnitude};
pub use iqi::{iqi, iqi_with};
pub use phasecong::{phase_congruency, phase_congruency_with, PCMap};
pub use psnr::{psnr, psnr_with_peak};
pub use ssim::{ssim, ssim_with};

/// Every constant the metrics depend on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub ssim_window: usize,
    pub ssim_sigma: f64,
    pub ssim_k1: f64,
    pub ssim_k2: f64,
    pub iqi_window: usize,
    pub iqi_epsilon: f64,
    pub pc: PhaseCongruencyConfig,
    pub fsim_t1: f64,
    pub fsim_t2: f64,
    /// Intensity scale FSIM works in; `T1`/`T2` assume 0–255.
    pub fsim_range: f64,
}

/// Log-Gabor phase congruency parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseCongruencyConfig {
    pub scales: usize,
    pub orientations: usize,
    pub min_wavelength: f64,
    pub mult: f64,
    pub sigma_onf: f64,
    pub d_theta_on_sigma: f64,
    /// Noise threshold in standard deviations.
    pub k: f64,
    pub epsilon: f64,
    pub lowpass_cutoff: f64,
    pub lowpass_order: i32,
    /// Internal intensity scale, so `epsilon` keeps its conventional meaning.
    pub intensity_scale: f64,
}

impl Default for PhaseCongruencyConfig {
    fn default() -> Self {
        Self {
            scales: 4,
            orientations: 4,
            min_wavelength: 6.0,
            mult: 2.0,
            sigma_onf: 0.55,
            d_theta_on_sigma: 1.2,
            k: 2.0,
            epsilon: 1e-4,
            lowpass_cutoff: 0.45,
            lowpass_order: 15,
            intensity_scale: 255.0,
        }
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            ssim_window: 11,
            ssim_sigma: 1.5,
            ssim_k1: 0.01,
            ssim_k2: 0.03,
            iqi_window: 8,
            iqi_epsilon: 1e-12,
            pc: PhaseCongruencyConfig::default(),
            fsim_t1: 0.85,
            fsim_t2: 160.0,
            fsim_range: 255.0,
        }
    }
}

/// Minimum side length accepted by [`evaluate_pair`].
pub const MIN_EVAL_SIZE: usize = 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub pair_id: String,
    /// `+inf` for identical images.
    pub psnr_db: f64,
    pub ssim: f64,
    pub iqi: f64,
    pub fsim: f64,
}

/// All four metrics for one prediction/target pair.
pub fn evaluate_pair<T: Scalar>(pred: &Image2D<T>, target: &Image2D<T>, pair_id: &str) -> Result<MetricReport> {
    let cfg = MetricConfig::default();
    Ok(MetricReport {
        pair_id: pair_id.to_string(),
        psnr_db: psnr(pred, target)?,
        ssim: ssim_with(pred, target, &cfg)?,
        iqi: iqi_with(pred, target, &cfg)?,
        fsim: fsim_with(pred, target, &cfg)?,
    })
}

pub(crate) fn to_f64<T: Scalar>(img: &Image2D<T>) -> Vec<f64> {
    img.data().iter().map(|v| v.as_f64()).collect()
}
