//! Rigid respiratory translation along the phase-encode axis.
//!
//! Lines are acquired in storage order, so line `ky` is sampled at
//! normalized time `(ky + H/2) / H`. A sinusoidal displacement `Δ(ky)` at
//! that time becomes a linear phase `exp(-i·2π·ky·Δ/H)` on the line by the
//! Fourier shift theorem.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg_err, Result};
use crate::image::Image2D;
use crate::scalar::Scalar;

use super::{fft2_inverse, fft2_real};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionParams {
    /// Peak displacement in pixels.
    pub amplitude_px: f64,
    /// Breathing cycles over the whole acquisition.
    pub cycles: f64,
    pub phase_rad: f64,
    /// Central fraction of phase-encode lines left untouched.
    pub center_fraction: f64,
    /// Seed of the stream the parameters were drawn from.
    pub seed: u64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self { amplitude_px: 0.0, cycles: 0.0, phase_rad: 0.0, center_fraction: 0.1, seed: 0 }
    }
}

impl MotionParams {
    pub fn new(amplitude_px: f64, cycles: f64, phase_rad: f64) -> Self {
        Self { amplitude_px, cycles, phase_rad, ..Self::default() }
    }

    pub fn with_center_fraction(mut self, center_fraction: f64) -> Self {
        self.center_fraction = center_fraction;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude_px.is_finite() && self.amplitude_px >= 0.0) {
            return arg_err("MotionParams", format!("amplitude_px must be finite and >= 0, got {}", self.amplitude_px));
        }
        if !(self.cycles.is_finite() && self.cycles >= 0.0) {
            return arg_err("MotionParams", format!("cycles must be finite and >= 0, got {}", self.cycles));
        }
        if !self.phase_rad.is_finite() {
            return arg_err("MotionParams", "phase_rad must be finite");
        }
        if !(0.0..1.0).contains(&self.center_fraction) {
            return arg_err(
                "MotionParams",
                format!("center_fraction must lie in [0, 1), got {}", self.center_fraction),
            );
        }
        Ok(())
    }

    /// Whether phase-encode line `ky` sits in the protected center band.
    pub fn is_protected(&self, ky: i64, height: usize) -> bool {
        (ky.unsigned_abs() as f64) < self.center_fraction * height as f64 / 2.0
    }
}

/// Uniform sampling ranges for [`MotionParams`], inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MotionRanges {
    pub amplitude_px: [f64; 2],
    pub cycles: [f64; 2],
    pub phase_rad: [f64; 2],
    pub center_fraction: f64,
}

impl Default for MotionRanges {
    fn default() -> Self {
        Self {
            amplitude_px: [1.0, 4.0],
            cycles: [2.0, 4.0],
            phase_rad: [0.0, std::f64::consts::TAU],
            center_fraction: 0.1,
        }
    }
}

impl MotionRanges {
    pub fn validate(&self) -> Result<()> {
        for (name, [lo, hi]) in [("amplitude_px", self.amplitude_px), ("cycles", self.cycles), ("phase_rad", self.phase_rad)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return arg_err("MotionRanges", format!("{name} range [{lo}, {hi}] is empty or non-finite"));
            }
        }
        self.draw(0).validate()
    }

    /// Parameters drawn from a stream seeded with `seed`.
    pub fn draw(&self, seed: u64) -> MotionParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |[lo, hi]: [f64; 2]| if lo < hi { rng.gen_range(lo..=hi) } else { lo };
        MotionParams {
            amplitude_px: pick(self.amplitude_px),
            cycles: pick(self.cycles),
            phase_rad: pick(self.phase_rad),
            center_fraction: self.center_fraction,
            seed,
        }
    }
}

/// Displacement in pixels while line `ky` (centered index) is acquired:
/// `A·sin(2π·c·(ky + H/2)/H + β)`.
pub fn respiratory_displacement(params: &MotionParams, ky: i64, height: usize) -> f64 {
    let line = (ky + (height / 2) as i64) as f64;
    params.amplitude_px
        * (2.0 * std::f64::consts::PI * params.cycles * line / height as f64 + params.phase_rad).sin()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptedPair<T> {
    pub corrupted: Image2D<T>,
    /// `|ifft2(fft2(clean))|`, so both images share one numerical lineage.
    pub clean_roundtrip: Image2D<T>,
}

/// Applies the per-line phase error to the clean image's k-space and
/// returns magnitude reconstructions with and without it.
pub fn corrupt_kspace<T: Scalar>(clean: &Image2D<T>, params: &MotionParams) -> Result<CorruptedPair<T>> {
    params.validate()?;
    let spectrum = fft2_real(clean)?;
    let mut corrupted = spectrum.clone();
    let h = spectrum.height();
    for row in 0..h {
        let ky = spectrum.ky(row);
        if params.is_protected(ky, h) {
            continue;
        }
        let delta = respiratory_displacement(params, ky, h);
        let angle = -2.0 * std::f64::consts::PI * ky as f64 * delta / h as f64;
        let factor = Complex::new(T::lit(angle.cos()), T::lit(angle.sin()));
        for v in corrupted.row_mut(row) {
            *v *= factor;
        }
    }
    Ok(CorruptedPair {
        corrupted: fft2_inverse(&corrupted)?.magnitude(),
        clean_roundtrip: fft2_inverse(&spectrum)?.magnitude(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn displacement_examples() {
        let zero = MotionParams::new(0.0, 3.0, 0.4);
        assert!((-64..64).all(|ky| respiratory_displacement(&zero, ky, 128) == 0.0));
        let flat = MotionParams::new(1.5, 0.0, FRAC_PI_2);
        assert!((-64..64).all(|ky| respiratory_displacement(&flat, ky, 128) == 1.5));
        let p = MotionParams::new(2.0, 3.0, 0.0);
        // acquisition line 16 is ky = 16 - 64
        let d = respiratory_displacement(&p, 16 - 64, 128);
        assert!((d - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn ranges_draw_inside_and_deterministic() {
        let r = MotionRanges::default();
        for seed in 0..50 {
            let p = r.draw(seed);
            assert!((1.0..=4.0).contains(&p.amplitude_px) && (2.0..=4.0).contains(&p.cycles));
            assert_eq!(p.center_fraction, 0.1);
            assert_eq!(p, r.draw(seed));
        }
        let fixed = MotionRanges { amplitude_px: [0.0, 0.0], ..r };
        assert_eq!(fixed.draw(3).amplitude_px, 0.0);
        assert!(MotionRanges { cycles: [3.0, 2.0], ..r }.validate().is_err());
    }

    #[test]
    fn validation() {
        assert!(MotionParams::new(-1.0, 1.0, 0.0).validate().is_err());
        assert!(MotionParams::new(1.0, 1.0, 0.0).with_center_fraction(1.0).validate().is_err());
        assert!(MotionParams::new(f64::NAN, 1.0, 0.0).validate().is_err());
        assert!(MotionParams::new(1.0, 1.0, 0.0).validate().is_ok());
    }

    #[test]
    fn protected_band() {
        let p = MotionParams::default(); // 0.1 of 64 lines -> |ky| < 3.2
        assert!(p.is_protected(3, 64));
        assert!(p.is_protected(-3, 64));
        assert!(!p.is_protected(4, 64));
        let open = p.with_center_fraction(0.0);
        assert!(!open.is_protected(0, 64));
    }
}
