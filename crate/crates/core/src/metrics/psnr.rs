use crate::error::Result;
use crate::image::Image2D;
use crate::scalar::Scalar;

/// Peak signal-to-noise ratio in dB for peak 1. `+inf` when the images match.
pub fn psnr<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>) -> Result<f64> {
    psnr_with_peak(x, y, 1.0)
}

pub fn psnr_with_peak<T: Scalar>(x: &Image2D<T>, y: &Image2D<T>, peak: f64) -> Result<f64> {
    x.same_dims(y, "psnr")?;
    let sse: f64 = x
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| {
            let d = a.as_f64() - b.as_f64();
            d * d
        })
        .sum();
    let mse = sse / x.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_is_infinite() {
        let a = Image2D::<f32>::from_fn(4, 4, |y, x| (y * x) as f32 / 9.0);
        assert_eq!(psnr(&a, &a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn half_offset() {
        let a = Image2D::<f64>::filled(4, 4, 0.0);
        let b = Image2D::<f64>::filled(4, 4, 0.5);
        assert!((psnr(&a, &b).unwrap() - 6.020599913279624).abs() < 1e-12);
    }

    #[test]
    fn matches_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = Image2D::<f64>::from_fn(9, 7, |_, _| rng.gen());
        let b = a.map(|v| (v + 0.1).min(1.0));
        let mut s = 0.0;
        for y in 0..9 {
            for x in 0..7 {
                s += (a.get(y, x) - b.get(y, x)).powi(2);
            }
        }
        let want = 10.0 * (1.0 / (s / 63.0)).log10();
        assert!((psnr(&a, &b).unwrap() - want).abs() < 1e-9);
        assert!(psnr(&a, &Image2D::filled(3, 3, 0.0)).is_err());
    }
}
