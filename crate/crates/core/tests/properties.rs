use moco_core::image::Image2D;
use moco_core::kspace::{corrupt_kspace, fft2_forward, fft2_inverse, ComplexImage, MotionParams};
use moco_core::metrics::{iqi, psnr, ssim};
use moco_core::nets::WeightStore;
use moco_core::ndauto::Tensor;
use moco_core::Image64;
use num_complex::Complex;
use proptest::prelude::*;

fn even(lo: usize, hi: usize) -> impl Strategy<Value = usize> {
    (lo / 2..=hi / 2).prop_map(|n| 2 * n)
}

fn plane(h: usize, w: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..1.0, h * w)
}

fn impulse(h: usize, w: usize, y: usize, x: usize) -> Image64 {
    Image2D::from_fn(h, w, |r, c| if (r, c) == (y, x) { 1.0 } else { 0.0 })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fft_round_trip_and_parseval(
        (h, w, re, im) in (even(4, 24), even(4, 24)).prop_flat_map(|(h, w)| (Just(h), Just(w), plane(h, w), plane(h, w)))
    ) {
        let data: Vec<Complex<f64>> = re.iter().zip(&im).map(|(&a, &b)| Complex::new(a - 0.5, b)).collect();
        let x = ComplexImage::new(h, w, data).unwrap();
        let k = fft2_forward(&x).unwrap();
        let spatial: f64 = x.data().iter().map(|v| v.norm_sqr()).sum();
        let spectral: f64 = k.data().iter().map(|v| v.norm_sqr()).sum::<f64>() / (h * w) as f64;
        prop_assert!((spatial - spectral).abs() <= 1e-9 * spatial.max(1.0));
        let back = fft2_inverse(&k).unwrap();
        for (a, b) in back.data().iter().zip(x.data()) {
            prop_assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn integer_displacement_is_a_roll(
        (h, w, pix) in (even(4, 32), even(4, 32)).prop_flat_map(|(h, w)| (Just(h), Just(w), plane(h, w))),
        shift in -5i32..=5,
    ) {
        let img = Image2D::new(h, w, pix).unwrap();
        let p = MotionParams::new(shift.abs() as f64, 0.0, shift.signum() as f64 * std::f64::consts::FRAC_PI_2)
            .with_center_fraction(0.0);
        let out = corrupt_kspace(&img, &p).unwrap();
        prop_assert!(out.corrupted.max_abs_diff(&img.roll_rows(shift as isize)) < 1e-9);
    }

    #[test]
    fn corruption_preserves_energy(
        (h, w, pix) in (even(4, 32), even(4, 32)).prop_flat_map(|(h, w)| (Just(h), Just(w), plane(h, w))),
        a in 0.0f64..8.0, c in 0.0f64..6.0, beta in -7.0f64..7.0, cf in 0.0f64..0.9,
    ) {
        let img = Image2D::new(h, w, pix).unwrap();
        let out = corrupt_kspace(&img, &MotionParams::new(a, c, beta).with_center_fraction(cf)).unwrap();
        let e = img.energy();
        prop_assert!((out.corrupted.energy() - e).abs() <= 1e-9 * e.max(1e-12));
    }

    /// Larger breathing amplitude never improves PSNR against the clean
    /// image, for an impulse away from the image center. The peak phase
    /// error is `pi * A`, so this holds while `A <= 1`; beyond that the
    /// phases wrap (see `phase_wrapping_breaks_monotonicity`).
    #[test]
    fn monotone_degradation_on_impulse(
        a1 in 0.02f64..0.5, extra in 0.01f64..0.5, c in 1.0f64..4.0, beta in 0.0f64..std::f64::consts::TAU,
        y in 5usize..27, x in 5usize..27,
    ) {
        let img = impulse(32, 32, y, x);
        let p = |a: f64| MotionParams::new(a, c, beta).with_center_fraction(0.1);
        let low = psnr(&corrupt_kspace(&img, &p(a1)).unwrap().corrupted, &img).unwrap();
        let high = psnr(&corrupt_kspace(&img, &p(a1 + extra)).unwrap().corrupted, &img).unwrap();
        prop_assert!(high <= low + 1e-9, "A={a1}: {low} dB, A={}: {high} dB", a1 + extra);
    }

    #[test]
    fn window_metrics_stay_in_range(
        (pa, pb) in (plane(20, 20), plane(20, 20)),
        gain in 0.0f64..1.0,
    ) {
        let a = Image2D::new(20, 20, pa).unwrap();
        let b = Image2D::new(20, 20, pb).unwrap().map(|v| v * gain);
        let s = ssim(&a, &b).unwrap();
        let q = iqi(&a, &b).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        prop_assert!((-1.0..=1.0).contains(&q));
        prop_assert_eq!(s, ssim(&b, &a).unwrap());
        prop_assert!(psnr(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn weight_store_round_trip(
        tensors in prop::collection::vec((1usize..5, 1usize..5, prop::collection::vec(-1e30f32..1e30, 16)), 1..6),
    ) {
        let mut store = WeightStore::<f32>::new();
        for (i, (r, c, v)) in tensors.into_iter().enumerate() {
            store.insert(format!("t{i}"), Tensor::new(&[r, c], v[..r * c].to_vec()).unwrap()).unwrap();
        }
        let bytes = store.to_bytes().unwrap();
        let back = WeightStore::<f32>::from_bytes(&bytes).unwrap();
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }
}

#[test]
fn phase_wrapping_breaks_monotonicity() {
    let img = impulse(32, 32, 5, 5);
    let p = |a: f64| MotionParams::new(a, 2.3916403375021082, 0.0).with_center_fraction(0.1);
    let low = psnr(&corrupt_kspace(&img, &p(1.8576968378945542)).unwrap().corrupted, &img).unwrap();
    let high = psnr(&corrupt_kspace(&img, &p(1.9076968378945542)).unwrap().corrupted, &img).unwrap();
    assert!(high > low + 0.02, "{low} {high}");
}
