//! Mixed-radix Cooley-Tukey FFT for arbitrary lengths.
//!
//! Lengths are factored into 2s, then 3s, then any remaining primes. Radix 2
//! and 3 have dedicated butterflies; other primes fall back to a direct
//! `O(p^2)` butterfly, so every length is supported and 2^a·3^b lengths run
//! in `O(n log n)`.

use num_complex::Complex;

use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    factors: Vec<usize>,
    /// `exp(-2πi k / len)` for `k in 0..len`.
    twiddles: Vec<Complex<T>>,
}

fn factorize(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for p in [2usize, 3] {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
    }
    let mut p = 5;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 2;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Self {
        assert!(len > 0, "FFT length must be positive");
        let twiddles = (0..len)
            .map(|k| {
                let angle = -2.0 * std::f64::consts::PI * k as f64 / len as f64;
                Complex::new(T::lit(angle.cos()), T::lit(angle.sin()))
            })
            .collect();
        Self { len, factors: factorize(len), twiddles }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn factors(&self) -> &[usize] {
        &self.factors
    }

    /// Unnormalized transform in place. `inverse` flips the exponent sign.
    pub fn process(&self, data: &mut [Complex<T>], inverse: bool) {
        assert_eq!(data.len(), self.len, "buffer length differs from plan");
        if self.len == 1 {
            return;
        }
        let input = data.to_vec();
        self.recurse(&input, 0, 1, data, &self.factors, inverse);
    }

    fn twiddle(&self, k: usize, n_sub: usize, inverse: bool) -> Complex<T> {
        let idx = (k * (self.len / n_sub)) % self.len;
        let w = self.twiddles[idx];
        if inverse {
            w.conj()
        } else {
            w
        }
    }

    /// Transforms `input[offset + j*stride]` for `j < out.len()` into `out`.
    fn recurse(
        &self,
        input: &[Complex<T>],
        offset: usize,
        stride: usize,
        out: &mut [Complex<T>],
        factors: &[usize],
        inverse: bool,
    ) {
        let n = out.len();
        if n == 1 {
            out[0] = input[offset];
            return;
        }
        let p = factors[0];
        let m = n / p;
        for q in 0..p {
            self.recurse(
                input,
                offset + q * stride,
                stride * p,
                &mut out[q * m..(q + 1) * m],
                &factors[1..],
                inverse,
            );
        }
        match p {
            2 => {
                for k in 0..m {
                    let a = out[k];
                    let b = out[k + m] * self.twiddle(k, n, inverse);
                    out[k] = a + b;
                    out[k + m] = a - b;
                }
            }
            3 => {
                let half = T::lit(0.5);
                let s = T::lit(3f64.sqrt() / 2.0) * if inverse { T::one() } else { -T::one() };
                for k in 0..m {
                    let a = out[k];
                    let b = out[k + m] * self.twiddle(k, n, inverse);
                    let c = out[k + 2 * m] * self.twiddle(2 * k, n, inverse);
                    let sum = b + c;
                    let diff = b - c;
                    let mid = a - sum * half;
                    // i * s * (b - c)
                    let rot = Complex::new(-diff.im * s, diff.re * s);
                    out[k] = a + sum;
                    out[k + m] = mid + rot;
                    out[k + 2 * m] = mid - rot;
                }
            }
            _ => {
                let mut scratch = vec![Complex::new(T::zero(), T::zero()); p];
                for k in 0..m {
                    for (q, s) in scratch.iter_mut().enumerate() {
                        *s = out[k + q * m] * self.twiddle(q * k, n, inverse);
                    }
                    for s_idx in 0..p {
                        let mut acc = Complex::new(T::zero(), T::zero());
                        for (q, &v) in scratch.iter().enumerate() {
                            acc += v * self.twiddle((q * s_idx * m) % n, n, inverse);
                        }
                        out[k + s_idx * m] = acc;
                    }
                }
            }
        }
    }
}

/// Unnormalized, unshifted 2-D transform of a row-major `h x w` grid.
pub fn fft2_in_place<T: Scalar>(data: &mut [Complex<T>], h: usize, w: usize, inverse: bool) {
    assert_eq!(data.len(), h * w);
    let row_plan = FftPlan::<T>::new(w);
    for row in data.chunks_exact_mut(w) {
        row_plan.process(row, inverse);
    }
    let col_plan = FftPlan::<T>::new(h);
    let mut col = vec![Complex::new(T::zero(), T::zero()); h];
    for x in 0..w {
        for (y, c) in col.iter_mut().enumerate() {
            *c = data[y * w + x];
        }
        col_plan.process(&mut col, inverse);
        for (y, c) in col.iter().enumerate() {
            data[y * w + x] = *c;
        }
    }
}

/// Direct double-summation 1-D DFT along one axis, unnormalized.
pub(crate) fn dft_naive_1d<T: Scalar>(input: &[Complex<T>], inverse: bool) -> Vec<Complex<T>> {
    let n = input.len();
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|k| {
            let mut acc = Complex::new(0.0f64, 0.0);
            for (j, v) in input.iter().enumerate() {
                let angle = sign * 2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                let w = Complex::new(angle.cos(), angle.sin());
                acc += Complex::new(v.re.as_f64(), v.im.as_f64()) * w;
            }
            Complex::new(T::lit(acc.re), T::lit(acc.im))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn factors() {
        assert_eq!(factorize(192), vec![2, 2, 2, 2, 2, 2, 3]);
        assert_eq!(factorize(14), vec![2, 7]);
        assert_eq!(factorize(25), vec![5, 5]);
        assert_eq!(factorize(1), Vec::<usize>::new());
    }

    #[test]
    fn one_d_matches_naive() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 3, 4, 5, 6, 7, 9, 10, 12, 14, 15, 16, 18, 25, 49, 64, 96, 192] {
            let x: Vec<Complex<f64>> =
                (0..n).map(|_| Complex::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            for inverse in [false, true] {
                let mut y = x.clone();
                FftPlan::new(n).process(&mut y, inverse);
                let want = dft_naive_1d(&x, inverse);
                for (a, b) in y.iter().zip(&want) {
                    assert!((a - b).norm() < 1e-9 * n as f64, "n={n}");
                }
            }
        }
    }
}
