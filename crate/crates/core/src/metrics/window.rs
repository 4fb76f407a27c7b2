//! Sliding-window statistics over "valid" window positions.

/// Normalized 1-D Gaussian taps of odd length `size`.
pub(crate) fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Separable valid correlation of an `h x w` plane with `taps ⊗ taps`.
/// Output is `(h - k + 1) x (w - k + 1)`.
pub(crate) fn separable_valid(src: &[f64], h: usize, w: usize, taps: &[f64]) -> Vec<f64> {
    let k = taps.len();
    let (oh, ow) = (h - k + 1, w - k + 1);
    let mut horiz = vec![0.0; h * ow];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..ow {
            horiz[y * ow + x] = taps.iter().zip(&row[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut s = 0.0;
            for (i, t) in taps.iter().enumerate() {
                s += t * horiz[(y + i) * ow + x];
            }
            out[y * ow + x] = s;
        }
    }
    out
}

/// Summed-area table with a zero border: `(h + 1) x (w + 1)`.
pub(crate) struct Integral {
    w1: usize,
    table: Vec<f64>,
}

impl Integral {
    pub(crate) fn new(src: &[f64], h: usize, w: usize) -> Self {
        let w1 = w + 1;
        let mut table = vec![0.0; (h + 1) * w1];
        for y in 0..h {
            let mut run = 0.0;
            for x in 0..w {
                run += src[y * w + x];
                table[(y + 1) * w1 + x + 1] = table[y * w1 + x + 1] + run;
            }
        }
        Self { w1, table }
    }

    /// Sum over the `k x k` window with top-left corner `(y, x)`.
    pub(crate) fn window(&self, y: usize, x: usize, k: usize) -> f64 {
        let t = &self.table;
        let w1 = self.w1;
        t[(y + k) * w1 + x + k] - t[y * w1 + x + k] - t[(y + k) * w1 + x] + t[y * w1 + x]
    }
}
