use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{arg_err, shape_err, Result};
use crate::scalar::Scalar;

/// Dense row-major n-dimensional array.
///
/// Values are finite by construction; gradients live on the [`Tape`](super::Tape)
/// that produced a tensor, not on the tensor itself.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    dims: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn new(dims: &[usize], data: Vec<T>) -> Result<Self> {
        if dims.is_empty() || dims.contains(&0) {
            return arg_err("Tensor::new", format!("dims must be positive, got {dims:?}"));
        }
        let n: usize = dims.iter().product();
        if n != data.len() {
            return shape_err(
                "Tensor::new",
                format!("dims {dims:?} hold {n} values but {} were given", data.len()),
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return arg_err("Tensor::new", format!("non-finite value at flat index {i}"));
        }
        Ok(Self { dims: dims.to_vec(), data })
    }

    /// Skips the finiteness scan. Callers guarantee the invariants.
    pub(crate) fn from_parts(dims: Vec<usize>, data: Vec<T>) -> Self {
        debug_assert_eq!(dims.iter().product::<usize>(), data.len());
        Self { dims, data }
    }

    pub fn zeros(dims: &[usize]) -> Self {
        Self::full(dims, T::zero())
    }

    pub fn full(dims: &[usize], value: T) -> Self {
        let n = dims.iter().product();
        Self::from_parts(dims.to_vec(), vec![value; n])
    }

    pub fn scalar(value: T) -> Self {
        Self::from_parts(vec![1], vec![value])
    }

    /// i.i.d. N(0, std²) entries.
    pub fn randn<R: Rng + ?Sized>(dims: &[usize], std: f64, rng: &mut R) -> Self {
        let n = dims.iter().product();
        let data = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                T::lit(z * std)
            })
            .collect();
        Self::from_parts(dims.to_vec(), data)
    }

    /// i.i.d. U[lo, hi) entries.
    pub fn uniform<R: Rng + ?Sized>(dims: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let n = dims.iter().product();
        let data = (0..n).map(|_| T::lit(rng.gen_range(lo..hi))).collect();
        Self::from_parts(dims.to_vec(), data)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    /// Mutable access for optimizer updates between steps. Never use on a
    /// tensor that is part of a live tape.
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn reshape(&self, dims: &[usize]) -> Result<Self> {
        let n: usize = dims.iter().product();
        if n != self.len() {
            return shape_err(
                "reshape",
                format!("cannot view {:?} as {:?}", self.dims, dims),
            );
        }
        Ok(Self::from_parts(dims.to_vec(), self.data.clone()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self::from_parts(self.dims.clone(), self.data.iter().map(|&v| f(v)).collect())
    }

    /// Converts element type, e.g. an `f32` weight set into the `f64`
    /// verification mode.
    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor::from_parts(
            self.dims.clone(),
            self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        )
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64().powi(2)).sum::<f64>().sqrt()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Option<T> {
        (self.len() == 1).then(|| self.data[0])
    }

    /// NCHW accessor; panics on out-of-range indices.
    pub fn at4(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        let [_, cc, hh, ww] = self.dims4();
        self.data[((n * cc + c) * hh + h) * ww + w]
    }

    pub(crate) fn dims4(&self) -> [usize; 4] {
        [self.dims[0], self.dims[1], self.dims[2], self.dims[3]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_construction() {
        assert!(Tensor::<f32>::new(&[2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::<f32>::new(&[2, 0], vec![]).is_err());
        assert!(Tensor::<f32>::new(&[1], vec![f32::NAN]).is_err());
        assert!(Tensor::<f32>::new(&[1], vec![f32::INFINITY]).is_err());
        assert!(Tensor::<f32>::new(&[3, 1], vec![1.0, 2.0, 3.0]).is_ok());
    }

    #[test]
    fn seeded_random_is_reproducible() {
        let a = Tensor::<f32>::randn(&[4, 5], 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        let b = Tensor::<f32>::randn(&[4, 5], 1.0, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn cast_round_trip() {
        let a = Tensor::<f32>::new(&[2], vec![0.1, -3.5]).unwrap();
        assert_eq!(a.cast::<f64>().cast::<f32>(), a);
    }
}
