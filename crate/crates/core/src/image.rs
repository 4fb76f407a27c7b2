use crate::error::{arg_err, shape_err, Result};
use crate::ndauto::Tensor;
use crate::scalar::Scalar;

/// Single-channel real image, row-major, nominally in `[0, 1]`.
///
/// Rows are the phase-encode axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Scalar> Image2D<T> {
    pub fn new(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return arg_err("Image2D::new", "dims must be positive");
        }
        if data.len() != height * width {
            return shape_err(
                "Image2D::new",
                format!("{height}x{width} image needs {} values, got {}", height * width, data.len()),
            );
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return arg_err("Image2D::new", format!("non-finite pixel at flat index {i}"));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Self { height, width, data: vec![value; height * width] }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self { height, width, data }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { height: self.height, width: self.width, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn cast<U: Scalar>(&self) -> Image2D<U> {
        Image2D {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Mirror left-right.
    pub fn flip_horizontal(&self) -> Self {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev());
        }
        Self { height: self.height, width: self.width, data }
    }

    /// Circular shift by `dy` rows (positive moves content down).
    pub fn roll_rows(&self, dy: isize) -> Self {
        let h = self.height as isize;
        Self::from_fn(self.height, self.width, |y, x| {
            let src = (y as isize - dy).rem_euclid(h) as usize;
            self.get(src, x)
        })
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.as_f64().powi(2)).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a.as_f64() - b.as_f64()).abs())
            .fold(0.0, f64::max)
    }

    pub fn same_dims(&self, other: &Self, op: &'static str) -> Result<()> {
        if self.dims() != other.dims() {
            return shape_err(
                op,
                format!("image dims {:?} vs {:?}", self.dims(), other.dims()),
            );
        }
        Ok(())
    }
}

/// Stacks equally sized images into an `[N, 1, H, W]` tensor.
pub fn batch_tensor<T: Scalar, U: Scalar>(images: &[&Image2D<U>]) -> Result<Tensor<T>> {
    let Some(first) = images.first() else {
        return arg_err("batch_tensor", "empty batch");
    };
    let (h, w) = first.dims();
    let mut data = Vec::with_capacity(images.len() * h * w);
    for img in images {
        img.same_dims(first, "batch_tensor")?;
        data.extend(img.data().iter().map(|v| T::lit(v.as_f64())));
    }
    Tensor::new(&[images.len(), 1, h, w], data)
}

/// Splits an `[N, 1, H, W]` tensor into images.
pub fn unbatch<T: Scalar, U: Scalar>(t: &Tensor<T>) -> Result<Vec<Image2D<U>>> {
    let d = t.dims();
    if d.len() != 4 || d[1] != 1 {
        return shape_err("unbatch", format!("expected [N,1,H,W], got {d:?}"));
    }
    let (h, w) = (d[2], d[3]);
    t.data()
        .chunks_exact(h * w)
        .map(|c| Image2D::new(h, w, c.iter().map(|v| U::lit(v.as_f64())).collect()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flip_is_involution() {
        let img = Image2D::<f32>::from_fn(3, 4, |y, x| (y * 4 + x) as f32);
        let f = img.flip_horizontal();
        assert_eq!(f.get(0, 0), 3.0);
        assert_eq!(f.flip_horizontal(), img);
    }

    #[test]
    fn roll_wraps() {
        let img = Image2D::<f32>::from_fn(4, 1, |y, _| y as f32);
        assert_eq!(img.roll_rows(1).data(), &[3.0, 0.0, 1.0, 2.0]);
        assert_eq!(img.roll_rows(-1).data(), &[1.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn batching_round_trip() {
        let a = Image2D::<f32>::from_fn(2, 3, |y, x| (y + x) as f32 / 4.0);
        let b = a.flip_horizontal();
        let t: Tensor<f64> = batch_tensor(&[&a, &b]).unwrap();
        assert_eq!(t.dims(), &[2, 1, 2, 3]);
        let back: Vec<Image2D<f32>> = unbatch(&t).unwrap();
        assert_eq!(back, vec![a, b]);
    }
}
