use alloc::vec::Vec;
use core::fmt::Debug;
use core::ops::{Add, Mul};

use num_traits::{One, Zero};

use crate::{Error, Result, TensorShape};

/// Element type of a [`DenseTensor`].
///
/// Integers make crossbar-versus-direct comparisons exact.
pub trait Scalar:
    Copy + PartialEq + Debug + Zero + One + Add<Output = Self> + Mul<Output = Self>
{
    fn max_of(self, other: Self) -> Self;
    /// `sum / count`; truncating for integers.
    fn mean_of(sum: Self, count: usize) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for i64 {
    fn max_of(self, other: Self) -> Self {
        self.max(other)
    }

    fn mean_of(sum: Self, count: usize) -> Self {
        sum / count as i64
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn mean_of(sum: Self, count: usize) -> Self {
        sum / count as f64
    }

    fn to_f64(self) -> f64 {
        self
    }
}

/// Row-major 4-D tensor, dims `(batch, channel, row, col)`. Convolution
/// weights use the same layout as `(out, in, ky, kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseTensor<T> {
    dims: [usize; 4],
    values: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new(dims: [usize; 4], values: Vec<T>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if values.len() != expected {
            return Err(Error::DimMismatch(alloc::format!(
                "{} values for dims {:?} ({} expected)",
                values.len(),
                dims,
                expected
            )));
        }
        Ok(Self { dims, values })
    }

    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            values: alloc::vec![T::zero(); dims.iter().product()],
        }
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(dims.iter().product());
        for n in 0..dims[0] {
            for c in 0..dims[1] {
                for h in 0..dims[2] {
                    for w in 0..dims[3] {
                        values.push(f(n, c, h, w));
                    }
                }
            }
        }
        Self { dims, values }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    /// Per-sample shape, if every dimension is non-zero.
    pub fn sample_shape(&self) -> Option<TensorShape> {
        TensorShape::new(self.dims[1], self.dims[2], self.dims[3]).ok()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    #[inline]
    pub fn offset(&self, n: usize, c: usize, h: usize, w: usize) -> usize {
        ((n * self.dims[1] + c) * self.dims[2] + h) * self.dims[3] + w
    }

    #[inline]
    pub fn get(&self, n: usize, c: usize, h: usize, w: usize) -> T {
        self.values[self.offset(n, c, h, w)]
    }

    #[inline]
    pub fn set(&mut self, n: usize, c: usize, h: usize, w: usize, v: T) {
        let i = self.offset(n, c, h, w);
        self.values[i] = v;
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> DenseTensor<U> {
        DenseTensor {
            dims: self.dims,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise `a·self + b·other`.
    pub fn axpby(&self, a: T, other: &Self, b: T) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimMismatch(alloc::format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(Self {
            dims: self.dims,
            values: self.values.iter().zip(&other.values).map(|(&x, &y)| a * x + b * y).collect(),
        })
    }

    /// Channels `range` of every sample.
    pub fn channel_slice(&self, range: core::ops::Range<usize>) -> Result<Self> {
        if range.end > self.dims[1] || range.start > range.end {
            return Err(Error::DimMismatch(alloc::format!(
                "channel range {range:?} out of {} channels",
                self.dims[1]
            )));
        }
        let [n, _, h, w] = self.dims;
        let dims = [n, range.len(), h, w];
        Ok(Self::from_fn(dims, |b, c, y, x| self.get(b, range.start + c, y, x)))
    }

    /// Channel-axis concatenation; spatial dims and batch must agree.
    pub fn concat_channels(parts: &[Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::DimMismatch("concatenation of zero tensors".into()))?;
        let [n, _, h, w] = first.dims;
        if parts.iter().any(|p| p.dims[0] != n || p.dims[2] != h || p.dims[3] != w) {
            return Err(Error::DimMismatch("concatenated tensors differ in batch or spatial dims".into()));
        }
        let c: usize = parts.iter().map(|p| p.dims[1]).sum();
        let mut values = Vec::with_capacity(n * c * h * w);
        for b in 0..n {
            for p in parts {
                let plane = p.dims[1] * h * w;
                values.extend_from_slice(&p.values[b * plane..(b + 1) * plane]);
            }
        }
        Ok(Self {
            dims: [n, c, h, w],
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn construction_checks_length() {
        assert!(DenseTensor::<i64>::new([1, 2, 2, 2], vec![0; 7]).is_err());
        let t = DenseTensor::new([1, 2, 1, 2], vec![1i64, 2, 3, 4]).unwrap();
        assert_eq!(t.get(0, 1, 0, 0), 3);
    }

    #[test]
    fn slice_and_concat_invert() {
        let t = DenseTensor::from_fn([2, 5, 2, 3], |n, c, h, w| (n * 1000 + c * 100 + h * 10 + w) as i64);
        let a = t.channel_slice(0..2).unwrap();
        let b = t.channel_slice(2..5).unwrap();
        assert_eq!(DenseTensor::concat_channels(&[a, b]).unwrap(), t);
        assert!(t.channel_slice(3..6).is_err());
    }
}
