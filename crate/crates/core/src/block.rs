//! Small dense complex matrices used as the pointwise values of matrix-valued
//! fields. Blocks are at most a few entries wide, so storage is inline.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use num_complex::Complex64;
use smallvec::SmallVec;

/// A `rows x cols` complex matrix stored row-major.
#[derive(Clone, PartialEq)]
pub struct Block {
    rows: usize,
    cols: usize,
    data: SmallVec<[Complex64; 4]>,
}

impl Block {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: SmallVec::from_elem(Complex64::new(0.0, 0.0), rows * cols),
        }
    }

    pub fn scalar(value: Complex64) -> Self {
        let mut data = SmallVec::new();
        data.push(value);
        Self {
            rows: 1,
            cols: 1,
            data,
        }
    }

    /// Rectangular identity: ones on the leading diagonal.
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self::from_fn(rows, cols, |i, j| {
            if i == j {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = SmallVec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a block from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Self {
        assert_eq!(entries.len(), rows * cols, "entry count does not match shape");
        Self {
            rows,
            cols,
            data: SmallVec::from_slice(entries),
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: Complex64) {
        self.data[i * self.cols + j] = value;
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    /// The single entry of a 1x1 block.
    pub fn as_scalar(&self) -> Complex64 {
        assert_eq!(self.shape(), (1, 1), "block is not scalar");
        self.data[0]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * factor).collect(),
        }
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        self.scale(Complex64::new(factor, 0.0))
    }

    /// `self += factor * other`
    pub fn axpy(&mut self, factor: Complex64, other: &Block) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(other.data.iter()) {
            *a += factor * b;
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix product, checking shapes.
    pub fn try_mul(&self, rhs: &Block) -> Option<Block> {
        if self.cols != rhs.rows {
            return None;
        }
        Some(self.mul_unchecked(rhs))
    }

    fn mul_unchecked(&self, rhs: &Block) -> Block {
        if self.rows == 1 && self.cols == 1 && rhs.cols == 1 {
            return Block::scalar(self.data[0] * rhs.data[0]);
        }
        let mut out = Block::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..rhs.cols {
                    out.data[i * rhs.cols + j] += a * rhs.get(k, j);
                }
            }
        }
        out
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block{}x{}[", self.rows, self.cols)?;
        for (idx, z) in self.data.iter().enumerate() {
            if idx > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}{:+}i", z.re, z.im)?;
        }
        write!(f, "]")
    }
}

impl Mul for &Block {
    type Output = Block;

    fn mul(self, rhs: &Block) -> Block {
        assert_eq!(
            self.cols, rhs.rows,
            "block product {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        self.mul_unchecked(rhs)
    }
}

impl Add for &Block {
    type Output = Block;

    fn add(self, rhs: &Block) -> Block {
        assert_eq!(self.shape(), rhs.shape(), "block sum shape mismatch");
        Block {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Block {
    type Output = Block;

    fn sub(self, rhs: &Block) -> Block {
        assert_eq!(self.shape(), rhs.shape(), "block difference shape mismatch");
        Block {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(rhs.data.iter()).map(|(a, b)| a - b).collect(),
        }
    }
}

impl AddAssign<&Block> for Block {
    fn add_assign(&mut self, rhs: &Block) {
        assert_eq!(self.shape(), rhs.shape(), "block sum shape mismatch");
        for (a, b) in self.data.iter_mut().zip(rhs.data.iter()) {
            *a += b;
        }
    }
}

impl Neg for &Block {
    type Output = Block;

    fn neg(self) -> Block {
        Block {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| -z).collect(),
        }
    }
}

/// Maximum over samples of the Frobenius norm of `a[j] - b[j]`.
pub fn max_distance(a: &[Block], b: &[Block]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Maximum over samples of the Frobenius norm.
pub fn max_norm(a: &[Block]) -> f64 {
    a.iter().map(Block::norm).fold(0.0, f64::max)
}
