//! Small dense row-major matrices.
//!
//! All reductions run in a fixed loop order so results are bit-reproducible.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Rebuild from a column-major slice (the `vec` layout).
    pub fn from_col_major(rows: usize, cols: usize, vec: &[f64]) -> Self {
        debug_assert_eq!(vec.len(), rows * cols);
        Mat::from_fn(rows, cols, |i, j| vec[j * rows + i])
    }

    /// Stack columns: `[W_{*1}; ...; W_{*q}]`.
    pub fn to_col_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                out.push(self.data[i * self.cols + j]);
            }
        }
        out
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
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * other`
    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let b_row = other.row(k);
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other`
    pub fn t_matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "t_matmul row count");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let a_row = self.row(k);
            let b_row = other.row(k);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension");
        Mat::from_fn(self.rows, other.rows, |i, j| dot(self.row(i), other.row(j)))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Mat, f: impl Fn(f64, f64) -> f64) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Mat {
        self.map(|x| x * s)
    }

    /// `self += s * other`
    pub fn axpy(&mut self, s: f64, other: &Mat) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn frobenius_dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        dot(&self.data, &other.data)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    /// Max absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Max row 2-norm.
    pub fn max_row_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| norm2(self.row(i)))
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        s += x * y;
    }
    s
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// Result of a power-iteration spectral norm estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 10_000;

/// Largest singular value via power iteration on `M^T M`.
///
/// Stops when the relative change of the Rayleigh quotient drops below
/// [`POWER_TOL`]; the start vector is drawn from the seeded stream.
pub fn spectral_norm(m: &Mat, seed: u64) -> SpectralEstimate {
    let n = m.cols();
    if n == 0 || m.rows() == 0 {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let mut r = rng::stream(seed, "power-iteration");
    let mut v: Vec<f64> = (0..n).map(|_| r.random_range(-1.0..1.0)).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut prev = f64::NAN;
    for it in 1..=POWER_MAX_ITERS {
        // u = M v, z = M^T u
        let u: Vec<f64> = (0..m.rows()).map(|i| dot(m.row(i), &v)).collect();
        let lambda = dot(&u, &u);
        let mut z = vec![0.0; n];
        for (i, &ui) in u.iter().enumerate() {
            for (zj, &mij) in z.iter_mut().zip(m.row(i)) {
                *zj += mij * ui;
            }
        }
        let nz = norm2(&z);
        if nz == 0.0 {
            return SpectralEstimate {
                value: 0.0,
                iterations: it,
                converged: true,
            };
        }
        if (lambda - prev).abs() <= POWER_TOL * lambda {
            return SpectralEstimate {
                value: lambda.sqrt(),
                iterations: it,
                converged: true,
            };
        }
        prev = lambda;
        v = z.into_iter().map(|x| x / nz).collect();
    }
    SpectralEstimate {
        value: prev.sqrt(),
        iterations: POWER_MAX_ITERS,
        converged: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn products_agree_with_transposes() {
        let a = Mat::from_fn(3, 4, |i, j| (i * 4 + j) as f64 - 5.0);
        let b = Mat::from_fn(3, 2, |i, j| (i + 2 * j) as f64 * 0.5);
        assert_eq!(a.t_matmul(&b), a.transpose().matmul(&b));
        let c = Mat::from_fn(2, 4, |i, j| (i as f64) - (j as f64));
        assert_eq!(a.matmul_t(&c), a.matmul(&c.transpose()));
    }

    #[test]
    fn col_major_round_trip() {
        let a = Mat::from_fn(3, 2, |i, j| (10 * i + j) as f64);
        let v = a.to_col_major();
        assert_eq!(v, vec![0.0, 10.0, 20.0, 1.0, 11.0, 21.0]);
        assert_eq!(Mat::from_col_major(3, 2, &v), a);
    }

    #[test]
    fn spectral_norm_of_diagonal() {
        let m = Mat::from_rows(2, 2, vec![2.0, 0.0, 0.0, 1.0]).unwrap();
        let est = spectral_norm(&m, 1);
        assert!(est.converged);
        assert!((est.value - 2.0).abs() < 1e-8);
        assert_eq!(spectral_norm(&Mat::identity(4), 3).value, 1.0);
    }

    #[test]
    fn spectral_norm_of_zero_matrix() {
        let est = spectral_norm(&Mat::zeros(3, 3), 0);
        assert_eq!(est.value, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn norms() {
        let m = Mat::from_rows(2, 2, vec![3.0, -4.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.inf_norm(), 7.0);
        assert_eq!(m.max_row_norm(), 5.0);
    }
}
