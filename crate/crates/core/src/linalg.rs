//! Small dense matrices and the power-iteration spectral norm.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::real::Real;

const START_VECTOR_SEED: u64 = 0x5eed_5eed;
const MAX_POWER_ITERS: usize = 200_000;

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T = f64> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self · x`
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| crate::real::dot(self.row(r), x))
            .collect()
    }

    pub fn map<U: Real>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Matrix<f64> {
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for k in 0..n {
            m.set(k, k, 1.0);
        }
        m
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (k, &v) in values.iter().enumerate() {
            m.set(k, k, v);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let data: Vec<f64> = rows.iter().flat_map(|row| row.iter().copied()).collect();
        Self::from_vec(r, c, data)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..rhs.cols {
                    out.data[r * rhs.cols + c] += a * rhs.get(k, c);
                }
            }
        }
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `selfᵀ · x`
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![0.0; self.cols];
        for (r, &xr) in x.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += a * xr;
            }
        }
        out
    }

    /// Largest singular value by power iteration on `WᵀW`, stopped once the
    /// estimate changes by less than `tol` relative between sweeps.
    pub fn spectral_norm(&self, tol: f64) -> f64 {
        assert!(tol > 0.0, "tolerance must be positive");
        if self.rows == 0 || self.cols == 0 || self.data.iter().all(|&v| v == 0.0) {
            return 0.0;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(START_VECTOR_SEED);
        let mut v: Vec<f64> = (0..self.cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        normalize(&mut v);
        let mut sigma = 0.0;
        for _ in 0..MAX_POWER_ITERS {
            let wv = self.matvec(&v);
            let s = wv.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut next = self.matvec_t(&wv);
            if normalize(&mut next) == 0.0 {
                // start vector fell in the null space
                return s;
            }
            v = next;
            let converged = (s - sigma).abs() <= tol * s;
            sigma = s;
            if converged {
                break;
            }
        }
        // one more application with the final vector gives the Rayleigh value
        let wv = self.matvec(&v);
        wv.iter().map(|x| x * x).sum::<f64>().sqrt().max(sigma)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
    n
}
