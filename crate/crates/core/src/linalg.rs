//! Small dense linear algebra for joint-space quantities.
//!
//! Chains in this crate have at most a dozen coordinates, so a row-major
//! square matrix with an in-place Cholesky factorization is all we need.

use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn add_to(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = self.data[r * self.n + c] + v;
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.n + c] = v;
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.n)
            .map(|r| (0..self.n).fold(T::zero(), |acc, c| acc + self.get(r, c) * x[c]))
            .collect()
    }

    /// Largest absolute difference between the matrix and its transpose.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.n {
            for c in 0..r {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// Lower-triangular Cholesky factor, or `None` if the matrix is not
    /// numerically positive definite.
    pub fn cholesky(&self) -> Option<Cholesky<T>> {
        let n = self.n;
        let mut l = vec![T::zero(); n * n];
        for j in 0..n {
            let mut d = self.get(j, j);
            for k in 0..j {
                d = d - l[j * n + k] * l[j * n + k];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in (j + 1)..n {
                let mut s = self.get(i, j);
                for k in 0..j {
                    s = s - l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(Cholesky { n, l })
    }
}

#[derive(Debug, Clone)]
pub struct Cholesky<T> {
    n: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Solves `A x = b` given `A = L Lᵀ`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s = s - self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_solves_spd_system() {
        let mut a = SquareMatrix::<f64>::zeros(3);
        let rows = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                a.set(r, c, *v);
            }
        }
        let b = [1.0, -2.0, 0.5];
        let x = a.cholesky().unwrap().solve(&b);
        let back = a.mul_vec(&x);
        for (u, v) in back.iter().zip(b.iter()) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut a = SquareMatrix::<f64>::zeros(2);
        a.set(0, 0, 1.0);
        a.set(1, 1, -1.0);
        assert!(a.cholesky().is_none());
    }
}
