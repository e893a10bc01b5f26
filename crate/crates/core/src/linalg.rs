//! Dense complex matrices in column-major storage.

use std::ops::{Index, IndexMut};

use num_complex::Complex64 as C;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<C>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Builds from row-major nested vectors.
    pub fn from_rows(rows: &[Vec<C>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_diag(d: &[C]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &x) in d.iter().enumerate() {
            m[(i, i)] = x;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn col(&self, j: usize) -> &[C] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [C] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn as_slice(&self) -> &[C] {
        &self.data
    }

    pub fn diag(&self) -> Vec<C> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<C>> {
        (0..self.rows).map(|i| (0..self.cols).map(|j| self[(i, j)]).collect()).collect()
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let oc = other.col(j);
            let dst = &mut out.data[j * self.rows..(j + 1) * self.rows];
            for (k, &b) in oc.iter().enumerate() {
                if b == C::new(0.0, 0.0) {
                    continue;
                }
                let src = &self.data[k * self.rows..(k + 1) * self.rows];
                for (d, &a) in dst.iter_mut().zip(src) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C]) -> Vec<C> {
        assert_eq!(self.cols, x.len());
        let mut out = vec![C::new(0.0, 0.0); self.rows];
        for (j, &b) in x.iter().enumerate() {
            for (d, &a) in out.iter_mut().zip(self.col(j)) {
                *d += a * b;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(C, C) -> C) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    pub fn scale(&self, s: C) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.norm()))
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Induced 1-norm (maximum column sum).
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.col(j).iter().map(|a| a.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Inverse by LU with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let lu = Lu::new(self)?;
        let n = self.rows;
        let mut out = Self::identity(n);
        for j in 0..n {
            lu.solve_in_place(out.col_mut(j));
        }
        Ok(out)
    }
}

impl Index<(usize, usize)> for CMat {
    type Output = C;
    fn index(&self, (i, j): (usize, usize)) -> &C {
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C {
        &mut self.data[j * self.rows + i]
    }
}

/// LU factorisation `P A = L U` with partial pivoting.
#[derive(Clone, Debug)]
pub struct Lu {
    lu: CMat,
    perm: Vec<usize>,
}

impl Lu {
    pub fn new(a: &CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::Invalid("LU needs a square matrix".into()));
        }
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.max_abs().max(f64::MIN_POSITIVE);
        for k in 0..n {
            let (p, best) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= 1e-300 * scale {
                return Err(Error::NearDefective(best));
            }
            if p != k {
                perm.swap(p, k);
                for j in 0..n {
                    let t = lu[(p, j)];
                    lu[(p, j)] = lu[(k, j)];
                    lu[(k, j)] = t;
                }
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                lu[(i, k)] /= pivot;
            }
            for j in k + 1..n {
                let f = lu[(k, j)];
                if f == C::new(0.0, 0.0) {
                    continue;
                }
                for i in k + 1..n {
                    let l = lu[(i, k)];
                    lu[(i, j)] -= l * f;
                }
            }
        }
        Ok(Self { lu, perm })
    }

    /// Overwrites `b` with `A⁻¹ b`.
    pub fn solve_in_place(&self, b: &mut [C]) {
        let n = self.perm.len();
        let pb: Vec<C> = self.perm.iter().map(|&p| b[p]).collect();
        b.copy_from_slice(&pb);
        for j in 0..n {
            let x = b[j];
            for i in j + 1..n {
                b[i] -= self.lu[(i, j)] * x;
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.lu[(j, j)];
            let x = b[j];
            for i in 0..j {
                b[i] -= self.lu[(i, j)] * x;
            }
        }
    }

    /// Overwrites `b` with `b A⁻¹` (row vector).
    pub fn solve_row_in_place(&self, b: &mut [C]) {
        let n = self.perm.len();
        // y U = b
        for j in 0..n {
            let mut s = b[j];
            for i in 0..j {
                s -= b[i] * self.lu[(i, j)];
            }
            b[j] = s / self.lu[(j, j)];
        }
        // x L = y
        for j in (0..n).rev() {
            let mut s = b[j];
            for i in j + 1..n {
                s -= b[i] * self.lu[(i, j)];
            }
            b[j] = s;
        }
        let mut out = vec![C::new(0.0, 0.0); n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = b[k];
        }
        b.copy_from_slice(&out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, seed: u64) -> CMat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        CMat::from_fn(n, n, |_, _| C::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn inverse_round_trip() {
        let a = random(7, 1);
        let inv = a.inverse().unwrap();
        assert!(a.matmul(&inv).sub(&CMat::identity(7)).max_abs() < 1e-12);
    }

    #[test]
    fn row_solve_matches_inverse() {
        let a = random(6, 2);
        let lu = Lu::new(&a).unwrap();
        let mut b: Vec<C> = (0..6).map(|k| C::new(k as f64, 1.0)).collect();
        let expect = CMat::from_rows(&[b.clone()]).matmul(&a.inverse().unwrap());
        lu.solve_row_in_place(&mut b);
        for k in 0..6 {
            assert!((b[k] - expect[(0, k)]).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_matrix_rejected() {
        assert!(CMat::zeros(3, 3).inverse().is_err());
    }

    #[test]
    fn adjoint_of_product() {
        let a = random(4, 3);
        let b = random(4, 4);
        let lhs = a.matmul(&b).adjoint();
        let rhs = b.adjoint().matmul(&a.adjoint());
        assert!(lhs.sub(&rhs).max_abs() < 1e-14);
    }
}
