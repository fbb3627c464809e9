//! Row-major dense complex matrices for desk-scale factorizations and oracles.

use crate::error::{Error, Result};
use crate::vector::{c64, zeros, DenseVector};

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<c64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![c64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<c64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::NotSquare { rows: n, cols: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Self { n, data })
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = c64::new(v, 0.0);
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[c64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [c64] {
        let n = self.n;
        &mut self.data[i * n..(i + 1) * n]
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.n).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[c64]) -> DenseVector {
        assert_eq!(x.len(), self.n);
        (0..self.n).map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == c64::new(0.0, 0.0) {
                    continue;
                }
                let orow = &other.data[k * n..(k + 1) * n];
                let dst = &mut out.data[i * n..(i + 1) * n];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// Frobenius norm.
    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { n: self.n, data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect() }
    }

    /// Adds `s` to every diagonal entry.
    pub fn shift_diagonal(&mut self, s: f64) {
        for i in 0..self.n {
            self[(i, i)] += s;
        }
    }

    /// Solves `A x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[c64]) -> Result<DenseVector> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        for k in 0..n {
            let (p, pmax) = (k..n)
                .map(|i| (i, a[i * n + k].norm()))
                .fold((k, -1.0), |acc, v| if v.1 > acc.1 { v } else { acc });
            if pmax == 0.0 {
                return Err(Error::Factorization("singular matrix in LU".into()));
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            let piv = a[k * n + k];
            for i in k + 1..n {
                let l = a[i * n + k] / piv;
                if l == c64::new(0.0, 0.0) {
                    continue;
                }
                for j in k..n {
                    let akj = a[k * n + j];
                    a[i * n + j] -= l * akj;
                }
                let xk = x[k];
                x[i] -= l * xk;
            }
        }
        for k in (0..n).rev() {
            let mut s = x[k];
            for j in k + 1..n {
                s -= a[k * n + j] * x[j];
            }
            x[k] = s / a[k * n + k];
        }
        Ok(x)
    }

    /// Cholesky factor `L` (lower, real positive diagonal) with `A = L L*`.
    /// Fails on a pivot `<= pivot_floor` or a non-finite pivot.
    pub fn cholesky(&self, pivot_floor: f64) -> Result<Self> {
        let n = self.n;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)].re;
            for k in 0..j {
                d -= l[(j, k)].norm_sqr();
            }
            if !(d > pivot_floor) || !d.is_finite() {
                return Err(Error::Factorization(format!("pivot {d:e} at column {j}")));
            }
            let ljj = d.sqrt();
            l[(j, j)] = c64::new(ljj, 0.0);
            for i in j + 1..n {
                let mut s = self[(i, j)];
                let (ri, rj) = (l.row(i), l.row(j));
                for k in 0..j {
                    s -= ri[k] * rj[k].conj();
                }
                l[(i, j)] = s / ljj;
            }
        }
        Ok(l)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = c64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &c64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut c64 {
        &mut self.data[i * self.n + j]
    }
}

/// Lower-triangular helpers. `l` holds `L` in its lower triangle; the strict
/// upper triangle is ignored.
pub mod tri {
    use super::*;

    /// Solves `L x = b`.
    pub fn solve_lower(l: &DenseMatrix, b: &[c64]) -> DenseVector {
        let n = l.dim();
        let mut x = b.to_vec();
        for i in 0..n {
            let row = l.row(i);
            let mut s = x[i];
            for k in 0..i {
                s -= row[k] * x[k];
            }
            x[i] = s / row[i];
        }
        x
    }

    /// Solves `L* x = b`.
    pub fn solve_lower_adjoint(l: &DenseMatrix, b: &[c64]) -> DenseVector {
        let n = l.dim();
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            x[i] /= l[(i, i)].conj();
            let xi = x[i];
            let row = l.row(i);
            for k in 0..i {
                x[k] -= row[k].conj() * xi;
            }
        }
        x
    }

    /// `L x`
    pub fn mul_lower(l: &DenseMatrix, x: &[c64]) -> DenseVector {
        (0..l.dim())
            .map(|i| l.row(i)[..=i].iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `L* x`
    pub fn mul_lower_adjoint(l: &DenseMatrix, x: &[c64]) -> DenseVector {
        let n = l.dim();
        let mut y = zeros(n);
        for i in 0..n {
            let xi = x[i];
            for (k, a) in l.row(i)[..=i].iter().enumerate() {
                y[k] += a.conj() * xi;
            }
        }
        y
    }

    /// `L L*` as a full matrix.
    pub fn gram(l: &DenseMatrix) -> DenseMatrix {
        let n = l.dim();
        let mut out = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let m = i.min(j);
                let s: c64 = (0..=m).map(|k| l[(i, k)] * l[(j, k)].conj()).sum();
                out[(i, j)] = s;
                out[(j, i)] = s.conj();
            }
        }
        out
    }

    /// Rank-one update: overwrites `L` with the factor of `L L* + x x*`.
    /// Uses unitary 2x2 rotations; always succeeds for finite input.
    pub fn rank_one_update(l: &mut DenseMatrix, x: &[c64]) {
        let n = l.dim();
        let mut x = x.to_vec();
        for k in 0..n {
            let lkk = l[(k, k)].re;
            let xk = x[k];
            let r = lkk.hypot(xk.norm());
            if r == 0.0 {
                continue;
            }
            let (a, b) = (lkk / r, xk / r);
            l[(k, k)] = c64::new(r, 0.0);
            for i in k + 1..n {
                let lik = l[(i, k)];
                l[(i, k)] = lik * a + b.conj() * x[i];
                x[i] = x[i] * a - b * lik;
            }
        }
    }

    /// Rank-one downdate: overwrites `L` with the factor of `L L* - x x*`.
    /// Uses hyperbolic rotations; fails if a pivot would become non-positive.
    pub fn rank_one_downdate(l: &mut DenseMatrix, x: &[c64], pivot_floor: f64) -> Result<()> {
        let n = l.dim();
        let mut x = x.to_vec();
        for k in 0..n {
            let lkk = l[(k, k)].re;
            let xk = x[k];
            let d = (lkk - xk.norm()) * (lkk + xk.norm());
            if !(d > pivot_floor * pivot_floor) || !d.is_finite() {
                return Err(Error::Factorization(format!("downdate pivot {d:e} at column {k}")));
            }
            let r = d.sqrt();
            let (a, b) = (lkk / r, xk / r);
            l[(k, k)] = c64::new(r, 0.0);
            for i in k + 1..n {
                let lik = l[(i, k)];
                l[(i, k)] = lik * a - b.conj() * x[i];
                x[i] = x[i] * a - b * lik;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::norm;

    fn sample_spd() -> DenseMatrix {
        DenseMatrix::from_rows(&[
            vec![c64::new(4.0, 0.0), c64::new(1.0, 1.0), c64::new(0.0, 0.5)],
            vec![c64::new(1.0, -1.0), c64::new(3.0, 0.0), c64::new(0.2, 0.0)],
            vec![c64::new(0.0, -0.5), c64::new(0.2, 0.0), c64::new(2.0, 0.0)],
        ])
        .unwrap()
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = sample_spd();
        let l = a.cholesky(0.0).unwrap();
        assert!(tri::gram(&l).sub(&a).frobenius() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = DenseMatrix::from_real_diagonal(&[1.0, -1.0]);
        assert!(a.cholesky(0.0).is_err());
    }

    #[test]
    fn triangular_solves_invert_products() {
        let l = sample_spd().cholesky(0.0).unwrap();
        let x = vec![c64::new(1.0, -2.0), c64::new(0.5, 0.0), c64::new(-1.0, 3.0)];
        let y = tri::solve_lower(&l, &tri::mul_lower(&l, &x));
        let z = tri::solve_lower_adjoint(&l, &tri::mul_lower_adjoint(&l, &x));
        for i in 0..3 {
            assert!((y[i] - x[i]).norm() < 1e-14);
            assert!((z[i] - x[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn update_then_downdate_round_trips() {
        let a = sample_spd();
        let mut l = a.cholesky(0.0).unwrap();
        let x = vec![c64::new(0.3, 0.1), c64::new(-0.7, 0.0), c64::new(0.2, -0.4)];
        tri::rank_one_update(&mut l, &x);
        let mut expect = a.clone();
        for i in 0..3 {
            for j in 0..3 {
                expect[(i, j)] += x[i] * x[j].conj();
            }
        }
        assert!(tri::gram(&l).sub(&expect).frobenius() < 1e-13);
        tri::rank_one_downdate(&mut l, &x, 0.0).unwrap();
        assert!(tri::gram(&l).sub(&a).frobenius() < 1e-13);
    }

    #[test]
    fn downdate_detects_loss_of_definiteness() {
        let mut l = DenseMatrix::identity(2);
        let x = vec![c64::new(1.5, 0.0), c64::new(0.0, 0.0)];
        assert!(tri::rank_one_downdate(&mut l, &x, 0.0).is_err());
    }

    #[test]
    fn lu_solve_matches() {
        let a = sample_spd();
        let x = vec![c64::new(1.0, 1.0), c64::new(2.0, 0.0), c64::new(0.0, -1.0)];
        let b = a.matvec(&x);
        let y = a.solve(&b).unwrap();
        let err: Vec<c64> = y.iter().zip(&x).map(|(p, q)| p - q).collect();
        assert!(norm(&err) < 1e-14);
    }
}
