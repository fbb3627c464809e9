//! Dense Hermitian eigensolver.
//!
//! Householder reduction to a Hermitian tridiagonal `T = Q* A Q`, a diagonal
//! unitary `D` making `D* T D` real symmetric, then implicit-shift QL on the
//! real tridiagonal. Eigenvectors of `A` are `Q D z`.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::vector::{c64, norm, DenseVector};

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
pub fn hermitian_eigen(a: &DenseMatrix) -> Result<(Vec<f64>, Vec<DenseVector>)> {
    let n = a.dim();
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    let mut m = a.clone();
    let reflectors = tridiagonalize(&mut m);
    let diag: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    let sub: Vec<c64> = (0..n - 1).map(|i| m[(i + 1, i)]).collect();

    // phases[k+1] = phases[k] · sub[k]/|sub[k]| makes the subdiagonal |sub[k]|
    let mut phases = vec![c64::new(1.0, 0.0); n];
    let mut e = vec![0.0; n];
    for k in 0..n - 1 {
        let s = sub[k].norm();
        e[k] = s;
        phases[k + 1] = if s == 0.0 { phases[k] } else { phases[k] * sub[k] / s };
    }
    let mut d = diag;
    let mut z = vec![0.0; n * n];
    for i in 0..n {
        z[i * n + i] = 1.0;
    }
    tql2(&mut d, &mut e, &mut z, n)?;

    // W = Q D, then x_j = W z_j
    let q = accumulate(n, &reflectors);
    let mut w = q;
    for i in 0..n {
        for (k, p) in phases.iter().enumerate() {
            w[(i, k)] *= p;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].total_cmp(&d[j]));
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    for j in order {
        let zj = &z[j * n..(j + 1) * n];
        let x: DenseVector = (0..n).map(|i| w.row(i).iter().zip(zj).map(|(a, b)| a * b).sum()).collect();
        values.push(d[j]);
        vectors.push(x);
    }
    Ok((values, vectors))
}

/// Reduces `m` in place to Hermitian tridiagonal form and returns the
/// Householder vectors `v_k` (unit, acting on indices `k+1..n`).
fn tridiagonalize(m: &mut DenseMatrix) -> Vec<Option<DenseVector>> {
    let n = m.dim();
    let mut reflectors = Vec::with_capacity(n.saturating_sub(2));
    for k in 0..n.saturating_sub(2) {
        let x: DenseVector = (k + 1..n).map(|i| m[(i, k)]).collect();
        let sigma = norm(&x);
        let tail = norm(&x[1..]);
        if tail == 0.0 {
            reflectors.push(None);
            continue;
        }
        let phase = if x[0].norm() == 0.0 { c64::new(1.0, 0.0) } else { x[0] / x[0].norm() };
        let alpha = -phase * sigma;
        let mut v = x;
        v[0] -= alpha;
        let vn = norm(&v);
        for vi in &mut v {
            *vi /= vn;
        }
        m[(k + 1, k)] = alpha;
        m[(k, k + 1)] = alpha.conj();
        for i in k + 2..n {
            m[(i, k)] = c64::new(0.0, 0.0);
            m[(k, i)] = c64::new(0.0, 0.0);
        }
        // trailing block B <- H B H = B - v w* - w v*, w = 2p - 2(v*p) v, p = B v
        let len = n - k - 1;
        let p: Vec<c64> = (0..len)
            .map(|i| m.row(k + 1 + i)[k + 1..].iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let kappa: f64 = v.iter().zip(&p).map(|(a, b)| (a.conj() * b).re).sum();
        let w: Vec<c64> = p.iter().zip(&v).map(|(pi, vi)| 2.0 * pi - 2.0 * kappa * vi).collect();
        for i in 0..len {
            let (vi, wi) = (v[i], w[i]);
            let row = &mut m.row_mut(k + 1 + i)[k + 1..];
            for j in 0..len {
                row[j] -= vi * w[j].conj() + wi * v[j].conj();
            }
        }
        for i in 0..len {
            let r = k + 1 + i;
            m[(r, r)].im = 0.0;
        }
        reflectors.push(Some(v));
    }
    reflectors
}

/// `Q = H_0 H_1 ⋯`, accumulated from the right end.
fn accumulate(n: usize, reflectors: &[Option<DenseVector>]) -> DenseMatrix {
    let mut q = DenseMatrix::identity(n);
    for (k, v) in reflectors.iter().enumerate().rev() {
        let Some(v) = v else { continue };
        let off = k + 1;
        // rows off..n of Q: Q_r <- Q_r - 2 v (v* Q_r)
        let mut s = vec![c64::new(0.0, 0.0); n - off];
        for (i, vi) in v.iter().enumerate() {
            let row = &q.row(off + i)[off..];
            let cv = vi.conj();
            for (sj, qij) in s.iter_mut().zip(row) {
                *sj += cv * qij;
            }
        }
        for (i, vi) in v.iter().enumerate() {
            let f = 2.0 * vi;
            let row = &mut q.row_mut(off + i)[off..];
            for (qij, sj) in row.iter_mut().zip(&s) {
                *qij -= f * sj;
            }
        }
    }
    q
}

/// Implicit-shift QL on a real symmetric tridiagonal with diagonal `d` and
/// subdiagonal `e[i] = T[i+1, i]` (`e[n-1] = 0`). Eigenvectors accumulate in
/// the rows of `z` (row-major, `n x n`).
fn tql2(d: &mut [f64], e: &mut [f64], z: &mut [f64], n: usize) -> Result<()> {
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let max_iter = 60 * n.max(1);
    let mut iterations = 0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            loop {
                iterations += 1;
                if iterations > max_iter {
                    return Err(Error::Factorization("tridiagonal QL failed to converge".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let (lo, hi) = z.split_at_mut((i + 1) * n);
                    let zi = &mut lo[i * n..];
                    let zi1 = &mut hi[..n];
                    for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}
