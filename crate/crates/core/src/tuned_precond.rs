//! Tuned Cholesky preconditioners and the preconditioned inner solve.
//!
//! A base `Q = L L* ≈ A - σI` is factored once. Each outer step replaces it
//! by `𝒬 = ℒ ℒ*` with `𝒬 u_k = A u_k`, obtained from `Q` by a rank-one
//! update or, failing that, a rank-two update/downdate pair. The shifted system
//! is then solved in the form
//!
//! ```text
//! ℒ⁻¹ (A - θI) ℒ⁻* ŵ = ℒ⁻¹ u,   w = ℒ⁻* ŵ
//! ```
//!
//! Factors are held densely, so the module is limited to `n <= DENSE_CAP`.

use serde::{Deserialize, Serialize};

use crate::dense::{tri, DenseMatrix};
use crate::error::{Error, Result};
use crate::lanczos::HermitianOperator;
use crate::matio::SparseHermitianMatrix;
use crate::minres::{explicit_direction, krylov_minres, InnerSolveResult, PrecondInfo};
use crate::vector::{axpy, c64, check_unit, dot, norm, scale_real, sub, zeros, DenseVector};

pub const DENSE_CAP: usize = 5000;

/// First nonzero rung of the diagonal shift ladder, relative to `‖A‖₁`.
pub const ALPHA_START: f64 = 1.0 / 1_048_576.0;

/// Rungs tried after `α = 0` before giving up.
pub const ALPHA_RUNGS: usize = 64;

/// Rank-one tuning requires `Re(z* u) > RANK_ONE_TOL ‖z‖`.
pub const RANK_ONE_TOL: f64 = 1e-14;

/// Cholesky pivots must exceed this multiple of `‖A‖₁ + |σ|`.
const PIVOT_REL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecondMode {
    /// `Q = diag(A - σI) + αI`.
    DiagonalShift,
    /// IC(0) of `A - σI + αI` on the sparsity pattern of `A`.
    IncompleteCholesky,
    /// Full Cholesky of `A - σI + αI`.
    DenseCholesky,
}

impl std::str::FromStr for PrecondMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diagonal" | "diagonal-shift" => Ok(Self::DiagonalShift),
            "ic" | "ic0" | "incomplete-cholesky" => Ok(Self::IncompleteCholesky),
            "dense" | "cholesky" | "dense-cholesky" => Ok(Self::DenseCholesky),
            other => Err(Error::InvalidArgument(format!("unknown preconditioner mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuningOutcome {
    /// `z = (A - Q) u` vanished; `𝒬 = Q`.
    Unchanged,
    RankOne,
    RankTwo,
    /// Neither form kept `𝒬` positive definite; `𝒬 = Q` for this step.
    Skipped,
}

#[derive(Clone, Debug)]
pub struct TunedPreconditioner {
    pub mode: PrecondMode,
    pub sigma: f64,
    /// Diagonal shift that made the base factorization succeed.
    pub alpha: f64,
    /// Factor of the base `Q`.
    pub base: DenseMatrix,
    /// Factor of the current `𝒬`.
    pub tuned: DenseMatrix,
    /// `z = (A - Q) u_k` of the last tuning.
    pub tuning_vector: Option<DenseVector>,
    /// `z* u_k` of the last tuning.
    pub tuning_scalar: Option<f64>,
    pub last_outcome: Option<TuningOutcome>,
    pub spd_ok: bool,
    pivot_floor: f64,
}

fn ladder_alpha(rung: usize, one_norm: f64) -> f64 {
    if rung == 0 {
        0.0
    } else {
        ALPHA_START * one_norm * 2f64.powi(rung as i32 - 1)
    }
}

/// IC(0) on the lower triangle of `A + (α - σ) I`, densified.
fn incomplete_cholesky(a: &SparseHermitianMatrix, shift: f64, pivot_floor: f64) -> Result<DenseMatrix> {
    let n = a.dim();
    // rows[i] holds (j, L_ij) for j <= i in increasing j
    let mut rows: Vec<Vec<(usize, c64)>> = Vec::with_capacity(n);
    for i in 0..n {
        let mut row: Vec<(usize, c64)> = a.row(i).filter(|&(j, _)| j <= i).collect();
        match row.last_mut() {
            Some((j, v)) if *j == i => *v += shift,
            _ => row.push((i, c64::new(shift, 0.0))),
        }
        for idx in 0..row.len() {
            let (j, aij) = row[idx];
            // Σ_{k<j} L_ik conj(L_jk) over the pattern
            let mut s = c64::new(0.0, 0.0);
            let (mut p, mut q) = (0, 0);
            let rj: &[(usize, c64)] = if j == i { &row[..idx] } else { &rows[j] };
            while p < idx && q < rj.len() {
                let (kp, vp) = row[p];
                let (kq, vq) = rj[q];
                if kq >= j {
                    break;
                }
                match kp.cmp(&kq) {
                    std::cmp::Ordering::Less => p += 1,
                    std::cmp::Ordering::Greater => q += 1,
                    std::cmp::Ordering::Equal => {
                        s += vp * vq.conj();
                        p += 1;
                        q += 1;
                    }
                }
            }
            if j == i {
                let d = aij.re - s.re;
                if !(d > pivot_floor) || !d.is_finite() {
                    return Err(Error::Factorization(format!("IC(0) pivot {d:e} at row {i}")));
                }
                row[idx].1 = c64::new(d.sqrt(), 0.0);
            } else {
                let ljj = rows[j].last().map(|e| e.1.re).unwrap_or(1.0);
                row[idx].1 = (aij - s) / ljj;
            }
        }
        rows.push(row);
    }
    let mut l = DenseMatrix::zeros(n);
    for (i, row) in rows.iter().enumerate() {
        for &(j, v) in row {
            l[(i, j)] = v;
        }
    }
    Ok(l)
}

fn factor_base(a: &SparseHermitianMatrix, sigma: f64, alpha: f64, mode: PrecondMode, pivot_floor: f64) -> Result<DenseMatrix> {
    let n = a.dim();
    match mode {
        PrecondMode::DiagonalShift => {
            let mut l = DenseMatrix::zeros(n);
            for (i, d) in a.diagonal().into_iter().enumerate() {
                let q = d - sigma + alpha;
                if !(q > pivot_floor) {
                    return Err(Error::Factorization(format!("diagonal pivot {q:e} at row {i}")));
                }
                l[(i, i)] = c64::new(q.sqrt(), 0.0);
            }
            Ok(l)
        }
        PrecondMode::IncompleteCholesky => incomplete_cholesky(a, alpha - sigma, pivot_floor),
        PrecondMode::DenseCholesky => {
            let mut q = a.to_dense();
            q.shift_diagonal(alpha - sigma);
            q.cholesky(pivot_floor)
        }
    }
}

impl TunedPreconditioner {
    /// Factors `Q ≈ A - σI + αI` with the smallest ladder `α` that succeeds.
    pub fn build_base(a: &SparseHermitianMatrix, sigma: f64, mode: PrecondMode) -> Result<Self> {
        let n = a.dim();
        if n > DENSE_CAP {
            return Err(Error::InvalidArgument(format!("tuned preconditioner is limited to n <= {DENSE_CAP}, got {n}")));
        }
        if !sigma.is_finite() {
            return Err(Error::NonFinite("preconditioner shift"));
        }
        let scale = a.one_norm() + sigma.abs();
        let pivot_floor = PIVOT_REL * scale;
        let mut last_err = None;
        for rung in 0..=ALPHA_RUNGS {
            let alpha = ladder_alpha(rung, a.one_norm().max(f64::MIN_POSITIVE));
            match factor_base(a, sigma, alpha, mode, pivot_floor) {
                Ok(l) => {
                    return Ok(Self {
                        mode,
                        sigma,
                        alpha,
                        tuned: l.clone(),
                        base: l,
                        tuning_vector: None,
                        tuning_scalar: None,
                        last_outcome: None,
                        spd_ok: true,
                        pivot_floor,
                    })
                }
                Err(e) => last_err = Some(e),
            }
        }
        Err(last_err.unwrap_or_else(|| Error::Factorization("shift ladder exhausted".into())))
    }

    /// Wraps an existing lower-triangular factor with positive diagonal.
    pub fn from_base_factor(l: DenseMatrix) -> Result<Self> {
        let n = l.dim();
        let mut scale: f64 = 0.0;
        for i in 0..n {
            let d = l[(i, i)];
            if !(d.re > 0.0) || d.im != 0.0 {
                return Err(Error::Factorization(format!("factor diagonal {d} at row {i}")));
            }
            scale = scale.max(d.re * d.re);
        }
        Ok(Self {
            mode: PrecondMode::DenseCholesky,
            sigma: 0.0,
            alpha: 0.0,
            tuned: l.clone(),
            base: l,
            tuning_vector: None,
            tuning_scalar: None,
            last_outcome: None,
            spd_ok: true,
            pivot_floor: PIVOT_REL * scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// `Q x` for the base factor.
    pub fn apply_base(&self, x: &[c64]) -> DenseVector {
        tri::mul_lower(&self.base, &tri::mul_lower_adjoint(&self.base, x))
    }

    /// `𝒬 x` for the tuned factor.
    pub fn apply_tuned(&self, x: &[c64]) -> DenseVector {
        tri::mul_lower(&self.tuned, &tri::mul_lower_adjoint(&self.tuned, x))
    }

    /// Rebuilds `ℒ` from the base factor so that `𝒬 u = A u`.
    pub fn tune(&mut self, a: &SparseHermitianMatrix, u: &[c64]) -> Result<TuningOutcome> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        check_unit(u)?;
        let au = a.matvec(u)?;
        let z = sub(&au, &self.apply_base(u));
        let c = dot(&z, u).re;
        let z_norm = norm(&z);
        self.tuned = self.base.clone();
        self.spd_ok = true;
        self.tuning_scalar = Some(c);
        self.tuning_vector = Some(z.clone());

        let outcome = if z_norm <= f64::EPSILON * norm(&au).max(f64::MIN_POSITIVE) {
            TuningOutcome::Unchanged
        } else if c > RANK_ONE_TOL * z_norm {
            let mut x = z;
            scale_real(1.0 / c.sqrt(), &mut x);
            tri::rank_one_update(&mut self.tuned, &x);
            TuningOutcome::RankOne
        } else if self.rank_two(&z, c, u).is_ok() {
            TuningOutcome::RankTwo
        } else {
            self.tuned = self.base.clone();
            TuningOutcome::Skipped
        };
        self.last_outcome = Some(outcome);
        Ok(outcome)
    }

    /// `𝒬 = Q + p u* + u p*` with `p = z - (c/2) u`, written as
    /// `½[(p/t + t u)(p/t + t u)* - (p/t - t u)(p/t - t u)*]`, `t = √‖p‖`.
    fn rank_two(&mut self, z: &[c64], c: f64, u: &[c64]) -> Result<()> {
        let mut p = z.to_vec();
        axpy(c64::new(-0.5 * c, 0.0), u, &mut p);
        let t = norm(&p).sqrt();
        if t == 0.0 {
            return Err(Error::Factorization("rank-two tuning vector vanished".into()));
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus: DenseVector = p.iter().zip(u).map(|(pi, ui)| (pi / t + ui * t) * h).collect();
        let minus: DenseVector = p.iter().zip(u).map(|(pi, ui)| (pi / t - ui * t) * h).collect();
        tri::rank_one_update(&mut self.tuned, &plus);
        tri::rank_one_downdate(&mut self.tuned, &minus, self.pivot_floor.sqrt())
    }

    /// `‖𝒬 u - A u‖ / ‖A u‖`.
    pub fn tuning_defect(&self, a: &SparseHermitianMatrix, u: &[c64]) -> Result<f64> {
        let au = a.matvec(u)?;
        let qu = self.apply_tuned(u);
        let den = norm(&au);
        Ok(if den == 0.0 { norm(&qu) } else { norm(&sub(&qu, &au)) / den })
    }

    /// `‖ℒ ℒ* - 𝒬‖_F / ‖𝒬‖_F` where `𝒬` is rebuilt from the base and the
    /// stored tuning data.
    pub fn factor_defect(&self, u: &[c64]) -> f64 {
        let n = self.dim();
        let mut q = tri::gram(&self.base);
        if let (Some(z), Some(c), Some(outcome)) = (&self.tuning_vector, self.tuning_scalar, self.last_outcome) {
            match outcome {
                TuningOutcome::RankOne => {
                    for i in 0..n {
                        for j in 0..n {
                            q[(i, j)] += z[i] * z[j].conj() / c;
                        }
                    }
                }
                TuningOutcome::RankTwo => {
                    let mut p = z.clone();
                    axpy(c64::new(-0.5 * c, 0.0), u, &mut p);
                    for i in 0..n {
                        for j in 0..n {
                            q[(i, j)] += p[i] * u[j].conj() + u[i] * p[j].conj();
                        }
                    }
                }
                TuningOutcome::Unchanged | TuningOutcome::Skipped => {}
            }
        }
        let g = tri::gram(&self.tuned);
        g.sub(&q).frobenius() / q.frobenius()
    }
}

/// `B = ℒ⁻¹ (A - θI) ℒ⁻*`.
pub struct PreconditionedOperator<'a> {
    a: &'a SparseHermitianMatrix,
    shift: f64,
    l: &'a DenseMatrix,
    scale: f64,
}

impl<'a> PreconditionedOperator<'a> {
    pub fn new(a: &'a SparseHermitianMatrix, shift: f64, l: &'a DenseMatrix) -> Self {
        let mut op = Self { a, shift, l, scale: 1.0 };
        op.scale = op.norm_estimate();
        op
    }

    /// A few power steps from a fixed vector; scales the breakdown test.
    fn norm_estimate(&self) -> f64 {
        let n = self.a.dim();
        let mut x: DenseVector = (0..n).map(|i| c64::new(1.0 + ((i * 7919) % 13) as f64 / 13.0, 0.0)).collect();
        let mut est = 0.0;
        let mut y = zeros(n);
        for _ in 0..8 {
            let nx = norm(&x);
            if nx == 0.0 || !nx.is_finite() {
                break;
            }
            scale_real(1.0 / nx, &mut x);
            self.apply(&x, &mut y);
            est = norm(&y);
            std::mem::swap(&mut x, &mut y);
        }
        est.max(f64::MIN_POSITIVE)
    }
}

impl HermitianOperator for PreconditionedOperator<'_> {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn apply(&self, x: &[c64], y: &mut [c64]) {
        let t = tri::solve_lower_adjoint(self.l, x);
        let mut s = zeros(t.len());
        self.a.shifted_matvec_into(self.shift, &t, &mut s);
        y.copy_from_slice(&tri::solve_lower(self.l, &s));
    }

    fn scale(&self) -> f64 {
        self.scale
    }
}

/// MINRES on `ℒ⁻¹ (A - θI) ℒ⁻* ŵ = ℒ⁻¹ u`, run until the original-variable
/// residual `ξ = ‖ℒ r̂‖` drops to `tol`. The result is expressed in the
/// original variables; `residual_history` records `ξ` after each step.
pub fn preconditioned_minres_solve(
    a: &SparseHermitianMatrix,
    shift: f64,
    u: &[c64],
    p: &TunedPreconditioner,
    tol: f64,
    max_steps: usize,
) -> Result<InnerSolveResult> {
    if u.len() != a.dim() || p.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: u.len().min(p.dim()) });
    }
    check_unit(u)?;
    if max_steps < 2 {
        return Err(Error::InvalidArgument(format!("max_steps must be at least 2, got {max_steps}")));
    }
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in [0, 1), got {tol}")));
    }
    if !p.spd_ok {
        return Err(Error::NotPositiveDefinite);
    }
    let l = &p.tuned;
    let op = PreconditionedOperator::new(a, shift, l);
    let mut rhs_hat = tri::solve_lower(l, u);
    let rhs_hat_norm = norm(&rhs_hat);
    if !rhs_hat_norm.is_finite() {
        return Err(Error::NonFinite("preconditioned right-hand side"));
    }
    scale_real(1.0 / rhs_hat_norm, &mut rhs_hat);

    let run = krylov_minres(&op, &rhs_hat, rhs_hat_norm, tol, max_steps, |g, dir| g * norm(&tri::mul_lower(l, dir)))?;

    let w_hat = run.solution;
    let w = tri::solve_lower_adjoint(l, &w_hat);
    let (xi, d) = explicit_direction(a, shift, u, &w);

    // ξ̂ d̂ = B ŵ - ℒ⁻¹ u
    let mut r_hat = zeros(w.len());
    op.apply(&w_hat, &mut r_hat);
    axpy(c64::new(-rhs_hat_norm, 0.0), &rhs_hat, &mut r_hat);
    let xi_hat = norm(&r_hat);
    let l_r_hat = tri::mul_lower(l, &r_hat);
    let ld_hat_norm = if xi_hat == 0.0 { 0.0 } else { norm(&l_r_hat) / xi_hat };
    let mut defect = zeros(w.len());
    a.shifted_matvec_into(shift, &w, &mut defect);
    for ((di, ui), li) in defect.iter_mut().zip(u).zip(&l_r_hat) {
        *di -= ui + li;
    }
    let mapped_defect = norm(&defect) / ((a.one_norm() + shift.abs()) * norm(&w) + 1.0);

    Ok(InnerSolveResult {
        w,
        xi,
        d,
        steps: run.lanczos.steps(),
        residual_history: run.history,
        converged: run.converged,
        stagnated: run.stagnated,
        breakdown: run.lanczos.breakdown,
        precond: Some(PrecondInfo { xi_hat, ld_hat_norm, rhs_hat_norm, mapped_defect }),
    })
}
