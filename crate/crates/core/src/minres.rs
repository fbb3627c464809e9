//! MINRES for `(A - θI) w = u` from the zero initial guess.
//!
//! The `(m+1) x m` least-squares problem `min ‖β₀e₁ - T̂_m y‖` is reduced by
//! Givens rotations applied as the tridiagonal grows. The residual vector of
//! the current iterate is kept in factored form `g_{m+1} p_m`, where
//! `p_m = V_{m+1} Q_m* e_{m+1}` obeys `p_m = -s_m p_{m-1} + c_m v_{m+1}`.
//! `w` and `d` are formed explicitly only once, at termination.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lanczos::{HermitianOperator, LanczosDecomposition, ShiftedMatrix};
use crate::matio::SparseHermitianMatrix;
use crate::vector::{axpy, c64, check_unit, dot, is_finite, norm, scale_real, sub, zeros, DenseVector};

/// Residual floor that counts as an exact solve when `tol = 0`.
pub const EXACT_TOL: f64 = 1e-14;

/// Relative iterate update `‖w_m - w_{m-1}‖ / ‖w_m‖` at or below which a
/// step counts as stagnant.
pub const STAGNATION_TOL: f64 = f64::EPSILON;

/// Relative size at or below which the last pivot of a broken-down
/// tridiagonal counts as zero.
pub const SINGULAR_PIVOT_TOL: f64 = 1e-14;

/// Consecutive stagnant steps that end the solve.
pub const STAGNATION_STEPS: usize = 3;

/// Data specific to a preconditioned solve, in the notation
/// `(A - θI) w = u + ξ̂ ℒ d̂`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PrecondInfo {
    /// Absolute residual norm of the transformed system.
    pub xi_hat: f64,
    /// `‖ℒ d̂‖`.
    pub ld_hat_norm: f64,
    /// `‖ℒ⁻¹ u‖`.
    pub rhs_hat_norm: f64,
    /// `‖(A - θI) w - u - ξ̂ ℒ d̂‖ / ((‖A‖₁ + |θ|) ‖w‖ + 1)`.
    pub mapped_defect: f64,
}

#[derive(Clone, Debug)]
pub struct InnerSolveResult {
    pub w: DenseVector,
    /// Relative residual norm of the explicitly formed residual.
    pub xi: f64,
    /// Unit direction with `ξ d = (A - θI) w - u`; zero when `xi = 0`.
    pub d: DenseVector,
    /// Lanczos steps `m`.
    pub steps: usize,
    /// Residual norm after each step, from the recurrence.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub stagnated: bool,
    /// The Krylov space became invariant.
    pub breakdown: bool,
    pub precond: Option<PrecondInfo>,
}

/// Raw output of the Krylov iteration on a generic Hermitian operator.
pub(crate) struct KrylovSolve {
    pub lanczos: LanczosDecomposition,
    /// `V_m y`, in the variables of the operator.
    pub solution: DenseVector,
    pub history: Vec<f64>,
    pub converged: bool,
    pub stagnated: bool,
}

/// Upper-triangular `R` with bandwidth 3, stored by columns as
/// `(r_{j-2,j}, r_{j-1,j}, r_{jj})`.
struct BandedQr {
    cols: Vec<[f64; 3]>,
    rotations: Vec<(f64, f64)>,
    /// Transformed right-hand side `Q_m β₀ e₁`, length `m + 1`.
    g: Vec<f64>,
    /// At breakdown, pivots at or below this are treated as exact zeros.
    singular_tol: f64,
}

impl BandedQr {
    fn new(beta0: f64, singular_tol: f64) -> Self {
        Self { cols: Vec::new(), rotations: Vec::new(), g: vec![beta0], singular_tol }
    }

    /// Appends column `j` of `T̂` with entries `beta_prev` (row j-1), `alpha`
    /// (row j), `beta` (row j+1). Returns the new rotation.
    fn push(&mut self, beta_prev: f64, alpha: f64, beta: f64) -> (f64, f64) {
        let j = self.cols.len();
        let (mut top, mut mid, mut diag) = (0.0, beta_prev, alpha);
        if j >= 2 {
            let (c, s) = self.rotations[j - 2];
            top = s * mid;
            mid *= c;
        }
        if j >= 1 {
            let (c, s) = self.rotations[j - 1];
            let (a, b) = (mid, diag);
            mid = c * a + s * b;
            diag = -s * a + c * b;
        }
        let rho = diag.hypot(beta);
        // A zero column leaves the residual untouched and y_j = 0.
        let (c, s, rho) = if beta == 0.0 && rho <= self.singular_tol { (0.0, 1.0, 0.0) } else { (diag / rho, beta / rho, rho) };
        self.cols.push([top, mid, rho]);
        self.rotations.push((c, s));
        let gj = self.g[j];
        self.g[j] = c * gj;
        self.g.push(-s * gj);
        (c, s)
    }

    fn residual(&self) -> f64 {
        self.g.last().copied().unwrap_or(0.0).abs()
    }

    fn solve(&self) -> Vec<f64> {
        let m = self.cols.len();
        let mut y = vec![0.0; m];
        for j in (0..m).rev() {
            let mut acc = self.g[j];
            if j + 1 < m {
                acc -= self.cols[j + 1][1] * y[j + 1];
            }
            if j + 2 < m {
                acc -= self.cols[j + 2][0] * y[j + 2];
            }
            let r = self.cols[j][2];
            y[j] = if r == 0.0 { 0.0 } else { acc / r };
        }
        y
    }
}

/// Runs MINRES on `op y = beta0 · start` with `start` a unit vector.
///
/// `measure(|g_{m+1}|, p_m)` maps the factored residual to the quantity
/// compared against `tol` and recorded in the history.
pub(crate) fn krylov_minres<O, F>(
    op: &O,
    start: &[c64],
    beta0: f64,
    tol: f64,
    max_steps: usize,
    mut measure: F,
) -> Result<KrylovSolve>
where
    O: HermitianOperator,
    F: FnMut(f64, &[c64]) -> f64,
{
    let n = op.dim();
    let mut lanczos = LanczosDecomposition::new(op, 0.0, start)?;
    let mut qr = BandedQr::new(beta0, SINGULAR_PIVOT_TOL * op.scale());
    let mut p: DenseVector = start.to_vec();
    let mut history = Vec::new();
    let mut converged = false;
    let mut stagnated = false;
    let mut stagnant_run = 0;
    let mut y_prev: Vec<f64> = Vec::new();
    let target = if tol == 0.0 { EXACT_TOL } else { tol };

    for _ in 0..max_steps {
        lanczos.extend(op, 1)?;
        let j = lanczos.steps() - 1;
        let beta_prev = if j > 0 { lanczos.beta[j - 1] } else { 0.0 };
        let beta = if lanczos.breakdown { 0.0 } else { lanczos.beta[j] };
        let (c, s) = qr.push(beta_prev, lanczos.alpha[j], beta);

        scale_real(-s, &mut p);
        if let Some(next) = lanczos.basis.get(j + 1) {
            axpy(c64::new(c, 0.0), next, &mut p);
        }

        let res = measure(qr.residual(), &p);
        if !res.is_finite() {
            return Err(Error::NonFinite("minres residual"));
        }
        history.push(res);
        // ‖w_m - w_{m-1}‖ = ‖y_m - (y_{m-1}, 0)‖ since V_m is orthonormal.
        let y = qr.solve();
        let y_norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let step: f64 = y.iter().enumerate().map(|(i, v)| (v - y_prev.get(i).copied().unwrap_or(0.0)).powi(2)).sum::<f64>().sqrt();
        if step <= STAGNATION_TOL * y_norm {
            stagnant_run += 1;
        } else {
            stagnant_run = 0;
        }
        y_prev = y;

        let m = j + 1;
        if lanczos.breakdown {
            converged = res <= target || qr.residual() <= EXACT_TOL * beta0;
            break;
        }
        if m >= 2 && res <= target {
            converged = true;
            break;
        }
        if stagnant_run >= STAGNATION_STEPS {
            stagnated = true;
            break;
        }
    }

    let mut solution = zeros(n);
    for (yj, vj) in y_prev.iter().zip(&lanczos.basis) {
        axpy(c64::new(*yj, 0.0), vj, &mut solution);
    }
    if !is_finite(&solution) {
        return Err(Error::NonFinite("minres solution"));
    }
    Ok(KrylovSolve { lanczos, solution, history, converged, stagnated })
}

fn validate(a: &SparseHermitianMatrix, shift: f64, rhs: &[c64], tol: f64, max_steps: usize) -> Result<()> {
    if rhs.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: rhs.len() });
    }
    check_unit(rhs)?;
    if max_steps < 2 {
        return Err(Error::InvalidArgument(format!("max_steps must be at least 2, got {max_steps}")));
    }
    if !(0.0..1.0).contains(&tol) {
        return Err(Error::InvalidArgument(format!("tolerance must lie in [0, 1), got {tol}")));
    }
    if !shift.is_finite() {
        return Err(Error::NonFinite("shift"));
    }
    Ok(())
}

/// `ξ` and `d` from the explicit residual `(A - θI) w - rhs`.
pub(crate) fn explicit_direction(a: &SparseHermitianMatrix, shift: f64, rhs: &[c64], w: &[c64]) -> (f64, DenseVector) {
    let mut aw = zeros(a.dim());
    a.shifted_matvec_into(shift, w, &mut aw);
    let mut d = sub(&aw, rhs);
    let xi = norm(&d);
    if xi <= EXACT_TOL * norm(rhs) {
        return (0.0, zeros(a.dim()));
    }
    scale_real(1.0 / xi, &mut d);
    (xi, d)
}

/// Solves `(A - shift I) w = rhs` to relative residual `tol`.
pub fn minres_solve(
    a: &SparseHermitianMatrix,
    shift: f64,
    rhs: &[c64],
    tol: f64,
    max_steps: usize,
) -> Result<InnerSolveResult> {
    minres_solve_detailed(a, shift, rhs, tol, max_steps).map(|(r, _)| r)
}

/// [`minres_solve`] that also returns the Lanczos decomposition it built.
pub fn minres_solve_detailed(
    a: &SparseHermitianMatrix,
    shift: f64,
    rhs: &[c64],
    tol: f64,
    max_steps: usize,
) -> Result<(InnerSolveResult, LanczosDecomposition)> {
    validate(a, shift, rhs, tol, max_steps)?;
    let op = ShiftedMatrix::new(a, shift);
    let run = krylov_minres(&op, rhs, 1.0, tol, max_steps, |g, _| g)?;
    let (xi, d) = explicit_direction(a, shift, rhs, &run.solution);
    let mut lanczos = run.lanczos;
    lanczos.shift = shift;
    let result = InnerSolveResult {
        w: run.solution,
        xi,
        d,
        steps: lanczos.steps(),
        residual_history: run.history,
        converged: run.converged,
        stagnated: run.stagnated,
        breakdown: lanczos.breakdown,
        precond: None,
    };
    Ok((result, lanczos))
}

/// `|ξ² + ‖(A - θI) w‖² - ‖rhs‖²|`.
pub fn residual_identity_check(result: &InnerSolveResult, a: &SparseHermitianMatrix, shift: f64, rhs: &[c64]) -> f64 {
    let mut aw = zeros(a.dim());
    a.shifted_matvec_into(shift, &result.w, &mut aw);
    (result.xi * result.xi + norm(&aw).powi(2) - norm(rhs).powi(2)).abs()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualDirection {
    /// `|d* (A - θI) rhs| / ‖(A - θI) rhs‖`.
    pub orth_defect: f64,
    /// `Re(x* d)` with `x` rotated so that `x* rhs > 0`.
    pub cos_psi: f64,
    /// `‖d - (x* d) x‖`.
    pub sin_psi: f64,
}

/// Alignment of the residual direction with the eigenvector `x`.
pub fn residual_direction_diagnostics(
    result: &InnerSolveResult,
    a: &SparseHermitianMatrix,
    shift: f64,
    rhs: &[c64],
    x: &[c64],
) -> Result<ResidualDirection> {
    if result.xi == 0.0 {
        return Err(Error::Undefined("residual direction of an exact solve"));
    }
    let mut ar = zeros(a.dim());
    a.shifted_matvec_into(shift, rhs, &mut ar);
    let ar_norm = norm(&ar);
    let orth_defect = if ar_norm == 0.0 { 0.0 } else { dot(&result.d, &ar).norm() / ar_norm };
    let xu = dot(x, rhs);
    if xu.norm() == 0.0 {
        return Err(Error::Undefined("phase of an eigenvector orthogonal to the right-hand side"));
    }
    // x̃ = x · (x*u)/|x*u| satisfies x̃* u = |x*u|.
    let phase = xu / xu.norm();
    let xd = phase.conj() * dot(x, &result.d);
    let mut rest = result.d.clone();
    axpy(-(xd * phase), x, &mut rest);
    Ok(ResidualDirection { orth_defect, cos_psi: xd.re, sin_psi: norm(&rest) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::vector::{from_real, normalize};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> SparseHermitianMatrix {
        let mut d = DenseMatrix::zeros(n);
        for i in 0..n {
            d[(i, i)] = c64::new(rng.gen_range(-3.0..3.0), 0.0);
            for j in 0..i {
                let v = c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                d[(i, j)] = v;
                d[(j, i)] = v.conj();
            }
        }
        SparseHermitianMatrix::from_dense(&d).unwrap()
    }

    fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> DenseVector {
        let mut v: DenseVector = (0..n).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        normalize(&mut v).unwrap();
        v
    }

    /// min ‖b - M z‖ over z in span{b, Mb, ..., M^{m-1} b}, by Gram-Schmidt on
    /// the images `M K` (dense least squares).
    fn krylov_least_squares(m_dense: &DenseMatrix, b: &[c64], m: usize) -> f64 {
        let mut k = b.to_vec();
        let mut images: Vec<DenseVector> = Vec::new();
        for _ in 0..m {
            let mk = m_dense.matvec(&k);
            images.push(mk.clone());
            k = mk;
            let s = norm(&k);
            scale_real(1.0 / s, &mut k);
        }
        let mut q: Vec<DenseVector> = Vec::new();
        for mut v in images {
            for _ in 0..2 {
                for qi in &q {
                    let c = dot(qi, &v);
                    axpy(-c, qi, &mut v);
                }
            }
            let s = norm(&v);
            if s > 1e-13 {
                scale_real(1.0 / s, &mut v);
                q.push(v);
            }
        }
        let mut r = b.to_vec();
        for qi in &q {
            let c = dot(qi, &r);
            axpy(-c, qi, &mut r);
        }
        norm(&r)
    }

    #[test]
    fn exact_solve_of_eigenvector_rhs() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[2.0, -1.0, 3.0]);
        let res = minres_solve(&a, 0.0, &from_real(&[1.0, 0.0, 0.0]), 0.0, 10).unwrap();
        assert!((res.w[0].re - 0.5).abs() < 1e-15);
        assert!(res.w[1].norm() < 1e-15 && res.w[2].norm() < 1e-15);
        assert!(res.xi <= 1e-14);
        assert!(res.converged && res.breakdown);
        assert!(res.d.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn invariant_subspace_rhs_gives_scaled_solution() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 4.0, 9.0]);
        let shift = 2.0;
        let rhs = from_real(&[0.0, 1.0, 0.0]);
        let res = minres_solve(&a, shift, &rhs, 0.1, 5).unwrap();
        assert!((res.w[1].re - 0.5).abs() < 1e-14);
        assert!(res.xi <= 1e-14);
    }

    #[test]
    fn rejects_bad_arguments() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        let u = from_real(&[0.6, 0.8]);
        assert!(minres_solve(&a, 0.0, &u, 0.1, 1).is_err());
        assert!(minres_solve(&a, 0.0, &from_real(&[1.0, 1.0]), 0.1, 4).is_err());
        assert!(minres_solve(&a, 0.0, &u, 1.0, 4).is_err());
        assert!(minres_solve(&a, f64::NAN, &u, 0.1, 4).is_err());
    }

    #[test]
    fn rayleigh_shift_never_stops_at_one_step() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[0.0, 1.0, 2.0, 5.0]);
        let u = from_real(&[0.9, 0.3, 0.3, (1.0f64 - 0.99).sqrt()]);
        let theta = crate::vector::dot(&u, &a.matvec(&u).unwrap()).re;
        let res = minres_solve(&a, theta, &u, 0.999, 10).unwrap();
        assert!(res.steps >= 2);
        // one step gives y = 0 since t_11 = 0
        assert!((res.residual_history[0] - 1.0).abs() < 1e-12);
        assert!(res.xi < 1.0);
    }

    #[test]
    fn random_indefinite_matches_direct_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let a = random_hermitian(12, &mut rng);
            let rhs = random_unit(12, &mut rng);
            let res = minres_solve(&a, 0.0, &rhs, 1e-8, 40).unwrap();
            let exact = a.to_dense().solve(&rhs).unwrap();
            let err = norm(&sub(&res.w, &exact)) / norm(&exact);
            let cond_guard = 1e-8 * norm(&exact) * a.one_norm();
            assert!(err <= cond_guard.max(1e-6), "{err}");
            assert!((res.xi - res.residual_history.last().unwrap()).abs() < 1e-10);
            assert!(res.converged);
        }
    }

    #[test]
    fn history_is_optimal_and_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let a = random_hermitian(10, &mut rng);
        let rhs = random_unit(10, &mut rng);
        let shift = 0.25;
        let res = minres_solve(&a, shift, &rhs, 0.0, 10).unwrap();
        let mut dense = a.to_dense();
        dense.shift_diagonal(-shift);
        for (m, h) in res.residual_history.iter().enumerate() {
            let oracle = krylov_least_squares(&dense, &rhs, m + 1);
            assert!((h - oracle).abs() <= 1e-10, "m={} {h} vs {oracle}", m + 1);
        }
        for pair in res.residual_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-14);
        }
    }

    #[test]
    fn identity_and_orthogonality_hold_for_inexact_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &tol in &[0.8, 0.5, 0.1] {
            let a = random_hermitian(12, &mut rng);
            let rhs = random_unit(12, &mut rng);
            let shift = 0.1;
            let (res, lanczos) = minres_solve_detailed(&a, shift, &rhs, tol, 12).unwrap();
            assert!(res.xi <= tol + 1e-12);
            assert!((norm(&res.d) - 1.0).abs() < 1e-12);
            assert!(residual_identity_check(&res, &a, shift, &rhs) <= 1e-10);
            for v in &lanczos.basis[..res.steps] {
                let av = a.shifted_matvec(shift, v).unwrap();
                assert!((dot(&res.d, &av) * res.xi).norm() <= 1e-10);
            }
            let x = random_unit(12, &mut rng);
            let diag = residual_direction_diagnostics(&res, &a, shift, &rhs, &x).unwrap();
            assert!(diag.orth_defect <= 1e-10);
            assert!((diag.cos_psi.powi(2) + diag.sin_psi.powi(2) - 1.0).abs() < 1e-10 || x.iter().any(|v| v.im != 0.0));
        }
    }

    #[test]
    fn direction_of_exact_solve_is_undefined() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[2.0, 3.0]);
        let rhs = from_real(&[1.0, 0.0]);
        let res = minres_solve(&a, 0.0, &rhs, 0.0, 4).unwrap();
        assert!(matches!(
            residual_direction_diagnostics(&res, &a, 0.0, &rhs, &rhs),
            Err(Error::Undefined(_))
        ));
    }

    #[test]
    fn stagnation_is_reported_not_looped() {
        // A singular shifted system with the rhs partly in the null space:
        // the residual cannot fall below the null-space component.
        let a = SparseHermitianMatrix::from_real_diagonal(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        let mut rhs = from_real(&[1.0, 1.0, 1.0, 1.0, 1.0, 1.0]);
        normalize(&mut rhs).unwrap();
        let res = minres_solve(&a, 0.0, &rhs, 1e-3, 6).unwrap();
        assert!(!res.converged);
        assert!((res.xi - (1.0f64 / 6.0).sqrt()).abs() < 1e-10);
    }
}
