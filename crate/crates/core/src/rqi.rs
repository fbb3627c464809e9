//! The outer iteration.
//!
//! Step `k` forms `θ_k = u_k* A u_k`, picks an inner tolerance `ξ_k` from a
//! [`TolerancePolicy`], solves `(A - θ_k I) w = u_k` to that relative residual
//! and normalizes `u_{k+1} = w / ‖w‖`. The run stops once
//! `‖r_k‖ <= ‖A‖₁ · stop_tol`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{angle_between, SpectralOracle};
use crate::error::{Error, Result};
use crate::matio::SparseHermitianMatrix;
use crate::minres::{minres_solve, residual_direction_diagnostics, InnerSolveResult};
use crate::tuned_precond::{preconditioned_minres_solve, PrecondMode, TunedPreconditioner, TuningOutcome};
use crate::vector::{axpy, c64, check_unit, dot, fix_phase, is_finite, norm, normalize, scale_real, DenseVector};

/// Near-one tolerances that round to one are replaced by this value.
pub const XI_CEILING: f64 = 1.0 - 1e-8;

/// `1 - ξ` at or below this many ulps of one counts as `ξ = 1`.
const CEILING_ULPS: f64 = 4.0;

/// `‖w_{k+1}‖` below this ends the run.
pub const W_BREAKDOWN: f64 = 1e-30;

pub const DEFAULT_STOP_TOL: f64 = 1e-14;
pub const DEFAULT_MAX_OUTER: usize = 50;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenEstimate {
    pub u: DenseVector,
    pub theta: f64,
    /// `(A - θI) u`
    pub r: DenseVector,
    pub r_norm: f64,
    /// Imaginary part of `u* A u` dropped from `θ`.
    pub theta_imag: f64,
}

/// `θ = u* A u` and the residual `A u - θ u`.
pub fn rayleigh_quotient(a: &SparseHermitianMatrix, u: &[c64]) -> Result<EigenEstimate> {
    if u.len() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: u.len() });
    }
    check_unit(u)?;
    let mut r = a.matvec(u)?;
    let q = dot(u, &r);
    let theta = q.re;
    axpy(c64::new(-theta, 0.0), u, &mut r);
    let r_norm = norm(&r);
    if !theta.is_finite() || !r_norm.is_finite() {
        return Err(Error::NonFinite("rayleigh quotient"));
    }
    Ok(EigenEstimate { u: u.to_vec(), theta, r, r_norm, theta_imag: q.im })
}

/// Rule for the inner tolerance `ξ_k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum TolerancePolicy {
    /// `ξ_k = 0`: the shifted system is solved to working accuracy.
    Exact,
    Fixed { xi: f64 },
    /// `min{cap, ‖r_k‖/‖A‖₁}`
    Decreasing { cap: f64 },
    /// `max{floor, 1 - c1 ‖r_k‖/‖A‖₁}`
    QuadraticNearOne { c1: f64, floor: f64 },
    /// `max{floor, 1 - (c2 ‖r_k‖/‖A‖₁)²}`
    LinearNearOne { c2: f64, floor: f64 },
}

impl TolerancePolicy {
    pub fn decreasing() -> Self {
        Self::Decreasing { cap: 0.1 }
    }

    pub fn quadratic(c1: f64) -> Self {
        Self::QuadraticNearOne { c1, floor: 0.95 }
    }

    pub fn linear(c2: f64) -> Self {
        Self::LinearNearOne { c2, floor: 0.95 }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match *self {
            Self::Exact => Ok(()),
            Self::Fixed { xi } if !(xi > 0.0 && xi < 1.0) => bad(format!("fixed tolerance must lie in (0, 1), got {xi}")),
            Self::Decreasing { cap } if !(cap > 0.0 && cap < 1.0) => bad(format!("cap must lie in (0, 1), got {cap}")),
            Self::QuadraticNearOne { c1: c, floor } | Self::LinearNearOne { c2: c, floor } => {
                if !(c > 0.0 && c.is_finite()) {
                    bad(format!("policy constant must be positive, got {c}"))
                } else if !(0.0..1.0).contains(&floor) {
                    bad(format!("floor must lie in [0, 1), got {floor}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Short label used in tables and file names.
    pub fn label(&self) -> String {
        match *self {
            Self::Exact => "exact".into(),
            Self::Fixed { xi } => format!("fixed:{xi}"),
            Self::Decreasing { .. } => "decreasing".into(),
            Self::QuadraticNearOne { c1, .. } => format!("quad:{c1}"),
            Self::LinearNearOne { c2, .. } => format!("linear:{c2}"),
        }
    }
}

impl std::str::FromStr for TolerancePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid policy '{s}'"));
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| bad());
        let policy = match s.split_once(':') {
            None if s == "exact" => Self::Exact,
            None if s == "decreasing" => Self::decreasing(),
            Some(("fixed", v)) => Self::Fixed { xi: num(v)? },
            Some(("quad", v)) => Self::quadratic(num(v)?),
            Some(("linear", v)) => Self::linear(num(v)?),
            _ => return Err(bad()),
        };
        policy.validate()?;
        Ok(policy)
    }
}

/// `ξ_k` for the current iterate. Near-one values that equal one at working
/// precision are replaced by [`XI_CEILING`].
pub fn next_tolerance(policy: &TolerancePolicy, state: &EigenEstimate, a: &SparseHermitianMatrix) -> f64 {
    let rel = state.r_norm / a.one_norm();
    let near_one = |raw: f64| {
        if 1.0 - raw <= CEILING_ULPS * f64::EPSILON {
            XI_CEILING
        } else {
            raw
        }
    };
    match *policy {
        TolerancePolicy::Exact => 0.0,
        TolerancePolicy::Fixed { xi } => xi,
        TolerancePolicy::Decreasing { cap } => cap.min(rel),
        TolerancePolicy::QuadraticNearOne { c1, floor } => near_one(floor.max(1.0 - c1 * rel)),
        TolerancePolicy::LinearNearOne { c2, floor } => near_one(floor.max(1.0 - (c2 * rel).powi(2))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub preconditioner: Option<PrecondMode>,
    /// Lanczos step cap per inner solve; the matrix order when `None`.
    pub max_inner: Option<usize>,
    pub max_outer: usize,
    pub stop_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { preconditioner: None, max_inner: None, max_outer: DEFAULT_MAX_OUTER, stop_tol: DEFAULT_STOP_TOL }
    }
}

/// One outer iteration: the state of `u_k` and the inner solve made from it.
/// The last record of a run carries no solve.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub theta: f64,
    pub r_norm: f64,
    pub xi_requested: Option<f64>,
    pub xi_achieved: Option<f64>,
    pub inner_steps: Option<usize>,
    pub stagnated: Option<bool>,
    /// `‖w_{k+1}‖`
    pub w_norm: Option<f64>,
    pub sin_phi: Option<f64>,
    pub cos_psi: Option<f64>,
    pub cos_phi_plus_xi_cos_psi: Option<f64>,
    #[serde(skip)]
    pub extra: RecordExtras,
}

/// Oracle and preconditioner quantities that are not part of the trace file.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RecordExtras {
    pub cos_phi: Option<f64>,
    pub sin_psi: Option<f64>,
    /// `|f_k* (A - θI) e_k| / ‖(A - θI) e_k‖`
    pub cos_varphi: Option<f64>,
    /// `|d* (A - θI) u| / ‖(A - θI) u‖`
    pub orth_defect: Option<f64>,
    /// `x* (u - (A - θI) w) / x* u`, the residual polynomial at `λ - θ`.
    pub eps_m: Option<f64>,
    pub residual_history: Vec<f64>,
    pub converged_inner: Option<bool>,
    /// `ε ‖A‖₁ ‖w‖`, the rounding level of the explicit inner residual.
    pub residual_floor: Option<f64>,
    pub tuning: Option<TuningOutcome>,
    pub tuning_defect: Option<f64>,
    pub factor_defect: Option<f64>,
    pub mapped_defect: Option<f64>,
    pub xi_hat: Option<f64>,
    pub rhs_hat_norm: Option<f64>,
}

impl OuterRecord {
    /// The inner solve's `ξ` or `1 - ξ` lies below the rounding level of
    /// the explicit residual, so neither is resolved.
    pub fn inner_at_floor(&self) -> bool {
        match (self.xi_achieved, self.extra.residual_floor) {
            (Some(xi), Some(floor)) => xi >= 1.0 || (xi > 0.0 && floor >= xi) || 1.0 - xi <= floor,
            _ => false,
        }
    }

    /// `ξ` of the inner solve, when it is resolved above rounding.
    pub fn resolved_xi(&self) -> Option<f64> {
        self.xi_achieved.filter(|_| !self.inner_at_floor())
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct OuterTrace {
    pub records: Vec<OuterRecord>,
}

impl OuterTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Outer iterations performed (records with an inner solve).
    pub fn outer_steps(&self) -> usize {
        self.records.iter().filter(|r| r.inner_steps.is_some()).count()
    }

    pub fn total_inner_steps(&self) -> usize {
        self.records.iter().filter_map(|r| r.inner_steps).sum()
    }

    fn push(&mut self, record: OuterRecord) {
        debug_assert!(self.records.last().map_or(true, |r| r.k < record.k));
        self.records.push(record);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    Exhausted,
    Breakdown,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub trace: OuterTrace,
    pub final_estimate: EigenEstimate,
    pub status: RunStatus,
    /// Diagonal shift of the base preconditioner, when one was built.
    pub precond_alpha: Option<f64>,
}

/// A hard failure together with the iterations completed before it.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} outer records)", trace.len())]
pub struct RunError {
    #[source]
    pub error: Error,
    pub trace: OuterTrace,
}

fn state_record(k: usize, est: &EigenEstimate, oracle: Option<&SpectralOracle>) -> OuterRecord {
    let angles = oracle.map(|o| angle_between(&est.u, o.x()));
    OuterRecord {
        k,
        theta: est.theta,
        r_norm: est.r_norm,
        xi_requested: None,
        xi_achieved: None,
        inner_steps: None,
        stagnated: None,
        w_norm: None,
        sin_phi: angles.map(|a| a.sin_phi),
        cos_psi: None,
        cos_phi_plus_xi_cos_psi: None,
        extra: RecordExtras { cos_phi: angles.map(|a| a.cos_phi), ..Default::default() },
    }
}

/// `|f* (A - θI) e| / ‖(A - θI) e‖` with `e`, `f` the unit components of
/// `u` and `d` orthogonal to `x`.
fn cos_varphi(a: &SparseHermitianMatrix, theta: f64, u: &[c64], d: &[c64], x: &[c64]) -> Option<f64> {
    let strip = |v: &[c64]| {
        let mut out = v.to_vec();
        axpy(-dot(x, v), x, &mut out);
        let s = norm(&out);
        (s > 0.0).then(|| {
            scale_real(1.0 / s, &mut out);
            out
        })
    };
    let e = strip(u)?;
    let f = strip(d)?;
    let ae = a.shifted_matvec(theta, &e).ok()?;
    let den = norm(&ae);
    (den > 0.0).then(|| dot(&f, &ae).norm() / den)
}

fn annotate_solve(
    rec: &mut OuterRecord,
    a: &SparseHermitianMatrix,
    est: &EigenEstimate,
    xi_req: f64,
    sol: &InnerSolveResult,
    oracle: Option<&SpectralOracle>,
) {
    rec.xi_requested = Some(xi_req);
    rec.xi_achieved = Some(sol.xi);
    rec.inner_steps = Some(sol.steps);
    rec.stagnated = Some(sol.stagnated);
    rec.w_norm = Some(norm(&sol.w));
    rec.extra.residual_history = sol.residual_history.clone();
    rec.extra.residual_floor = Some(f64::EPSILON * a.one_norm() * norm(&sol.w));
    rec.extra.converged_inner = Some(sol.converged);
    if let Some(info) = &sol.precond {
        rec.extra.mapped_defect = Some(info.mapped_defect);
        rec.extra.xi_hat = Some(info.xi_hat);
        rec.extra.rhs_hat_norm = Some(info.rhs_hat_norm);
    }
    let Some(o) = oracle else { return };
    let x = o.x();
    let cos_phi = rec.extra.cos_phi.unwrap_or(0.0);
    if sol.xi == 0.0 {
        rec.cos_phi_plus_xi_cos_psi = Some(cos_phi);
        rec.extra.eps_m = Some(0.0);
        return;
    }
    if let Ok(dir) = residual_direction_diagnostics(sol, a, est.theta, &est.u, x) {
        rec.cos_psi = Some(dir.cos_psi);
        rec.cos_phi_plus_xi_cos_psi = Some(cos_phi + sol.xi * dir.cos_psi);
        rec.extra.sin_psi = Some(dir.sin_psi);
        rec.extra.orth_defect = Some(dir.orth_defect);
        if cos_phi > 0.0 {
            rec.extra.eps_m = Some(-sol.xi * dir.cos_psi / cos_phi);
        }
        rec.extra.cos_varphi = cos_varphi(a, est.theta, &est.u, &sol.d, x);
    }
}

/// Runs the outer iteration from `u0` (normalized internally).
pub fn run(
    a: &SparseHermitianMatrix,
    u0: &[c64],
    policy: &TolerancePolicy,
    config: &SolverConfig,
    oracle: Option<&SpectralOracle>,
) -> std::result::Result<RunOutput, RunError> {
    let mut trace = OuterTrace::default();
    macro_rules! fail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(RunError { error, trace }),
            }
        };
    }
    let n = a.dim();
    if u0.len() != n {
        return Err(RunError { error: Error::DimensionMismatch { expected: n, got: u0.len() }, trace });
    }
    fail!(policy.validate());
    if !(config.stop_tol > 0.0 && config.stop_tol < 1.0) {
        fail!(Err(Error::InvalidArgument(format!("stop_tol must lie in (0, 1), got {}", config.stop_tol))));
    }
    if config.max_outer < 1 {
        fail!(Err(Error::InvalidArgument("max_outer must be at least 1".into())));
    }
    if oracle.is_some_and(|o| o.eigenvalues.len() != n) {
        fail!(Err(Error::DimensionMismatch { expected: n, got: oracle.unwrap().eigenvalues.len() }));
    }
    let max_inner = config.max_inner.unwrap_or(n).max(2);
    let threshold = a.one_norm() * config.stop_tol;

    let mut u = u0.to_vec();
    fail!(normalize(&mut u));
    fix_phase(&mut u);

    let mut precond: Option<TunedPreconditioner> = None;
    let mut k = 0;
    loop {
        let est = fail!(rayleigh_quotient(a, &u));
        let mut rec = state_record(k, &est, oracle);
        if est.r_norm <= threshold || k == config.max_outer {
            let status = if est.r_norm <= threshold { RunStatus::Converged } else { RunStatus::Exhausted };
            trace.push(rec);
            let precond_alpha = precond.as_ref().map(|p| p.alpha);
            return Ok(RunOutput { trace, final_estimate: est, status, precond_alpha });
        }
        let xi_req = next_tolerance(policy, &est, a);

        let sol = match config.preconditioner {
            None => fail!(minres_solve(a, est.theta, &est.u, xi_req, max_inner)),
            Some(mode) => {
                if precond.is_none() {
                    precond = Some(fail!(TunedPreconditioner::build_base(a, est.theta, mode)));
                }
                let p = precond.as_mut().expect("built above");
                let outcome = fail!(p.tune(a, &est.u));
                rec.extra.tuning = Some(outcome);
                rec.extra.tuning_defect = p.tuning_defect(a, &est.u).ok();
                if n <= 400 {
                    rec.extra.factor_defect = Some(p.factor_defect(&est.u));
                }
                fail!(preconditioned_minres_solve(a, est.theta, &est.u, p, xi_req, max_inner))
            }
        };
        annotate_solve(&mut rec, a, &est, xi_req, &sol, oracle);

        let w_norm = norm(&sol.w);
        trace.push(rec);
        if !is_finite(&sol.w) {
            fail!(Err(Error::NonFinite("outer iterate")));
        }
        if w_norm < W_BREAKDOWN {
            return Ok(RunOutput { trace, final_estimate: est, status: RunStatus::Breakdown, precond_alpha: precond.map(|p| p.alpha) });
        }
        u = sol.w;
        scale_real(1.0 / w_norm, &mut u);
        fix_phase(&mut u);
        k += 1;
    }
}

/// Unit vector at angle `asin(target_sin_phi)` from `x`, mixing in uniform
/// noise orthogonal to `x`. Real `x` gets real noise.
pub fn initial_vector(x: &[c64], target_sin_phi: f64, seed: u64) -> Result<DenseVector> {
    if !(0.0..1.0).contains(&target_sin_phi) {
        return Err(Error::InvalidArgument(format!("target sin must lie in [0, 1), got {target_sin_phi}")));
    }
    let mut x = x.to_vec();
    normalize(&mut x)?;
    if target_sin_phi == 0.0 {
        return Ok(x);
    }
    let complex = x.iter().any(|v| v.im != 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..16 {
        let mut y: DenseVector = x
            .iter()
            .map(|_| {
                let re = rng.gen_range(-1.0..1.0);
                let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
                c64::new(re, im)
            })
            .collect();
        for _ in 0..2 {
            let c = dot(&x, &y);
            axpy(-c, &x, &mut y);
        }
        if normalize(&mut y).is_err() {
            continue;
        }
        let cos = (1.0 - target_sin_phi * target_sin_phi).sqrt();
        let mut u: DenseVector = x.iter().map(|v| v * cos).collect();
        axpy(c64::new(target_sin_phi, 0.0), &y, &mut u);
        normalize(&mut u)?;
        return Ok(u);
    }
    Err(Error::InvalidArgument("could not draw a perturbation orthogonal to x".into()))
}

/// Unit vector with uniform entries, for runs without a known eigenvector.
pub fn random_start(n: usize, complex: bool, seed: u64) -> Result<DenseVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u: DenseVector = (0..n)
        .map(|_| {
            let re = rng.gen_range(-1.0..1.0);
            let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
            c64::new(re, im)
        })
        .collect();
    normalize(&mut u)?;
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{angle_to_target, TargetSpec};
    use crate::vector::from_real;

    fn est(r_norm: f64) -> EigenEstimate {
        EigenEstimate { u: Vec::new(), theta: 0.0, r: Vec::new(), r_norm, theta_imag: 0.0 }
    }

    #[test]
    fn rayleigh_quotient_examples() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[0.0, 2.0]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let e = rayleigh_quotient(&a, &from_real(&[h, h])).unwrap();
        assert!((e.theta - 1.0).abs() < 1e-15);
        assert!((e.r[0].re + h).abs() < 1e-15 && (e.r[1].re - h).abs() < 1e-15);
        assert!((e.r_norm - 1.0).abs() < 1e-15);
        let e = rayleigh_quotient(&a, &from_real(&[0.0, 1.0])).unwrap();
        assert_eq!((e.theta, e.r_norm), (2.0, 0.0));
        assert!(rayleigh_quotient(&a, &from_real(&[1.0, 1.0])).is_err());
    }

    #[test]
    fn policy_formulas() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[10.0, 1.0]);
        assert_eq!(next_tolerance(&TolerancePolicy::Exact, &est(1.0), &a), 0.0);
        assert_eq!(next_tolerance(&TolerancePolicy::Fixed { xi: 0.5 }, &est(1.0), &a), 0.5);
        let xi = next_tolerance(&TolerancePolicy::decreasing(), &est(1e-3), &a);
        assert!((xi - 1e-4).abs() < 1e-18);
        assert_eq!(next_tolerance(&TolerancePolicy::decreasing(), &est(5.0), &a), 0.1);
        let xi = next_tolerance(&TolerancePolicy::quadratic(1000.0), &est(1e-4), &a);
        assert!((xi - 0.99).abs() < 1e-12);
        assert_eq!(next_tolerance(&TolerancePolicy::quadratic(1000.0), &est(1.0), &a), 0.95);
    }

    #[test]
    fn ceiling_only_replaces_values_that_round_to_one() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[10.0, 1.0]);
        let lin = TolerancePolicy::linear(1000.0);
        let xi = next_tolerance(&lin, &est(1e-8), &a);
        assert!((xi - (1.0 - 1e-12)).abs() < 1e-15);
        assert!(xi > XI_CEILING);
        assert_eq!(next_tolerance(&lin, &est(1e-11), &a), XI_CEILING);
    }

    #[test]
    fn policy_parsing() {
        assert_eq!("exact".parse::<TolerancePolicy>().unwrap(), TolerancePolicy::Exact);
        assert_eq!("fixed:0.1".parse::<TolerancePolicy>().unwrap(), TolerancePolicy::Fixed { xi: 0.1 });
        assert_eq!("quad:1000".parse::<TolerancePolicy>().unwrap(), TolerancePolicy::quadratic(1000.0));
        assert!("fixed:1.0".parse::<TolerancePolicy>().is_err());
        assert!("fixed:x".parse::<TolerancePolicy>().is_err());
        assert!("cubic".parse::<TolerancePolicy>().is_err());
    }

    #[test]
    fn eigenvector_start_converges_without_solves() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0, 5.0, 9.0]);
        let out = run(&a, &from_real(&[0.0, 1.0, 0.0, 0.0]), &TolerancePolicy::Exact, &SolverConfig::default(), None).unwrap();
        assert_eq!(out.status, RunStatus::Converged);
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.trace.outer_steps(), 0);
    }

    #[test]
    fn exact_rqi_on_small_diagonal() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0, 5.0, 9.0]);
        let oracle = SpectralOracle::build(&a, TargetSpec::Smallest, 10).unwrap();
        let u0 = initial_vector(oracle.x(), 0.1, 1).unwrap();
        assert!((angle_to_target(&u0, &oracle).sin_phi - 0.1).abs() < 1e-12);
        let out = run(&a, &u0, &TolerancePolicy::Exact, &SolverConfig::default(), Some(&oracle)).unwrap();
        assert_eq!(out.status, RunStatus::Converged);
        assert!(out.trace.outer_steps() <= 4);
        assert!((out.final_estimate.theta - 1.0).abs() < 1e-13);
        for rec in &out.trace.records {
            assert!(rec.sin_phi.is_some());
        }
    }

    #[test]
    fn exhausted_status_and_record_order() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0, 5.0, 9.0, 11.0]);
        let u0 = initial_vector(&from_real(&[1.0, 0.0, 0.0, 0.0, 0.0]), 0.3, 2).unwrap();
        let cfg = SolverConfig { max_outer: 1, ..Default::default() };
        let out = run(&a, &u0, &TolerancePolicy::Fixed { xi: 0.9 }, &cfg, None).unwrap();
        assert_eq!(out.status, RunStatus::Exhausted);
        assert_eq!(out.trace.len(), 2);
        assert_eq!(out.trace.records[0].k, 0);
        assert_eq!(out.trace.records[1].k, 1);
        assert!(out.trace.records[1].inner_steps.is_none());
    }

    #[test]
    fn bad_configuration_is_rejected_with_empty_trace() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        let cfg = SolverConfig { stop_tol: 0.0, ..Default::default() };
        let err = run(&a, &from_real(&[0.6, 0.8]), &TolerancePolicy::Exact, &cfg, None).unwrap_err();
        assert!(err.trace.is_empty());
    }

    #[test]
    fn initial_vector_hits_target_angle() {
        let x = from_real(&[0.6, 0.0, 0.8, 0.0, 0.0, 0.0]);
        for seed in 0..5 {
            let u = initial_vector(&x, 0.1134, seed).unwrap();
            let s = angle_between(&u, &x).sin_phi;
            assert!((s - 0.1134).abs() <= 1e-6);
            assert!(u.iter().all(|v| v.im == 0.0));
        }
        assert_eq!(initial_vector(&x, 0.0, 9).unwrap(), x);
        assert_eq!(initial_vector(&x, 0.2, 3).unwrap(), initial_vector(&x, 0.2, 3).unwrap());
    }
}
