//! Checks of the convergence bounds against a recorded [`OuterTrace`].
//!
//! Every verifier is a pure function of a trace and an oracle. Asymptotic
//! statements are evaluated as fitted constants over a window of converging
//! steps; exact inequalities are evaluated at every step that satisfies
//! their hypotheses.

use serde::{Deserialize, Serialize};

use super::oracle::SpectralOracle;
use crate::error::{Error, Result};
use crate::rqi::{OuterRecord, OuterTrace, TolerancePolicy};

/// Relative slack on bounds that hold only to leading order.
pub const BOUND_SLACK: f64 = 0.1;

/// Absolute slack on inequalities that hold exactly.
pub const EXACT_SLACK: f64 = 1e-10;

/// Steps with `sin φ_k` at or below this form the asymptotic window.
pub const ASYMPTOTIC_SIN: f64 = 1e-2;

/// Multiple of `ε ‖A‖₁` below which a residual is rounding noise.
pub const FLOOR_FACTOR: f64 = 100.0;

/// Order thresholds: cubic at or above the first, quadratic at or above the
/// second, linear at or above the third.
pub const ORDER_THRESHOLDS: [f64; 3] = [2.5, 1.6, 0.6];

/// Ratio `max ‖r_k‖ / min ‖r_k‖` a window must span for an order fit.
pub const MIN_FIT_SPAN: f64 = 10.0;

/// Spread `max/min` of the per-step `η_k` accepted as one constant.
pub const ETA_STABILITY: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClass {
    Cubic,
    Quadratic,
    Linear,
    None,
}

impl RateClass {
    pub fn from_order(p: f64) -> Self {
        match p {
            p if p >= ORDER_THRESHOLDS[0] => Self::Cubic,
            p if p >= ORDER_THRESHOLDS[1] => Self::Quadratic,
            p if p >= ORDER_THRESHOLDS[2] => Self::Linear,
            _ => Self::None,
        }
    }
}

/// Least-squares slope of `ys` against `xs`.
pub fn regression_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Rounding floors `(r, sin φ)` for an oracle-backed trace.
pub fn floors(oracle: &SpectralOracle) -> (f64, f64) {
    let r = FLOOR_FACTOR * f64::EPSILON * oracle.one_norm;
    (r, r / oracle.gap)
}

fn sin_cos(rec: &OuterRecord) -> Result<(f64, f64)> {
    match (rec.sin_phi, rec.extra.cos_phi) {
        (Some(s), Some(c)) => Ok((s, c)),
        _ => Err(Error::InsufficientData(format!("record {} has no oracle angles", rec.k))),
    }
}

/// Consecutive record pairs `(k, k+1)` where record `k` carries a solve.
fn solve_pairs(trace: &OuterTrace) -> impl Iterator<Item = (&OuterRecord, &OuterRecord)> {
    trace.records.windows(2).filter(|w| w[0].inner_steps.is_some()).map(|w| (&w[0], &w[1]))
}

/// Why a step pair is left out of a rate window.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exclusion {
    PreAsymptotic,
    Stagnated,
    InnerAtFloor,
    ResidualFloor,
    AngleFloor,
}

fn exclusion(cur: &OuterRecord, next: &OuterRecord, oracle: &SpectralOracle) -> Result<Option<Exclusion>> {
    let (r_floor, s_floor) = floors(oracle);
    let (sin, _) = sin_cos(cur)?;
    let (sin_next, _) = sin_cos(next)?;
    Ok(if cur.stagnated == Some(true) {
        Some(Exclusion::Stagnated)
    } else if cur.inner_at_floor() {
        Some(Exclusion::InnerAtFloor)
    } else if cur.r_norm <= r_floor || next.r_norm <= r_floor {
        Some(Exclusion::ResidualFloor)
    } else if sin <= s_floor || sin_next <= s_floor {
        Some(Exclusion::AngleFloor)
    } else if sin > ASYMPTOTIC_SIN {
        Some(Exclusion::PreAsymptotic)
    } else {
        None
    })
}

// ---------------------------------------------------------------------------
// One-step angle bound

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleBoundStep {
    pub k: usize,
    pub tan_next: f64,
    /// `2β (sin φ + ξ sin ψ) / |cos φ + ξ cos ψ| · sin²φ`; infinite when the
    /// denominator vanishes.
    pub bound: f64,
    /// `|λ - θ_k| < gap/2`, the hypothesis of the bound.
    pub separated: bool,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleBoundReport {
    pub steps: Vec<AngleBoundStep>,
    /// Steps skipped because the inner residual is at rounding level.
    pub skipped: Vec<usize>,
    /// Separated steps with `tan φ_{k+1} > (1 + slack) · bound`.
    pub violations: usize,
    pub slack: f64,
}

/// `tan φ_{k+1} <= 2β (sin φ_k + ξ_k sin ψ_k) / |cos φ_k + ξ_k cos ψ_k| · sin²φ_k`
/// at every step, with [`BOUND_SLACK`].
pub fn verify_theorem2(trace: &OuterTrace, oracle: &SpectralOracle) -> Result<AngleBoundReport> {
    let mut steps = Vec::new();
    let mut skipped = Vec::new();
    for (cur, next) in solve_pairs(trace) {
        let (sin, cos) = sin_cos(cur)?;
        let (sin_next, cos_next) = sin_cos(next)?;
        let xi = cur.xi_achieved.unwrap_or(0.0);
        if cur.inner_at_floor() {
            skipped.push(cur.k);
            continue;
        }
        let (num, den) = if xi == 0.0 {
            (sin, cos)
        } else {
            match (cur.cos_psi, cur.extra.sin_psi) {
                (Some(cp), Some(sp)) => (sin + xi * sp, (cos + xi * cp).abs()),
                _ => return Err(Error::InsufficientData(format!("record {} has no residual direction", cur.k))),
            }
        };
        steps.push(angle_bound_step(cur.k, sin_next, cos_next, sin, num, den, oracle, cur.theta));
    }
    let violations = steps.iter().filter(|s| s.separated && !s.holds).count();
    Ok(AngleBoundReport { steps, skipped, violations, slack: BOUND_SLACK })
}

#[allow(clippy::too_many_arguments)]
fn angle_bound_step(
    k: usize,
    sin_next: f64,
    cos_next: f64,
    sin: f64,
    num: f64,
    den: f64,
    oracle: &SpectralOracle,
    theta: f64,
) -> AngleBoundStep {
    let tan_next = if cos_next == 0.0 { f64::INFINITY } else { sin_next / cos_next };
    let bound = if den == 0.0 { f64::INFINITY } else { 2.0 * oracle.beta * num / den * sin * sin };
    let separated = (oracle.lambda - theta).abs() < 0.5 * oracle.gap;
    let holds = tan_next <= (1.0 + BOUND_SLACK) * bound;
    AngleBoundStep { k, tan_next, bound, separated, holds }
}

/// Evaluates the one-step bound for given angle data; used for hand-built
/// steps.
pub fn angle_bound(beta: f64, sin: f64, cos: f64, xi: f64, sin_psi: f64, cos_psi: f64, tan_next: f64) -> (f64, bool) {
    let den = (cos + xi * cos_psi).abs();
    let bound = if den == 0.0 { f64::INFINITY } else { 2.0 * beta * (sin + xi * sin_psi) / den * sin * sin };
    (bound, tan_next <= (1.0 + BOUND_SLACK) * bound)
}

// ---------------------------------------------------------------------------
// Convergence rates

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateStep {
    pub k: usize,
    pub r: f64,
    pub r_next: f64,
    pub sin: f64,
    pub sin_next: f64,
    /// `‖r_{k+1}‖ / ‖r_k‖^p` for `p = 1, 2, 3`.
    pub r_ratio: [f64; 3],
    /// `sin φ_{k+1} / sin^p φ_k` for `p = 1, 2, 3`.
    pub sin_ratio: [f64; 3],
    pub xi: Option<f64>,
    pub excluded: Option<Exclusion>,
}

/// Per-step evidence for the inexact cubic factor
/// `sin φ_{k+1}/sin³φ_k <= 2β/(1-ξ) + 4ξβ²/((1-ξ)|cos φ̄|)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubicFactorStep {
    pub k: usize,
    pub xi: f64,
    pub observed: f64,
    /// Largest `|cos φ̄|` for which the factor bound still covers the
    /// observed ratio, capped at 1.
    pub backsolved_cos: f64,
    /// `|cos φ̄_k|` measured from the oracle eigenvector.
    pub direct_cos: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CubicEvidence {
    pub steps: Vec<CubicFactorStep>,
    pub min_backsolved_cos: f64,
    pub min_direct_cos: Option<f64>,
    /// Factor bound at `min_backsolved_cos`, per step.
    pub bound_backsolved: Vec<f64>,
    /// Factor bound at `min_direct_cos`, per step.
    pub bound_direct: Vec<f64>,
    /// Every observed factor lies under the bound at the measured `|cos φ̄|`.
    pub holds_with_direct: bool,
    /// Slope of `log |cos φ̄_k|` against `log sin φ_k`; near 1 means the
    /// measured cosine decays with the angle.
    pub direct_cos_decay: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaFit {
    /// `η_k = ‖r_{k+1}‖ |λ₂ - λ| / (4β ‖r_k‖²)`.
    pub eta: Vec<f64>,
    pub eta_fit: f64,
    pub eta_min: f64,
    /// `max η_k / min η_k <= ETA_STABILITY`.
    pub stable: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ZetaFit {
    pub ratios: Vec<f64>,
    /// Largest `‖r_{k+1}‖ / ‖r_k‖` in the window.
    pub zeta: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateReport {
    pub steps: Vec<RateStep>,
    pub window_pairs: usize,
    /// Slope of `log ‖r_{k+1}‖` against `log ‖r_k‖` over the window.
    pub fitted_order: Option<f64>,
    /// The same fit on `sin φ`.
    pub fitted_order_sin: Option<f64>,
    pub classification: RateClass,
    /// Exact-solve asymptotic factor `2β`.
    pub exact_factor: f64,
    pub max_cubic_sin_ratio: Option<f64>,
    pub cubic: Option<CubicEvidence>,
    pub quadratic: EtaFit,
    pub linear: ZetaFit,
    pub window: String,
}

/// Per-step rate ratios with the window exclusion of each pair.
pub fn rate_steps(trace: &OuterTrace, oracle: &SpectralOracle) -> Result<Vec<RateStep>> {
    let mut steps = Vec::new();
    for (cur, next) in solve_pairs(trace) {
        let (sin, _) = sin_cos(cur)?;
        let (sin_next, _) = sin_cos(next)?;
        let (r, rn) = (cur.r_norm, next.r_norm);
        steps.push(RateStep {
            k: cur.k,
            r,
            r_next: rn,
            sin,
            sin_next,
            r_ratio: [rn / r, rn / r.powi(2), rn / r.powi(3)],
            sin_ratio: [sin_next / sin, sin_next / sin.powi(2), sin_next / sin.powi(3)],
            xi: cur.resolved_xi(),
            excluded: exclusion(cur, next, oracle)?,
        });
    }
    Ok(steps)
}

/// Slopes of `log ‖r_{k+1}‖` on `log ‖r_k‖` and of `log sin φ_{k+1}` on
/// `log sin φ_k` over window steps, possibly pooled from several runs on
/// one matrix.
pub fn fit_order(window: &[&RateStep]) -> Result<(f64, Option<f64>)> {
    if window.len() < 2 {
        return Err(Error::InsufficientData(format!("{} converging step pairs, need 2", window.len())));
    }
    let lx: Vec<f64> = window.iter().map(|s| s.r.ln()).collect();
    let span = lx.iter().copied().fold(f64::NEG_INFINITY, f64::max) - lx.iter().copied().fold(f64::INFINITY, f64::min);
    if span < MIN_FIT_SPAN.ln() {
        return Err(Error::InsufficientData(format!("window residuals span a factor {:.2}, need {MIN_FIT_SPAN}", span.exp())));
    }
    let ly: Vec<f64> = window.iter().map(|s| s.r_next.ln()).collect();
    let sx: Vec<f64> = window.iter().map(|s| s.sin.ln()).collect();
    let sy: Vec<f64> = window.iter().map(|s| s.sin_next.ln()).collect();
    let order = regression_slope(&lx, &ly).ok_or_else(|| Error::InsufficientData("window residuals are all equal".into()))?;
    Ok((order, regression_slope(&sx, &sy)))
}

/// Rate tables, fitted order and the bound constants for a run.
pub fn verify_theorem6(trace: &OuterTrace, oracle: &SpectralOracle, policy: &TolerancePolicy) -> Result<RateReport> {
    let beta = oracle.beta;
    let steps = rate_steps(trace, oracle)?;
    let window: Vec<&RateStep> = steps.iter().filter(|s| s.excluded.is_none()).collect();
    let (order, fitted_order_sin) = fit_order(&window)?;
    let fitted_order = Some(order);
    let classification = fitted_order.map_or(RateClass::None, RateClass::from_order);

    let max_cubic_sin_ratio = window.iter().map(|s| s.sin_ratio[2]).reduce(f64::max);

    let cubic = if matches!(policy, TolerancePolicy::Exact) {
        None
    } else {
        cubic_evidence(trace, &window, beta)
    };

    let eta: Vec<f64> = window.iter().map(|s| s.r_next * oracle.gap / (4.0 * beta * s.r * s.r)).collect();
    let eta_fit = eta.iter().copied().fold(0.0, f64::max);
    let eta_min = eta.iter().copied().fold(f64::INFINITY, f64::min);
    let quadratic = EtaFit { stable: eta_fit <= ETA_STABILITY * eta_min, eta, eta_fit, eta_min };

    let ratios: Vec<f64> = window.iter().map(|s| s.r_ratio[0]).collect();
    let zeta = ratios.iter().copied().fold(0.0, f64::max);

    Ok(RateReport {
        window_pairs: window.len(),
        steps,
        fitted_order,
        fitted_order_sin,
        classification,
        exact_factor: 2.0 * beta,
        max_cubic_sin_ratio,
        cubic,
        quadratic,
        linear: ZetaFit { ratios, zeta },
        window: format!(
            "sin φ_k <= {ASYMPTOTIC_SIN:e}; r and sin φ above {FLOOR_FACTOR}·ε·‖A‖₁ (sin φ scaled by 1/gap); stagnated and rounding-limited inner solves excluded"
        ),
    })
}

fn cubic_factor(beta: f64, xi: f64, cos: f64) -> f64 {
    2.0 * beta / (1.0 - xi) + 4.0 * xi * beta * beta / ((1.0 - xi) * cos)
}

fn cubic_evidence(trace: &OuterTrace, window: &[&RateStep], beta: f64) -> Option<CubicEvidence> {
    let mut steps = Vec::new();
    for s in window {
        let Some(xi) = s.xi.filter(|&x| x > 0.0 && x < 1.0) else { continue };
        let rec = trace.records.iter().find(|r| r.k == s.k)?;
        let observed = s.sin_ratio[2];
        let excess = observed - 2.0 * beta / (1.0 - xi);
        let backsolved_cos = if excess <= 0.0 { 1.0 } else { (4.0 * xi * beta * beta / ((1.0 - xi) * excess)).min(1.0) };
        steps.push(CubicFactorStep { k: s.k, xi, observed, backsolved_cos, direct_cos: rec.extra.cos_varphi });
    }
    if steps.is_empty() {
        return None;
    }
    let min_backsolved_cos = steps.iter().map(|s| s.backsolved_cos).fold(f64::INFINITY, f64::min);
    let direct: Vec<f64> = steps.iter().filter_map(|s| s.direct_cos).collect();
    let min_direct_cos = (direct.len() == steps.len()).then(|| direct.iter().copied().fold(f64::INFINITY, f64::min));
    let bound_backsolved = steps.iter().map(|s| cubic_factor(beta, s.xi, min_backsolved_cos)).collect();
    let bound_direct: Vec<f64> = match min_direct_cos {
        Some(c) if c > 0.0 => steps.iter().map(|s| cubic_factor(beta, s.xi, c)).collect(),
        _ => Vec::new(),
    };
    let holds_with_direct = !bound_direct.is_empty() && steps.iter().zip(&bound_direct).all(|(s, b)| s.observed <= (1.0 + BOUND_SLACK) * b);
    let (lx, ly): (Vec<f64>, Vec<f64>) = window
        .iter()
        .zip(&steps)
        .filter_map(|(w, s)| s.direct_cos.filter(|&c| c > 0.0).map(|c| (w.sin.ln(), c.ln())))
        .unzip();
    Some(CubicEvidence {
        steps,
        min_backsolved_cos,
        min_direct_cos,
        bound_backsolved,
        bound_direct,
        holds_with_direct,
        direct_cos_decay: regression_slope(&lx, &ly),
    })
}

// ---------------------------------------------------------------------------
// Growth of ‖w_{k+1}‖

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WLowerBoundStep {
    pub k: usize,
    pub w_norm: f64,
    /// `(1 - ξ_k) |λ₂ - λ| / (4β ‖r_k‖²)`
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WGrowthReport {
    /// `(k, ‖r_k‖, ‖w_{k+1}‖)` used in the fit.
    pub points: Vec<(usize, f64, f64)>,
    /// Slope of `log ‖w_{k+1}‖` against `-log ‖r_k‖`.
    pub slope: f64,
    pub lower_bound: Vec<WLowerBoundStep>,
    pub lower_bound_holds: bool,
}

/// Growth order of `‖w_{k+1}‖` in `1/‖r_k‖` and the asymptotic lower bound,
/// with [`BOUND_SLACK`].
pub fn w_norm_growth(trace: &OuterTrace, oracle: &SpectralOracle) -> Result<WGrowthReport> {
    let mut points = Vec::new();
    let mut lower_bound = Vec::new();
    for (cur, next) in solve_pairs(trace) {
        if exclusion(cur, next, oracle)?.is_some() {
            continue;
        }
        let (Some(w), Some(xi)) = (cur.w_norm, cur.resolved_xi()) else { continue };
        points.push((cur.k, cur.r_norm, w));
        let bound = (1.0 - xi) * oracle.gap / (4.0 * oracle.beta * cur.r_norm.powi(2));
        lower_bound.push(WLowerBoundStep { k: cur.k, w_norm: w, bound, holds: w >= (1.0 - BOUND_SLACK) * bound });
    }
    let xs: Vec<f64> = points.iter().map(|p| -p.1.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.2.ln()).collect();
    let slope = regression_slope(&xs, &ys).ok_or_else(|| Error::InsufficientData(format!("{} growth points, need 2", points.len())))?;
    let lower_bound_holds = lower_bound.iter().all(|s| s.holds);
    Ok(WGrowthReport { points, slope, lower_bound, lower_bound_holds })
}

// ---------------------------------------------------------------------------
// Exact inequalities

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichStep {
    pub k: usize,
    pub lower: f64,
    pub value: f64,
    pub upper: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub steps: Vec<SandwichStep>,
    pub violations: usize,
}

/// `‖r_k‖/(λ_max - λ_min) <= sin φ_k <= 2‖r_k‖/|λ₂ - λ|` at every record.
pub fn parlett_sandwich(trace: &OuterTrace, oracle: &SpectralOracle) -> Result<SandwichReport> {
    let mut steps = Vec::new();
    for rec in &trace.records {
        let (sin, _) = sin_cos(rec)?;
        let lower = rec.r_norm / oracle.spread;
        let upper = 2.0 * rec.r_norm / oracle.gap;
        let holds = sin >= lower - EXACT_SLACK && sin <= upper + EXACT_SLACK;
        steps.push(SandwichStep { k: rec.k, lower, value: sin, upper, holds });
    }
    let violations = steps.iter().filter(|s| !s.holds).count();
    Ok(SandwichReport { steps, violations })
}

/// `|λ₂ - λ| sin²φ_k <= |λ - θ_k| <= (λ_max - λ_min) sin²φ_k`. The lower
/// bound needs the target at an end of the spectrum and is checked only
/// there.
pub fn rayleigh_error_sandwich(trace: &OuterTrace, oracle: &SpectralOracle) -> Result<SandwichReport> {
    let exterior = oracle.target_index == 0 || oracle.target_index + 1 == oracle.eigenvalues.len();
    let mut steps = Vec::new();
    for rec in &trace.records {
        let (sin, _) = sin_cos(rec)?;
        let s2 = sin * sin;
        let value = (oracle.lambda - rec.theta).abs();
        let lower = if exterior { oracle.gap * s2 } else { 0.0 };
        let upper = oracle.spread * s2;
        let holds = value >= lower - EXACT_SLACK && value <= upper + EXACT_SLACK;
        steps.push(SandwichStep { k: rec.k, lower, value, upper, holds });
    }
    let violations = steps.iter().filter(|s| !s.holds).count();
    Ok(SandwichReport { steps, violations })
}

/// `‖r_{k+1}‖ <= √(1 - ξ_k²)/‖w_{k+1}‖ + slack` at every step whose `ξ_k`
/// is resolved, with `ξ_k` lowered by its rounding level. Needs no oracle.
pub fn residual_step_bound(trace: &OuterTrace) -> SandwichReport {
    let mut steps = Vec::new();
    for w in trace.records.windows(2) {
        let (cur, next) = (&w[0], &w[1]);
        let (Some(xi), Some(wn)) = (cur.resolved_xi(), cur.w_norm) else { continue };
        // near one, √(1 - ξ²) inherits the relative error of 1 - ξ
        let xi_low = (xi - cur.extra.residual_floor.unwrap_or(0.0)).max(0.0);
        let upper = (1.0 - xi_low * xi_low).sqrt() / wn;
        let holds = next.r_norm <= upper + EXACT_SLACK;
        steps.push(SandwichStep { k: cur.k, lower: 0.0, value: next.r_norm, upper, holds });
    }
    let violations = steps.iter().filter(|s| !s.holds).count();
    SandwichReport { steps, violations }
}

// ---------------------------------------------------------------------------
// Residual direction

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SinPsiStep {
    pub k: usize,
    pub sin_psi: f64,
    pub sin_phi: f64,
    pub cos_varphi: f64,
    /// `2β / |cos φ̄_k| · sin φ_k`
    pub bound: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DirectionReport {
    /// Inexact steps with `ξ_k > sin φ_k` and a resolved residual.
    pub considered: usize,
    /// Of those, steps with `cos ψ_k < 0` (`cos φ_k >= 0` by the phase
    /// convention).
    pub opposite_sign: usize,
    pub fraction_opposite: f64,
    /// `max (1 + cos ψ_k) / sin²φ_k` over the considered steps.
    pub fitted_c: Option<f64>,
    /// Slope of `log(1 + cos ψ_k)` against `log sin φ_k`; 2 for a second
    /// order approach to -1.
    pub approach_order: Option<f64>,
    /// Slope of `log(1 + cos ψ_k)` against `log(1 - ξ_k)`.
    pub xi_order: Option<f64>,
    /// `sin ψ_k <= 2β/|cos φ̄_k| · sin φ_k` per step, `cos φ̄_k` measured.
    pub sin_psi_bound: Vec<SinPsiStep>,
    pub min_cos_varphi: Option<f64>,
    /// `max (1 - ξ_k - |cos φ_k + ξ_k cos ψ_k|)⁺ / sin²φ_k`.
    pub positiveness_c: Option<f64>,
}

/// Sign and size of `cos ψ_k` and the `sin ψ_k` bound over one or more runs.
pub fn residual_direction_report<'a, I>(runs: I) -> Result<DirectionReport>
where
    I: IntoIterator<Item = (&'a OuterTrace, &'a SpectralOracle)>,
{
    let mut considered = 0;
    let mut opposite_sign = 0;
    let mut c_vals = Vec::new();
    let (mut lx, mut ly, mut lxi) = (Vec::new(), Vec::new(), Vec::new());
    let mut sin_psi_bound = Vec::new();
    let mut positiveness: Option<f64> = None;
    for (trace, oracle) in runs {
        for rec in trace.records.iter().filter(|r| r.inner_steps.is_some()) {
            let (sin, cos) = sin_cos(rec)?;
            let Some(xi) = rec.resolved_xi() else { continue };
            if xi == 0.0 {
                continue;
            }
            let (Some(cp), Some(sp)) = (rec.cos_psi, rec.extra.sin_psi) else { continue };
            if sin > 0.0 {
                let gap = 1.0 - xi - (cos + xi * cp).abs();
                positiveness = Some(positiveness.unwrap_or(0.0).max(gap.max(0.0) / (sin * sin)));
            }
            if let Some(cv) = rec.extra.cos_varphi.filter(|&c| c > 0.0) {
                let bound = 2.0 * oracle.beta / cv * sin;
                sin_psi_bound.push(SinPsiStep { k: rec.k, sin_psi: sp, sin_phi: sin, cos_varphi: cv, bound, holds: sp <= bound * (1.0 + BOUND_SLACK) });
            }
            if xi <= sin {
                continue;
            }
            considered += 1;
            if cp < 0.0 {
                opposite_sign += 1;
            }
            let gap = 1.0 + cp;
            if sin > 0.0 {
                c_vals.push(gap / (sin * sin));
                if gap > 0.0 {
                    lx.push(sin.ln());
                    ly.push(gap.ln());
                    lxi.push((1.0 - xi).ln());
                }
            }
        }
    }
    let fraction_opposite = if considered == 0 { 0.0 } else { opposite_sign as f64 / considered as f64 };
    let min_cos_varphi = sin_psi_bound.iter().map(|s| s.cos_varphi).reduce(f64::min);
    Ok(DirectionReport {
        considered,
        opposite_sign,
        fraction_opposite,
        fitted_c: c_vals.iter().copied().reduce(f64::max),
        approach_order: regression_slope(&lx, &ly),
        xi_order: regression_slope(&lxi, &ly),
        sin_psi_bound,
        min_cos_varphi,
        positiveness_c: positiveness,
    })
}

// ---------------------------------------------------------------------------
// Comparison bound with the residual polynomial

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonStep {
    pub k: usize,
    pub r_next: f64,
    /// `(sin φ_k / cos³φ_k) · √(1 - ξ_k²) / |1 - ε_m| · ‖r_k‖`
    pub bound: f64,
    pub eps_m: f64,
}

/// The residual-polynomial comparison bound, for steps with `ξ_k > 1e-10`.
/// Reported, not asserted.
pub fn comparison_bound(trace: &OuterTrace) -> Result<Vec<ComparisonStep>> {
    let mut out = Vec::new();
    for (cur, next) in solve_pairs(trace) {
        let (sin, cos) = sin_cos(cur)?;
        let (Some(xi), Some(eps_m)) = (cur.resolved_xi(), cur.extra.eps_m) else { continue };
        if xi <= 1e-10 {
            continue;
        }
        let bound = sin / cos.powi(3) * (1.0 - xi * xi).sqrt() / (1.0 - eps_m).abs() * cur.r_norm;
        out.push(ComparisonStep { k: cur.k, r_next: next.r_norm, bound, eps_m });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Aggregate

/// All verifier outputs for one run. A verifier that cannot run records its
/// reason instead.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub oracle: super::oracle::OracleSummary,
    pub angle_bound: Outcome<AngleBoundReport>,
    pub rates: Outcome<RateReport>,
    pub w_growth: Outcome<WGrowthReport>,
    pub parlett: Outcome<SandwichReport>,
    pub rayleigh_error: Outcome<SandwichReport>,
    pub residual_step: SandwichReport,
    pub direction: Outcome<DirectionReport>,
    pub comparison: Outcome<Vec<ComparisonStep>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome<T> {
    Ok(T),
    Unavailable(String),
}

impl<T> Outcome<T> {
    pub fn ok(&self) -> Option<&T> {
        match self {
            Self::Ok(v) => Some(v),
            Self::Unavailable(_) => None,
        }
    }
}

impl<T> From<Result<T>> for Outcome<T> {
    fn from(r: Result<T>) -> Self {
        match r {
            Ok(v) => Self::Ok(v),
            Err(e) => Self::Unavailable(e.to_string()),
        }
    }
}

pub fn verify_all(trace: &OuterTrace, oracle: &SpectralOracle, policy: &TolerancePolicy) -> VerificationReport {
    VerificationReport {
        oracle: oracle.summary(),
        angle_bound: verify_theorem2(trace, oracle).into(),
        rates: verify_theorem6(trace, oracle, policy).into(),
        w_growth: w_norm_growth(trace, oracle).into(),
        parlett: parlett_sandwich(trace, oracle).into(),
        rayleigh_error: rayleigh_error_sandwich(trace, oracle).into(),
        residual_step: residual_step_bound(trace),
        direction: residual_direction_report([(trace, oracle)]).into(),
        comparison: comparison_bound(trace).into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::TargetSpec;
    use crate::generators::beta_problem;
    use crate::rqi::{initial_vector, run, SolverConfig};

    #[test]
    fn regression_recovers_exact_slopes() {
        let xs = [1.0, 2.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
        assert!((regression_slope(&xs, &ys).unwrap() - 3.0).abs() < 1e-14);
        assert!(regression_slope(&[1.0], &[2.0]).is_none());
        assert!(regression_slope(&[1.0, 1.0], &[2.0, 3.0]).is_none());
    }

    #[test]
    fn order_classes() {
        assert_eq!(RateClass::from_order(3.1), RateClass::Cubic);
        assert_eq!(RateClass::from_order(2.0), RateClass::Quadratic);
        assert_eq!(RateClass::from_order(1.0), RateClass::Linear);
        assert_eq!(RateClass::from_order(0.2), RateClass::None);
    }

    #[test]
    fn opposing_direction_makes_bound_vacuous() {
        // ξ = 0.999 with d pointing against x: |cos φ + ξ cos ψ| ≈ 1 - ξ.
        let sin: f64 = 1e-3;
        let cos = (1.0 - sin * sin).sqrt();
        let (bound, holds) = angle_bound(10.0, sin, cos, 0.999, 1e-2, -(1.0f64 - 1e-4).sqrt(), 1e-4);
        let (exact, _) = angle_bound(10.0, sin, cos, 0.0, 0.0, 0.0, 0.0);
        assert!(bound > 1e3 * exact);
        assert!(holds);
    }

    #[test]
    fn exact_rqi_bound_reduces_to_cubic_form() {
        let (bound, _) = angle_bound(5.0, 0.01, (1.0f64 - 1e-4).sqrt(), 0.0, 0.0, 0.0, 0.0);
        let expect = 2.0 * 5.0 * 0.01f64.powi(3) / (1.0f64 - 1e-4).sqrt();
        assert!((bound - expect).abs() < 1e-18);
    }

    fn traced(policy: TolerancePolicy, beta: f64) -> (OuterTrace, SpectralOracle) {
        let p = beta_problem(60, beta, 2).unwrap();
        let o = p.oracle(TargetSpec::Smallest).unwrap();
        let u0 = initial_vector(o.x(), 0.1, 4).unwrap();
        let out = run(&p.matrix, &u0, &policy, &SolverConfig::default(), Some(&o)).unwrap();
        (out.trace, o)
    }

    #[test]
    fn exact_run_passes_exact_inequalities() {
        let (trace, o) = traced(TolerancePolicy::Exact, 10.0);
        assert_eq!(parlett_sandwich(&trace, &o).unwrap().violations, 0);
        assert_eq!(rayleigh_error_sandwich(&trace, &o).unwrap().violations, 0);
        assert_eq!(residual_step_bound(&trace).violations, 0);
        let t2 = verify_theorem2(&trace, &o).unwrap();
        assert_eq!(t2.violations, 0);
    }

    #[test]
    fn fixed_run_reports_direction_and_rates() {
        let (trace, o) = traced(TolerancePolicy::Fixed { xi: 0.5 }, 10.0);
        let d = residual_direction_report([(&trace, &o)]).unwrap();
        assert!(d.considered > 0);
        assert!(d.sin_psi_bound.iter().all(|s| s.holds));
        let report = verify_all(&trace, &o, &TolerancePolicy::Fixed { xi: 0.5 });
        assert!(report.parlett.ok().unwrap().violations == 0);
        assert_eq!(report.residual_step.violations, 0);
    }

    #[test]
    fn missing_oracle_angles_are_reported() {
        let (mut trace, o) = traced(TolerancePolicy::Exact, 4.0);
        trace.records[0].sin_phi = None;
        assert!(matches!(parlett_sandwich(&trace, &o), Err(Error::InsufficientData(_))));
    }
}
