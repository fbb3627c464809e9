//! Dense complex vector primitives.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[allow(non_camel_case_types)]
pub type c64 = Complex64;

/// A dense vector of complex scalars. Real data is carried with zero
/// imaginary parts.
pub type DenseVector = Vec<c64>;

/// Tolerance on `‖u‖ - 1` for arguments that must be unit vectors.
pub const UNIT_TOL: f64 = 1e-12;

#[inline]
pub fn zeros(n: usize) -> DenseVector {
    vec![c64::new(0.0, 0.0); n]
}

pub fn from_real(x: &[f64]) -> DenseVector {
    x.iter().map(|&v| c64::new(v, 0.0)).collect()
}

/// Conjugate dot product `x* y`.
#[inline]
pub fn dot(x: &[c64], y: &[c64]) -> c64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

#[inline]
pub fn norm(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += a x`
#[inline]
pub fn axpy(a: c64, x: &[c64], y: &mut [c64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

#[inline]
pub fn scale(a: c64, x: &mut [c64]) {
    for v in x {
        *v *= a;
    }
}

#[inline]
pub fn scale_real(a: f64, x: &mut [c64]) {
    for v in x {
        *v *= a;
    }
}

pub fn sub(x: &[c64], y: &[c64]) -> DenseVector {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Normalizes `x` in place and returns its previous norm.
pub fn normalize(x: &mut [c64]) -> Result<f64> {
    let nrm = norm(x);
    if nrm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if !nrm.is_finite() {
        return Err(Error::NonFinite("normalize"));
    }
    scale_real(1.0 / nrm, x);
    Ok(nrm)
}

pub fn is_finite(x: &[c64]) -> bool {
    x.iter().all(|v| v.re.is_finite() && v.im.is_finite())
}

pub fn check_unit(x: &[c64]) -> Result<()> {
    let nrm = norm(x);
    if nrm == 0.0 {
        return Err(Error::ZeroVector);
    }
    if (nrm - 1.0).abs() > UNIT_TOL {
        return Err(Error::NotUnit(nrm));
    }
    Ok(())
}

/// Multiplies `x` by the unit scalar that makes its largest-magnitude entry
/// real and positive. The first maximal entry wins ties.
pub fn fix_phase(x: &mut [c64]) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, v) in x.iter().enumerate() {
        let a = v.norm();
        if a > best_abs {
            best_abs = a;
            best = i;
        }
    }
    if best_abs > 0.0 {
        let phase = x[best].conj() / best_abs;
        scale(phase, x);
        x[best].im = 0.0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_is_conjugate_linear_in_first_argument() {
        let x = vec![c64::new(0.0, 1.0)];
        let y = vec![c64::new(1.0, 0.0)];
        assert_eq!(dot(&x, &y), c64::new(0.0, -1.0));
    }

    #[test]
    fn phase_fix_makes_largest_entry_real_positive() {
        let mut x = vec![c64::new(0.1, 0.0), c64::new(0.0, -2.0), c64::new(1.0, 1.0)];
        fix_phase(&mut x);
        assert!((x[1].re - 2.0).abs() < 1e-15);
        assert_eq!(x[1].im, 0.0);
        assert!((norm(&x) - (0.01f64 + 4.0 + 2.0).sqrt()).abs() < 1e-14);
    }

    #[test]
    fn unit_check_rejects_zero_and_non_unit() {
        assert!(matches!(check_unit(&zeros(3)), Err(Error::ZeroVector)));
        assert!(matches!(check_unit(&from_real(&[1.0, 1.0])), Err(Error::NotUnit(_))));
        assert!(check_unit(&from_real(&[0.6, 0.8])).is_ok());
    }
}
