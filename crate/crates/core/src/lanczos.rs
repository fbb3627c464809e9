//! m-step Lanczos process on a shifted Hermitian operator.
//!
//! Every step is followed by two passes of modified Gram-Schmidt against all
//! stored basis vectors, so `V_{m+1}` stays orthonormal to working precision.
//! The recurrence is
//!
//! ```text
//! (A - θI) V_m = V_m T_m + t_{m+1,m} v_{m+1} e_m* = V_{m+1} T̂_m
//! ```

use crate::error::{Error, Result};
use crate::matio::SparseHermitianMatrix;
use crate::vector::{axpy, c64, check_unit, dot, norm, scale_real, zeros, DenseVector};

/// Relative breakdown threshold on `t_{j+1,j}`.
pub const BREAKDOWN_TOL: f64 = 1e-15;

/// A Hermitian linear operator.
pub trait HermitianOperator {
    fn dim(&self) -> usize;

    /// `y = Op x`
    fn apply(&self, x: &[c64], y: &mut [c64]);

    /// Magnitude estimate used to scale the breakdown test.
    fn scale(&self) -> f64;
}

/// `A - shift I` for a sparse Hermitian `A`.
#[derive(Clone, Copy, Debug)]
pub struct ShiftedMatrix<'a> {
    pub matrix: &'a SparseHermitianMatrix,
    pub shift: f64,
}

impl<'a> ShiftedMatrix<'a> {
    pub fn new(matrix: &'a SparseHermitianMatrix, shift: f64) -> Self {
        Self { matrix, shift }
    }
}

impl HermitianOperator for ShiftedMatrix<'_> {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[c64], y: &mut [c64]) {
        self.matrix.shifted_matvec_into(self.shift, x, y);
    }

    fn scale(&self) -> f64 {
        self.matrix.one_norm() + self.shift.abs()
    }
}

#[derive(Clone, Debug)]
pub struct LanczosDecomposition {
    /// `v_1, ..., v_{m+1}`; only `m` vectors after a breakdown.
    pub basis: Vec<DenseVector>,
    /// Diagonal of `T_m`.
    pub alpha: Vec<f64>,
    /// Subdiagonal of `T̂_m`; `beta[m-1] = t_{m+1,m}`.
    pub beta: Vec<f64>,
    pub shift: f64,
    pub breakdown: bool,
    /// Largest imaginary part discarded from a diagonal coefficient.
    pub imag_contamination: f64,
    breakdown_threshold: f64,
}

impl LanczosDecomposition {
    /// Starts a decomposition from a unit vector; no steps are taken yet.
    pub fn new<O: HermitianOperator>(op: &O, shift: f64, start: &[c64]) -> Result<Self> {
        if start.len() != op.dim() {
            return Err(Error::DimensionMismatch { expected: op.dim(), got: start.len() });
        }
        check_unit(start)?;
        Ok(Self {
            basis: vec![start.to_vec()],
            alpha: Vec::new(),
            beta: Vec::new(),
            shift,
            breakdown: false,
            imag_contamination: 0.0,
            breakdown_threshold: BREAKDOWN_TOL * op.scale(),
        })
    }

    /// Number of completed steps `m`.
    #[inline]
    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    /// Takes up to `steps` more steps, stopping early on breakdown.
    pub fn extend<O: HermitianOperator>(&mut self, op: &O, steps: usize) -> Result<()> {
        let n = op.dim();
        for _ in 0..steps {
            if self.breakdown {
                break;
            }
            let m = self.steps();
            let mut w = zeros(n);
            op.apply(&self.basis[m], &mut w);
            if m > 0 {
                axpy(c64::new(-self.beta[m - 1], 0.0), &self.basis[m - 1], &mut w);
            }
            let h = dot(&self.basis[m], &w);
            self.imag_contamination = self.imag_contamination.max(h.im.abs());
            let alpha = h.re;
            axpy(c64::new(-alpha, 0.0), &self.basis[m], &mut w);
            for _ in 0..2 {
                for q in &self.basis {
                    let c = dot(q, &w);
                    axpy(-c, q, &mut w);
                }
            }
            let beta = norm(&w);
            if !alpha.is_finite() || !beta.is_finite() {
                return Err(Error::NonFinite("lanczos"));
            }
            self.alpha.push(alpha);
            self.beta.push(beta);
            if beta <= self.breakdown_threshold {
                self.breakdown = true;
                break;
            }
            scale_real(1.0 / beta, &mut w);
            self.basis.push(w);
        }
        Ok(())
    }

    /// `‖Op V_m - V_{m+1} T̂_m‖_F`, with the missing `v_{m+1}` treated as zero
    /// after a breakdown.
    pub fn relation_residual<O: HermitianOperator>(&self, op: &O) -> f64 {
        let n = op.dim();
        let m = self.steps();
        let mut total = 0.0;
        for j in 0..m {
            let mut r = zeros(n);
            op.apply(&self.basis[j], &mut r);
            axpy(c64::new(-self.alpha[j], 0.0), &self.basis[j], &mut r);
            if j > 0 {
                axpy(c64::new(-self.beta[j - 1], 0.0), &self.basis[j - 1], &mut r);
            }
            if let Some(next) = self.basis.get(j + 1) {
                axpy(c64::new(-self.beta[j], 0.0), next, &mut r);
            }
            total += norm(&r).powi(2);
        }
        total.sqrt()
    }

    /// Largest `|v_i* v_j|` over `i != j` and largest `|‖v_j‖ - 1|`.
    pub fn orthogonality_defect(&self) -> (f64, f64) {
        let mut off: f64 = 0.0;
        let mut unit: f64 = 0.0;
        for (i, vi) in self.basis.iter().enumerate() {
            unit = unit.max((norm(vi) - 1.0).abs());
            for vj in &self.basis[..i] {
                off = off.max(dot(vj, vi).norm());
            }
        }
        (off, unit)
    }
}

/// Runs (or continues) the Lanczos process on `A - shift I`.
///
/// With `existing`, `start` is ignored and the given decomposition is
/// extended; its shift must match.
pub fn lanczos_extend(
    a: &SparseHermitianMatrix,
    shift: f64,
    start: &[c64],
    steps: usize,
    existing: Option<LanczosDecomposition>,
) -> Result<LanczosDecomposition> {
    if steps == 0 {
        return Err(Error::InvalidArgument("steps must be at least 1".into()));
    }
    let op = ShiftedMatrix::new(a, shift);
    let mut dec = match existing {
        Some(d) if d.shift != shift => {
            return Err(Error::InvalidArgument("existing decomposition has a different shift".into()))
        }
        Some(d) => d,
        None => LanczosDecomposition::new(&op, shift, start)?,
    };
    dec.extend(&op, steps)?;
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::DenseMatrix;
    use crate::vector::from_real;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, seed: u64) -> SparseHermitianMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut d = DenseMatrix::zeros(n);
        for i in 0..n {
            d[(i, i)] = c64::new(rng.gen_range(-2.0..2.0), 0.0);
            for j in 0..i {
                let v = c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                d[(i, j)] = v;
                d[(j, i)] = v.conj();
            }
        }
        SparseHermitianMatrix::from_dense(&d).unwrap()
    }

    fn random_unit(n: usize, seed: u64) -> DenseVector {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v: DenseVector = (0..n).map(|_| c64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
        crate::vector::normalize(&mut v).unwrap();
        v
    }

    #[test]
    fn eigenvector_start_breaks_down_after_one_step() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        let dec = lanczos_extend(&a, 0.0, &from_real(&[1.0, 0.0]), 3, None).unwrap();
        assert_eq!(dec.alpha, vec![1.0]);
        assert!(dec.breakdown);
        assert_eq!(dec.basis.len(), 1);
    }

    #[test]
    fn rayleigh_shift_gives_zero_first_diagonal() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[0.0, 2.0]);
        let u = from_real(&[0.8, 0.6]);
        let theta = 2.0 * 0.36;
        let dec = lanczos_extend(&a, theta, &u, 1, None).unwrap();
        assert!(dec.alpha[0].abs() < 1e-15);
    }

    #[test]
    fn relation_residual_and_orthogonality_on_random_case() {
        let a = random_hermitian(10, 11);
        let start = random_unit(10, 12);
        let shift = 0.3;
        let dec = lanczos_extend(&a, shift, &start, 6, None).unwrap();
        assert_eq!(dec.steps(), 6);
        assert_eq!(dec.basis.len(), 7);
        // dense three-term recurrence check: (A - θI) V_m - V_{m+1} T̂_m
        let dense = a.to_dense();
        let mut resid = 0.0;
        for j in 0..6 {
            let mut r = dense.matvec(&dec.basis[j]);
            for i in 0..10 {
                r[i] -= dec.basis[j][i] * shift;
                r[i] -= dec.basis[j][i] * dec.alpha[j];
                if j > 0 {
                    r[i] -= dec.basis[j - 1][i] * dec.beta[j - 1];
                }
                r[i] -= dec.basis[j + 1][i] * dec.beta[j];
            }
            resid += norm(&r).powi(2);
        }
        assert!(resid.sqrt() <= 1e-10 * (a.one_norm() + shift));
        let (off, unit) = dec.orthogonality_defect();
        assert!(off <= 1e-10, "{off}");
        assert!(unit <= 1e-12, "{unit}");
        assert!(dec.imag_contamination <= 1e-12);
    }

    #[test]
    fn extending_in_pieces_matches_one_shot() {
        let a = random_hermitian(9, 5);
        let start = random_unit(9, 6);
        let once = lanczos_extend(&a, -0.1, &start, 5, None).unwrap();
        let part = lanczos_extend(&a, -0.1, &start, 2, None).unwrap();
        let twice = lanczos_extend(&a, -0.1, &start, 3, Some(part)).unwrap();
        for (x, y) in once.alpha.iter().zip(&twice.alpha) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in once.beta.iter().zip(&twice.beta) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn krylov_space_is_shift_invariant() {
        // span{V_m} for shifts 0 and 0.7 must coincide: project one basis onto the other.
        let a = random_hermitian(8, 21);
        let start = random_unit(8, 22);
        let d0 = lanczos_extend(&a, 0.0, &start, 4, None).unwrap();
        let d1 = lanczos_extend(&a, 0.7, &start, 4, None).unwrap();
        for v in &d1.basis[..4] {
            let mut r = v.clone();
            for q in &d0.basis[..4] {
                let c = dot(q, &r);
                axpy(-c, q, &mut r);
            }
            assert!(norm(&r) < 1e-10);
        }
    }

    #[test]
    fn full_dimension_run_breaks_down() {
        let a = random_hermitian(6, 2);
        let dec = lanczos_extend(&a, 0.0, &random_unit(6, 3), 10, None).unwrap();
        assert!(dec.breakdown);
        assert_eq!(dec.steps(), 6);
    }

    #[test]
    fn rejects_bad_start_vectors() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0]);
        assert!(matches!(lanczos_extend(&a, 0.0, &from_real(&[0.0, 0.0]), 1, None), Err(Error::ZeroVector)));
        assert!(matches!(lanczos_extend(&a, 0.0, &from_real(&[1.0, 1.0]), 1, None), Err(Error::NotUnit(_))));
    }
}
