//! Synthetic test matrices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dense::DenseMatrix;
use crate::diagnostics::{SpectralOracle, TargetSpec};
use crate::error::{Error, Result};
use crate::matio::SparseHermitianMatrix;
use crate::vector::{c64, normalize, DenseVector};

/// Order of the power-network matrix the fallback stands in for.
pub const BCSPWR08_ORDER: usize = 1624;
/// Spread over gap of the fallback spectrum.
pub const BCSPWR08_BETA: f64 = 40.19;

/// Ascending spectrum of order `n` with `λ₁ = lambda_min`, `λ₂ = λ₁ + gap`
/// and `λ_n = λ₁ + β·gap`. The remaining values are evenly spaced in
/// `(λ₂, λ_n)`.
pub fn prescribed_beta_spectrum(n: usize, beta: f64, lambda_min: f64, gap: f64) -> Result<Vec<f64>> {
    graded_spectrum(n, beta, lambda_min, gap, 1.0)
}

/// As [`prescribed_beta_spectrum`] with the interior values placed at
/// `λ₂ + (λ_n - λ₂)·t^grading` for evenly spaced `t`. `grading > 1`
/// crowds the interior toward `λ₂`.
pub fn graded_spectrum(n: usize, beta: f64, lambda_min: f64, gap: f64, grading: f64) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("spectrum needs n >= 3, got {n}")));
    }
    if !(beta >= 1.0 && gap > 0.0 && grading > 0.0) || !lambda_min.is_finite() {
        return Err(Error::InvalidArgument(format!("need beta >= 1, gap > 0, grading > 0 (beta {beta}, gap {gap})")));
    }
    let l2 = lambda_min + gap;
    let lmax = lambda_min + beta * gap;
    let mut out = Vec::with_capacity(n);
    out.push(lambda_min);
    out.push(l2);
    let inner = n - 3;
    for i in 1..=inner {
        let t = i as f64 / (inner + 1) as f64;
        out.push(l2 + (lmax - l2) * t.powf(grading));
    }
    out.push(lmax);
    Ok(out)
}

/// Diagonal matrix with the given eigenvalues.
pub fn diagonal(eigenvalues: &[f64]) -> SparseHermitianMatrix {
    SparseHermitianMatrix::from_real_diagonal(eigenvalues)
}

/// Diagonal test matrix of order `n` with spread over gap `beta`, smallest
/// eigenvalue 1 and gap 1.
pub fn beta_diagonal(n: usize, beta: f64) -> Result<SparseHermitianMatrix> {
    Ok(diagonal(&prescribed_beta_spectrum(n, beta, 1.0, 1.0)?))
}

/// Matrix with a known eigendecomposition.
#[derive(Clone, Debug)]
pub struct SyntheticProblem {
    pub matrix: SparseHermitianMatrix,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DenseVector>,
}

impl SyntheticProblem {
    /// Oracle assembled from the known eigenpairs, without a dense solve.
    pub fn oracle(&self, target: TargetSpec) -> Result<SpectralOracle> {
        SpectralOracle::from_parts(self.eigenvalues.clone(), self.eigenvectors.clone(), target, self.matrix.one_norm())
    }
}

/// Sparse matrix with spectrum [`prescribed_beta_spectrum`] (`λ₁ = 1`,
/// gap 1) mixed by three sweeps of plane rotations.
pub fn beta_problem(n: usize, beta: f64, seed: u64) -> Result<SyntheticProblem> {
    let eigenvalues = prescribed_beta_spectrum(n, beta, 1.0, 1.0)?;
    let (matrix, eigenvectors) = givens_mixed(&eigenvalues, 3, seed)?;
    Ok(SyntheticProblem { matrix, eigenvalues, eigenvectors })
}

/// Stand-in for the order-1624 power-network matrix: spread over gap
/// 40.19 around an isolated smallest eigenvalue, `‖A‖₁ ≈ 16`, about 22
/// nonzeros per row.
pub fn bcspwr08_like() -> SyntheticProblem {
    let eigenvalues = prescribed_beta_spectrum(BCSPWR08_ORDER, BCSPWR08_BETA, -2.0, 0.25).expect("fixed valid parameters");
    let (matrix, eigenvectors) = givens_mixed(&eigenvalues, 3, 7).expect("fixed valid parameters");
    SyntheticProblem { matrix, eigenvalues, eigenvectors }
}

/// Five-point Laplacian on an `m x m` grid with Dirichlet boundary.
pub fn laplacian_2d(m: usize) -> Result<SparseHermitianMatrix> {
    if m == 0 {
        return Err(Error::InvalidArgument("grid size must be positive".into()));
    }
    let n = m * m;
    let mut t = Vec::with_capacity(5 * n);
    let one = c64::new(-1.0, 0.0);
    for i in 0..m {
        for j in 0..m {
            let p = i * m + j;
            t.push((p, p, c64::new(4.0, 0.0)));
            if j + 1 < m {
                t.push((p, p + 1, one));
                t.push((p + 1, p, one));
            }
            if i + 1 < m {
                t.push((p, p + m, one));
                t.push((p + m, p, one));
            }
        }
    }
    SparseHermitianMatrix::from_triplets(n, t)
}

/// Dense random Hermitian matrix with entries uniform in `[-1, 1]`
/// (both parts when `complex`).
pub fn random_hermitian(n: usize, complex: bool, seed: u64) -> SparseHermitianMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = DenseMatrix::zeros(n);
    for i in 0..n {
        d[(i, i)] = c64::new(rng.gen_range(-1.0..1.0), 0.0);
        for j in 0..i {
            let im = if complex { rng.gen_range(-1.0..1.0) } else { 0.0 };
            let v = c64::new(rng.gen_range(-1.0..1.0), im);
            d[(i, j)] = v;
            d[(j, i)] = v.conj();
        }
    }
    SparseHermitianMatrix::from_dense(&d).expect("Hermitian by construction")
}

/// `Q diag(eigenvalues) Q*` for `Q` a product of `reflections` random
/// Householder reflectors, together with the columns of `Q`.
pub fn rotated_spectrum(
    eigenvalues: &[f64],
    reflections: usize,
    complex: bool,
    seed: u64,
) -> Result<(SparseHermitianMatrix, Vec<DenseVector>)> {
    let n = eigenvalues.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q = DenseMatrix::identity(n);
    for _ in 0..reflections {
        let mut v: DenseVector = (0..n)
            .map(|_| c64::new(rng.gen_range(-1.0..1.0), if complex { rng.gen_range(-1.0..1.0) } else { 0.0 }))
            .collect();
        normalize(&mut v)?;
        // Q <- (I - 2 v v*) Q
        for col in 0..n {
            let s: c64 = (0..n).map(|i| v[i].conj() * q[(i, col)]).sum();
            for i in 0..n {
                let d = 2.0 * v[i] * s;
                q[(i, col)] -= d;
            }
        }
    }
    let mut a = DenseMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            let v: c64 = (0..n).map(|k| q[(i, k)] * eigenvalues[k] * q[(j, k)].conj()).sum();
            a[(i, j)] = v;
            a[(j, i)] = v.conj();
        }
        a[(i, i)].im = 0.0;
    }
    let vectors = (0..n).map(|k| q.column(k)).collect();
    Ok((SparseHermitianMatrix::from_dense(&a)?, vectors))
}

/// `Q diag(eigenvalues) Qᵀ` for `Q` a product of `layers` sweeps of random
/// plane rotations on disjoint index pairs, together with the columns of
/// `Q`. Each sweep at most doubles the nonzeros per row.
pub fn givens_mixed(eigenvalues: &[f64], layers: usize, seed: u64) -> Result<(SparseHermitianMatrix, Vec<DenseVector>)> {
    let n = eigenvalues.len();
    if n < 2 {
        return Err(Error::InvalidArgument("mixing needs n >= 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Dense row-major A and Q.
    let mut a = vec![0.0f64; n * n];
    let mut q = vec![0.0f64; n * n];
    for i in 0..n {
        a[i * n + i] = eigenvalues[i];
        q[i * n + i] = 1.0;
    }
    let mut perm: Vec<usize> = (0..n).collect();
    for _ in 0..layers {
        for i in (1..n).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        for pair in perm.chunks_exact(2) {
            let (p, r) = (pair[0], pair[1]);
            let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let (s, c) = t.sin_cos();
            // A <- G A Gᵀ, Q <- G Q with G acting on coordinates p, r.
            for m in [&mut a, &mut q] {
                for j in 0..n {
                    let (x, y) = (m[p * n + j], m[r * n + j]);
                    m[p * n + j] = c * x - s * y;
                    m[r * n + j] = s * x + c * y;
                }
            }
            for i in 0..n {
                let (x, y) = (a[i * n + p], a[i * n + r]);
                a[i * n + p] = c * x - s * y;
                a[i * n + r] = s * x + c * y;
            }
        }
    }
    let mut triplets = Vec::new();
    for i in 0..n {
        for j in 0..=i {
            let v = 0.5 * (a[i * n + j] + a[j * n + i]);
            if v != 0.0 {
                triplets.push((i, j, c64::new(v, 0.0)));
                if i != j {
                    triplets.push((j, i, c64::new(v, 0.0)));
                }
            }
        }
    }
    let vectors = (0..n).map(|k| (0..n).map(|i| c64::new(q[i * n + k], 0.0)).collect()).collect();
    Ok((SparseHermitianMatrix::from_triplets(n, triplets)?, vectors))
}
