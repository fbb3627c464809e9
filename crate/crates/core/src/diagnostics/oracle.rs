use serde::{Deserialize, Serialize};

use super::eigen::hermitian_eigen;
use crate::error::{Error, Result};
use crate::matio::SparseHermitianMatrix;
use crate::vector::{axpy, c64, dot, norm, zeros, DenseVector};

pub const DEFAULT_ORACLE_CAP: usize = 2000;

/// Relative threshold below which `|λ₂ - λ|` counts as degenerate.
pub const DEGENERATE_GAP_TOL: f64 = 1e-12;

/// Which eigenpair a run aims at.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum TargetSpec {
    Smallest,
    Largest,
    /// Eigenvalue closest to the given shift.
    Closest(f64),
    /// k-th smallest eigenvalue, 1-based.
    Index(usize),
}

impl std::str::FromStr for TargetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid target '{s}'"));
        match s.split_once(':') {
            None if s == "smallest" => Ok(Self::Smallest),
            None if s == "largest" => Ok(Self::Largest),
            Some(("closest", v)) => v.trim().parse().map(Self::Closest).map_err(|_| bad()),
            Some(("index", v)) => match v.trim().parse::<usize>() {
                Ok(k) if k >= 1 => Ok(Self::Index(k)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        }
    }
}

impl std::fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Smallest => write!(f, "smallest"),
            Self::Largest => write!(f, "largest"),
            Self::Closest(s) => write!(f, "closest:{s}"),
            Self::Index(k) => write!(f, "index:{k}"),
        }
    }
}

/// Full eigendecomposition with a selected target pair.
#[derive(Clone, Debug)]
pub struct SpectralOracle {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<DenseVector>,
    pub target_index: usize,
    pub lambda: f64,
    /// `min_{i != target} |λ_i - λ|`.
    pub gap: f64,
    /// `λ_max - λ_min`.
    pub spread: f64,
    /// `spread / gap`.
    pub beta: f64,
    pub one_norm: f64,
}

/// Summary of a [`SpectralOracle`] for reports.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleSummary {
    pub n: usize,
    pub target_index: usize,
    pub lambda: f64,
    pub gap: f64,
    pub spread: f64,
    pub beta: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

fn is_diagonal(a: &SparseHermitianMatrix) -> bool {
    (0..a.dim()).all(|i| a.row(i).all(|(j, _)| j == i))
}

impl SpectralOracle {
    /// Dense eigendecomposition of `a` (or a sort, for diagonal input).
    pub fn build(a: &SparseHermitianMatrix, target: TargetSpec, n_cap: usize) -> Result<Self> {
        let n = a.dim();
        if n > n_cap {
            return Err(Error::OracleTooLarge { n, cap: n_cap });
        }
        if n < 2 {
            return Err(Error::InvalidArgument("oracle needs n >= 2".into()));
        }
        let (eigenvalues, eigenvectors) = if is_diagonal(a) {
            let diag = a.diagonal();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&i, &j| diag[i].total_cmp(&diag[j]));
            let vals = order.iter().map(|&i| diag[i]).collect();
            let vecs = order
                .iter()
                .map(|&i| {
                    let mut e = zeros(n);
                    e[i] = c64::new(1.0, 0.0);
                    e
                })
                .collect();
            (vals, vecs)
        } else {
            hermitian_eigen(&a.to_dense())?
        };
        Self::from_parts(eigenvalues, eigenvectors, target, a.one_norm())
    }

    /// Builds an oracle from a known ascending spectrum and eigenvectors.
    pub fn from_parts(eigenvalues: Vec<f64>, eigenvectors: Vec<DenseVector>, target: TargetSpec, one_norm: f64) -> Result<Self> {
        let n = eigenvalues.len();
        if eigenvectors.len() != n || n < 2 {
            return Err(Error::InvalidArgument("oracle needs matching eigenpairs, n >= 2".into()));
        }
        let target_index = match target {
            TargetSpec::Smallest => 0,
            TargetSpec::Largest => n - 1,
            TargetSpec::Index(k) if (1..=n).contains(&k) => k - 1,
            TargetSpec::Index(k) => return Err(Error::InvalidArgument(format!("target index {k} outside 1..={n}"))),
            TargetSpec::Closest(sigma) => {
                let mut best = 0;
                for (i, l) in eigenvalues.iter().enumerate() {
                    if (l - sigma).abs() < (eigenvalues[best] - sigma).abs() {
                        best = i;
                    }
                }
                best
            }
        };
        let lambda = eigenvalues[target_index];
        let gap = eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != target_index)
            .map(|(_, l)| (l - lambda).abs())
            .fold(f64::INFINITY, f64::min);
        if gap <= DEGENERATE_GAP_TOL * one_norm {
            return Err(Error::DegenerateGap { gap });
        }
        let spread = eigenvalues[n - 1] - eigenvalues[0];
        Ok(Self { eigenvalues, eigenvectors, target_index, lambda, gap, spread, beta: spread / gap, one_norm })
    }

    pub fn x(&self) -> &[c64] {
        &self.eigenvectors[self.target_index]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        *self.eigenvalues.last().unwrap()
    }

    pub fn summary(&self) -> OracleSummary {
        OracleSummary {
            n: self.eigenvalues.len(),
            target_index: self.target_index,
            lambda: self.lambda,
            gap: self.gap,
            spread: self.spread,
            beta: self.beta,
            lambda_min: self.lambda_min(),
            lambda_max: self.lambda_max(),
        }
    }

    /// Largest `‖A x_i - λ_i x_i‖` over all pairs.
    pub fn max_residual(&self, a: &SparseHermitianMatrix) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.eigenvectors)
            .map(|(l, x)| norm(&a.shifted_matvec(*l, x).expect("dimension checked at build")))
            .fold(0.0, f64::max)
    }

    /// Largest deviation of the eigenvector Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, xi) in self.eigenvectors.iter().enumerate() {
            for (j, xj) in self.eigenvectors[..=i].iter().enumerate() {
                let g = dot(xj, xi);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

/// Builds the oracle for the eigenvalue closest to `target_sigma`.
pub fn build_oracle(a: &SparseHermitianMatrix, target_sigma: f64, n_cap: usize) -> Result<SpectralOracle> {
    SpectralOracle::build(a, TargetSpec::Closest(target_sigma), n_cap)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Angles {
    pub sin_phi: f64,
    pub cos_phi: f64,
    /// `None` when `u ⊥ x`.
    pub tan_phi: Option<f64>,
}

/// Acute angle between `u` and the eigenvector `x`.
pub fn angle_between(u: &[c64], x: &[c64]) -> Angles {
    let un = norm(u);
    let c = dot(x, u);
    let mut rest = u.to_vec();
    axpy(-c, x, &mut rest);
    let sin_phi = (norm(&rest) / un).min(1.0);
    let cos_phi = (c.norm() / un).min(1.0);
    let tan_phi = if cos_phi == 0.0 { None } else { Some(sin_phi / cos_phi) };
    Angles { sin_phi, cos_phi, tan_phi }
}

/// Angle between `u` and the oracle's target eigenvector.
pub fn angle_to_target(u: &[c64], oracle: &SpectralOracle) -> Angles {
    angle_between(u, oracle.x())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vector::from_real;

    #[test]
    fn diagonal_examples() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 2.0, 3.0]);
        let o = build_oracle(&a, 0.9, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!((o.lambda, o.gap, o.beta), (1.0, 1.0, 2.0));
        let b = SparseHermitianMatrix::from_real_diagonal(&[0.0, 2.0]);
        let o = build_oracle(&b, 0.9, DEFAULT_ORACLE_CAP).unwrap();
        assert_eq!((o.lambda, o.gap, o.beta), (0.0, 2.0, 1.0));
    }

    #[test]
    fn target_selection() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[5.0, -1.0, 2.0, 9.0]);
        let pick = |t| SpectralOracle::build(&a, t, 10).unwrap().lambda;
        assert_eq!(pick(TargetSpec::Smallest), -1.0);
        assert_eq!(pick(TargetSpec::Largest), 9.0);
        assert_eq!(pick(TargetSpec::Index(2)), 2.0);
        assert_eq!(pick(TargetSpec::Closest(4.4)), 5.0);
        assert!(SpectralOracle::build(&a, TargetSpec::Index(5), 10).is_err());
    }

    #[test]
    fn guards() {
        let a = SparseHermitianMatrix::from_real_diagonal(&[1.0, 1.0, 3.0]);
        assert!(matches!(SpectralOracle::build(&a, TargetSpec::Smallest, 10), Err(Error::DegenerateGap { .. })));
        assert!(matches!(SpectralOracle::build(&a, TargetSpec::Largest, 2), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn target_parsing_round_trips() {
        for t in [TargetSpec::Smallest, TargetSpec::Largest, TargetSpec::Closest(0.5), TargetSpec::Index(10)] {
            assert_eq!(t.to_string().parse::<TargetSpec>().unwrap(), t);
        }
        assert!("index:0".parse::<TargetSpec>().is_err());
        assert!("middle".parse::<TargetSpec>().is_err());
    }

    #[test]
    fn angle_examples() {
        let x = from_real(&[1.0, 0.0]);
        let a = angle_between(&x, &x);
        assert_eq!((a.sin_phi, a.cos_phi, a.tan_phi), (0.0, 1.0, Some(0.0)));
        let a = angle_between(&from_real(&[0.0, 1.0]), &x);
        assert_eq!((a.sin_phi, a.cos_phi, a.tan_phi), (1.0, 0.0, None));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let a = angle_between(&from_real(&[h, h]), &x);
        assert!((a.sin_phi - h).abs() < 1e-15 && (a.cos_phi - h).abs() < 1e-15);
        assert!((a.tan_phi.unwrap() - 1.0).abs() < 1e-15);
    }
}
