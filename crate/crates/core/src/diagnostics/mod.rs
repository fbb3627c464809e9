//! Dense spectral oracle, angle measurements and checks of the convergence
//! bounds against recorded traces.

pub mod eigen;
pub mod oracle;
pub mod verify;

pub use eigen::hermitian_eigen;
pub use oracle::{angle_between, angle_to_target, build_oracle, Angles, OracleSummary, SpectralOracle, TargetSpec, DEFAULT_ORACLE_CAP};
pub use verify::{verify_all, verify_theorem2, verify_theorem6, w_norm_growth, RateClass, RateReport, VerificationReport};
