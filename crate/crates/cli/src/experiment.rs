//! One resolved experiment: load, run, verify, write.

use std::path::Path;

use serde::Serialize;

use irqi::diagnostics::{verify_all, SpectralOracle, VerificationReport, DEFAULT_ORACLE_CAP};
use irqi::matio::load_matrix_market;
use irqi::rqi::{initial_vector, random_start, run};
use irqi::tuned_precond::PrecondMode;
use irqi::{OuterTrace, RunStatus, SolverConfig, SparseHermitianMatrix, TolerancePolicy};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult, Failure};
use crate::output::{create_dir, write_atomic};
use crate::table::{render, TableOptions};

/// Matrix and oracle, shared by every entry of a sweep.
pub struct Problem {
    pub matrix: SparseHermitianMatrix,
    pub oracle: Option<SpectralOracle>,
}

impl Problem {
    pub fn load(cfg: &ExperimentConfig) -> CliResult<Self> {
        let path = &cfg.matrix_path;
        if !path.is_file() {
            let e = std::io::Error::new(std::io::ErrorKind::NotFound, "no such file");
            return Err(CliError::io(format!("matrix {}", path.display()), e));
        }
        let matrix = load_matrix_market(path).map_err(|e| CliError::from_core(format!("matrix {}", path.display()), e))?;
        let oracle = if cfg.oracle {
            let o = SpectralOracle::build(&matrix, cfg.target, DEFAULT_ORACLE_CAP)
                .map_err(|e| CliError::from_core("spectral oracle (use --oracle off for large matrices)", e))?;
            Some(o)
        } else {
            None
        };
        Ok(Self { matrix, oracle })
    }
}

/// Everything a run produced, before anything is written.
pub struct Outcome {
    pub config: ExperimentConfig,
    pub trace: OuterTrace,
    pub status: RunStatus,
    pub theta: f64,
    pub r_norm: f64,
    pub precond_alpha: Option<f64>,
    pub verification: Option<VerificationReport>,
}

#[derive(Serialize)]
pub struct Summary<'a> {
    pub config: &'a ExperimentConfig,
    pub status: RunStatus,
    pub outer_steps: usize,
    pub inner_steps: usize,
    pub theta: f64,
    pub r_norm: f64,
    pub precond_alpha: Option<f64>,
    /// Without an oracle the start is random and the run converges to
    /// whichever eigenpair its Rayleigh quotients settle near.
    pub target_enforced: bool,
}

#[derive(Serialize)]
struct Report<'a> {
    #[serde(flatten)]
    summary: Summary<'a>,
    verification: &'a VerificationReport,
}

pub fn execute(cfg: &ExperimentConfig, problem: &Problem) -> CliResult<Outcome> {
    let n = problem.matrix.dim();
    let u0 = match &problem.oracle {
        Some(o) => initial_vector(o.x(), cfg.sin_phi0, cfg.seed),
        None => random_start(n, !problem.matrix.is_real(), cfg.seed),
    }
    .map_err(|e| CliError::from_core("start vector", e))?;
    let solver = SolverConfig { preconditioner: cfg.preconditioner, max_inner: cfg.max_inner, max_outer: cfg.max_outer, stop_tol: cfg.stop_tol };
    let out = run(&problem.matrix, &u0, &cfg.policy, &solver, problem.oracle.as_ref())
        .map_err(|e| CliError::new(Failure::Solver, anyhow::Error::new(e).context(format!("{} failed", cfg.policy_label))))?;
    let verification = problem.oracle.as_ref().map(|o| verify_all(&out.trace, o, &cfg.policy));
    Ok(Outcome {
        config: cfg.clone(),
        status: out.status,
        theta: out.final_estimate.theta,
        r_norm: out.final_estimate.r_norm,
        precond_alpha: out.precond_alpha,
        trace: out.trace,
        verification,
    })
}

impl Outcome {
    pub fn label(&self) -> String {
        match self.config.preconditioner {
            Some(mode) => {
                let name = match mode {
                    PrecondMode::DiagonalShift => "diagonal",
                    PrecondMode::IncompleteCholesky => "ic",
                    PrecondMode::DenseCholesky => "dense",
                };
                format!("{}+tuned:{name}", self.config.policy_label)
            }
            None => self.config.policy_label.clone(),
        }
    }

    pub fn summary(&self) -> Summary<'_> {
        Summary {
            config: &self.config,
            status: self.status,
            outer_steps: self.trace.outer_steps(),
            inner_steps: self.trace.total_inner_steps(),
            theta: self.theta,
            r_norm: self.r_norm,
            precond_alpha: self.precond_alpha,
            target_enforced: self.verification.is_some(),
        }
    }

    pub fn table(&self) -> String {
        let opts = TableOptions { exact: self.config.policy == TolerancePolicy::Exact, with_sin: self.verification.is_some() };
        render(&self.label(), &self.trace, &opts)
    }

    /// One JSON object per outer record.
    pub fn trace_jsonl(&self) -> String {
        let mut s = String::new();
        for rec in &self.trace.records {
            s.push_str(&serde_json::to_string(rec).expect("record serializes"));
            s.push('\n');
        }
        s
    }

    /// `config.json`, `summary.json`, and by format `table.txt`,
    /// `trace.jsonl`, plus `report.json` when an oracle ran.
    pub fn write(&self, dir: &Path) -> CliResult<()> {
        create_dir(dir)?;
        write_atomic(&dir.join("config.json"), self.config.to_json().as_bytes())?;
        if self.config.format.table() {
            let text = format!("# config {}\n{}", serde_json::to_string(&self.config).expect("config serializes"), self.table());
            write_atomic(&dir.join("table.txt"), text.as_bytes())?;
        }
        if self.config.format.json() {
            write_atomic(&dir.join("trace.jsonl"), self.trace_jsonl().as_bytes())?;
        }
        write_atomic(&dir.join("summary.json"), pretty(&self.summary()).as_bytes())?;
        if let Some(v) = &self.verification {
            write_atomic(&dir.join("report.json"), pretty(&Report { summary: self.summary(), verification: v }).as_bytes())?;
        }
        Ok(())
    }

    /// Exit status implied by the run's termination.
    pub fn check(&self) -> CliResult<()> {
        match self.status {
            RunStatus::Converged => Ok(()),
            RunStatus::Exhausted => Err(CliError::new(
                Failure::NoConvergence,
                anyhow::anyhow!("{}: no convergence in {} outer iterations (|r| = {:e})", self.label(), self.config.max_outer, self.r_norm),
            )),
            RunStatus::Breakdown => Err(CliError::solver(format!("{}: outer iterate vanished", self.label()))),
        }
    }
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("report serializes") + "\n"
}
