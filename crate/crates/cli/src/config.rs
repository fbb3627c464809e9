//! Experiment configuration: partial layers from a TOML file, sweep entries
//! and command-line flags, merged in that order and validated before any
//! computation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use irqi::diagnostics::TargetSpec;
use irqi::rqi::{DEFAULT_MAX_OUTER, DEFAULT_STOP_TOL};
use irqi::tuned_precond::PrecondMode;
use irqi::TolerancePolicy;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Table,
    Json,
    Both,
}

impl OutputFormat {
    pub fn table(self) -> bool {
        matches!(self, Self::Table | Self::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
}

/// One layer of settings; unset fields fall through to the layer below.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Partial {
    pub matrix: Option<PathBuf>,
    pub target: Option<String>,
    pub policy: Option<String>,
    pub precond: Option<String>,
    pub tol: Option<f64>,
    pub max_outer: Option<usize>,
    pub max_inner: Option<usize>,
    pub seed: Option<u64>,
    pub sin_phi0: Option<f64>,
    pub oracle: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<OutputFormat>,
}

macro_rules! overlay {
    ($dst:expr, $src:expr, $($f:ident),*) => {
        $(if $src.$f.is_some() { $dst.$f = $src.$f.clone(); })*
    };
}

impl Partial {
    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &Partial) -> Self {
        overlay!(self, top, matrix, target, policy, precond, tol, max_outer, max_inner, seed, sin_phi0, oracle, out, format);
        self
    }
}

/// Config file for `run`: a flat table of [`Partial`] keys.
pub fn read_run_file(path: &Path) -> CliResult<Partial> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
}

/// Config file for `sweep`: shared keys plus `[[entry]]` tables.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFile {
    #[serde(flatten)]
    pub common: Partial,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default, rename = "entry")]
    pub entries: Vec<Partial>,
}

pub fn read_sweep_file(path: &Path) -> CliResult<SweepFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading config {}", path.display()), e))?;
    toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))
}

/// A fully resolved experiment; written verbatim next to every output.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub matrix_path: PathBuf,
    pub target: TargetSpec,
    pub policy: TolerancePolicy,
    pub policy_label: String,
    /// `None` runs plain MINRES.
    pub preconditioner: Option<PrecondMode>,
    pub stop_tol: f64,
    pub max_outer: usize,
    /// Lanczos steps per inner solve; the matrix order when `None`.
    pub max_inner: Option<usize>,
    pub seed: u64,
    pub sin_phi0: f64,
    pub oracle: bool,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
}

pub fn parse_precond(s: &str) -> CliResult<Option<PrecondMode>> {
    match s.split_once(':') {
        None if s == "none" => Ok(None),
        Some(("tuned", mode)) => mode.parse().map(Some).map_err(|e: irqi::Error| CliError::config(e.to_string())),
        _ => Err(CliError::config(format!("invalid preconditioner '{s}', expected none or tuned:<diagonal|ic|dense>"))),
    }
}

fn parse_switch(s: &str) -> CliResult<bool> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(CliError::config(format!("invalid oracle switch '{s}', expected on or off"))),
    }
}

impl ExperimentConfig {
    pub fn resolve(p: &Partial) -> CliResult<Self> {
        let matrix_path = p.matrix.clone().ok_or_else(|| CliError::config("no matrix given (--matrix PATH)"))?;
        let target: TargetSpec = p.target.as_deref().unwrap_or("smallest").parse().map_err(|e: irqi::Error| CliError::config(e.to_string()))?;
        let policy: TolerancePolicy = p.policy.as_deref().unwrap_or("exact").parse().map_err(|e: irqi::Error| CliError::config(e.to_string()))?;
        policy.validate().map_err(|e| CliError::config(e.to_string()))?;
        let preconditioner = parse_precond(p.precond.as_deref().unwrap_or("none"))?;
        let oracle = parse_switch(p.oracle.as_deref().unwrap_or("on"))?;
        let stop_tol = p.tol.unwrap_or(DEFAULT_STOP_TOL);
        if !(stop_tol > 0.0 && stop_tol < 1.0) {
            return Err(CliError::config(format!("--tol must lie in (0, 1), got {stop_tol}")));
        }
        let max_outer = p.max_outer.unwrap_or(DEFAULT_MAX_OUTER);
        if max_outer == 0 {
            return Err(CliError::config("--max-outer must be at least 1"));
        }
        if p.max_inner.is_some_and(|m| m < 2) {
            return Err(CliError::config("--max-inner must be at least 2"));
        }
        let sin_phi0 = p.sin_phi0.unwrap_or(0.1);
        if !(0.0..1.0).contains(&sin_phi0) {
            return Err(CliError::config(format!("--sin-phi0 must lie in [0, 1), got {sin_phi0}")));
        }
        Ok(Self {
            matrix_path,
            target,
            policy_label: policy.label(),
            policy,
            preconditioner,
            stop_tol,
            max_outer,
            max_inner: p.max_inner,
            seed: p.seed.unwrap_or(0),
            sin_phi0,
            oracle,
            out_dir: p.out.clone().unwrap_or_else(|| PathBuf::from("irqi-out")),
            format: p.format.unwrap_or(OutputFormat::Both),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_matrix() -> Partial {
        Partial { matrix: Some("a.mtx".into()), ..Default::default() }
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::resolve(&with_matrix()).unwrap();
        assert_eq!(c.target, TargetSpec::Smallest);
        assert_eq!(c.policy, TolerancePolicy::Exact);
        assert_eq!((c.stop_tol, c.max_outer, c.oracle), (1e-14, 50, true));
        assert_eq!(c.preconditioner, None);
    }

    #[test]
    fn upper_layers_win() {
        let file = Partial { policy: Some("fixed:0.5".into()), tol: Some(1e-10), ..with_matrix() };
        let flags = Partial { policy: Some("quad:1000".into()), ..Default::default() };
        let c = ExperimentConfig::resolve(&file.overlay(&flags)).unwrap();
        assert_eq!(c.policy_label, "quad:1000");
        assert_eq!(c.stop_tol, 1e-10);
    }

    #[test]
    fn invalid_values_are_config_errors() {
        for bad in [
            Partial { policy: Some("fixed:1.5".into()), ..with_matrix() },
            Partial { precond: Some("tuned:lu".into()), ..with_matrix() },
            Partial { tol: Some(0.0), ..with_matrix() },
            Partial { oracle: Some("maybe".into()), ..with_matrix() },
            Partial { sin_phi0: Some(1.0), ..with_matrix() },
            Partial::default(),
        ] {
            assert_eq!(ExperimentConfig::resolve(&bad).unwrap_err().exit_code(), 2);
        }
    }

    #[test]
    fn precond_names() {
        assert_eq!(parse_precond("none").unwrap(), None);
        assert_eq!(parse_precond("tuned:ic").unwrap(), Some(PrecondMode::IncompleteCholesky));
        assert!(parse_precond("ic").is_err());
    }

    #[test]
    fn sweep_file_layout() {
        let f: SweepFile = toml::from_str(
            r#"
            matrix = "a.mtx"
            tol = 1e-13
            workers = 2
            [[entry]]
            policy = "exact"
            [[entry]]
            policy = "fixed:0.1"
            precond = "tuned:dense"
            "#,
        )
        .unwrap();
        assert_eq!(f.entries.len(), 2);
        assert_eq!(f.workers, Some(2));
        assert_eq!(f.common.tol, Some(1e-13));
        assert!(toml::from_str::<SweepFile>("colour = 1").is_err());
    }
}
