//! Several policies on one matrix, run in parallel with per-entry failure
//! isolation.

use std::fmt::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use irqi::{RunStatus, TolerancePolicy};

use crate::config::{ExperimentConfig, Partial, SweepFile};
use crate::error::{CliError, CliResult};
use crate::experiment::{execute, Outcome, Problem};
use crate::output::{create_dir, write_atomic};

#[derive(Debug)]
pub struct SweepPlan {
    pub out_dir: PathBuf,
    pub workers: usize,
    pub entries: Vec<ExperimentConfig>,
}

fn dir_name(i: usize, label: &str) -> String {
    let clean: String = label.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' }).collect();
    format!("{i:02}-{clean}")
}

/// Resolves every entry up front; any invalid entry, or entries that
/// disagree on matrix, target or oracle, rejects the whole sweep.
pub fn plan(file: SweepFile, flags: &Partial, policies: Option<Vec<String>>, workers: Option<usize>) -> CliResult<SweepPlan> {
    let raw: Vec<Partial> = match policies {
        Some(list) => list.into_iter().map(|p| Partial { policy: Some(p), ..Default::default() }).collect(),
        None => file.entries,
    };
    let workers = workers.or(file.workers).unwrap_or_else(rayon::current_num_threads);
    if workers == 0 {
        return Err(CliError::config("--workers must be at least 1"));
    }
    let out_dir = flags.out.clone().or_else(|| file.common.out.clone()).unwrap_or_else(|| PathBuf::from("irqi-out"));
    let mut entries = Vec::with_capacity(raw.len());
    for (i, e) in raw.iter().enumerate() {
        if e.out.is_some() {
            return Err(CliError::config(format!("entry {i}: 'out' is set per sweep, not per entry")));
        }
        let mut cfg = ExperimentConfig::resolve(&file.common.clone().overlay(e).overlay(flags)).map_err(|err| CliError::config(format!("entry {i}: {err}")))?;
        cfg.out_dir = out_dir.join(dir_name(i, &cfg.policy_label));
        entries.push(cfg);
    }
    if let Some(first) = entries.first() {
        for (i, c) in entries.iter().enumerate().skip(1) {
            if c.matrix_path != first.matrix_path {
                return Err(CliError::config(format!(
                    "entry {i} uses matrix {} but entry 0 uses {}; a sweep runs on one matrix",
                    c.matrix_path.display(),
                    first.matrix_path.display()
                )));
            }
            if c.target != first.target || c.oracle != first.oracle {
                return Err(CliError::config(format!("entry {i}: target and oracle must match across a sweep")));
            }
        }
    }
    Ok(SweepPlan { out_dir, workers, entries })
}

#[derive(Serialize)]
struct EntrySummary {
    index: usize,
    label: String,
    dir: PathBuf,
    status: Option<RunStatus>,
    outer_steps: Option<usize>,
    inner_steps: Option<usize>,
    exit_code: i32,
    error: Option<String>,
    config: ExperimentConfig,
}

#[derive(Serialize)]
struct Comparison {
    fixed: String,
    decreasing: String,
    fixed_inner: usize,
    decreasing_inner: usize,
    ratio: f64,
}

#[derive(Serialize)]
struct SweepSummary {
    entries: Vec<EntrySummary>,
    comparisons: Vec<Comparison>,
}

fn comparisons(done: &[&Outcome]) -> Vec<Comparison> {
    let mut out = Vec::new();
    for d in done.iter().filter(|o| matches!(o.config.policy, TolerancePolicy::Decreasing { .. })) {
        for f in done.iter().filter(|o| matches!(o.config.policy, TolerancePolicy::Fixed { .. })) {
            if f.config.preconditioner != d.config.preconditioner {
                continue;
            }
            let (fi, di) = (f.trace.total_inner_steps(), d.trace.total_inner_steps());
            out.push(Comparison { fixed: f.label(), decreasing: d.label(), fixed_inner: fi, decreasing_inner: di, ratio: fi as f64 / di as f64 });
        }
    }
    out
}

/// Runs the plan and writes per-entry directories plus `summary.txt` and
/// `summary.json`. The error, if any, is that of the first failing entry.
pub fn execute_plan(plan: &SweepPlan) -> CliResult<()> {
    let problem = plan.entries.first().map(Problem::load).transpose()?;
    let results: Vec<CliResult<Outcome>> = match &problem {
        None => Vec::new(),
        Some(problem) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(plan.workers)
                .build()
                .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
            pool.install(|| plan.entries.par_iter().map(|c| execute(c, problem)).collect())
        }
    };
    create_dir(&plan.out_dir)?;
    let results: Vec<CliResult<Outcome>> =
        plan.entries.iter().zip(results).map(|(cfg, r)| r.and_then(|o| o.write(&cfg.out_dir).map(|_| o))).collect();

    let mut entries = Vec::new();
    let mut text = String::new();
    let mut first_failure: Option<CliError> = None;
    for (i, (cfg, res)) in plan.entries.iter().zip(&results).enumerate() {
        let verdict = match res {
            Ok(o) => o.check(),
            Err(e) => Err(CliError::new(e.kind, anyhow::anyhow!("{e}"))),
        };
        let ok = res.as_ref().ok();
        match res {
            Ok(o) => text.push_str(&o.table()),
            Err(e) => {
                let _ = writeln!(text, "{}  failed: {e}", cfg.policy_label);
            }
        }
        text.push('\n');
        entries.push(EntrySummary {
            index: i,
            label: ok.map(Outcome::label).unwrap_or_else(|| cfg.policy_label.clone()),
            dir: cfg.out_dir.clone(),
            status: ok.map(|o| o.status),
            outer_steps: ok.map(|o| o.trace.outer_steps()),
            inner_steps: ok.map(|o| o.trace.total_inner_steps()),
            exit_code: verdict.as_ref().err().map_or(0, CliError::exit_code),
            error: verdict.as_ref().err().map(ToString::to_string),
            config: cfg.clone(),
        });
        if let Err(e) = verdict {
            first_failure.get_or_insert(e);
        }
    }

    let done: Vec<&Outcome> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
    let comparisons = comparisons(&done);
    let _ = writeln!(text, "entries {}  failed {}", entries.len(), entries.iter().filter(|e| e.exit_code != 0).count());
    if !done.is_empty() {
        let _ = writeln!(text, "\ntotal inner steps");
        for o in &done {
            let _ = writeln!(text, "  {:<28} {:>8}", o.label(), o.trace.total_inner_steps());
        }
    }
    for c in &comparisons {
        let _ = writeln!(text, "  {} / {} = {} / {} = {:.3}", c.fixed, c.decreasing, c.fixed_inner, c.decreasing_inner, c.ratio);
    }
    write_atomic(&plan.out_dir.join("summary.txt"), text.as_bytes())?;
    let json = serde_json::to_string_pretty(&SweepSummary { entries, comparisons }).expect("summary serializes") + "\n";
    write_atomic(&plan.out_dir.join("summary.json"), json.as_bytes())?;
    print!("{text}");
    first_failure.map_or(Ok(()), Err)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn file(entries: &[(&str, &str)]) -> SweepFile {
        SweepFile {
            common: Partial { tol: Some(1e-12), ..Default::default() },
            workers: Some(2),
            entries: entries.iter().map(|(m, p)| Partial { matrix: Some(m.into()), policy: Some(p.to_string()), ..Default::default() }).collect(),
        }
    }

    #[test]
    fn entries_inherit_and_get_their_own_directories() {
        let p = plan(file(&[("a.mtx", "exact"), ("a.mtx", "fixed:0.5")]), &Partial::default(), None, None).unwrap();
        assert_eq!(p.workers, 2);
        assert_eq!(p.entries[1].stop_tol, 1e-12);
        assert_eq!(p.entries[1].out_dir, PathBuf::from("irqi-out/01-fixed_0.5"));
    }

    #[test]
    fn mixed_matrices_are_rejected() {
        let e = plan(file(&[("a.mtx", "exact"), ("b.mtx", "exact")]), &Partial::default(), None, None).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn policy_list_replaces_file_entries() {
        let flags = Partial { matrix: Some("c.mtx".into()), ..Default::default() };
        let p = plan(file(&[("a.mtx", "exact")]), &flags, Some(vec!["decreasing".into(), "linear:1000".into()]), Some(1)).unwrap();
        assert_eq!(p.entries.len(), 2);
        assert!(p.entries.iter().all(|e| e.matrix_path == PathBuf::from("c.mtx")));
    }

    #[test]
    fn invalid_entry_rejects_the_sweep() {
        assert!(plan(file(&[("a.mtx", "exact"), ("a.mtx", "fixed:2")]), &Partial::default(), None, None).is_err());
        assert!(plan(SweepFile::default(), &Partial::default(), None, Some(0)).is_err());
    }
}
