//! Plain-text iteration tables.
//!
//! Row `k` shows `‖r_k‖` and `sin φ_k` of the iterate `u_k` together with
//! the inner solve that produced it from `u_{k-1}`: its achieved relative
//! residual `res` and its step count `iter`. `iter` counts Lanczos steps
//! `m`; a MINRES code that reports the index of its last completed
//! iteration shows `m - 1` for the same solve.

use std::fmt::Write;

use irqi::{OuterRecord, OuterTrace};

/// Four significant digits; scientific below `1e-3`. Values just under one
/// print as `1-δ` so the distance to one stays visible.
pub fn sig4(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    if x > 0.999 && x < 1.0 {
        return format!("1-{:.3e}", 1.0 - x);
    }
    let a = x.abs();
    if a < 1e-3 {
        return format!("{x:.3e}");
    }
    let decimals = (3 - a.log10().floor() as i32).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // rounding can carry into a fifth digit, as in 9.9996 -> 10.000
    if s.trim_start_matches('-').replace('.', "").trim_start_matches('0').len() > 4 && decimals > 0 {
        format!("{x:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// Cell for the inner solve that produced row `row`, `-` when the solve
/// stagnated or its residual is below rounding.
fn solve_cells(prev: &OuterRecord) -> (String, String) {
    let (Some(xi), Some(steps)) = (prev.xi_achieved, prev.inner_steps) else {
        return (String::new(), String::new());
    };
    let res = if prev.stagnated == Some(true) || prev.inner_at_floor() { "-".to_string() } else { sig4(xi) };
    (res, steps.to_string())
}

pub struct TableOptions {
    /// Exact solves leave the `res` and `iter` columns empty.
    pub exact: bool,
    /// Present only when an oracle measured the angles.
    pub with_sin: bool,
}

/// Rows `k = 1, ..`; `iters`, the total Lanczos steps of the run, sits on
/// the first row.
pub fn render(label: &str, trace: &OuterTrace, opts: &TableOptions) -> String {
    let mut header = vec!["", "k", "|r_k|"];
    if opts.with_sin {
        header.push("sin phi_k");
    }
    header.extend(["res(k-1)", "iter(k-1)", "iters"]);
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    let total = trace.total_inner_steps();
    for (i, pair) in trace.records.windows(2).enumerate() {
        let (prev, rec) = (&pair[0], &pair[1]);
        let mut row = vec![if i == 0 { label.to_string() } else { String::new() }, rec.k.to_string(), sig4(rec.r_norm)];
        if opts.with_sin {
            row.push(rec.sin_phi.map(sig4).unwrap_or_default());
        }
        let (res, iter) = if opts.exact { (String::new(), String::new()) } else { solve_cells(prev) };
        row.extend([res, iter, if i == 0 { total.to_string() } else { String::new() }]);
        rows.push(row);
    }
    align(&rows)
}

fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols).map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for r in rows {
        let line: Vec<String> = r.iter().zip(&widths).map(|(s, &w)| format!("{s:>w$}")).collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
    out
}
