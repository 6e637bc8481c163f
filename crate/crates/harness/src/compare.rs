use std::fmt;

use flexdr::krylov::Status;
use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{prepare, run, solve_prepared, RunOutcome};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub solver: String,
    pub preconditioner: String,
    pub precond_nnz: usize,
    /// `None` when the run did not converge.
    pub iterations: Option<usize>,
    pub mvps: Option<usize>,
    pub wall_time_s: f64,
    pub status: Status,
}

impl ComparisonRow {
    pub fn from_outcome(out: &RunOutcome) -> Self {
        let ok = out.report.status.is_converged();
        Self {
            solver: out.solver.clone(),
            preconditioner: out.preconditioner.clone(),
            precond_nnz: out.precond_nnz,
            iterations: ok.then(|| out.report.iters()),
            mvps: ok.then_some(out.report.mvps),
            wall_time_s: out.wall_time_s,
            status: out.report.status,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

fn dash(v: Option<usize>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn render(f: &mut fmt::Formatter<'_>, header: &[&str], rows: &[Vec<String>]) -> fmt::Result {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i < 2 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        writeln!(f, "{}", parts.join("  ").trim_end())
    };
    line(f, &header.iter().map(|h| h.to_string()).collect::<Vec<_>>())?;
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(f, &rule)?;
    for row in rows {
        line(f, row)?;
    }
    Ok(())
}

impl fmt::Display for ComparisonTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.solver.clone(),
                    r.preconditioner.clone(),
                    r.precond_nnz.to_string(),
                    dash(r.iterations),
                    dash(r.mvps),
                    format!("{:.3}", r.wall_time_s),
                    r.status.to_string(),
                ]
            })
            .collect();
        render(
            f,
            &["solver", "preconditioner", "nnz", "its", "mvps", "time_s", "status"],
            &rows,
        )
    }
}

/// Runs every configuration on their common problem.
pub fn compare(configs: &[RunConfig]) -> Result<ComparisonTable, HarnessError> {
    let first = configs
        .first()
        .ok_or_else(|| HarnessError::Argument("compare needs at least one configuration".into()))?;
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.problem != first.problem || c.preprocess != first.preprocess {
            return Err(HarnessError::Config(format!(
                "configuration {} describes a different problem than the first",
                i + 1
            )));
        }
    }
    let rows = configs
        .iter()
        .map(|c| run(c).map(|out| ComparisonRow::from_outcome(&out)))
        .collect::<Result<_, _>>()?;
    Ok(ComparisonTable { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub p: usize,
    pub imbalance: f64,
    pub iterations: Option<usize>,
    pub mvps: Option<usize>,
    pub status: Status,
}

/// Iteration counts of one configuration with the subdomain count varied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub solver: String,
    pub preconditioner: String,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// `(max − min) / min` over converged rows; `None` if any row failed.
    pub fn spread(&self) -> Option<f64> {
        let its: Option<Vec<usize>> = self.rows.iter().map(|r| r.iterations).collect();
        let its = its?;
        let (lo, hi) = (*its.iter().min()?, *its.iter().max()?);
        Some((hi - lo) as f64 / lo.max(1) as f64)
    }
}

impl fmt::Display for SweepTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} with {}", self.solver, self.preconditioner)?;
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.p.to_string(),
                    format!("{:.3}", r.imbalance),
                    dash(r.iterations),
                    dash(r.mvps),
                    r.status.to_string(),
                ]
            })
            .collect();
        render(f, &["p", "imbalance", "its", "mvps", "status"], &rows)?;
        match self.spread() {
            Some(s) => writeln!(f, "spread {:.1}%", 100.0 * s),
            None => writeln!(f, "spread -"),
        }
    }
}

/// Repeats `cfg` for each subdomain count in `ps`.
pub fn subdomain_sweep(cfg: &RunConfig, ps: &[usize]) -> Result<SweepTable, HarnessError> {
    if ps.is_empty() {
        return Err(HarnessError::Argument("subdomain sweep needs at least one count".into()));
    }
    let mut rows = Vec::with_capacity(ps.len());
    let mut preconditioner = String::new();
    for &p in ps {
        let mut c = cfg.clone();
        c.partition.p = p;
        c.partition.seeds = None;
        let prep = prepare(&c)?;
        let out = solve_prepared(&c, &prep)?;
        let ok = out.report.status.is_converged();
        preconditioner = out.preconditioner.clone();
        rows.push(SweepRow {
            p,
            imbalance: out.partition.imbalance,
            iterations: ok.then(|| out.report.iters()),
            mvps: ok.then_some(out.report.mvps),
            status: out.report.status,
        });
    }
    Ok(SweepTable {
        solver: cfg.solver.label(),
        preconditioner,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> RunConfig {
        RunConfig::from_toml_str(&format!(
            "[problem]\nkind = \"convdiff\"\nnx = 12\nny = 12\npeclet = 5.0\nseed = 1\n{extra}"
        ))
        .unwrap()
    }

    #[test]
    fn single_config_matches_run() {
        let c = cfg("[solver]\nvariant = \"gmres\"\nm = 20\n");
        let table = compare(std::slice::from_ref(&c)).unwrap();
        let out = run(&c).unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.rows[0].iterations, Some(out.report.iters()));
        assert_eq!(table.rows[0].mvps, Some(out.report.mvps));
        assert_eq!(table.rows[0].precond_nnz, out.precond_nnz);
    }

    #[test]
    fn failed_rows_show_dashes() {
        let table = compare(&[
            cfg("[solver]\nvariant = \"gmres\"\nm = 4\nmax_iters = 4\n[preconditioner]\nleaf = \"none\"\n"),
            cfg("[solver]\nvariant = \"fgmres\"\nm = 20\nm_inner = 4\n"),
        ])
        .unwrap();
        let text = table.to_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].contains(" - "), "{text}");
        assert!(lines[2].ends_with("max_iter"));
        assert!(lines[3].ends_with("converged"));
    }

    #[test]
    fn mixed_problems_are_rejected() {
        let other = RunConfig::from_toml_str("[problem]\nkind = \"identity\"\nn = 4\n").unwrap();
        assert!(compare(&[cfg(""), other]).is_err());
        assert!(compare(&[]).is_err());
    }

    #[test]
    fn sweep_rows_and_spread() {
        let c = cfg("[solver]\nvariant = \"fgmres_dr\"\nm = 20\nk = 4\ntol_inner = 0.1\n");
        let sweep = subdomain_sweep(&c, &[1, 2, 4]).unwrap();
        assert_eq!(sweep.rows.iter().map(|r| r.p).collect::<Vec<_>>(), vec![1, 2, 4]);
        assert!(sweep.spread().is_some());
        assert!(sweep.to_string().contains("spread"));
    }
}
