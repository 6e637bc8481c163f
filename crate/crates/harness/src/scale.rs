use std::fmt;

use serde::Serialize;

use crate::config::RunConfig;
use crate::run::{run_with_threads, RunOutcome};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub threads: usize,
    pub wall_time_s: f64,
    /// Relative to the first row.
    pub speedup: f64,
    /// `speedup · threads₀ / threads`.
    pub efficiency: f64,
    pub iterations: usize,
    pub mvps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingTable {
    pub solver: String,
    pub preconditioner: String,
    pub rows: Vec<ScalingRow>,
}

impl fmt::Display for ScalingTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} with {}", self.solver, self.preconditioner)?;
        writeln!(
            f,
            "{:>7}  {:>10}  {:>7}  {:>10}  {:>5}  {:>6}",
            "threads", "time_s", "speedup", "efficiency", "its", "mvps"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:>7}  {:>10.4}  {:>7.2}  {:>9.1}%  {:>5}  {:>6}",
                r.threads,
                r.wall_time_s,
                r.speedup,
                100.0 * r.efficiency,
                r.iterations,
                r.mvps
            )?;
        }
        Ok(())
    }
}

/// Strong scaling: the same problem and partition solved with each thread
/// count. Fails if any run's report differs from the first.
pub fn scaling_study(cfg: &RunConfig, threads: &[usize]) -> Result<ScalingTable, HarnessError> {
    if threads.is_empty() || threads.contains(&0) || threads.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Argument(
            "thread counts must be a non-empty ascending list of positive numbers".into(),
        ));
    }
    let mut outcomes: Vec<(usize, RunOutcome)> = Vec::with_capacity(threads.len());
    for &t in threads {
        let out = run_with_threads(cfg, Some(t))?;
        if let Some((t0, first)) = outcomes.first() {
            if !first.report.bitwise_eq(&out.report) {
                return Err(HarnessError::Determinism(format!(
                    "{t} threads: {} iterations, {} mvps; {t0} threads: {} iterations, {} mvps",
                    out.report.iters(),
                    out.report.mvps,
                    first.report.iters(),
                    first.report.mvps
                )));
            }
        }
        outcomes.push((t, out));
    }
    let (t0, base) = (outcomes[0].0, outcomes[0].1.wall_time_s);
    let rows = outcomes
        .iter()
        .map(|(t, out)| {
            let speedup = if out.wall_time_s > 0.0 {
                base / out.wall_time_s
            } else {
                1.0
            };
            ScalingRow {
                threads: *t,
                wall_time_s: out.wall_time_s,
                speedup,
                efficiency: speedup * t0 as f64 / *t as f64,
                iterations: out.report.iters(),
                mvps: out.report.mvps,
            }
        })
        .collect();
    Ok(ScalingTable {
        solver: outcomes[0].1.solver.clone(),
        preconditioner: outcomes[0].1.preconditioner.clone(),
        rows,
    })
}
