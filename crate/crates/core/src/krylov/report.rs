use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    MaxIter,
    Stagnated,
    BreakdownConverged,
}

impl Status {
    pub fn is_converged(self) -> bool {
        matches!(self, Status::Converged | Status::BreakdownConverged)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::MaxIter => "max_iter",
            Status::Stagnated => "stagnated",
            Status::BreakdownConverged => "breakdown_converged",
        }
    }
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One outer Arnoldi step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iter: usize,
    pub cycle: usize,
    pub lsq_rel_res: f64,
    /// Set on the last iteration of each cycle.
    pub true_rel_res: Option<f64>,
    pub mvps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub cycle: usize,
    /// Basis columns carried over from the previous cycle.
    pub deflated_columns: usize,
    pub iterations: usize,
    pub lsq_rel_res: f64,
    pub true_rel_res: f64,
    /// The least-squares and true residuals differ by more than 10%.
    pub discrepancy: bool,
    /// A deflated restart was attempted after this cycle but failed.
    pub deflation_fallback: bool,
    pub breakdown: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub status: Status,
    pub iterations: Vec<IterationRecord>,
    pub cycles: Vec<CycleRecord>,
    pub mvps: usize,
    /// Relative true residual at termination.
    pub final_true_res: f64,
}

/// Machine-readable run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub status: Status,
    pub iters: usize,
    pub mvps: usize,
    pub cycles: usize,
    pub final_true_res: f64,
    pub wall_time_s: f64,
}

pub const CSV_HEADER: &str = "iter,cycle,lsq_rel_res,true_rel_res_or_blank,mvps_cumulative";

impl ConvergenceReport {
    pub fn iters(&self) -> usize {
        self.iterations.len()
    }

    pub fn num_cycles(&self) -> usize {
        self.cycles.len()
    }

    pub fn summary(&self, wall_time_s: f64) -> Summary {
        Summary {
            status: self.status,
            iters: self.iters(),
            mvps: self.mvps,
            cycles: self.num_cycles(),
            final_true_res: self.final_true_res,
            wall_time_s,
        }
    }

    /// Per-iteration history, one row per outer iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.iterations.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.iterations {
            let tr = r.true_rel_res.map(|v| format!("{v:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:e},{},{}", r.iter, r.cycle, r.lsq_rel_res, tr, r.mvps);
        }
        out
    }

    /// Equality that also distinguishes floating-point bit patterns.
    pub fn bitwise_eq(&self, other: &Self) -> bool {
        let same = |a: f64, b: f64| a.to_bits() == b.to_bits();
        let opt = |a: Option<f64>, b: Option<f64>| match (a, b) {
            (Some(a), Some(b)) => same(a, b),
            (None, None) => true,
            _ => false,
        };
        self.status == other.status
            && self.mvps == other.mvps
            && same(self.final_true_res, other.final_true_res)
            && self.iterations.len() == other.iterations.len()
            && self.cycles.len() == other.cycles.len()
            && self.iterations.iter().zip(&other.iterations).all(|(a, b)| {
                a.iter == b.iter
                    && a.cycle == b.cycle
                    && a.mvps == b.mvps
                    && same(a.lsq_rel_res, b.lsq_rel_res)
                    && opt(a.true_rel_res, b.true_rel_res)
            })
            && self.cycles.iter().zip(&other.cycles).all(|(a, b)| {
                a.cycle == b.cycle
                    && a.deflated_columns == b.deflated_columns
                    && a.iterations == b.iterations
                    && a.discrepancy == b.discrepancy
                    && a.deflation_fallback == b.deflation_fallback
                    && a.breakdown == b.breakdown
                    && same(a.lsq_rel_res, b.lsq_rel_res)
                    && same(a.true_rel_res, b.true_rel_res)
            })
    }
}
