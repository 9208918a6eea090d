use serde::{Deserialize, Serialize};

use super::staleness::{Semantics, StalenessTable};
use crate::error::{LabError, Result};
use crate::sim::IterateLog;
use crate::vector::ModelVector;

pub const LEMMA2_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Violation {
    pub k: u64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Report {
    pub semantics: Semantics,
    pub d: u64,
    pub checked: u64,
    pub violations: Vec<Lemma2Violation>,
    /// Largest `lhs / rhs` over checked indices with a positive right side.
    pub tightest_ratio: f64,
}

impl Lemma2Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Per-agent model history over the logged window.
struct History {
    /// `(k, model after update k)`, ascending in `k`.
    updates: Vec<Vec<(u64, ModelVector)>>,
    initial: Vec<ModelVector>,
}

impl History {
    /// Model of `j` current just before update `s`.
    fn before(&self, j: usize, s: u64) -> &ModelVector {
        let u = &self.updates[j];
        match u.partition_point(|(k, _)| *k < s) {
            0 => &self.initial[j],
            p => &u[p - 1].1,
        }
    }
}

/// Checks `‖x^k − x̂^k‖ ≤ Σ_{t=(k−D)+}^{k−1} ‖x^{t+1} − x^t‖` for every `k` the
/// iterate log covers at least `D` updates back. `x̂^k` replaces the blocks of
/// `N̄_{i_k}` by their stale versions `x_j^{s_ij^k}`.
pub fn check_lemma2(table: &StalenessTable, log: &IterateLog, semantics: Semantics, d: u64) -> Result<Lemma2Report> {
    let n = log.initial.len();
    let end = log.end_k();
    if end as usize > table.index.len() {
        return Err(LabError::Audit("iterate log extends past the trace".into()));
    }
    let mut current = log.initial.clone();
    let mut history = History {
        updates: vec![Vec::new(); n],
        initial: log.initial.clone(),
    };
    let mut step_prefix = vec![0.0];
    for (off, x_next) in log.after_update.iter().enumerate() {
        let k = log.start_k + off as u64;
        let i = table.index[k as usize].agent;
        let step = x_next.sub(&current[i]).norm();
        step_prefix.push(step_prefix[off] + step);
        current[i] = x_next.clone();
        history.updates[i].push((k, x_next.clone()));
    }

    let mut report = Lemma2Report {
        semantics,
        d,
        checked: 0,
        violations: Vec::new(),
        tightest_ratio: 0.0,
    };
    for k in (log.start_k + d)..end {
        let mut lhs_sq = 0.0;
        for r in table.at(k) {
            let s = r.s(semantics);
            if k - s > d {
                return Err(LabError::Audit(format!("delay {} at k={k} exceeds D={d}", k - s)));
            }
            if s < k {
                lhs_sq += history.before(r.j, k).sub(history.before(r.j, s)).norm_sq();
            }
        }
        let lhs = lhs_sq.sqrt();
        let lo = (k - d - log.start_k) as usize;
        let hi = (k - log.start_k) as usize;
        let rhs = step_prefix[hi] - step_prefix[lo];
        report.checked += 1;
        if rhs > 0.0 {
            report.tightest_ratio = report.tightest_ratio.max(lhs / rhs);
        }
        if lhs > rhs + LEMMA2_SLACK {
            report.violations.push(Lemma2Violation { k, lhs, rhs });
        }
    }
    Ok(report)
}
