//! Staleness reconstruction, delay bounds, the stale-read inequality and
//! theoretical rate evaluators.

pub mod bounds;
pub mod fixtures;
mod lemma2;
mod staleness;

use serde::{Deserialize, Serialize};

pub use bounds::{evaluate_bounds, BoundParams, BoundReport};
pub use lemma2::{check_lemma2, Lemma2Report, Lemma2Violation, LEMMA2_SLACK};
pub use staleness::{
    bounds_from_table, compute_s_adsgd, compute_s_asbcd, computation_bound, measure_bounds, reconstruct_virtual_index,
    staleness_table, DelayBounds, Semantics, StalenessRecord, StalenessTable, VirtualIndex,
};

use crate::error::Result;
use crate::sim::{EventTrace, TraceMode};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub config_hash: Option<String>,
    pub n_agents: usize,
    pub updates: u64,
    pub end_time: f64,
    /// Absent for replicated traces.
    pub bounds: Option<DelayBounds>,
    pub lemma2: Vec<Lemma2Report>,
    pub note: Option<String>,
}

impl AuditReport {
    pub fn lemma2_passed(&self) -> bool {
        self.lemma2.iter().all(|r| r.passed())
    }
}

/// Audits a trace; the stale-read inequality is checked under both
/// semantics when the trace carries iterates.
pub fn audit_trace(trace: &EventTrace) -> Result<AuditReport> {
    let mut report = AuditReport {
        config_hash: trace.config_hash.clone(),
        n_agents: trace.n_agents,
        updates: trace.update_count() as u64,
        end_time: trace.end_time(),
        bounds: None,
        lemma2: Vec::new(),
        note: None,
    };
    if trace.mode == TraceMode::Replicated {
        report.note = Some("replicated model: staleness is undefined".into());
        return Ok(report);
    }
    let table = staleness_table(trace)?;
    let bounds = bounds_from_table(&table)?;
    report.bounds = Some(bounds);
    if let Some(log) = &trace.iterates {
        for sem in [Semantics::Asbcd, Semantics::Adsgd] {
            report.lemma2.push(check_lemma2(&table, log, sem, bounds.d(sem))?);
        }
    }
    Ok(report)
}
