use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::sim::{EventTrace, TraceKind, TraceMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VirtualIndex {
    pub k: u64,
    pub agent: usize,
    pub sim_time: f64,
    /// Position of the update in the ordered record list.
    pub record: usize,
}

/// Which instant the active agent's view of its neighbors is read at.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semantics {
    /// When the gradient computation that commits at `k` starts.
    Asbcd,
    /// At the commit of update `k`.
    Adsgd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StalenessRecord {
    pub k: u64,
    pub i: usize,
    pub j: usize,
    pub s_asbcd: u64,
    pub s_adsgd: u64,
}

impl StalenessRecord {
    pub fn s(&self, semantics: Semantics) -> u64 {
        match semantics {
            Semantics::Asbcd => self.s_asbcd,
            Semantics::Adsgd => self.s_adsgd,
        }
    }
}

/// `s_ij^k` for every update `k` and every `j ∈ N̄_{i_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct StalenessTable {
    pub index: Vec<VirtualIndex>,
    /// Virtual indices of each agent's updates, ascending.
    pub updates_of: Vec<Vec<u64>>,
    pub records: Vec<StalenessRecord>,
    /// `records[offsets[k]..offsets[k + 1]]` belong to update `k`.
    pub offsets: Vec<usize>,
}

impl StalenessTable {
    pub fn at(&self, k: u64) -> &[StalenessRecord] {
        let k = k as usize;
        &self.records[self.offsets[k]..self.offsets[k + 1]]
    }

    pub fn lookup(&self, k: u64, i: usize, j: usize) -> Result<&StalenessRecord> {
        let v = self
            .index
            .get(k as usize)
            .ok_or_else(|| LabError::Audit(format!("no update with index {k}")))?;
        if v.agent != i {
            return Err(LabError::Audit(format!("update {k} belongs to agent {}, not {i}", v.agent)));
        }
        self.at(k)
            .iter()
            .find(|r| r.j == j)
            .ok_or_else(|| LabError::Audit(format!("agent {j} is not in the closed neighborhood of {i}")))
    }

    /// `max_k (k − s)` over all pairs.
    pub fn max_delay(&self, semantics: Semantics) -> u64 {
        self.records.iter().map(|r| r.k - r.s(semantics)).max().unwrap_or(0)
    }
}

fn ordered(trace: &EventTrace) -> Result<std::borrow::Cow<'_, EventTrace>> {
    match trace.validate() {
        Ok(()) => Ok(std::borrow::Cow::Borrowed(trace)),
        Err(_) => {
            let mut t = trace.clone();
            t.iterates = None;
            t.normalize()?;
            Ok(std::borrow::Cow::Owned(t))
        }
    }
}

/// Assigns `k = 0, 1, …` to updates in `(time, seq)` order.
pub fn reconstruct_virtual_index(trace: &EventTrace) -> Result<Vec<VirtualIndex>> {
    let t = ordered(trace)?;
    Ok(t.records
        .iter()
        .enumerate()
        .filter(|(_, r)| r.kind == TraceKind::Update)
        .enumerate()
        .map(|(k, (pos, r))| VirtualIndex {
            k: k as u64,
            agent: r.agent,
            sim_time: r.time,
            record: pos,
        })
        .collect())
}

/// `min(k, index of j's next update after version v)`; version `v` counts
/// `j`'s committed updates.
fn staleness(updates_of_j: &[u64], version: u64, k: u64) -> u64 {
    updates_of_j.get(version as usize).map_or(k, |&next| next.min(k))
}

pub fn staleness_table(trace: &EventTrace) -> Result<StalenessTable> {
    if trace.mode == TraceMode::Replicated {
        return Err(LabError::Audit("staleness is undefined for replicated all-reduce traces".into()));
    }
    let t = ordered(trace)?;
    let n = t.n_agents;
    let index = reconstruct_virtual_index(&t)?;
    let mut updates_of = vec![Vec::new(); n];
    for v in &index {
        updates_of[v.agent].push(v.k);
    }
    let closed: Vec<Vec<usize>> = (0..n)
        .map(|i| {
            let mut c = t.neighbors[i].clone();
            c.push(i);
            c.sort_unstable();
            c.dedup();
            c
        })
        .collect();
    // view[i][j]: newest version of j delivered to i
    let mut view = vec![vec![0u64; n]; n];
    let mut start_view: Vec<Option<Vec<u64>>> = vec![None; n];
    let mut records = Vec::new();
    let mut offsets = vec![0];
    let mut k = 0u64;
    for r in &t.records {
        match r.kind {
            TraceKind::Arrival => {
                let src = r.src.unwrap_or(usize::MAX);
                let slot = &mut view[r.agent][src];
                *slot = (*slot).max(r.version);
            }
            TraceKind::ComputeStart => start_view[r.agent] = Some(view[r.agent].clone()),
            TraceKind::Update => {
                let i = r.agent;
                let snap = start_view[i]
                    .take()
                    .ok_or_else(|| LabError::Audit(format!("update {k} of agent {i} has no compute start")))?;
                for &j in &closed[i] {
                    let (s_asbcd, s_adsgd) = if j == i {
                        (k, k)
                    } else {
                        (
                            staleness(&updates_of[j], snap[j], k),
                            staleness(&updates_of[j], view[i][j], k),
                        )
                    };
                    records.push(StalenessRecord {
                        k,
                        i,
                        j,
                        s_asbcd,
                        s_adsgd,
                    });
                }
                offsets.push(records.len());
                k += 1;
            }
            TraceKind::SendStart => {}
        }
    }
    Ok(StalenessTable {
        index,
        updates_of,
        records,
        offsets,
    })
}

pub fn compute_s_adsgd(trace: &EventTrace, k: u64, i: usize, j: usize) -> Result<u64> {
    Ok(staleness_table(trace)?.lookup(k, i, j)?.s_adsgd)
}

pub fn compute_s_asbcd(trace: &EventTrace, k: u64, i: usize, j: usize) -> Result<u64> {
    Ok(staleness_table(trace)?.lookup(k, i, j)?.s_asbcd)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelayBounds {
    #[serde(rename = "B_measured")]
    pub b_measured: u64,
    #[serde(rename = "D_asbcd")]
    pub d_asbcd: u64,
    #[serde(rename = "D_adsgd")]
    pub d_adsgd: u64,
}

impl DelayBounds {
    pub fn d(&self, semantics: Semantics) -> u64 {
        match semantics {
            Semantics::Asbcd => self.d_asbcd,
            Semantics::Adsgd => self.d_adsgd,
        }
    }
}

/// Largest number of consecutive virtual indices an agent needs to update
/// once, counting the wait for its first update.
pub fn computation_bound(updates_of: &[Vec<u64>]) -> Result<u64> {
    let mut b = 0;
    for (i, u) in updates_of.iter().enumerate() {
        let first = *u
            .first()
            .ok_or_else(|| LabError::Audit(format!("agent {i} never updated; B is undefined")))?;
        b = b.max(first + 1);
        for w in u.windows(2) {
            b = b.max(w[1] - w[0]);
        }
    }
    Ok(b)
}

pub fn measure_bounds(trace: &EventTrace) -> Result<DelayBounds> {
    let table = staleness_table(trace)?;
    bounds_from_table(&table)
}

pub fn bounds_from_table(table: &StalenessTable) -> Result<DelayBounds> {
    Ok(DelayBounds {
        b_measured: computation_bound(&table.updates_of)?,
        d_asbcd: table.max_delay(Semantics::Asbcd),
        d_adsgd: table.max_delay(Semantics::Adsgd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::TraceRecord;

    fn round_robin(n: usize, rounds: usize) -> EventTrace {
        let nbrs = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        let mut t = EventTrace::new(nbrs, TraceMode::Async);
        let mut time = 0.0;
        for r in 0..rounds {
            for i in 0..n {
                let seq = t.next_seq();
                t.push(TraceRecord::compute_start(time, seq, i, r as u64));
                time += 1.0;
                let seq = t.next_seq();
                t.push(TraceRecord::update(time, seq, i, r as u64 + 1));
                for j in (0..n).filter(|&j| j != i) {
                    let seq = t.next_seq();
                    t.push(TraceRecord::arrival(time, seq, i, j, r as u64 + 1));
                }
            }
        }
        t
    }

    #[test]
    fn round_robin_has_b_equal_n_and_no_commit_delay() {
        let t = round_robin(3, 4);
        let b = measure_bounds(&t).unwrap();
        assert_eq!(b.b_measured, 3);
        assert_eq!(b.d_adsgd, 0);
        let idx = reconstruct_virtual_index(&t).unwrap();
        assert_eq!(idx.iter().map(|v| v.k).collect::<Vec<_>>(), (0..12).collect::<Vec<_>>());
    }

    #[test]
    fn agent_without_updates_is_an_error() {
        let mut t = round_robin(2, 1);
        t.neighbors.push(vec![]);
        t.n_agents = 3;
        assert!(measure_bounds(&t).is_err());
    }

    #[test]
    fn replicated_traces_have_no_staleness() {
        let mut t = round_robin(2, 1);
        t.mode = TraceMode::Replicated;
        assert!(staleness_table(&t).is_err());
    }
}
