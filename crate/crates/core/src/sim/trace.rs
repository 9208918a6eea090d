//! Ordered event records produced by the engines, with CSV round-tripping.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::vector::ModelVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    ComputeStart,
    Update,
    SendStart,
    Arrival,
}

impl TraceKind {
    pub fn name(&self) -> &'static str {
        match self {
            TraceKind::ComputeStart => "compute_start",
            TraceKind::Update => "update",
            TraceKind::SendStart => "send_start",
            TraceKind::Arrival => "arrival",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "compute_start" => TraceKind::ComputeStart,
            "update" => TraceKind::Update,
            "send_start" => TraceKind::SendStart,
            "arrival" => TraceKind::Arrival,
            other => return Err(LabError::Trace(format!("unknown record kind `{other}`"))),
        })
    }
}

/// One trace line. `agent` is the acting agent: the sender for `SendStart`,
/// the receiver for `Arrival`. Versions count the owner's committed updates,
/// version 0 being the initial model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub time: f64,
    pub seq: u64,
    pub kind: TraceKind,
    pub agent: usize,
    pub src: Option<usize>,
    pub dst: Option<usize>,
    pub version: u64,
}

impl TraceRecord {
    pub fn compute_start(time: f64, seq: u64, agent: usize, version: u64) -> Self {
        Self {
            time,
            seq,
            kind: TraceKind::ComputeStart,
            agent,
            src: None,
            dst: None,
            version,
        }
    }

    pub fn update(time: f64, seq: u64, agent: usize, version: u64) -> Self {
        Self {
            time,
            seq,
            kind: TraceKind::Update,
            agent,
            src: None,
            dst: None,
            version,
        }
    }

    pub fn send_start(time: f64, seq: u64, src: usize, dst: usize, version: u64) -> Self {
        Self {
            time,
            seq,
            kind: TraceKind::SendStart,
            agent: src,
            src: Some(src),
            dst: Some(dst),
            version,
        }
    }

    pub fn arrival(time: f64, seq: u64, src: usize, dst: usize, version: u64) -> Self {
        Self {
            time,
            seq,
            kind: TraceKind::Arrival,
            agent: dst,
            src: Some(src),
            dst: Some(dst),
            version,
        }
    }
}

/// How the models in a trace relate to each other.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    /// Event-driven asynchronous agents.
    Async,
    /// Barrier rounds with a neighbor exchange.
    Rounds,
    /// Replicated model kept identical by all-reduce; staleness is undefined.
    Replicated,
}

impl TraceMode {
    fn name(&self) -> &'static str {
        match self {
            TraceMode::Async => "async",
            TraceMode::Rounds => "rounds",
            TraceMode::Replicated => "replicated",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "async" => TraceMode::Async,
            "rounds" => TraceMode::Rounds,
            "replicated" => TraceMode::Replicated,
            other => return Err(LabError::Trace(format!("unknown trace mode `{other}`"))),
        })
    }
}

/// Iterates kept alongside a trace for a window of virtual indices: all
/// models just before update `start_k`, then the active agent's model right
/// after each update from `start_k` on, in update order.
#[derive(Clone, Debug, PartialEq)]
pub struct IterateLog {
    pub start_k: u64,
    pub initial: Vec<ModelVector>,
    pub after_update: Vec<ModelVector>,
}

impl IterateLog {
    /// One past the last virtual index covered.
    pub fn end_k(&self) -> u64 {
        self.start_k + self.after_update.len() as u64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventTrace {
    pub n_agents: usize,
    pub neighbors: Vec<Vec<usize>>,
    pub mode: TraceMode,
    pub config_hash: Option<String>,
    pub records: Vec<TraceRecord>,
    pub iterates: Option<IterateLog>,
}

impl EventTrace {
    pub fn new(neighbors: Vec<Vec<usize>>, mode: TraceMode) -> Self {
        Self {
            n_agents: neighbors.len(),
            neighbors,
            mode,
            config_hash: None,
            records: Vec::new(),
            iterates: None,
        }
    }

    /// Records are numbered in processing order.
    pub fn next_seq(&self) -> u64 {
        self.records.len() as u64
    }

    pub fn push(&mut self, record: TraceRecord) {
        self.records.push(record);
    }

    pub fn updates(&self) -> impl Iterator<Item = &TraceRecord> {
        self.records.iter().filter(|r| r.kind == TraceKind::Update)
    }

    pub fn update_count(&self) -> usize {
        self.updates().count()
    }

    pub fn end_time(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.time)
    }

    /// Sorts by `(time, seq)` and checks structural consistency.
    pub fn normalize(&mut self) -> Result<()> {
        if self.iterates.is_some() && !self.is_ordered() {
            return Err(LabError::Trace("cannot reorder a trace that carries iterate snapshots".into()));
        }
        self.records
            .sort_by(|a, b| a.time.total_cmp(&b.time).then(a.seq.cmp(&b.seq)));
        self.validate()
    }

    fn is_ordered(&self) -> bool {
        self.records
            .windows(2)
            .all(|w| w[0].time.total_cmp(&w[1].time).then(w[0].seq.cmp(&w[1].seq)).is_lt())
    }

    pub fn validate(&self) -> Result<()> {
        if self.neighbors.len() != self.n_agents {
            return Err(LabError::Trace("neighbor table does not match agent count".into()));
        }
        if !self.is_ordered() {
            return Err(LabError::Trace("records are not strictly ordered by (time, seq)".into()));
        }
        let mut versions = vec![0u64; self.n_agents];
        for r in &self.records {
            if !r.time.is_finite() || r.time < 0.0 {
                return Err(LabError::Trace(format!("record seq {} has invalid time {}", r.seq, r.time)));
            }
            if r.agent >= self.n_agents {
                return Err(LabError::Trace(format!("record seq {} names unknown agent {}", r.seq, r.agent)));
            }
            match r.kind {
                TraceKind::Update => {
                    versions[r.agent] += 1;
                    if r.version != versions[r.agent] {
                        return Err(LabError::Trace(format!(
                            "agent {} update seq {} has version {}, expected {}",
                            r.agent, r.seq, r.version, versions[r.agent]
                        )));
                    }
                }
                TraceKind::SendStart | TraceKind::Arrival => {
                    let (Some(s), Some(d)) = (r.src, r.dst) else {
                        return Err(LabError::Trace(format!("message record seq {} lacks endpoints", r.seq)));
                    };
                    if s >= self.n_agents || d >= self.n_agents || s == d {
                        return Err(LabError::Trace(format!("message record seq {} has bad link {s}→{d}", r.seq)));
                    }
                    if r.version > versions[s] {
                        return Err(LabError::Trace(format!(
                            "record seq {} carries version {} of agent {s} before it exists",
                            r.seq, r.version
                        )));
                    }
                }
                TraceKind::ComputeStart => {}
            }
        }
        if let Some(log) = &self.iterates {
            if log.initial.len() != self.n_agents || log.end_k() > self.update_count() as u64 {
                return Err(LabError::Trace("iterate log does not match the update records".into()));
            }
        }
        Ok(())
    }

    /// Serializes records (never payloads) as CSV with `#` metadata lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.config_hash {
            let _ = writeln!(out, "# config_hash={h}");
        }
        let _ = writeln!(out, "# n_agents={}", self.n_agents);
        let _ = writeln!(out, "# mode={}", self.mode.name());
        let nbrs: Vec<String> = self
            .neighbors
            .iter()
            .map(|l| l.iter().map(|j| j.to_string()).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(out, "# neighbors={}", nbrs.join(";"));
        out.push_str("time,seq,kind,agent,src,dst,version\n");
        let opt = |v: Option<usize>| v.map_or(String::new(), |x| x.to_string());
        for r in &self.records {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.time,
                r.seq,
                r.kind.name(),
                r.agent,
                opt(r.src),
                opt(r.dst),
                r.version
            );
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut hash = None;
        let mut n = None;
        let mut mode = TraceMode::Async;
        let mut neighbors = None;
        let mut body = String::new();
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix('#') {
                let Some((k, v)) = meta.trim().split_once('=') else { continue };
                match k.trim() {
                    "config_hash" => hash = Some(v.trim().to_string()),
                    "n_agents" => {
                        n = Some(v.trim().parse::<usize>().map_err(|e| LabError::Trace(format!("n_agents: {e}")))?)
                    }
                    "mode" => mode = TraceMode::parse(v.trim())?,
                    "neighbors" => {
                        let lists = v
                            .split(';')
                            .map(|l| {
                                l.split_whitespace()
                                    .map(|t| t.parse::<usize>().map_err(|e| LabError::Trace(format!("neighbors: {e}"))))
                                    .collect::<Result<Vec<_>>>()
                            })
                            .collect::<Result<Vec<_>>>()?;
                        neighbors = Some(lists);
                    }
                    _ => {}
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let n = n.ok_or_else(|| LabError::Trace("missing `# n_agents=` header".into()))?;
        let neighbors = neighbors.unwrap_or_else(|| vec![Vec::new(); n]);
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body.as_bytes());
        let headers = reader.headers().map_err(|e| LabError::Trace(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["time", "seq", "kind", "agent", "src", "dst", "version"] {
            return Err(LabError::Trace(format!("unexpected trace header {headers:?}")));
        }
        let parse_opt = |s: &str| -> Result<Option<usize>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|e| LabError::Trace(format!("{e}")))
            }
        };
        let mut records = Vec::new();
        for row in reader.records() {
            let row = row.map_err(|e| LabError::Trace(e.to_string()))?;
            let bad = |what: &str| LabError::Trace(format!("bad {what} in row {:?}", row));
            records.push(TraceRecord {
                time: row[0].parse().map_err(|_| bad("time"))?,
                seq: row[1].parse().map_err(|_| bad("seq"))?,
                kind: TraceKind::parse(&row[2])?,
                agent: row[3].parse().map_err(|_| bad("agent"))?,
                src: parse_opt(&row[4])?,
                dst: parse_opt(&row[5])?,
                version: row[6].parse().map_err(|_| bad("version"))?,
            });
        }
        let mut trace = EventTrace {
            n_agents: n,
            neighbors,
            mode,
            config_hash: hash,
            records,
            iterates: None,
        };
        trace.normalize()?;
        Ok(trace)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}
