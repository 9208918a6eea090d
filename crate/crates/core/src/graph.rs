//! Communication topologies and symmetric stochastic mixing matrices.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyKind {
    Grid,
    Ring,
    Complete,
    Line,
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TopologyKind::Grid => "grid",
            TopologyKind::Ring => "ring",
            TopologyKind::Complete => "complete",
            TopologyKind::Line => "line",
            TopologyKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

impl FromStr for TopologyKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "grid" => Ok(Self::Grid),
            "ring" => Ok(Self::Ring),
            "complete" => Ok(Self::Complete),
            "line" => Ok(Self::Line),
            "custom" => Ok(Self::Custom),
            other => Err(LabError::Topology(format!("unknown topology kind `{other}`"))),
        }
    }
}

/// Undirected connected graph without self-loops.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Topology {
    /// Validates and builds a topology from an undirected edge list.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(LabError::Topology("graph needs at least one node".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(LabError::Topology(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(LabError::Topology(format!("edge ({a}, {b}) out of range for n={n}")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &set {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for nb in &mut neighbors {
            nb.sort_unstable();
        }
        let topo = Self {
            n,
            edges: set,
            neighbors,
        };
        if !topo.is_connected() {
            return Err(LabError::Topology("graph is disconnected".into()));
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    /// Neighbors in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn neighbor_lists(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &self.neighbors[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }
}

pub fn build_topology(kind: TopologyKind, n: usize) -> Result<Topology> {
    match kind {
        TopologyKind::Grid => {
            let side = (n as f64).sqrt().round() as usize;
            if side * side != n || n == 0 {
                return Err(LabError::Topology(format!("grid needs a perfect square, got n={n}")));
            }
            let mut edges = Vec::new();
            for r in 0..side {
                for c in 0..side {
                    let v = r * side + c;
                    if c + 1 < side {
                        edges.push((v, v + 1));
                    }
                    if r + 1 < side {
                        edges.push((v, v + side));
                    }
                }
            }
            Topology::from_edges(n, edges)
        }
        TopologyKind::Ring => {
            if n < 3 {
                return Err(LabError::Topology(format!("ring needs n ≥ 3, got n={n}")));
            }
            Topology::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
        }
        TopologyKind::Complete => {
            if n < 2 {
                return Err(LabError::Topology(format!("complete graph needs n ≥ 2, got n={n}")));
            }
            Topology::from_edges(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        TopologyKind::Line => Topology::from_edges(n, (1..n).map(|i| (i - 1, i))),
        TopologyKind::Custom => Err(LabError::Topology(
            "custom topologies are built from an edge list".into(),
        )),
    }
}

/// Parses `i j` pairs, one per line, zero-based; `#` starts a comment.
/// With `n = None` the node count is one past the largest index.
pub fn parse_edge_list(text: &str, n: Option<usize>) -> Result<Topology> {
    let mut edges = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(LabError::Topology(format!(
                "line {}: expected `i j`, got `{line}`",
                lineno + 1
            )));
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| LabError::Topology(format!("line {}: {e}", lineno + 1)))
        };
        edges.push((parse(fields[0])?, parse(fields[1])?));
    }
    let inferred = edges.iter().map(|&(a, b)| a.max(b) + 1).max().unwrap_or(1);
    Topology::from_edges(n.unwrap_or(inferred), edges)
}

/// Symmetric stochastic matrix with cached `λ₂` and `λ_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct MixingMatrix {
    n: usize,
    w: Vec<f64>,
    lambda2: f64,
    lambda_min: f64,
}

const ROW_SUM_TOL: f64 = 1e-12;

impl MixingMatrix {
    /// Checks exact symmetry, nonnegativity and unit row sums.
    pub fn from_dense(n: usize, w: Vec<f64>) -> Result<Self> {
        if w.len() != n * n || n == 0 {
            return Err(LabError::Mixing(format!("expected {n}×{n} entries, got {}", w.len())));
        }
        for i in 0..n {
            let mut sum = 0.0;
            for j in 0..n {
                let v = w[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(LabError::Mixing(format!("entry ({i},{j}) = {v} is not a nonnegative number")));
                }
                if v != w[j * n + i] {
                    return Err(LabError::Mixing(format!("asymmetric at ({i},{j})")));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(LabError::Mixing(format!("row {i} sums to {sum}")));
            }
        }
        let (lambda2, lambda_min) = spectral_quantities(n, &w)?;
        Ok(Self {
            n,
            w,
            lambda2,
            lambda_min,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.w[i * self.n..(i + 1) * self.n]
    }

    pub fn dense(&self) -> &[f64] {
        &self.w
    }

    pub fn lambda2(&self) -> f64 {
        self.lambda2
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    /// `1 − λ₂(W)`
    pub fn spectral_gap(&self) -> f64 {
        1.0 - self.lambda2
    }

    /// Off-diagonal support is contained in the topology's edge set.
    pub fn respects(&self, topology: &Topology) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| i == j || self.get(i, j) == 0.0 || topology.has_edge(i, j)))
    }

    /// `y = W x` for a stacked `n × d` state, rows summed in ascending column order.
    pub fn apply(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| {
                let d = x[i].len();
                let mut out = vec![0.0; d];
                for j in 0..self.n {
                    let w = self.get(i, j);
                    if w != 0.0 {
                        for k in 0..d {
                            out[k] += w * x[j][k];
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// `w_ij = 1 / (1 + max(deg_i, deg_j))` on edges, remainder on the diagonal.
pub fn metropolis_weights(topology: &Topology) -> Result<MixingMatrix> {
    let n = topology.n();
    let mut w = vec![0.0; n * n];
    for &(a, b) in topology.edges() {
        let v = 1.0 / (1.0 + topology.degree(a).max(topology.degree(b)) as f64);
        w[a * n + b] = v;
        w[b * n + a] = v;
    }
    for i in 0..n {
        let off: f64 = topology.neighbors(i).iter().map(|&j| w[i * n + j]).sum();
        w[i * n + i] = 1.0 - off;
    }
    MixingMatrix::from_dense(n, w)
}

/// `W̃ = (1 − β/α) I + (β/α) W`, the weights of the double-step-size update.
pub fn double_step_transform(w: &MixingMatrix, alpha: f64, beta: f64) -> Result<MixingMatrix> {
    if !(alpha > 0.0) || !(beta > 0.0) {
        return Err(LabError::Mixing(format!("step sizes must be positive (alpha={alpha}, beta={beta})")));
    }
    if beta > alpha {
        return Err(LabError::Mixing(format!(
            "beta={beta} exceeds alpha={alpha}: the diagonal 1 − β/α + (β/α)w_ii can turn negative"
        )));
    }
    let r = beta / alpha;
    let n = w.n();
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = if i == j {
                (1.0 - r) + r * w.get(i, i)
            } else {
                r * w.get(i, j)
            };
        }
    }
    MixingMatrix::from_dense(n, out)
}

/// Second-largest and smallest eigenvalue of a symmetric matrix.
pub fn spectral_quantities(n: usize, w: &[f64]) -> Result<(f64, f64)> {
    if w.len() != n * n || n == 0 {
        return Err(LabError::Mixing(format!("expected {n}×{n} entries, got {}", w.len())));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if w[i * n + j] != w[j * n + i] {
                return Err(LabError::Mixing(format!("asymmetric at ({i},{j})")));
            }
        }
    }
    let m = DMatrix::from_row_slice(n, n, w);
    let mut eig: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().cloned().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    let lambda2 = if n >= 2 { eig[1] } else { eig[0] };
    let clamp = |v: f64| v.clamp(-1.0, 1.0);
    Ok((clamp(lambda2), clamp(eig[n - 1])))
}
