//! Two-layer network construction: random-graph generators for the four
//! topology families, row-normalized communication weights, and edge-list I/O.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance for the per-row weight normalization `sum_j |w_ij| = 1`.
pub const ROW_SUM_TOL: f64 = 1e-12;

/// Restart budget for the configuration-model pairing before giving up.
pub const RR_MAX_RESTARTS: usize = 100;

/// Consecutive rejected stub pairs before running the exhaustive deadlock scan.
const RR_STALL_CHECK: usize = 64;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("invalid topology spec: {0}")]
    InvalidSpec(String),
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("node {node} out of range for n = {n}")]
    NodeOutOfRange { node: usize, n: usize },
    #[error("{family} generation failed after {attempts} restarts")]
    GenerationFailed { family: GraphFamily, attempts: usize },
    #[error("node {0} is isolated; random-walk weights are undefined")]
    IsolatedNode(usize),
    #[error("row {row} has |w| sum {sum} (must be 1 within {ROW_SUM_TOL})")]
    RowNotNormalized { row: usize, sum: f64 },
    #[error("layers disagree on node count: {0} vs {1}")]
    NodeCountMismatch(usize, usize),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The four random-graph families used for either layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphFamily {
    /// Regular random graph via the configuration model with restarts.
    #[serde(alias = "regular_random")]
    Rr,
    /// Uniform graph with a fixed edge count (Erdos-Renyi G(n, m)).
    #[serde(alias = "erdos_renyi")]
    Er,
    /// Watts-Strogatz small world: ring lattice plus random rewiring.
    #[serde(alias = "watts_strogatz")]
    Ws,
    /// Barabasi-Albert preferential attachment.
    #[serde(alias = "barabasi_albert")]
    Ba,
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GraphFamily::Rr => "rr",
            GraphFamily::Er => "er",
            GraphFamily::Ws => "ws",
            GraphFamily::Ba => "ba",
        };
        f.write_str(s)
    }
}

/// Parameters defining one layer's topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TopologySpec {
    pub family: GraphFamily,
    /// Node count.
    pub n: usize,
    /// Target (average) degree.
    pub d: usize,
    /// Rewiring probability; required for WS, rejected elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl TopologySpec {
    pub fn new(family: GraphFamily, n: usize, d: usize, p: Option<f64>) -> Self {
        TopologySpec { family, n, d, p }
    }

    /// Family-specific structural preconditions.
    pub fn validate(&self) -> Result<(), GraphError> {
        let err = |msg: String| Err(GraphError::InvalidSpec(msg));
        if self.n < 2 {
            return err(format!("n = {} but at least 2 nodes are required", self.n));
        }
        if self.d < 1 || self.d >= self.n {
            return err(format!("d = {} must satisfy 1 <= d < n = {}", self.d, self.n));
        }
        match self.family {
            GraphFamily::Rr => {
                if !(self.n * self.d).is_multiple_of(2) {
                    return err(format!("rr needs n*d even, got n = {} d = {}", self.n, self.d));
                }
            }
            GraphFamily::Er => {
                if !(self.n * self.d).is_multiple_of(2) {
                    return err(format!("er needs n*d even, got n = {} d = {}", self.n, self.d));
                }
                let m = self.n * self.d / 2;
                if m > self.n * (self.n - 1) / 2 {
                    return err(format!("er edge budget {} exceeds the complete graph", m));
                }
            }
            GraphFamily::Ws => {
                if !self.d.is_multiple_of(2) {
                    return err(format!("ws needs even d, got {}", self.d));
                }
                match self.p {
                    None => return err("ws needs a rewiring probability p".into()),
                    Some(p) if !(0.0..=1.0).contains(&p) => {
                        return err(format!("ws rewiring probability p = {p} outside [0, 1]"));
                    }
                    _ => {}
                }
            }
            GraphFamily::Ba => {
                if !self.d.is_multiple_of(2) {
                    return err(format!("ba needs even d, got {}", self.d));
                }
                if self.n < self.d + 1 {
                    return err(format!("ba needs n >= d+1, got n = {} d = {}", self.n, self.d));
                }
            }
        }
        if self.p.is_some() && self.family != GraphFamily::Ws {
            return err(format!("p is only meaningful for ws, not {}", self.family));
        }
        Ok(())
    }

    /// Generates a realization of this spec from the given random source.
    pub fn generate<R: Rng>(&self, rng: &mut R) -> Result<InfluenceLayer, GraphError> {
        match self.family {
            GraphFamily::Rr => generate_rr(self, rng),
            GraphFamily::Er => generate_er(self, rng),
            GraphFamily::Ws => generate_ws(self, rng),
            GraphFamily::Ba => generate_ba(self, rng),
        }
    }
}

/// Undirected, unweighted simple graph stored as a canonical edge list plus
/// CSR adjacency. Used directly as the influence layer and as the raw graph
/// underlying the communication layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InfluenceLayer {
    n: usize,
    edges: Vec<(u32, u32)>,
    offsets: Vec<u32>,
    adjacency: Vec<u32>,
    min_degree: usize,
}

impl InfluenceLayer {
    /// Builds a layer from an edge list, normalizing pair order and rejecting
    /// self-loops, duplicates, and out-of-range endpoints.
    pub fn from_edges(n: usize, edges: Vec<(u32, u32)>) -> Result<Self, GraphError> {
        let mut canon = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(GraphError::SelfLoop(a as usize));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if v as usize >= n {
                return Err(GraphError::NodeOutOfRange { node: v as usize, n });
            }
            canon.push((u, v));
        }
        canon.sort_unstable();
        for w in canon.windows(2) {
            if w[0] == w[1] {
                return Err(GraphError::DuplicateEdge(w[0].0 as usize, w[0].1 as usize));
            }
        }

        let mut degrees = vec![0u32; n];
        for &(u, v) in &canon {
            degrees[u as usize] += 1;
            degrees[v as usize] += 1;
        }
        let mut offsets = vec![0u32; n + 1];
        for i in 0..n {
            offsets[i + 1] = offsets[i] + degrees[i];
        }
        let mut cursor = offsets.clone();
        let mut adjacency = vec![0u32; 2 * canon.len()];
        for &(u, v) in &canon {
            adjacency[cursor[u as usize] as usize] = v;
            cursor[u as usize] += 1;
            adjacency[cursor[v as usize] as usize] = u;
            cursor[v as usize] += 1;
        }
        // edges are sorted, so each adjacency run is already ascending
        let min_degree = degrees.iter().copied().min().unwrap_or(0) as usize;

        Ok(InfluenceLayer { n, edges: canon, offsets, adjacency, min_degree })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Canonical edge list, sorted with u < v per pair.
    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn degree(&self, i: usize) -> usize {
        (self.offsets[i + 1] - self.offsets[i]) as usize
    }

    pub fn min_degree(&self) -> usize {
        self.min_degree
    }

    pub fn degrees(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).map(move |i| self.degree(i))
    }

    /// Neighbors of `i` in ascending order.
    pub fn neighbors(&self, i: usize) -> &[u32] {
        &self.adjacency[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&(v as u32)).is_ok()
    }

    /// True iff every node is reachable from every other (BFS from node 0).
    pub fn is_connected(&self) -> bool {
        if self.n <= 1 {
            return true;
        }
        let mut seen = vec![false; self.n];
        let mut queue = Vec::with_capacity(self.n);
        seen[0] = true;
        queue.push(0u32);
        let mut reached = 1usize;
        while let Some(u) = queue.pop() {
            for &v in self.neighbors(u as usize) {
                if !seen[v as usize] {
                    seen[v as usize] = true;
                    reached += 1;
                    queue.push(v);
                }
            }
        }
        reached == self.n
    }
}

fn ordered(a: u32, b: u32) -> (u32, u32) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Regular random graph: configuration model with uniform stub pairing,
/// restarting the whole pairing whenever no valid stub pair remains.
pub fn generate_rr<R: Rng>(spec: &TopologySpec, rng: &mut R) -> Result<InfluenceLayer, GraphError> {
    let (layer, _restarts) = generate_rr_counting(spec, rng)?;
    Ok(layer)
}

/// Same as [`generate_rr`] but reports how many restarts the pairing needed.
pub fn generate_rr_counting<R: Rng>(
    spec: &TopologySpec,
    rng: &mut R,
) -> Result<(InfluenceLayer, usize), GraphError> {
    expect_family(spec, GraphFamily::Rr)?;
    spec.validate()?;
    for restart in 0..RR_MAX_RESTARTS {
        if let Some(edges) = try_pair_stubs(spec.n, spec.d, rng) {
            return Ok((InfluenceLayer::from_edges(spec.n, edges)?, restart));
        }
    }
    Err(GraphError::GenerationFailed { family: GraphFamily::Rr, attempts: RR_MAX_RESTARTS })
}

fn try_pair_stubs<R: Rng>(n: usize, d: usize, rng: &mut R) -> Option<Vec<(u32, u32)>> {
    let mut stubs: Vec<u32> = (0..n as u32).flat_map(|i| std::iter::repeat_n(i, d)).collect();
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(n * d / 2);
    let mut edges = Vec::with_capacity(n * d / 2);

    while !stubs.is_empty() {
        let mut rejects = 0;
        loop {
            let a = rng.gen_range(0..stubs.len());
            let b = rng.gen_range(0..stubs.len());
            let (u, v) = (stubs[a], stubs[b]);
            if a != b && u != v && !seen.contains(&ordered(u, v)) {
                let e = ordered(u, v);
                seen.insert(e);
                edges.push(e);
                let (hi, lo) = if a > b { (a, b) } else { (b, a) };
                stubs.swap_remove(hi);
                stubs.swap_remove(lo);
                break;
            }
            rejects += 1;
            if rejects >= RR_STALL_CHECK {
                if !stub_pair_exists(&stubs, &seen) {
                    return None; // deadlocked: restart from scratch
                }
                rejects = 0;
            }
        }
    }
    Some(edges)
}

fn stub_pair_exists(stubs: &[u32], seen: &HashSet<(u32, u32)>) -> bool {
    let mut nodes: Vec<u32> = stubs.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            if !seen.contains(&ordered(u, v)) {
                return true;
            }
        }
    }
    false
}

/// Uniform graph with exactly n*d/2 edges, sampled by repeated uniform pair
/// draws with duplicate rejection.
pub fn generate_er<R: Rng>(spec: &TopologySpec, rng: &mut R) -> Result<InfluenceLayer, GraphError> {
    expect_family(spec, GraphFamily::Er)?;
    spec.validate()?;
    let n = spec.n as u32;
    let m = spec.n * spec.d / 2;
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(m);
    let mut edges = Vec::with_capacity(m);
    while edges.len() < m {
        let u = rng.gen_range(0..n);
        let v = rng.gen_range(0..n);
        if u == v {
            continue;
        }
        let e = ordered(u, v);
        if seen.insert(e) {
            edges.push(e);
        }
    }
    InfluenceLayer::from_edges(spec.n, edges)
}

/// Watts-Strogatz small world: ring lattice with d/2 neighbors per side, then
/// each edge independently rewired with probability p by substituting one
/// randomly chosen endpoint with a uniform node among the other n-2, skipping
/// substitutions that would duplicate an existing edge.
pub fn generate_ws<R: Rng>(spec: &TopologySpec, rng: &mut R) -> Result<InfluenceLayer, GraphError> {
    expect_family(spec, GraphFamily::Ws)?;
    spec.validate()?;
    let n = spec.n as u32;
    let half = spec.d / 2;
    let p = spec.p.expect("validated above");

    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(spec.n * half);
    let mut seen: HashSet<(u32, u32)> = HashSet::with_capacity(spec.n * half);
    for k in 1..=half as u32 {
        for i in 0..n {
            let e = ordered(i, (i + k) % n);
            seen.insert(e);
            edges.push(e);
        }
    }

    for edge in edges.iter_mut() {
        if rng.gen::<f64>() >= p {
            continue;
        }
        let (u, v) = *edge;
        let keep = if rng.gen_range(0..2u8) == 0 { v } else { u };
        // up to n target draws, then the original edge is kept
        for _ in 0..spec.n {
            let w = loop {
                let c = rng.gen_range(0..n);
                if c != u && c != v {
                    break c;
                }
            };
            let candidate = ordered(keep, w);
            if !seen.contains(&candidate) {
                seen.remove(&(u, v));
                seen.insert(candidate);
                *edge = candidate;
                break;
            }
        }
    }
    InfluenceLayer::from_edges(spec.n, edges)
}

/// Barabasi-Albert preferential attachment: complete seed graph on d+1 nodes,
/// then each new node attaches to d/2 distinct existing nodes with probability
/// proportional to their degree at the start of the attachment round.
pub fn generate_ba<R: Rng>(spec: &TopologySpec, rng: &mut R) -> Result<InfluenceLayer, GraphError> {
    expect_family(spec, GraphFamily::Ba)?;
    spec.validate()?;
    let m0 = spec.d + 1;
    let half = spec.d / 2;

    let mut edges: Vec<(u32, u32)> = Vec::new();
    for u in 0..m0 as u32 {
        for v in (u + 1)..m0 as u32 {
            edges.push((u, v));
        }
    }
    // one entry per unit of degree; seed nodes start with degree d
    let mut targets: Vec<u32> =
        (0..m0 as u32).flat_map(|i| std::iter::repeat_n(i, spec.d)).collect();

    let mut round: Vec<u32> = Vec::with_capacity(half);
    for new in m0 as u32..spec.n as u32 {
        round.clear();
        while round.len() < half {
            let t = targets[rng.gen_range(0..targets.len())];
            if !round.contains(&t) {
                round.push(t);
            }
        }
        for &t in &round {
            edges.push(ordered(new, t));
            targets.push(t);
        }
        targets.extend(std::iter::repeat_n(new, half));
    }
    InfluenceLayer::from_edges(spec.n, edges)
}

fn expect_family(spec: &TopologySpec, family: GraphFamily) -> Result<(), GraphError> {
    if spec.family != family {
        return Err(GraphError::InvalidSpec(format!(
            "spec family is {} but the {} generator was called",
            spec.family, family
        )));
    }
    Ok(())
}

/// Sparse row-normalized weight matrix over n nodes. Row sums of absolute
/// weights are 1 within [`ROW_SUM_TOL`]; self-loops are permitted.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunicationLayer {
    n: usize,
    offsets: Vec<u32>,
    cols: Vec<u32>,
    weights: Vec<f64>,
}

impl CommunicationLayer {
    /// Builds a layer from per-row (column, weight) entries. Zero weights are
    /// dropped; every remaining row must satisfy the normalization invariant.
    pub fn from_rows(n: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self, GraphError> {
        if rows.len() != n {
            return Err(GraphError::NodeCountMismatch(n, rows.len()));
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut weights = Vec::new();
        offsets.push(0u32);
        for (i, mut row) in rows.into_iter().enumerate() {
            row.retain(|&(_, w)| w != 0.0);
            row.sort_unstable_by_key(|&(j, _)| j);
            let mut sum = 0.0;
            let mut prev: Option<u32> = None;
            for &(j, w) in &row {
                if j as usize >= n {
                    return Err(GraphError::NodeOutOfRange { node: j as usize, n });
                }
                if prev == Some(j) {
                    return Err(GraphError::DuplicateEdge(i, j as usize));
                }
                prev = Some(j);
                if !w.is_finite() {
                    return Err(GraphError::RowNotNormalized { row: i, sum: w });
                }
                sum += w.abs();
            }
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(GraphError::RowNotNormalized { row: i, sum });
            }
            for (j, w) in row {
                cols.push(j);
                weights.push(w);
            }
            offsets.push(cols.len() as u32);
        }
        Ok(CommunicationLayer { n, offsets, cols, weights })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Nonzero entries of row `i` as parallel (column, weight) slices.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let lo = self.offsets[i] as usize;
        let hi = self.offsets[i + 1] as usize;
        (&self.cols[lo..hi], &self.weights[lo..hi])
    }

    pub fn entries(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (cols, ws) = self.row(i);
        cols.iter().zip(ws).map(|(&j, &w)| (j as usize, w))
    }

    pub fn row_abs_sum(&self, i: usize) -> f64 {
        let (_, ws) = self.row(i);
        ws.iter().map(|w| w.abs()).sum()
    }

    /// Number of stored (directed) nonzero entries.
    pub fn entry_count(&self) -> usize {
        self.cols.len()
    }

    /// Returns a copy in which row `s` is the unit self-weight {s: 1}, so the
    /// opinion of `s` is a fixed point of the opinion update.
    pub fn make_stubborn(&self, s: usize) -> CommunicationLayer {
        assert!(s < self.n, "stubborn node {s} out of range for n = {}", self.n);
        let mut rows: Vec<Vec<(u32, f64)>> =
            (0..self.n).map(|i| self.entries(i).map(|(j, w)| (j as u32, w)).collect()).collect();
        rows[s] = vec![(s as u32, 1.0)];
        CommunicationLayer::from_rows(self.n, rows).expect("rows stay normalized")
    }
}

/// Simple-random-walk weights: w_ij = 1/deg(i) for each neighbor j of i.
pub fn build_random_walk_weights(graph: &InfluenceLayer) -> Result<CommunicationLayer, GraphError> {
    let n = graph.n();
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let nbrs = graph.neighbors(i);
        if nbrs.is_empty() {
            return Err(GraphError::IsolatedNode(i));
        }
        let w = 1.0 / nbrs.len() as f64;
        rows.push(nbrs.iter().map(|&j| (j, w)).collect());
    }
    CommunicationLayer::from_rows(n, rows)
}

/// The two coupled layers; both must cover the same node set.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLayerNetwork {
    influence: InfluenceLayer,
    communication: CommunicationLayer,
}

impl TwoLayerNetwork {
    pub fn new(
        influence: InfluenceLayer,
        communication: CommunicationLayer,
    ) -> Result<Self, GraphError> {
        if influence.n() != communication.n() {
            return Err(GraphError::NodeCountMismatch(influence.n(), communication.n()));
        }
        Ok(TwoLayerNetwork { influence, communication })
    }

    pub fn n(&self) -> usize {
        self.influence.n()
    }

    pub fn influence(&self) -> &InfluenceLayer {
        &self.influence
    }

    pub fn communication(&self) -> &CommunicationLayer {
        &self.communication
    }
}

/// Writes the `n=<int>` header plus one `i j` line per edge (0-based, i < j).
pub fn write_edge_list<W: Write>(graph: &InfluenceLayer, mut out: W) -> Result<(), GraphError> {
    writeln!(out, "n={}", graph.n())?;
    for &(u, v) in graph.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn read_edge_list<R: BufRead>(input: R) -> Result<InfluenceLayer, GraphError> {
    let mut lines = input.lines().enumerate();
    let n = parse_header(&mut lines)?;
    let mut edges = Vec::new();
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let u = parse_field(parts.next(), idx, "source node")?;
        let v = parse_field(parts.next(), idx, "target node")?;
        if parts.next().is_some() {
            return Err(GraphError::Parse { line: idx + 1, msg: "expected `i j`".into() });
        }
        edges.push((u, v));
    }
    InfluenceLayer::from_edges(n, edges)
}

/// Weighted variant: one `i j w_ij` line per directed nonzero row entry.
pub fn write_weight_list<W: Write>(
    layer: &CommunicationLayer,
    mut out: W,
) -> Result<(), GraphError> {
    writeln!(out, "n={}", layer.n())?;
    for i in 0..layer.n() {
        for (j, w) in layer.entries(i) {
            writeln!(out, "{i} {j} {w}")?;
        }
    }
    Ok(())
}

pub fn read_weight_list<R: BufRead>(input: R) -> Result<CommunicationLayer, GraphError> {
    let mut lines = input.lines().enumerate();
    let n = parse_header(&mut lines)?;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (idx, line) in lines {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let i: u32 = parse_field(parts.next(), idx, "row")?;
        let j: u32 = parse_field(parts.next(), idx, "column")?;
        let w: f64 = parse_field(parts.next(), idx, "weight")?;
        if parts.next().is_some() {
            return Err(GraphError::Parse { line: idx + 1, msg: "expected `i j w`".into() });
        }
        if i as usize >= n {
            return Err(GraphError::NodeOutOfRange { node: i as usize, n });
        }
        rows[i as usize].push((j, w));
    }
    CommunicationLayer::from_rows(n, rows)
}

fn parse_header(
    lines: &mut impl Iterator<Item = (usize, std::io::Result<String>)>,
) -> Result<usize, GraphError> {
    let (idx, line) = lines
        .next()
        .ok_or(GraphError::Parse { line: 1, msg: "missing `n=<int>` header".into() })?;
    let line = line?;
    let rest = line.trim().strip_prefix("n=").ok_or(GraphError::Parse {
        line: idx + 1,
        msg: "header must be `n=<int>`".into(),
    })?;
    rest.parse().map_err(|e| GraphError::Parse { line: idx + 1, msg: format!("bad n: {e}") })
}

fn parse_field<T: std::str::FromStr>(
    field: Option<&str>,
    idx: usize,
    what: &str,
) -> Result<T, GraphError>
where
    T::Err: fmt::Display,
{
    let s = field
        .ok_or_else(|| GraphError::Parse { line: idx + 1, msg: format!("missing {what}") })?;
    s.parse().map_err(|e| GraphError::Parse { line: idx + 1, msg: format!("bad {what}: {e}") })
}
