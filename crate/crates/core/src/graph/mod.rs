//! Sparse undirected simple graphs, block-model samplers and short-cycle
//! statistics.

mod cycles;
mod sample;

use std::fmt::Write as _;
use std::io::BufRead;

use serde::Serialize;

use crate::error::{Error, Result};

pub use cycles::{count_cycles, cycle_poisson_check, CycleCounts, CyclePoissonReport, CycleRow, CycleStats};
pub use sample::{sample_er, sample_sbm, sample_sbm_fixed_m, FixedEdgeSample, LabeledSample};

/// A simple undirected graph on `0..n`. Edges are stored once as `(u, v)`
/// with `u < v`, sorted; adjacency lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Graph {
    n: usize,
    edges: Vec<(u32, u32)>,
    #[serde(skip)]
    adjacency: Vec<Vec<u32>>,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from arbitrary pairs: self-loops are dropped and
    /// duplicate pairs collapsed. Endpoints must lie in `0..n`.
    pub fn from_edges<I>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n > u32::MAX as usize {
            return Err(Error::InvalidInput(format!("n = {n} exceeds u32 vertex ids")));
        }
        let mut edges = Vec::new();
        for (u, v) in pairs {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("edge ({u}, {v}) has an endpoint outside 0..{n}")));
            }
            if u != v {
                edges.push((u.min(v) as u32, u.max(v) as u32));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        Ok(Self::from_sorted_unique(n, edges))
    }

    pub(crate) fn from_sorted_unique(n: usize, edges: Vec<(u32, u32)>) -> Self {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in &edges {
            adjacency[u as usize].push(v);
            adjacency[v as usize].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Self { n, edges, adjacency }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[u32] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adjacency[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&(v as u32)).is_ok()
    }

    pub fn mean_degree(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            2.0 * self.edges.len() as f64 / self.n as f64
        }
    }

    /// Edge-list text: a `# n=<n>` header then one `u v` line per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(16 + 12 * self.edges.len());
        let _ = writeln!(out, "# n={}", self.n);
        for &(u, v) in &self.edges {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    /// Parses the edge-list format. Blank lines and other `#` comments are
    /// ignored; the `# n=` header is required.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Self> {
        let mut n = None;
        let mut pairs = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(value) = rest.trim().strip_prefix("n=") {
                    let parsed = value
                        .trim()
                        .parse::<usize>()
                        .map_err(|e| Error::Parse(format!("line {}: bad vertex count: {e}", lineno + 1)))?;
                    n = Some(parsed);
                }
                continue;
            }
            let mut it = line.split_whitespace();
            let mut field = |name: &str| -> Result<usize> {
                it.next()
                    .ok_or_else(|| Error::Parse(format!("line {}: missing {name}", lineno + 1)))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let u = field("u")?;
            let v = field("v")?;
            pairs.push((u, v));
        }
        let n = n.ok_or_else(|| Error::Parse("missing `# n=<n>` header".into()))?;
        Self::from_edges(n, pairs)
    }

    pub fn parse_edge_list(text: &str) -> Result<Self> {
        Self::read_edge_list(text.as_bytes())
    }
}
