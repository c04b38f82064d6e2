//! Directed graphs for the Moran process, and generators for the superstar
//! family and the reference graphs (complete graphs and stars).
//!
//! Superstar vertices use a fixed index layout: vertex 0 is the centre, then
//! the leaves follow in order. Within a leaf the `m` reservoir vertices come
//! first and the `k - 2` chain vertices after them, so the leaf `i` block
//! starts at `1 + i * (m + k - 2)`. For `k = 2` there is no chain and the
//! block is just the reservoir.

use std::collections::VecDeque;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense vertex index in `[0, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId(pub usize);

impl VertexId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<usize> for VertexId {
    fn from(i: usize) -> Self {
        VertexId(i)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Structural class of a vertex. Leaf and chain positions are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Centre,
    Reservoir { leaf: usize },
    Chain { leaf: usize, position: usize },
    Plain,
}

/// Parameters `(k, leaves, reservoir)` of the superstar `S^k_{leaves,reservoir}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SuperstarSpec {
    pub k: usize,
    pub leaves: usize,
    pub reservoir: usize,
}

impl SuperstarSpec {
    pub fn new(k: usize, leaves: usize, reservoir: usize) -> Result<Self> {
        let spec = SuperstarSpec {
            k,
            leaves,
            reservoir,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 {
            return Err(Error::InvalidSpec(format!("k must be at least 2, got {}", self.k)));
        }
        if self.leaves < 1 {
            return Err(Error::InvalidSpec("need at least one leaf".into()));
        }
        if self.reservoir < 1 {
            return Err(Error::InvalidSpec("reservoir size must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of chain vertices per leaf (`k - 2`).
    pub fn chain_len(&self) -> usize {
        self.k - 2
    }

    /// Vertices per leaf block: reservoir plus chain.
    pub fn leaf_block(&self) -> usize {
        self.reservoir + self.chain_len()
    }

    pub fn vertex_count(&self) -> usize {
        1 + self.leaves * self.leaf_block()
    }

    pub fn arc_count(&self) -> usize {
        // k = 2 falls out of the same formula: 2*l*m arcs, no chain arcs.
        2 * self.leaves * self.reservoir + self.leaves * self.chain_len()
    }

    pub fn centre(&self) -> VertexId {
        VertexId(0)
    }

    pub fn reservoir_vertex(&self, leaf: usize, j: usize) -> VertexId {
        debug_assert!(leaf < self.leaves && j < self.reservoir);
        VertexId(1 + leaf * self.leaf_block() + j)
    }

    pub fn chain_vertex(&self, leaf: usize, position: usize) -> VertexId {
        debug_assert!(leaf < self.leaves && position < self.chain_len());
        VertexId(1 + leaf * self.leaf_block() + self.reservoir + position)
    }

    /// Role of a vertex, computed from the index layout alone.
    pub fn role_of(&self, v: VertexId) -> Role {
        if v.0 == 0 {
            return Role::Centre;
        }
        let offset = v.0 - 1;
        let leaf = offset / self.leaf_block();
        let within = offset % self.leaf_block();
        if within < self.reservoir {
            Role::Reservoir { leaf }
        } else {
            Role::Chain {
                leaf,
                position: within - self.reservoir,
            }
        }
    }
}

impl fmt::Display for SuperstarSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S^{}_{{{},{}}}", self.k, self.leaves, self.reservoir)
    }
}

/// Immutable directed graph in compressed adjacency form, with both
/// out- and in-neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    n: usize,
    out_offsets: Vec<usize>,
    out_targets: Vec<u32>,
    in_offsets: Vec<usize>,
    in_sources: Vec<u32>,
    roles: Option<Vec<Role>>,
}

fn compress(n: usize, lists: impl Iterator<Item = (usize, usize)>) -> (Vec<usize>, Vec<u32>) {
    let pairs: Vec<(usize, usize)> = lists.collect();
    let mut counts = vec![0usize; n + 1];
    for &(u, _) in &pairs {
        counts[u + 1] += 1;
    }
    for i in 0..n {
        counts[i + 1] += counts[i];
    }
    let mut fill = counts.clone();
    let mut targets = vec![0u32; pairs.len()];
    for (u, v) in pairs {
        targets[fill[u]] = v as u32;
        fill[u] += 1;
    }
    (counts, targets)
}

impl DirectedGraph {
    /// Builds a graph from an arc list. Arcs keep their input order within
    /// each source vertex. Duplicate arcs and self-loops are accepted here
    /// and reported by [`validate_graph`].
    pub fn from_arcs(n: usize, arcs: &[(usize, usize)]) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        if n > u32::MAX as usize {
            return Err(Error::InvalidGraph(format!("too many vertices: {n}")));
        }
        if let Some(&(u, v)) = arcs.iter().find(|&&(u, v)| u >= n || v >= n) {
            return Err(Error::InvalidGraph(format!("arc ({u}, {v}) out of range for n = {n}")));
        }
        let (out_offsets, out_targets) = compress(n, arcs.iter().copied());
        let (in_offsets, in_sources) = compress(n, arcs.iter().map(|&(u, v)| (v, u)));
        Ok(DirectedGraph {
            n,
            out_offsets,
            out_targets,
            in_offsets,
            in_sources,
            roles: None,
        })
    }

    pub fn with_roles(mut self, roles: Vec<Role>) -> Result<Self> {
        if roles.len() != self.n {
            return Err(Error::InvalidGraph(format!(
                "{} role tags for {} vertices",
                roles.len(),
                self.n
            )));
        }
        self.roles = Some(roles);
        Ok(self)
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn arc_count(&self) -> usize {
        self.out_targets.len()
    }

    #[inline]
    pub fn out_neighbors(&self, v: usize) -> &[u32] {
        &self.out_targets[self.out_offsets[v]..self.out_offsets[v + 1]]
    }

    /// Arc ids of `v`'s out-arcs. Arc ids are dense in `[0, arc_count)`,
    /// grouped by source in vertex order, matching [`DirectedGraph::arcs`].
    #[inline]
    pub fn out_arc_range(&self, v: usize) -> std::ops::Range<usize> {
        self.out_offsets[v]..self.out_offsets[v + 1]
    }

    #[inline]
    pub fn in_neighbors(&self, v: usize) -> &[u32] {
        &self.in_sources[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    #[inline]
    pub fn out_degree(&self, v: usize) -> usize {
        self.out_offsets[v + 1] - self.out_offsets[v]
    }

    pub fn in_degree(&self, v: usize) -> usize {
        self.in_offsets[v + 1] - self.in_offsets[v]
    }

    pub fn role(&self, v: VertexId) -> Role {
        self.roles.as_ref().map_or(Role::Plain, |r| r[v.0])
    }

    pub fn roles(&self) -> Option<&[Role]> {
        self.roles.as_deref()
    }

    pub fn arcs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.out_neighbors(u).iter().map(move |&v| (u, v as usize)))
    }

    pub fn has_arc(&self, u: usize, v: usize) -> bool {
        self.out_neighbors(u).contains(&(v as u32))
    }

    /// Debug dump: a header line `n <count>` then one `u v` line per arc.
    pub fn to_arc_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "n {}", self.n);
        for (u, v) in self.arcs() {
            let _ = writeln!(out, "{u} {v}");
        }
        out
    }

    pub fn from_arc_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty arc list".into()))?;
        let n = match header.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["n", count] => count
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad vertex count {count:?}: {e}")))?,
            _ => return Err(Error::Parse(format!("expected header `n <count>`, got {header:?}"))),
        };
        let mut arcs = Vec::new();
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            let [u, v] = parts.as_slice() else {
                return Err(Error::Parse(format!("expected `u v`, got {line:?}")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad vertex {s:?}: {e}")))
            };
            arcs.push((parse(u)?, parse(v)?));
        }
        DirectedGraph::from_arcs(n, &arcs)
    }
}

/// Superstar `S^k_{l,m}`. For `k = 2` this is the star `K_{1,lm}` with arcs
/// in both directions between the centre and every reservoir vertex.
pub fn build_superstar(spec: SuperstarSpec) -> Result<DirectedGraph> {
    spec.validate()?;
    let n = spec.vertex_count();
    let centre = spec.centre().0;
    let mut arcs = Vec::with_capacity(spec.arc_count());
    for leaf in 0..spec.leaves {
        for j in 0..spec.reservoir {
            arcs.push((centre, spec.reservoir_vertex(leaf, j).0));
        }
    }
    for leaf in 0..spec.leaves {
        let head = if spec.k == 2 {
            centre
        } else {
            spec.chain_vertex(leaf, 0).0
        };
        for j in 0..spec.reservoir {
            arcs.push((spec.reservoir_vertex(leaf, j).0, head));
        }
        if spec.k >= 3 {
            for pos in 0..spec.chain_len() - 1 {
                arcs.push((spec.chain_vertex(leaf, pos).0, spec.chain_vertex(leaf, pos + 1).0));
            }
            arcs.push((spec.chain_vertex(leaf, spec.chain_len() - 1).0, centre));
        }
    }
    let roles = (0..n).map(|v| spec.role_of(VertexId(v))).collect();
    DirectedGraph::from_arcs(n, &arcs)?.with_roles(roles)
}

pub fn build_complete(n: usize) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("complete graph needs n >= 2, got {n}")));
    }
    let arcs: Vec<(usize, usize)> = (0..n)
        .flat_map(|u| (0..n).filter(move |&v| v != u).map(move |v| (u, v)))
        .collect();
    DirectedGraph::from_arcs(n, &arcs)?.with_roles(vec![Role::Plain; n])
}

/// Star on `n` vertices: vertex 0 is the centre, all other vertices are
/// leaves joined to it in both directions.
pub fn build_star(n: usize) -> Result<DirectedGraph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("star needs n >= 2, got {n}")));
    }
    let mut arcs: Vec<(usize, usize)> = (1..n).map(|v| (0, v)).collect();
    arcs.extend((1..n).map(|v| (v, 0)));
    let mut roles = vec![Role::Reservoir { leaf: 0 }; n];
    roles[0] = Role::Centre;
    DirectedGraph::from_arcs(n, &arcs)?.with_roles(roles)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub vertex_count: usize,
    pub arc_count: usize,
    pub min_out_degree: usize,
    pub zero_out_degree: Vec<usize>,
    pub self_loops: Vec<usize>,
    pub duplicate_arcs: Vec<(usize, usize)>,
    pub strongly_connected: bool,
}

impl ValidationReport {
    /// Whether the Moran process is well defined and absorbs on this graph.
    pub fn is_valid_for_process(&self) -> bool {
        self.zero_out_degree.is_empty() && self.strongly_connected
    }

    /// All checks pass, including the structural ones generators must meet.
    pub fn is_clean(&self) -> bool {
        self.is_valid_for_process() && self.self_loops.is_empty() && self.duplicate_arcs.is_empty()
    }
}

fn reaches_all(n: usize, neighbors: impl Fn(usize) -> Vec<usize>) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0usize]);
    seen[0] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for v in neighbors(u) {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == n
}

pub fn validate_graph(g: &DirectedGraph) -> ValidationReport {
    let n = g.vertex_count();
    let mut zero_out_degree = Vec::new();
    let mut self_loops = Vec::new();
    let mut duplicate_arcs = Vec::new();
    let mut min_out_degree = usize::MAX;
    for u in 0..n {
        let out = g.out_neighbors(u);
        min_out_degree = min_out_degree.min(out.len());
        if out.is_empty() {
            zero_out_degree.push(u);
        }
        if out.contains(&(u as u32)) {
            self_loops.push(u);
        }
        let mut sorted = out.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] && duplicate_arcs.last() != Some(&(u, w[0] as usize)) {
                duplicate_arcs.push((u, w[0] as usize));
            }
        }
    }
    let forward = reaches_all(n, |u| g.out_neighbors(u).iter().map(|&v| v as usize).collect());
    let backward = reaches_all(n, |u| g.in_neighbors(u).iter().map(|&v| v as usize).collect());
    ValidationReport {
        vertex_count: n,
        arc_count: g.arc_count(),
        min_out_degree,
        zero_out_degree,
        self_loops,
        duplicate_arcs,
        strongly_connected: forward && backward,
    }
}
