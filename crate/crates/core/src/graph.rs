//! Colored directed graphs and vertex sets.
//!
//! Vertices are `0..n` internally. Everything that leaves the crate (JSON,
//! DOT, `Display`) uses 1-based labels so traces can be compared with
//! hand-drawn figures directly.

use std::fmt;
use std::ops::{BitAnd, BitOr, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::bipartite::ColoredBipartite;

pub type Vertex = usize;
pub type ColorId = usize;

/// Largest supported vertex count; vertex sets are `u64` bitmasks.
pub const MAX_VERTICES: usize = 62;

/// A set of vertices stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct VertexSet(u64);

impl VertexSet {
    pub const fn empty() -> Self {
        VertexSet(0)
    }

    /// `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_VERTICES);
        if n == 0 {
            VertexSet(0)
        } else {
            VertexSet(u64::MAX >> (64 - n))
        }
    }

    pub fn singleton(v: Vertex) -> Self {
        VertexSet(1 << v)
    }

    pub const fn from_bits(bits: u64) -> Self {
        VertexSet(bits)
    }

    pub const fn bits(self) -> u64 {
        self.0
    }

    /// Builds a set from 1-based labels, as they appear in figures and files.
    pub fn from_labels(labels: &[usize]) -> Self {
        labels.iter().map(|&l| l - 1).collect()
    }

    pub fn contains(self, v: Vertex) -> bool {
        v < 64 && self.0 & (1 << v) != 0
    }

    pub fn insert(&mut self, v: Vertex) {
        self.0 |= 1 << v;
    }

    pub fn remove(&mut self, v: Vertex) {
        self.0 &= !(1 << v);
    }

    pub fn union(self, other: Self) -> Self {
        VertexSet(self.0 | other.0)
    }

    pub fn intersection(self, other: Self) -> Self {
        VertexSet(self.0 & other.0)
    }

    pub fn difference(self, other: Self) -> Self {
        VertexSet(self.0 & !other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_disjoint(self, other: Self) -> bool {
        self.0 & other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Ascending iteration.
    pub fn iter(self) -> impl Iterator<Item = Vertex> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let v = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(v)
            }
        })
    }

    pub fn to_vec(self) -> Vec<Vertex> {
        self.iter().collect()
    }

    /// 1-based labels in ascending order.
    pub fn labels(self) -> Vec<usize> {
        self.iter().map(|v| v + 1).collect()
    }
}

impl FromIterator<Vertex> for VertexSet {
    fn from_iter<I: IntoIterator<Item = Vertex>>(iter: I) -> Self {
        let mut s = VertexSet::empty();
        for v in iter {
            s.insert(v);
        }
        s
    }
}

impl BitOr for VertexSet {
    type Output = VertexSet;
    fn bitor(self, rhs: Self) -> Self {
        self.union(rhs)
    }
}

impl BitAnd for VertexSet {
    type Output = VertexSet;
    fn bitand(self, rhs: Self) -> Self {
        self.intersection(rhs)
    }
}

impl Sub for VertexSet {
    type Output = VertexSet;
    fn sub(self, rhs: Self) -> Self {
        self.difference(rhs)
    }
}

impl fmt::Debug for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for VertexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, l) in self.labels().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{l}")?;
        }
        write!(f, "}}")
    }
}

impl Serialize for VertexSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.labels().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for VertexSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let labels = Vec::<usize>::deserialize(deserializer)?;
        if let Some(bad) = labels.iter().find(|&&l| l == 0 || l > MAX_VERTICES) {
            return Err(serde::de::Error::custom(format!(
                "vertex label {bad} out of range"
            )));
        }
        Ok(VertexSet::from_labels(&labels))
    }
}

/// A directed edge `tail -> head` carrying a color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub tail: Vertex,
    pub head: Vertex,
    pub color: ColorId,
}

impl Edge {
    pub const fn new(tail: Vertex, head: Vertex, color: ColorId) -> Self {
        Edge { tail, head, color }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has {0} vertices; at most {MAX_VERTICES} are supported")]
    TooManyVertices(usize),
    #[error("vertex {vertex} is out of range 1..={n}")]
    VertexOutOfRange { vertex: usize, n: usize },
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("edge ({tail}, {head}) has color {color}, palette has {palette} colors")]
    ColorOutOfRange {
        tail: usize,
        head: usize,
        color: usize,
        palette: usize,
    },
    #[error("color `{0}` is declared but no edge uses it")]
    EmptyCell(String),
    #[error("bad leader set: {0}")]
    BadLeader(String),
}

/// On-disk form of a colored graph. All indices are 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDescription {
    pub n: usize,
    pub colors: Vec<String>,
    pub edges: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub leaders: Vec<usize>,
}

/// An immutable colored directed graph `G(π) = (V, E, π)`.
#[derive(Clone, PartialEq, Eq)]
pub struct ColoredDigraph {
    n: usize,
    colors: Vec<String>,
    edges: Vec<Edge>,
    leaders: Option<VertexSet>,
    out: Vec<VertexSet>,
    // Row-major n*n lookup of edge colors.
    color_at: Vec<Option<ColorId>>,
}

impl fmt::Debug for ColoredDigraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ColoredDigraph")
            .field("n", &self.n)
            .field("colors", &self.colors)
            .field(
                "edges",
                &self
                    .edges
                    .iter()
                    .map(|e| (e.tail + 1, e.head + 1, self.colors[e.color].as_str()))
                    .collect::<Vec<_>>(),
            )
            .field("leaders", &self.leaders)
            .finish()
    }
}

impl ColoredDigraph {
    /// Builds and fully validates a graph: simple, colors in range, every
    /// declared color used, leader set nonempty and inside `V`.
    pub fn new(
        n: usize,
        colors: Vec<String>,
        edges: Vec<Edge>,
        leaders: Option<VertexSet>,
    ) -> Result<Self, GraphError> {
        let g = Self::build(n, colors, edges, leaders)?;
        let mut used = vec![false; g.colors.len()];
        for e in &g.edges {
            used[e.color] = true;
        }
        if let Some(c) = used.iter().position(|&u| !u) {
            return Err(GraphError::EmptyCell(g.colors[c].clone()));
        }
        Ok(g)
    }

    /// Like [`ColoredDigraph::new`] but tolerates palette colors without
    /// edges. Edge operations produce such graphs.
    pub(crate) fn build(
        n: usize,
        colors: Vec<String>,
        mut edges: Vec<Edge>,
        leaders: Option<VertexSet>,
    ) -> Result<Self, GraphError> {
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        let mut color_at = vec![None; n * n];
        let mut out = vec![VertexSet::empty(); n];
        for e in &edges {
            for v in [e.tail, e.head] {
                if v >= n {
                    return Err(GraphError::VertexOutOfRange { vertex: v + 1, n });
                }
            }
            if e.tail == e.head {
                return Err(GraphError::SelfLoop(e.tail + 1));
            }
            if e.color >= colors.len() {
                return Err(GraphError::ColorOutOfRange {
                    tail: e.tail + 1,
                    head: e.head + 1,
                    color: e.color + 1,
                    palette: colors.len(),
                });
            }
            let slot = &mut color_at[e.tail * n + e.head];
            if slot.is_some() {
                return Err(GraphError::DuplicateEdge(e.tail + 1, e.head + 1));
            }
            *slot = Some(e.color);
            out[e.tail].insert(e.head);
        }
        if let Some(l) = leaders {
            if l.is_empty() {
                return Err(GraphError::BadLeader("leader set is empty".into()));
            }
            if !l.is_subset(VertexSet::full(n)) {
                return Err(GraphError::BadLeader(format!(
                    "{l} is not a subset of 1..={n}"
                )));
            }
        }
        edges.sort_by_key(|e| (e.tail, e.head));
        Ok(ColoredDigraph {
            n,
            colors,
            edges,
            leaders,
            out,
            color_at,
        })
    }

    /// Validates a parsed description. An empty leader list means "no leaders".
    pub fn from_description(desc: &GraphDescription) -> Result<Self, GraphError> {
        let n = desc.n;
        let check = |v: usize| {
            if v == 0 || v > n {
                Err(GraphError::VertexOutOfRange { vertex: v, n })
            } else {
                Ok(v - 1)
            }
        };
        let mut edges = Vec::with_capacity(desc.edges.len());
        for &[t, h, c] in &desc.edges {
            let (tail, head) = (check(t)?, check(h)?);
            if c == 0 || c > desc.colors.len() {
                return Err(GraphError::ColorOutOfRange {
                    tail: t,
                    head: h,
                    color: c,
                    palette: desc.colors.len(),
                });
            }
            edges.push(Edge::new(tail, head, c - 1));
        }
        let leaders = if desc.leaders.is_empty() {
            None
        } else {
            let mut set = VertexSet::empty();
            for &l in &desc.leaders {
                let v = check(l)
                    .map_err(|_| GraphError::BadLeader(format!("leader {l} out of range")))?;
                if set.contains(v) {
                    return Err(GraphError::BadLeader(format!("leader {l} listed twice")));
                }
                set.insert(v);
            }
            Some(set)
        };
        if n > MAX_VERTICES {
            return Err(GraphError::TooManyVertices(n));
        }
        Self::new(n, desc.colors.clone(), edges, leaders)
    }

    /// Canonical description: edges sorted by `(tail, head)`, leaders sorted.
    pub fn to_description(&self) -> GraphDescription {
        GraphDescription {
            n: self.n,
            colors: self.colors.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| [e.tail + 1, e.head + 1, e.color + 1])
                .collect(),
            leaders: self.leaders.map(|l| l.labels()).unwrap_or_default(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn vertices(&self) -> VertexSet {
        VertexSet::full(self.n)
    }

    pub fn colors(&self) -> &[String] {
        &self.colors
    }

    pub fn palette_size(&self) -> usize {
        self.colors.len()
    }

    pub fn color_name(&self, c: ColorId) -> &str {
        &self.colors[c]
    }

    /// Edges in canonical `(tail, head)` order.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn leaders(&self) -> Option<VertexSet> {
        self.leaders
    }

    pub fn with_leaders(&self, leaders: Option<VertexSet>) -> Result<Self, GraphError> {
        Self::build(self.n, self.colors.clone(), self.edges.clone(), leaders)
    }

    /// Same vertices, palette and leaders with a different edge list.
    pub(crate) fn with_edges(&self, edges: Vec<Edge>) -> Self {
        Self::build(self.n, self.colors.clone(), edges, self.leaders)
            .expect("edge operations keep the graph simple")
    }

    pub fn color(&self, tail: Vertex, head: Vertex) -> Option<ColorId> {
        self.color_at[tail * self.n + head]
    }

    pub fn has_edge(&self, tail: Vertex, head: Vertex) -> bool {
        self.color(tail, head).is_some()
    }

    /// Colors that no edge carries (only possible after edge operations).
    pub fn unused_colors(&self) -> Vec<ColorId> {
        let mut used = vec![false; self.colors.len()];
        for e in &self.edges {
            used[e.color] = true;
        }
        (0..self.colors.len()).filter(|&c| !used[c]).collect()
    }

    /// `N(v)`.
    pub fn out_neighbors(&self, v: Vertex) -> VertexSet {
        self.out[v]
    }

    /// `N_{V\C}(X)`: vertices outside `C` with an in-edge from `X`.
    pub fn white_out_neighbors(&self, x: VertexSet, coloring: VertexSet) -> VertexSet {
        x.iter()
            .fold(VertexSet::empty(), |acc, v| acc | self.out[v])
            - coloring
    }

    /// Black vertices that still have at least one white out-neighbor.
    pub fn active_vertices(&self, coloring: VertexSet) -> VertexSet {
        coloring
            .iter()
            .filter(|&v| !(self.out[v] - coloring).is_empty())
            .collect()
    }

    /// The colored bipartite graph between `X` and its white out-neighbors.
    /// Colors not present among the induced edges are dropped and the rest
    /// renumbered in increasing order of their global id.
    pub fn induced_bipartite(&self, x: VertexSet, coloring: VertexSet) -> ColoredBipartite {
        let y = self.white_out_neighbors(x, coloring);
        let xs = x.to_vec();
        let ys = y.to_vec();
        let mut local = Vec::new();
        for (i, &xv) in xs.iter().enumerate() {
            for (j, &yv) in ys.iter().enumerate() {
                if let Some(c) = self.color(xv, yv) {
                    local.push((i, j, c));
                }
            }
        }
        ColoredBipartite::with_global_colors(xs, ys, local, &self.colors)
            .expect("induced bipartite graphs are simple")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn vertex_set_basics() {
        let s = VertexSet::from_labels(&[1, 3, 5]);
        assert_eq!(s.to_vec(), vec![0, 2, 4]);
        assert_eq!(s.to_string(), "{1,3,5}");
        assert_eq!(s.len(), 3);
        assert!(VertexSet::from_labels(&[3]).is_subset(s));
        assert_eq!(VertexSet::full(4).bits(), 0b1111);
        assert_eq!(VertexSet::full(62).len(), 62);
        assert_eq!((s - VertexSet::singleton(0)).labels(), vec![3, 5]);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[1,3,5]");
        assert_eq!(serde_json::from_str::<VertexSet>(&json).unwrap(), s);
        assert!(serde_json::from_str::<VertexSet>("[0]").is_err());
    }

    #[test]
    fn fig2_is_valid() {
        let g = corpus::fig2();
        assert_eq!(g.n(), 6);
        assert_eq!(g.edges().len(), 8);
        assert_eq!(g.palette_size(), 3);
        assert_eq!(g.leaders(), Some(VertexSet::from_labels(&[1, 2, 3])));
        assert_eq!(g.color(0, 3), Some(0));
        assert_eq!(g.color(3, 4), Some(0));
        assert_eq!(g.color(5, 4), Some(2));
    }

    #[test]
    fn fig5_is_valid() {
        let g = corpus::fig5();
        assert_eq!(g.n(), 5);
        assert_eq!(g.leaders(), Some(VertexSet::from_labels(&[1, 2])));
    }

    fn desc(n: usize, colors: usize, edges: &[[usize; 3]], leaders: &[usize]) -> GraphDescription {
        GraphDescription {
            n,
            colors: (1..=colors).map(|c| format!("c{c}")).collect(),
            edges: edges.to_vec(),
            leaders: leaders.to_vec(),
        }
    }

    #[test]
    fn validation_errors() {
        let err = |d| ColoredDigraph::from_description(&d).unwrap_err();
        assert_eq!(err(desc(2, 1, &[[1, 1, 1]], &[])), GraphError::SelfLoop(1));
        assert_eq!(
            err(desc(2, 1, &[[1, 2, 1], [1, 2, 1]], &[])),
            GraphError::DuplicateEdge(1, 2)
        );
        assert!(matches!(
            err(desc(2, 1, &[[1, 2, 2]], &[])),
            GraphError::ColorOutOfRange { color: 2, .. }
        ));
        assert_eq!(
            err(desc(3, 2, &[[1, 2, 1]], &[])),
            GraphError::EmptyCell("c2".into())
        );
        assert!(matches!(
            err(desc(2, 1, &[[1, 2, 1]], &[3])),
            GraphError::BadLeader(_)
        ));
        assert!(matches!(
            err(desc(2, 1, &[[1, 2, 1]], &[1, 1])),
            GraphError::BadLeader(_)
        ));
        assert!(matches!(
            err(desc(2, 1, &[[1, 4, 1]], &[])),
            GraphError::VertexOutOfRange { vertex: 4, n: 2 }
        ));
        assert_eq!(err(desc(63, 0, &[], &[])), GraphError::TooManyVertices(63));
    }

    #[test]
    fn canonical_edge_order() {
        let g =
            ColoredDigraph::from_description(&desc(3, 1, &[[2, 3, 1], [1, 3, 1], [1, 2, 1]], &[]))
                .unwrap();
        assert_eq!(
            g.to_description().edges,
            vec![[1, 2, 1], [1, 3, 1], [2, 3, 1]]
        );
    }

    #[test]
    fn out_neighbors_examples() {
        assert_eq!(
            corpus::fig5().out_neighbors(1),
            VertexSet::from_labels(&[3, 4, 5])
        );
        assert_eq!(
            corpus::fig4().out_neighbors(0),
            VertexSet::from_labels(&[3, 4, 5, 6])
        );
        let isolated = ColoredDigraph::from_description(&desc(3, 1, &[[1, 2, 1]], &[])).unwrap();
        assert!(isolated.out_neighbors(2).is_empty());
    }

    #[test]
    fn white_out_neighbor_examples() {
        let g = corpus::fig4();
        let c = VertexSet::from_labels(&[1, 2, 3]);
        assert_eq!(
            g.white_out_neighbors(c, c),
            VertexSet::from_labels(&[4, 5, 6])
        );
        assert!(g.white_out_neighbors(VertexSet::empty(), c).is_empty());

        let g = corpus::fig7a();
        let c = VertexSet::from_labels(&[1, 2, 5, 6, 7]);
        assert_eq!(
            g.white_out_neighbors(VertexSet::from_labels(&[7]), c),
            VertexSet::from_labels(&[3, 12])
        );
    }

    #[test]
    fn induced_bipartite_fig4_matches_fig3() {
        let g = corpus::fig4();
        let c = VertexSet::from_labels(&[1, 2, 3]);
        let b = g.induced_bipartite(c, c);
        assert_eq!(b, corpus::fig3());
    }

    #[test]
    fn induced_bipartite_fig8() {
        let g = corpus::fig8();
        let b = g.induced_bipartite(
            VertexSet::from_labels(&[1, 2, 3, 4]),
            VertexSet::from_labels(&[1, 2, 3, 4, 5]),
        );
        assert_eq!(b.x_vertices(), &[0, 1, 2, 3]);
        assert_eq!(b.y_vertices(), &[5, 6, 7, 8]);
        assert_eq!(b.edges().len(), 11);
        // All five colors survive.
        assert_eq!(b.color_map(), &[0, 1, 2, 3, 4]);
    }

    #[test]
    fn induced_bipartite_drops_and_renumbers_colors() {
        let g = corpus::fig4();
        let c = VertexSet::from_labels(&[1, 2, 3, 4, 5, 6]);
        let b = g.induced_bipartite(VertexSet::from_labels(&[5]), c);
        // 5 -> {8, 9} both c3.
        assert_eq!(b.color_map(), &[2]);
        assert_eq!(b.palette_size(), 1);
        assert!(b.edges().iter().all(|&(_, _, col)| col == 0));
    }

    #[test]
    fn induced_bipartite_without_white_neighbors() {
        let g = corpus::fig4();
        let b = g.induced_bipartite(VertexSet::from_labels(&[3]), g.vertices());
        assert!(b.y_vertices().is_empty());
        assert!(b.edges().is_empty());
    }
}
