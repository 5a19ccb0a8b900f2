//! Elementary edge operations and edge-operations-color-change derived sets.
//!
//! Both operations are defined relative to a coloring set `C` through
//! `E_u(v) = {(v, j) ∈ E | j ∈ N_{V\C}(u)}`:
//!
//! * turn color: if all of `E_u(u)` share one color, give them another one;
//! * remove edges: if `N_{V\C}(u) ⊆ N_{V\C}(v)` and `(u, k)`, `(v, k)` share
//!   a color for every such `k`, delete `E_u(v)`.
//!
//! Neither adds edges or colors. Palette ids stay stable across operations
//! (a color may end up without edges) so that one color realization applies
//! to every stage graph.

use std::collections::HashSet;

use log::debug;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::forcing::{is_zero_forcing_set, DerivationTrace, ForcingConfig, ForcingError};
use crate::graph::{ColorId, ColoredDigraph, Edge, GraphDescription, Vertex, VertexSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EdgeOpError {
    #[error("vertex {0} is not in the coloring set")]
    NotInColoringSet(usize),
    #[error("vertex {0} has no edges to white vertices")]
    EmptySet(usize),
    #[error("edges from vertex {0} to white vertices carry more than one color")]
    MixedColors(usize),
    #[error("edges from vertex {0} already have the requested color")]
    SameColor(usize),
    #[error("color {0} is not in the palette")]
    UnknownColor(usize),
    #[error("remove-edges needs two distinct vertices, got {0} twice")]
    SameVertex(usize),
    #[error("white out-neighbors of {u} are not contained in those of {v}")]
    NotNested { u: usize, v: usize },
    #[error("edges ({u}, {k}) and ({v}, {k}) have different colors")]
    ColorMismatch { u: usize, v: usize, k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeOpKind {
    TurnColor { u: Vertex, new_color: ColorId },
    RemoveEdges { u: Vertex, v: Vertex },
}

/// An edge operation together with the coloring set it was applied under.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EdgeOp {
    pub kind: EdgeOpKind,
    pub context: VertexSet,
}

impl EdgeOp {
    pub fn turn_color(u: Vertex, new_color: ColorId, context: VertexSet) -> Self {
        EdgeOp {
            kind: EdgeOpKind::TurnColor { u, new_color },
            context,
        }
    }

    pub fn remove_edges(u: Vertex, v: Vertex, context: VertexSet) -> Self {
        EdgeOp {
            kind: EdgeOpKind::RemoveEdges { u, v },
            context,
        }
    }

    /// `C(o)`: the one or two black vertices the operation is about.
    pub fn support(&self) -> VertexSet {
        match self.kind {
            EdgeOpKind::TurnColor { u, .. } => VertexSet::singleton(u),
            EdgeOpKind::RemoveEdges { u, v } => VertexSet::singleton(u) | VertexSet::singleton(v),
        }
    }

    pub fn apply(&self, g: &ColoredDigraph) -> Result<ColoredDigraph, EdgeOpError> {
        match self.kind {
            EdgeOpKind::TurnColor { u, new_color } => {
                apply_turn_color(g, u, new_color, self.context)
            }
            EdgeOpKind::RemoveEdges { u, v } => apply_remove_edges(g, u, v, self.context),
        }
    }
}

impl Serialize for EdgeOp {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EdgeOp", 4)?;
        match self.kind {
            EdgeOpKind::TurnColor { u, new_color } => {
                s.serialize_field("kind", "turn_color")?;
                s.serialize_field("u", &(u + 1))?;
                s.serialize_field("new_color", &(new_color + 1))?;
            }
            EdgeOpKind::RemoveEdges { u, v } => {
                s.serialize_field("kind", "remove_edges")?;
                s.serialize_field("u", &(u + 1))?;
                s.serialize_field("v", &(v + 1))?;
            }
        }
        s.serialize_field("context", &self.context)?;
        s.end()
    }
}

impl std::fmt::Display for EdgeOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            EdgeOpKind::TurnColor { u, new_color } => {
                write!(f, "turn-color(u={}, to c{})", u + 1, new_color + 1)
            }
            EdgeOpKind::RemoveEdges { u, v } => write!(f, "remove-edges(u={}, v={})", u + 1, v + 1),
        }
    }
}

/// `E_u(v)`: edges from `v` into the white out-neighborhood of `u`.
pub fn edges_to_white(g: &ColoredDigraph, u: Vertex, v: Vertex, coloring: VertexSet) -> Vec<Edge> {
    let targets = g.out_neighbors(u) - coloring;
    targets
        .iter()
        .filter_map(|k| g.color(v, k).map(|c| Edge::new(v, k, c)))
        .collect()
}

fn require_black(coloring: VertexSet, v: Vertex) -> Result<(), EdgeOpError> {
    if coloring.contains(v) {
        Ok(())
    } else {
        Err(EdgeOpError::NotInColoringSet(v + 1))
    }
}

pub fn apply_turn_color(
    g: &ColoredDigraph,
    u: Vertex,
    new_color: ColorId,
    coloring: VertexSet,
) -> Result<ColoredDigraph, EdgeOpError> {
    require_black(coloring, u)?;
    if new_color >= g.palette_size() {
        return Err(EdgeOpError::UnknownColor(new_color + 1));
    }
    let targets = edges_to_white(g, u, u, coloring);
    let Some(first) = targets.first() else {
        return Err(EdgeOpError::EmptySet(u + 1));
    };
    if targets.iter().any(|e| e.color != first.color) {
        return Err(EdgeOpError::MixedColors(u + 1));
    }
    if first.color == new_color {
        return Err(EdgeOpError::SameColor(u + 1));
    }
    let recolor = g.out_neighbors(u) - coloring;
    let edges = g
        .edges()
        .iter()
        .map(|&e| {
            if e.tail == u && recolor.contains(e.head) {
                Edge {
                    color: new_color,
                    ..e
                }
            } else {
                e
            }
        })
        .collect();
    Ok(g.with_edges(edges))
}

fn check_remove(
    g: &ColoredDigraph,
    u: Vertex,
    v: Vertex,
    coloring: VertexSet,
) -> Result<VertexSet, EdgeOpError> {
    require_black(coloring, u)?;
    require_black(coloring, v)?;
    if u == v {
        return Err(EdgeOpError::SameVertex(u + 1));
    }
    let nu = g.out_neighbors(u) - coloring;
    let nv = g.out_neighbors(v) - coloring;
    if !nu.is_subset(nv) {
        return Err(EdgeOpError::NotNested { u: u + 1, v: v + 1 });
    }
    for k in nu.iter() {
        if g.color(u, k) != g.color(v, k) {
            return Err(EdgeOpError::ColorMismatch {
                u: u + 1,
                v: v + 1,
                k: k + 1,
            });
        }
    }
    Ok(nu)
}

pub fn apply_remove_edges(
    g: &ColoredDigraph,
    u: Vertex,
    v: Vertex,
    coloring: VertexSet,
) -> Result<ColoredDigraph, EdgeOpError> {
    let nu = check_remove(g, u, v, coloring)?;
    let edges = g
        .edges()
        .iter()
        .copied()
        .filter(|e| !(e.tail == v && nu.contains(e.head)))
        .collect();
    Ok(g.with_edges(edges))
}

/// All edge operations at `C` that change the graph: remove-edges over
/// ordered pairs first, then turn-color over `(u, color)`.
pub fn find_edge_ops(g: &ColoredDigraph, coloring: VertexSet) -> Vec<EdgeOp> {
    let mut ops = Vec::new();
    let active = g.active_vertices(coloring);
    // A pair only removes something when u itself has white out-neighbors.
    for u in active.iter() {
        for v in active.iter() {
            if u != v && check_remove(g, u, v, coloring).is_ok() {
                ops.push(EdgeOp::remove_edges(u, v, coloring));
            }
        }
    }
    for u in active.iter() {
        let targets = edges_to_white(g, u, u, coloring);
        let current = targets[0].color;
        if targets.iter().any(|e| e.color != current) {
            continue;
        }
        for c in (0..g.palette_size()).filter(|&c| c != current) {
            ops.push(EdgeOp::turn_color(u, c, coloring));
        }
    }
    ops
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EeoConfig {
    /// Maximum number of (graph, black set) states expanded.
    pub budget: usize,
    pub forcing: ForcingConfig,
}

impl Default for EeoConfig {
    fn default() -> Self {
        EeoConfig {
            budget: 10_000,
            forcing: ForcingConfig::default(),
        }
    }
}

/// One stage: a derivation on `graph`, optionally followed by an edge op
/// applied under the derivation's final set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EeoStage {
    pub graph: ColoredDigraph,
    pub derivation: DerivationTrace,
    pub op: Option<EdgeOp>,
}

impl Serialize for EeoStage {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EeoStage", 3)?;
        let desc: GraphDescription = self.graph.to_description();
        s.serialize_field("graph", &desc)?;
        s.serialize_field("derivation", &self.derivation)?;
        s.serialize_field("op", &self.op)?;
        s.end()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EeoTrace {
    pub stages: Vec<EeoStage>,
    #[serde(rename = "final")]
    pub final_set: VertexSet,
    /// False when the node budget ran out before the search finished.
    pub complete: bool,
    pub nodes: usize,
}

impl EeoTrace {
    pub fn ops(&self) -> impl Iterator<Item = &EdgeOp> {
        self.stages.iter().filter_map(|s| s.op.as_ref())
    }

    /// Re-validates every derivation on its stage graph and every operation
    /// against the graph it was applied to.
    pub fn replay(&self, original: &ColoredDigraph, leaders: VertexSet) -> Result<(), String> {
        let mut graph = original.clone();
        let mut black = leaders;
        for (i, stage) in self.stages.iter().enumerate() {
            if stage.graph != graph {
                return Err(format!("stage {i}: graph differs from the replayed one"));
            }
            if stage.derivation.initial != black {
                return Err(format!(
                    "stage {i}: derivation starts at {}",
                    stage.derivation.initial
                ));
            }
            stage
                .derivation
                .replay(&graph)
                .map_err(|e| format!("stage {i}: {e}"))?;
            black = stage.derivation.final_set;
            if let Some(op) = stage.op {
                if op.context != black {
                    return Err(format!(
                        "stage {i}: op context {} is not {black}",
                        op.context
                    ));
                }
                graph = op.apply(&graph).map_err(|e| format!("stage {i}: {e}"))?;
            } else if i + 1 != self.stages.len() {
                return Err(format!("stage {i}: missing edge op"));
            }
        }
        if black != self.final_set {
            return Err(format!(
                "final set {} differs from replayed {black}",
                self.final_set
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EeoError {
    #[error("edge-operation search ran out of budget; best final set {}", .0.final_set)]
    BudgetExceeded(Box<EeoTrace>),
    #[error(transparent)]
    Forcing(#[from] ForcingError),
}

struct EeoSearch<'a> {
    cfg: &'a EeoConfig,
    all: VertexSet,
    seen: HashSet<(Vec<Edge>, VertexSet)>,
    path: Vec<EeoStage>,
    best: Option<Vec<EeoStage>>,
    nodes: usize,
    exhausted: bool,
}

impl EeoSearch<'_> {
    fn record(&mut self) {
        let size = |p: &[EeoStage]| p.last().map_or(0, |s| s.derivation.final_set.len());
        if self
            .best
            .as_deref()
            .is_none_or(|b| size(&self.path) > size(b))
        {
            self.best = Some(self.path.clone());
        }
    }

    fn explore(&mut self, graph: ColoredDigraph, black: VertexSet) -> Result<bool, ForcingError> {
        if self.nodes >= self.cfg.budget {
            self.exhausted = true;
            return Ok(false);
        }
        self.nodes += 1;
        let derived = is_zero_forcing_set(&graph, black, &self.cfg.forcing)?.trace;
        let reached = derived.final_set;
        let ops = find_edge_ops(&graph, reached);
        self.path.push(EeoStage {
            graph,
            derivation: derived,
            op: None,
        });
        self.record();
        if reached == self.all {
            return Ok(true);
        }
        for op in ops {
            let stage = self.path.last().expect("pushed above");
            let next = op.apply(&stage.graph).expect("found ops are applicable");
            if !self.seen.insert((next.edges().to_vec(), reached)) {
                continue;
            }
            debug!("edge op {op} at {reached}");
            self.path.last_mut().expect("pushed above").op = Some(op);
            if self.explore(next, reached)? {
                return Ok(true);
            }
            if self.exhausted {
                break;
            }
        }
        self.path.pop();
        Ok(false)
    }
}

/// Alternates derived sets and edge operations, searching depth-first over
/// the choice of operation until the black set is `V` or no unseen
/// (graph, black set) state is left.
///
/// The returned trace is the first one reaching `V`, otherwise the one with
/// the largest final set. When the budget runs out first the best trace so
/// far comes back inside [`EeoError::BudgetExceeded`].
pub fn eeo_derived_set(
    g: &ColoredDigraph,
    leaders: VertexSet,
    cfg: &EeoConfig,
) -> Result<EeoTrace, EeoError> {
    let mut search = EeoSearch {
        cfg,
        all: g.vertices(),
        seen: HashSet::from([(g.edges().to_vec(), leaders)]),
        path: Vec::new(),
        best: None,
        nodes: 0,
        exhausted: false,
    };
    let found = search.explore(g.clone(), leaders)?;
    let stages = if found {
        std::mem::take(&mut search.path)
    } else {
        search.best.take().unwrap_or_else(|| {
            vec![EeoStage {
                graph: g.clone(),
                derivation: DerivationTrace::empty(leaders),
                op: None,
            }]
        })
    };
    let final_set = stages.last().map_or(leaders, |s| s.derivation.final_set);
    let trace = EeoTrace {
        stages,
        final_set,
        complete: found || !search.exhausted,
        nodes: search.nodes,
    };
    if !trace.complete {
        return Err(EeoError::BudgetExceeded(Box::new(trace)));
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::forcing::classic_derived_set;

    fn set(labels: &[usize]) -> VertexSet {
        VertexSet::from_labels(labels)
    }

    fn edge_labels(edges: &[Edge]) -> Vec<(usize, usize)> {
        edges.iter().map(|e| (e.tail + 1, e.head + 1)).collect()
    }

    #[test]
    fn edges_to_white_examples() {
        let c = set(&[1, 2]);
        assert_eq!(
            edge_labels(&edges_to_white(&corpus::fig6a(), 0, 0, c)),
            vec![(1, 3), (1, 4)]
        );
        assert_eq!(
            edge_labels(&edges_to_white(&corpus::fig6b(), 0, 1, c)),
            vec![(2, 3), (2, 4)]
        );
        let g = corpus::fig4();
        assert!(edges_to_white(&g, 2, 2, g.vertices()).is_empty());
    }

    #[test]
    fn fig6_sequence() {
        let c = set(&[1, 2]);
        let b = apply_turn_color(&corpus::fig6a(), 0, 1, c).unwrap();
        assert_eq!(b, corpus::fig6b());
        let cc = apply_remove_edges(&b, 0, 1, c).unwrap();
        assert_eq!(cc, corpus::fig6c());
        assert_eq!(classic_derived_set(&cc, c), cc.vertices());
    }

    #[test]
    fn turn_color_errors() {
        let g = corpus::fig6a();
        let c = set(&[1, 2]);
        assert_eq!(
            apply_turn_color(&g, 1, 0, c),
            Err(EdgeOpError::MixedColors(2))
        );
        assert_eq!(
            apply_turn_color(&g, 0, 0, c),
            Err(EdgeOpError::SameColor(1))
        );
        assert_eq!(
            apply_turn_color(&g, 0, 7, c),
            Err(EdgeOpError::UnknownColor(8))
        );
        assert_eq!(
            apply_turn_color(&g, 2, 0, c),
            Err(EdgeOpError::NotInColoringSet(3))
        );
        let all = g.vertices();
        assert_eq!(
            apply_turn_color(&g, 0, 1, all),
            Err(EdgeOpError::EmptySet(1))
        );
    }

    #[test]
    fn remove_edges_fig7() {
        let g = corpus::fig7a();
        let c = set(&[1, 2, 5, 6, 7]);
        assert_eq!(
            edge_labels(&edges_to_white(&g, 6, 0, c)),
            vec![(1, 3), (1, 12)]
        );
        let next = apply_remove_edges(&g, 6, 0, c).unwrap();
        assert_eq!(next, corpus::fig7b());
        assert_eq!(next.edges().len(), g.edges().len() - 2);
    }

    #[test]
    fn remove_edges_errors() {
        let g = corpus::fig6a();
        let c = set(&[1, 2]);
        assert_eq!(
            apply_remove_edges(&g, 1, 0, c),
            Err(EdgeOpError::NotNested { u: 2, v: 1 })
        );
        assert_eq!(
            apply_remove_edges(&g, 0, 1, c),
            Err(EdgeOpError::ColorMismatch { u: 1, v: 2, k: 3 })
        );
        assert_eq!(
            apply_remove_edges(&g, 0, 0, c),
            Err(EdgeOpError::SameVertex(1))
        );
    }

    #[test]
    fn remove_edges_vacuous() {
        let g = corpus::fig4();
        let c = set(&[1, 2, 3, 4, 5, 6, 7, 8]);
        // N_{V\C}(3) is empty, so nothing is removed.
        let same = apply_remove_edges(&g, 2, 5, c).unwrap();
        assert_eq!(same, g);
    }

    #[test]
    fn find_edge_ops_examples() {
        let ops = find_edge_ops(&corpus::fig6b(), set(&[1, 2]));
        assert!(ops.contains(&EdgeOp::remove_edges(0, 1, set(&[1, 2]))));

        let c = set(&[1, 2, 4, 5, 6, 7, 11]);
        let ops = find_edge_ops(&corpus::fig7b(), c);
        assert!(ops.contains(&EdgeOp::remove_edges(10, 1, c)));

        let g = corpus::fig5();
        assert!(find_edge_ops(&g, g.vertices()).is_empty());
    }

    #[test]
    fn find_edge_ops_order() {
        let c = set(&[1, 2]);
        let ops = find_edge_ops(&corpus::fig6a(), c);
        assert_eq!(ops, vec![EdgeOp::turn_color(0, 1, c)]);
        let ops = find_edge_ops(&corpus::fig6b(), c);
        assert_eq!(ops[0], EdgeOp::remove_edges(0, 1, c));
        assert!(matches!(
            ops.last().unwrap().kind,
            EdgeOpKind::TurnColor { .. }
        ));
    }

    #[test]
    fn eeo_fig7() {
        let g = corpus::fig7a();
        let leaders = set(&[1, 2, 5, 6, 7]);
        let t = eeo_derived_set(&g, leaders, &EeoConfig::default()).unwrap();
        assert_eq!(t.final_set, g.vertices());
        let ops: Vec<_> = t.ops().map(|o| o.kind).collect();
        assert_eq!(
            ops,
            vec![
                EdgeOpKind::RemoveEdges { u: 6, v: 0 },
                EdgeOpKind::RemoveEdges { u: 10, v: 1 }
            ]
        );
        assert_eq!(
            t.stages[1].derivation.final_set,
            set(&[1, 2, 4, 5, 6, 7, 11])
        );
        t.replay(&g, leaders).unwrap();
    }

    #[test]
    fn eeo_fig5() {
        let g = corpus::fig5();
        let leaders = set(&[1, 2]);
        let t = eeo_derived_set(&g, leaders, &EeoConfig::default()).unwrap();
        assert_eq!(t.final_set, g.vertices());
        let ops: Vec<_> = t.ops().map(|o| o.kind).collect();
        assert_eq!(
            ops,
            vec![
                EdgeOpKind::TurnColor { u: 0, new_color: 1 },
                EdgeOpKind::RemoveEdges { u: 0, v: 1 }
            ]
        );
        assert_eq!(t.stages[2].graph, corpus::fig6c());
        t.replay(&g, leaders).unwrap();
    }

    #[test]
    fn eeo_trivial() {
        let g = corpus::fig5();
        let t = eeo_derived_set(&g, g.vertices(), &EeoConfig::default()).unwrap();
        assert_eq!(t.stages.len(), 1);
        assert!(t.stages[0].derivation.steps.is_empty());
        assert_eq!(t.final_set, g.vertices());
    }

    #[test]
    fn eeo_budget() {
        let g = corpus::fig5();
        let cfg = EeoConfig {
            budget: 1,
            ..EeoConfig::default()
        };
        match eeo_derived_set(&g, set(&[1, 2]), &cfg) {
            Err(EeoError::BudgetExceeded(t)) => {
                assert!(!t.complete);
                assert_eq!(t.final_set, set(&[1, 2]));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn eeo_stuck_is_complete() {
        // Leader 1 alone in fig5: no sequence of operations helps.
        let g = corpus::fig5();
        let t = eeo_derived_set(&g, set(&[1]), &EeoConfig::default()).unwrap();
        assert!(t.complete);
        assert_ne!(t.final_set, g.vertices());
    }
}
