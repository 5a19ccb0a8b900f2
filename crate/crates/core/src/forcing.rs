//! The colored color-change rule and zero forcing sets.
//!
//! A black set `X ⊆ C` forces `Y = N_{V\C}(X)` when `|Y| = |X|` and the
//! induced colored bipartite graph has exactly one equivalence class of
//! perfect matchings with nonzero signature. Derived sets under this rule
//! depend on the order of forces, so [`is_zero_forcing_set`] searches over
//! force choices instead of applying them greedily.

use std::collections::HashSet;

use itertools::Itertools;
use log::{debug, warn};
use serde::Serialize;
use thiserror::Error;

use crate::bipartite::{certifying_signature, enumerate_matchings_with, equivalence_classes};
use crate::graph::{ColoredDigraph, Vertex, VertexSet};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForcingError {
    #[error("force search needs sources of size up to {needed}, above the cap of {cap}")]
    SearchBoundExceeded { needed: usize, cap: usize },
    #[error("force search would enumerate {subsets} source sets, above the budget of {budget}")]
    SubsetBudgetExceeded { subsets: u64, budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForcingConfig {
    /// Largest source set tried; `None` means as large as could matter.
    pub max_source: Option<usize>,
    /// Exhaustive searches refuse to go beyond this source size.
    pub source_cap: usize,
    /// Upper bound on the number of candidate source sets per query.
    pub subset_budget: u64,
}

impl Default for ForcingConfig {
    fn default() -> Self {
        ForcingConfig {
            max_source: None,
            source_cap: 12,
            subset_budget: 1 << 20,
        }
    }
}

/// `X →c Y`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct Force {
    pub source: VertexSet,
    pub target: VertexSet,
    /// The unique nonzero class signature of the induced bipartite graph.
    pub class_signature: i64,
}

/// A chronological list of forces.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DerivationTrace {
    pub initial: VertexSet,
    pub steps: Vec<Force>,
    #[serde(rename = "final")]
    pub final_set: VertexSet,
    /// Set when a greedy run had to cap the source size.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub truncated: bool,
}

impl DerivationTrace {
    pub fn empty(initial: VertexSet) -> Self {
        DerivationTrace {
            initial,
            steps: Vec::new(),
            final_set: initial,
            truncated: false,
        }
    }

    fn from_steps(initial: VertexSet, steps: Vec<Force>) -> Self {
        let final_set = steps.iter().fold(initial, |acc, f| acc | f.target);
        DerivationTrace {
            initial,
            steps,
            final_set,
            truncated: false,
        }
    }

    /// Re-checks every force against the black set current at its step.
    pub fn replay(&self, g: &ColoredDigraph) -> Result<(), String> {
        let mut black = self.initial;
        for (i, f) in self.steps.iter().enumerate() {
            if !f.source.is_subset(black) {
                return Err(format!("step {i}: source {} is not black", f.source));
            }
            match is_color_perfect(g, f.source, black) {
                Some(ref again) if again == f => {}
                Some(again) => {
                    return Err(format!("step {i}: expected {f:?}, recomputed {again:?}"));
                }
                None => return Err(format!("step {i}: {} does not force", f.source)),
            }
            black = black | f.target;
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

/// Returns the force `X → N_{V\C}(X)` if the white out-neighbors of `X` form
/// a color-perfect white neighbor, `None` otherwise.
pub fn is_color_perfect(g: &ColoredDigraph, x: VertexSet, coloring: VertexSet) -> Option<Force> {
    if x.is_empty() || !x.is_subset(coloring) {
        return None;
    }
    let y = g.white_out_neighbors(x, coloring);
    if y.len() != x.len() {
        return None;
    }
    let b = g.induced_bipartite(x, coloring);
    // The caller bounds |X|; no separate enumeration cap here.
    let ms = enumerate_matchings_with(&b, usize::MAX).ok()?;
    let class_signature = certifying_signature(&equivalence_classes(&ms))?;
    Some(Force {
        source: x,
        target: y,
        class_signature,
    })
}

fn subset_count(k: usize, max: usize) -> u64 {
    let mut total = 0u64;
    let mut binom = 1u64;
    for s in 1..=max.min(k) {
        binom = binom * (k - s + 1) as u64 / s as u64;
        total = total.saturating_add(binom);
    }
    total
}

/// Source sets worth trying: vertices without white out-neighbors can never
/// be part of a force, and `|X| = |Y|` bounds `|X|` by the white count.
fn candidate_plan(
    g: &ColoredDigraph,
    coloring: VertexSet,
    cfg: &ForcingConfig,
    truncate: bool,
) -> Result<(Vec<Vertex>, usize, bool), ForcingError> {
    let active = g.active_vertices(coloring).to_vec();
    let white = g.vertices() - coloring;
    let requested = cfg.max_source.unwrap_or(coloring.len());
    let mut max = requested.min(active.len()).min(white.len());
    let mut truncated = false;
    if max > cfg.source_cap {
        if !truncate {
            return Err(ForcingError::SearchBoundExceeded {
                needed: max,
                cap: cfg.source_cap,
            });
        }
        max = cfg.source_cap;
        truncated = true;
    }
    let subsets = subset_count(active.len(), max);
    if subsets > cfg.subset_budget {
        if !truncate {
            return Err(ForcingError::SubsetBudgetExceeded {
                subsets,
                budget: cfg.subset_budget,
            });
        }
        while max > 0 && subset_count(active.len(), max) > cfg.subset_budget {
            max -= 1;
        }
        truncated = true;
    }
    Ok((active, max, truncated))
}

fn collect_forces(
    g: &ColoredDigraph,
    coloring: VertexSet,
    active: &[Vertex],
    max: usize,
) -> Vec<Force> {
    let mut forces = Vec::new();
    for size in 1..=max {
        for combo in active.iter().copied().combinations(size) {
            let x: VertexSet = combo.into_iter().collect();
            if g.white_out_neighbors(x, coloring).len() != size {
                continue;
            }
            if let Some(f) = is_color_perfect(g, x, coloring) {
                forces.push(f);
            }
        }
    }
    forces
}

/// Every force available from `C`, ordered by `|X|` then lexicographically.
pub fn find_forces(
    g: &ColoredDigraph,
    coloring: VertexSet,
    cfg: &ForcingConfig,
) -> Result<Vec<Force>, ForcingError> {
    let (active, max, _) = candidate_plan(g, coloring, cfg, false)?;
    Ok(collect_forces(g, coloring, &active, max))
}

/// How [`derived_set_greedy`] picks among the available forces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GreedyPolicy {
    /// The first force in [`find_forces`] order.
    #[default]
    First,
    /// Smallest source set first. Coincides with `First` under the standard
    /// enumeration order; kept as an explicit name for callers.
    SmallFirst,
    /// Largest source set first, ties broken lexicographically.
    LargeFirst,
}

/// Applies forces chosen by `policy` until none is left. Never fails on the
/// source cap: the search is truncated and the trace flagged instead.
pub fn derived_set_greedy(
    g: &ColoredDigraph,
    coloring: VertexSet,
    policy: GreedyPolicy,
    cfg: &ForcingConfig,
) -> DerivationTrace {
    let mut trace = DerivationTrace::empty(coloring);
    loop {
        let black = trace.final_set;
        let (active, max, truncated) =
            candidate_plan(g, black, cfg, true).expect("truncating plan cannot fail");
        if truncated && !trace.truncated {
            warn!("greedy derivation from {black}: source size capped at {max}");
            trace.truncated = true;
        }
        let forces = collect_forces(g, black, &active, max);
        let chosen = match policy {
            GreedyPolicy::First | GreedyPolicy::SmallFirst => forces.into_iter().next(),
            GreedyPolicy::LargeFirst => {
                let top = forces.iter().map(|f| f.source.len()).max();
                forces.into_iter().find(|f| Some(f.source.len()) == top)
            }
        };
        let Some(force) = chosen else { break };
        debug!("greedy force {} -> {}", force.source, force.target);
        trace.final_set = black | force.target;
        trace.steps.push(force);
    }
    trace
}

/// Outcome of the zero forcing search.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ZeroForcingOutcome {
    pub is_zero_forcing: bool,
    /// A witness reaching `V` when `is_zero_forcing`, otherwise a derived
    /// set of maximum size among those found.
    pub trace: DerivationTrace,
    /// Distinct black sets visited.
    pub states: usize,
}

impl ZeroForcingOutcome {
    pub fn witness(&self) -> Option<&DerivationTrace> {
        self.is_zero_forcing.then_some(&self.trace)
    }
}

struct Search<'a> {
    g: &'a ColoredDigraph,
    cfg: &'a ForcingConfig,
    all: VertexSet,
    seen: HashSet<VertexSet>,
    path: Vec<Force>,
    best: Option<(usize, Vec<Force>)>,
}

impl Search<'_> {
    /// Depth-first over force choices. Returns `true` once `V` is reached;
    /// `self.path` then holds the witness.
    fn run(&mut self, black: VertexSet) -> Result<bool, ForcingError> {
        if black == self.all {
            return Ok(true);
        }
        let forces = find_forces(self.g, black, self.cfg)?;
        if forces.is_empty() {
            if self
                .best
                .as_ref()
                .is_none_or(|(size, _)| black.len() > *size)
            {
                self.best = Some((black.len(), self.path.clone()));
            }
            return Ok(false);
        }
        for f in forces {
            let next = black | f.target;
            if !self.seen.insert(next) {
                continue;
            }
            self.path.push(f);
            if self.run(next)? {
                return Ok(true);
            }
            self.path.pop();
        }
        Ok(false)
    }
}

/// Decides whether some chronological list of forces turns all of `V` black.
///
/// Black sets already expanded are never expanded again, so the search is
/// bounded by the number of reachable black sets.
pub fn is_zero_forcing_set(
    g: &ColoredDigraph,
    coloring: VertexSet,
    cfg: &ForcingConfig,
) -> Result<ZeroForcingOutcome, ForcingError> {
    let mut search = Search {
        g,
        cfg,
        all: g.vertices(),
        seen: HashSet::from([coloring]),
        path: Vec::new(),
        best: None,
    };
    let found = search.run(coloring)?;
    let steps = if found {
        std::mem::take(&mut search.path)
    } else {
        search.best.map(|(_, p)| p).unwrap_or_default()
    };
    Ok(ZeroForcingOutcome {
        is_zero_forcing: found,
        trace: DerivationTrace::from_steps(coloring, steps),
        states: search.seen.len(),
    })
}

/// Derived set under the classic rule: a black vertex with exactly one white
/// out-neighbor forces it. The result does not depend on the order.
pub fn classic_derived_set(g: &ColoredDigraph, coloring: VertexSet) -> VertexSet {
    let mut black = coloring;
    loop {
        let mut changed = false;
        for v in black.iter() {
            let white = g.out_neighbors(v) - black;
            if white.len() == 1 {
                black = black | white;
                changed = true;
            }
        }
        if !changed {
            return black;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::graph::{ColoredDigraph, GraphDescription};

    fn set(labels: &[usize]) -> VertexSet {
        VertexSet::from_labels(labels)
    }

    fn cfg() -> ForcingConfig {
        ForcingConfig::default()
    }

    fn graph(n: usize, edges: &[[usize; 3]]) -> ColoredDigraph {
        let k = edges.iter().map(|e| e[2]).max().unwrap_or(0);
        ColoredDigraph::from_description(&GraphDescription {
            n,
            colors: (1..=k).map(|c| format!("c{c}")).collect(),
            edges: edges.to_vec(),
            leaders: vec![],
        })
        .unwrap()
    }

    #[test]
    fn color_perfect_fig4() {
        let g = corpus::fig4();
        let c = set(&[1, 2, 3]);
        let f = is_color_perfect(&g, c, c).unwrap();
        assert_eq!(f.target, set(&[4, 5, 6]));
        assert_eq!(f.class_signature, -1);
    }

    #[test]
    fn no_color_perfect_neighbor_in_fig5() {
        let g = corpus::fig5();
        let c = set(&[1, 2]);
        for x in [set(&[1]), set(&[2]), set(&[1, 2])] {
            assert!(is_color_perfect(&g, x, c).is_none(), "{x}");
        }
    }

    #[test]
    fn color_perfect_needs_white_neighbors() {
        let g = corpus::fig4();
        assert!(is_color_perfect(&g, set(&[3]), g.vertices()).is_none());
        assert!(is_color_perfect(&g, VertexSet::empty(), set(&[1])).is_none());
        // X must be black.
        assert!(is_color_perfect(&g, set(&[4]), set(&[1])).is_none());
    }

    #[test]
    fn find_forces_fig4() {
        let g = corpus::fig4();
        let forces = find_forces(&g, set(&[1, 2, 3]), &cfg()).unwrap();
        assert_eq!(forces.len(), 1);
        assert_eq!(forces[0].source, set(&[1, 2, 3]));
        assert_eq!(forces[0].target, set(&[4, 5, 6]));
    }

    #[test]
    fn find_forces_fig8() {
        let g = corpus::fig8();
        let forces = find_forces(&g, set(&[1, 2, 3, 4, 5]), &cfg()).unwrap();
        let pairs: Vec<_> = forces.iter().map(|f| (f.source, f.target)).collect();
        assert!(pairs.contains(&(set(&[5]), set(&[6]))));
        assert!(pairs.contains(&(set(&[1, 2, 3, 4]), set(&[6, 7, 8, 9]))));
        // Increasing |X|.
        assert!(forces
            .windows(2)
            .all(|w| w[0].source.len() <= w[1].source.len()));
    }

    #[test]
    fn find_forces_all_black() {
        let g = corpus::fig4();
        assert!(find_forces(&g, g.vertices(), &cfg()).unwrap().is_empty());
    }

    #[test]
    fn find_forces_respects_cap() {
        let g = corpus::fig4();
        let tight = ForcingConfig {
            source_cap: 2,
            ..cfg()
        };
        assert_eq!(
            find_forces(&g, set(&[1, 2, 3]), &tight),
            Err(ForcingError::SearchBoundExceeded { needed: 3, cap: 2 })
        );
        let small = ForcingConfig {
            max_source: Some(2),
            ..cfg()
        };
        assert!(find_forces(&g, set(&[1, 2, 3]), &small).unwrap().is_empty());
        let budget = ForcingConfig {
            subset_budget: 3,
            ..cfg()
        };
        assert!(matches!(
            find_forces(&g, set(&[1, 2, 3]), &budget),
            Err(ForcingError::SubsetBudgetExceeded {
                subsets: 7,
                budget: 3
            })
        ));
    }

    #[test]
    fn greedy_fig4() {
        let g = corpus::fig4();
        let t = derived_set_greedy(&g, set(&[1, 2, 3]), GreedyPolicy::First, &cfg());
        assert_eq!(t.final_set, g.vertices());
        let steps: Vec<_> = t.steps.iter().map(|f| (f.source, f.target)).collect();
        assert_eq!(
            steps,
            vec![
                (set(&[1, 2, 3]), set(&[4, 5, 6])),
                (set(&[4, 5, 6]), set(&[7, 8, 9]))
            ]
        );
        t.replay(&g).unwrap();
    }

    #[test]
    fn greedy_all_black() {
        let g = corpus::fig4();
        let t = derived_set_greedy(&g, g.vertices(), GreedyPolicy::First, &cfg());
        assert!(t.steps.is_empty());
        assert_eq!(t.final_set, g.vertices());
    }

    #[test]
    fn greedy_fig8_branches() {
        let g = corpus::fig8();
        let c = set(&[1, 2, 3, 4, 5]);
        let small = derived_set_greedy(&g, c, GreedyPolicy::SmallFirst, &cfg());
        assert_eq!(small.final_set, set(&[1, 2, 3, 4, 5, 6]));
        assert_eq!(small.steps.len(), 1);
        let large = derived_set_greedy(&g, c, GreedyPolicy::LargeFirst, &cfg());
        assert_eq!(large.final_set, g.vertices());
        assert_eq!(large.steps[0].source, set(&[1, 2, 3, 4]));
    }

    #[test]
    fn greedy_truncates_instead_of_failing() {
        let g = corpus::fig4();
        let tight = ForcingConfig {
            source_cap: 2,
            ..cfg()
        };
        let t = derived_set_greedy(&g, set(&[1, 2, 3]), GreedyPolicy::First, &tight);
        assert!(t.truncated);
        assert_eq!(t.final_set, set(&[1, 2, 3]));
    }

    #[test]
    fn zero_forcing_fig8_needs_backtracking() {
        let g = corpus::fig8();
        let out = is_zero_forcing_set(&g, set(&[1, 2, 3, 4, 5]), &cfg()).unwrap();
        assert!(out.is_zero_forcing);
        let w = out.witness().unwrap();
        assert!(w
            .steps
            .iter()
            .any(|f| f.source == set(&[1, 2, 3, 4]) && f.target == set(&[6, 7, 8, 9])));
        w.replay(&g).unwrap();
    }

    #[test]
    fn zero_forcing_fig5_fails() {
        let g = corpus::fig5();
        let out = is_zero_forcing_set(&g, set(&[1, 2]), &cfg()).unwrap();
        assert!(!out.is_zero_forcing);
        assert_eq!(out.trace.final_set, set(&[1, 2]));
        assert!(out.witness().is_none());
    }

    #[test]
    fn zero_forcing_trivial() {
        let g = corpus::fig5();
        let out = is_zero_forcing_set(&g, g.vertices(), &cfg()).unwrap();
        assert!(out.is_zero_forcing);
        assert!(out.trace.steps.is_empty());
    }

    #[test]
    fn classic_examples() {
        let path = graph(3, &[[1, 2, 1], [2, 3, 2]]);
        assert_eq!(classic_derived_set(&path, set(&[1])), set(&[1, 2, 3]));
        let star = graph(3, &[[1, 2, 1], [1, 3, 2]]);
        assert_eq!(classic_derived_set(&star, set(&[1])), set(&[1]));
        let g = corpus::fig6c();
        assert_eq!(classic_derived_set(&g, set(&[1, 2])), g.vertices());
    }

    #[test]
    fn replay_detects_tampering() {
        let g = corpus::fig4();
        let mut t = is_zero_forcing_set(&g, set(&[1, 2, 3]), &cfg())
            .unwrap()
            .trace;
        t.replay(&g).unwrap();
        t.steps.swap(0, 1);
        assert!(t.replay(&g).is_err());
    }
}
