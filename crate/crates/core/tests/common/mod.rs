#![allow(dead_code)]

use colored_ssc::bipartite::ColoredBipartite;
use colored_ssc::graph::{ColoredDigraph, Edge, VertexSet};
use rand::Rng;

/// Random simple colored digraph on `2..=max_n` vertices with at most
/// `max_colors` colors, all of them used, and a random nonempty leader set.
pub fn random_digraph<R: Rng>(rng: &mut R, max_n: usize, max_colors: usize) -> ColoredDigraph {
    let n = rng.random_range(2..=max_n);
    let k = rng.random_range(1..=max_colors);
    let density: f64 = rng.random_range(0.2..0.6);
    let mut edges = Vec::new();
    for t in 0..n {
        for h in 0..n {
            if t != h && rng.random_bool(density) {
                edges.push(Edge::new(t, h, rng.random_range(0..k)));
            }
        }
    }
    // Compact the palette to the colors that actually occur.
    let mut used: Vec<usize> = edges.iter().map(|e| e.color).collect();
    used.sort_unstable();
    used.dedup();
    for e in &mut edges {
        e.color = used.binary_search(&e.color).unwrap();
    }
    let colors = (1..=used.len()).map(|c| format!("c{c}")).collect();
    let leaders = random_nonempty_subset(rng, n);
    ColoredDigraph::new(n, colors, edges, Some(leaders)).expect("generated graph is valid")
}

pub fn random_nonempty_subset<R: Rng>(rng: &mut R, n: usize) -> VertexSet {
    loop {
        let s: VertexSet = (0..n).filter(|_| rng.random_bool(0.35)).collect();
        if !s.is_empty() {
            return s;
        }
    }
}

/// Random square colored bipartite graph with side `1..=max_side`.
pub fn random_bipartite<R: Rng>(
    rng: &mut R,
    max_side: usize,
    max_colors: usize,
) -> ColoredBipartite {
    let s = rng.random_range(1..=max_side);
    let k = rng.random_range(1..=max_colors);
    let density: f64 = rng.random_range(0.3..0.9);
    let mut edges = Vec::new();
    for i in 0..s {
        for j in 0..s {
            if rng.random_bool(density) {
                edges.push((i, j, rng.random_range(0..k)));
            }
        }
    }
    ColoredBipartite::from_local(s, s, &edges).expect("generated bipartite graph is valid")
}
