//! Golden graphs shipped in `corpus/`, named after the figures they encode.
//!
//! `fig7a`: the edge 4 -> 11 is drawn in a different hue from the other
//! `c1` edges in the original drawing; the file follows its printed label `c1`.

use crate::bipartite::ColoredBipartite;
use crate::graph::{ColoredDigraph, GraphDescription, VertexSet};

macro_rules! corpus_file {
    ($name:literal) => {
        include_str!(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../corpus/",
            $name,
            ".json"
        ))
    };
}

/// `(name, json)` for every shipped file.
pub const FILES: &[(&str, &str)] = &[
    ("fig2", corpus_file!("fig2")),
    ("fig3", corpus_file!("fig3")),
    ("fig4", corpus_file!("fig4")),
    ("fig5", corpus_file!("fig5")),
    ("fig6a", corpus_file!("fig6a")),
    ("fig6b", corpus_file!("fig6b")),
    ("fig6c", corpus_file!("fig6c")),
    ("fig7a", corpus_file!("fig7a")),
    ("fig7b", corpus_file!("fig7b")),
    ("fig7c", corpus_file!("fig7c")),
    ("fig7d", corpus_file!("fig7d")),
    ("fig7e", corpus_file!("fig7e")),
    ("fig8", corpus_file!("fig8")),
];

pub fn parse(json: &str) -> ColoredDigraph {
    let desc: GraphDescription = serde_json::from_str(json).expect("corpus file parses");
    ColoredDigraph::from_description(&desc).expect("corpus file is valid")
}

pub fn by_name(name: &str) -> Option<ColoredDigraph> {
    FILES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, json)| parse(json))
}

pub fn fig2() -> ColoredDigraph {
    parse(corpus_file!("fig2"))
}

/// The directed graph whose `X = {1,2,3}` slice is the bipartite graph of
/// [`fig3`].
pub fn fig3_digraph() -> ColoredDigraph {
    parse(corpus_file!("fig3"))
}

/// The 3x3 colored bipartite graph with its three perfect matchings.
pub fn fig3() -> ColoredBipartite {
    let g = fig3_digraph();
    let x = VertexSet::from_labels(&[1, 2, 3]);
    g.induced_bipartite(x, x)
}

pub fn fig4() -> ColoredDigraph {
    parse(corpus_file!("fig4"))
}

pub fn fig5() -> ColoredDigraph {
    parse(corpus_file!("fig5"))
}

pub fn fig6a() -> ColoredDigraph {
    parse(corpus_file!("fig6a"))
}

pub fn fig6b() -> ColoredDigraph {
    parse(corpus_file!("fig6b"))
}

pub fn fig6c() -> ColoredDigraph {
    parse(corpus_file!("fig6c"))
}

pub fn fig7a() -> ColoredDigraph {
    parse(corpus_file!("fig7a"))
}

pub fn fig7b() -> ColoredDigraph {
    parse(corpus_file!("fig7b"))
}

pub fn fig7d() -> ColoredDigraph {
    parse(corpus_file!("fig7d"))
}

pub fn fig8() -> ColoredDigraph {
    parse(corpus_file!("fig8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_is_canonical() {
        for (name, json) in FILES {
            let g = parse(json);
            let desc: GraphDescription = serde_json::from_str(json).unwrap();
            assert_eq!(g.to_description(), desc, "{name} is not in canonical order");
            // Canonical form is a fixpoint.
            assert_eq!(
                ColoredDigraph::from_description(&g.to_description()).unwrap(),
                g
            );
        }
    }
}
