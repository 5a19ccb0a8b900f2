//! Colored strong structural controllability of leader-follower networks.
//!
//! A colored graph constrains edges of the same color to carry equal
//! weights. The crate decides controllability of every weighting through
//! sufficient graph conditions (zero forcing with color-perfect neighbors,
//! elementary edge operations) and checks them against numerical samples.

pub mod bipartite;
pub mod corpus;
pub mod edge_ops;
pub mod forcing;
pub mod graph;
pub mod oracle;
pub mod report;

pub use bipartite::{ColoredBipartite, MatchingClass, Spectrum};
pub use edge_ops::{eeo_derived_set, EdgeOp, EdgeOpKind, EeoConfig, EeoTrace};
pub use forcing::{is_zero_forcing_set, DerivationTrace, Force, ForcingConfig};
pub use graph::{ColoredDigraph, Edge, GraphDescription, GraphError, VertexSet};
pub use report::{check, to_dot, AnalysisReport, CheckOptions, Method, Verdict};
