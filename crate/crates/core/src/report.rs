//! End-to-end analysis of one graph and its rendering as DOT.

use std::fmt::Write as _;

use log::info;
use serde::Serialize;
use thiserror::Error;

use crate::edge_ops::{eeo_derived_set, EeoConfig, EeoError, EeoTrace};
use crate::forcing::{is_zero_forcing_set, DerivationTrace, ForcingConfig, ForcingError};
use crate::graph::{ColoredDigraph, VertexSet};
use crate::oracle::{sampled_verdict, OracleError, SampledVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Controllable,
    /// The sufficient conditions do not apply. Never read as "uncontrollable".
    Undecided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Zfs,
    Eeo,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnalysisTrace {
    Forcing(DerivationTrace),
    EdgeOps(EeoTrace),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub graph_id: String,
    pub leaders: VertexSet,
    pub verdict: Verdict,
    pub method: Method,
    pub trace: AnalysisTrace,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<SampledVerdict>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleOptions {
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CheckOptions {
    pub forcing: ForcingConfig,
    pub eeo: EeoConfig,
    pub oracle: Option<OracleOptions>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CheckError {
    #[error("graph has no leader set")]
    NoLeaders,
    #[error(transparent)]
    Forcing(#[from] ForcingError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    /// A CONTROLLABLE verdict contradicted by a sampled realization.
    #[error("internal error: {graph_id} was certified by {method:?} but the oracle found a counterexample at seed offset {seed_offset}")]
    SoundnessViolation {
        graph_id: String,
        method: Method,
        seed_offset: u64,
        report: Box<AnalysisReport>,
    },
    #[error("internal error: certificate for {graph_id} does not replay: {reason}")]
    BadCertificate { graph_id: String, reason: String },
}

/// Zero forcing first, then the edge-operation search, then the oracle if
/// requested.
pub fn check(
    g: &ColoredDigraph,
    graph_id: &str,
    opts: &CheckOptions,
) -> Result<AnalysisReport, CheckError> {
    let leaders = g.leaders().ok_or(CheckError::NoLeaders)?;
    let zfs = is_zero_forcing_set(g, leaders, &opts.forcing)?;
    let (verdict, method, trace) = if zfs.is_zero_forcing {
        (
            Verdict::Controllable,
            Method::Zfs,
            AnalysisTrace::Forcing(zfs.trace),
        )
    } else {
        let eeo = opts.eeo;
        let trace = match eeo_derived_set(
            g,
            leaders,
            &EeoConfig {
                forcing: opts.forcing,
                ..eeo
            },
        ) {
            Ok(t) => t,
            Err(EeoError::BudgetExceeded(t)) => {
                info!(
                    "{graph_id}: edge-operation budget of {} exhausted",
                    eeo.budget
                );
                *t
            }
            Err(EeoError::Forcing(e)) => return Err(e.into()),
        };
        if trace.final_set == g.vertices() {
            (
                Verdict::Controllable,
                Method::Eeo,
                AnalysisTrace::EdgeOps(trace),
            )
        } else {
            (
                Verdict::Undecided,
                Method::None,
                AnalysisTrace::EdgeOps(trace),
            )
        }
    };
    if verdict == Verdict::Controllable {
        let replayed = match &trace {
            AnalysisTrace::Forcing(t) => t.replay(g),
            AnalysisTrace::EdgeOps(t) => t.replay(g, leaders),
        };
        if let Err(reason) = replayed {
            return Err(CheckError::BadCertificate {
                graph_id: graph_id.into(),
                reason,
            });
        }
    }
    let oracle = match opts.oracle {
        Some(o) => Some(sampled_verdict(g, leaders, o.trials, o.seed)?),
        None => None,
    };
    let report = AnalysisReport {
        graph_id: graph_id.into(),
        leaders,
        verdict,
        method,
        trace,
        oracle,
    };
    if let (Verdict::Controllable, Some(SampledVerdict::Counterexample { seed_offset, .. })) =
        (report.verdict, &report.oracle)
    {
        return Err(CheckError::SoundnessViolation {
            graph_id: graph_id.into(),
            method,
            seed_offset: *seed_offset,
            report: Box::new(report),
        });
    }
    Ok(report)
}

const EDGE_COLORS: &[&str] = &[
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

/// Deterministic DOT text: one hue per color id, leaders filled.
pub fn to_dot(g: &ColoredDigraph, name: &str) -> String {
    let mut out = String::new();
    let leaders = g.leaders().unwrap_or_default();
    writeln!(out, "digraph \"{}\" {{", name.replace('"', "\\\"")).unwrap();
    writeln!(out, "  node [shape=circle];").unwrap();
    for v in g.vertices().iter() {
        if leaders.contains(v) {
            writeln!(out, "  {} [style=filled, fillcolor=\"#bbbbbb\"];", v + 1).unwrap();
        } else {
            writeln!(out, "  {};", v + 1).unwrap();
        }
    }
    for e in g.edges() {
        writeln!(
            out,
            "  {} -> {} [label=\"{}\", color=\"{}\", fontcolor=\"{}\"];",
            e.tail + 1,
            e.head + 1,
            g.color_name(e.color),
            EDGE_COLORS[e.color % EDGE_COLORS.len()],
            EDGE_COLORS[e.color % EDGE_COLORS.len()],
        )
        .unwrap();
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn set(labels: &[usize]) -> VertexSet {
        VertexSet::from_labels(labels)
    }

    #[test]
    fn fig4_controllable_by_forcing() {
        let r = check(&corpus::fig4(), "fig4", &CheckOptions::default()).unwrap();
        assert_eq!((r.verdict, r.method), (Verdict::Controllable, Method::Zfs));
    }

    #[test]
    fn fig5_controllable_by_edge_ops() {
        let opts = CheckOptions {
            oracle: Some(OracleOptions {
                trials: 20,
                seed: 0,
            }),
            ..Default::default()
        };
        let r = check(&corpus::fig5(), "fig5", &opts).unwrap();
        assert_eq!((r.verdict, r.method), (Verdict::Controllable, Method::Eeo));
        assert!(r.oracle.unwrap().is_corroborated());
    }

    #[test]
    fn fig5_single_leader_undecided() {
        let g = corpus::fig5().with_leaders(Some(set(&[1]))).unwrap();
        let opts = CheckOptions {
            oracle: Some(OracleOptions {
                trials: 100,
                seed: 0,
            }),
            ..Default::default()
        };
        let r = check(&g, "fig5", &opts).unwrap();
        assert_eq!((r.verdict, r.method), (Verdict::Undecided, Method::None));
        assert!(matches!(
            r.oracle,
            Some(SampledVerdict::Counterexample { .. })
        ));
    }

    #[test]
    fn check_needs_leaders() {
        let g = corpus::fig5().with_leaders(None).unwrap();
        assert_eq!(
            check(&g, "x", &CheckOptions::default()),
            Err(CheckError::NoLeaders)
        );
    }

    #[test]
    fn dot_fig2() {
        let dot = to_dot(&corpus::fig2(), "fig2");
        assert_eq!(dot.matches(" -> ").count(), 8);
        assert_eq!(dot.matches("fillcolor").count(), 3);
        let hues: std::collections::BTreeSet<_> = dot
            .lines()
            .filter(|l| l.contains("->"))
            .map(|l| l.split("color=").nth(1).unwrap())
            .collect();
        assert_eq!(hues.len(), 3);
        assert_eq!(dot, to_dot(&corpus::fig2(), "fig2"));
    }

    #[test]
    fn dot_without_leaders() {
        let g = corpus::fig2().with_leaders(None).unwrap();
        assert!(!to_dot(&g, "g").contains("fillcolor"));
    }

    #[test]
    fn dot_fig7_second_stage() {
        let g = corpus::fig7a();
        let t = eeo_derived_set(&g, g.leaders().unwrap(), &EeoConfig::default()).unwrap();
        let dot = to_dot(&t.stages[1].graph, "stage1");
        assert!(!dot.contains("  1 -> 3 "));
        assert!(!dot.contains("  1 -> 12 "));
        assert!(dot.contains("  1 -> 2 "));
    }
}
