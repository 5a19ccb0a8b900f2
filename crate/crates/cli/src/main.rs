use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::debug;
use serde_json::{json, Value};

use colored_ssc::bipartite::{
    certifying_signature, enumerate_matchings, equivalence_classes, symbolic_det,
};
use colored_ssc::edge_ops::{eeo_derived_set, EeoConfig, EeoError, EeoTrace};
use colored_ssc::forcing::{derived_set_greedy, is_zero_forcing_set, ForcingConfig, GreedyPolicy};
use colored_ssc::graph::{ColoredDigraph, GraphDescription, VertexSet};
use colored_ssc::oracle::{
    assemble_with, kalman_report, sample_realization, weighted_adjacency,
    zero_extension_derived_set,
};
use colored_ssc::report::{check, to_dot, CheckError, CheckOptions, OracleOptions, Verdict};

const EXIT_UNDECIDED: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "colored-ssc",
    version,
    about = "Strong structural controllability of colored graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Base seed for sampled realizations.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Largest source set tried by the force search.
    #[arg(long, global = true)]
    max_source: Option<usize>,
    /// Node budget of the edge-operation search.
    #[arg(long, global = true, default_value_t = 10_000)]
    budget: usize,
    /// Number of sampled realizations for the oracle.
    #[arg(long, global = true, default_value_t = 100)]
    trials: usize,
    /// Relative rank tolerance for the Kalman test (default: n·eps).
    #[arg(long, global = true)]
    tolerance: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a graph file, then print it in canonical form.
    Validate { file: PathBuf },
    /// Perfect matchings, classes and verdict for the bipartite graph between
    /// a source set and its white out-neighbors.
    Bipartite {
        file: PathBuf,
        /// Source set X, e.g. `1,2,3`.
        #[arg(long, value_parser = parse_set)]
        x: VertexSet,
        /// Black set C (default: X).
        #[arg(long, value_parser = parse_set)]
        coloring: Option<VertexSet>,
    },
    /// Zero forcing with color-perfect white neighbors.
    Forcing {
        file: PathBuf,
        #[arg(long, value_parser = parse_set)]
        leaders: Option<VertexSet>,
        /// One greedy derivation instead of the exhaustive search.
        #[arg(long)]
        greedy: bool,
        #[arg(long, value_enum, default_value_t = Policy::First)]
        policy: Policy,
    },
    /// Alternate forcing and edge operations.
    EeoDerive {
        file: PathBuf,
        #[arg(long, value_parser = parse_set)]
        leaders: Option<VertexSet>,
        /// Write one DOT file per stage graph into this directory.
        #[arg(long)]
        dot_dir: Option<PathBuf>,
    },
    /// Sample realizations and test the balancing property numerically.
    Oracle {
        file: PathBuf,
        #[arg(long, value_parser = parse_set)]
        leaders: Option<VertexSet>,
    },
    /// Full analysis. Exit code 0 = CONTROLLABLE, 2 = UNDECIDED, 1 = input error.
    Check {
        file: PathBuf,
        #[arg(long, value_parser = parse_set)]
        leaders: Option<VertexSet>,
        /// Cross-check with sampled realizations.
        #[arg(long)]
        oracle: bool,
    },
    /// Render the graph, or a stage graph of the edge-operation trace, as DOT.
    ExportDot {
        file: PathBuf,
        /// Stage index of the edge-operation trace; 0 is the input graph.
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long, value_parser = parse_set)]
        leaders: Option<VertexSet>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    First,
    SmallFirst,
    LargeFirst,
}

impl From<Policy> for GreedyPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::First => GreedyPolicy::First,
            Policy::SmallFirst => GreedyPolicy::SmallFirst,
            Policy::LargeFirst => GreedyPolicy::LargeFirst,
        }
    }
}

fn parse_set(s: &str) -> Result<VertexSet, String> {
    let mut labels = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let v: usize = part
            .parse()
            .map_err(|_| format!("`{part}` is not a vertex label"))?;
        if v == 0 || v > colored_ssc::graph::MAX_VERTICES {
            return Err(format!("vertex {v} is out of range"));
        }
        labels.push(v);
    }
    Ok(VertexSet::from_labels(&labels))
}

/// Input problems (exit code 1) as opposed to internal failures.
#[derive(Debug)]
struct InputError(String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

fn input_err(msg: impl Into<String>) -> anyhow::Error {
    InputError(msg.into()).into()
}

fn load(path: &Path, leaders: Option<VertexSet>) -> Result<ColoredDigraph> {
    let text =
        fs::read_to_string(path).map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    let desc: GraphDescription = serde_json::from_str(&text).map_err(|e| {
        input_err(format!(
            "{}:{}:{}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    let g = ColoredDigraph::from_description(&desc)
        .map_err(|e| input_err(format!("{}: {e}", path.display())))?;
    match leaders {
        Some(l) => g
            .with_leaders(Some(l))
            .map_err(|e| input_err(format!("--leaders: {e}"))),
        None => Ok(g),
    }
}

fn need_leaders(g: &ColoredDigraph, path: &Path) -> Result<VertexSet> {
    g.leaders().ok_or_else(|| {
        input_err(format!(
            "{}: no leader set (add \"leaders\" or pass --leaders)",
            path.display()
        ))
    })
}

fn graph_id(path: &Path) -> String {
    path.file_stem().map_or_else(
        || path.display().to_string(),
        |s| s.to_string_lossy().into_owned(),
    )
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn forcing_config(cli: &Cli) -> ForcingConfig {
    ForcingConfig {
        max_source: cli.max_source,
        ..ForcingConfig::default()
    }
}

fn eeo_config(cli: &Cli) -> EeoConfig {
    EeoConfig {
        budget: cli.budget,
        forcing: forcing_config(cli),
    }
}

fn run(cli: &Cli) -> Result<u8> {
    match &cli.command {
        Command::Validate { file } => {
            let g = load(file, None)?;
            if cli.json {
                print_json(&g.to_description())?;
            } else {
                println!(
                    "{}: valid, {} vertices, {} edges, {} colors, leaders {}",
                    file.display(),
                    g.n(),
                    g.edges().len(),
                    g.palette_size(),
                    g.leaders().map_or("none".into(), |l| l.to_string())
                );
            }
        }
        Command::Bipartite { file, x, coloring } => {
            let g = load(file, None)?;
            if !x.is_subset(g.vertices()) {
                return Err(input_err(format!("--x {x} is not inside 1..={}", g.n())));
            }
            let c = coloring.unwrap_or(*x) | *x;
            let b = g.induced_bipartite(*x, c);
            let ms = enumerate_matchings(&b).map_err(|e| input_err(e.to_string()))?;
            let classes = equivalence_classes(&ms);
            let signature = certifying_signature(&classes);
            let names = b.color_names();
            let label = |vs: &[usize], i: usize| vs[i] + 1;
            if cli.json {
                let matchings: Vec<Value> = ms
                    .iter()
                    .map(|m| {
                        json!({
                            "pairs": m.assignment.iter().enumerate()
                                .map(|(i, &j)| [label(b.x_vertices(), i), label(b.y_vertices(), j)])
                                .collect::<Vec<_>>(),
                            "sign": m.sign,
                            "spectrum": m.spectrum.render(names),
                        })
                    })
                    .collect();
                let classes: Vec<Value> = classes
                    .iter()
                    .map(|c| json!({"spectrum": c.spectrum.render(names), "members": c.members, "signature": c.signature}))
                    .collect();
                let det = symbolic_det(&b).map_err(|e| input_err(e.to_string()))?;
                print_json(&json!({
                    "x": b.x_vertices().iter().map(|v| v + 1).collect::<Vec<_>>(),
                    "y": b.y_vertices().iter().map(|v| v + 1).collect::<Vec<_>>(),
                    "matchings": matchings,
                    "classes": classes,
                    "determinant": det.render(names),
                    "nonsingular": signature.is_some(),
                }))?;
            } else {
                println!(
                    "X = {x}, Y = {}",
                    VertexSet::from_iter(b.y_vertices().iter().copied())
                );
                for m in &ms {
                    let pairs: Vec<String> = m
                        .assignment
                        .iter()
                        .enumerate()
                        .map(|(i, &j)| {
                            format!("{}-{}", label(b.x_vertices(), i), label(b.y_vertices(), j))
                        })
                        .collect();
                    println!(
                        "  {:<24} sign {:+}  {}",
                        pairs.join(" "),
                        m.sign,
                        m.spectrum.render(names)
                    );
                }
                for c in &classes {
                    println!(
                        "class {:<12} members {}  signature {}",
                        c.spectrum.render(names),
                        c.members,
                        c.signature
                    );
                }
                println!("nonsingular: {}", signature.is_some());
            }
        }
        Command::Forcing {
            file,
            leaders,
            greedy,
            policy,
        } => {
            let g = load(file, *leaders)?;
            let l = need_leaders(&g, file)?;
            let cfg = forcing_config(cli);
            let (is_zfs, trace) = if *greedy {
                let t = derived_set_greedy(&g, l, (*policy).into(), &cfg);
                (t.final_set == g.vertices(), t)
            } else {
                let out = is_zero_forcing_set(&g, l, &cfg).map_err(|e| input_err(e.to_string()))?;
                (out.is_zero_forcing, out.trace)
            };
            if cli.json {
                print_json(&json!({"zero_forcing": is_zfs, "trace": trace}))?;
            } else {
                for f in &trace.steps {
                    println!(
                        "{} -> {}  (signature {})",
                        f.source, f.target, f.class_signature
                    );
                }
                println!("derived set {}; zero forcing: {is_zfs}", trace.final_set);
            }
        }
        Command::EeoDerive {
            file,
            leaders,
            dot_dir,
        } => {
            let g = load(file, *leaders)?;
            let l = need_leaders(&g, file)?;
            let (trace, exhausted) = match eeo_derived_set(&g, l, &eeo_config(cli)) {
                Ok(t) => (t, false),
                Err(EeoError::BudgetExceeded(t)) => (*t, true),
                Err(EeoError::Forcing(e)) => return Err(input_err(e.to_string())),
            };
            if let Some(dir) = dot_dir {
                write_stage_dots(dir, &graph_id(file), &trace)?;
            }
            if cli.json {
                print_json(&trace)?;
            } else {
                print_eeo(&trace);
                if exhausted {
                    println!("budget of {} nodes exhausted", cli.budget);
                }
            }
        }
        Command::Oracle { file, leaders } => {
            let g = load(file, *leaders)?;
            let l = need_leaders(&g, file)?;
            if cli.trials == 0 {
                return Err(input_err("--trials must be at least 1"));
            }
            let mut failures = Vec::new();
            let mut worst_ratio = f64::INFINITY;
            let mut borderline = 0usize;
            for i in 0..cli.trials as u64 {
                let r = sample_realization(&g, cli.seed.wrapping_add(i));
                let w = weighted_adjacency(&g, &r);
                let z = zero_extension_derived_set(&w, l);
                let k = kalman_report(&assemble_with(&g, &r, l), cli.tolerance);
                if k.tolerance > 0.0 {
                    worst_ratio = worst_ratio.min(k.sigma_min / k.tolerance);
                }
                borderline += usize::from(k.is_borderline());
                if z.final_set != g.vertices() {
                    debug!("trial {i}: zero extension stops at {}", z.final_set);
                    failures.push(json!({
                        "seed_offset": i,
                        "color_values": r.color_values,
                        "diagonal": r.diagonal,
                        "derived": z.final_set,
                    }));
                }
            }
            let verdict = if failures.is_empty() {
                "CORROBORATED"
            } else {
                "COUNTEREXAMPLE"
            };
            if cli.json {
                print_json(&json!({
                    "verdict": verdict,
                    "trials": cli.trials,
                    "failures": failures,
                    "margins": {"min_sigma_over_tolerance": worst_ratio, "borderline": borderline},
                }))?;
            } else {
                println!(
                    "{verdict}: {} of {} trials failed the balancing test",
                    failures.len(),
                    cli.trials
                );
                println!("smallest Kalman sigma / tolerance: {worst_ratio:.3e} ({borderline} borderline)");
            }
        }
        Command::Check {
            file,
            leaders,
            oracle,
        } => {
            let g = load(file, *leaders)?;
            need_leaders(&g, file)?;
            let opts = CheckOptions {
                forcing: forcing_config(cli),
                eeo: eeo_config(cli),
                oracle: oracle.then_some(OracleOptions {
                    trials: cli.trials,
                    seed: cli.seed,
                }),
            };
            let report = match check(&g, &graph_id(file), &opts) {
                Ok(r) => r,
                Err(
                    e @ (CheckError::SoundnessViolation { .. } | CheckError::BadCertificate { .. }),
                ) => {
                    if let CheckError::SoundnessViolation { report, .. } = &e {
                        eprintln!("{}", serde_json::to_string_pretty(report)?);
                    }
                    eprintln!("error: {e}");
                    return Ok(EXIT_INTERNAL);
                }
                Err(e) => return Err(input_err(e.to_string())),
            };
            if cli.json {
                print_json(&report)?;
            } else {
                println!(
                    "{}: {:?} (method {:?})",
                    report.graph_id, report.verdict, report.method
                );
                if let Some(o) = &report.oracle {
                    println!(
                        "oracle: {}",
                        serde_json::to_value(o)?["verdict"].as_str().unwrap_or("?")
                    );
                }
            }
            return Ok(if report.verdict == Verdict::Controllable {
                0
            } else {
                EXIT_UNDECIDED
            });
        }
        Command::ExportDot {
            file,
            stage,
            leaders,
        } => {
            let g = load(file, *leaders)?;
            let id = graph_id(file);
            match stage {
                None | Some(0) => print!("{}", to_dot(&g, &id)),
                Some(k) => {
                    let l = need_leaders(&g, file)?;
                    let trace = match eeo_derived_set(&g, l, &eeo_config(cli)) {
                        Ok(t) => t,
                        Err(EeoError::BudgetExceeded(t)) => *t,
                        Err(EeoError::Forcing(e)) => return Err(input_err(e.to_string())),
                    };
                    let stage_graph = trace.stages.get(*k).map(|s| &s.graph).ok_or_else(|| {
                        input_err(format!(
                            "unknown stage {k}: the trace has {} stages",
                            trace.stages.len()
                        ))
                    })?;
                    print!("{}", to_dot(stage_graph, &format!("{id}_stage{k}")));
                }
            }
        }
    }
    Ok(0)
}

fn print_eeo(trace: &EeoTrace) {
    for (i, s) in trace.stages.iter().enumerate() {
        println!("stage {i}: {} edges", s.graph.edges().len());
        for f in &s.derivation.steps {
            println!("  {} -> {}", f.source, f.target);
        }
        println!("  derived set {}", s.derivation.final_set);
        if let Some(op) = &s.op {
            println!("  {op}");
        }
    }
    println!("final {}", trace.final_set);
}

fn write_stage_dots(dir: &Path, id: &str, trace: &EeoTrace) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (i, s) in trace.stages.iter().enumerate() {
        let path = dir.join(format!("{id}_stage{i}.dot"));
        fs::write(&path, to_dot(&s.graph, &format!("{id}_stage{i}")))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("COLORED_SSC_LOG")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<InputError>() {
                ExitCode::FAILURE
            } else {
                ExitCode::from(EXIT_INTERNAL)
            }
        }
    }
}
