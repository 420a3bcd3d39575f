//! `ecaug`: extreme-set trees, cut thresholds, degree-constrained edge
//! connectivity augmentation and edge splitting-off on weighted graphs.
//!
//! Exit codes: 0 success, 1 input or internal error, 2 infeasible
//! instance, 3 Monte Carlo retry budget exhausted.

mod formats;

use clap::{Parser, Subcommand, ValueEnum};
use ecaug_core::deca::ChainConfig;
use ecaug_core::flow::global_min_cut;
use ecaug_core::oracles;
use ecaug_core::{
    cut_threshold, deca, extreme, split_off, Beta, CtBackend, DecaInstance, Error, Stats, Weight,
    WeightedGraph,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Environment variable consulted for the default seed.
const SEED_ENV: &str = "ECAUG_SEED";

#[derive(Parser)]
#[command(name = "ecaug", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute the extreme-sets tree of a graph.
    ExtremeSets {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        /// Cross-check against brute force (graphs of at most 16 vertices).
        #[arg(long)]
        check_oracle: bool,
    },
    /// Augment edge connectivity to a target under degree bounds.
    Augment {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        tau: Weight,
        /// Degree bound file; omitted means unbounded everywhere.
        #[arg(long)]
        beta: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        /// Re-verify the solution (connectivity, degrees, weight).
        #[arg(long)]
        verify: bool,
    },
    /// Split off a vertex, preserving the remaining Steiner connectivity.
    Splitoff {
        #[arg(long)]
        input: PathBuf,
        /// 1-based vertex to split off.
        #[arg(long)]
        vertex: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
        #[arg(long)]
        verify: bool,
    },
    /// Compute the cut threshold ct(s, phi).
    CutThreshold {
        #[arg(long)]
        input: PathBuf,
        /// 1-based source vertex.
        #[arg(long)]
        source: u32,
        #[arg(long)]
        phi: Weight,
        #[arg(long, value_enum, default_value_t = Backend::Naive)]
        backend: Backend,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        json: bool,
    },
    /// Benchmark harness: timings, max-flow call counts, recursion depth.
    Bench {
        #[arg(long, conflicts_with = "random")]
        input: Option<PathBuf>,
        /// Generate a random connected graph: N M WMAX.
        #[arg(long, num_args = 3, value_names = ["N", "M", "WMAX"])]
        random: Option<Vec<u64>>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        repeat: u32,
        /// Target connectivity; defaults to min cut plus a random 1..=10.
        #[arg(long)]
        tau: Option<Weight>,
    },
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum Backend {
    Naive,
    Accelerated,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Core(Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "{msg}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn exit_code_for(e: &CliError) -> u8 {
    match e {
        CliError::Input(_) => 1,
        CliError::Core(Error::MonteCarloFailure { .. }) => 3,
        CliError::Core(Error::Infeasible(_)) => 2,
        CliError::Core(_) => 1,
    }
}

fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.parse().ok())
        .unwrap_or(0)
}

fn load_graph(path: &PathBuf) -> Result<WeightedGraph, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    formats::parse_graph(&text).map_err(|e| CliError::Input(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::ExtremeSets { input, seed, json, check_oracle } => {
            let g = load_graph(&input)?;
            let seed = seed.unwrap_or_else(default_seed);
            let tree = extreme::extreme_sets_tree(&g, seed).map_err(CliError::Core)?;
            if check_oracle {
                if g.n() <= 16 {
                    let brute = oracles::brute_extreme_sets(&g).map_err(CliError::Core)?;
                    if tree.canonical_labeled() != brute.canonical_labeled() {
                        return Err(CliError::Core(Error::Defect(
                            "tree disagrees with brute force".into(),
                        )));
                    }
                    eprintln!("oracle check passed ({} nodes)", tree.num_nodes());
                } else {
                    eprintln!("oracle check skipped: graph has more than 16 vertices");
                }
            }
            if json {
                println!("{}", tree_json(&tree));
            } else {
                print_tree_text(&tree);
            }
            Ok(())
        }
        Cmd::Augment { input, tau, beta, seed, json, verify } => {
            let g = load_graph(&input)?;
            let beta = match beta {
                Some(path) => {
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
                    formats::parse_beta(&text, g.n()).map_err(|e| CliError::Input(e.to_string()))?
                }
                None => vec![Beta::Unbounded; g.n()],
            };
            let seed = seed.unwrap_or_else(default_seed);
            let instance = DecaInstance { graph: g.clone(), tau, beta: beta.clone() };
            let solution = deca::solve_deca(&instance, seed).map_err(CliError::Core)?;
            let report = if verify {
                let r = oracles::verify_solution(
                    &g,
                    tau,
                    &beta,
                    &solution.edges,
                    solution.expected_optimum,
                )
                .map_err(CliError::Core)?;
                if !r.pass {
                    return Err(CliError::Core(Error::Defect(format!(
                        "verification failed: {r:?}"
                    ))));
                }
                Some(r)
            } else {
                None
            };
            if json {
                let edges: Vec<_> =
                    solution.edges.iter().map(|&(u, v, w)| json!([u + 1, v + 1, w])).collect();
                let mut obj = json!({
                    "edges": edges,
                    "total_weight": solution.total_weight,
                    "expected_optimum": solution.expected_optimum,
                });
                if let Some(r) = &report {
                    obj["verification"] = json!({
                        "pass": r.pass,
                        "min_cut_after": r.min_cut_after,
                        "min_cut_clamped": r.min_cut_clamped,
                    });
                }
                println!("{obj}");
            } else {
                for &(u, v, w) in &solution.edges {
                    println!("{} {} {}", u + 1, v + 1, w);
                }
                println!("total {}", solution.total_weight);
                if let Some(r) = &report {
                    println!(
                        "verify min_cut{}{} pass",
                        if r.min_cut_clamped { ">=" } else { "=" },
                        r.min_cut_after
                    );
                }
            }
            Ok(())
        }
        Cmd::Splitoff { input, vertex, seed, json, verify } => {
            let g = load_graph(&input)?;
            if vertex == 0 || vertex as usize > g.n() {
                return Err(CliError::Input(format!(
                    "vertex {vertex} out of range 1..={}",
                    g.n()
                )));
            }
            let s = vertex - 1;
            let seed = seed.unwrap_or_else(default_seed);
            let result = match split_off(&g, s, seed) {
                Ok(r) => r,
                // odd degree is an input error for this command
                Err(Error::Infeasible(ecaug_core::InfeasibleReason::OddDegree)) => {
                    return Err(CliError::Input(format!(
                        "vertex {vertex} has odd weighted degree; splitting off needs it even"
                    )))
                }
                Err(e) => return Err(CliError::Core(e)),
            };
            let verified = if verify {
                Some(verify_splitoff(&g, s, &result).map_err(CliError::Core)?)
            } else {
                None
            };
            if let Some(false) = verified {
                return Err(CliError::Core(Error::Defect(
                    "split-off changed the Steiner connectivity".into(),
                )));
            }
            if json {
                let edges: Vec<_> =
                    result.shortcuts.iter().map(|&(u, v, w)| json!([u + 1, v + 1, w])).collect();
                println!(
                    "{}",
                    json!({"shortcuts": edges, "tau": result.tau, "verified": verified})
                );
            } else {
                for &(u, v, w) in &result.shortcuts {
                    println!("{} {} {}", u + 1, v + 1, w);
                }
                let total: Weight = result.shortcuts.iter().map(|&(_, _, w)| w).sum();
                println!("total {total}");
                if verified == Some(true) {
                    println!("verify steiner={} pass", result.tau);
                }
            }
            Ok(())
        }
        Cmd::CutThreshold { input, source, phi, backend, seed, json } => {
            let g = load_graph(&input)?;
            if source == 0 || source as usize > g.n() {
                return Err(CliError::Input(format!(
                    "source {source} out of range 1..={}",
                    g.n()
                )));
            }
            let s = source - 1;
            let seed = seed.unwrap_or_else(default_seed);
            let be = match backend {
                Backend::Naive => CtBackend::Naive,
                Backend::Accelerated => CtBackend::Accelerated { seed },
            };
            let stats = Stats::new();
            let r = cut_threshold(&g, s, phi, be, &stats).map_err(CliError::Core)?;
            if json {
                let inside: Vec<u32> = r.inside.iter().map(|v| v + 1).collect();
                let complement: Vec<u32> = r.complement.iter().map(|v| v + 1).collect();
                println!(
                    "{}",
                    json!({
                        "s": source,
                        "phi": phi,
                        "inside": inside,
                        "complement": complement,
                        "flow_calls": stats.flow_calls(),
                    })
                );
            } else {
                let inside: Vec<String> =
                    r.inside.iter().map(|v| (v + 1).to_string()).collect();
                println!("{}", inside.join(" "));
            }
            Ok(())
        }
        Cmd::Bench { input, random, seed, repeat, tau } => {
            let seed0 = seed.unwrap_or_else(default_seed);
            for rep in 0..repeat {
                let seed = seed0.wrapping_add(rep as u64);
                let g = match (&input, &random) {
                    (Some(path), None) => load_graph(path)?,
                    (None, Some(params)) => {
                        let (n, m, wmax) =
                            (params[0] as usize, params[1] as usize, params[2] as Weight);
                        if n < 2 || wmax == 0 {
                            return Err(CliError::Input(
                                "random graphs need N >= 2 and WMAX >= 1".into(),
                            ));
                        }
                        let extra = m.saturating_sub(n - 1);
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e3779b97f4a7c15);
                        oracles::random_connected_graph(&mut rng, n, extra, wmax)
                    }
                    _ => {
                        return Err(CliError::Input(
                            "bench needs exactly one of --input or --random".into(),
                        ))
                    }
                };
                bench_once(&g, seed, tau)?;
            }
            Ok(())
        }
    }
}

fn bench_once(g: &WeightedGraph, seed: u64, tau: Option<Weight>) -> Result<(), CliError> {
    let stats = Stats::new();
    let t0 = Instant::now();
    let tree = extreme::extreme_sets_tree_with(g, seed, &stats).map_err(CliError::Core)?;
    let tree_ms = t0.elapsed().as_millis();
    let tau = match tau {
        Some(t) => t,
        None => {
            let (mc, _) = global_min_cut(g).map_err(CliError::Core)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xda942042e4dd58b5);
            mc + rng.gen_range(1..=10)
        }
    };
    let beta = vec![Beta::Unbounded; g.n()];
    let t1 = Instant::now();
    let tight = deca::external_augmentation(g, tau, &beta, &tree)
        .and_then(|t| deca::parity_fix(t, &beta))
        .map_err(CliError::Core)?;
    let mut solver_total = 0;
    let outcome = deca::chain_phase(g, tau, &tight, &tree, ChainConfig::default())
        .map_err(CliError::Core)?;
    let finish = deca::finish_demand_one(g, tau, &outcome.residual_b, &tree, &outcome.edges)
        .map_err(CliError::Core)?;
    for &(_, _, w) in outcome.edges.iter().chain(finish.iter()) {
        solver_total += w;
    }
    let augment_ms = t1.elapsed().as_millis();
    println!(
        "{}",
        json!({
            "n": g.n(),
            "m": g.m(),
            "seed": seed,
            "tau": tau,
            "tree_ms": tree_ms,
            "augment_ms": augment_ms,
            "flow_calls": stats.flow_calls(),
            "cut_threshold_calls": stats.cut_threshold_calls(),
            "max_depth": stats.max_recursion_depth(),
            "retries_total": stats.retries_total(),
            "max_retries_per_subproblem": stats.max_retries_per_subproblem(),
            "total_weight": solver_total,
            "expected_optimum": tight.total / 2,
        })
    );
    Ok(())
}

fn verify_splitoff(
    g: &WeightedGraph,
    s: u32,
    result: &ecaug_core::SplitOffResult,
) -> Result<bool, Error> {
    use ecaug_core::flow::steiner_connectivity;
    let rest: Vec<u32> = (0..g.n() as u32).filter(|&v| v != s).collect();
    if rest.len() < 2 {
        return Ok(true);
    }
    let before = steiner_connectivity(g, &rest)?;
    let local = |v: u32| if v > s { v - 1 } else { v };
    let mut edges: Vec<(u32, u32, Weight)> = g
        .edges()
        .iter()
        .filter(|&&(u, v, _)| u != s && v != s)
        .map(|&(u, v, w)| (local(u), local(v), w))
        .collect();
    for &(u, v, w) in &result.shortcuts {
        if u != v {
            edges.push((local(u), local(v), w));
        }
    }
    let after_g = WeightedGraph::build(g.n() - 1, &edges)?;
    let terms: Vec<u32> = (0..(g.n() - 1) as u32).collect();
    let after = steiner_connectivity(&after_g, &terms)?;
    Ok(before == after)
}

fn tree_json(tree: &ecaug_core::ExtremeSetsTree) -> String {
    let nodes: Vec<_> = (0..tree.num_nodes() as u32)
        .map(|v| {
            let members: Vec<u32> = tree.members(v).iter().map(|x| x + 1).collect();
            json!({
                "id": v,
                "parent": tree.parent(v),
                "members": members,
                "delta": tree.delta(v),
            })
        })
        .collect();
    json!({ "nodes": nodes }).to_string()
}

fn print_tree_text(tree: &ecaug_core::ExtremeSetsTree) {
    let mut stack = vec![(tree.root(), 0usize)];
    while let Some((v, depth)) = stack.pop() {
        let indent = "  ".repeat(depth);
        if let Some(x) = tree.leaf_vertex(v) {
            println!("{indent}{} delta={}", x + 1, tree.delta(v));
        } else {
            let members: Vec<String> =
                tree.members(v).iter().map(|x| (x + 1).to_string()).collect();
            println!("{indent}{{{}}} delta={}", members.join(","), tree.delta(v));
        }
        for &c in tree.children(v).iter().rev() {
            stack.push((c, depth + 1));
        }
    }
}
