//! Extreme-set trees of weighted undirected graphs, computed by a
//! cut-threshold divide-and-conquer, plus degree-constrained edge
//! connectivity augmentation (DECA) and edge splitting-off built on top.
//!
//! The crate is organized around a handful of primitives:
//!
//! * [`graph`] — weighted multigraphs with contraction and random weight
//!   perturbation on wide integers,
//! * [`flow`] — exact max-flow / min-cut and connectivity helpers,
//! * [`isolating`] — minimum isolating cuts for a terminal set,
//! * [`cutthresh`] — the cut threshold `ct(s, phi) = { t : lambda(s,t) <= phi }`,
//! * [`extreme`] — the extreme-sets tree (randomized divide-and-conquer
//!   plus postorder pruning),
//! * [`pathtree`] — static rooted-tree path/subtree min queries with
//!   lazy addition,
//! * [`deca`] — external augmentation, augmentation chains and the
//!   demand-one finishing step, and splitting off via reduction,
//! * [`oracles`] — brute-force references used to anchor the test suites.
//!
//! All algorithms are deterministic given a seed. Cut values are carried in
//! 128-bit integers so that the weight perturbation (`w' = mN*w + r` with
//! `N = m*n^d`) stays exact; see [`graph::perturb`] for the documented input
//! limits.

pub mod cutthresh;
pub mod deca;
pub mod extreme;
pub mod flow;
pub mod graph;
pub mod isolating;
pub mod oracles;
pub mod pathtree;
pub mod stats;

pub use cutthresh::{cut_threshold, CtBackend, CutThresholdResult};
pub use deca::{
    solve_deca, split_off, Beta, DecaInstance, DecaSolution, SolvePhase, SplitOffResult,
    TightDegrees,
};
pub use extreme::{extreme_sets_tree, ExtremeSetsTree};
pub use flow::{FlowResult, MaxFlowSolver};
pub use graph::{ContractedGraph, PerturbedWeights, WeightedGraph};
pub use oracles::VerificationReport;
pub use stats::Stats;

/// Cut values, capacities and degree budgets. Wide on purpose: perturbed
/// weights reach `m^2 * n^d * w_max` and must stay exact.
pub type Weight = u128;

/// Signed companion of [`Weight`] used by timer arithmetic and the path tree.
pub type SignedWeight = i128;

/// Errors shared across the crate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// A vertex id was outside `[0, n)`.
    InvalidVertex { vertex: u32, n: usize },
    /// Edge weights must be >= 1.
    NonPositiveWeight { u: u32, v: u32 },
    /// A cut side must be a nonempty proper subset of the vertices.
    InvalidCutSide,
    /// Contraction target is not a subset of the current vertex set.
    NotASubset,
    /// Source and sink of a flow computation coincide.
    SourceIsSink,
    /// The operation needs at least this many vertices or terminals.
    TooFew { needed: usize, got: usize },
    /// Brute-force oracle invoked beyond its size limit.
    OracleTooLarge { limit: usize, got: usize },
    /// Perturbed weights would not fit the 128-bit weight type.
    WeightOverflow { required_bits: u32 },
    /// The perturbation exponent must be at least 4.
    BadExponent { d: u32 },
    /// The balanced-partition sampler exhausted its retry budget.
    MonteCarloFailure { attempts: u32 },
    /// The augmentation instance admits no solution.
    Infeasible(InfeasibleReason),
    /// An internal invariant was violated; indicates a bug, not bad input.
    Defect(String),
}

/// Why a DECA / splitting-off instance is infeasible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InfeasibleReason {
    /// Some extreme set has `delta(X) + beta(X) < tau`.
    DegreeBudget,
    /// Total degree budget is odd and no vertex has slack for the parity fix.
    Parity,
    /// Target connectivity 1 on a graph whose components cannot be joined
    /// into a tree under the degree bounds.
    Connect,
    /// Splitting off requires the designated vertex to have even degree.
    OddDegree,
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::InvalidVertex { vertex, n } => {
                write!(f, "vertex {vertex} out of range for {n} vertices")
            }
            Error::NonPositiveWeight { u, v } => {
                write!(f, "edge ({u}, {v}) has non-positive weight")
            }
            Error::InvalidCutSide => write!(f, "cut side must be a nonempty proper vertex subset"),
            Error::NotASubset => write!(f, "set is not a subset of the current vertices"),
            Error::SourceIsSink => write!(f, "source and sink coincide"),
            Error::TooFew { needed, got } => write!(f, "need at least {needed} items, got {got}"),
            Error::OracleTooLarge { limit, got } => {
                write!(f, "brute-force oracle limited to {limit} vertices, got {got}")
            }
            Error::WeightOverflow { required_bits } => write!(
                f,
                "perturbed weights need {required_bits} bits; shrink weights or the graph"
            ),
            Error::BadExponent { d } => write!(f, "perturbation exponent d={d} must be >= 4"),
            Error::MonteCarloFailure { attempts } => write!(
                f,
                "balanced partition sampling failed after {attempts} attempts"
            ),
            Error::Infeasible(reason) => write!(f, "infeasible instance: {reason}"),
            Error::Defect(msg) => write!(f, "internal invariant violated: {msg}"),
        }
    }
}

impl std::fmt::Display for InfeasibleReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InfeasibleReason::DegreeBudget => {
                write!(f, "an extreme set has delta(X) + beta(X) < tau")
            }
            InfeasibleReason::Parity => write!(f, "odd total budget and no slack vertex"),
            InfeasibleReason::Connect => {
                write!(f, "components cannot be joined under the degree bounds")
            }
            InfeasibleReason::OddDegree => write!(f, "designated vertex has odd weighted degree"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
