//! Dependent rounding of fractional exchange solutions.
//!
//! [`barter_dr`] first rounds away cycles of floating edges, then repeatedly
//! finds a connected-component cycle or walk ([`find_ccc`]), colors it, and
//! shifts it by one of two step sizes chosen at random. [`gkps_dr`] is the
//! plain bipartite dependent rounding without any barter protection.

mod coloring;
mod forest;
mod pathseq;
mod replay;
mod state;
mod trace;

pub use coloring::{
    check_coloring, compute_alpha_beta, max_feasible_step, roundable_coloring, step_directions,
    Coloring, Sign, StepMagnitudes,
};
pub use forest::Snapshot;
pub use pathseq::{cc_walk, find_ccc, PathSegment, PathSeq, PathSeqKind, Walk};
pub use replay::{enumerate_outcomes, Distribution, Leaf, ReplayError};
pub use state::{RoundingState, Settled};
pub use trace::{to_json_lines, BranchTaken, StepPhase, TraceStep};

use crate::lp::LpSolution;
use crate::model::Allocation;
use crate::rational::Rational;
use crate::vbm::{
    allocation_from_integral, expand_floating, EdgeId, FractionalSolution, InfeasibleInput,
    NonIntegral, VbmGraph,
};
use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoundingError {
    #[error(transparent)]
    Input(#[from] InfeasibleInput),
    #[error("edge e{edge} would take value {value} outside [0, 1]")]
    NotUnit { edge: EdgeId, value: String },
    #[error("component of {vertex} has no second floating vertex")]
    LonelyComponent { vertex: String },
    #[error("invalid path sequence: {0}")]
    InvalidPathSeq(String),
    #[error("coloring cannot close between {last} and {first}")]
    ColoringParity { last: String, first: String },
    #[error("invalid coloring: {0}")]
    InvalidColoring(String),
    #[error("step magnitude is zero")]
    ZeroStep,
    #[error("iteration {iteration}: {detail}")]
    Invariant { iteration: usize, detail: String },
    #[error(transparent)]
    NonIntegral(#[from] NonIntegral),
}

/// Supplies the random branch decisions of a rounding run.
pub trait BranchSource {
    /// Returns `true` to take the α-branch, which has probability `p_alpha`.
    fn take_alpha(&mut self, p_alpha: &Rational) -> bool;
}

/// Exact-threshold sampling from a ChaCha stream: the α-branch is taken when
/// a uniform 64-bit draw is below `floor(p · 2^64)`.
#[derive(Clone, Debug)]
pub struct SeededBranches {
    rng: ChaCha8Rng,
}

impl SeededBranches {
    pub fn new(seed: u64) -> Self {
        SeededBranches {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Independent stream `trial` of the generator seeded by `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(trial);
        SeededBranches { rng }
    }
}

pub(crate) fn threshold(p: &Rational) -> u128 {
    let scaled = p * Rational::from_integer(BigInt::one() << 64);
    scaled.floor().to_integer().to_u128().unwrap_or(0)
}

impl BranchSource for SeededBranches {
    fn take_alpha(&mut self, p_alpha: &Rational) -> bool {
        u128::from(self.rng.next_u64()) < threshold(p_alpha)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Algorithm {
    #[default]
    BarterDr,
    Gkps,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RoundingOptions {
    pub record_trace: bool,
}

/// Integral result of one rounding run, on the graph it was started from.
#[derive(Clone, Debug)]
pub struct RoundingOutcome {
    pub x: FractionalSolution,
    pub allocation: Allocation,
    pub trace: Vec<TraceStep>,
    pub iterations: usize,
}

pub fn barter_dr(
    graph: &VbmGraph,
    lp: &LpSolution,
    seed: u64,
) -> Result<RoundingOutcome, RoundingError> {
    round_solution(
        graph,
        &lp.x,
        Algorithm::BarterDr,
        &mut SeededBranches::new(seed),
        RoundingOptions { record_trace: true },
    )
}

pub fn gkps_dr(
    graph: &VbmGraph,
    lp: &LpSolution,
    seed: u64,
) -> Result<RoundingOutcome, RoundingError> {
    round_solution(
        graph,
        &lp.x,
        Algorithm::Gkps,
        &mut SeededBranches::new(seed),
        RoundingOptions { record_trace: true },
    )
}

/// Rounds any feasible (possibly capacitated) solution: the integral part is
/// kept and the fractional residue is rounded on the unit expansion.
pub fn round_solution(
    graph: &VbmGraph,
    x: &FractionalSolution,
    algorithm: Algorithm,
    source: &mut dyn BranchSource,
    options: RoundingOptions,
) -> Result<RoundingOutcome, RoundingError> {
    let expansion = expand_floating(graph, x)?;
    let mut trace = Vec::new();
    let recorder = options.record_trace.then_some(&mut trace);
    let unit = round_unit(
        &expansion.unit_graph,
        expansion.unit_x.values.clone(),
        algorithm,
        source,
        recorder,
    )?;
    let iterations = unit.1;
    let x_final = expansion.recombine(&unit.0);
    if algorithm == Algorithm::BarterDr && x.net_values(graph).iter().all(|d| d.is_zero()) {
        for (agent, d) in x_final.net_values(graph).iter().enumerate() {
            if !d.is_zero() && d.abs() >= graph.max_value(agent) {
                return Err(RoundingError::Invariant {
                    iteration: iterations,
                    detail: format!(
                        "agent `{}` ends with net loss {d}, not below its largest value",
                        graph.agents()[agent]
                    ),
                });
            }
        }
    }
    let x = x_final;
    let allocation = allocation_from_integral(graph, &x)?;
    Ok(RoundingOutcome {
        x,
        allocation,
        trace,
        iterations,
    })
}

/// Rounds a solution over a graph whose edge values all lie in `[0, 1]`.
/// Returns the integral vector and the number of iterations performed.
pub fn round_unit(
    graph: &VbmGraph,
    x: Vec<Rational>,
    algorithm: Algorithm,
    source: &mut dyn BranchSource,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<(FractionalSolution, usize), RoundingError> {
    let mut state = RoundingState::new(graph, x)?;
    let budget = graph.vertices().len() + graph.edges().len();
    match algorithm {
        Algorithm::BarterDr => {
            preprocess_cycles(&mut state, source, trace.as_deref_mut())?;
            while state.has_floating_edges() {
                let seq = find_ccc(&state)?;
                barter_step(&mut state, &seq, source, trace.as_deref_mut())?;
            }
        }
        Algorithm::Gkps => {
            state.disable_barter_check();
            while state.has_floating_edges() {
                let (edges, phase) = match state.snapshot().find_cycle(graph) {
                    Some(cycle) => (cycle, StepPhase::Cycle),
                    None => (maximal_path(&state), StepPhase::Path),
                };
                gkps_step(&mut state, &edges, phase, source, trace.as_deref_mut())?;
            }
        }
    }
    if state.iteration() > budget {
        return Err(RoundingError::Invariant {
            iteration: state.iteration(),
            detail: format!("exceeded the {budget} iteration bound"),
        });
    }
    let iterations = state.iteration();
    Ok((state.into_solution(), iterations))
}

/// Rounds cycles of floating edges with the plain two-matching update until
/// the floating subgraph is a forest. Fractional degrees never change.
pub fn preprocess_cycles(
    state: &mut RoundingState<'_>,
    source: &mut dyn BranchSource,
    mut trace: Option<&mut Vec<TraceStep>>,
) -> Result<(), RoundingError> {
    while let Some(cycle) = state.snapshot().find_cycle(state.graph()) {
        let degrees: Vec<Rational> = (0..state.graph().vertices().len())
            .map(|v| state.degree(v).clone())
            .collect();
        gkps_step(
            state,
            &cycle,
            StepPhase::Cycle,
            source,
            trace.as_deref_mut(),
        )?;
        if let Some(v) = (0..degrees.len()).find(|&v| state.degree(v) != &degrees[v]) {
            return Err(RoundingError::Invariant {
                iteration: state.iteration(),
                detail: format!(
                    "cycle rounding moved the degree of {}",
                    state.graph().label(v)
                ),
            });
        }
    }
    Ok(())
}

/// A maximal path of floating edges starting at the lowest leaf and always
/// continuing along the lowest unused floating edge. Requires an acyclic
/// floating subgraph.
fn maximal_path(state: &RoundingState<'_>) -> Vec<EdgeId> {
    let snap = state.snapshot();
    let graph = state.graph();
    let start = (0..snap.adjacency.len())
        .find(|&v| snap.adjacency[v].len() == 1)
        .expect("a floating forest has a leaf");
    let mut path = Vec::new();
    let (mut at, mut via) = (start, None);
    while let Some(&e) = snap.adjacency[at].iter().find(|&&e| Some(e) != via) {
        path.push(e);
        at = graph.edge(e).other(at);
        via = Some(e);
    }
    path
}

/// Two-matching update on a path or even cycle: alternate edges go up and
/// down together.
fn gkps_step(
    state: &mut RoundingState<'_>,
    edges: &[EdgeId],
    phase: StepPhase,
    source: &mut dyn BranchSource,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<(), RoundingError> {
    let x = state.x();
    let one = Rational::one();
    let (mut alpha, mut beta): (Option<Rational>, Option<Rational>) = (None, None);
    let mut dirs = Vec::with_capacity(edges.len());
    for (k, &e) in edges.iter().enumerate() {
        let (up, down) = (&one - &x[e], x[e].clone());
        let (a, b, d) = if k % 2 == 0 {
            (up, down, one.clone())
        } else {
            (down, up, -one.clone())
        };
        if alpha.as_ref().is_none_or(|cur| a < *cur) {
            alpha = Some(a);
        }
        if beta.as_ref().is_none_or(|cur| b < *cur) {
            beta = Some(b);
        }
        dirs.push((e, d));
    }
    let magnitudes = match (alpha, beta) {
        (Some(alpha), Some(beta)) if alpha.is_positive() && beta.is_positive() => {
            StepMagnitudes { alpha, beta }
        }
        _ => return Err(RoundingError::ZeroStep),
    };
    apply_branch(state, &dirs, &magnitudes, source, trace, phase, Vec::new())
}

fn barter_step(
    state: &mut RoundingState<'_>,
    seq: &PathSeq,
    source: &mut dyn BranchSource,
    trace: Option<&mut Vec<TraceStep>>,
) -> Result<(), RoundingError> {
    seq.validate(state)?;
    let graph = state.graph();
    let coloring = roundable_coloring(graph, seq)?;
    check_coloring(graph, seq, &coloring).map_err(RoundingError::InvalidColoring)?;
    let magnitudes = compute_alpha_beta(state, seq, &coloring)?;
    let dirs = step_directions(graph, seq, &coloring);
    let phase = match seq.kind {
        PathSeqKind::Ccc => StepPhase::Ccc,
        PathSeqKind::Ccw => StepPhase::Ccw,
    };
    apply_branch(
        state,
        &dirs,
        &magnitudes,
        source,
        trace,
        phase,
        seq.endpoints(),
    )
}

/// Samples a branch and moves `x` by `+α·dir` or `-β·dir`.
fn apply_branch(
    state: &mut RoundingState<'_>,
    dirs: &[(EdgeId, Rational)],
    magnitudes: &StepMagnitudes,
    source: &mut dyn BranchSource,
    trace: Option<&mut Vec<TraceStep>>,
    phase: StepPhase,
    endpoints: Vec<(usize, usize)>,
) -> Result<(), RoundingError> {
    let take_alpha = source.take_alpha(&magnitudes.alpha_probability());
    let step = if take_alpha {
        magnitudes.alpha.clone()
    } else {
        -magnitudes.beta.clone()
    };
    let iteration = state.iteration();
    let settled = state.apply(dirs, &step)?;
    if let Some(trace) = trace {
        let graph = state.graph();
        trace.push(TraceStep {
            iteration,
            phase,
            endpoints: endpoints
                .iter()
                .map(|&(s, t)| [graph.label(s), graph.label(t)])
                .collect(),
            alpha: magnitudes.alpha.clone(),
            beta: magnitudes.beta.clone(),
            branch: if take_alpha {
                BranchTaken::Alpha
            } else {
                BranchTaken::Beta
            },
            settled: settled
                .iter()
                .map(|s| match s {
                    Settled::Edge(e) => format!("e{e}"),
                    Settled::Vertex(v) => graph.label(*v),
                })
                .collect(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests;
