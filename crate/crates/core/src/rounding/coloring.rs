//! Roundable colorings and the two step magnitudes of a rounding iteration.

use super::pathseq::{PathSeq, PathSeqKind};
use super::state::RoundingState;
use super::RoundingError;
use crate::rational::{ceil_slack, floor_slack, Rational};
use crate::vbm::{EdgeId, VbmGraph, VertexId};
use num::{One, Signed, Zero};

/// A ±1 sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn as_i64(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// `f` on the endpoints of every path, plus each path edge's matching class.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coloring {
    /// `(f(s_i), f(t_i))` per path.
    pub ends: Vec<(Sign, Sign)>,
    /// Matching class of each edge of each path, in path order.
    pub classes: Vec<Vec<Sign>>,
}

fn same_side(graph: &VbmGraph, a: VertexId, b: VertexId) -> bool {
    graph.vertex(a).side == graph.vertex(b).side
}

/// Greedy chain: `f(s_1) = +1`, then each color is forced by the side
/// relation with its predecessor.
pub fn roundable_coloring(graph: &VbmGraph, seq: &PathSeq) -> Result<Coloring, RoundingError> {
    let mut ends = Vec::with_capacity(seq.paths.len());
    let mut next = Sign::Plus;
    let mut prev_end: Option<VertexId> = None;
    for p in &seq.paths {
        let fs = match prev_end {
            Some(t) if same_side(graph, t, p.start) => next.flip(),
            _ => next,
        };
        let ft = if same_side(graph, p.start, p.end) {
            fs.flip()
        } else {
            fs
        };
        ends.push((fs, ft));
        next = ft;
        prev_end = Some(p.end);
    }
    if seq.kind == PathSeqKind::Ccc {
        let (t, s) = (seq.paths[seq.paths.len() - 1].end, seq.paths[0].start);
        let (ft, fs) = (ends[ends.len() - 1].1, ends[0].0);
        if (ft == fs) == same_side(graph, t, s) {
            return Err(RoundingError::ColoringParity {
                last: graph.label(t),
                first: graph.label(s),
            });
        }
    }
    let classes = seq
        .paths
        .iter()
        .zip(&ends)
        .map(|(p, &(fs, _))| {
            let mut c = fs;
            p.edges
                .iter()
                .map(|_| {
                    let here = c;
                    c = c.flip();
                    here
                })
                .collect()
        })
        .collect();
    Ok(Coloring { ends, classes })
}

/// Checks properties (i) and (ii) and that each endpoint's path edge lies in
/// the matching named by its color.
pub fn check_coloring(graph: &VbmGraph, seq: &PathSeq, col: &Coloring) -> Result<(), String> {
    let q = seq.paths.len();
    for (i, p) in seq.paths.iter().enumerate() {
        let (fs, ft) = col.ends[i];
        if (fs == ft) == same_side(graph, p.start, p.end) {
            return Err(format!("property (i) fails on path {i}"));
        }
        let classes = &col.classes[i];
        if classes.first() != Some(&fs) || classes.last() != Some(&ft) {
            return Err(format!(
                "path {i} endpoint edges are in the wrong matchings"
            ));
        }
        if classes.windows(2).any(|w| w[0] == w[1]) {
            return Err(format!("path {i} matchings do not alternate"));
        }
    }
    let links = match seq.kind {
        PathSeqKind::Ccc => q,
        PathSeqKind::Ccw => q - 1,
    };
    for i in 0..links {
        let j = (i + 1) % q;
        let (t, s) = (seq.paths[i].end, seq.paths[j].start);
        if (col.ends[i].1 == col.ends[j].0) == same_side(graph, t, s) {
            return Err(format!("property (ii) fails between paths {i} and {j}"));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StepMagnitudes {
    pub alpha: Rational,
    pub beta: Rational,
}

impl StepMagnitudes {
    /// Probability `β/(α+β)` of the α-branch.
    pub fn alpha_probability(&self) -> Rational {
        &self.beta / (&self.alpha + &self.beta)
    }
}

/// α is the smallest value-scaled step at which the α-branch (M₋₁ edges up,
/// M₊₁ edges down) makes an edge or endpoint hit a bound; β mirrors it.
pub fn compute_alpha_beta(
    state: &RoundingState<'_>,
    seq: &PathSeq,
    col: &Coloring,
) -> Result<StepMagnitudes, RoundingError> {
    let graph = state.graph();
    let x = state.x();
    let one = Rational::one();
    let mut alpha: Option<Rational> = None;
    let mut beta: Option<Rational> = None;
    let offer = |slot: &mut Option<Rational>, v: Rational| {
        if slot.as_ref().is_none_or(|cur| v < *cur) {
            *slot = Some(v);
        }
    };
    for (i, p) in seq.paths.iter().enumerate() {
        let v = &graph.edge(p.edges[0]).value;
        for (&e, &class) in p.edges.iter().zip(&col.classes[i]) {
            let up = v * (&one - &x[e]);
            let down = v * &x[e];
            match class {
                Sign::Minus => {
                    offer(&mut alpha, up);
                    offer(&mut beta, down);
                }
                Sign::Plus => {
                    offer(&mut alpha, down);
                    offer(&mut beta, up);
                }
            }
        }
        let (fs, ft) = col.ends[i];
        for (a, f) in [(p.start, fs), (p.end, ft)] {
            let d = state.degree(a);
            let up = v * ceil_slack(d);
            let down = v * floor_slack(d);
            match f {
                Sign::Minus => {
                    offer(&mut alpha, up);
                    offer(&mut beta, down);
                }
                Sign::Plus => {
                    offer(&mut alpha, down);
                    offer(&mut beta, up);
                }
            }
        }
    }
    match (alpha, beta) {
        (Some(alpha), Some(beta)) if alpha.is_positive() && beta.is_positive() => {
            Ok(StepMagnitudes { alpha, beta })
        }
        _ => Err(RoundingError::ZeroStep),
    }
}

/// Direction of every path edge in the α-branch: `+1/v` on M₋₁, `-1/v` on M₊₁.
pub fn step_directions(graph: &VbmGraph, seq: &PathSeq, col: &Coloring) -> Vec<(EdgeId, Rational)> {
    let mut dirs = Vec::new();
    for (i, p) in seq.paths.iter().enumerate() {
        let inv = Rational::one() / &graph.edge(p.edges[0]).value;
        for (&e, &class) in p.edges.iter().zip(&col.classes[i]) {
            let d = match class {
                Sign::Minus => inv.clone(),
                Sign::Plus => -inv.clone(),
            };
            dirs.push((e, d));
        }
    }
    dirs
}

/// Largest `γ` with `x + γ·dir` inside the edge box and the endpoint degree
/// bounds, computed directly from the directions. Serves as an independent
/// cross-check of [`compute_alpha_beta`].
pub fn max_feasible_step(state: &RoundingState<'_>, dirs: &[(EdgeId, Rational)]) -> Rational {
    let graph = state.graph();
    let x = state.x();
    let mut best: Option<Rational> = None;
    let mut take = |v: Rational| {
        if best.as_ref().is_none_or(|b| v < *b) {
            best = Some(v);
        }
    };
    let mut vertex_dir = std::collections::BTreeMap::<VertexId, Rational>::new();
    for (e, d) in dirs {
        if d.is_positive() {
            take((Rational::one() - &x[*e]) / d);
        } else if d.is_negative() {
            take(&x[*e] / -d.clone());
        }
        let edge = graph.edge(*e);
        for v in [edge.left, edge.right] {
            *vertex_dir.entry(v).or_insert_with(Rational::zero) += d;
        }
    }
    for (v, d) in vertex_dir {
        let deg = state.degree(v);
        if d.is_positive() {
            take(ceil_slack(deg) / &d);
        } else if d.is_negative() {
            take(floor_slack(deg) / -d);
        }
    }
    best.unwrap_or_else(Rational::zero)
}
