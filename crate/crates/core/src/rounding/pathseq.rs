//! Connected-component cycles and walks, and the searches that build them.

use super::state::RoundingState;
use super::RoundingError;
use crate::vbm::{EdgeId, VertexId};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PathSeqKind {
    Ccc,
    Ccw,
}

/// A simple path `start ⇝ end` of floating edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSegment {
    pub start: VertexId,
    pub end: VertexId,
    pub vertices: Vec<VertexId>,
    pub edges: Vec<EdgeId>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathSeq {
    pub kind: PathSeqKind,
    pub paths: Vec<PathSegment>,
}

impl PathSeq {
    pub fn from_endpoints(
        state: &RoundingState<'_>,
        kind: PathSeqKind,
        pairs: &[(VertexId, VertexId)],
    ) -> Result<Self, RoundingError> {
        let graph = state.graph();
        let paths = pairs
            .iter()
            .map(|&(s, t)| {
                let (vertices, edges) =
                    state.snapshot().tree_path(graph, s, t).ok_or_else(|| {
                        RoundingError::InvalidPathSeq(format!(
                            "no floating path {} ~> {}",
                            graph.label(s),
                            graph.label(t)
                        ))
                    })?;
                Ok(PathSegment {
                    start: s,
                    end: t,
                    vertices,
                    edges,
                })
            })
            .collect::<Result<_, RoundingError>>()?;
        Ok(PathSeq { kind, paths })
    }

    pub fn endpoints(&self) -> Vec<(VertexId, VertexId)> {
        self.paths.iter().map(|p| (p.start, p.end)).collect()
    }

    pub fn endpoint_set(&self) -> Vec<VertexId> {
        self.paths.iter().flat_map(|p| [p.start, p.end]).collect()
    }

    /// Checks every structural requirement of a CCC or CCW against `state`.
    pub fn validate(&self, state: &RoundingState<'_>) -> Result<(), RoundingError> {
        let graph = state.graph();
        let snap = state.snapshot();
        let bad = |msg: String| Err(RoundingError::InvalidPathSeq(msg));
        let q = self.paths.len();
        if q == 0 {
            return bad("empty sequence".into());
        }
        let mut components = Vec::with_capacity(q);
        for (i, p) in self.paths.iter().enumerate() {
            if p.start == p.end || p.edges.is_empty() {
                return bad(format!("path {i} is trivial"));
            }
            if p.vertices.first() != Some(&p.start) || p.vertices.last() != Some(&p.end) {
                return bad(format!("path {i} endpoints do not match its vertices"));
            }
            if p.vertices.len() != p.edges.len() + 1 {
                return bad(format!("path {i} has mismatched vertex and edge lists"));
            }
            let mut seen = p.vertices.clone();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != p.vertices.len() {
                return bad(format!("path {i} is not simple"));
            }
            let value = &graph.edge(p.edges[0]).value;
            for (k, &e) in p.edges.iter().enumerate() {
                let edge = graph.edge(e);
                let (a, b) = (p.vertices[k], p.vertices[k + 1]);
                if !((edge.left == a && edge.right == b) || (edge.left == b && edge.right == a)) {
                    return bad(format!("path {i} edge e{e} does not join its neighbors"));
                }
                if !snap.floating_edge[e] {
                    return bad(format!("path {i} uses settled edge e{e}"));
                }
                if &edge.value != value {
                    return bad(format!("path {i} mixes item values"));
                }
            }
            for v in [p.start, p.end] {
                if !state.is_floating(v) {
                    return bad(format!("endpoint {} is settled", graph.label(v)));
                }
            }
            let c = snap.component[p.start];
            if components.contains(&c) {
                return bad(format!("path {i} shares a component with an earlier path"));
            }
            components.push(c);
        }
        let links = match self.kind {
            PathSeqKind::Ccc => q,
            PathSeqKind::Ccw => q - 1,
        };
        for i in 0..links {
            let (t, s) = (self.paths[i].end, self.paths[(i + 1) % q].start);
            if !state.are_partners(t, s) {
                return bad(format!(
                    "{} and {} are not partners",
                    graph.label(t),
                    graph.label(s)
                ));
            }
        }
        let endpoints = self.endpoint_set();
        let (first, last) = (self.paths[0].start, self.paths[q - 1].end);
        for &a in &endpoints {
            let agent = state.agent_of(a);
            let count = endpoints
                .iter()
                .filter(|&&b| state.agent_of(b) == agent)
                .count();
            let open_end = self.kind == PathSeqKind::Ccw && (a == first || a == last);
            if open_end {
                if !state.is_partnerless(a) {
                    return bad(format!("walk end {} has a partner", graph.label(a)));
                }
            } else if count != 2 {
                return bad(format!(
                    "{} shares its agent with {count} endpoints",
                    graph.label(a)
                ));
            }
        }
        Ok(())
    }
}

/// Result of a component walk.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Walk {
    /// Half of a walk: `t_1, s_2, t_2, …, s_q, t_q`, ending at a partnerless vertex.
    Half(Vec<VertexId>),
    Closed(PathSeq),
}

/// Shared bookkeeping of a component walk, used both for fresh walks and for
/// replaying a concatenation of two half walks.
struct Walker<'s, 'g> {
    state: &'s RoundingState<'g>,
    /// `t_1, s_2, t_2, …`; the endpoint of component `k` is at `2k`.
    sequence: Vec<VertexId>,
    components: Vec<usize>,
}

impl<'s, 'g> Walker<'s, 'g> {
    fn new(state: &'s RoundingState<'g>, start: VertexId) -> Self {
        Walker {
            state,
            sequence: vec![start],
            components: vec![state.snapshot().component[start]],
        }
    }

    fn last(&self) -> VertexId {
        *self.sequence.last().expect("walk is never empty")
    }

    /// Pair list for the paths of components `from..` of the sequence.
    fn pairs_from(&self, from: usize) -> Vec<(VertexId, VertexId)> {
        (from..self.components.len())
            .map(|k| (self.sequence[2 * k - 1], self.sequence[2 * k]))
            .collect()
    }

    /// Enters the component of `s`; returns a cycle if it was seen already.
    fn enter(&self, s: VertexId) -> Option<Vec<(VertexId, VertexId)>> {
        let c = self.state.snapshot().component[s];
        let k = self.components.iter().position(|&x| x == c)?;
        let mut pairs = vec![(s, self.sequence[2 * k])];
        pairs.extend(self.pairs_from(k + 1));
        Some(pairs)
    }

    /// Appends `s, t`; returns a cycle if `t` has a partner in the walk.
    fn extend(
        &mut self,
        s: VertexId,
        t: VertexId,
    ) -> Result<Option<Vec<(VertexId, VertexId)>>, RoundingError> {
        self.sequence.push(s);
        let agent = self.state.agent_of(t);
        if let Some(p) = self
            .sequence
            .iter()
            .rposition(|&b| self.state.agent_of(b) == agent)
        {
            if p == self.sequence.len() - 1 {
                return Ok(Some(vec![(s, t)]));
            }
            if p % 2 == 0 {
                return Err(RoundingError::InvalidPathSeq(format!(
                    "last partner of {} is a path end",
                    self.state.graph().label(t)
                )));
            }
            let k = p.div_ceil(2);
            let mut pairs = self.pairs_from(k);
            pairs.push((s, t));
            return Ok(Some(pairs));
        }
        self.sequence.push(t);
        self.components.push(self.state.snapshot().component[s]);
        Ok(None)
    }
}

fn second_floating(state: &RoundingState<'_>, s: VertexId) -> Result<VertexId, RoundingError> {
    state
        .snapshot()
        .dfs_first_floating(state.graph(), s)
        .ok_or_else(|| RoundingError::LonelyComponent {
            vertex: state.graph().label(s),
        })
}

/// Walks from `start` through partners and components until a partnerless
/// vertex ends the walk or a revisit closes a CCC.
pub fn cc_walk(state: &RoundingState<'_>, start: VertexId) -> Result<Walk, RoundingError> {
    let mut walker = Walker::new(state, start);
    loop {
        let last = walker.last();
        let Some(&s) = state.floating_partners(last).first() else {
            return Ok(Walk::Half(walker.sequence));
        };
        if let Some(pairs) = walker.enter(s) {
            return PathSeq::from_endpoints(state, PathSeqKind::Ccc, &pairs).map(Walk::Closed);
        }
        let t = second_floating(state, s)?;
        if let Some(pairs) = walker.extend(s, t)? {
            return PathSeq::from_endpoints(state, PathSeqKind::Ccc, &pairs).map(Walk::Closed);
        }
    }
}

/// Finds a CCC or CCW in the current floating subgraph, which must be acyclic.
pub fn find_ccc(state: &RoundingState<'_>) -> Result<PathSeq, RoundingError> {
    let snap = state.snapshot();
    let s1 = snap
        .floating_vertices()
        .next()
        .ok_or_else(|| RoundingError::InvalidPathSeq("no floating vertex".into()))?;
    let t1 = snap
        .floating_vertices()
        .find(|&v| v != s1 && snap.component[v] == snap.component[s1])
        .ok_or_else(|| RoundingError::LonelyComponent {
            vertex: state.graph().label(s1),
        })?;
    let forward = match cc_walk(state, t1)? {
        Walk::Closed(p) => return Ok(p),
        Walk::Half(v) => v,
    };
    let backward = match cc_walk(state, s1)? {
        Walk::Closed(p) => return Ok(p),
        Walk::Half(v) => v,
    };
    // Reversed backward half, then the forward half: consecutive pairs are paths.
    let endpoints: Vec<VertexId> = backward.iter().rev().chain(&forward).copied().collect();
    let pairs: Vec<(VertexId, VertexId)> = endpoints.chunks(2).map(|c| (c[0], c[1])).collect();

    // Replay the concatenation as one walk starting at the end of its first
    // path; a revisit means the halves cross and yields a CCC.
    let mut walker = Walker::new(state, pairs[0].1);
    for &(s, t) in &pairs[1..] {
        if !state.are_partners(walker.last(), s) {
            return Err(RoundingError::InvalidPathSeq(format!(
                "half walks do not link at {}",
                state.graph().label(s)
            )));
        }
        if let Some(cycle) = walker.enter(s) {
            return PathSeq::from_endpoints(state, PathSeqKind::Ccc, &cycle);
        }
        if let Some(cycle) = walker.extend(s, t)? {
            return PathSeq::from_endpoints(state, PathSeqKind::Ccc, &cycle);
        }
    }
    PathSeq::from_endpoints(state, PathSeqKind::Ccw, &pairs)
}
