use super::forest::Snapshot;
use super::RoundingError;
use crate::rational::{format_rational, Rational};
use crate::vbm::{AgentIx, EdgeId, FractionalSolution, VbmGraph, VertexId};
use num::{One, Signed};

/// The iterate `x^r` of one rounding run over a unit-capacity graph, plus
/// the bookkeeping used for per-step invariant checks.
#[derive(Clone, Debug)]
pub struct RoundingState<'g> {
    graph: &'g VbmGraph,
    x: Vec<Rational>,
    degree: Vec<Rational>,
    initial_floor: Vec<Rational>,
    initial_ceil: Vec<Rational>,
    initial_net: Vec<Rational>,
    /// Agents whose net value must still equal its initial value.
    protected: Vec<bool>,
    snapshot: Snapshot,
    iteration: usize,
    pub(crate) check_barter: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Settled {
    Edge(EdgeId),
    Vertex(VertexId),
}

impl<'g> RoundingState<'g> {
    pub fn new(graph: &'g VbmGraph, x: Vec<Rational>) -> Result<Self, RoundingError> {
        if x.len() != graph.edges().len() {
            return Err(RoundingError::Invariant {
                iteration: 0,
                detail: format!("{} values for {} edges", x.len(), graph.edges().len()),
            });
        }
        for (e, v) in x.iter().enumerate() {
            if v.is_negative() || v > &Rational::one() {
                return Err(RoundingError::NotUnit {
                    edge: e,
                    value: format_rational(v),
                });
            }
        }
        let sol = FractionalSolution { values: x };
        let degree = sol.degrees(graph);
        let initial_net = sol.net_values(graph);
        let snapshot = Snapshot::new(graph, &sol.values, &degree);
        let mut state = RoundingState {
            graph,
            initial_floor: degree.iter().map(|d| d.floor()).collect(),
            initial_ceil: degree.iter().map(|d| d.ceil()).collect(),
            degree,
            x: sol.values,
            protected: vec![true; graph.agents().len()],
            initial_net,
            snapshot,
            iteration: 0,
            check_barter: true,
        };
        state.boundary_check()?;
        Ok(state)
    }

    pub fn graph(&self) -> &'g VbmGraph {
        self.graph
    }

    pub fn x(&self) -> &[Rational] {
        &self.x
    }

    pub fn degree(&self, v: VertexId) -> &Rational {
        &self.degree[v]
    }

    pub fn snapshot(&self) -> &Snapshot {
        &self.snapshot
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn has_floating_edges(&self) -> bool {
        self.snapshot.floating_edge.iter().any(|&f| f)
    }

    pub fn is_floating(&self, v: VertexId) -> bool {
        self.snapshot.floating_vertex[v]
    }

    pub fn agent_of(&self, v: VertexId) -> AgentIx {
        self.graph.vertex(v).agent
    }

    /// Floating vertices of `agent`'s κ set, in vertex order.
    pub fn floating_in_kappa(&self, agent: AgentIx) -> Vec<VertexId> {
        self.graph
            .kappa(agent)
            .iter()
            .copied()
            .filter(|&v| self.is_floating(v))
            .collect()
    }

    /// Distinct floating vertices of the same agent as `v`, in vertex order.
    pub fn floating_partners(&self, v: VertexId) -> Vec<VertexId> {
        self.floating_in_kappa(self.agent_of(v))
            .into_iter()
            .filter(|&u| u != v)
            .collect()
    }

    pub fn is_partnerless(&self, v: VertexId) -> bool {
        self.floating_partners(v).is_empty()
    }

    pub fn are_partners(&self, a: VertexId, b: VertexId) -> bool {
        a != b && self.agent_of(a) == self.agent_of(b) && self.is_floating(a) && self.is_floating(b)
    }

    pub fn net_values(&self) -> Vec<Rational> {
        FractionalSolution {
            values: self.x.clone(),
        }
        .net_values(self.graph)
    }

    pub fn into_solution(self) -> FractionalSolution {
        FractionalSolution { values: self.x }
    }

    /// Moves `x_e += step * dir_e` for every listed edge, then re-derives the
    /// floating structure and checks the per-step invariants.
    pub(crate) fn apply(
        &mut self,
        dirs: &[(EdgeId, Rational)],
        step: &Rational,
    ) -> Result<Vec<Settled>, RoundingError> {
        let before = self.snapshot.settlement_count();
        let fail = |detail: String| RoundingError::Invariant {
            iteration: self.iteration,
            detail,
        };
        let mut touched: Vec<VertexId> = dirs
            .iter()
            .flat_map(|(e, _)| [self.graph.edge(*e).left, self.graph.edge(*e).right])
            .collect();
        touched.sort_unstable();
        touched.dedup();
        let old_degree: Vec<Rational> = touched.iter().map(|&v| self.degree[v].clone()).collect();
        for (e, dir) in dirs {
            if !self.snapshot.floating_edge[*e] {
                return Err(fail(format!("settled edge e{e} was modified")));
            }
            let delta = step * dir;
            let new = &self.x[*e] + &delta;
            if new.is_negative() || new > Rational::one() {
                return Err(RoundingError::NotUnit {
                    edge: *e,
                    value: format_rational(&new),
                });
            }
            self.x[*e] = new;
            let edge = self.graph.edge(*e);
            self.degree[edge.left] += &delta;
            self.degree[edge.right] += &delta;
        }
        for (&v, old) in touched.iter().zip(&old_degree) {
            let d = &self.degree[v];
            if d < &self.initial_floor[v] || d > &self.initial_ceil[v] {
                return Err(fail(format!(
                    "degree of {} left [{}, {}]: {}",
                    self.graph.label(v),
                    self.initial_floor[v],
                    self.initial_ceil[v],
                    format_rational(d)
                )));
            }
            if !self.snapshot.floating_vertex[v] && d != old {
                return Err(fail(format!(
                    "settled vertex {} changed",
                    self.graph.label(v)
                )));
            }
        }
        let previous = std::mem::replace(
            &mut self.snapshot,
            Snapshot::new(self.graph, &self.x, &self.degree),
        );
        let after = self.snapshot.settlement_count();
        if after >= before {
            return Err(fail(format!(
                "no progress: floating count {before} -> {after}"
            )));
        }
        let mut settled = Vec::new();
        for (e, _) in dirs {
            if previous.floating_edge[*e] && !self.snapshot.floating_edge[*e] {
                settled.push(Settled::Edge(*e));
            }
        }
        for &v in &touched {
            if previous.floating_vertex[v] && !self.snapshot.floating_vertex[v] {
                settled.push(Settled::Vertex(v));
            }
        }
        self.iteration += 1;
        self.boundary_check()?;
        Ok(settled)
    }

    /// Net values are frozen for every agent until the first boundary at
    /// which its κ set holds at most one floating vertex.
    fn boundary_check(&mut self) -> Result<(), RoundingError> {
        if !self.check_barter {
            return Ok(());
        }
        let net = self.net_values();
        for (agent, d) in net.iter().enumerate() {
            if !self.protected[agent] {
                continue;
            }
            if *d != self.initial_net[agent] {
                return Err(RoundingError::Invariant {
                    iteration: self.iteration,
                    detail: format!(
                        "agent `{}` net value moved from {} to {}",
                        self.graph.agents()[agent],
                        format_rational(&self.initial_net[agent]),
                        format_rational(d)
                    ),
                });
            }
            if self.floating_in_kappa(agent).len() <= 1 {
                self.protected[agent] = false;
            }
        }
        Ok(())
    }

    pub(crate) fn disable_barter_check(&mut self) {
        self.check_barter = false;
    }
}
