//! Value-balanced matching graph built from a barter instance.
//!
//! Each agent contributes one left vertex per owned item and one right
//! vertex per wished item; an edge joins an owner of item `j` to a different
//! agent wishing for `j`. Vertices are ordered left-before-right, then by
//! (agent, item, copy); edges by (left, right). Every structure downstream
//! relies on this ordering being stable.

use crate::model::{AgentId, Allocation, BarterInstance, ItemId, Transfer, ValidationError};
use crate::rational::{format_rational, Rational};
use num::{BigInt, Signed, ToPrimitive, Zero};
use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use thiserror::Error;

pub type VertexId = usize;
pub type EdgeId = usize;
/// Index of an agent in [`VbmGraph::agents`].
pub type AgentIx = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Left,
    Right,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vertex {
    pub side: Side,
    pub agent: AgentIx,
    pub item: ItemId,
    pub value: Rational,
    /// Owned copies on the left, wished copies on the right.
    pub cap: u32,
    pub copy_index: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Edge {
    pub left: VertexId,
    pub right: VertexId,
    pub item: ItemId,
    pub weight: Rational,
    pub value: Rational,
}

impl Edge {
    pub fn other(&self, v: VertexId) -> VertexId {
        if v == self.left {
            self.right
        } else {
            self.left
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VbmGraph {
    agents: Vec<AgentId>,
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    incident: Vec<Vec<EdgeId>>,
    kappa: Vec<Vec<VertexId>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("edge {edge} joins vertices of different items or sides")]
    MalformedEdge { edge: EdgeId },
    #[error("edge {edge} joins two vertices of the same agent")]
    SelfEdge { edge: EdgeId },
    #[error("connected component containing vertex {vertex} mixes items")]
    MixedComponent { vertex: VertexId },
}

impl VbmGraph {
    /// Assembles a graph, sorting vertices and edges into canonical order.
    pub fn from_parts(
        agents: Vec<AgentId>,
        mut vertices: Vec<Vertex>,
        edges: Vec<(VertexId, VertexId, Rational)>,
    ) -> Result<Self, GraphError> {
        let order = |v: &Vertex| {
            (
                v.side,
                agents[v.agent].clone(),
                v.item.clone(),
                v.copy_index,
            )
        };
        let mut perm: Vec<usize> = (0..vertices.len()).collect();
        perm.sort_by_key(|&i| order(&vertices[i]));
        let mut new_index = vec![0; vertices.len()];
        for (new, &old) in perm.iter().enumerate() {
            new_index[old] = new;
        }
        let mut sorted: Vec<Option<Vertex>> = vertices.drain(..).map(Some).collect();
        let vertices: Vec<Vertex> = perm
            .iter()
            .map(|&old| sorted[old].take().unwrap())
            .collect();

        let mut edge_list: Vec<(VertexId, VertexId, Rational)> = edges
            .into_iter()
            .map(|(l, r, w)| (new_index[l], new_index[r], w))
            .collect();
        edge_list.sort_by_key(|e| (e.0, e.1));

        let mut incident = vec![Vec::new(); vertices.len()];
        let mut built = Vec::with_capacity(edge_list.len());
        for (id, (left, right, weight)) in edge_list.into_iter().enumerate() {
            let (l, r) = (&vertices[left], &vertices[right]);
            if l.side != Side::Left || r.side != Side::Right || l.item != r.item {
                return Err(GraphError::MalformedEdge { edge: id });
            }
            if l.agent == r.agent {
                return Err(GraphError::SelfEdge { edge: id });
            }
            incident[left].push(id);
            incident[right].push(id);
            built.push(Edge {
                left,
                right,
                item: l.item.clone(),
                weight,
                value: l.value.clone(),
            });
        }
        let mut kappa = vec![Vec::new(); agents.len()];
        for (id, v) in vertices.iter().enumerate() {
            kappa[v.agent].push(id);
        }
        let graph = VbmGraph {
            agents,
            vertices,
            edges: built,
            incident,
            kappa,
        };
        graph.check_item_homogeneous()?;
        Ok(graph)
    }

    pub fn agents(&self) -> &[AgentId] {
        &self.agents
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn vertex(&self, id: VertexId) -> &Vertex {
        &self.vertices[id]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn incident(&self, v: VertexId) -> &[EdgeId] {
        &self.incident[v]
    }

    /// All vertices owned by agent `agent` (its left and right vertices).
    pub fn kappa(&self, agent: AgentIx) -> &[VertexId] {
        &self.kappa[agent]
    }

    pub fn left_count(&self) -> usize {
        self.vertices
            .iter()
            .filter(|v| v.side == Side::Left)
            .count()
    }

    pub fn right_count(&self) -> usize {
        self.vertices.len() - self.left_count()
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<AgentIx> {
        self.agents.iter().position(|a| a == id)
    }

    /// Largest vertex value in the agent's κ set.
    pub fn max_value(&self, agent: AgentIx) -> Rational {
        self.kappa[agent]
            .iter()
            .map(|&v| &self.vertices[v].value)
            .max()
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn label(&self, v: VertexId) -> String {
        let vx = &self.vertices[v];
        let side = match vx.side {
            Side::Left => 'L',
            Side::Right => 'R',
        };
        match vx.copy_index {
            Some(k) => format!("{side}:{}:{}#{k}", self.agents[vx.agent], vx.item),
            None => format!("{side}:{}:{}", self.agents[vx.agent], vx.item),
        }
    }

    pub fn check_item_homogeneous(&self) -> Result<(), GraphError> {
        let mut seen = vec![false; self.vertices.len()];
        for start in 0..self.vertices.len() {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let item = &self.vertices[start].item;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                if &self.vertices[v].item != item {
                    return Err(GraphError::MixedComponent { vertex: v });
                }
                for &e in &self.incident[v] {
                    let u = self.edges[e].other(v);
                    if !seen[u] {
                        seen[u] = true;
                        queue.push_back(u);
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Display for VbmGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (id, e) in self.edges.iter().enumerate() {
            writeln!(
                f,
                "e{id}: {} -> {} (w={})",
                self.label(e.left),
                self.label(e.right),
                format_rational(&e.weight)
            )?;
        }
        Ok(())
    }
}

pub fn build_vbm(instance: &BarterInstance) -> Result<VbmGraph, ValidationError> {
    instance.validate()?;
    let agents: Vec<AgentId> = instance.agents.iter().map(|a| a.id.clone()).collect();
    let mut vertices = Vec::new();
    let mut left_of: BTreeMap<&ItemId, Vec<(usize, VertexId)>> = BTreeMap::new();
    let mut right_of: BTreeMap<&ItemId, Vec<(usize, VertexId)>> = BTreeMap::new();
    for (ix, agent) in instance.agents.iter().enumerate() {
        for (side, map, index) in [
            (Side::Left, &agent.have, &mut left_of),
            (Side::Right, &agent.wish, &mut right_of),
        ] {
            for (item, &cap) in map {
                index.entry(item).or_default().push((ix, vertices.len()));
                vertices.push(Vertex {
                    side,
                    agent: ix,
                    item: item.clone(),
                    value: instance.item_value(item).cloned().expect("validated"),
                    cap,
                    copy_index: None,
                });
            }
        }
    }
    let mut edges = Vec::new();
    for (item, owners) in &left_of {
        let Some(wishers) = right_of.get(item) else {
            continue;
        };
        for &(giver, l) in owners {
            for &(receiver, r) in wishers {
                if giver != receiver {
                    let w = instance.weight(&agents[giver], &agents[receiver], item);
                    edges.push((l, r, w));
                }
            }
        }
    }
    Ok(VbmGraph::from_parts(agents, vertices, edges).expect("construction is item-homogeneous"))
}

/// Per-edge values `x_e` over a fixed [`VbmGraph`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FractionalSolution {
    pub values: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityViolation {
    #[error("solution has {got} values for {expected} edges")]
    WrongLength { expected: usize, got: usize },
    #[error("edge {edge} value {value} is outside [0, {cap}]")]
    EdgeBound {
        edge: EdgeId,
        value: String,
        cap: u32,
    },
    #[error("vertex {vertex} degree {degree} exceeds capacity {cap}")]
    DegreeBound {
        vertex: String,
        degree: String,
        cap: u32,
    },
    #[error("agent `{agent}` gives value {given} but receives {received}")]
    Unbalanced {
        agent: AgentId,
        given: String,
        received: String,
    },
}

impl FractionalSolution {
    pub fn zeros(graph: &VbmGraph) -> Self {
        FractionalSolution {
            values: vec![Rational::zero(); graph.edges().len()],
        }
    }

    pub fn degree(&self, graph: &VbmGraph, v: VertexId) -> Rational {
        graph
            .incident(v)
            .iter()
            .fold(Rational::zero(), |acc, &e| acc + &self.values[e])
    }

    pub fn degrees(&self, graph: &VbmGraph) -> Vec<Rational> {
        let mut deg = vec![Rational::zero(); graph.vertices().len()];
        for (e, edge) in graph.edges().iter().enumerate() {
            deg[edge.left] += &self.values[e];
            deg[edge.right] += &self.values[e];
        }
        deg
    }

    pub fn objective(&self, graph: &VbmGraph) -> Rational {
        graph
            .edges()
            .iter()
            .zip(&self.values)
            .fold(Rational::zero(), |acc, (e, x)| acc + &e.weight * x)
    }

    /// (given value, received value) of every agent.
    pub fn value_flows(&self, graph: &VbmGraph) -> Vec<(Rational, Rational)> {
        let mut flows = vec![(Rational::zero(), Rational::zero()); graph.agents().len()];
        for (e, edge) in graph.edges().iter().enumerate() {
            let moved = &edge.value * &self.values[e];
            flows[graph.vertex(edge.left).agent].0 += &moved;
            flows[graph.vertex(edge.right).agent].1 += &moved;
        }
        flows
    }

    /// Net value loss of every agent: left value sum minus right value sum.
    pub fn net_values(&self, graph: &VbmGraph) -> Vec<Rational> {
        self.value_flows(graph)
            .into_iter()
            .map(|(g, r)| g - r)
            .collect()
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|x| x.is_integer())
    }

    pub fn floating_edge_count(&self) -> usize {
        self.values.iter().filter(|x| !x.is_integer()).count()
    }

    /// Checks bounds, degree caps and (optionally) every barter equality.
    pub fn check_feasible(
        &self,
        graph: &VbmGraph,
        require_balanced: bool,
    ) -> Result<(), FeasibilityViolation> {
        if self.values.len() != graph.edges().len() {
            return Err(FeasibilityViolation::WrongLength {
                expected: graph.edges().len(),
                got: self.values.len(),
            });
        }
        for (e, edge) in graph.edges().iter().enumerate() {
            let cap = graph
                .vertex(edge.left)
                .cap
                .min(graph.vertex(edge.right).cap);
            let x = &self.values[e];
            if x.is_negative() || x > &Rational::from_integer(cap.into()) {
                return Err(FeasibilityViolation::EdgeBound {
                    edge: e,
                    value: format_rational(x),
                    cap,
                });
            }
        }
        for (v, degree) in self.degrees(graph).iter().enumerate() {
            let cap = graph.vertex(v).cap;
            if degree > &Rational::from_integer(cap.into()) {
                return Err(FeasibilityViolation::DegreeBound {
                    vertex: graph.label(v),
                    degree: format_rational(degree),
                    cap,
                });
            }
        }
        if require_balanced {
            for (agent, (given, received)) in self.value_flows(graph).iter().enumerate() {
                if given != received {
                    return Err(FeasibilityViolation::Unbalanced {
                        agent: graph.agents()[agent].clone(),
                        given: format_rational(given),
                        received: format_rational(received),
                    });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("edge {edge} has non-integral or negative value {value}")]
pub struct NonIntegral {
    pub edge: EdgeId,
    pub value: String,
}

pub fn allocation_from_integral(
    graph: &VbmGraph,
    x: &FractionalSolution,
) -> Result<Allocation, NonIntegral> {
    let mut transfers = Vec::new();
    for (e, edge) in graph.edges().iter().enumerate() {
        let value = &x.values[e];
        let count = (value.is_integer() && !value.is_negative())
            .then(|| value.to_integer().to_u32())
            .flatten()
            .ok_or_else(|| NonIntegral {
                edge: e,
                value: format_rational(value),
            })?;
        if count > 0 {
            transfers.push(Transfer {
                giver: graph.agents()[graph.vertex(edge.left).agent].clone(),
                receiver: graph.agents()[graph.vertex(edge.right).agent].clone(),
                item: edge.item.clone(),
                count,
            });
        }
    }
    Ok(Allocation::new(transfers))
}

/// The integral part of a capacitated solution together with a unit graph
/// carrying only its fractional residue.
///
/// Each original vertex touched by a fractional edge gets exactly one lazy
/// copy whose capacity is the vertex's remaining capacity after the integral
/// part. Each fractional edge `x_e = k + r` contributes `k` to `base` and one
/// copy-edge at value `r` to `unit_x`.
#[derive(Clone, Debug)]
pub struct Expansion {
    pub base: FractionalSolution,
    pub unit_graph: VbmGraph,
    pub unit_x: FractionalSolution,
    /// Original edge of each unit edge.
    pub edge_origin: Vec<EdgeId>,
    /// Original vertex of each unit vertex.
    pub vertex_origin: Vec<VertexId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("input solution is infeasible: {0}")]
pub struct InfeasibleInput(#[from] pub FeasibilityViolation);

pub fn expand_floating(
    graph: &VbmGraph,
    x: &FractionalSolution,
) -> Result<Expansion, InfeasibleInput> {
    x.check_feasible(graph, false)?;
    let base = FractionalSolution {
        values: x.values.iter().map(|v| v.floor()).collect(),
    };
    let base_degree = base.degrees(graph);
    let floating: Vec<EdgeId> = (0..graph.edges().len())
        .filter(|&e| !x.values[e].is_integer())
        .collect();

    let mut copy_of: BTreeMap<VertexId, VertexId> = BTreeMap::new();
    let mut vertices = Vec::new();
    let mut origin_unsorted = Vec::new();
    let mut copy = |v: VertexId, vertices: &mut Vec<Vertex>| -> VertexId {
        *copy_of.entry(v).or_insert_with(|| {
            let src = graph.vertex(v);
            let used = base_degree[v].to_integer().to_u32().unwrap_or(0);
            vertices.push(Vertex {
                cap: src.cap - used,
                copy_index: Some(1),
                ..src.clone()
            });
            origin_unsorted.push(v);
            vertices.len() - 1
        })
    };
    let mut edges = Vec::new();
    for &e in &floating {
        let edge = graph.edge(e);
        let l = copy(edge.left, &mut vertices);
        let r = copy(edge.right, &mut vertices);
        edges.push((l, r, edge.weight.clone()));
    }
    let unit_graph = VbmGraph::from_parts(graph.agents().to_vec(), vertices, edges)
        .expect("copies inherit a valid graph's structure");

    // Map sorted unit vertices/edges back to originals via their labels' keys.
    let origin_by_key: BTreeMap<(Side, AgentIx, ItemId), VertexId> = origin_unsorted
        .iter()
        .map(|&v| {
            let vx = graph.vertex(v);
            ((vx.side, vx.agent, vx.item.clone()), v)
        })
        .collect();
    let vertex_origin: Vec<VertexId> = unit_graph
        .vertices()
        .iter()
        .map(|u| origin_by_key[&(u.side, u.agent, u.item.clone())])
        .collect();
    let edge_by_ends: BTreeMap<(VertexId, VertexId), EdgeId> = graph
        .edges()
        .iter()
        .enumerate()
        .map(|(e, edge)| ((edge.left, edge.right), e))
        .collect();
    let edge_origin: Vec<EdgeId> = unit_graph
        .edges()
        .iter()
        .map(|u| edge_by_ends[&(vertex_origin[u.left], vertex_origin[u.right])])
        .collect();
    let unit_x = FractionalSolution {
        values: edge_origin
            .iter()
            .map(|&e| &x.values[e] - &base.values[e])
            .collect(),
    };
    Ok(Expansion {
        base,
        unit_graph,
        unit_x,
        edge_origin,
        vertex_origin,
    })
}

impl Expansion {
    /// Adds a unit-graph solution back onto the integral base.
    pub fn recombine(&self, unit: &FractionalSolution) -> FractionalSolution {
        let mut values = self.base.values.clone();
        for (u, &e) in self.edge_origin.iter().enumerate() {
            values[e] += &unit.values[u];
        }
        FractionalSolution { values }
    }

    /// Net value loss contributed by the integral base, per agent.
    pub fn base_net_values(&self, graph: &VbmGraph) -> Vec<Rational> {
        self.base.net_values(graph)
    }
}

/// Integer count helper shared by callers turning rounded residues into copies.
pub fn to_count(x: &Rational) -> Option<u32> {
    if x.is_integer() && !x.is_negative() {
        x.to_integer().to_u32()
    } else {
        None
    }
}

pub fn from_count(count: u32) -> Rational {
    Rational::from_integer(BigInt::from(count))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{figure_one, gap_family, gkps_worst_case};
    use crate::rational::{int, ratio};

    #[test]
    fn figure_one_shape() {
        let g = build_vbm(&figure_one()).unwrap();
        assert_eq!(g.left_count(), 4);
        assert_eq!(g.right_count(), 6);
        assert_eq!(g.edges().len(), 6);
        let labels: Vec<String> = (0..4).map(|v| g.label(v)).collect();
        assert_eq!(labels, ["L:1:a", "L:1:b", "L:2:c", "L:3:d"]);
        assert_eq!(g.kappa(0).len(), 4);
    }

    #[test]
    fn single_agent_has_no_edges() {
        let mut inst = figure_one();
        inst.agents.truncate(1);
        let g = build_vbm(&inst).unwrap();
        assert!(g.edges().is_empty());
    }

    #[test]
    fn gap_family_shape() {
        let g = build_vbm(&gap_family(4)).unwrap();
        assert_eq!(
            (g.left_count(), g.right_count(), g.edges().len()),
            (2, 2, 2)
        );
    }

    #[test]
    fn worst_case_edge_order() {
        let g = build_vbm(&gkps_worst_case()).unwrap();
        let ends: Vec<(String, String)> = g
            .edges()
            .iter()
            .map(|e| (g.label(e.left), g.label(e.right)))
            .collect();
        assert_eq!(ends[0], ("L:1:3".into(), "R:2:3".into()));
        assert_eq!(ends[2], ("L:2:1".into(), "R:1:1".into()));
    }

    #[test]
    fn integral_solutions_become_allocations() {
        let g = build_vbm(&gkps_worst_case()).unwrap();
        assert!(allocation_from_integral(&g, &FractionalSolution::zeros(&g))
            .unwrap()
            .is_empty());
        let x = FractionalSolution {
            values: vec![int(1), int(0), int(1), int(1)],
        };
        let alloc = allocation_from_integral(&g, &x).unwrap();
        assert_eq!(alloc.transfers().len(), 3);
        let report = crate::model::evaluate_allocation(&gkps_worst_case(), &alloc).unwrap();
        assert_eq!(report.utility, x.objective(&g));
        assert!(report.is_balanced());

        let half = FractionalSolution {
            values: vec![ratio(1, 2), int(0), int(1), int(1)],
        };
        assert!(allocation_from_integral(&g, &half).is_err());
    }

    #[test]
    fn figure_two_edge_becomes_transfer() {
        let g = build_vbm(&figure_one()).unwrap();
        let mut x = FractionalSolution::zeros(&g);
        let e = g
            .edges()
            .iter()
            .position(|e| g.label(e.left) == "L:1:a" && g.label(e.right) == "R:2:a")
            .unwrap();
        x.values[e] = int(1);
        let alloc = allocation_from_integral(&g, &x).unwrap();
        assert_eq!(
            alloc.transfers(),
            [Transfer {
                giver: "1".into(),
                receiver: "2".into(),
                item: "a".into(),
                count: 1
            }]
        );
    }

    fn capacitated() -> BarterInstance {
        let mut inst = gkps_worst_case();
        for a in &mut inst.agents {
            for cap in a.have.values_mut().chain(a.wish.values_mut()) {
                *cap = 5;
            }
        }
        inst
    }

    #[test]
    fn expansion_splits_integer_and_residue() {
        let g = build_vbm(&capacitated()).unwrap();
        let x = FractionalSolution {
            values: vec![int(3), ratio(12, 5), int(0), int(0)],
        };
        let exp = expand_floating(&g, &x).unwrap();
        assert_eq!(exp.base.values, vec![int(3), int(2), int(0), int(0)]);
        assert_eq!(exp.unit_x.values, vec![ratio(2, 5)]);
        assert_eq!(exp.unit_graph.edges().len(), 1);
        assert_eq!(exp.edge_origin, vec![1]);
        let copy = exp.unit_graph.vertex(exp.unit_graph.edge(0).left);
        assert_eq!((copy.cap, copy.copy_index), (3, Some(1)));
        assert_eq!(exp.recombine(&exp.unit_x), x);
    }

    #[test]
    fn integral_input_expands_to_nothing() {
        let g = build_vbm(&capacitated()).unwrap();
        let x = FractionalSolution {
            values: vec![int(3), int(1), int(0), int(2)],
        };
        let exp = expand_floating(&g, &x).unwrap();
        assert!(exp.unit_x.values.is_empty());
        assert_eq!(exp.base, x);
    }

    #[test]
    fn over_capacity_input_rejected() {
        let g = build_vbm(&gkps_worst_case()).unwrap();
        let x = FractionalSolution {
            values: vec![int(2), int(0), int(0), int(0)],
        };
        assert!(expand_floating(&g, &x).is_err());
    }
}
