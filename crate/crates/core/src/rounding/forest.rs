//! Floating-subgraph structure: floating flags, components, paths and cycles.

use crate::rational::Rational;
use crate::vbm::{EdgeId, VbmGraph, VertexId};
use std::collections::VecDeque;

/// Floating structure of one iterate `x^r`.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub floating_edge: Vec<bool>,
    pub floating_vertex: Vec<bool>,
    /// Floating incident edges of each vertex, in edge order.
    pub adjacency: Vec<Vec<EdgeId>>,
    /// Component id in the floating subgraph. Vertices without floating
    /// edges are singleton components.
    pub component: Vec<usize>,
}

impl Snapshot {
    pub fn new(graph: &VbmGraph, x: &[Rational], degree: &[Rational]) -> Self {
        let floating_edge: Vec<bool> = x.iter().map(|v| !v.is_integer()).collect();
        let floating_vertex: Vec<bool> = degree.iter().map(|d| !d.is_integer()).collect();
        let mut adjacency = vec![Vec::new(); graph.vertices().len()];
        for (e, edge) in graph.edges().iter().enumerate() {
            if floating_edge[e] {
                adjacency[edge.left].push(e);
                adjacency[edge.right].push(e);
            }
        }
        let mut component = vec![usize::MAX; graph.vertices().len()];
        for start in 0..component.len() {
            if component[start] != usize::MAX {
                continue;
            }
            component[start] = start;
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &e in &adjacency[v] {
                    let u = graph.edge(e).other(v);
                    if component[u] == usize::MAX {
                        component[u] = start;
                        queue.push_back(u);
                    }
                }
            }
        }
        Snapshot {
            floating_edge,
            floating_vertex,
            adjacency,
            component,
        }
    }

    pub fn floating_edge_count(&self) -> usize {
        self.floating_edge.iter().filter(|&&f| f).count()
    }

    pub fn floating_vertex_count(&self) -> usize {
        self.floating_vertex.iter().filter(|&&f| f).count()
    }

    /// `|E^r| + |L^r| + |R^r|`.
    pub fn settlement_count(&self) -> usize {
        self.floating_edge_count() + self.floating_vertex_count()
    }

    pub fn floating_vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.floating_vertex.len()).filter(|&v| self.floating_vertex[v])
    }

    /// The unique simple path from `s` to `t` inside a tree component.
    pub fn tree_path(
        &self,
        graph: &VbmGraph,
        s: VertexId,
        t: VertexId,
    ) -> Option<(Vec<VertexId>, Vec<EdgeId>)> {
        if self.component[s] != self.component[t] {
            return None;
        }
        let mut parent: Vec<Option<(VertexId, EdgeId)>> = vec![None; self.adjacency.len()];
        let mut seen = vec![false; self.adjacency.len()];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(v) = queue.pop_front() {
            if v == t {
                break;
            }
            for &e in &self.adjacency[v] {
                let u = graph.edge(e).other(v);
                if !seen[u] {
                    seen[u] = true;
                    parent[u] = Some((v, e));
                    queue.push_back(u);
                }
            }
        }
        if !seen[t] {
            return None;
        }
        let (mut vertices, mut edges) = (vec![t], Vec::new());
        let mut cur = t;
        while let Some((p, e)) = parent[cur] {
            edges.push(e);
            vertices.push(p);
            cur = p;
        }
        vertices.reverse();
        edges.reverse();
        Some((vertices, edges))
    }

    /// First floating vertex other than `s` in a depth-first preorder from
    /// `s`, exploring incident edges in edge order.
    pub fn dfs_first_floating(&self, graph: &VbmGraph, s: VertexId) -> Option<VertexId> {
        let mut seen = vec![false; self.adjacency.len()];
        let mut stack = vec![s];
        while let Some(v) = stack.pop() {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if v != s && self.floating_vertex[v] {
                return Some(v);
            }
            for &e in self.adjacency[v].iter().rev() {
                let u = graph.edge(e).other(v);
                if !seen[u] {
                    stack.push(u);
                }
            }
        }
        None
    }

    /// Edges of some cycle of the floating subgraph, listed as a closed walk.
    pub fn find_cycle(&self, graph: &VbmGraph) -> Option<Vec<EdgeId>> {
        let n = self.adjacency.len();
        let mut visited = vec![false; n];
        let mut on_stack = vec![usize::MAX; n];
        for root in 0..n {
            if visited[root] || self.adjacency[root].is_empty() {
                continue;
            }
            // (vertex, edge used to reach it, next adjacency index)
            let mut stack: Vec<(VertexId, Option<EdgeId>, usize)> = vec![(root, None, 0)];
            visited[root] = true;
            on_stack[root] = 0;
            while let Some(&mut (v, via, ref mut next)) = stack.last_mut() {
                if *next == self.adjacency[v].len() {
                    on_stack[v] = usize::MAX;
                    stack.pop();
                    continue;
                }
                let e = self.adjacency[v][*next];
                *next += 1;
                if Some(e) == via {
                    continue;
                }
                let u = graph.edge(e).other(v);
                if on_stack[u] != usize::MAX {
                    let mut cycle: Vec<EdgeId> = stack[on_stack[u] + 1..]
                        .iter()
                        .map(|&(_, via, _)| via.expect("non-root frame"))
                        .collect();
                    cycle.push(e);
                    return Some(cycle);
                }
                if !visited[u] {
                    visited[u] = true;
                    on_stack[u] = stack.len();
                    stack.push((u, Some(e), 0));
                }
            }
        }
        None
    }
}
