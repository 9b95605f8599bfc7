//! LP relaxation of the barter integer program and its exact solver.

mod simplex;

pub use simplex::Relation;
use simplex::{Outcome, Row, Tableau};

use crate::model::FairnessGroup;
use crate::rational::{format_rational, Rational};
use crate::vbm::{FractionalSolution, VbmGraph, VertexId};
use num::{Signed, Zero};
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RowKind {
    Degree {
        vertex: VertexId,
    },
    Barter {
        agent: usize,
    },
    Fairness {
        group: usize,
    },
    /// Pins the objective to a fixed value; only used internally.
    ObjectiveLevel,
}

#[derive(Clone, Debug)]
pub struct LpRow {
    pub kind: RowKind,
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

/// `max objective · x` over `0 <= x <= upper` and `rows`. Variable `j` is
/// edge `j` of the graph the problem was built from.
#[derive(Clone, Debug)]
pub struct LpProblem {
    pub objective: Vec<Rational>,
    pub upper: Vec<Rational>,
    pub rows: Vec<LpRow>,
    labels: Vec<String>,
}

impl LpProblem {
    pub fn variable_count(&self) -> usize {
        self.objective.len()
    }

    fn count(&self, pred: impl Fn(&RowKind) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.kind)).count()
    }

    pub fn degree_count(&self) -> usize {
        self.count(|k| matches!(k, RowKind::Degree { .. }))
    }

    pub fn barter_count(&self) -> usize {
        self.count(|k| matches!(k, RowKind::Barter { .. }))
    }

    pub fn fairness_count(&self) -> usize {
        self.count(|k| matches!(k, RowKind::Fairness { .. }))
    }

    /// Exact textual dump in an LP-file style, fractions as `p/q`.
    pub fn to_lp_text(&self) -> String {
        let term_list = |coeffs: &[(usize, Rational)]| -> String {
            if coeffs.is_empty() {
                return "0".into();
            }
            coeffs
                .iter()
                .enumerate()
                .map(|(k, (j, a))| {
                    let sign = if a.is_negative() {
                        "- "
                    } else if k > 0 {
                        "+ "
                    } else {
                        ""
                    };
                    format!("{sign}{} x{j}", format_rational(&a.abs()))
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::from("maximize\n");
        let obj: Vec<(usize, Rational)> = self
            .objective
            .iter()
            .cloned()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .collect();
        let _ = writeln!(out, "  obj: {}", term_list(&obj));
        out.push_str("subject to\n");
        for (i, row) in self.rows.iter().enumerate() {
            let rel = match row.relation {
                Relation::Le => "<=",
                Relation::Eq => "=",
                Relation::Ge => ">=",
            };
            let name = match &row.kind {
                RowKind::Degree { vertex } => format!("deg{vertex}"),
                RowKind::Barter { agent } => format!("barter{agent}"),
                RowKind::Fairness { group } => format!("fair{group}"),
                RowKind::ObjectiveLevel => "level".into(),
            };
            let _ = writeln!(
                out,
                "  c{i}_{name}: {} {rel} {}",
                term_list(&row.coeffs),
                format_rational(&row.rhs)
            );
        }
        out.push_str("bounds\n");
        for (j, u) in self.upper.iter().enumerate() {
            let label = self.labels.get(j).map(String::as_str).unwrap_or("");
            let _ = writeln!(out, "  0 <= x{j} <= {}  \\ {label}", format_rational(u));
        }
        out.push_str("end\n");
        out
    }
}

pub fn build_lp(graph: &VbmGraph, fairness: &[FairnessGroup]) -> LpProblem {
    let edges = graph.edges();
    let objective = edges.iter().map(|e| e.weight.clone()).collect();
    let upper = edges
        .iter()
        .map(|e| {
            let cap = graph.vertex(e.left).cap.min(graph.vertex(e.right).cap);
            Rational::from_integer(cap.into())
        })
        .collect();
    let labels = edges
        .iter()
        .map(|e| format!("{} -> {}", graph.label(e.left), graph.label(e.right)))
        .collect();

    let mut rows = Vec::new();
    for (v, vx) in graph.vertices().iter().enumerate() {
        rows.push(LpRow {
            kind: RowKind::Degree { vertex: v },
            coeffs: graph
                .incident(v)
                .iter()
                .map(|&e| (e, Rational::from_integer(1.into())))
                .collect(),
            relation: Relation::Le,
            rhs: Rational::from_integer(vx.cap.into()),
        });
    }
    for agent in 0..graph.agents().len() {
        if graph.kappa(agent).is_empty() {
            continue;
        }
        let mut coeffs = vec![Rational::zero(); edges.len()];
        for (e, edge) in edges.iter().enumerate() {
            if graph.vertex(edge.left).agent == agent {
                coeffs[e] += &edge.value;
            }
            if graph.vertex(edge.right).agent == agent {
                coeffs[e] -= &edge.value;
            }
        }
        rows.push(LpRow {
            kind: RowKind::Barter { agent },
            coeffs: sparse(coeffs),
            relation: Relation::Eq,
            rhs: Rational::zero(),
        });
    }
    for (group, g) in fairness.iter().enumerate() {
        let members: Vec<usize> = g
            .agents
            .iter()
            .filter_map(|a| graph.agent_index(a))
            .collect();
        let coeffs = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| members.contains(&graph.vertex(e.right).agent))
            .map(|(j, e)| (j, e.value.clone()))
            .collect();
        rows.push(LpRow {
            kind: RowKind::Fairness { group },
            coeffs,
            relation: Relation::Ge,
            rhs: g.floor.clone(),
        });
    }
    LpProblem {
        objective,
        upper,
        rows,
        labels,
    }
}

fn sparse(dense: Vec<Rational>) -> Vec<(usize, Rational)> {
    dense
        .into_iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpSolution {
    pub x: FractionalSolution,
    pub objective: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("fairness floors cannot be met by any fractional exchange")]
    InfeasibleWithFairness,
    #[error("solver defect: {0}")]
    Defect(&'static str),
}

/// Which optimal point to report when the optimum is not unique.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LpPoint {
    /// The vertex reached by Bland's rule from the slack basis.
    Basic,
    /// Average of the distinct optimal vertices maximizing or minimizing
    /// each coordinate over the optimal face. Deterministic, and it lies in
    /// the relative interior of the face spanned by those vertices.
    #[default]
    Centroid,
}

/// Interface for swapping the bundled solver for an external engine.
pub trait LpSolver {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution, LpError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ExactSimplex {
    pub point: LpPoint,
}

impl LpSolver for ExactSimplex {
    fn solve(&self, problem: &LpProblem) -> Result<LpSolution, LpError> {
        let basic = solve_basic(problem)?;
        match self.point {
            LpPoint::Basic => Ok(basic),
            LpPoint::Centroid => centroid(problem, &basic.objective),
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    ExactSimplex::default().solve(problem)
}

pub fn solve_lp_with(problem: &LpProblem, point: LpPoint) -> Result<LpSolution, LpError> {
    ExactSimplex { point }.solve(problem)
}

fn simplex_rows(problem: &LpProblem) -> Vec<Row> {
    let mut rows: Vec<Row> = problem
        .rows
        .iter()
        .map(|r| Row {
            coeffs: r.coeffs.clone(),
            relation: r.relation,
            rhs: r.rhs.clone(),
        })
        .collect();
    for (j, u) in problem.upper.iter().enumerate() {
        if !bound_implied(problem, j, u) {
            rows.push(Row {
                coeffs: vec![(j, Rational::from_integer(1.into()))],
                relation: Relation::Le,
                rhs: u.clone(),
            });
        }
    }
    rows
}

/// A `<=` row with non-negative coefficients already caps `x_j` at `rhs / a_j`.
fn bound_implied(problem: &LpProblem, j: usize, upper: &Rational) -> bool {
    problem.rows.iter().any(|r| {
        r.relation == Relation::Le
            && r.coeffs.iter().all(|(_, a)| !a.is_negative())
            && r.coeffs
                .iter()
                .any(|(k, a)| *k == j && a.is_positive() && &(&r.rhs / a) <= upper)
    })
}

fn feasible_tableau(problem: &LpProblem, rows: &[Row]) -> Result<Tableau, LpError> {
    Tableau::feasible(problem.variable_count(), rows).map_err(|_| {
        if problem.fairness_count() > 0 {
            LpError::InfeasibleWithFairness
        } else {
            LpError::Defect("relaxation without fairness floors reported infeasible")
        }
    })
}

fn run(tableau: &mut Tableau, cost: &[Rational]) -> Result<Rational, LpError> {
    let limit = tableau.non_artificial();
    tableau.maximize(cost, limit).map_err(|o| match o {
        Outcome::Unbounded => LpError::Defect("box-bounded relaxation reported unbounded"),
        Outcome::Infeasible => LpError::Defect("phase two lost feasibility"),
    })
}

fn solve_basic(problem: &LpProblem) -> Result<LpSolution, LpError> {
    let rows = simplex_rows(problem);
    let mut tableau = feasible_tableau(problem, &rows)?;
    let objective = run(&mut tableau, &problem.objective)?;
    Ok(LpSolution {
        x: FractionalSolution {
            values: tableau.point(),
        },
        objective,
    })
}

fn centroid(problem: &LpProblem, optimum: &Rational) -> Result<LpSolution, LpError> {
    let mut rows = simplex_rows(problem);
    rows.push(Row {
        coeffs: sparse(problem.objective.clone()),
        relation: Relation::Eq,
        rhs: optimum.clone(),
    });
    let mut tableau = feasible_tableau(problem, &rows)?;
    let n = problem.variable_count();
    let mut vertices: Vec<Vec<Rational>> = Vec::new();
    for j in 0..n {
        for sign in [1, -1] {
            let mut cost = vec![Rational::zero(); n];
            cost[j] = Rational::from_integer(sign.into());
            run(&mut tableau, &cost)?;
            let p = tableau.point();
            if !vertices.contains(&p) {
                vertices.push(p);
            }
        }
    }
    if vertices.is_empty() {
        vertices.push(tableau.point());
    }
    let k = Rational::from_integer(vertices.len().into());
    let values: Vec<Rational> = (0..n)
        .map(|j| vertices.iter().fold(Rational::zero(), |acc, v| acc + &v[j]) / &k)
        .collect();
    Ok(LpSolution {
        x: FractionalSolution { values },
        objective: optimum.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FairnessGroup;
    use crate::oracle::{figure_one, gap_family, gkps_worst_case};
    use crate::rational::{int, ratio};
    use crate::vbm::build_vbm;

    fn with_unit_weights(mut inst: crate::model::BarterInstance) -> crate::model::BarterInstance {
        inst.weights = crate::model::TransferWeight::Unit;
        inst
    }

    #[test]
    fn figure_one_counts() {
        let g = build_vbm(&figure_one()).unwrap();
        let p = build_lp(&g, &[]);
        assert_eq!(p.variable_count(), 6);
        assert_eq!(p.degree_count(), 10);
        assert_eq!(p.barter_count(), 3);
    }

    #[test]
    fn empty_instance() {
        let g = build_vbm(&Default::default()).unwrap();
        let sol = solve_lp(&build_lp(&g, &[])).unwrap();
        assert_eq!(sol.objective, int(0));
        assert!(sol.x.values.is_empty());
    }

    #[test]
    fn worst_case_objective_and_centroid() {
        let g = build_vbm(&with_unit_weights(gkps_worst_case())).unwrap();
        let p = build_lp(&g, &[]);
        let basic = solve_lp_with(&p, LpPoint::Basic).unwrap();
        assert_eq!(basic.objective, int(3));
        basic.x.check_feasible(&g, true).unwrap();
        let c = solve_lp_with(&p, LpPoint::Centroid).unwrap();
        assert_eq!(c.x.values, vec![ratio(1, 2), ratio(1, 2), int(1), int(1)]);
        assert_eq!(c.x.objective(&g), int(3));
    }

    #[test]
    fn gap_family_objective() {
        for n in [1, 2, 4, 100] {
            let g = build_vbm(&gap_family(n)).unwrap();
            let sol = solve_lp(&build_lp(&g, &[])).unwrap();
            assert_eq!(sol.objective, ratio(2, n.into()));
            sol.x.check_feasible(&g, true).unwrap();
        }
    }

    #[test]
    fn fairness_floor_zero_and_infeasible() {
        let inst = gap_family(4);
        let g = build_vbm(&inst).unwrap();
        let everyone = FairnessGroup {
            agents: inst.agents.iter().map(|a| a.id.clone()).collect(),
            floor: int(0),
        };
        assert!(solve_lp(&build_lp(&g, std::slice::from_ref(&everyone))).is_ok());
        let greedy = FairnessGroup {
            floor: int(5),
            ..everyone
        };
        assert_eq!(
            solve_lp(&build_lp(&g, &[greedy])),
            Err(LpError::InfeasibleWithFairness)
        );
    }

    #[test]
    fn lp_text_uses_fractions() {
        let g = build_vbm(&gap_family(4)).unwrap();
        let text = build_lp(&g, &[]).to_lp_text();
        assert!(text.contains("1/4 x"), "{text}");
        assert!(text.starts_with("maximize"));
        assert!(text.trim_end().ends_with("end"));
    }
}
