//! Exact output distribution of a rounding run by exploring every branch.

use super::{round_solution, Algorithm, BranchSource, RoundingError, RoundingOptions};
use crate::rational::Rational;
use crate::vbm::{FractionalSolution, VbmGraph};
use num::{One, Zero};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReplayError {
    #[error("branch tree has more than {limit} leaves")]
    TooManyLeaves { limit: usize },
    #[error(transparent)]
    Rounding(#[from] RoundingError),
}

/// One root-to-leaf branch sequence and its outcome.
#[derive(Clone, Debug)]
pub struct Leaf {
    pub branches: Vec<bool>,
    pub probability: Rational,
    pub x: FractionalSolution,
}

#[derive(Clone, Debug)]
pub struct Distribution {
    pub leaves: Vec<Leaf>,
    /// Distinct outcomes and their total probability, ordered by outcome.
    pub outcomes: Vec<(FractionalSolution, Rational)>,
}

impl Distribution {
    fn from_leaves(leaves: Vec<Leaf>) -> Self {
        let mut merged: BTreeMap<Vec<Rational>, Rational> = BTreeMap::new();
        for leaf in &leaves {
            *merged
                .entry(leaf.x.values.clone())
                .or_insert_with(Rational::zero) += &leaf.probability;
        }
        let outcomes = merged
            .into_iter()
            .map(|(values, p)| (FractionalSolution { values }, p))
            .collect();
        Distribution { leaves, outcomes }
    }

    pub fn total_probability(&self) -> Rational {
        self.outcomes
            .iter()
            .fold(Rational::zero(), |acc, (_, p)| acc + p)
    }

    pub fn probability_of(&self, pred: impl Fn(&FractionalSolution) -> bool) -> Rational {
        self.outcomes
            .iter()
            .filter(|(x, _)| pred(x))
            .fold(Rational::zero(), |acc, (_, p)| acc + p)
    }

    pub fn expectation(&self, f: impl Fn(&FractionalSolution) -> Rational) -> Rational {
        self.outcomes
            .iter()
            .fold(Rational::zero(), |acc, (x, p)| acc + f(x) * p)
    }

    pub fn marginal(&self, edge: usize) -> Rational {
        self.expectation(|x| x.values[edge].clone())
    }

    pub fn expected_net(&self, graph: &VbmGraph) -> Vec<Rational> {
        (0..graph.agents().len())
            .map(|i| self.expectation(|x| x.net_values(graph)[i].clone()))
            .collect()
    }
}

struct Scripted {
    prefix: Vec<bool>,
    taken: Vec<(bool, Rational)>,
}

impl BranchSource for Scripted {
    fn take_alpha(&mut self, p_alpha: &Rational) -> bool {
        let choice = self.prefix.get(self.taken.len()).copied().unwrap_or(true);
        self.taken.push((choice, p_alpha.clone()));
        choice
    }
}

/// Runs the rounding once per leaf of its branch tree, depth first with the
/// α-branch explored first.
pub fn enumerate_outcomes(
    graph: &VbmGraph,
    x: &FractionalSolution,
    algorithm: Algorithm,
    max_leaves: usize,
) -> Result<Distribution, ReplayError> {
    let mut leaves = Vec::new();
    let mut stack: Vec<Vec<bool>> = vec![Vec::new()];
    while let Some(prefix) = stack.pop() {
        if leaves.len() == max_leaves {
            return Err(ReplayError::TooManyLeaves { limit: max_leaves });
        }
        let mut source = Scripted {
            prefix: prefix.clone(),
            taken: Vec::new(),
        };
        let outcome = round_solution(graph, x, algorithm, &mut source, RoundingOptions::default())?;
        let probability = source
            .taken
            .iter()
            .fold(Rational::one(), |acc, (choice, p)| {
                if *choice {
                    acc * p
                } else {
                    acc * (Rational::one() - p)
                }
            });
        for k in (prefix.len()..source.taken.len()).rev() {
            let mut alt: Vec<bool> = source.taken[..k].iter().map(|(c, _)| *c).collect();
            alt.push(!source.taken[k].0);
            stack.push(alt);
        }
        leaves.push(Leaf {
            branches: source.taken.iter().map(|(c, _)| *c).collect(),
            probability,
            x: outcome.x,
        });
    }
    Ok(Distribution::from_leaves(leaves))
}
