//! Dense two-phase simplex over exact rationals with Bland's pivoting rule.

use crate::rational::Rational;
use num::{One, Signed, Zero};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

/// A row `Σ coeffs · x  (relation)  rhs` over structural columns.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<(usize, Rational)>,
    pub relation: Relation,
    pub rhs: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Infeasible,
    Unbounded,
}

pub struct Tableau {
    /// `rows[i]` has `width + 1` entries; the last is the right-hand side.
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    structural: usize,
    artificial_start: usize,
    width: usize,
}

impl Tableau {
    /// Builds the phase-one tableau and drives it to a feasible basis.
    pub fn feasible(structural: usize, constraints: &[Row]) -> Result<Self, Outcome> {
        let mut normalized: Vec<(Vec<Rational>, Relation, Rational)> = constraints
            .iter()
            .map(|row| {
                let mut dense = vec![Rational::zero(); structural];
                for (j, a) in &row.coeffs {
                    dense[*j] += a;
                }
                let (mut rel, mut rhs) = (row.relation, row.rhs.clone());
                if rhs.is_negative() {
                    dense.iter_mut().for_each(|a| *a = -a.clone());
                    rhs = -rhs;
                    rel = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                }
                (dense, rel, rhs)
            })
            .collect();

        let slack_count = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Eq)
            .count();
        let artificial_count = normalized
            .iter()
            .filter(|(_, rel, _)| *rel != Relation::Le)
            .count();
        let artificial_start = structural + slack_count;
        let width = artificial_start + artificial_count;

        let mut rows = Vec::with_capacity(normalized.len());
        let mut basis = Vec::with_capacity(normalized.len());
        let (mut next_slack, mut next_art) = (structural, artificial_start);
        for (dense, rel, rhs) in normalized.drain(..) {
            let mut row = dense;
            row.resize(width + 1, Rational::zero());
            row[width] = rhs;
            match rel {
                Relation::Le => {
                    row[next_slack] = Rational::one();
                    basis.push(next_slack);
                    next_slack += 1;
                }
                Relation::Ge => {
                    row[next_slack] = -Rational::one();
                    next_slack += 1;
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
                Relation::Eq => {
                    row[next_art] = Rational::one();
                    basis.push(next_art);
                    next_art += 1;
                }
            }
            rows.push(row);
        }
        let mut tableau = Tableau {
            rows,
            basis,
            structural,
            artificial_start,
            width,
        };
        if artificial_count > 0 {
            let mut cost = vec![Rational::zero(); width];
            for c in &mut cost[artificial_start..] {
                *c = -Rational::one();
            }
            let value = tableau
                .maximize(&cost, width)
                .expect("phase one is bounded below by zero");
            if value.is_negative() {
                return Err(Outcome::Infeasible);
            }
            tableau.expel_artificials();
        }
        Ok(tableau)
    }

    /// Pivots zero-valued artificials out of the basis; rows where that is
    /// impossible are linear combinations of the others and are dropped.
    fn expel_artificials(&mut self) {
        let mut i = 0;
        while i < self.rows.len() {
            if self.basis[i] < self.artificial_start {
                i += 1;
                continue;
            }
            match (0..self.artificial_start).find(|&j| !self.rows[i][j].is_zero()) {
                Some(j) => {
                    self.pivot(i, j, None);
                    i += 1;
                }
                None => {
                    self.rows.remove(i);
                    self.basis.remove(i);
                }
            }
        }
    }

    /// Maximizes `cost · x` from the current feasible basis, allowing only
    /// columns below `limit` to enter. Returns the optimal value.
    pub fn maximize(&mut self, cost: &[Rational], limit: usize) -> Result<Rational, Outcome> {
        let mut reduced: Vec<Rational> = cost.to_vec();
        reduced.resize(self.width + 1, Rational::zero());
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost.get(b).cloned().unwrap_or_else(Rational::zero);
            if cb.is_zero() {
                continue;
            }
            for (r, a) in reduced.iter_mut().zip(&self.rows[i]) {
                *r -= &cb * a;
            }
        }
        // reduced[width] now holds -(current objective value).
        loop {
            let Some(enter) = (0..limit).find(|&j| reduced[j].is_positive()) else {
                return Ok(-reduced[self.width].clone());
            };
            let mut leave: Option<(usize, Rational)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = &row[enter];
                if !a.is_positive() {
                    continue;
                }
                let ratio = &row[self.width] / a;
                let better = match &leave {
                    None => true,
                    Some((k, best)) => {
                        ratio < *best || (ratio == *best && self.basis[i] < self.basis[*k])
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((row, _)) = leave else {
                return Err(Outcome::Unbounded);
            };
            self.pivot(row, enter, Some(&mut reduced));
        }
    }

    fn pivot(&mut self, r: usize, c: usize, objective: Option<&mut Vec<Rational>>) {
        let inv = Rational::one() / &self.rows[r][c];
        for a in self.rows[r].iter_mut() {
            if !a.is_zero() {
                *a *= &inv;
            }
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<Rational>| {
            let factor = row[c].clone();
            if factor.is_zero() {
                return;
            }
            for (a, p) in row.iter_mut().zip(&pivot_row) {
                if !p.is_zero() {
                    *a -= &factor * p;
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        if let Some(obj) = objective {
            eliminate(obj);
        }
        self.basis[r] = c;
    }

    /// Columns that may enter once phase one is over.
    pub fn non_artificial(&self) -> usize {
        self.artificial_start
    }

    /// Current basic solution restricted to structural columns.
    pub fn point(&self) -> Vec<Rational> {
        let mut x = vec![Rational::zero(); self.structural];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.structural {
                x[b] = self.rows[i][self.width].clone();
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn row(coeffs: &[(usize, i64)], relation: Relation, rhs: i64) -> Row {
        Row {
            coeffs: coeffs.iter().map(|&(j, a)| (j, int(a))).collect(),
            relation,
            rhs: int(rhs),
        }
    }

    #[test]
    fn textbook_maximum() {
        // max 3x + 5y s.t. x <= 4, 2y <= 12, 3x + 2y <= 18 -> (2, 6), 36
        let rows = [
            row(&[(0, 1)], Relation::Le, 4),
            row(&[(1, 2)], Relation::Le, 12),
            row(&[(0, 3), (1, 2)], Relation::Le, 18),
        ];
        let mut t = Tableau::feasible(2, &rows).unwrap();
        let limit = t.non_artificial();
        let z = t.maximize(&[int(3), int(5)], limit).unwrap();
        assert_eq!(z, int(36));
        assert_eq!(t.point(), vec![int(2), int(6)]);
    }

    #[test]
    fn equality_and_redundant_rows() {
        // x + y = 1 stated twice, maximize x + 2y.
        let rows = [
            row(&[(0, 1), (1, 1)], Relation::Eq, 1),
            row(&[(0, 2), (1, 2)], Relation::Eq, 2),
            row(&[(0, 1)], Relation::Ge, 0),
        ];
        let mut t = Tableau::feasible(2, &rows).unwrap();
        let limit = t.non_artificial();
        assert_eq!(t.maximize(&[int(1), int(2)], limit).unwrap(), int(2));
        assert_eq!(t.point(), vec![int(0), int(1)]);
    }

    #[test]
    fn detects_infeasible_and_unbounded() {
        let rows = [
            row(&[(0, 1)], Relation::Le, 1),
            row(&[(0, 1)], Relation::Ge, 2),
        ];
        assert_eq!(Tableau::feasible(1, &rows).err(), Some(Outcome::Infeasible));
        let rows = [row(&[(0, 1), (1, -1)], Relation::Le, 1)];
        let mut t = Tableau::feasible(2, &rows).unwrap();
        let limit = t.non_artificial();
        assert_eq!(
            t.maximize(&[int(1), int(0)], limit),
            Err(Outcome::Unbounded)
        );
    }

    #[test]
    fn negative_rhs_is_flipped() {
        // -x <= -1/2  (x >= 1/2), x <= 1, minimize x.
        let rows = [
            Row {
                coeffs: vec![(0, int(-1))],
                relation: Relation::Le,
                rhs: ratio(-1, 2),
            },
            row(&[(0, 1)], Relation::Le, 1),
        ];
        let mut t = Tableau::feasible(1, &rows).unwrap();
        let limit = t.non_artificial();
        assert_eq!(t.maximize(&[int(-1)], limit).unwrap(), ratio(-1, 2));
    }
}
