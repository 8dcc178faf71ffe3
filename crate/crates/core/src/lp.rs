//! Thin dense front end over `microlp` used by the feasibility, membership and
//! face-enumeration routines.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rel {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, objective } => Some((x, objective)),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Lp {
    maximize: bool,
    vars: Vec<(f64, f64, f64)>,
    cons: Vec<(Vec<(usize, f64)>, Rel, f64)>,
}

pub const FREE: (f64, f64) = (f64::NEG_INFINITY, f64::INFINITY);
pub const NONNEG: (f64, f64) = (0.0, f64::INFINITY);

impl Lp {
    pub fn minimize() -> Self {
        Self {
            maximize: false,
            vars: Vec::new(),
            cons: Vec::new(),
        }
    }

    pub fn maximize() -> Self {
        Self {
            maximize: true,
            ..Self::minimize()
        }
    }

    pub fn var(&mut self, obj: f64, bounds: (f64, f64)) -> usize {
        self.vars.push((obj, bounds.0, bounds.1));
        self.vars.len() - 1
    }

    pub fn vars(&mut self, count: usize, obj: f64, bounds: (f64, f64)) -> Vec<usize> {
        (0..count).map(|_| self.var(obj, bounds)).collect()
    }

    pub fn constraint(&mut self, terms: Vec<(usize, f64)>, rel: Rel, rhs: f64) {
        let terms: Vec<_> = terms.into_iter().filter(|(_, c)| *c != 0.0).collect();
        self.cons.push((terms, rel, rhs));
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn solve(&self) -> Result<LpOutcome> {
        let dir = if self.maximize {
            OptimizationDirection::Maximize
        } else {
            OptimizationDirection::Minimize
        };
        let mut p = Problem::new(dir);
        let handles: Vec<_> = self
            .vars
            .iter()
            .map(|&(obj, lo, hi)| p.add_var(obj, (lo, hi)))
            .collect();
        for (terms, rel, rhs) in &self.cons {
            if terms.is_empty() {
                let ok = match rel {
                    Rel::Le => 0.0 <= *rhs + 1e-12,
                    Rel::Ge => 0.0 >= *rhs - 1e-12,
                    Rel::Eq => rhs.abs() <= 1e-12,
                };
                if !ok {
                    return Ok(LpOutcome::Infeasible);
                }
                continue;
            }
            let expr: Vec<_> = terms.iter().map(|&(i, c)| (handles[i], c)).collect();
            let op = match rel {
                Rel::Le => ComparisonOp::Le,
                Rel::Ge => ComparisonOp::Ge,
                Rel::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(expr.as_slice(), op, *rhs);
        }
        match p.solve() {
            Ok(outcome) => {
                let sol = outcome
                    .into_solution()
                    .map_err(|_| Error::Lp("solver interrupted".into()))?;
                let x = handles.iter().map(|&h| sol.var_value(h)).collect();
                Ok(LpOutcome::Optimal {
                    x,
                    objective: sol.objective(),
                })
            }
            Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
            Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
            Err(e) => Err(Error::Lp(e.to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        let mut lp = Lp::maximize();
        let x = lp.var(1.0, NONNEG);
        let y = lp.var(2.0, NONNEG);
        lp.constraint(vec![(x, 1.0), (y, 1.0)], Rel::Le, 4.0);
        lp.constraint(vec![(y, 1.0)], Rel::Le, 3.0);
        let (sol, obj) = lp.solve().unwrap().optimal().unwrap();
        assert!((obj - 7.0).abs() < 1e-9);
        assert!((sol[1] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::minimize();
        let x = lp.var(1.0, NONNEG);
        lp.constraint(vec![(x, 1.0)], Rel::Le, -1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Infeasible));
        let mut lp = Lp::minimize();
        let x = lp.var(1.0, FREE);
        lp.constraint(vec![(x, 1.0)], Rel::Le, 1.0);
        assert!(matches!(lp.solve().unwrap(), LpOutcome::Unbounded));
    }
}
