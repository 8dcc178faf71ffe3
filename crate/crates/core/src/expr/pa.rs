//! Lowering of expressions to piecewise-affine form: a list of closed
//! polyhedral regions, each carrying an affine formula (or a marker that the
//! formula there is not affine).

use super::ast::{CmpOp, Cond, Expr, ExprKind, Func};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Vector};
use crate::lp::{Lp, LpOutcome, Rel, FREE};

/// `a·x <= b`.
#[derive(Clone, Debug, PartialEq)]
pub struct Halfspace {
    pub a: Vector,
    pub b: f64,
}

/// Conjunction of halfspaces.
pub type Cell = Vec<Halfspace>;

/// `a·x + c`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineForm {
    pub a: Vector,
    pub c: f64,
}

impl AffineForm {
    pub fn constant(dim: usize, c: f64) -> Self {
        Self { a: vec![0.0; dim], c }
    }

    pub fn is_constant(&self) -> bool {
        self.a.iter().all(|x| *x == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.c
    }

    fn scaled(&self, s: f64) -> Self {
        Self {
            a: self.a.iter().map(|x| x * s).collect(),
            c: self.c * s,
        }
    }

    fn plus(&self, o: &AffineForm, s: f64) -> Self {
        Self {
            a: self.a.iter().zip(&o.a).map(|(x, y)| x + s * y).collect(),
            c: self.c + s * o.c,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Piece {
    pub region: Cell,
    /// `None` where the expression is not affine on the region.
    pub form: Option<AffineForm>,
}

fn clean_cell(cell: Cell) -> Option<Cell> {
    let mut out: Cell = Vec::new();
    for h in cell {
        let n = norm(&h.a);
        if n <= 1e-14 {
            if h.b < -1e-12 {
                return None;
            }
            continue;
        }
        let h = Halfspace {
            a: h.a.iter().map(|x| x / n).collect(),
            b: h.b / n,
        };
        if let Some(o) = out
            .iter_mut()
            .find(|o| o.a.iter().zip(&h.a).all(|(p, q)| (p - q).abs() <= 1e-12))
        {
            o.b = o.b.min(h.b);
        } else {
            out.push(h);
        }
    }
    Some(out)
}

/// Closed-cell feasibility by LP.
pub fn cell_feasible(cell: &Cell, dim: usize) -> Result<bool> {
    if cell.is_empty() {
        return Ok(true);
    }
    let mut lp = Lp::minimize();
    let x = lp.vars(dim, 0.0, FREE);
    for h in cell {
        lp.constraint(x.iter().zip(&h.a).map(|(&i, &c)| (i, c)).collect(), Rel::Le, h.b);
    }
    Ok(!matches!(lp.solve()?, LpOutcome::Infeasible))
}

/// Whether every coordinate is bounded on the cell (maximize/minimize each).
pub fn cell_bounded(cell: &Cell, dim: usize, coords: &[usize]) -> Result<bool> {
    for &i in coords {
        for s in [1.0, -1.0] {
            let mut lp = Lp::maximize();
            let x: Vec<usize> = (0..dim)
                .map(|j| lp.var(if j == i { s } else { 0.0 }, FREE))
                .collect();
            for h in cell {
                lp.constraint(x.iter().zip(&h.a).map(|(&k, &c)| (k, c)).collect(), Rel::Le, h.b);
            }
            match lp.solve()? {
                LpOutcome::Unbounded => return Ok(false),
                LpOutcome::Infeasible => return Ok(true),
                LpOutcome::Optimal { .. } => {}
            }
        }
    }
    Ok(true)
}

fn and_cell(a: &Cell, b: &Cell) -> Option<Cell> {
    let mut c = a.clone();
    c.extend(b.iter().cloned());
    clean_cell(c)
}

/// Pairwise intersections of two unions of cells, dropping empty ones.
pub fn and_cells(a: &[Cell], b: &[Cell], dim: usize) -> Result<Vec<Cell>> {
    let mut out = Vec::new();
    for p in a {
        for q in b {
            if let Some(c) = and_cell(p, q) {
                if cell_feasible(&c, dim)? {
                    out.push(c);
                }
            }
        }
    }
    Ok(out)
}

struct Lowering {
    dim: usize,
}

fn nonaffine(region: Cell) -> Piece {
    Piece { region, form: None }
}

impl Lowering {
    fn prune(&self, pieces: Vec<Piece>) -> Result<Vec<Piece>> {
        let mut out = Vec::new();
        for p in pieces {
            if let Some(r) = clean_cell(p.region) {
                if cell_feasible(&r, self.dim)? {
                    out.push(Piece {
                        region: r,
                        form: p.form,
                    });
                }
            }
        }
        Ok(out)
    }

    fn combine(
        &self,
        p: &[Piece],
        q: &[Piece],
        f: impl Fn(&AffineForm, &AffineForm) -> Option<AffineForm>,
    ) -> Result<Vec<Piece>> {
        let mut out = Vec::new();
        for a in p {
            for b in q {
                let Some(region) = and_cell(&a.region, &b.region) else {
                    continue;
                };
                let form = match (&a.form, &b.form) {
                    (Some(x), Some(y)) => f(x, y),
                    _ => None,
                };
                out.push(Piece { region, form });
            }
        }
        self.prune(out)
    }

    fn lower(&self, e: &Expr) -> Result<Vec<Piece>> {
        let n = self.dim;
        match &e.kind {
            ExprKind::Num(c) => Ok(vec![Piece {
                region: vec![],
                form: Some(AffineForm::constant(n, *c)),
            }]),
            ExprKind::Var(i) => {
                let mut a = vec![0.0; n];
                a[*i] = 1.0;
                Ok(vec![Piece {
                    region: vec![],
                    form: Some(AffineForm { a, c: 0.0 }),
                }])
            }
            ExprKind::Neg(a) => Ok(self
                .lower(a)?
                .into_iter()
                .map(|p| Piece {
                    region: p.region,
                    form: p.form.map(|f| f.scaled(-1.0)),
                })
                .collect()),
            ExprKind::Add(a, b) => {
                self.combine(&self.lower(a)?, &self.lower(b)?, |x, y| Some(x.plus(y, 1.0)))
            }
            ExprKind::Sub(a, b) => {
                self.combine(&self.lower(a)?, &self.lower(b)?, |x, y| Some(x.plus(y, -1.0)))
            }
            ExprKind::Mul(a, b) => self.combine(&self.lower(a)?, &self.lower(b)?, |x, y| {
                if x.is_constant() {
                    Some(y.scaled(x.c))
                } else if y.is_constant() {
                    Some(x.scaled(y.c))
                } else {
                    None
                }
            }),
            ExprKind::Div(a, b) => self.combine(&self.lower(a)?, &self.lower(b)?, |x, y| {
                if y.is_constant() && y.c != 0.0 {
                    Some(x.scaled(1.0 / y.c))
                } else {
                    None
                }
            }),
            ExprKind::Pow(a, k) => {
                if *k == 0 {
                    return Ok(vec![Piece {
                        region: vec![],
                        form: Some(AffineForm::constant(n, 1.0)),
                    }]);
                }
                Ok(self
                    .lower(a)?
                    .into_iter()
                    .map(|p| {
                        let form = match p.form {
                            Some(f) if *k == 1 => Some(f),
                            Some(f) if f.is_constant() => {
                                let v = f.c.powi(*k);
                                v.is_finite().then(|| AffineForm::constant(n, v))
                            }
                            _ => None,
                        };
                        Piece {
                            region: p.region,
                            form,
                        }
                    })
                    .collect())
            }
            ExprKind::Call(Func::Abs, a) => {
                let mut out = Vec::new();
                for p in self.lower(a)? {
                    match p.form {
                        Some(f) => {
                            let mut pos = p.region.clone();
                            pos.push(Halfspace {
                                a: f.a.iter().map(|x| -x).collect(),
                                b: f.c,
                            });
                            out.push(Piece {
                                region: pos,
                                form: Some(f.clone()),
                            });
                            let mut negr = p.region;
                            negr.push(Halfspace {
                                a: f.a.clone(),
                                b: -f.c,
                            });
                            out.push(Piece {
                                region: negr,
                                form: Some(f.scaled(-1.0)),
                            });
                        }
                        None => out.push(nonaffine(p.region)),
                    }
                }
                self.prune(out)
            }
            ExprKind::Call(g, a) => Ok(self
                .lower(a)?
                .into_iter()
                .map(|p| {
                    let form = match p.form {
                        Some(f) if f.is_constant() => {
                            let v = match g {
                                Func::Exp => f.c.exp(),
                                Func::Log if f.c > 0.0 => f.c.ln(),
                                Func::Sqrt if f.c >= 0.0 => f.c.sqrt(),
                                Func::Sin => f.c.sin(),
                                Func::Cos => f.c.cos(),
                                _ => f64::NAN,
                            };
                            v.is_finite().then(|| AffineForm::constant(n, v))
                        }
                        _ => None,
                    };
                    Piece {
                        region: p.region,
                        form,
                    }
                })
                .collect()),
            ExprKind::Piecewise {
                branches,
                otherwise,
            } => {
                let mut out = Vec::new();
                // cells where none of the earlier guards hold
                let mut rest: Vec<Cell> = vec![vec![]];
                for (c, body) in branches {
                    let holds = self.cond_cells(c, false)?;
                    let region = and_cells(&rest, &holds, n)?;
                    for cell in &region {
                        for p in self.lower(body)? {
                            if let Some(r) = and_cell(cell, &p.region) {
                                out.push(Piece {
                                    region: r,
                                    form: p.form,
                                });
                            }
                        }
                    }
                    let fails = self.cond_cells(c, true)?;
                    rest = and_cells(&rest, &fails, n)?;
                }
                for cell in &rest {
                    for p in self.lower(otherwise)? {
                        if let Some(r) = and_cell(cell, &p.region) {
                            out.push(Piece {
                                region: r,
                                form: p.form,
                            });
                        }
                    }
                }
                self.prune(out)
            }
        }
    }

    /// Cells of a guard, or of the closure of its negation.
    fn cond_cells(&self, c: &Cond, negate: bool) -> Result<Vec<Cell>> {
        let mut atoms = Vec::new();
        for at in &c.atoms {
            let diff = self.lower(&Expr::sub(at.lhs.clone(), at.rhs.clone()))?;
            let le = matches!(at.op, CmpOp::Le | CmpOp::Lt) != negate;
            let mut cells = Vec::new();
            for p in diff {
                let Some(f) = p.form else {
                    return Err(Error::Capability(format!(
                        "guard `{} {} {}` is not affine",
                        at.lhs,
                        at.op.symbol(),
                        at.rhs
                    )));
                };
                let mut cell = p.region;
                if le {
                    cell.push(Halfspace { a: f.a, b: -f.c });
                } else {
                    cell.push(Halfspace {
                        a: f.a.iter().map(|x| -x).collect(),
                        b: f.c,
                    });
                }
                if let Some(cell) = clean_cell(cell) {
                    cells.push(cell);
                }
            }
            atoms.push(cells);
        }
        if negate {
            // not (A and B) = (not A) or (not B)
            Ok(atoms.into_iter().flatten().collect())
        } else {
            let mut acc: Vec<Cell> = vec![vec![]];
            for cells in atoms {
                acc = and_cells(&acc, &cells, self.dim)?;
            }
            Ok(acc)
        }
    }
}

/// Piecewise lowering of `e` over `R^dim`.
pub fn lower(e: &Expr, dim: usize) -> Result<Vec<Piece>> {
    Lowering { dim }.lower(e)
}

/// The affine form of `e` when `e` is globally affine.
pub fn as_affine(e: &Expr, dim: usize) -> Option<AffineForm> {
    let pieces = lower(e, dim).ok()?;
    let first = pieces.first()?.form.clone()?;
    let same = pieces.iter().all(|p| {
        p.form.as_ref().is_some_and(|f| {
            f.a.iter().zip(&first.a).all(|(x, y)| (x - y).abs() <= 1e-12)
                && (f.c - first.c).abs() <= 1e-12
        })
    });
    same.then_some(first)
}

/// Cells of `{x : e(x) rel rhs}` where `rel` is `<=` (`sign = 1`) or `>=`
/// (`sign = -1`).
pub fn sublevel_cells(e: &Expr, dim: usize, rhs: f64, sign: f64) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for p in lower(e, dim)? {
        let Some(f) = p.form else {
            return Err(Error::Capability(format!("constraint `{e}` is not piecewise affine")));
        };
        let mut cell = p.region;
        cell.push(Halfspace {
            a: f.a.iter().map(|x| sign * x).collect(),
            b: sign * (rhs - f.c),
        });
        if let Some(c) = clean_cell(cell) {
            if cell_feasible(&c, dim)? {
                cells.push(c);
            }
        }
    }
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_expr;

    #[test]
    fn piecewise_pieces() {
        let e = parse_expr("piecewise(x1 <= 0: 0; else: -x1)", None).unwrap();
        let p = lower(&e, 1).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|q| q.form.is_some()));
    }

    #[test]
    fn abs_and_max() {
        let e = parse_expr("abs(x1) + max(x1, 2*x1)", None).unwrap();
        let p = lower(&e, 1).unwrap();
        assert!(p.iter().all(|q| q.form.is_some()));
        for x in [-3.0f64, -0.5, 0.7, 4.0] {
            let want = x.abs() + x.max(2.0 * x);
            let piece = p
                .iter()
                .find(|q| q.region.iter().all(|h| h.a[0] * x <= h.b + 1e-12))
                .unwrap();
            assert!((piece.form.as_ref().unwrap().eval(&[x]) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn nonaffine_marked() {
        let e = parse_expr("piecewise(x1 >= 1: x1; x1 >= -1: 0.5*x1^2 + 0.5; else: -x1)", None)
            .unwrap();
        let p = lower(&e, 1).unwrap();
        assert_eq!(p.iter().filter(|q| q.form.is_none()).count(), 1);
        assert!(as_affine(&parse_expr("2*x1 - (x2 - 3)/4", None).unwrap(), 2).is_some());
        assert!(as_affine(&e, 1).is_none());
    }

    #[test]
    fn nonaffine_guard_rejected() {
        let e = parse_expr("piecewise(x1^2 <= 1: 0; else: 1)", None).unwrap();
        assert!(matches!(lower(&e, 1), Err(Error::Capability(_))));
    }
}
