use std::fmt;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Abs,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub fn name(&self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CmpOp {
    Le,
    Lt,
    Ge,
    Gt,
}

impl CmpOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            CmpOp::Le => "<=",
            CmpOp::Lt => "<",
            CmpOp::Ge => ">=",
            CmpOp::Gt => ">",
        }
    }
}

/// `lhs op rhs`.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub lhs: Expr,
    pub op: CmpOp,
    pub rhs: Expr,
}

/// Conjunction of comparisons.
#[derive(Clone, Debug, PartialEq)]
pub struct Cond {
    pub atoms: Vec<Atom>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    Num(f64),
    /// 0-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, i32),
    Call(Func, Box<Expr>),
    Piecewise {
        branches: Vec<(Cond, Expr)>,
        otherwise: Box<Expr>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Self { kind, span }
    }

    pub fn num(c: f64) -> Self {
        Self::new(ExprKind::Num(c), Span::default())
    }

    pub fn var(i: usize) -> Self {
        Self::new(ExprKind::Var(i), Span::default())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn add(a: Expr, b: Expr) -> Self {
        Self::new(ExprKind::Add(Box::new(a), Box::new(b)), Span::default())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn sub(a: Expr, b: Expr) -> Self {
        Self::new(ExprKind::Sub(Box::new(a), Box::new(b)), Span::default())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn neg(a: Expr) -> Self {
        Self::new(ExprKind::Neg(Box::new(a)), Span::default())
    }

    pub fn scaled(c: f64, a: Expr) -> Self {
        Self::new(
            ExprKind::Mul(Box::new(Self::num(c)), Box::new(a)),
            Span::default(),
        )
    }

    /// `max(a, b)` in its lowered piecewise form.
    pub fn max2(a: Expr, b: Expr, span: Span) -> Self {
        let cond = Cond {
            atoms: vec![Atom {
                lhs: a.clone(),
                op: CmpOp::Ge,
                rhs: b.clone(),
            }],
        };
        Self::new(
            ExprKind::Piecewise {
                branches: vec![(cond, a)],
                otherwise: Box::new(b),
            },
            span,
        )
    }

    pub fn min2(a: Expr, b: Expr, span: Span) -> Self {
        let cond = Cond {
            atoms: vec![Atom {
                lhs: a.clone(),
                op: CmpOp::Le,
                rhs: b.clone(),
            }],
        };
        Self::new(
            ExprKind::Piecewise {
                branches: vec![(cond, a)],
                otherwise: Box::new(b),
            },
            span,
        )
    }

    /// Largest variable index used, plus one.
    pub fn arity(&self) -> usize {
        let mut m = 0;
        self.visit(&mut |e| {
            if let ExprKind::Var(i) = e.kind {
                m = m.max(i + 1);
            }
        });
        m
    }

    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Var(_) => {}
            ExprKind::Neg(a) | ExprKind::Pow(a, _) | ExprKind::Call(_, a) => a.visit(f),
            ExprKind::Add(a, b) | ExprKind::Sub(a, b) | ExprKind::Mul(a, b) | ExprKind::Div(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            ExprKind::Piecewise {
                branches,
                otherwise,
            } => {
                for (c, e) in branches {
                    for at in &c.atoms {
                        at.lhs.visit(f);
                        at.rhs.visit(f);
                    }
                    e.visit(f);
                }
                otherwise.visit(f);
            }
        }
    }

    /// Renames variables through `map`; used to embed expressions.
    pub fn map_vars(&self, map: &impl Fn(usize) -> usize) -> Expr {
        let b = |e: &Expr| Box::new(e.map_vars(map));
        let kind = match &self.kind {
            ExprKind::Num(c) => ExprKind::Num(*c),
            ExprKind::Var(i) => ExprKind::Var(map(*i)),
            ExprKind::Neg(a) => ExprKind::Neg(b(a)),
            ExprKind::Add(x, y) => ExprKind::Add(b(x), b(y)),
            ExprKind::Sub(x, y) => ExprKind::Sub(b(x), b(y)),
            ExprKind::Mul(x, y) => ExprKind::Mul(b(x), b(y)),
            ExprKind::Div(x, y) => ExprKind::Div(b(x), b(y)),
            ExprKind::Pow(x, k) => ExprKind::Pow(b(x), *k),
            ExprKind::Call(g, x) => ExprKind::Call(*g, b(x)),
            ExprKind::Piecewise {
                branches,
                otherwise,
            } => ExprKind::Piecewise {
                branches: branches
                    .iter()
                    .map(|(c, e)| {
                        (
                            Cond {
                                atoms: c
                                    .atoms
                                    .iter()
                                    .map(|a| Atom {
                                        lhs: a.lhs.map_vars(map),
                                        op: a.op,
                                        rhs: a.rhs.map_vars(map),
                                    })
                                    .collect(),
                            },
                            e.map_vars(map),
                        )
                    })
                    .collect(),
                otherwise: b(otherwise),
            },
        };
        Expr::new(kind, self.span)
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                write!(f, " and ")?;
            }
            write!(f, "{} {} {}", a.lhs, a.op.symbol(), a.rhs)?;
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(c) => {
                if *c < 0.0 {
                    write!(f, "({c})")
                } else {
                    write!(f, "{c}")
                }
            }
            ExprKind::Var(i) => write!(f, "x{}", i + 1),
            ExprKind::Neg(a) => write!(f, "(-{a})"),
            ExprKind::Add(a, b) => write!(f, "({a} + {b})"),
            ExprKind::Sub(a, b) => write!(f, "({a} - {b})"),
            ExprKind::Mul(a, b) => write!(f, "({a} * {b})"),
            ExprKind::Div(a, b) => write!(f, "({a} / {b})"),
            ExprKind::Pow(a, k) => write!(f, "({a}^{k})"),
            ExprKind::Call(g, a) => write!(f, "{}({a})", g.name()),
            ExprKind::Piecewise {
                branches,
                otherwise,
            } => {
                write!(f, "piecewise(")?;
                for (c, e) in branches {
                    write!(f, "{c}: {e}; ")?;
                }
                write!(f, "else: {otherwise})")
            }
        }
    }
}
