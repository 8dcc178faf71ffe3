//! Lexer and recursive-descent parser for the function and set grammars.

use super::ast::{Atom, CmpOp, Cond, Expr, ExprKind, Func, Span};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    span: Span,
}

const SYMBOLS: [&str; 16] = [
    "<=", ">=", "==", "<", ">", "+", "-", "*", "/", "^", "(", ")", ",", ";", ":", "=",
];

fn lex(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    for (li, line) in src.lines().enumerate() {
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        let trimmed = line.trim_start();
        if trimmed.starts_with('@') {
            continue;
        }
        while i < chars.len() {
            let c = chars[i];
            let span = Span {
                line: li + 1,
                column: i + 1,
            };
            if c == '#' {
                break;
            }
            if c.is_whitespace() {
                i += 1;
                continue;
            }
            if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v: f64 = text.parse().map_err(|_| Error::Syntax {
                    line: span.line,
                    column: span.column,
                    message: format!("malformed number `{text}`"),
                })?;
                out.push(Token {
                    tok: Tok::Num(v),
                    span,
                });
                continue;
            }
            if c.is_ascii_alphabetic() || c == '_' {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                out.push(Token {
                    tok: Tok::Ident(chars[start..i].iter().collect()),
                    span,
                });
                continue;
            }
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
                Some(s) => {
                    out.push(Token {
                        tok: Tok::Sym(s),
                        span,
                    });
                    i += s.len();
                }
                None => {
                    return Err(Error::Syntax {
                        line: span.line,
                        column: span.column,
                        message: format!("unexpected character `{c}`"),
                    })
                }
            }
        }
    }
    let last = src.lines().count().max(1);
    out.push(Token {
        tok: Tok::Eof,
        span: Span {
            line: last,
            column: src.lines().last().map_or(1, |l| l.chars().count() + 1),
        },
    });
    Ok(out)
}

/// Header directives (`@dim 2`, `@continuous`, `@lsc`, `@finite`).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Directives {
    pub dim: Option<usize>,
    pub continuous: bool,
    pub lsc: bool,
    pub finite: bool,
}

pub fn directives(src: &str) -> Result<Directives> {
    let mut d = Directives::default();
    for (li, line) in src.lines().enumerate() {
        let t = line.trim();
        let Some(body) = t.strip_prefix('@') else {
            continue;
        };
        let mut parts = body.split_whitespace();
        let err = |m: String| Error::Syntax {
            line: li + 1,
            column: line.find('@').unwrap_or(0) + 1,
            message: m,
        };
        match parts.next() {
            Some("dim") => {
                let n: usize = parts
                    .next()
                    .and_then(|s| s.parse().ok())
                    .filter(|n| *n > 0)
                    .ok_or_else(|| err("`@dim` needs a positive integer".into()))?;
                d.dim = Some(n);
            }
            Some("continuous") => d.continuous = true,
            Some("lsc") => d.lsc = true,
            Some("finite") => d.finite = true,
            other => return Err(err(format!("unknown directive `@{}`", other.unwrap_or("")))),
        }
    }
    Ok(d)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(&self.peek().tok, Tok::Sym(x) if *x == s)
    }

    fn err_here(&self, message: String) -> Error {
        let sp = self.peek().span;
        Error::Syntax {
            line: sp.line,
            column: sp.column,
            message,
        }
    }

    fn expect(&mut self, s: &str) -> Result<Span> {
        if self.is_sym(s) {
            Ok(self.next().span)
        } else {
            Err(self.err_here(format!("expected `{s}`, found {}", describe(&self.peek().tok))))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            if self.is_sym("+") {
                let sp = self.next().span;
                let rhs = self.term()?;
                lhs = Expr::new(ExprKind::Add(Box::new(lhs), Box::new(rhs)), sp);
            } else if self.is_sym("-") {
                let sp = self.next().span;
                let rhs = self.term()?;
                lhs = Expr::new(ExprKind::Sub(Box::new(lhs), Box::new(rhs)), sp);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            if self.is_sym("*") {
                let sp = self.next().span;
                let rhs = self.unary()?;
                lhs = Expr::new(ExprKind::Mul(Box::new(lhs), Box::new(rhs)), sp);
            } else if self.is_sym("/") {
                let sp = self.next().span;
                let rhs = self.unary()?;
                lhs = Expr::new(ExprKind::Div(Box::new(lhs), Box::new(rhs)), sp);
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.is_sym("-") {
            let sp = self.next().span;
            let a = self.unary()?;
            return Ok(Expr::new(ExprKind::Neg(Box::new(a)), sp));
        }
        if self.is_sym("+") {
            self.next();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if !self.is_sym("^") {
            return Ok(base);
        }
        let sp = self.next().span;
        let negative = if self.is_sym("-") {
            self.next();
            true
        } else {
            false
        };
        match self.peek().tok.clone() {
            Tok::Num(v) if v.fract() == 0.0 && v.abs() <= i32::MAX as f64 => {
                self.next();
                let k = if negative { -(v as i32) } else { v as i32 };
                Ok(Expr::new(ExprKind::Pow(Box::new(base), k), sp))
            }
            _ => Err(self.err_here("exponent must be an integer literal".into())),
        }
    }

    fn atom(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::new(ExprKind::Num(v), t.span)),
            Tok::Sym("(") => {
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(name) => self.ident(name, t.span),
            other => Err(Error::Syntax {
                line: t.span.line,
                column: t.span.column,
                message: format!("unexpected {}", describe(&other)),
            }),
        }
    }

    fn ident(&mut self, name: String, span: Span) -> Result<Expr> {
        if self.is_sym("(") {
            if name == "piecewise" {
                return self.piecewise(span);
            }
            self.next();
            let mut args = Vec::new();
            if !self.is_sym(")") {
                loop {
                    args.push(self.expr()?);
                    if self.is_sym(",") {
                        self.next();
                    } else {
                        break;
                    }
                }
            }
            self.expect(")")?;
            if name == "min" || name == "max" {
                if args.len() < 2 {
                    return Err(Error::Arity {
                        name,
                        expected: "at least 2".into(),
                        found: args.len(),
                        line: span.line,
                        column: span.column,
                    });
                }
                let mut it = args.into_iter();
                let mut acc = it.next().unwrap();
                for a in it {
                    acc = if name == "max" {
                        Expr::max2(acc, a, span)
                    } else {
                        Expr::min2(acc, a, span)
                    };
                }
                return Ok(acc);
            }
            let Some(func) = Func::from_name(&name) else {
                return Err(Error::UnknownIdentifier {
                    name,
                    line: span.line,
                    column: span.column,
                });
            };
            if args.len() != 1 {
                return Err(Error::Arity {
                    name,
                    expected: "1".into(),
                    found: args.len(),
                    line: span.line,
                    column: span.column,
                });
            }
            let a = args.pop().unwrap();
            return Ok(Expr::new(ExprKind::Call(func, Box::new(a)), span));
        }
        if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
            let ok = idx >= 1 && self.dim.is_none_or(|d| idx <= d);
            if ok {
                return Ok(Expr::new(ExprKind::Var(idx - 1), span));
            }
        }
        if name == "pi" {
            return Ok(Expr::new(ExprKind::Num(std::f64::consts::PI), span));
        }
        Err(Error::UnknownIdentifier {
            name,
            line: span.line,
            column: span.column,
        })
    }

    fn piecewise(&mut self, span: Span) -> Result<Expr> {
        self.expect("(")?;
        let mut branches = Vec::new();
        loop {
            if matches!(&self.peek().tok, Tok::Ident(s) if s == "else") {
                self.next();
                self.expect(":")?;
                let e = self.expr()?;
                if self.is_sym(";") {
                    self.next();
                }
                self.expect(")")?;
                if branches.is_empty() {
                    return Err(Error::Syntax {
                        line: span.line,
                        column: span.column,
                        message: "piecewise needs at least one guarded branch".into(),
                    });
                }
                return Ok(Expr::new(
                    ExprKind::Piecewise {
                        branches,
                        otherwise: Box::new(e),
                    },
                    span,
                ));
            }
            let cond = self.cond()?;
            self.expect(":")?;
            let e = self.expr()?;
            branches.push((cond, e));
            if self.is_sym(";") {
                self.next();
            } else {
                return Err(self.err_here("expected `;` or an `else:` branch".into()));
            }
        }
    }

    fn cond(&mut self) -> Result<Cond> {
        let mut atoms = Vec::new();
        loop {
            let lhs = self.expr()?;
            let op = match &self.peek().tok {
                Tok::Sym("<=") => CmpOp::Le,
                Tok::Sym("<") => CmpOp::Lt,
                Tok::Sym(">=") => CmpOp::Ge,
                Tok::Sym(">") => CmpOp::Gt,
                other => {
                    return Err(self.err_here(format!(
                        "expected a comparison in guard, found {}",
                        describe(other)
                    )))
                }
            };
            self.next();
            let rhs = self.expr()?;
            atoms.push(Atom { lhs, op, rhs });
            if matches!(&self.peek().tok, Tok::Ident(s) if s == "and") {
                self.next();
            } else {
                return Ok(Cond { atoms });
            }
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number `{v}`"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Sym(s) => format!("`{s}`"),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a function body. Variables beyond `dim` (when given) are unknown.
pub fn parse_expr(src: &str, dim: Option<usize>) -> Result<Expr> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.expr()?;
    if p.peek().tok != Tok::Eof {
        return Err(p.err_here(format!("unexpected {}", describe(&p.peek().tok))));
    }
    Ok(e)
}

/// Relation of a set constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
}

/// Parses `expr rel expr; ...` into `(lhs - rhs, relation)` pairs, with
/// the constant moved to the right when the right side is a number.
pub fn parse_constraints(src: &str, dim: Option<usize>) -> Result<Vec<(Expr, Relation, f64)>> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, dim };
    let mut out = Vec::new();
    loop {
        if p.peek().tok == Tok::Eof {
            break;
        }
        let lhs = p.expr()?;
        let rel = match &p.peek().tok {
            Tok::Sym("<=") => Relation::Le,
            Tok::Sym(">=") => Relation::Ge,
            Tok::Sym("==") | Tok::Sym("=") => Relation::Eq,
            other => {
                return Err(p.err_here(format!(
                    "expected `<=`, `>=` or `==`, found {}",
                    describe(other)
                )))
            }
        };
        p.next();
        let rhs = p.expr()?;
        match rhs.kind {
            ExprKind::Num(c) => out.push((lhs, rel, c)),
            ExprKind::Neg(ref inner) if matches!(inner.kind, ExprKind::Num(_)) => {
                let ExprKind::Num(c) = inner.kind else { unreachable!() };
                out.push((lhs, rel, -c))
            }
            _ => out.push((Expr::sub(lhs, rhs), rel, 0.0)),
        }
        if p.is_sym(";") {
            p.next();
        } else if p.peek().tok != Tok::Eof {
            return Err(p.err_here("expected `;` between constraints".into()));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_piecewise() {
        let e = parse_expr("piecewise(x1 <= 0: 0; else: -x1)", None).unwrap();
        assert!(matches!(e.kind, ExprKind::Piecewise { .. }));
        assert_eq!(e.arity(), 1);
    }

    #[test]
    fn reports_position() {
        match parse_expr("x1 +\n  * 2", None) {
            Err(Error::Syntax { line, column, .. }) => {
                assert_eq!((line, column), (2, 3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_arity() {
        assert!(matches!(
            parse_expr("foo(x1)", None),
            Err(Error::UnknownIdentifier { .. })
        ));
        assert!(matches!(parse_expr("x3", Some(2)), Err(Error::UnknownIdentifier { .. })));
        assert!(matches!(parse_expr("exp(x1, x2)", None), Err(Error::Arity { .. })));
        assert!(matches!(parse_expr("max(x1)", None), Err(Error::Arity { .. })));
    }

    #[test]
    fn display_round_trips() {
        let e = parse_expr("-x1^2 + max(x2, 3*x1) / 2 - 1e-3", None).unwrap();
        let again = parse_expr(&e.to_string(), None).unwrap();
        assert_eq!(e.to_string(), again.to_string());
    }

    #[test]
    fn constraints() {
        let c = parse_constraints("x1 >= 0; x2 >= 0; x1*x2 >= 1", None).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2].1, Relation::Ge);
        assert_eq!(c[2].2, 1.0);
        let d = parse_constraints("x2 <= -2", None).unwrap();
        assert_eq!(d[0].2, -2.0);
    }

    #[test]
    fn directive_header() {
        let d = directives("@dim 3\n@continuous\nx1").unwrap();
        assert_eq!(d.dim, Some(3));
        assert!(d.continuous);
        assert!(directives("@bogus").is_err());
    }
}
