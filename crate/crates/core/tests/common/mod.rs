#![allow(dead_code)]

use clarke_inf::ext_real::{ExtendedReal, NegInf, PosInf};
use clarke_inf::ext_add;

/// Extended reals used for the exhaustive table: both infinities and a
/// spread of finite values of every sign.
pub fn table_values() -> Vec<ExtendedReal> {
    let mut v = vec![NegInf, PosInf];
    for x in [-1e300, -7.5, -1.0, -0.0, 0.0, 2.0, 3.25, 1e300] {
        v.push(ExtendedReal::finite(x));
    }
    v
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Kind {
    Neg,
    Fin,
    Pos,
}

fn kind(a: ExtendedReal) -> Kind {
    match a {
        NegInf => Kind::Neg,
        PosInf => Kind::Pos,
        _ => Kind::Fin,
    }
}

/// Checks the convention table; returns the violated entries.
pub fn convention_table_failures() -> Vec<String> {
    let mut fails = Vec::new();
    let vals = table_values();
    for &a in &vals {
        for &b in &vals {
            let got = ext_add(a, b);
            // written out case by case, independent of the implementation
            let want = match (kind(a), kind(b)) {
                (Kind::Pos, _) | (_, Kind::Pos) => PosInf,
                (Kind::Neg, _) | (_, Kind::Neg) => NegInf,
                (Kind::Fin, Kind::Fin) => ExtendedReal::finite(a.to_f64() + b.to_f64()),
            };
            if got != want {
                fails.push(format!("{a} + {b} = {got}, want {want}"));
            }
            // order: -inf < r < +inf, and the real order on finite values
            let want_lt = match (kind(a), kind(b)) {
                (Kind::Fin, Kind::Fin) => a.to_f64() < b.to_f64(),
                (ka, kb) => (ka as u8) < (kb as u8),
            };
            if (a < b) != want_lt {
                fails.push(format!("order {a} < {b}"));
            }
            // infinite times infinite follows the sign rule
            if kind(a) != Kind::Fin && kind(b) != Kind::Fin {
                let want = if kind(a) == kind(b) { PosInf } else { NegInf };
                if a.mul(b).ok() != Some(want) {
                    fails.push(format!("{a} * {b}"));
                }
            }
        }
        for lambda in [-3.0, -0.5, 0.5, 4.0] {
            let got = a.scale(lambda).ok();
            let want = match kind(a) {
                Kind::Pos if lambda > 0.0 => Some(PosInf),
                Kind::Pos => Some(NegInf),
                Kind::Neg if lambda > 0.0 => Some(NegInf),
                Kind::Neg => Some(PosInf),
                Kind::Fin => ExtendedReal::from_f64(lambda * a.to_f64()).or(Some(if lambda * a.to_f64() > 0.0 {
                    PosInf
                } else {
                    NegInf
                })),
            };
            if kind(a) == Kind::Fin && (lambda * a.to_f64()).is_infinite() {
                continue;
            }
            if got != want {
                fails.push(format!("{lambda} * {a} = {got:?}"));
            }
        }
        if kind(a) != Kind::Fin && a.scale(0.0).is_ok() {
            fails.push(format!("0 * {a} accepted"));
        }
    }
    if ExtendedReal::inf(Vec::new()) != PosInf {
        fails.push("inf of empty".into());
    }
    if ExtendedReal::sup(Vec::new()) != NegInf {
        fails.push("sup of empty".into());
    }
    for &a in &vals {
        if ExtendedReal::inf(vec![a]) != a || ExtendedReal::sup(vec![a]) != a {
            fails.push(format!("inf/sup of {{{a}}}"));
        }
    }
    if ExtendedReal::inf(vals.clone()) != NegInf || ExtendedReal::sup(vals) != PosInf {
        fails.push("inf/sup of the full table".into());
    }
    fails
}
