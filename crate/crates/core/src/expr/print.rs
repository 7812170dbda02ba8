use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::{Expr, Node, Rational};

/// Printing style for unknown-function instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Style {
    /// `a'(x)`, re-parsable.
    Full,
    /// `a'`, used in flow displays.
    Bare,
}

/// Wrapper that prints an expression with bare unknown names.
pub struct Bare<'a>(&'a Expr);

impl fmt::Display for Bare<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self.0, Style::Bare).map_err(|_| fmt::Error)?;
        f.write_str(&s)
    }
}

impl Expr {
    pub fn bare(&self) -> Bare<'_> {
        Bare(self)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, Style::Full)?;
        f.write_str(&s)
    }
}

fn write_rational(out: &mut String, r: &Rational) -> fmt::Result {
    if r.is_integer() {
        write!(out, "{}", r.numer())
    } else {
        write!(out, "({}/{})", r.numer(), r.denom())
    }
}

/// Leading sign of a term: negative constants or products led by one.
fn negated(e: &Expr) -> Option<Expr> {
    match e.node() {
        Node::Const(r) if r.is_negative() => Some(Expr::constant(-*r)),
        Node::Product(fs) => match fs[0].node() {
            Node::Const(r) if r.is_negative() => {
                let mut rest = fs.clone();
                rest[0] = Expr::constant(-*r);
                Some(Expr::product(rest))
            }
            _ => None,
        },
        _ => None,
    }
}

/// Coefficient with an explicit leading sign, e.g. `+1`, `-(3/4)`, `+(a - b)`.
pub fn print_signed(e: &Expr) -> String {
    let (sign, body) = match negated(e) {
        Some(pos) => ('-', pos),
        None => ('+', e.clone()),
    };
    let mut out = String::from(sign);
    let res = match body.node() {
        Node::Sum(_) => {
            out.push('(');
            let r = write_expr(&mut out, &body, Style::Full);
            out.push(')');
            r
        }
        _ => write_term(&mut out, &body, Style::Full),
    };
    res.expect("writing to a String cannot fail");
    out
}

pub(crate) fn write_expr(out: &mut String, e: &Expr, style: Style) -> fmt::Result {
    match e.node() {
        Node::Sum(ts) => {
            for (i, t) in ts.iter().enumerate() {
                match (i, negated(t)) {
                    (0, _) => write_term(out, t, style)?,
                    (_, Some(pos)) => {
                        out.push_str(" - ");
                        write_term(out, &pos, style)?;
                    }
                    (_, None) => {
                        out.push_str(" + ");
                        write_term(out, t, style)?;
                    }
                }
            }
            Ok(())
        }
        _ => write_term(out, e, style),
    }
}

fn write_term(out: &mut String, e: &Expr, style: Style) -> fmt::Result {
    match e.node() {
        Node::Product(fs) => {
            let mut rest: &[Expr] = fs;
            if let Node::Const(r) = fs[0].node() {
                if *r == -Rational::one() {
                    // `-a^2` would parse as `(-a)^2`, so keep the 1 in that case
                    if matches!(fs[1].node(), Node::Pow(..)) {
                        out.push_str("-1*");
                    } else {
                        out.push('-');
                    }
                    rest = &fs[1..];
                }
            }
            for (i, f) in rest.iter().enumerate() {
                if i > 0 {
                    out.push('*');
                }
                write_factor(out, f, style, true)?;
            }
            Ok(())
        }
        Node::Quot(n, d) => {
            match n.node() {
                Node::Sum(_) => {
                    out.push('(');
                    write_expr(out, n, style)?;
                    out.push(')');
                }
                _ => write_term(out, n, style)?,
            }
            out.push('/');
            write_factor(out, d, style, true)
        }
        _ => write_factor(out, e, style, false),
    }
}

/// Writes an operand of `*` or `/`. Anything that is not a single factor
/// gets parentheses.
fn write_factor(out: &mut String, e: &Expr, style: Style, in_product: bool) -> fmt::Result {
    match e.node() {
        Node::Const(r) => {
            if in_product && r.is_integer() && r.is_negative() {
                write!(out, "({})", r.numer())
            } else {
                write_rational(out, r)
            }
        }
        Node::Symbol(s) => {
            out.push_str(s);
            Ok(())
        }
        Node::Unknown(u) => {
            match style {
                Style::Full => write!(out, "{u}")?,
                Style::Bare => out.push_str(&u.key()),
            }
            Ok(())
        }
        Node::Apply(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write_expr(out, a, style)?;
            out.push(')');
            Ok(())
        }
        Node::Pow(b, r) => {
            let atomic = matches!(
                b.node(),
                Node::Symbol(_) | Node::Unknown(_) | Node::Apply(..)
            ) || matches!(b.node(), Node::Const(c) if c.is_integer() && !c.is_negative());
            if atomic {
                write_factor(out, b, style, false)?;
            } else {
                out.push('(');
                write_expr(out, b, style)?;
                out.push(')');
            }
            out.push('^');
            if r.is_integer() && !r.is_negative() {
                write!(out, "{}", r.numer())
            } else if r.is_integer() {
                write!(out, "({})", r.numer())
            } else {
                write!(out, "({}/{})", r.numer(), r.denom())
            }
        }
        Node::Sum(_) | Node::Product(_) | Node::Quot(..) => {
            out.push('(');
            write_expr(out, e, style)?;
            out.push(')');
            Ok(())
        }
    }
}
