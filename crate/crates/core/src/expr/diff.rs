use num_traits::One;

use super::{Expr, ExprError, Func, Node, Rational, Symbol, SymbolKind, Unknown};

impl Expr {
    /// Derivative with respect to a base coordinate.
    pub fn differentiate(&self, var: &Symbol) -> Result<Expr, ExprError> {
        if var.kind != SymbolKind::BaseCoordinate {
            return Err(ExprError::NotBaseCoordinate(var.name.to_string()));
        }
        Ok(self.diff_with(&|leaf| match leaf {
            Node::Symbol(s) if *s == var.name => Expr::one(),
            Node::Unknown(u) if u.arg == var.name => Expr::unknown(u.derivative()),
            _ => Expr::zero(),
        }))
    }

    /// Formal partial derivative treating `u` as an independent variable.
    pub fn partial_unknown(&self, u: &Unknown) -> Expr {
        self.diff_with(&|leaf| match leaf {
            Node::Unknown(v) if v == u => Expr::one(),
            _ => Expr::zero(),
        })
    }

    /// Formal partial derivative with respect to any symbol, parameters included.
    pub fn partial_symbol(&self, name: &str) -> Expr {
        self.diff_with(&|leaf| match leaf {
            Node::Symbol(s) if &**s == name => Expr::one(),
            _ => Expr::zero(),
        })
    }

    fn diff_with(&self, leaf: &dyn Fn(&Node) -> Expr) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Symbol(_) | Node::Unknown(_) => leaf(self.node()),
            Node::Sum(ts) => Expr::sum(ts.iter().map(|t| t.diff_with(leaf))),
            Node::Product(fs) => {
                let mut terms = Vec::new();
                for (i, f) in fs.iter().enumerate() {
                    let df = f.diff_with(leaf);
                    if df.is_zero() {
                        continue;
                    }
                    let mut parts = Vec::with_capacity(fs.len());
                    parts.push(df);
                    parts.extend(fs.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, g)| g.clone()));
                    terms.push(Expr::product(parts));
                }
                Expr::sum(terms)
            }
            Node::Pow(b, r) => {
                let db = b.diff_with(leaf);
                if db.is_zero() {
                    return Expr::zero();
                }
                Expr::product([
                    Expr::constant(*r),
                    Expr::pow(b.clone(), *r - Rational::one()),
                    db,
                ])
            }
            Node::Quot(n, d) => {
                let dn = n.diff_with(leaf);
                let dd = d.diff_with(leaf);
                let first = dn.div(d);
                if dd.is_zero() {
                    return first;
                }
                first.sub(&n.mul(&dd).div(&d.powi(2)))
            }
            Node::Apply(f, a) => {
                let da = a.diff_with(leaf);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => Expr::func(Func::Cos, a.clone()),
                    Func::Cos => Expr::func(Func::Sin, a.clone()).neg(),
                    Func::Exp => self.clone(),
                    Func::Log => return da.div(a),
                    Func::Tanh => Expr::func(Func::Sech, a.clone()).powi(2),
                    Func::Sech => self.mul(&Expr::func(Func::Tanh, a.clone())).neg(),
                    Func::Sqrt => return da.div(&self.scale(Rational::from_integer(2))),
                };
                outer.mul(&da)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, EvalBinding, Workspace};

    fn ws() -> Workspace {
        let mut ws = Workspace::with_coordinates(&["x", "y"]);
        ws.declare_parameter("p");
        ws.declare_function("a", "x").unwrap();
        ws.declare_function("b", "x").unwrap();
        ws
    }

    #[test]
    fn tanh_derivative() {
        let w = ws();
        let e = parse_expr("tanh(y)", &w).unwrap();
        let d = e.differentiate(&w.symbol("y").unwrap()).unwrap();
        assert_eq!(d.to_string(), "sech(y)^2");
    }

    #[test]
    fn product_and_chain_rule_on_unknowns() {
        let w = ws();
        let e = parse_expr("a(x)*b(x)^(-1/4)", &w).unwrap();
        let d = e.differentiate(&w.symbol("x").unwrap()).unwrap();
        let expected = parse_expr("a'(x)*b(x)^(-1/4) - (1/4)*a(x)*b(x)^(-5/4)*b'(x)", &w).unwrap();
        let bind = EvalBinding::new()
            .unknown_key("a", 0, 0.7)
            .unknown_key("a", 1, -1.3)
            .unknown_key("b", 0, 1.9)
            .unknown_key("b", 1, 0.4);
        assert!((d.eval(&bind).unwrap() - expected.eval(&bind).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn other_coordinates_vanish() {
        let w = ws();
        let d = parse_expr("x*a(x)", &w).unwrap().differentiate(&w.symbol("y").unwrap()).unwrap();
        assert!(d.is_zero());
    }

    #[test]
    fn parameters_are_rejected() {
        let w = ws();
        let e = parse_expr("p", &w).unwrap();
        assert_eq!(e.differentiate(&w.symbol("p").unwrap()), Err(ExprError::NotBaseCoordinate("p".into())));
    }

    #[test]
    fn formal_partials() {
        let w = ws();
        let e = parse_expr("3*a'(x)*b(x) + p^2", &w).unwrap();
        let pa = e.partial_unknown(&Unknown::new("a", "x", 1));
        assert_eq!(pa, parse_expr("3*b(x)", &w).unwrap());
        assert_eq!(e.partial_symbol("p"), parse_expr("2*p", &w).unwrap());
    }
}
