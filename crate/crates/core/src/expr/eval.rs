use std::collections::HashMap;

use num_traits::ToPrimitive;

use super::{Expr, ExprError, Func, Node, Unknown};

/// Values for symbols and unknown-function instances.
///
/// Unknown instances are keyed by name and derivative order; the argument is
/// implied by the point being evaluated.
#[derive(Debug, Clone, Default)]
pub struct EvalBinding {
    symbols: HashMap<String, f64>,
    unknowns: HashMap<(String, u32), f64>,
}

impl EvalBinding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn sym(mut self, name: &str, v: f64) -> Self {
        self.set_sym(name, v);
        self
    }

    pub fn unknown_key(mut self, name: &str, order: u32, v: f64) -> Self {
        self.set_unknown_key(name, order, v);
        self
    }

    pub fn set_sym(&mut self, name: &str, v: f64) {
        self.symbols.insert(name.to_string(), v);
    }

    pub fn set_unknown(&mut self, u: &Unknown, v: f64) {
        self.set_unknown_key(&u.name, u.order, v);
    }

    pub fn set_unknown_key(&mut self, name: &str, order: u32, v: f64) {
        self.unknowns.insert((name.to_string(), order), v);
    }

    pub fn get_sym(&self, name: &str) -> Option<f64> {
        self.symbols.get(name).copied()
    }

    pub fn get_unknown(&self, u: &Unknown) -> Option<f64> {
        self.unknowns.get(&(u.name.to_string(), u.order)).copied()
    }

    pub fn remove_unknown_key(&mut self, name: &str, order: u32) {
        self.unknowns.remove(&(name.to_string(), order));
    }
}

/// Magnitude bookkeeping collected during evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalTrace {
    /// Largest absolute value of any summand encountered.
    pub max_term: f64,
}

fn domain(e: &Expr, detail: impl Into<String>) -> ExprError {
    ExprError::Domain { expr: e.to_string(), detail: detail.into() }
}

impl Expr {
    pub fn eval(&self, b: &EvalBinding) -> Result<f64, ExprError> {
        let mut t = EvalTrace::default();
        self.eval_traced(b, &mut t)
    }

    pub fn eval_traced(&self, b: &EvalBinding, t: &mut EvalTrace) -> Result<f64, ExprError> {
        let v = match self.node() {
            Node::Const(r) => r.to_f64().unwrap_or(f64::NAN),
            Node::Symbol(s) => b.get_sym(s).ok_or_else(|| ExprError::Unbound(s.to_string()))?,
            Node::Unknown(u) => b.get_unknown(u).ok_or_else(|| ExprError::Unbound(u.to_string()))?,
            Node::Sum(ts) => {
                let mut acc = 0.0;
                for x in ts {
                    let v = x.eval_traced(b, t)?;
                    t.max_term = t.max_term.max(v.abs());
                    acc += v;
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = 1.0;
                for x in fs {
                    acc *= x.eval_traced(b, t)?;
                }
                acc
            }
            Node::Pow(base, r) => {
                let v = base.eval_traced(b, t)?;
                if r.is_integer() {
                    let n = *r.numer();
                    if v == 0.0 && n < 0 {
                        return Err(domain(self, "zero raised to a negative power"));
                    }
                    match i32::try_from(n) {
                        Ok(k) => v.powi(k),
                        Err(_) => v.powf(n as f64),
                    }
                } else {
                    if v < 0.0 {
                        return Err(domain(self, format!("negative base {v} with fractional exponent")));
                    }
                    if v == 0.0 && *r.numer() < 0 {
                        return Err(domain(self, "zero raised to a negative power"));
                    }
                    v.powf(r.to_f64().unwrap_or(f64::NAN))
                }
            }
            Node::Quot(n, d) => {
                let num = n.eval_traced(b, t)?;
                let den = d.eval_traced(b, t)?;
                if den == 0.0 {
                    return Err(domain(self, "division by zero"));
                }
                num / den
            }
            Node::Apply(f, a) => {
                let x = a.eval_traced(b, t)?;
                match f {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Tanh => x.tanh(),
                    Func::Sech => 1.0 / x.cosh(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(domain(self, format!("log of non-positive {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(domain(self, format!("sqrt of negative {x}")));
                        }
                        x.sqrt()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(domain(self, "non-finite value"));
        }
        Ok(v)
    }
}
