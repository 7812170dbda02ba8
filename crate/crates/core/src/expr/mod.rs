//! Scalar symbolic expressions.
//!
//! Expressions are immutable trees behind an [`Arc`]. All constructors go
//! through a small set of smart constructors ([`Expr::add`], [`Expr::mul`],
//! [`Expr::div`], [`Expr::pow`]) that flatten, fold exact rational constants
//! and merge like terms. They never attempt canonical simplification: zero
//! detection is numeric (see [`zero`]).

mod diff;
mod eval;
mod parse;
pub(crate) mod poly;
mod print;
mod simplify;
mod subst;
pub mod zero;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use num_rational::Ratio;
use num_traits::{CheckedAdd, CheckedMul, One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub use eval::{EvalBinding, EvalTrace};
pub use parse::parse_expr;
pub use print::{print_signed, Bare};
pub use zero::{is_identically_zero, Domain, ZeroTest};

/// Exact rational constant.
pub type Rational = Ratio<i64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("undeclared identifier `{0}`")]
    Undeclared(String),
    #[error("unbound symbol `{0}`")]
    Unbound(String),
    #[error("domain violation in `{expr}`: {detail}")]
    Domain { expr: String, detail: String },
    #[error("cannot differentiate with respect to parameter `{0}`")]
    NotBaseCoordinate(String),
    #[error("cyclic substitution involving `{0}`")]
    CyclicSubstitution(String),
}

/// Role of a declared identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymbolKind {
    BaseCoordinate,
    Parameter,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol {
    pub name: Arc<str>,
    pub kind: SymbolKind,
}

impl Symbol {
    pub fn coordinate(name: &str) -> Self {
        Symbol { name: name.into(), kind: SymbolKind::BaseCoordinate }
    }

    pub fn parameter(name: &str) -> Self {
        Symbol { name: name.into(), kind: SymbolKind::Parameter }
    }

    pub fn expr(&self) -> Expr {
        Expr::symbol(&self.name)
    }
}

/// An instance `f^(k)(x)` of an unknown profile function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Unknown {
    pub name: Arc<str>,
    pub arg: Arc<str>,
    pub order: u32,
}

impl Unknown {
    pub fn new(name: &str, arg: &str, order: u32) -> Self {
        Unknown { name: name.into(), arg: arg.into(), order }
    }

    pub fn derivative(&self) -> Self {
        Unknown { order: self.order + 1, ..self.clone() }
    }

    /// Domain key: the name followed by one prime per derivative order.
    pub fn key(&self) -> String {
        let mut s = self.name.to_string();
        for _ in 0..self.order {
            s.push('\'');
        }
        s
    }
}

impl fmt::Display for Unknown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.key(), self.arg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Tanh,
    Sech,
    Sqrt,
}

impl Func {
    pub const ALL: [Func; 7] =
        [Func::Sin, Func::Cos, Func::Exp, Func::Log, Func::Tanh, Func::Sech, Func::Sqrt];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Tanh => "tanh",
            Func::Sech => "sech",
            Func::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Func::ALL.iter().copied().find(|f| f.name() == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    Const(Rational),
    Symbol(Arc<str>),
    Unknown(Unknown),
    Sum(Vec<Expr>),
    Product(Vec<Expr>),
    Pow(Expr, Rational),
    Quot(Expr, Expr),
    Apply(Func, Expr),
}

struct Inner {
    node: Node,
    hash: u64,
}

/// Immutable, cheaply clonable scalar expression.
#[derive(Clone)]
pub struct Expr(Arc<Inner>);

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || (self.0.hash == other.0.hash && self.0.node == other.0.node)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

/// FNV-1a over a byte stream; stable across platforms and releases.
#[derive(Clone, Copy)]
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn bytes(mut self, data: &[u8]) -> Self {
        for b in data {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
        self
    }

    pub(crate) fn u64(self, v: u64) -> Self {
        self.bytes(&v.to_le_bytes())
    }

    pub(crate) fn finish(self) -> u64 {
        self.0
    }
}

fn node_hash(node: &Node) -> u64 {
    let h = Fnv::new();
    let h = match node {
        Node::Const(r) => h.bytes(b"c").u64(*r.numer() as u64).u64(*r.denom() as u64),
        Node::Symbol(s) => h.bytes(b"s").bytes(s.as_bytes()),
        Node::Unknown(u) => h
            .bytes(b"u")
            .bytes(u.name.as_bytes())
            .bytes(b"(")
            .bytes(u.arg.as_bytes())
            .u64(u64::from(u.order)),
        Node::Sum(ts) => ts.iter().fold(h.bytes(b"+"), |h, t| h.u64(t.0.hash)),
        Node::Product(fs) => fs.iter().fold(h.bytes(b"*"), |h, t| h.u64(t.0.hash)),
        Node::Pow(b, r) => h.bytes(b"^").u64(b.0.hash).u64(*r.numer() as u64).u64(*r.denom() as u64),
        Node::Quot(n, d) => h.bytes(b"/").u64(n.0.hash).u64(d.0.hash),
        Node::Apply(f, a) => h.bytes(b"f").bytes(f.name().as_bytes()).u64(a.0.hash),
    };
    h.finish()
}

fn checked_add(a: &Rational, b: &Rational) -> Option<Rational> {
    a.checked_add(b)
}

fn checked_mul(a: &Rational, b: &Rational) -> Option<Rational> {
    a.checked_mul(b)
}

fn checked_powi(base: &Rational, exp: i64) -> Option<Rational> {
    if exp < 0 {
        if base.is_zero() {
            return None;
        }
        return checked_powi(&base.recip(), -exp);
    }
    let mut acc = Rational::one();
    for _ in 0..exp {
        acc = checked_mul(&acc, base)?;
    }
    Some(acc)
}

impl Expr {
    fn raw(node: Node) -> Expr {
        let hash = node_hash(&node);
        Expr(Arc::new(Inner { node, hash }))
    }

    pub fn node(&self) -> &Node {
        &self.0.node
    }

    /// Structural hash, stable across runs.
    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    pub fn constant(r: Rational) -> Expr {
        Expr::raw(Node::Const(r))
    }

    pub fn int(i: i64) -> Expr {
        Expr::constant(Rational::from_integer(i))
    }

    pub fn ratio(n: i64, d: i64) -> Expr {
        Expr::constant(Rational::new(n, d))
    }

    pub fn zero() -> Expr {
        Expr::int(0)
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn symbol(name: &str) -> Expr {
        Expr::raw(Node::Symbol(name.into()))
    }

    pub fn unknown(u: Unknown) -> Expr {
        Expr::raw(Node::Unknown(u))
    }

    pub fn func(f: Func, arg: Expr) -> Expr {
        if let Some(c) = arg.as_rational() {
            if c.is_zero() {
                match f {
                    Func::Sin | Func::Tanh | Func::Sqrt => return Expr::zero(),
                    Func::Cos | Func::Exp | Func::Sech => return Expr::one(),
                    Func::Log => {}
                }
            } else if c.is_one() && f == Func::Log {
                return Expr::zero();
            }
        }
        Expr::raw(Node::Apply(f, arg))
    }

    pub fn as_rational(&self) -> Option<Rational> {
        match self.node() {
            Node::Const(r) => Some(*r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node(), Node::Const(r) if r.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self.node(), Node::Const(r) if r.is_one())
    }

    /// Split off an exact constant coefficient: `c * rest`.
    fn split_coefficient(&self) -> (Rational, Expr) {
        match self.node() {
            Node::Const(r) => (*r, Expr::one()),
            Node::Product(fs) => match fs[0].node() {
                Node::Const(r) => {
                    let rest = if fs.len() == 2 {
                        fs[1].clone()
                    } else {
                        Expr::raw(Node::Product(fs[1..].to_vec()))
                    };
                    (*r, rest)
                }
                _ => (Rational::one(), self.clone()),
            },
            _ => (Rational::one(), self.clone()),
        }
    }

    /// Sum of terms with flattening, constant folding and like-term merging.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        // (coefficient, rest) in first-seen order; rest == 1 marks the constant term
        let mut acc: Vec<(Rational, Expr)> = Vec::new();
        let mut overflow: Vec<Expr> = Vec::new();
        fn push(acc: &mut Vec<(Rational, Expr)>, overflow: &mut Vec<Expr>, t: &Expr) {
            match t.node() {
                Node::Sum(ts) => {
                    for s in ts {
                        push(acc, overflow, s);
                    }
                }
                _ => {
                    let (c, rest) = t.split_coefficient();
                    if c.is_zero() {
                        return;
                    }
                    if let Some(slot) = acc.iter_mut().find(|(_, r)| *r == rest) {
                        match checked_add(&slot.0, &c) {
                            Some(v) => slot.0 = v,
                            None => overflow.push(t.clone()),
                        }
                    } else {
                        acc.push((c, rest));
                    }
                }
            }
        }
        for t in terms {
            push(&mut acc, &mut overflow, &t);
        }
        let mut out: Vec<Expr> = acc
            .into_iter()
            .filter(|(c, _)| !c.is_zero())
            .map(|(c, rest)| Expr::scaled(c, rest))
            .collect();
        out.extend(overflow);
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::raw(Node::Sum(out)),
        }
    }

    fn scaled(c: Rational, rest: Expr) -> Expr {
        if rest.is_one() {
            Expr::constant(c)
        } else if c.is_one() {
            rest
        } else {
            let mut fs = vec![Expr::constant(c)];
            match rest.node() {
                Node::Product(inner) => fs.extend(inner.iter().cloned()),
                _ => fs.push(rest),
            }
            Expr::raw(Node::Product(fs))
        }
    }

    /// Product with flattening, constant folding and merging of equal bases.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut coeff = Rational::one();
        let mut extra_consts: Vec<Expr> = Vec::new();
        let mut bases: Vec<(Expr, Rational)> = Vec::new();
        fn push(
            coeff: &mut Rational,
            extra: &mut Vec<Expr>,
            bases: &mut Vec<(Expr, Rational)>,
            f: &Expr,
        ) {
            match f.node() {
                Node::Const(r) => match checked_mul(coeff, r) {
                    Some(v) => *coeff = v,
                    None => extra.push(f.clone()),
                },
                Node::Product(fs) => {
                    for g in fs {
                        push(coeff, extra, bases, g);
                    }
                }
                _ => {
                    let (base, exp) = match f.node() {
                        Node::Pow(b, r) => (b.clone(), *r),
                        _ => (f.clone(), Rational::one()),
                    };
                    if let Some(slot) = bases.iter_mut().find(|(b, _)| *b == base) {
                        match checked_add(&slot.1, &exp) {
                            Some(v) => slot.1 = v,
                            None => bases.push((base, exp)),
                        }
                    } else {
                        bases.push((base, exp));
                    }
                }
            }
        }
        for f in factors {
            push(&mut coeff, &mut extra_consts, &mut bases, &f);
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        let mut rest: Vec<Expr> = Vec::new();
        for (b, e) in bases {
            if e.is_zero() {
                continue;
            }
            let p = Expr::pow(b, e);
            match p.node() {
                Node::Const(r) => match checked_mul(&coeff, r) {
                    Some(v) => coeff = v,
                    None => extra_consts.push(p),
                },
                Node::Product(fs) => {
                    // a distributed power can expose new constants
                    for g in fs {
                        match g.node() {
                            Node::Const(r) => match checked_mul(&coeff, r) {
                                Some(v) => coeff = v,
                                None => extra_consts.push(g.clone()),
                            },
                            _ => rest.push(g.clone()),
                        }
                    }
                }
                _ => rest.push(p),
            }
        }
        if coeff.is_zero() {
            return Expr::zero();
        }
        rest.extend(extra_consts);
        if rest.is_empty() {
            return Expr::constant(coeff);
        }
        if coeff.is_one() && rest.len() == 1 {
            return rest.pop().unwrap();
        }
        let mut fs = Vec::with_capacity(rest.len() + 1);
        if !coeff.is_one() {
            fs.push(Expr::constant(coeff));
        }
        fs.extend(rest);
        if fs.len() == 1 {
            return fs.pop().unwrap();
        }
        Expr::raw(Node::Product(fs))
    }

    pub fn add(&self, other: &Expr) -> Expr {
        Expr::sum([self.clone(), other.clone()])
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        Expr::sum([self.clone(), other.neg()])
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        Expr::product([self.clone(), other.clone()])
    }

    pub fn neg(&self) -> Expr {
        Expr::product([Expr::int(-1), self.clone()])
    }

    pub fn scale(&self, c: Rational) -> Expr {
        Expr::product([Expr::constant(c), self.clone()])
    }

    /// Quotient. Constant factors are pulled out of numerator and denominator.
    pub fn div(&self, den: &Expr) -> Expr {
        if let Some(d) = den.as_rational() {
            if d.is_zero() {
                return Expr::raw(Node::Quot(self.clone(), den.clone()));
            }
            return self.scale(d.recip());
        }
        if self.is_zero() {
            return Expr::zero();
        }
        let (cn, n) = self.split_coefficient();
        let (cd, d) = den.split_coefficient();
        let c = cn / cd;
        let q = if n == d {
            Expr::one()
        } else if d.is_one() {
            n
        } else {
            Expr::raw(Node::Quot(n, d))
        };
        q.scale(c)
    }

    /// Rational power.
    pub fn pow(base: Expr, exp: Rational) -> Expr {
        if exp.is_zero() {
            return Expr::one();
        }
        if exp.is_one() {
            return base;
        }
        if let Some(c) = base.as_rational() {
            if c.is_one() {
                return Expr::one();
            }
            if c.is_zero() && exp.is_positive() {
                return Expr::zero();
            }
            if exp.is_integer() {
                if let Some(v) = checked_powi(&c, *exp.numer()) {
                    return Expr::constant(v);
                }
            }
        }
        match base.node() {
            Node::Pow(inner, r) if exp.is_integer() => {
                if let Some(e) = checked_mul(r, &exp) {
                    return Expr::pow(inner.clone(), e);
                }
            }
            Node::Product(fs) if exp.is_integer() => {
                return Expr::product(fs.iter().map(|f| Expr::pow(f.clone(), exp)));
            }
            _ => {}
        }
        Expr::raw(Node::Pow(base, exp))
    }

    pub fn powi(&self, n: i64) -> Expr {
        Expr::pow(self.clone(), Rational::from_integer(n))
    }

    pub fn sqrt(&self) -> Expr {
        Expr::func(Func::Sqrt, self.clone())
    }

    /// Every symbol name occurring in the expression.
    pub fn symbols(&self) -> Vec<Arc<str>> {
        let mut out = BTreeMap::new();
        self.visit(&mut |e| {
            if let Node::Symbol(s) = e.node() {
                out.insert(s.clone(), ());
            }
        });
        out.into_keys().collect()
    }

    /// Every unknown-function instance occurring in the expression.
    pub fn unknowns(&self) -> Vec<Unknown> {
        let mut out = BTreeMap::new();
        self.visit(&mut |e| {
            if let Node::Unknown(u) = e.node() {
                out.insert(u.clone(), ());
            }
        });
        out.into_keys().collect()
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Node::Symbol(s) = e.node() {
                found |= &**s == name;
            }
        });
        found
    }

    pub fn contains_unknown(&self, u: &Unknown) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if let Node::Unknown(v) = e.node() {
                found |= v == u;
            }
        });
        found
    }

    /// Number of nodes (with sharing counted repeatedly).
    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    pub(crate) fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        match self.node() {
            Node::Const(_) | Node::Symbol(_) | Node::Unknown(_) => {}
            Node::Sum(xs) | Node::Product(xs) => xs.iter().for_each(|x| x.visit(f)),
            Node::Pow(b, _) => b.visit(f),
            Node::Quot(n, d) => {
                n.visit(f);
                d.visit(f);
            }
            Node::Apply(_, a) => a.visit(f),
        }
    }

    /// Exact value when the expression is a folded constant.
    pub fn to_f64_exact(&self) -> Option<f64> {
        self.as_rational().and_then(|r| r.to_f64())
    }
}

impl From<i64> for Expr {
    fn from(i: i64) -> Self {
        Expr::int(i)
    }
}

impl From<Rational> for Expr {
    fn from(r: Rational) -> Self {
        Expr::constant(r)
    }
}

impl std::ops::Add for &Expr {
    type Output = Expr;
    fn add(self, rhs: &Expr) -> Expr {
        Expr::add(self, rhs)
    }
}

impl std::ops::Sub for &Expr {
    type Output = Expr;
    fn sub(self, rhs: &Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl std::ops::Mul for &Expr {
    type Output = Expr;
    fn mul(self, rhs: &Expr) -> Expr {
        Expr::mul(self, rhs)
    }
}

impl std::ops::Div for &Expr {
    type Output = Expr;
    fn div(self, rhs: &Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl std::ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

/// Symbol table for parsing: coordinates, parameters and unknown functions.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    symbols: BTreeMap<String, SymbolKind>,
    functions: BTreeMap<String, String>,
}

impl Workspace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_coordinates(names: &[&str]) -> Self {
        let mut ws = Workspace::new();
        for n in names {
            ws.declare_coordinate(n);
        }
        ws
    }

    pub fn declare_coordinate(&mut self, name: &str) -> Symbol {
        self.symbols.insert(name.to_string(), SymbolKind::BaseCoordinate);
        Symbol::coordinate(name)
    }

    pub fn declare_parameter(&mut self, name: &str) -> Symbol {
        self.symbols.insert(name.to_string(), SymbolKind::Parameter);
        Symbol::parameter(name)
    }

    /// Declare an unknown function `name(arg)`; `arg` must be a coordinate.
    pub fn declare_function(&mut self, name: &str, arg: &str) -> Result<(), ExprError> {
        match self.symbols.get(arg) {
            Some(SymbolKind::BaseCoordinate) => {
                self.functions.insert(name.to_string(), arg.to_string());
                Ok(())
            }
            Some(SymbolKind::Parameter) => Err(ExprError::NotBaseCoordinate(arg.to_string())),
            None => Err(ExprError::Undeclared(arg.to_string())),
        }
    }

    pub fn symbol(&self, name: &str) -> Option<Symbol> {
        self.symbols.get(name).map(|k| Symbol { name: name.into(), kind: *k })
    }

    pub fn function_arg(&self, name: &str) -> Option<&str> {
        self.functions.get(name).map(String::as_str)
    }

    pub fn coordinates(&self) -> Vec<Symbol> {
        self.symbols
            .iter()
            .filter(|(_, k)| **k == SymbolKind::BaseCoordinate)
            .map(|(n, k)| Symbol { name: n.as_str().into(), kind: *k })
            .collect()
    }

    pub fn functions(&self) -> impl Iterator<Item = (&str, &str)> {
        self.functions.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.symbols.contains_key(name) || self.functions.contains_key(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn like_terms_merge() {
        let x = Expr::symbol("x");
        let e = Expr::sum([x.clone(), x.clone(), x.neg()]);
        assert_eq!(e, x);
        let z = x.sub(&x);
        assert!(z.is_zero());
    }

    #[test]
    fn constants_fold_exactly() {
        let e = Expr::sum([Expr::ratio(1, 2), Expr::ratio(1, 4), Expr::ratio(1, 4)]);
        assert!(e.is_one());
        let p = Expr::product([Expr::ratio(3, 4), Expr::int(4)]);
        assert_eq!(p.as_rational(), Some(Rational::from_integer(3)));
    }

    #[test]
    fn powers_merge_in_products() {
        let b = Expr::symbol("b");
        let e = Expr::product([Expr::pow(b.clone(), Rational::new(3, 4)), Expr::pow(b.clone(), Rational::new(-3, 4))]);
        assert!(e.is_one());
        let sq = b.mul(&b);
        assert_eq!(sq, b.powi(2));
    }

    #[test]
    fn quotient_pulls_constants() {
        let c = Expr::symbol("C");
        let a = Expr::symbol("A");
        let q = c.div(&a.powi(2).scale(Rational::from_integer(4)));
        match q.node() {
            Node::Product(fs) => assert_eq!(fs[0].as_rational(), Some(Rational::new(1, 4))),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_keys_carry_primes() {
        assert_eq!(Unknown::new("a", "x", 2).key(), "a''");
        assert_eq!(Unknown::new("a", "x", 1).to_string(), "a'(x)");
    }
}
