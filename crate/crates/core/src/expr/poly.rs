//! Laurent polynomials with rational exponents over formal atoms, and exact
//! rational-function arithmetic on top of them.
//!
//! Atoms are the sub-expressions the algebra cannot see into: symbols,
//! unknowns, function applications and powers of sums. Atoms are treated as
//! independent indeterminates, so every identity proved here is sound, but
//! relations such as `sech² + tanh² = 1` are not used.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Node, Rational};

/// Exponent vector in sparse form, sorted by atom id, no zero entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub(crate) struct Mono(Vec<(u32, Rational)>);

impl Ord for Mono {
    /// Lexicographic on the dense exponent vector, atom 0 most significant.
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        loop {
            match (a.get(i), b.get(j)) {
                (None, None) => return Ordering::Equal,
                (Some((_, e)), None) => return e.cmp(&Rational::zero()),
                (None, Some((_, e))) => return Rational::zero().cmp(e),
                (Some((ia, ea)), Some((ib, eb))) => match ia.cmp(ib) {
                    Ordering::Less => return ea.cmp(&Rational::zero()),
                    Ordering::Greater => return Rational::zero().cmp(eb),
                    Ordering::Equal => {
                        let c = ea.cmp(eb);
                        if c != Ordering::Equal {
                            return c;
                        }
                        i += 1;
                        j += 1;
                    }
                },
            }
        }
    }
}

impl PartialOrd for Mono {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Mono {
    fn atom(id: u32, e: Rational) -> Mono {
        if e.is_zero() {
            Mono::default()
        } else {
            Mono(vec![(id, e)])
        }
    }

    fn combine(&self, other: &Mono, sign: i64) -> Mono {
        let s = Rational::from_integer(sign);
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let pick = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match pick {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0, b[j].1 * s));
                    j += 1;
                }
                Ordering::Equal => {
                    let e = a[i].1 + b[j].1 * s;
                    if !e.is_zero() {
                        out.push((a[i].0, e));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Mono(out)
    }

    fn mul(&self, other: &Mono) -> Mono {
        self.combine(other, 1)
    }

    fn div(&self, other: &Mono) -> Mono {
        self.combine(other, -1)
    }

    fn scale(&self, k: Rational) -> Mono {
        if k.is_zero() {
            return Mono::default();
        }
        Mono(self.0.iter().map(|(i, e)| (*i, e * k)).collect())
    }

    /// Componentwise minimum with zero filled in for missing atoms.
    fn meet(&self, other: &Mono) -> Mono {
        let mut out = Vec::new();
        let (a, b) = (&self.0, &other.0);
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let pick = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            let (id, e) = match pick {
                Ordering::Less => {
                    i += 1;
                    (a[i - 1].0, a[i - 1].1.min(Rational::zero()))
                }
                Ordering::Greater => {
                    j += 1;
                    (b[j - 1].0, b[j - 1].1.min(Rational::zero()))
                }
                Ordering::Equal => {
                    i += 1;
                    j += 1;
                    (a[i - 1].0, a[i - 1].1.min(b[j - 1].1))
                }
            };
            if !e.is_zero() {
                out.push((id, e));
            }
        }
        Mono(out)
    }
}

fn big(r: Rational) -> BigRational {
    BigRational::new((*r.numer()).into(), (*r.denom()).into())
}

fn small(r: &BigRational) -> Option<Rational> {
    Some(Rational::new(r.numer().to_i64()?, r.denom().to_i64()?))
}

#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub(crate) struct Poly(BTreeMap<Mono, BigRational>);

impl Poly {
    pub(crate) fn zero() -> Poly {
        Poly::default()
    }

    pub(crate) fn constant(c: BigRational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.0.insert(Mono::default(), c);
        }
        p
    }

    pub(crate) fn one() -> Poly {
        Poly::constant(BigRational::one())
    }

    fn term(m: Mono, c: BigRational) -> Poly {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.0.insert(m, c);
        }
        p
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub(crate) fn len(&self) -> usize {
        self.0.len()
    }

    fn as_monomial(&self) -> Option<(&Mono, &BigRational)> {
        if self.0.len() == 1 {
            self.0.iter().next()
        } else {
            None
        }
    }

    fn add_term(&mut self, m: Mono, c: BigRational) {
        use std::collections::btree_map::Entry;
        match self.0.entry(m) {
            Entry::Vacant(v) => {
                if !c.is_zero() {
                    v.insert(c);
                }
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub(crate) fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub(crate) fn sub(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.0 {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }

    pub(crate) fn neg(&self) -> Poly {
        Poly(self.0.iter().map(|(m, c)| (m.clone(), -c.clone())).collect())
    }

    pub(crate) fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        out
    }

    fn mul_term(&self, m: &Mono, c: &BigRational) -> Poly {
        Poly(self.0.iter().map(|(k, v)| (k.mul(m), v * c)).collect())
    }

    fn powi(&self, n: u32) -> Poly {
        (0..n).fold(Poly::one(), |acc, _| acc.mul(self))
    }

    fn leading(&self) -> Option<(&Mono, &BigRational)> {
        self.0.iter().next_back()
    }

    /// `self / d` when the division is exact, `None` otherwise. The step
    /// budget guards against non-terminating attempts on inexact input.
    pub(crate) fn exact_div(&self, d: &Poly) -> Option<Poly> {
        let (dm, dc) = d.leading()?;
        if let Some((m, c)) = d.as_monomial() {
            return Some(self.mul_term(&Mono::default().div(m), &c.recip()));
        }
        let mut rem = self.clone();
        let mut q = Poly::zero();
        let budget = 4 * (self.len() + d.len()) + 64;
        for _ in 0..budget {
            let Some((rm, rc)) = rem.leading() else { return Some(q) };
            let tm = rm.div(dm);
            let tc = rc / dc;
            rem = rem.sub(&d.mul_term(&tm, &tc));
            q.add_term(tm, tc);
            if rem.len() > 8 * (self.len() + d.len()) + 64 {
                return None;
            }
        }
        None
    }

    /// Largest monomial dividing every term, in the Laurent sense: exponents
    /// are the componentwise minima including zero.
    fn monomial_content(&self) -> Mono {
        let mut it = self.0.keys();
        let Some(first) = it.next() else { return Mono::default() };
        let start = first.meet(first);
        it.fold(start, |acc, m| acc.meet(m))
    }

    fn leading_coefficient(&self) -> BigRational {
        self.leading().map(|(_, c)| c.clone()).unwrap_or_else(BigRational::one)
    }
}

/// Assigns ids to atoms; shared by every polynomial taking part in one
/// computation.
#[derive(Default)]
pub(crate) struct Atoms {
    list: Vec<Expr>,
    index: HashMap<Expr, u32>,
}

/// Numerator and denominator over the same atoms.
#[derive(Clone, Debug)]
pub(crate) struct Frac {
    pub(crate) num: Poly,
    pub(crate) den: Poly,
}

impl Frac {
    pub(crate) fn poly(p: Poly) -> Frac {
        Frac { num: p, den: Poly::one() }
    }

    fn add(&self, o: &Frac) -> Frac {
        if self.den == o.den {
            return Frac { num: self.num.add(&o.num), den: self.den.clone() };
        }
        Frac { num: self.num.mul(&o.den).add(&o.num.mul(&self.den)), den: self.den.mul(&o.den) }.reduce()
    }

    fn mul(&self, o: &Frac) -> Frac {
        Frac { num: self.num.mul(&o.num), den: self.den.mul(&o.den) }.reduce()
    }

    fn recip(&self) -> Option<Frac> {
        if self.num.is_zero() {
            return None;
        }
        Some(Frac { num: self.den.clone(), den: self.num.clone() }.reduce())
    }

    /// Moves monomial content and the leading coefficient of the denominator
    /// into the numerator and cancels exact polynomial factors.
    pub(crate) fn reduce(self) -> Frac {
        if self.num.is_zero() {
            return Frac::poly(Poly::zero());
        }
        if let Some(q) = self.num.exact_div(&self.den) {
            return Frac::poly(q);
        }
        let content = self.den.monomial_content();
        let lc = self.den.leading_coefficient();
        let inv = Mono::default().div(&content);
        let r = lc.recip();
        let mut num = self.num.mul_term(&inv, &r);
        let mut den = self.den.mul_term(&inv, &r);
        // a common monomial denominator in the numerator can be folded too
        let nc = num.monomial_content();
        let dc = den.monomial_content();
        let shift = nc.meet(&dc);
        if !shift.0.is_empty() {
            let inv = Mono::default().div(&shift);
            num = num.mul_term(&inv, &BigRational::one());
            den = den.mul_term(&inv, &BigRational::one());
        }
        if let Some(q) = num.exact_div(&den) {
            return Frac::poly(q);
        }
        Frac { num, den }
    }
}

impl Atoms {
    pub(crate) fn new() -> Atoms {
        Atoms::default()
    }

    fn id(&mut self, e: &Expr) -> u32 {
        if let Some(i) = self.index.get(e) {
            return *i;
        }
        let i = self.list.len() as u32;
        self.list.push(e.clone());
        self.index.insert(e.clone(), i);
        i
    }

    fn atom(&mut self, e: &Expr, exp: Rational) -> Poly {
        let id = self.id(e);
        Poly::term(Mono::atom(id, exp), BigRational::one())
    }

    /// Rational function of an expression. Fails only for division by an
    /// exact zero.
    pub(crate) fn frac(&mut self, e: &Expr) -> Option<Frac> {
        Some(match e.node() {
            Node::Const(r) => Frac::poly(Poly::constant(big(*r))),
            Node::Symbol(_) | Node::Unknown(_) | Node::Apply(..) => Frac::poly(self.atom(e, Rational::one())),
            Node::Sum(ts) => {
                let mut acc = Frac::poly(Poly::zero());
                for t in ts {
                    acc = acc.add(&self.frac(t)?);
                }
                acc
            }
            Node::Product(fs) => {
                let mut acc = Frac::poly(Poly::one());
                for f in fs {
                    acc = acc.mul(&self.frac(f)?);
                }
                acc
            }
            Node::Quot(n, d) => self.frac(n)?.mul(&self.frac(d)?.recip()?),
            Node::Pow(b, r) => {
                let inner = self.frac(b)?;
                if let (Some((m, c)), true) = (inner.num.as_monomial(), inner.den.as_monomial().is_some()) {
                    let (dm, dc) = inner.den.as_monomial().expect("checked");
                    if c.is_one() && dc.is_one() {
                        return Some(Frac::poly(Poly::term(m.div(dm).scale(*r), BigRational::one())));
                    }
                }
                if r.is_integer() && r.numer().abs() <= 8 {
                    let n = r.numer().unsigned_abs() as u32;
                    let p = Frac { num: inner.num.powi(n), den: inner.den.powi(n) };
                    if *r.numer() < 0 {
                        p.recip()?
                    } else {
                        p
                    }
                } else {
                    Frac::poly(self.atom(e, Rational::one()))
                }
            }
        })
    }

    pub(crate) fn poly_expr(&self, p: &Poly) -> Option<Expr> {
        let mut terms = Vec::with_capacity(p.len());
        for (m, c) in p.0.iter().rev() {
            let mut powers: Vec<Expr> = m.0.iter().map(|(id, e)| Expr::pow(self.list[*id as usize].clone(), *e)).collect();
            powers.sort_by_cached_key(|f| f.to_string());
            let mut factors = vec![Expr::constant(small(c)?)];
            factors.extend(powers);
            terms.push(Expr::product(factors));
        }
        Some(Expr::sum(terms))
    }

    pub(crate) fn frac_expr(&self, f: &Frac) -> Option<Expr> {
        let n = self.poly_expr(&f.num)?;
        if f.den == Poly::one() {
            return Some(n);
        }
        Some(n.div(&self.poly_expr(&f.den)?))
    }
}

/// Fraction-free determinant. Exact divisions are guaranteed by the
/// algorithm, so a failed division means the input was degenerate.
pub(crate) fn bareiss_det(mut m: Vec<Vec<Poly>>) -> Option<Poly> {
    let n = m.len();
    if n == 0 {
        return Some(Poly::one());
    }
    let mut sign = false;
    let mut prev = Poly::one();
    for k in 0..n {
        if m[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !m[i][k].is_zero()) else { return Some(Poly::zero()) };
            m.swap(k, p);
            sign = !sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let t = m[i][j].mul(&m[k][k]).sub(&m[i][k].mul(&m[k][j]));
                m[i][j] = t.exact_div(&prev)?;
            }
        }
        prev = m[k][k].clone();
    }
    let d = m[n - 1][n - 1].clone();
    Some(if sign { d.neg() } else { d })
}

impl Expr {
    /// Rewrites the expression as a single reduced rational function of its
    /// atoms, or a Laurent polynomial when the division is exact. Returns the
    /// input unchanged if coefficients leave the exact range.
    pub fn rational_simplify(&self) -> Expr {
        let mut atoms = Atoms::new();
        match atoms.frac(self) {
            Some(f) => atoms.frac_expr(&f.reduce()).unwrap_or_else(|| self.clone()),
            None => self.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Workspace};

    fn ws() -> Workspace {
        let mut w = Workspace::with_coordinates(&["x"]);
        for f in ["a", "b", "c"] {
            w.declare_function(f, "x").unwrap();
        }
        w
    }

    fn p(s: &str) -> Expr {
        parse_expr(s, &ws()).unwrap()
    }

    #[test]
    fn exact_division_recovers_factor() {
        let e = p("(a^2 - b^2)/(a + b)");
        assert_eq!(e.rational_simplify(), p("a - b").rational_simplify());
    }

    #[test]
    fn nested_quotients_collapse() {
        let e = p("(a*b/(a*b - a*b*((2*b + 2*a)/(-2*b - 2*a))))");
        assert_eq!(e.rational_simplify().as_rational(), Some(Rational::new(1, 2)));
    }

    #[test]
    fn fractional_exponents_are_laurent() {
        let e = p("(a^3*b^(-1/4) - a*b^(3/4))/(2*a*b^(-1/4))");
        assert_eq!(e.rational_simplify(), p("(1/2)*a^2 - (1/2)*b").rational_simplify());
    }

    #[test]
    fn irreducible_quotient_survives() {
        let e = p("1/(a + b) + 1/(a - b)");
        let s = e.rational_simplify();
        assert!(s.bare().to_string().contains("/("), "{}", s.bare());
        let mut b = crate::expr::EvalBinding::new();
        for (k, v) in [("a", 1.7), ("b", 0.3)] {
            b.set_unknown_key(k, 0, v);
        }
        assert!((s.eval(&b).unwrap() - e.eval(&b).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn determinant_of_symbolic_matrix() {
        let mut atoms = Atoms::new();
        let mut f = |s: &str| atoms.frac(&p(s)).unwrap().num;
        let m = vec![
            vec![f("a"), f("b"), f("0")],
            vec![f("c"), f("a"), f("b")],
            vec![f("0"), f("c"), f("a")],
        ];
        let det = bareiss_det(m).unwrap();
        let expected = f("a^3 - 2*a*b*c");
        assert_eq!(det, expected);
    }

    #[test]
    fn monomial_order_is_multiplicative() {
        let m1 = Mono(vec![(0, Rational::new(1, 2))]);
        let m2 = Mono(vec![(1, Rational::from_integer(3))]);
        let k = Mono(vec![(0, Rational::from_integer(-1)), (2, Rational::from_integer(1))]);
        assert_eq!(m1.cmp(&m2), m1.mul(&k).cmp(&m2.mul(&k)));
        assert!(m1 > m2);
    }
}
