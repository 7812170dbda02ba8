use std::collections::BTreeMap;
use std::fmt::Write as _;

use super::{Blade, Coefficient, ExteriorError, MAX_DIM};
use crate::expr::zero::{Domain, ZeroTest};
use crate::expr::{print_signed, Expr};

/// Sign of the volume blade `e^{1...n}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Positive,
    Negative,
}

impl Orientation {
    pub fn sign(self) -> i8 {
        match self {
            Orientation::Positive => 1,
            Orientation::Negative => -1,
        }
    }

    pub fn from_sign(s: i8) -> Self {
        if s < 0 {
            Orientation::Negative
        } else {
            Orientation::Positive
        }
    }
}

/// A homogeneous `p`-form in dimension `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Form<C> {
    dim: usize,
    degree: usize,
    terms: BTreeMap<Blade, C>,
}

impl<C: Coefficient> Form<C> {
    pub fn zero(dim: usize, degree: usize) -> Self {
        assert!(dim <= MAX_DIM && degree <= dim, "degree {degree} in dimension {dim}");
        Form { dim, degree, terms: BTreeMap::new() }
    }

    pub fn scalar(dim: usize, c: C) -> Self {
        let mut f = Form::zero(dim, 0);
        if !c.is_zero() {
            f.terms.insert(Blade::EMPTY, c);
        }
        f
    }

    /// `±e^{indices}`, the sign coming from sorting the indices.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self, ExteriorError> {
        Self::monomial(dim, indices, C::one())
    }

    pub fn monomial(dim: usize, indices: &[usize], c: C) -> Result<Self, ExteriorError> {
        if let Some(&bad) = indices.iter().find(|&&i| i == 0 || i > dim) {
            return Err(ExteriorError::IndexOutOfRange { blade: format!("{indices:?} (index {bad})"), dim });
        }
        let mut f = Form::zero(dim, indices.len());
        if let Some((s, b)) = Blade::from_indices(indices) {
            if !c.is_zero() {
                f.terms.insert(b, c.signed(s));
            }
        }
        Ok(f)
    }

    /// Linear 1-form `Σ c_i e^i` from `(index, coefficient)` pairs.
    pub fn one_form(dim: usize, coeffs: impl IntoIterator<Item = (usize, C)>) -> Result<Self, ExteriorError> {
        Form::from_terms(dim, 1, coeffs.into_iter().map(|(i, c)| (Blade::single(i), c)))
    }

    /// Collects terms, summing repeated blades.
    pub fn from_terms(
        dim: usize,
        degree: usize,
        terms: impl IntoIterator<Item = (Blade, C)>,
    ) -> Result<Self, ExteriorError> {
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for (b, c) in terms {
            if b.degree() != degree {
                return Err(ExteriorError::MixedDegree(b.to_string()));
            }
            if b.max_index() > dim {
                return Err(ExteriorError::IndexOutOfRange { blade: b.to_string(), dim });
            }
            buckets.entry(b).or_default().push(c);
        }
        Ok(Form::collect(dim, degree, buckets))
    }

    fn collect(dim: usize, degree: usize, buckets: BTreeMap<Blade, Vec<C>>) -> Self {
        let terms = buckets
            .into_iter()
            .map(|(b, cs)| (b, if cs.len() == 1 { cs.into_iter().next().unwrap() } else { C::sum(cs) }))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Form { dim, degree, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Blade, &C)> {
        self.terms.iter()
    }

    pub fn blades(&self) -> impl Iterator<Item = Blade> + '_ {
        self.terms.keys().copied()
    }

    pub fn coeff(&self, b: Blade) -> C {
        self.terms.get(&b).cloned().unwrap_or_else(C::zero)
    }

    /// Coefficient of `e^{indices}` accounting for the sorting sign.
    pub fn coeff_of(&self, indices: &[usize]) -> C {
        match Blade::from_indices(indices) {
            Some((s, b)) => self.coeff(b).signed(s),
            None => C::zero(),
        }
    }

    fn check_same(&self, other: &Self) -> Result<(), ExteriorError> {
        if self.dim != other.dim {
            return Err(ExteriorError::DimensionMismatch(self.dim, other.dim));
        }
        if self.degree != other.degree {
            return Err(ExteriorError::DegreeMismatch(self.degree, other.degree));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.check_same(other)?;
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for (b, c) in self.terms.iter().chain(other.terms.iter()) {
            buckets.entry(*b).or_default().push(c.clone());
        }
        Ok(Form::collect(self.dim, self.degree, buckets))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, ExteriorError> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        self.map(|c| c.neg())
    }

    pub fn scale(&self, s: &C) -> Self {
        if s.is_zero() {
            return Form::zero(self.dim, self.degree);
        }
        self.map(|c| s.mul(c))
    }

    /// Coefficient-wise scaled sum of forms sharing dimension and degree.
    pub fn linear_combine(terms: &[(C, Form<C>)]) -> Result<Self, ExteriorError> {
        let Some((_, first)) = terms.first() else {
            return Err(ExteriorError::DegreeMismatch(0, 0));
        };
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for (s, f) in terms {
            first.check_same(f)?;
            for (b, c) in &f.terms {
                buckets.entry(*b).or_default().push(s.mul(c));
            }
        }
        Ok(Form::collect(first.dim, first.degree, buckets))
    }

    /// Sum of forms sharing dimension and degree; empty input gives the zero form.
    pub fn sum(dim: usize, degree: usize, forms: &[Form<C>]) -> Result<Self, ExteriorError> {
        let zero = Form::zero(dim, degree);
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for f in forms {
            zero.check_same(f)?;
            for (b, c) in &f.terms {
                buckets.entry(*b).or_default().push(c.clone());
            }
        }
        Ok(Form::collect(dim, degree, buckets))
    }

    /// Wedge product. Exceeding the dimension yields the zero form of degree `n`.
    pub fn wedge(&self, other: &Self) -> Result<Self, ExteriorError> {
        if self.dim != other.dim {
            return Err(ExteriorError::DimensionMismatch(self.dim, other.dim));
        }
        let degree = self.degree + other.degree;
        if degree > self.dim {
            return Ok(Form::zero(self.dim, self.dim));
        }
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for (ba, ca) in &self.terms {
            for (bb, cb) in &other.terms {
                if let Some((s, b)) = ba.wedge(*bb) {
                    buckets.entry(b).or_default().push(ca.mul(cb).signed(s));
                }
            }
        }
        Ok(Form::collect(self.dim, degree, buckets))
    }

    /// Hodge star in the orthonormal basis: `*β = s·β^c` with `β ∧ *β = ±vol`
    /// (the sign being the orientation).
    pub fn hodge_star(&self, orientation: Orientation) -> Self {
        let n = self.dim;
        let mut terms = BTreeMap::new();
        for (b, c) in &self.terms {
            let comp = b.complement(n);
            let (s, _) = b.wedge(comp).expect("complement is disjoint");
            terms.insert(comp, c.signed(s * orientation.sign()));
        }
        Form { dim: n, degree: n - self.degree, terms }
    }

    pub fn map<D: Coefficient>(&self, mut f: impl FnMut(&C) -> D) -> Form<D> {
        let terms = self
            .terms
            .iter()
            .map(|(b, c)| (*b, f(c)))
            .filter(|(_, c)| !c.is_zero())
            .collect();
        Form { dim: self.dim, degree: self.degree, terms }
    }

    pub fn try_map<D: Coefficient, E>(&self, mut f: impl FnMut(&C) -> Result<D, E>) -> Result<Form<D>, E> {
        let mut terms = BTreeMap::new();
        for (b, c) in &self.terms {
            let d = f(c)?;
            if !d.is_zero() {
                terms.insert(*b, d);
            }
        }
        Ok(Form { dim: self.dim, degree: self.degree, terms })
    }

    /// Relabels basis indices: `e^i ↦ sign_i · e^{perm_i}` (1-based `perm`).
    pub fn relabel(&self, map: &[(usize, i8)]) -> Self {
        let mut buckets: BTreeMap<Blade, Vec<C>> = BTreeMap::new();
        for (b, c) in &self.terms {
            let mut sign = 1i8;
            let targets: Vec<usize> = b
                .indices()
                .map(|i| {
                    let (t, s) = map[i - 1];
                    sign *= s;
                    t
                })
                .collect();
            if let Some((s, nb)) = Blade::from_indices(&targets) {
                buckets.entry(nb).or_default().push(c.signed(s * sign));
            }
        }
        Form::collect(self.dim, self.degree, buckets)
    }

    /// Keeps only blades satisfying `keep`.
    pub fn filter(&self, mut keep: impl FnMut(Blade) -> bool) -> Self {
        let terms = self.terms.iter().filter(|(b, _)| keep(**b)).map(|(b, c)| (*b, c.clone())).collect();
        Form { dim: self.dim, degree: self.degree, terms }
    }
}

impl Form<Expr> {
    /// Coefficient-wise randomized zero test of `self − other`.
    pub fn equals(&self, other: &Self, test: &ZeroTest, domain: &Domain) -> Result<bool, ExteriorError> {
        let diff = self.sub(other)?;
        for (_, c) in diff.terms() {
            if !test.run(c, domain)?.zero {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Canonical text: one `±coeff * e{i j ...}` line per blade.
    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0\n".to_string();
        }
        let mut out = String::new();
        for (b, c) in &self.terms {
            let _ = writeln!(out, "{} * {}", print_signed(c), b);
        }
        out
    }
}

impl Form<f64> {
    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Euclidean norm of the coefficient vector.
    pub fn norm(&self) -> f64 {
        self.terms.values().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.terms.iter().map(|(b, v)| v * other.terms.get(b).copied().unwrap_or(0.0)).sum()
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0\n".to_string();
        }
        let mut out = String::new();
        for (b, c) in &self.terms {
            let _ = writeln!(out, "{}{:e} * {}", if *c < 0.0 { "-" } else { "+" }, c.abs(), b);
        }
        out
    }
}
