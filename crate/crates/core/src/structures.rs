//! Canonical special-holonomy forms and the named metric ansätze.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::exterior::{Blade, Coefficient, Form, Orientation};
use crate::expr::zero::Domain;
use crate::expr::{parse_expr, Expr, Rational, Workspace};
use crate::frames::{AnsatzFrame, CoframeSpec, Embedding, FiberBlock, FrameError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StructureKind {
    G2,
    Spin7,
}

impl StructureKind {
    pub fn dim(self) -> usize {
        match self {
            StructureKind::G2 => 7,
            StructureKind::Spin7 => 8,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            StructureKind::G2 => "g2",
            StructureKind::Spin7 => "spin7",
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StructureKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "g2" => Ok(StructureKind::G2),
            "spin7" => Ok(StructureKind::Spin7),
            other => Err(format!("unknown structure `{other}` (expected g2 or spin7)")),
        }
    }
}

fn signed_terms<C: Coefficient>(dim: usize, spec: &str) -> Form<C> {
    let terms = spec.split_whitespace().map(|tok| {
        let (sign, digits) = match tok.strip_prefix('-') {
            Some(rest) => (-1, rest),
            None => (1, tok.trim_start_matches('+')),
        };
        let idx: Vec<usize> = digits.chars().map(|c| c.to_digit(10).unwrap() as usize).collect();
        let (s, b) = Blade::from_indices(&idx).expect("distinct indices");
        (b, C::from_int(i64::from(sign * s)))
    });
    Form::from_terms(dim, spec.split_whitespace().next().map_or(0, |t| t.trim_start_matches(['+', '-']).len()), terms)
        .expect("valid literal")
}

/// The associative 3-form in dimension 7.
pub fn g2_fundamental_form<C: Coefficient>() -> Form<C> {
    signed_terms(7, "125 -345 567 136 246 -237 147")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spin7Mode {
    /// `φ∧e⁸ + *₇φ`.
    FromG2,
    /// The fourteen signed terms of the classical Bonan listing.
    BonanLiteral,
}

pub fn spin7_form<C: Coefficient>(mode: Spin7Mode) -> Form<C> {
    match mode {
        Spin7Mode::FromG2 => {
            let phi: Form<C> = g2_fundamental_form();
            let star7 = phi.hodge_star(Orientation::Positive);
            let lift = |f: &Form<C>| {
                Form::from_terms(8, f.degree(), f.terms().map(|(b, c)| (*b, c.clone()))).expect("fits")
            };
            let e8 = Form::basis(8, &[8]).expect("fits");
            lift(&phi).wedge(&e8).and_then(|a| a.add(&lift(&star7))).expect("same degree")
        }
        Spin7Mode::BonanLiteral => signed_terms(
            8,
            "1258 3458 1368 -2468 1478 2378 -5678 -1267 -3467 1357 -2457 -1456 -2356 1234",
        ),
    }
}

/// Blades on which two ±1-forms with the same support disagree in sign.
pub fn sign_difference(a: &Form<Rational>, b: &Form<Rational>) -> Vec<(Blade, Rational, Rational)> {
    let mut blades: Vec<Blade> = a.blades().chain(b.blades()).collect();
    blades.sort();
    blades.dedup();
    blades
        .into_iter()
        .filter_map(|bl| {
            let (x, y) = (a.coeff(bl), b.coeff(bl));
            (x != y).then_some((bl, x, y))
        })
        .collect()
}

pub fn volume<C: Coefficient>(n: usize) -> Form<C> {
    Form::from_terms(n, n, [(Blade::volume(n), <C as Coefficient>::one())]).expect("fits")
}

/// `(ω, Ψ⁺, Ψ⁻)` on the fiber basis `θ¹,θ²,θ³,θ^1̂,θ^2̂,θ^3̂` (indices 1..6),
/// with `Jθ^i = θ^î`.
pub fn hermitian_forms<C: Coefficient>() -> (Form<C>, Form<C>, Form<C>) {
    let e = |i: usize| Form::<C>::basis(6, &[i]).expect("fits");
    let omega = Form::sum(6, 2, &[1, 2, 3].map(|i| e(i).wedge(&e(i + 3)).unwrap())).unwrap();
    // complex pairs (re, im); Ψ = (θ¹+iθ^1̂)(θ²+iθ^2̂)(θ³+iθ^3̂)
    let mut re = Form::scalar(6, <C as Coefficient>::one());
    let mut im = Form::zero(6, 0);
    for i in 1..=3 {
        let (a, b) = (e(i), e(i + 3));
        let nre = re.wedge(&a).unwrap().sub(&im.wedge(&b).unwrap()).unwrap();
        let nim = re.wedge(&b).unwrap().add(&im.wedge(&a).unwrap()).unwrap();
        re = nre;
        im = nim;
    }
    (omega, re, im)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StructureError {
    #[error("unknown builtin ansatz `{0}`")]
    UnknownBuiltin(String),
    #[error("bad builtin parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
}

/// A printed first-order system used as a reference for derived flows.
#[derive(Debug, Clone)]
pub struct ReferenceSystem {
    /// `(unknown, rhs)` in print order.
    pub equations: Vec<(String, Expr)>,
    /// Whether the printed system is believed faithful as a whole.
    pub trusted: bool,
}

#[derive(Debug, Clone)]
pub struct Builtin {
    pub name: &'static str,
    pub kind: StructureKind,
    pub frame: AnsatzFrame,
    pub reference: Option<ReferenceSystem>,
}

#[derive(Debug, Clone, Default)]
pub struct BuiltinParams {
    /// Scales of the su2 blocks; defaults to 1 for each.
    pub lambdas: Option<Vec<Rational>>,
    /// Base dimension for `multiply_warped` (1 or 2).
    pub base_dim: Option<usize>,
}

pub const BUILTIN_NAMES: [&str; 6] =
    ["yasui_ootsuka", "konishi_naka", "brandhuber", "six_function", "cone", "multiply_warped"];

/// Slot placement of the canonical forms on the paired `(θ^i, θ^î)` frames
/// used by every builtin.
pub fn paired_embedding(n: usize) -> Embedding {
    let mut map = vec![(1, 1), (2, 1), (5, -1), (4, 1), (3, 1), (6, 1), (7, -1)];
    if n == 8 {
        map.push((8, 1));
    }
    Embedding::new(map).expect("signed permutation")
}

struct Builder {
    ws: Workspace,
    rows: Vec<Vec<Expr>>,
}

impl Builder {
    fn new(coords: &[&str], functions: &[&str], arg: &str, n: usize) -> Self {
        let mut ws = Workspace::with_coordinates(coords);
        for f in functions {
            ws.declare_function(f, arg).expect("coordinate declared");
        }
        Builder { ws, rows: vec![vec![Expr::zero(); n]; n] }
    }

    fn p(&self, s: &str) -> Expr {
        parse_expr(s, &self.ws).unwrap_or_else(|e| panic!("builtin expression `{s}`: {e}"))
    }

    /// Row `a` (1-based) gets `text` on generator `g` (1-based).
    fn set(&mut self, a: usize, g: usize, text: &str) {
        self.rows[a - 1][g - 1] = self.p(text);
    }
}

fn su2_pair(first: &str, second: &str, lambdas: &[Rational]) -> Vec<FiberBlock> {
    vec![FiberBlock::su2(first, lambdas[0]), FiberBlock::su2(second, lambdas[1])]
}

fn reference(b: &Builder, eqs: &[(&str, &str)], trusted: bool) -> ReferenceSystem {
    ReferenceSystem { equations: eqs.iter().map(|(u, r)| (u.to_string(), b.p(r))).collect(), trusted }
}

fn positive_domain(names: &[&str]) -> Domain {
    names.iter().fold(Domain::new(), |d, n| d.with(n, 0.5, 2.0))
}

pub fn builtin_ansatz(name: &str, params: &BuiltinParams) -> Result<Builtin, StructureError> {
    let lambdas = params.lambdas.clone().unwrap_or_else(|| vec![Rational::from_integer(1), Rational::from_integer(1)]);
    if lambdas.len() != 2 && name != "multiply_warped" {
        return Err(StructureError::Parameter(format!("{name} has two su2 blocks, got {} scales", lambdas.len())));
    }
    let built = match name {
        "yasui_ootsuka" => {
            let mut b = Builder::new(&["x", "y"], &["a", "b"], "x", 8);
            for i in 1..=3 {
                b.set(i, i, "(1/2)*b^(3/4)*sech(y)");
                b.set(i + 3, i, "(1/2)*a*b^(-1/4)*(1 - tanh(y))");
                b.set(i + 3, i + 3, "a*b^(-1/4)");
            }
            b.set(7, 7, "a*b^(3/4)");
            b.set(8, 8, "b^(3/4)*sech(y)");
            let cf = CoframeSpec::new(su2_pair("theta", "thetahat", &lambdas), vec!["x".into(), "y".into()])?;
            let r = reference(&b, &[("a", "(1/2)*(a^3/b - a*b)"), ("b", "-2*a^2")], true);
            let domain = positive_domain(&["a", "b"]).with("y", -1.0, 1.0).with("x", 0.0, 1.0);
            (StructureKind::Spin7, cf, b, Some(r), domain)
        }
        "konishi_naka" => {
            let mut b = Builder::new(&["x"], &["A", "Ahat"], "x", 7);
            for i in 1..=3 {
                b.set(i, i, "A");
                b.set(i + 3, i, "-(1/2)*Ahat");
                b.set(i + 3, i + 3, "Ahat");
            }
            b.set(7, 7, "1");
            let cf = CoframeSpec::new(su2_pair("theta", "thetahat", &lambdas), vec!["x".into()])?;
            let r = reference(&b, &[("A", "Ahat/(2*A)"), ("Ahat", "1 - Ahat^2/(4*A^2)")], true);
            (StructureKind::G2, cf, b, Some(r), positive_domain(&["A", "Ahat"]).with("x", 0.0, 1.0))
        }
        "brandhuber" => {
            let mut b = Builder::new(&["r"], &["A", "B", "C", "D"], "r", 7);
            let minus = ["A", "A", "D"];
            let plus = ["B", "B", "C"];
            for i in 1..=3 {
                b.set(i, i, minus[i - 1]);
                b.set(i, i + 3, &format!("-{}", minus[i - 1]));
                b.set(i + 3, i, plus[i - 1]);
                b.set(i + 3, i + 3, plus[i - 1]);
            }
            b.set(7, 7, "1/C");
            let cf = CoframeSpec::new(su2_pair("sigma", "Sigma", &lambdas), vec!["r".into()])?;
            let r = reference(
                &b,
                &[
                    ("A", "(1/4)*((B^2 - A^2 + D^2)/(B*C*D) + 1/A)"),
                    ("B", "(1/4)*((A^2 - B^2 + D^2)/(A*C*D) - 1/B)"),
                    ("C", "(1/4)*(C/B^2 - C/A^2)"),
                    ("D", "(1/2)*((A^2 + B^2 - D^2)/(A*B*C))"),
                ],
                true,
            );
            (StructureKind::G2, cf, b, Some(r), positive_domain(&["A", "B", "C", "D"]).with("r", 0.0, 1.0))
        }
        "six_function" | "cone" => {
            let (minus, plus, t) = if name == "six_function" {
                (["a1", "a2", "a3"], ["b1", "b2", "b3"], "t")
            } else {
                (["B1", "B2", "B3"], ["A1", "A2", "A3"], "t")
            };
            let fns: Vec<&str> = minus.iter().chain(plus.iter()).copied().collect();
            let mut b = Builder::new(&[t], &fns, t, 7);
            for i in 1..=3 {
                b.set(i, i, minus[i - 1]);
                b.set(i, i + 3, &format!("-{}", minus[i - 1]));
                b.set(i + 3, i, plus[i - 1]);
                b.set(i + 3, i + 3, plus[i - 1]);
            }
            b.set(7, 7, "1");
            let cf = CoframeSpec::new(su2_pair("sigma", "Sigma", &lambdas), vec![t.into()])?;
            let r = if name == "six_function" {
                let printed = "a1^2/(4*a3*b2) + a1^2/(4*a2*b3) - a2/(4*b3) - a3/(4*b2) - b2/(4*a3) - b3/(4*a2)";
                let eqs: Vec<(&str, &str)> = fns.iter().map(|f| (*f, printed)).collect();
                Some(reference(&b, &eqs, false))
            } else {
                None
            };
            let domain = positive_domain(&fns).with(t, 1.0, 2.0);
            (StructureKind::G2, cf, b, r, domain)
        }
        "multiply_warped" => {
            let base_dim = params.base_dim.unwrap_or(1);
            let (coords, kind): (Vec<&str>, _) = match base_dim {
                1 => (vec!["x"], StructureKind::G2),
                2 => (vec!["x", "y"], StructureKind::Spin7),
                other => return Err(StructureError::Parameter(format!("multiply_warped base_dim {other}"))),
            };
            let n = 6 + base_dim;
            let mut b = Builder::new(&coords, &["f1", "f2"], "x", n);
            for i in 1..=3 {
                b.set(i, i, "f1");
                b.set(i + 3, i + 3, "f2");
            }
            for k in 7..=n {
                b.set(k, k, "1");
            }
            let lam = if lambdas.len() == 2 { lambdas.clone() } else { vec![Rational::from_integer(1); 2] };
            let cf = CoframeSpec::new(su2_pair("theta", "thetahat", &lam), coords.iter().map(|s| s.to_string()).collect())?;
            (kind, cf, b, None, positive_domain(&["f1", "f2"]).with("y", -1.0, 1.0))
        }
        other => return Err(StructureError::UnknownBuiltin(other.to_string())),
    };
    let (kind, cf, b, reference, domain) = built;
    let n = cf.dim();
    let frame = AnsatzFrame::new(cf, b.ws, b.rows)?.with_embedding(paired_embedding(n))?.with_domain(domain);
    let name = BUILTIN_NAMES.iter().copied().find(|n| *n == name).expect("matched above");
    Ok(Builtin { name, kind, frame, reference })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::zero::ZeroTest;

    fn int(f: &Form<Rational>, idx: &[usize]) -> i64 {
        let c = f.coeff_of(idx);
        assert!(c.is_integer());
        *c.numer()
    }

    #[test]
    fn g2_coefficients() {
        let phi: Form<Rational> = g2_fundamental_form();
        assert_eq!(phi.len(), 7);
        assert_eq!(int(&phi, &[1, 2, 5]), 1);
        assert_eq!(int(&phi, &[3, 4, 5]), -1);
        assert_eq!(int(&phi, &[2, 3, 7]), -1);
    }

    #[test]
    fn bonan_literal_signs() {
        let om: Form<Rational> = spin7_form(Spin7Mode::BonanLiteral);
        assert_eq!(om.len(), 14);
        assert_eq!(int(&om, &[5, 6, 7, 8]), -1);
        assert_eq!(int(&om, &[1, 2, 3, 4]), 1);
    }

    #[test]
    fn from_g2_has_fourteen_unit_terms() {
        let om: Form<Rational> = spin7_form(Spin7Mode::FromG2);
        assert_eq!(om.len(), 14);
        assert!(om.terms().all(|(_, c)| num_traits::Signed::abs(c) == Rational::from_integer(1)));
        assert_eq!(int(&om, &[1, 2, 5, 8]), 1);
    }

    #[test]
    fn hermitian_expansion() {
        let (omega, psp, psm) = hermitian_forms::<Rational>();
        let expect = |s: &str| signed_terms::<Rational>(6, s);
        assert_eq!(omega, expect("14 25 36"));
        // θ^{123} − θ^{12̂3̂} − θ^{1̂23̂} − θ^{1̂2̂3}
        let p = Form::<Rational>::basis(6, &[1, 2, 3]).unwrap();
        let plus = [[1, 5, 6], [4, 2, 6], [4, 5, 3]]
            .iter()
            .fold(p, |acc, idx| acc.sub(&Form::basis(6, idx).unwrap()).unwrap());
        assert_eq!(psp, plus);
        let minus = [[4, 2, 3], [1, 5, 3], [1, 2, 6]]
            .iter()
            .fold(Form::<Rational>::basis(6, &[4, 5, 6]).unwrap().neg(), |acc, idx| {
                acc.add(&Form::basis(6, idx).unwrap()).unwrap()
            });
        assert_eq!(psm, minus);
    }

    #[test]
    fn yasui_ootsuka_diagonal_block() {
        let b = builtin_ansatz("yasui_ootsuka", &BuiltinParams::default()).unwrap();
        let e123 = Form::<Expr>::basis(8, &[1, 2, 3]).unwrap();
        let pushed = b.frame.pushdown(&e123).unwrap();
        let ws = b.frame.workspace();
        let a3 = parse_expr("((1/2)*b^(3/4)*sech(y))^3", ws).unwrap();
        let expected = Form::monomial(8, &[1, 2, 3], a3).unwrap();
        let d = b.frame.domain().clone();
        assert!(pushed.equals(&expected, &ZeroTest::default(), &d).unwrap());
    }

    #[test]
    fn unknown_builtin() {
        assert!(matches!(
            builtin_ansatz("taub_nut", &BuiltinParams::default()),
            Err(StructureError::UnknownBuiltin(_))
        ));
    }

    #[test]
    fn every_builtin_builds() {
        for name in BUILTIN_NAMES {
            let b = builtin_ansatz(name, &BuiltinParams::default()).unwrap();
            assert_eq!(b.frame.dim(), b.kind.dim(), "{name}");
            assert_eq!(b.frame.check_invertible(1).unwrap(), 0, "{name}");
        }
    }
}
