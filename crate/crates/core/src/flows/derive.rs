use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::{FlowError, FlowSystem};
use crate::exterior::Form;
use crate::expr::zero::{Domain, ZeroTest};
use crate::expr::poly::{bareiss_det, Atoms, Frac, Poly};
use crate::expr::{EvalBinding, Expr, Rational, Unknown};
use crate::frames::{AnsatzFrame, BlockKind};
use crate::structures::{ReferenceSystem, StructureKind};
use crate::torsion::{symbolic_torsion, torsion_names};

/// Block scales tried per su2 block, in scan order.
pub const LAMBDA_SCAN: [(i64, i64); 6] = [(1, 1), (-1, 1), (1, 2), (-1, 2), (2, 1), (-2, 1)];

const CONSISTENCY_TOL: f64 = 1e-8;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaChoice {
    Auto,
    Fixed(Vec<Rational>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaSelection {
    /// Supplied by the caller.
    Fixed,
    /// Only one scale in the scan set closed the system.
    Unique,
    /// Several closed it; the one reproducing most reference equations won.
    ReferenceMatch,
    /// Several closed it and no reference was available.
    FirstConsistent,
}

impl LambdaSelection {
    pub fn name(self) -> &'static str {
        match self {
            LambdaSelection::Fixed => "fixed",
            LambdaSelection::Unique => "unique",
            LambdaSelection::ReferenceMatch => "reference-match",
            LambdaSelection::FirstConsistent => "first-consistent",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquationMatch {
    pub unknown: String,
    pub matches: bool,
}

#[derive(Debug, Clone)]
pub struct Derivation {
    pub candidates: Vec<Vec<Rational>>,
    pub selection: LambdaSelection,
    pub reference: Vec<EquationMatch>,
    pub display: Vec<Expr>,
    /// Extra base coordinates the right-hand sides were certified independent of.
    pub specialised: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct DeriveOptions {
    pub lambda: LambdaChoice,
    pub seed: u64,
    /// Certification of leftovers and of coordinate independence.
    pub zero: ZeroTest,
    pub reference: Option<ReferenceSystem>,
    /// Relative tolerance for comparing against reference equations.
    pub reference_tol: f64,
}

impl Default for DeriveOptions {
    fn default() -> Self {
        DeriveOptions {
            lambda: LambdaChoice::Auto,
            seed: 42,
            zero: ZeroTest::default(),
            reference: None,
            reference_tol: 1e-10,
        }
    }
}

/// Every combination of scan values over `blocks` su2 blocks, first block outermost.
pub fn lambda_scan(blocks: usize) -> Vec<Vec<Rational>> {
    let values: Vec<Rational> = LAMBDA_SCAN.iter().map(|&(n, d)| Rational::new(n, d)).collect();
    let mut out = vec![Vec::new()];
    for _ in 0..blocks {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                values.iter().map(move |v| {
                    let mut p = prefix.clone();
                    p.push(*v);
                    p
                })
            })
            .collect();
    }
    out
}

fn fmt_lambdas(l: &[Rational]) -> String {
    let parts: Vec<String> = l.iter().map(|r| r.to_string()).collect();
    format!("({})", parts.join(", "))
}

/// Torsion coefficients of a frame at fixed block scales.
struct Coefficients {
    frame: AnsatzFrame,
    labels: Vec<String>,
    exprs: Vec<Expr>,
    derivs: Vec<Unknown>,
}

fn coefficients(frame: &AnsatzFrame, kind: StructureKind, variable: &str) -> Result<Coefficients, FlowError> {
    let forms = symbolic_torsion(frame, kind)?;
    let names = frame.coframe().generator_names();
    let mut labels = Vec::new();
    let mut exprs = Vec::new();
    for (name, form) in torsion_names(kind).iter().zip(&forms) {
        push_terms(name, form, names, &mut labels, &mut exprs);
    }
    let derivs = frame.unknowns().iter().map(|u| Unknown::new(u, variable, 1)).collect();
    for e in &exprs {
        if e.unknowns().iter().any(|u| u.order > 1) {
            return Err(FlowError::NonLinear(e.bare().to_string()));
        }
    }
    Ok(Coefficients { frame: frame.clone(), labels, exprs, derivs })
}

fn push_terms(name: &str, form: &Form<Expr>, gens: &[String], labels: &mut Vec<String>, exprs: &mut Vec<Expr>) {
    for (b, c) in form.terms() {
        let g: Vec<&str> = b.indices().map(|i| gens[i - 1].as_str()).collect();
        labels.push(format!("{name}[{}]", g.join(" ")));
        exprs.push(c.clone());
    }
}

enum NumericVerdict {
    Consistent,
    RankDeficient(Vec<String>),
    Inconsistent(Vec<String>),
}

/// Builds `A·u' = b` numerically (exact, since the coefficients are affine in
/// the derivatives) and checks full column rank and solvability.
fn numeric_check(c: &Coefficients, points: &[EvalBinding]) -> Result<NumericVerdict, FlowError> {
    let k = c.derivs.len();
    let m = c.exprs.len();
    let mut used = 0;
    for p in points {
        let eval_all = |vals: &[f64]| -> Option<Vec<f64>> {
            let mut b = p.clone();
            for (d, v) in c.derivs.iter().zip(vals) {
                b.set_unknown(d, *v);
            }
            c.exprs.iter().map(|e| e.eval(&b).ok()).collect()
        };
        let Some(c0) = eval_all(&vec![0.0; k]) else { continue };
        let mut a = DMatrix::zeros(m, k);
        let mut ok = true;
        for j in 0..k {
            let mut unit = vec![0.0; k];
            unit[j] = 1.0;
            match eval_all(&unit) {
                Some(cj) => {
                    for i in 0..m {
                        a[(i, j)] = cj[i] - c0[i];
                    }
                }
                None => ok = false,
            }
        }
        if !ok {
            continue;
        }
        used += 1;
        let rhs = DVector::from_iterator(m, c0.iter().map(|v| -v));
        if k == 0 {
            let bad: Vec<String> = (0..m)
                .filter(|&i| c0[i].abs() > CONSISTENCY_TOL * (1.0 + c0[i].abs()))
                .map(|i| c.labels[i].clone())
                .collect();
            if !bad.is_empty() {
                return Ok(NumericVerdict::Inconsistent(bad));
            }
            continue;
        }
        let svd = a.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if m < k || smax == 0.0 || smin <= RANK_TOL * smax {
            let rows: Vec<String> = (0..m).filter(|&i| a.row(i).amax() > 0.0).map(|i| c.labels[i].clone()).collect();
            return Ok(NumericVerdict::RankDeficient(rows));
        }
        let x = svd.solve(&rhs, 0.0).map_err(|e| FlowError::Integration(e.to_string()))?;
        let ax = &a * &x;
        let scale = 1.0 + rhs.amax() + a.amax() * x.amax();
        let bad: Vec<String> = (0..m)
            .filter(|&i| (ax[i] - rhs[i]).abs() > CONSISTENCY_TOL * scale)
            .map(|i| c.labels[i].clone())
            .collect();
        if !bad.is_empty() {
            return Ok(NumericVerdict::Inconsistent(bad));
        }
    }
    if used == 0 {
        return Err(FlowError::Mismatch("no sample point lies in the evaluation domain".into()));
    }
    Ok(NumericVerdict::Consistent)
}

/// `C = Σ L_j u_j' + C0`.
struct Linear {
    lin: Vec<Vec<Expr>>,
    rest: Vec<Expr>,
}

fn linearise(c: &Coefficients) -> Result<Linear, FlowError> {
    let zero_map: HashMap<Unknown, Expr> = c.derivs.iter().map(|d| (d.clone(), Expr::zero())).collect();
    let mut lin = Vec::with_capacity(c.exprs.len());
    let mut rest = Vec::with_capacity(c.exprs.len());
    for (e, label) in c.exprs.iter().zip(&c.labels) {
        let row: Vec<Expr> = c.derivs.iter().map(|d| e.partial_unknown(d)).collect();
        if row.iter().any(|l| l.unknowns().iter().any(|u| u.order > 0)) {
            return Err(FlowError::NonLinear(label.clone()));
        }
        lin.push(row);
        rest.push(e.substitute(&zero_map)?);
    }
    Ok(Linear { lin, rest })
}

/// Picks `k` rows that are numerically well conditioned at the first sample
/// point by greedy Gram–Schmidt.
fn choose_rows(c: &Coefficients, lin: &Linear, points: &[EvalBinding]) -> Result<Vec<usize>, FlowError> {
    let k = c.derivs.len();
    let p0 = &points[0];
    let numeric: Vec<Vec<f64>> =
        lin.lin.iter().map(|row| row.iter().map(|e| e.eval(p0).unwrap_or(0.0)).collect()).collect();
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..k {
        let mut best = (0.0f64, usize::MAX, Vec::new());
        for (r, v) in numeric.iter().enumerate() {
            if chosen.contains(&r) {
                continue;
            }
            let mut w = v.clone();
            for q in &basis {
                let dot: f64 = w.iter().zip(q).map(|(a, b)| a * b).sum();
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= dot * qi;
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > best.0 * (1.0 + 1e-9) {
                best = (norm, r, w);
            }
        }
        if best.1 == usize::MAX || best.0 < RANK_TOL {
            return Err(FlowError::RankDeficient {
                lambdas: fmt_lambdas(&c.frame.coframe().lambdas()),
                blades: c.labels.clone(),
            });
        }
        let n = best.0;
        basis.push(best.2.iter().map(|x| x / n).collect());
        chosen.push(best.1);
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Solves a square subsystem exactly with Cramer's rule over the rational
/// functions of the coefficient atoms, cancelling common factors.
fn solve_symbolic(c: &Coefficients, lin: &Linear, points: &[EvalBinding]) -> Result<Vec<Expr>, FlowError> {
    let k = c.derivs.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    let rows = choose_rows(c, lin, points)?;
    let exact = || FlowError::Mismatch("coefficients leave the exact rational range".into());
    let mut atoms = Atoms::new();
    let mut a: Vec<Vec<Poly>> = Vec::with_capacity(k);
    let mut b: Vec<Poly> = Vec::with_capacity(k);
    for &r in &rows {
        let mut entries: Vec<Frac> = Vec::with_capacity(k + 1);
        for e in lin.lin[r].iter().chain(std::iter::once(&lin.rest[r].neg())) {
            entries.push(atoms.frac(e).ok_or_else(exact)?);
        }
        let mut dens: Vec<Poly> = Vec::new();
        for f in &entries {
            if f.den != Poly::one() && !dens.contains(&f.den) {
                dens.push(f.den.clone());
            }
        }
        let mut row: Vec<Poly> = entries
            .iter()
            .map(|f| {
                dens.iter().filter(|d| **d != f.den).fold(f.num.clone(), |acc, d| acc.mul(d))
            })
            .collect();
        b.push(row.pop().expect("rhs entry"));
        a.push(row);
    }
    let det = bareiss_det(a.clone()).ok_or_else(exact)?;
    if det.is_zero() {
        return Err(FlowError::RankDeficient {
            lambdas: fmt_lambdas(&c.frame.coframe().lambdas()),
            blades: rows.iter().map(|&r| c.labels[r].clone()).collect(),
        });
    }
    (0..k)
        .map(|j| {
            let mut m = a.clone();
            for (row, bi) in m.iter_mut().zip(&b) {
                row[j] = bi.clone();
            }
            let num = bareiss_det(m).ok_or_else(exact)?;
            let f = Frac { num, den: det.clone() }.reduce();
            atoms.frac_expr(&f).ok_or_else(exact)
        })
        .collect()
}

/// Replaces extra base coordinates the RHS provably does not depend on.
fn specialise(rhs: &mut [Expr], frame: &AnsatzFrame, variable: &str, zero: &ZeroTest) -> Result<Vec<String>, FlowError> {
    let mut done = Vec::new();
    let domain = frame.domain();
    for coord in frame.coframe().base() {
        if coord == variable || !rhs.iter().any(|r| r.contains_symbol(coord)) {
            continue;
        }
        let independent = rhs.iter().try_fold(true, |acc, r| {
            Ok::<bool, FlowError>(acc && zero.run(&r.partial_symbol(coord), domain)?.zero)
        })?;
        if !independent {
            continue;
        }
        let (lo, hi) = domain.interval(coord);
        let value = if lo <= 0.0 && 0.0 <= hi { Rational::from_integer(0) } else { Rational::new(1, 1) };
        let map: HashMap<String, Expr> = [(coord.clone(), Expr::constant(value))].into_iter().collect();
        for r in rhs.iter_mut() {
            *r = r.substitute_symbols(&map).rational_simplify();
        }
        done.push(coord.clone());
    }
    Ok(done)
}

fn certify(c: &Coefficients, rhs: &[Expr], zero: &ZeroTest) -> Result<(Vec<Expr>, bool), FlowError> {
    let map: HashMap<Unknown, Expr> = c.derivs.iter().cloned().zip(rhs.iter().cloned()).collect();
    let domain = c.frame.domain();
    let mut leftovers = Vec::new();
    let mut ok = true;
    for e in &c.exprs {
        let s = e.substitute(&map)?;
        if s.is_zero() {
            continue;
        }
        ok &= zero.run(&s, domain)?.zero;
        leftovers.push(s);
    }
    Ok((leftovers, ok))
}

fn reference_matches(
    unknowns: &[String],
    rhs: &[Expr],
    reference: &ReferenceSystem,
    domain: &Domain,
    tol: f64,
    salt: u64,
) -> Result<Vec<EquationMatch>, FlowError> {
    let test = ZeroTest::new(50, tol).salted(salt);
    reference
        .equations
        .iter()
        .map(|(u, printed)| {
            let matches = match unknowns.iter().position(|x| x == u) {
                Some(j) => test.run(&rhs[j].sub(printed), domain)?.zero,
                None => false,
            };
            Ok(EquationMatch { unknown: u.clone(), matches })
        })
        .collect()
}

struct Solved {
    coeffs: Coefficients,
    rhs: Vec<Expr>,
    specialised: Vec<String>,
    matches: Vec<EquationMatch>,
}

fn solve_at(
    c: Coefficients,
    points: &[EvalBinding],
    variable: &str,
    opts: &DeriveOptions,
) -> Result<Solved, FlowError> {
    let lin = linearise(&c)?;
    let mut rhs = solve_symbolic(&c, &lin, points)?;
    let specialised = specialise(&mut rhs, &c.frame, variable, &opts.zero)?;
    let unknowns = c.frame.unknowns();
    let matches = match &opts.reference {
        Some(r) => reference_matches(&unknowns, &rhs, r, c.frame.domain(), opts.reference_tol, opts.seed)?,
        None => Vec::new(),
    };
    Ok(Solved { coeffs: c, rhs, specialised, matches })
}

/// Derives the first-order system equivalent to the closure conditions of
/// `kind` on `frame`.
pub fn derive_flow(frame: &AnsatzFrame, kind: StructureKind, opts: &DeriveOptions) -> Result<FlowSystem, FlowError> {
    let unknowns = frame.unknowns();
    let variable = match frame.flow_coordinate() {
        Some(v) => v,
        None if unknowns.is_empty() => frame.coframe().base().first().cloned().unwrap_or_default(),
        None => return Err(FlowError::NoFlowCoordinate),
    };
    let su2 = frame.coframe().blocks().iter().filter(|b| b.kind == BlockKind::Su2).count();
    let combos = match &opts.lambda {
        LambdaChoice::Fixed(l) => vec![l.clone()],
        LambdaChoice::Auto => lambda_scan(su2),
    };
    let points = frame.sample_points(4, opts.seed, &Domain::new())?;

    let mut consistent: Vec<Coefficients> = Vec::new();
    let mut last_failure = None;
    for combo in &combos {
        let f = frame.with_lambdas(combo)?;
        let c = coefficients(&f, kind, &variable)?;
        match numeric_check(&c, &points)? {
            NumericVerdict::Consistent => consistent.push(c),
            NumericVerdict::RankDeficient(blades) => {
                last_failure = Some(FlowError::RankDeficient { lambdas: fmt_lambdas(combo), blades })
            }
            NumericVerdict::Inconsistent(blades) => {
                last_failure = Some(FlowError::Inconsistent { lambdas: fmt_lambdas(combo), blades })
            }
        }
    }
    if consistent.is_empty() {
        return Err(match (&opts.lambda, last_failure) {
            (LambdaChoice::Fixed(_), Some(e)) => e,
            _ => FlowError::NoLambda { tried: combos.len() },
        });
    }
    let candidates: Vec<Vec<Rational>> = consistent.iter().map(|c| c.frame.coframe().lambdas()).collect();

    let (selection, solved) = if matches!(opts.lambda, LambdaChoice::Fixed(_)) {
        (LambdaSelection::Fixed, solve_at(consistent.remove(0), &points, &variable, opts)?)
    } else if consistent.len() == 1 {
        (LambdaSelection::Unique, solve_at(consistent.remove(0), &points, &variable, opts)?)
    } else if opts.reference.is_some() {
        let mut best: Option<(usize, Solved)> = None;
        for c in consistent {
            let s = solve_at(c, &points, &variable, opts)?;
            let score = s.matches.iter().filter(|m| m.matches).count();
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, s));
            }
        }
        (LambdaSelection::ReferenceMatch, best.expect("non-empty").1)
    } else {
        (LambdaSelection::FirstConsistent, solve_at(consistent.remove(0), &points, &variable, opts)?)
    };

    let (leftovers, leftovers_ok) = certify(&solved.coeffs, &solved.rhs, &opts.zero)?;
    let display = match &opts.reference {
        Some(r) => unknowns
            .iter()
            .zip(&solved.rhs)
            .map(|(u, rhs)| {
                let printed = r.equations.iter().find(|(n, _)| n == u).map(|(_, e)| e);
                let matched = solved.matches.iter().any(|m| &m.unknown == u && m.matches);
                match (printed, matched) {
                    (Some(p), true) => p.clone(),
                    _ => rhs.clone(),
                }
            })
            .collect(),
        None => solved.rhs.clone(),
    };
    Ok(FlowSystem {
        variable,
        unknowns,
        rhs: solved.rhs,
        leftovers,
        leftovers_ok,
        lambdas: solved.coeffs.frame.coframe().lambdas(),
        derivation: Some(Derivation {
            candidates,
            selection,
            reference: solved.matches,
            display,
            specialised: solved.specialised,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structures::{builtin_ansatz, BuiltinParams};

    #[test]
    fn scan_covers_all_pairs() {
        let s = lambda_scan(2);
        assert_eq!(s.len(), 36);
        assert_eq!(s[0], vec![Rational::from_integer(1), Rational::from_integer(1)]);
        assert_eq!(s[1], vec![Rational::from_integer(1), Rational::from_integer(-1)]);
        assert_eq!(lambda_scan(0), vec![Vec::<Rational>::new()]);
    }

    #[test]
    fn konishi_naka_at_fixed_scale() {
        let b = builtin_ansatz("konishi_naka", &BuiltinParams::default()).unwrap();
        let opts = DeriveOptions {
            lambda: LambdaChoice::Fixed(vec![Rational::from_integer(2); 2]),
            reference: b.reference.clone(),
            ..DeriveOptions::default()
        };
        let flow = derive_flow(&b.frame, StructureKind::G2, &opts).unwrap();
        assert!(flow.leftovers_ok);
        let d = flow.derivation.unwrap();
        assert_eq!(d.selection, LambdaSelection::Fixed);
        assert!(d.reference.iter().all(|m| m.matches), "{:?}", d.reference);
    }

    #[test]
    fn inconsistent_fixed_scale_is_reported() {
        let b = builtin_ansatz("yasui_ootsuka", &BuiltinParams::default()).unwrap();
        let opts = DeriveOptions { lambda: LambdaChoice::Fixed(vec![Rational::from_integer(1); 2]), ..Default::default() };
        match derive_flow(&b.frame, StructureKind::Spin7, &opts) {
            Err(FlowError::Inconsistent { blades, .. }) => assert!(!blades.is_empty()),
            other => panic!("unexpected {other:?}"),
        }
    }
}
