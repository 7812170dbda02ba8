//! Torsion forms of G2 and Spin(7) structures and Fernandez-type classes.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::exterior::{Coefficient, ExteriorError, Form, Orientation};
use crate::expr::{EvalBinding, Expr, ExprError, Rational};
use crate::flows::FlowSystem;
use crate::frames::{exterior_derivative, pullup, AnsatzFrame, FrameError};
use crate::structures::{g2_fundamental_form, spin7_form, Spin7Mode, StructureKind};

pub const DEFAULT_CLASS_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TorsionError {
    #[error("{kind} structure needs dimension {expected}, frame has {found}")]
    Dimension { kind: StructureKind, expected: usize, found: usize },
    #[error("expected degrees ({0}, {1})")]
    Degree(usize, usize),
    #[error("closure does not match the frame: {0}")]
    Closure(String),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Exterior(#[from] ExteriorError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Canonical structure forms: `[φ, *φ]` or `[Ω]`.
pub fn canonical_forms(kind: StructureKind) -> Vec<(&'static str, Form<Rational>)> {
    match kind {
        StructureKind::G2 => {
            let phi: Form<Rational> = g2_fundamental_form();
            let psi = phi.hodge_star(Orientation::Positive);
            vec![("phi", phi), ("star_phi", psi)]
        }
        StructureKind::Spin7 => vec![("Omega", spin7_form(Spin7Mode::FromG2))],
    }
}

/// Names of the torsion forms, aligned with [`canonical_forms`].
pub fn torsion_names(kind: StructureKind) -> &'static [&'static str] {
    match kind {
        StructureKind::G2 => &["dphi", "dstar_phi"],
        StructureKind::Spin7 => &["dOmega"],
    }
}

fn check_dim(frame: &AnsatzFrame, kind: StructureKind) -> Result<(), TorsionError> {
    if frame.dim() != kind.dim() {
        return Err(TorsionError::Dimension { kind, expected: kind.dim(), found: frame.dim() });
    }
    Ok(())
}

/// Exterior derivatives of the structure forms in the generator basis.
pub fn symbolic_torsion(frame: &AnsatzFrame, kind: StructureKind) -> Result<Vec<Form<Expr>>, TorsionError> {
    check_dim(frame, kind)?;
    canonical_forms(kind)
        .into_iter()
        .map(|(_, f)| {
            let pushed = frame.pushdown_structure(&f.map(|r| Expr::constant(*r)))?;
            Ok(exterior_derivative(&pushed, frame.coframe())?)
        })
        .collect()
}

/// Evaluates a generator-basis form and expresses it in canonical slots.
pub fn canonical_sample(
    form: &Form<Expr>,
    frame: &AnsatzFrame,
    binding: &EvalBinding,
    minv: &DMatrix<f64>,
) -> Result<Form<f64>, TorsionError> {
    let numeric = form.try_map(|c| c.eval(binding))?;
    Ok(frame.embedding().pull(&pullup(&numeric, minv)))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ResidualStats {
    /// Largest absolute coefficient over all samples.
    pub max: f64,
    /// Mean over samples of the per-sample largest coefficient.
    pub mean: f64,
    pub points: usize,
}

impl ResidualStats {
    pub fn from_maxima(maxima: &[f64]) -> Self {
        if maxima.is_empty() {
            return ResidualStats::default();
        }
        let max = maxima.iter().copied().fold(0.0, f64::max);
        let mean = maxima.iter().sum::<f64>() / maxima.len() as f64;
        ResidualStats { max, mean, points: maxima.len() }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleOptions {
    pub points: usize,
    pub seed: u64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions { points: 100, seed: 42 }
    }
}

#[derive(Debug, Clone)]
pub struct TorsionReport {
    pub kind: StructureKind,
    pub names: Vec<String>,
    /// Generator-basis torsion forms with derivatives left free.
    pub symbolic: Vec<Form<Expr>>,
    /// The same after substituting the closure, if one was given.
    pub closed: Option<Vec<Form<Expr>>>,
    pub residual_open: Vec<ResidualStats>,
    pub residual_closed: Option<Vec<ResidualStats>>,
    /// Canonical-slot numeric torsion forms per sample point (closed if available).
    pub samples: Vec<Vec<Form<f64>>>,
    pub lambdas: Vec<Rational>,
    pub options: SampleOptions,
}

impl TorsionReport {
    /// Report built from numeric canonical-slot forms only.
    pub fn from_e_basis(kind: StructureKind, samples: Vec<Vec<Form<f64>>>) -> Self {
        let names: Vec<String> = torsion_names(kind).iter().map(|s| s.to_string()).collect();
        let residual_open = (0..names.len())
            .map(|k| ResidualStats::from_maxima(&samples.iter().map(|s| s[k].max_abs()).collect::<Vec<_>>()))
            .collect();
        TorsionReport {
            kind,
            names,
            symbolic: Vec::new(),
            closed: None,
            residual_open,
            residual_closed: None,
            options: points_hint(samples.len()),
            samples,
            lambdas: Vec::new(),
        }
    }

    /// Residuals used for verdicts: closed when available.
    pub fn residuals(&self) -> &[ResidualStats] {
        self.residual_closed.as_deref().unwrap_or(&self.residual_open)
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals().iter().map(|r| r.max).fold(0.0, f64::max)
    }
}

fn points_hint(n: usize) -> SampleOptions {
    SampleOptions { points: n, seed: 0 }
}

/// Binds every first derivative of the frame's unknowns to a random value.
fn bind_free_derivatives(frame: &AnsatzFrame, b: &mut EvalBinding, rng: &mut ChaCha8Rng) {
    for u in frame.unknowns() {
        let (lo, hi) = frame.domain().interval(&format!("{u}'"));
        b.set_unknown_key(&u, 1, rng.gen_range(lo..=hi));
    }
}

/// Computes the torsion forms of `kind` on `frame`; with a closure the
/// derivative instances are replaced by the flow right-hand sides.
pub fn torsion_forms(
    frame: &AnsatzFrame,
    kind: StructureKind,
    closure: Option<&FlowSystem>,
    options: SampleOptions,
) -> Result<TorsionReport, TorsionError> {
    check_dim(frame, kind)?;
    let frame = match closure {
        Some(flow) if !flow.lambdas.is_empty() => frame.with_lambdas(&flow.lambdas)?,
        _ => frame.clone(),
    };
    let symbolic = symbolic_torsion(&frame, kind)?;
    let closed = match closure {
        Some(flow) => {
            let map = flow.substitution(&frame)?;
            Some(
                symbolic
                    .iter()
                    .map(|f| f.try_map(|c| c.substitute(&map)))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        }
        None => None,
    };

    let points = frame.sample_points(options.points, options.seed, &crate::expr::zero::Domain::new())?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(1));
    let mut open_max = vec![Vec::new(); symbolic.len()];
    let mut closed_max = vec![Vec::new(); symbolic.len()];
    let mut samples = Vec::with_capacity(points.len());
    for mut b in points {
        bind_free_derivatives(&frame, &mut b, &mut rng);
        let minv = frame.matrix_at(&b)?.try_inverse().ok_or(FrameError::Singular)?;
        let mut row = Vec::new();
        for (k, f) in symbolic.iter().enumerate() {
            let s = canonical_sample(f, &frame, &b, &minv)?;
            open_max[k].push(s.max_abs());
            if closed.is_none() {
                row.push(s);
            }
        }
        if let Some(cl) = &closed {
            for (k, f) in cl.iter().enumerate() {
                let s = canonical_sample(f, &frame, &b, &minv)?;
                closed_max[k].push(s.max_abs());
                row.push(s);
            }
        }
        samples.push(row);
    }
    let stats = |v: &Vec<Vec<f64>>| v.iter().map(|m| ResidualStats::from_maxima(m)).collect::<Vec<_>>();
    Ok(TorsionReport {
        kind,
        names: torsion_names(kind).iter().map(|s| s.to_string()).collect(),
        symbolic,
        residual_open: stats(&open_max),
        residual_closed: closed.as_ref().map(|_| stats(&closed_max)),
        closed,
        samples,
        lambdas: frame.coframe().lambdas(),
        options,
    })
}

/// Lee form `Θ = −(1/7)·*(*dΩ ∧ Ω)`.
pub fn lee_form_spin7<C: Coefficient>(omega: &Form<C>, domega: &Form<C>) -> Result<Form<C>, TorsionError> {
    if omega.dim() != 8 || domega.dim() != 8 {
        return Err(ExteriorError::DimensionMismatch(omega.dim().max(domega.dim()), 8).into());
    }
    if omega.degree() != 4 || domega.degree() != 5 {
        return Err(TorsionError::Degree(4, 5));
    }
    let inner = domega.hodge_star(Orientation::Positive).wedge(omega)?;
    let star = inner.hodge_star(Orientation::Positive);
    Ok(star.scale(&C::from_rational(Rational::new(-1, 7))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassVerdict {
    pub member: bool,
    pub residual: f64,
}

/// Least-squares fit of `dφ = λ_w·*φ` across samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearlyParallelFit {
    pub lambda_w: f64,
    /// Standard deviation of the pointwise fits.
    pub spread: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct ClassificationResult {
    pub kind: StructureKind,
    pub classes: BTreeMap<String, ClassVerdict>,
    /// Lee form per sample point (canonical slots).
    pub lee_samples: Vec<Form<f64>>,
    pub nearly_parallel: Option<NearlyParallelFit>,
    pub tol: f64,
}

impl ClassificationResult {
    pub fn member(&self, class: &str) -> bool {
        self.classes.get(class).is_some_and(|v| v.member)
    }

    /// Lee form at the first sample point.
    pub fn lee_form(&self) -> Option<&Form<f64>> {
        self.lee_samples.first()
    }
}

fn verdict(residual: f64, tol: f64) -> ClassVerdict {
    ClassVerdict { member: residual <= tol, residual }
}

fn max_over<T>(items: &[T], f: impl Fn(&T) -> f64) -> f64 {
    items.iter().map(f).fold(0.0, f64::max)
}

pub fn classify_spin7(report: &TorsionReport, tol: f64) -> Result<ClassificationResult, TorsionError> {
    if report.kind != StructureKind::Spin7 {
        return Err(TorsionError::Dimension { kind: StructureKind::Spin7, expected: 8, found: 7 });
    }
    let omega: Form<f64> = spin7_form(Spin7Mode::FromG2);
    let mut lee = Vec::with_capacity(report.samples.len());
    let (mut w0, mut w1, mut w2) = (0.0f64, 0.0f64, 0.0f64);
    for s in &report.samples {
        let d = &s[0];
        let theta = lee_form_spin7(&omega, d)?;
        let conformal = theta.wedge(&omega)?;
        w0 = w0.max(d.max_abs());
        w1 = w1.max(theta.max_abs());
        w2 = w2.max(d.sub(&conformal)?.max_abs());
        lee.push(theta);
    }
    let mut classes = BTreeMap::new();
    classes.insert("W0".to_string(), verdict(w0, tol));
    classes.insert("W1".to_string(), verdict(w1, tol));
    classes.insert("W2".to_string(), verdict(w2, tol));
    // W4 = W1 ⊕ W2 holds for every structure; the residual records the size
    // of the part outside the Lee direction.
    classes.insert("W4".to_string(), ClassVerdict { member: true, residual: w2 });
    Ok(ClassificationResult { kind: StructureKind::Spin7, classes, lee_samples: lee, nearly_parallel: None, tol })
}

/// Solves `target ≈ Σ θ_i (c·e^i∧base)` for θ by least squares.
fn lee_least_squares(target: &Form<f64>, base: &Form<f64>, c: f64) -> Result<(Form<f64>, f64), TorsionError> {
    let n = base.dim();
    let deg = base.degree() + 1;
    let blades = crate::exterior::Blade::all(n, deg);
    let mut a = DMatrix::zeros(blades.len(), n);
    for i in 1..=n {
        let col = Form::<f64>::basis(n, &[i])?.wedge(base)?;
        for (r, b) in blades.iter().enumerate() {
            a[(r, i - 1)] = c * col.coeff(*b);
        }
    }
    let rhs = DVector::from_iterator(blades.len(), blades.iter().map(|b| target.coeff(*b)));
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&rhs, 1e-14).map_err(|e| TorsionError::Closure(e.to_string()))?;
    let resid = (&a * &x - rhs).amax();
    let theta = Form::one_form(n, x.iter().enumerate().map(|(i, v)| (i + 1, *v)))?;
    Ok((theta, resid))
}

pub fn classify_g2(report: &TorsionReport, tol: f64) -> Result<ClassificationResult, TorsionError> {
    if report.kind != StructureKind::G2 {
        return Err(TorsionError::Dimension { kind: StructureKind::G2, expected: 7, found: 8 });
    }
    let phi: Form<f64> = g2_fundamental_form();
    let psi = phi.hodge_star(Orientation::Positive);
    let s = &report.samples;
    let dphi = max_over(s, |x| x[0].max_abs());
    let dpsi = max_over(s, |x| x[1].max_abs());
    // |τ₀| from dφ∧φ = 7τ₀·vol; bounded by the largest coefficient of dφ.
    let mut tau0 = 0.0f64;
    let mut lcp = 0.0f64;
    let mut lee = Vec::with_capacity(s.len());
    let mut fits = Vec::with_capacity(s.len());
    let mut np_resid = 0.0f64;
    let psi_norm2 = psi.dot(&psi);
    for x in s {
        tau0 = tau0.max(x[0].wedge(&phi)?.max_abs() / 7.0);
        let (theta, r1) = lee_least_squares(&x[0], &phi, 0.75)?;
        let r2 = x[1].sub(&theta.wedge(&psi)?)?.max_abs();
        lcp = lcp.max(r1.max(r2));
        lee.push(theta);
        let lw = x[0].dot(&psi) / psi_norm2;
        np_resid = np_resid.max(x[0].sub(&psi.scale(&lw))?.max_abs());
        fits.push(lw);
    }
    let mut classes = BTreeMap::new();
    classes.insert("parallel".to_string(), verdict(dphi.max(dpsi), tol));
    classes.insert("calibrated".to_string(), verdict(dphi, tol));
    classes.insert("cocalibrated".to_string(), verdict(dpsi, tol));
    classes.insert("balanced".to_string(), verdict(dpsi.max(tau0), tol));
    classes.insert("locally_conformally_parallel".to_string(), verdict(lcp, tol));
    let nearly_parallel = (!fits.is_empty()).then(|| {
        let mean = fits.iter().sum::<f64>() / fits.len() as f64;
        let var = fits.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / fits.len() as f64;
        NearlyParallelFit { lambda_w: mean, spread: var.sqrt(), residual: np_resid }
    });
    if let Some(fit) = nearly_parallel {
        let constant = fit.spread <= tol * fit.lambda_w.abs().max(1.0);
        classes.insert(
            "nearly_parallel".to_string(),
            ClassVerdict { member: fit.residual <= tol && constant && fit.lambda_w.abs() > tol, residual: fit.residual },
        );
    }
    Ok(ClassificationResult { kind: StructureKind::G2, classes, lee_samples: lee, nearly_parallel, tol })
}

pub fn classify(report: &TorsionReport, tol: f64) -> Result<ClassificationResult, TorsionError> {
    match report.kind {
        StructureKind::G2 => classify_g2(report, tol),
        StructureKind::Spin7 => classify_spin7(report, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exterior::Blade;
    use crate::frames::{CoframeSpec, FiberBlock};
    use crate::expr::Workspace;

    fn flat(n: usize) -> AnsatzFrame {
        let cf = CoframeSpec::new(vec![FiberBlock::abelian("t", n)], vec![]).unwrap();
        let rows = (0..n).map(|i| (0..n).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
        AnsatzFrame::new(cf, Workspace::new(), rows).unwrap()
    }

    #[test]
    fn flat_frames_are_torsion_free() {
        let r = torsion_forms(&flat(7), StructureKind::G2, None, SampleOptions { points: 5, seed: 1 }).unwrap();
        assert!(r.symbolic.iter().all(|f| f.is_empty()));
        let c = classify_g2(&r, DEFAULT_CLASS_TOL).unwrap();
        assert!(c.classes.values().filter(|_| true).all(|v| v.member || v.residual == 0.0));
        assert!(c.member("parallel") && c.member("balanced") && c.member("locally_conformally_parallel"));
        assert_eq!(c.nearly_parallel.unwrap().lambda_w, 0.0);
        let r8 = torsion_forms(&flat(8), StructureKind::Spin7, None, SampleOptions { points: 3, seed: 1 }).unwrap();
        let c8 = classify_spin7(&r8, DEFAULT_CLASS_TOL).unwrap();
        assert!(["W0", "W1", "W2", "W4"].iter().all(|k| c8.member(k)));
    }

    #[test]
    fn dimension_is_checked() {
        assert!(matches!(
            torsion_forms(&flat(7), StructureKind::Spin7, None, SampleOptions::default()),
            Err(TorsionError::Dimension { .. })
        ));
    }

    #[test]
    fn lee_identity_on_basis() {
        let omega: Form<Rational> = spin7_form(Spin7Mode::FromG2);
        for a in 1..=8 {
            let e = Form::<Rational>::basis(8, &[a]).unwrap();
            let theta = lee_form_spin7(&omega, &e.wedge(&omega).unwrap()).unwrap();
            assert_eq!(theta, e, "alpha = {a}");
        }
    }

    #[test]
    fn planted_spin7_torsion() {
        let omega: Form<f64> = spin7_form(Spin7Mode::FromG2);
        let samples = [0.3, -1.7, 2.2]
            .iter()
            .map(|x| vec![Form::<f64>::monomial(8, &[7], *x).unwrap().wedge(&omega).unwrap()])
            .collect();
        let r = TorsionReport::from_e_basis(StructureKind::Spin7, samples);
        let c = classify_spin7(&r, DEFAULT_CLASS_TOL).unwrap();
        assert!(c.member("W2") && !c.member("W0") && !c.member("W1"));
        assert!((c.lee_samples[1].coeff(Blade::single(7)) + 1.7).abs() < 1e-14);
    }

    #[test]
    fn planted_g2_conformal() {
        let phi: Form<f64> = g2_fundamental_form();
        let psi = phi.hodge_star(Orientation::Positive);
        let theta = Form::one_form(7, [(7, 0.4), (2, -1.1)]).unwrap();
        let s = vec![vec![theta.wedge(&phi).unwrap().scale(&0.75), theta.wedge(&psi).unwrap()]];
        let c = classify_g2(&TorsionReport::from_e_basis(StructureKind::G2, s), DEFAULT_CLASS_TOL).unwrap();
        assert!(c.member("locally_conformally_parallel"));
        assert!(!c.member("calibrated") && !c.member("cocalibrated"));
        assert!(c.lee_samples[0].sub(&theta).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn nearly_parallel_fit() {
        let phi: Form<f64> = g2_fundamental_form();
        let psi = phi.hodge_star(Orientation::Positive);
        let s = (0..4).map(|_| vec![psi.scale(&2.5), Form::zero(7, 5)]).collect();
        let c = classify_g2(&TorsionReport::from_e_basis(StructureKind::G2, s), DEFAULT_CLASS_TOL).unwrap();
        let fit = c.nearly_parallel.unwrap();
        assert!((fit.lambda_w - 2.5).abs() < 1e-14 && fit.spread < 1e-14);
        assert!(c.member("nearly_parallel") && c.member("cocalibrated"));
    }
}
