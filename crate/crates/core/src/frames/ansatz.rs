use std::collections::BTreeSet;
use std::fmt;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CoframeSpec, FrameError};
use crate::exterior::{Blade, Coefficient, Form};
use crate::expr::zero::Domain;
use crate::expr::{EvalBinding, Expr, Node, SymbolKind, Workspace};

/// Signed relabeling of the canonical structure-form slots onto frame
/// elements: slot `s` is placed on `sign · e^{target}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Embedding(Vec<(usize, i8)>);

impl Embedding {
    pub fn identity(n: usize) -> Self {
        Embedding((1..=n).map(|i| (i, 1)).collect())
    }

    pub fn new(map: Vec<(usize, i8)>) -> Result<Self, FrameError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &(t, s) in &map {
            if t == 0 || t > n || seen[t - 1] || (s != 1 && s != -1) {
                return Err(FrameError::Invalid(format!("embedding is not a signed permutation of 1..{n}")));
            }
            seen[t - 1] = true;
        }
        Ok(Embedding(map))
    }

    /// Parses a list like `1 2 -5 4 3 6 -7 8`.
    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let mut map = Vec::new();
        for tok in text.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| FrameError::Invalid(format!("bad embedding entry `{tok}`")))?;
            if v == 0 {
                return Err(FrameError::Invalid("embedding entries are 1-based".into()));
            }
            map.push((v.unsigned_abs() as usize, if v < 0 { -1 } else { 1 }));
        }
        Embedding::new(map)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &(t, s))| t == i + 1 && s == 1)
    }

    pub fn slot(&self, s: usize) -> (usize, i8) {
        self.0[s - 1]
    }

    /// Canonical-slot form to frame basis.
    pub fn apply<C: Coefficient>(&self, form: &Form<C>) -> Form<C> {
        form.relabel(&self.0)
    }

    /// Frame-basis form back to canonical slots.
    pub fn pull<C: Coefficient>(&self, form: &Form<C>) -> Form<C> {
        let mut inv = vec![(0, 1i8); self.0.len()];
        for (s, &(t, sign)) in self.0.iter().enumerate() {
            inv[t - 1] = (s + 1, sign);
        }
        form.relabel(&inv)
    }
}

impl fmt::Display for Embedding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|&(t, s)| format!("{}", t as i64 * i64::from(s))).collect();
        f.write_str(&parts.join(" "))
    }
}

/// Orthonormal frame `e^A = Σ_g M[A][g] · gen^g` over a coframe.
#[derive(Debug, Clone)]
pub struct AnsatzFrame {
    coframe: CoframeSpec,
    workspace: Workspace,
    rows: Vec<Vec<Expr>>,
    embedding: Embedding,
    domain: Domain,
}

impl AnsatzFrame {
    pub fn new(coframe: CoframeSpec, workspace: Workspace, rows: Vec<Vec<Expr>>) -> Result<Self, FrameError> {
        let n = coframe.dim();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(FrameError::Invalid(format!("coefficient matrix must be {n}x{n}")));
        }
        for (a, row) in rows.iter().enumerate() {
            for c in row {
                for s in c.symbols() {
                    if coframe.generator_index(&s).is_some() {
                        return Err(FrameError::FiberSymbol { row: a + 1, symbol: s.to_string() });
                    }
                    if workspace.symbol(&s).is_none() {
                        return Err(FrameError::Invalid(format!("undeclared symbol `{s}` in row {}", a + 1)));
                    }
                }
                if let Some(u) = c.unknowns().into_iter().find(|u| u.order > 0) {
                    return Err(FrameError::Invalid(format!("derivative {u} in frame coefficient")));
                }
            }
        }
        Ok(AnsatzFrame { embedding: Embedding::identity(n), coframe, workspace, rows, domain: Domain::new() })
    }

    pub fn with_embedding(mut self, e: Embedding) -> Result<Self, FrameError> {
        if e.len() != self.dim() {
            return Err(FrameError::Invalid(format!("embedding has {} slots, frame has {}", e.len(), self.dim())));
        }
        self.embedding = e;
        Ok(self)
    }

    pub fn with_domain(mut self, d: Domain) -> Self {
        self.domain = d;
        self
    }

    /// Same frame over a coframe with new su2 scales.
    pub fn with_lambdas(&self, lambdas: &[crate::expr::Rational]) -> Result<Self, FrameError> {
        let mut out = self.clone();
        out.coframe = self.coframe.with_lambdas(lambdas)?;
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.coframe.dim()
    }

    pub fn coframe(&self) -> &CoframeSpec {
        &self.coframe
    }

    pub fn workspace(&self) -> &Workspace {
        &self.workspace
    }

    pub fn rows(&self) -> &[Vec<Expr>] {
        &self.rows
    }

    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Unknown profile names appearing in the coefficients, sorted.
    pub fn unknowns(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for row in &self.rows {
            for c in row {
                for u in c.unknowns() {
                    set.insert(u.name.to_string());
                }
            }
        }
        set.into_iter().collect()
    }

    /// The single coordinate all unknowns depend on, if there is one.
    pub fn flow_coordinate(&self) -> Option<String> {
        let mut args = BTreeSet::new();
        for row in &self.rows {
            for c in row {
                for u in c.unknowns() {
                    args.insert(u.arg.to_string());
                }
            }
        }
        if args.len() == 1 {
            args.into_iter().next()
        } else {
            None
        }
    }

    /// Symbols occurring in the coefficients (coordinates and parameters).
    pub fn coefficient_symbols(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for row in &self.rows {
            for c in row {
                set.extend(c.symbols().into_iter().map(|s| s.to_string()));
            }
        }
        set.into_iter().collect()
    }

    /// `e^A` (1-based) as a generator-basis 1-form.
    pub fn row_form(&self, a: usize) -> Form<Expr> {
        let n = self.dim();
        let terms = self.rows[a - 1]
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(g, c)| (Blade::single(g + 1), c.clone()));
        Form::from_terms(n, 1, terms).expect("row fits the coframe")
    }

    /// Substitutes each `e^A` by its generator expansion.
    pub fn pushdown(&self, form: &Form<Expr>) -> Result<Form<Expr>, FrameError> {
        let n = self.dim();
        if form.dim() != n {
            return Err(FrameError::Exterior(crate::exterior::ExteriorError::DimensionMismatch(form.dim(), n)));
        }
        let rows: Vec<Form<Expr>> = (1..=n).map(|a| self.row_form(a)).collect();
        let mut parts = Vec::with_capacity(form.len());
        for (blade, c) in form.terms() {
            let mut acc = Form::scalar(n, c.clone());
            for i in blade.indices() {
                acc = acc.wedge(&rows[i - 1])?;
            }
            parts.push(acc);
        }
        Ok(Form::sum(n, form.degree(), &parts)?)
    }

    /// Places a canonical structure form through the embedding, then pushes down.
    pub fn pushdown_structure(&self, form: &Form<Expr>) -> Result<Form<Expr>, FrameError> {
        self.pushdown(&self.embedding.apply(form))
    }

    /// Coefficient matrix at a point.
    pub fn matrix_at(&self, b: &EvalBinding) -> Result<DMatrix<f64>, FrameError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for (a, row) in self.rows.iter().enumerate() {
            for (g, c) in row.iter().enumerate() {
                if !c.is_zero() {
                    m[(a, g)] = c.eval(b)?;
                }
            }
        }
        Ok(m)
    }

    /// Random binding of coordinates, parameters and order-0 unknowns drawn
    /// from `domain` (falling back to the frame's own domain).
    pub fn random_binding(&self, rng: &mut ChaCha8Rng, domain: &Domain) -> EvalBinding {
        let mut b = EvalBinding::new();
        let interval = |key: &str| {
            if domain.entries().any(|(k, _)| k == key) {
                domain.interval(key)
            } else {
                self.domain.interval(key)
            }
        };
        let mut coords: BTreeSet<String> = self.coframe.base().iter().cloned().collect();
        coords.extend(self.coefficient_symbols());
        for s in coords {
            let (lo, hi) = interval(&s);
            b.set_sym(&s, rng.gen_range(lo..=hi));
        }
        for u in self.unknowns() {
            let (lo, hi) = interval(&u);
            b.set_unknown_key(&u, 0, rng.gen_range(lo..=hi));
        }
        b
    }

    /// Seeded sample points at which the frame is invertible. Singular points
    /// are skipped; if every attempt is singular the frame is rejected.
    pub fn sample_points(&self, count: usize, seed: u64, domain: &Domain) -> Result<Vec<EvalBinding>, FrameError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(count);
        let mut attempts = 0;
        while out.len() < count {
            attempts += 1;
            if attempts > 10 * count.max(1) {
                break;
            }
            let b = self.random_binding(&mut rng, domain);
            match self.matrix_at(&b) {
                Ok(m) if is_invertible(&m) => out.push(b),
                Ok(_) | Err(FrameError::Expr(crate::expr::ExprError::Domain { .. })) => {}
                Err(e) => return Err(e),
            }
        }
        if out.is_empty() && count > 0 {
            return Err(FrameError::Singular);
        }
        Ok(out)
    }

    /// Checks invertibility at 10 seeded points; returns how many were singular.
    pub fn check_invertible(&self, seed: u64) -> Result<usize, FrameError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut singular = 0;
        for _ in 0..10 {
            let b = self.random_binding(&mut rng, &Domain::new());
            let ok = matches!(self.matrix_at(&b), Ok(m) if is_invertible(&m));
            if !ok {
                singular += 1;
            }
        }
        if singular == 10 {
            return Err(FrameError::Singular);
        }
        Ok(singular)
    }

    /// Symbolic parameters of the workspace (non-coordinate symbols).
    pub fn parameters(&self) -> Vec<String> {
        self.coefficient_symbols()
            .into_iter()
            .filter(|s| matches!(self.workspace.symbol(s), Some(sym) if sym.kind == SymbolKind::Parameter))
            .collect()
    }

    /// True if any coefficient mentions symbol `name`.
    pub fn mentions(&self, name: &str) -> bool {
        self.rows.iter().flatten().any(|c| {
            let mut hit = false;
            c.visit(&mut |e| {
                if let Node::Symbol(s) = e.node() {
                    hit |= &**s == name;
                }
            });
            hit
        })
    }
}

pub(crate) fn is_invertible(m: &DMatrix<f64>) -> bool {
    let scale = m.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    let n = m.nrows() as i32;
    (m / scale).determinant().abs() > 1e-12f64.max(f64::EPSILON * f64::from(n))
}

/// Converts a numeric generator-basis form to the frame basis using `M⁻¹`
/// (`gen^g = Σ_A M⁻¹[g][A] e^A`).
pub fn pullup(form: &Form<f64>, minv: &DMatrix<f64>) -> Form<f64> {
    let n = form.dim();
    let rows: Vec<Form<f64>> = (0..n)
        .map(|g| {
            let terms = (0..n).filter(|&a| minv[(g, a)] != 0.0).map(|a| (Blade::single(a + 1), minv[(g, a)]));
            Form::from_terms(n, 1, terms).expect("fits")
        })
        .collect();
    let mut parts = Vec::with_capacity(form.len());
    for (blade, c) in form.terms() {
        let mut acc = Form::scalar(n, *c);
        for i in blade.indices() {
            acc = acc.wedge(&rows[i - 1]).expect("same dimension");
        }
        parts.push(acc);
    }
    Form::sum(n, form.degree(), &parts).expect("same degree")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Rational};
    use crate::frames::FiberBlock;

    fn kn() -> AnsatzFrame {
        let cf = CoframeSpec::new(
            vec![FiberBlock::su2("t", Rational::from_integer(1)), FiberBlock::su2("s", Rational::from_integer(1))],
            vec!["x".into()],
        )
        .unwrap();
        let mut ws = Workspace::with_coordinates(&["x"]);
        ws.declare_function("A", "x").unwrap();
        ws.declare_function("Ahat", "x").unwrap();
        let p = |s: &str| parse_expr(s, &ws).unwrap();
        let z = Expr::zero;
        let mut rows = vec![vec![z(); 7]; 7];
        for i in 0..3 {
            rows[i][i] = p("A");
            rows[i + 3][i] = p("-Ahat/2");
            rows[i + 3][i + 3] = p("Ahat");
        }
        rows[6][6] = Expr::one();
        AnsatzFrame::new(cf, ws, rows).unwrap()
    }

    #[test]
    fn pushdown_of_hatted_element() {
        let f = kn();
        let e4 = Form::basis(7, &[4]).unwrap();
        let pushed = f.pushdown(&e4).unwrap();
        let ws = f.workspace();
        let expected = Form::one_form(
            7,
            [(4, parse_expr("Ahat", ws).unwrap()), (1, parse_expr("-(1/2)*Ahat", ws).unwrap())],
        )
        .unwrap();
        assert_eq!(pushed, expected);
    }

    #[test]
    fn pushdown_is_multiplicative() {
        let f = kn();
        let a = Form::basis(7, &[1, 4]).unwrap();
        let b = Form::basis(7, &[5, 7]).unwrap();
        let lhs = f.pushdown(&a.wedge(&b).unwrap()).unwrap();
        let rhs = f.pushdown(&a).unwrap().wedge(&f.pushdown(&b).unwrap()).unwrap();
        assert!(lhs.equals(&rhs, &Default::default(), &Domain::new()).unwrap());
    }

    #[test]
    fn pullup_inverts_pushdown_numerically() {
        let f = kn();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = f.random_binding(&mut rng, &Domain::new());
        let m = f.matrix_at(&b).unwrap();
        let minv = m.clone().try_inverse().unwrap();
        let phi = Form::<Expr>::basis(7, &[1, 4, 6]).unwrap();
        let pushed = f.pushdown(&phi).unwrap().try_map(|c| c.eval(&b)).unwrap();
        let back = pullup(&pushed, &minv);
        let diff = back.sub(&Form::basis(7, &[1, 4, 6]).unwrap()).unwrap();
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn embedding_round_trip() {
        let e = Embedding::parse("1 2 -5 4 3 6 -7").unwrap();
        let phi = Form::<Expr>::basis(7, &[1, 3, 7]).unwrap();
        assert_eq!(e.pull(&e.apply(&phi)), phi);
        assert_eq!(e.apply(&phi), Form::basis(7, &[1, 5, 7]).unwrap());
        assert!(Embedding::parse("1 1 2").is_err());
    }
}
