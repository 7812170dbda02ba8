use std::collections::HashMap;

use num_traits::Zero;

use super::FrameError;
use crate::exterior::{Blade, Form};
use crate::expr::{Expr, Rational, Symbol};

/// Maurer-Cartan type of a fiber block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `dθ^i = −λ θ^j∧θ^k` for cyclic `(i, j, k)`.
    Su2,
    /// Closed generators.
    Abelian,
}

impl BlockKind {
    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Su2 => "su2",
            BlockKind::Abelian => "abelian",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FiberBlock {
    pub name: String,
    pub kind: BlockKind,
    pub dim: usize,
    pub lambda: Rational,
}

impl FiberBlock {
    pub fn su2(name: &str, lambda: Rational) -> Self {
        FiberBlock { name: name.to_string(), kind: BlockKind::Su2, dim: 3, lambda }
    }

    pub fn abelian(name: &str, dim: usize) -> Self {
        FiberBlock { name: name.to_string(), kind: BlockKind::Abelian, dim, lambda: Rational::zero() }
    }

    /// `c^i_{jk}` (0-based, within the block) before scaling by λ, with
    /// `dθ^i = −(λ/2) c^i_{jk} θ^j∧θ^k`.
    pub fn constant(&self, i: usize, j: usize, k: usize) -> Rational {
        match self.kind {
            BlockKind::Abelian => Rational::zero(),
            BlockKind::Su2 => Rational::from_integer(levi_civita(i, j, k)),
        }
    }
}

fn levi_civita(i: usize, j: usize, k: usize) -> i64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1,
        _ => 0,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    Fiber { block: usize, index: usize },
    Base { coordinate: String },
}

/// Fiber blocks followed by base coordinate differentials.
#[derive(Debug, Clone, PartialEq)]
pub struct CoframeSpec {
    blocks: Vec<FiberBlock>,
    base: Vec<String>,
    names: Vec<String>,
    generators: Vec<Generator>,
    d_gen: Vec<Form<Expr>>,
}

impl CoframeSpec {
    pub fn new(blocks: Vec<FiberBlock>, base: Vec<String>) -> Result<Self, FrameError> {
        let mut names = Vec::new();
        let mut generators = Vec::new();
        for (bi, b) in blocks.iter().enumerate() {
            for i in 0..b.dim {
                names.push(format!("{}{}", b.name, i + 1));
                generators.push(Generator::Fiber { block: bi, index: i });
            }
        }
        for c in &base {
            names.push(format!("d{c}"));
            generators.push(Generator::Base { coordinate: c.clone() });
        }
        let n = names.len();
        if !(2..=crate::exterior::MAX_DIM).contains(&n) {
            return Err(FrameError::Invalid(format!("coframe dimension {n} out of range")));
        }
        for (i, a) in names.iter().enumerate() {
            if names[..i].contains(a) {
                return Err(FrameError::Invalid(format!("duplicate generator name `{a}`")));
            }
        }
        let mut spec = CoframeSpec { blocks, base, names, generators, d_gen: Vec::new() };
        spec.d_gen = (0..n).map(|g| spec.build_d_generator(g)).collect();
        spec.check_jacobi()?;
        Ok(spec)
    }

    fn block_offset(&self, block: usize) -> usize {
        self.blocks[..block].iter().map(|b| b.dim).sum()
    }

    fn build_d_generator(&self, g: usize) -> Form<Expr> {
        let n = self.dim();
        match &self.generators[g] {
            Generator::Base { .. } => Form::zero(n, 2),
            Generator::Fiber { block, index } => {
                let b = &self.blocks[*block];
                let off = self.block_offset(*block);
                let mut terms = Vec::new();
                for j in 0..b.dim {
                    for k in (j + 1)..b.dim {
                        // −(λ/2)(c_jk − c_kj) over j<k = −λ c_jk for antisymmetric c
                        let c = (b.constant(*index, j, k) - b.constant(*index, k, j)) * b.lambda
                            / Rational::from_integer(2);
                        if !c.is_zero() {
                            let blade = Blade::from_indices(&[off + j + 1, off + k + 1]).unwrap().1;
                            terms.push((blade, Expr::constant(-c)));
                        }
                    }
                }
                Form::from_terms(n, 2, terms).expect("generator indices fit")
            }
        }
    }

    /// d∘d = 0 on every generator.
    fn check_jacobi(&self) -> Result<(), FrameError> {
        for g in 0..self.dim() {
            let dd = exterior_derivative(&self.d_gen[g], self)?;
            if dd.terms().any(|(_, c)| !c.is_zero()) {
                return Err(FrameError::Jacobi(self.names[g].clone()));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn blocks(&self) -> &[FiberBlock] {
        &self.blocks
    }

    pub fn base(&self) -> &[String] {
        &self.base
    }

    pub fn generator_names(&self) -> &[String] {
        &self.names
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    /// 1-based index of a generator by name.
    pub fn generator_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name).map(|i| i + 1)
    }

    /// 1-based index of the differential of a base coordinate.
    pub fn base_index(&self, coordinate: &str) -> Option<usize> {
        self.generators
            .iter()
            .position(|g| matches!(g, Generator::Base { coordinate: c } if c == coordinate))
            .map(|i| i + 1)
    }

    /// `d` of the 1-based generator `g`.
    pub fn d_generator(&self, g: usize) -> &Form<Expr> {
        &self.d_gen[g - 1]
    }

    pub fn lambdas(&self) -> Vec<Rational> {
        self.blocks.iter().filter(|b| b.kind == BlockKind::Su2).map(|b| b.lambda).collect()
    }

    /// Same coframe with new scales for the su2 blocks, in order.
    pub fn with_lambdas(&self, lambdas: &[Rational]) -> Result<Self, FrameError> {
        let mut blocks = self.blocks.clone();
        let mut it = lambdas.iter();
        for b in blocks.iter_mut().filter(|b| b.kind == BlockKind::Su2) {
            b.lambda = *it.next().ok_or_else(|| FrameError::Invalid("too few block scales".into()))?;
        }
        if it.next().is_some() {
            return Err(FrameError::Invalid("too many block scales".into()));
        }
        CoframeSpec::new(blocks, self.base.clone())
    }
}

/// Exterior derivative of a generator-basis form whose coefficients depend
/// only on base coordinates and unknown profiles.
pub fn exterior_derivative(form: &Form<Expr>, coframe: &CoframeSpec) -> Result<Form<Expr>, FrameError> {
    let n = coframe.dim();
    if form.dim() != n {
        return Err(FrameError::Exterior(crate::exterior::ExteriorError::DimensionMismatch(form.dim(), n)));
    }
    if form.degree() == n {
        return Ok(Form::zero(n, n));
    }
    let mut cache: HashMap<Blade, Form<Expr>> = HashMap::new();
    let mut parts: Vec<Form<Expr>> = Vec::new();
    let base: Vec<(Symbol, usize)> = coframe
        .base
        .iter()
        .map(|c| (Symbol::coordinate(c), coframe.base_index(c).unwrap()))
        .collect();
    for (blade, f) in form.terms() {
        let beta = Form::from_terms(n, form.degree(), [(*blade, Expr::one())])?;
        for (sym, idx) in &base {
            let df = f.differentiate(sym)?;
            if !df.is_zero() {
                let dx = Form::monomial(n, &[*idx], df)?;
                parts.push(dx.wedge(&beta)?);
            }
        }
        let db = match cache.get(blade) {
            Some(v) => v.clone(),
            None => {
                let v = d_blade(*blade, coframe)?;
                cache.insert(*blade, v.clone());
                v
            }
        };
        if !db.is_empty() {
            parts.push(db.scale(f));
        }
    }
    Ok(Form::sum(n, form.degree() + 1, &parts)?)
}

/// Leibniz rule on a constant-coefficient blade.
fn d_blade(blade: Blade, coframe: &CoframeSpec) -> Result<Form<Expr>, FrameError> {
    let n = coframe.dim();
    let idx: Vec<usize> = blade.indices().collect();
    let mut parts = Vec::new();
    for (pos, &g) in idx.iter().enumerate() {
        let dg = coframe.d_generator(g);
        if dg.is_empty() {
            continue;
        }
        let sign = if pos % 2 == 0 { 1 } else { -1 };
        let mut acc = Form::scalar(n, Expr::int(sign));
        for (q, &h) in idx.iter().enumerate() {
            let factor = if q == pos { dg.clone() } else { Form::basis(n, &[h])? };
            acc = acc.wedge(&factor)?;
        }
        parts.push(acc);
    }
    Ok(Form::sum(n, blade.degree() + 1, &parts)?)
}
