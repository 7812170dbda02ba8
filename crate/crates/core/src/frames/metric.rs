use nalgebra::DMatrix;

use super::{AnsatzFrame, FrameError};
use crate::expr::zero::{Domain, ZeroTest};
use crate::expr::{EvalBinding, Expr, Rational};

/// Symmetric metric `g = MᵀM` in the generator basis.
#[derive(Debug, Clone)]
pub struct MetricMatrix {
    entries: Vec<Vec<Expr>>,
    block_of: Vec<usize>,
    three_three: bool,
}

pub fn metric_from_frame(frame: &AnsatzFrame) -> MetricMatrix {
    let n = frame.dim();
    let rows = frame.rows();
    let mut entries = vec![vec![Expr::zero(); n]; n];
    for g in 0..n {
        for h in g..n {
            let terms: Vec<Expr> = (0..n)
                .filter(|&a| !rows[a][g].is_zero() && !rows[a][h].is_zero())
                .map(|a| rows[a][g].mul(&rows[a][h]))
                .collect();
            let v = Expr::sum(terms);
            entries[g][h] = v.clone();
            entries[h][g] = v;
        }
    }
    let cf = frame.coframe();
    let mut block_of = Vec::with_capacity(n);
    for (bi, b) in cf.blocks().iter().enumerate() {
        block_of.extend(std::iter::repeat_n(bi, b.dim));
    }
    block_of.extend(std::iter::repeat_n(cf.blocks().len(), cf.base().len()));
    let three_three = cf.blocks().len() >= 2 && cf.blocks()[0].dim == 3 && cf.blocks()[1].dim == 3;
    MetricMatrix { entries, block_of, three_three }
}

impl MetricMatrix {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// Entry for 0-based generator indices.
    pub fn entry(&self, g: usize, h: usize) -> &Expr {
        &self.entries[g][h]
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.entries
    }

    /// Coefficient of `Σ θ^i⊗θ^i` for a (3+3+k) frame.
    pub fn f1(&self) -> Option<Expr> {
        self.three_three.then(|| self.entries[0][0].clone())
    }

    /// Coefficient of `Σ θ^î⊗θ^î`.
    pub fn f2(&self) -> Option<Expr> {
        self.three_three.then(|| self.entries[3][3].clone())
    }

    /// Coefficient of the mixed term `ω`, i.e. twice the off-block entry.
    pub fn h12(&self) -> Option<Expr> {
        self.three_three.then(|| self.entries[0][3].scale(Rational::from_integer(2)))
    }

    pub fn eval(&self, b: &EvalBinding) -> Result<DMatrix<f64>, FrameError> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for g in 0..n {
            for h in 0..n {
                m[(g, h)] = self.entries[g][h].eval(b)?;
            }
        }
        Ok(m)
    }

    /// Every entry coupling different blocks (fiber 1, fiber 2, ..., base)
    /// vanishes identically.
    pub fn is_block_diagonal(&self, test: &ZeroTest, domain: &Domain) -> Result<bool, FrameError> {
        let n = self.dim();
        for g in 0..n {
            for h in (g + 1)..n {
                if self.block_of[g] != self.block_of[h] && !test.run(&self.entries[g][h], domain)?.zero {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Pointwise rotation `M ↦ P·M` of the frame. `P` must be orthogonal at
/// every sample point (tolerance 1e-10).
pub fn gauge_transform(frame: &AnsatzFrame, p: &[Vec<Expr>], seed: u64) -> Result<AnsatzFrame, FrameError> {
    let n = frame.dim();
    if p.len() != n || p.iter().any(|r| r.len() != n) {
        return Err(FrameError::Invalid(format!("gauge matrix must be {n}x{n}")));
    }
    let rows = frame.rows();
    let mut new_rows = vec![vec![Expr::zero(); n]; n];
    for a in 0..n {
        for g in 0..n {
            let terms: Vec<Expr> = (0..n)
                .filter(|&b| !p[a][b].is_zero() && !rows[b][g].is_zero())
                .map(|b| p[a][b].mul(&rows[b][g]))
                .collect();
            new_rows[a][g] = Expr::sum(terms);
        }
    }
    let points = frame.sample_points(10, seed, &Domain::new())?;
    for b in &points {
        let mut pm = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                pm[(i, j)] = p[i][j].eval(b)?;
            }
        }
        let err = (pm.transpose() * &pm - DMatrix::identity(n, n)).abs().max();
        if err > 1e-10 {
            return Err(FrameError::NonOrthogonal(err));
        }
    }
    let out = AnsatzFrame::new(frame.coframe().clone(), frame.workspace().clone(), new_rows)?
        .with_embedding(frame.embedding().clone())?
        .with_domain(frame.domain().clone());
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Func, Workspace};
    use crate::frames::{CoframeSpec, FiberBlock};
    use rand::SeedableRng;

    fn generic() -> AnsatzFrame {
        let cf = CoframeSpec::new(
            vec![FiberBlock::su2("t", Rational::from_integer(1)), FiberBlock::su2("s", Rational::from_integer(1))],
            vec!["x".into(), "y".into()],
        )
        .unwrap();
        let mut ws = Workspace::with_coordinates(&["x", "y"]);
        for f in ["A", "B", "Ah", "Bh"] {
            ws.declare_function(f, "x").unwrap();
        }
        let p = |s: &str| parse_expr(s, &ws).unwrap();
        let mut rows = vec![vec![Expr::zero(); 8]; 8];
        for i in 0..3 {
            rows[i][i] = p("A");
            rows[i][i + 3] = p("B");
            rows[i + 3][i] = p("Ah");
            rows[i + 3][i + 3] = p("Bh");
        }
        rows[6][6] = Expr::one();
        rows[7][7] = Expr::one();
        AnsatzFrame::new(cf, ws, rows).unwrap()
    }

    #[test]
    fn warped_like_accessors() {
        let f = generic();
        let g = metric_from_frame(&f);
        let ws = f.workspace();
        let d = Domain::new();
        let t = ZeroTest::default();
        let same = |a: Expr, b: &str| t.run(&a.sub(&parse_expr(b, ws).unwrap()), &d).unwrap().zero;
        assert!(same(g.f1().unwrap(), "A^2 + Ah^2"));
        assert!(same(g.f2().unwrap(), "B^2 + Bh^2"));
        assert!(same(g.h12().unwrap(), "2*(A*B + Ah*Bh)"));
        assert!(!g.is_block_diagonal(&t, &d).unwrap());
    }

    #[test]
    fn identity_frame_gives_identity_metric() {
        let cf = CoframeSpec::new(vec![], vec!["x".into(), "y".into()]).unwrap();
        let ws = Workspace::with_coordinates(&["x", "y"]);
        let f = AnsatzFrame::new(cf, ws, vec![vec![Expr::one(), Expr::zero()], vec![Expr::zero(), Expr::one()]]).unwrap();
        let g = metric_from_frame(&f);
        assert_eq!(g.entry(0, 0), &Expr::one());
        assert!(g.entry(0, 1).is_zero());
    }

    #[test]
    fn plane_rotation_preserves_metric() {
        let f = generic();
        let ws = f.workspace();
        let t = parse_expr("x*y", ws).unwrap();
        let mut p = vec![vec![Expr::zero(); 8]; 8];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = Expr::one();
        }
        p[0][0] = Expr::func(Func::Cos, t.clone());
        p[1][1] = Expr::func(Func::Cos, t.clone());
        p[0][1] = Expr::func(Func::Sin, t.clone()).neg();
        p[1][0] = Expr::func(Func::Sin, t);
        let g = gauge_transform(&f, &p, 1).unwrap();
        let m0 = metric_from_frame(&f);
        let m1 = metric_from_frame(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let b = f.random_binding(&mut rng, &Domain::new());
            assert!((m0.eval(&b).unwrap() - m1.eval(&b).unwrap()).abs().max() < 1e-12);
        }
    }

    #[test]
    fn non_orthogonal_is_rejected() {
        let f = generic();
        let mut p = vec![vec![Expr::zero(); 8]; 8];
        for (i, row) in p.iter_mut().enumerate() {
            row[i] = Expr::int(2);
        }
        assert!(matches!(gauge_transform(&f, &p, 1), Err(FrameError::NonOrthogonal(_))));
    }
}
