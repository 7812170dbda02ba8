use std::collections::BTreeSet;

use holonomy::exterior::{Blade, Form};
use holonomy::expr::zero::ZeroTest;
use holonomy::expr::{parse_expr, Domain, Expr, Func, Rational, Workspace};
use holonomy::frames::{
    exterior_derivative, gauge_transform, metric_from_frame, AnsatzFrame, CoframeSpec, FiberBlock, TriGradeSplit,
};
use holonomy::structures::{builtin_ansatz, BuiltinParams};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn scale() -> impl Strategy<Value = Rational> {
    prop_oneof![(-3i64..=3).prop_filter("nonzero", |v| *v != 0).prop_map(Rational::from_integer), Just(Rational::new(1, 2)), Just(Rational::new(-3, 2))]
}

fn coframe(l1: Rational, l2: Rational) -> CoframeSpec {
    CoframeSpec::new(vec![FiberBlock::su2("t", l1), FiberBlock::su2("s", l2)], vec!["x".into(), "y".into()]).unwrap()
}

fn workspace() -> Workspace {
    let mut ws = Workspace::with_coordinates(&["x", "y"]);
    ws.declare_function("F", "x").unwrap();
    ws
}

const COEFFS: [&str; 6] = ["1", "x", "x*y^2 - 3", "sin(x)*cos(y)", "F", "F^2*y + exp(x - y)"];

fn random_form(ws: &Workspace, p: usize, picks: &[(usize, usize)]) -> Form<Expr> {
    let all = Blade::all(8, p);
    let terms = picks.iter().map(|(b, c)| (all[b % all.len()], parse_expr(COEFFS[c % COEFFS.len()], ws).unwrap()));
    Form::from_terms(8, p, terms).unwrap()
}

fn vanishes(f: &Form<Expr>) -> bool {
    let d = Domain::new().with("F", 0.5, 2.0);
    let t = ZeroTest::new(12, 1e-10);
    f.terms().all(|(_, c)| t.run(c, &d).unwrap().zero)
}

fn generic(b_entry: &str, bh_entry: &str) -> AnsatzFrame {
    let mut ws = Workspace::with_coordinates(&["x", "y"]);
    for f in ["A", "Ah"] {
        ws.declare_function(f, "x").unwrap();
    }
    ws.declare_parameter("B0");
    let p = |s: &str| parse_expr(s, &ws).unwrap();
    let mut rows = vec![vec![Expr::zero(); 8]; 8];
    for i in 0..3 {
        rows[i][i] = p("A");
        rows[i][i + 3] = p(b_entry);
        rows[i + 3][i] = p("Ah");
        rows[i + 3][i + 3] = p(bh_entry);
    }
    rows[6][6] = Expr::one();
    rows[7][7] = p("1 + x^2");
    let one = Rational::from_integer(1);
    AnsatzFrame::new(coframe(one, one), ws, rows)
        .unwrap()
        .with_domain(Domain::new().with("A", 0.5, 2.0).with("Ah", 0.5, 2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_vanishes_on_generators(l1 in scale(), l2 in scale()) {
        let cf = coframe(l1, l2);
        for g in 1..=cf.dim() {
            let dg = cf.d_generator(g).clone();
            let ddg = exterior_derivative(&dg, &cf).unwrap();
            prop_assert!(vanishes(&ddg), "generator {g}");
        }
    }

    #[test]
    fn d_squared_vanishes_on_random_forms(
        l1 in scale(),
        l2 in scale(),
        p in 0usize..=3,
        picks in proptest::collection::vec((0usize..56, 0usize..6), 1..4),
    ) {
        let cf = coframe(l1, l2);
        let f = random_form(&workspace(), p, &picks);
        let dd = exterior_derivative(&exterior_derivative(&f, &cf).unwrap(), &cf).unwrap();
        prop_assert!(vanishes(&dd));
    }

    #[test]
    fn d_respects_trigrading(
        l1 in scale(),
        l2 in scale(),
        p in 0usize..=5,
        picks in proptest::collection::vec((0usize..56, 0usize..6), 1..2),
    ) {
        let cf = coframe(l1, l2);
        let split = TriGradeSplit::from_coframe(&cf).unwrap();
        let f = random_form(&workspace(), p, &picks);
        let (blade, _) = f.terms().next().unwrap();
        let (a, b, k) = split.grade(*blade);
        let allowed: BTreeSet<_> = [(a + 1, b, k), (a, b + 1, k), (a, b, k + 1)].into();
        let d = exterior_derivative(&f, &cf).unwrap();
        for g in split.decompose(&d).keys() {
            prop_assert!(allowed.contains(g), "{:?} -> {:?}", (a, b, k), g);
        }
    }

    #[test]
    fn pushdown_is_multiplicative(
        pa in 1usize..=2,
        pb in 1usize..=2,
        picks in proptest::collection::vec((0usize..28, -3i64..=3), 4),
    ) {
        let b = builtin_ansatz("brandhuber", &BuiltinParams::default()).unwrap();
        let frame = &b.frame;
        let build = |p: usize, off: usize| {
            let all = Blade::all(7, p);
            let terms = picks[off..off + 2].iter().map(|(i, c)| (all[i % all.len()], Expr::int(*c)));
            Form::from_terms(7, p, terms).unwrap()
        };
        let (x, y) = (build(pa, 0), build(pb, 2));
        let lhs = frame.pushdown(&x.wedge(&y).unwrap()).unwrap();
        let rhs = frame.pushdown(&x).unwrap().wedge(&frame.pushdown(&y).unwrap()).unwrap();
        prop_assert!(lhs.equals(&rhs, &ZeroTest::new(8, 1e-10), frame.domain()).unwrap());
    }

    #[test]
    fn gauge_rotations_preserve_metric(
        planes in proptest::collection::vec((0usize..8, 0usize..8, -3i64..=3, -3i64..=3), 1..4),
        seed in 0u64..1000,
    ) {
        let frame = generic("B0*x", "2 - y");
        let ws = frame.workspace().clone();
        let mut p: Vec<Vec<Expr>> = (0..8).map(|i| (0..8).map(|j| if i == j { Expr::one() } else { Expr::zero() }).collect()).collect();
        for (i, j, c1, c2) in planes {
            prop_assume!(i != j);
            // Left-multiply by a rotation in the (i, j) plane with angle c1·x + c2·y.
            let angle = parse_expr(&format!("{c1}*x + {c2}*y"), &ws).unwrap();
            let (c, s) = (Expr::func(Func::Cos, angle.clone()), Expr::func(Func::Sin, angle));
            let (ri, rj) = (p[i].clone(), p[j].clone());
            for k in 0..8 {
                p[i][k] = c.mul(&ri[k]).sub(&s.mul(&rj[k]));
                p[j][k] = s.mul(&ri[k]).add(&c.mul(&rj[k]));
            }
        }
        let rotated = gauge_transform(&frame, &p, seed).unwrap();
        let (g0, g1) = (metric_from_frame(&frame), metric_from_frame(&rotated));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dom = Domain::new().with("B0", -1.0, 1.0);
        for _ in 0..5 {
            let b = frame.random_binding(&mut rng, &dom);
            let diff = (g0.eval(&b).unwrap() - g1.eval(&b).unwrap()).abs().max();
            prop_assert!(diff < 1e-9, "{diff}");
        }
    }

    #[test]
    fn vanishing_cross_term_is_block_diagonal(k in -4i64..=4) {
        prop_assume!(k != 0);
        // B = −k·Ah and B̂ = k·A make A·B + Â·B̂ vanish identically.
        let frame = generic(&format!("-({k})*Ah"), &format!("({k})*A"));
        let g = metric_from_frame(&frame);
        let t = ZeroTest::default();
        prop_assert!(t.run(&g.h12().unwrap(), frame.domain()).unwrap().zero);
        prop_assert!(g.is_block_diagonal(&t, frame.domain()).unwrap());
    }

    #[test]
    fn multiply_warped_is_block_diagonal(base_dim in 1usize..=2, l1 in scale(), l2 in scale()) {
        let params = BuiltinParams { lambdas: Some(vec![l1, l2]), base_dim: Some(base_dim) };
        let b = builtin_ansatz("multiply_warped", &params).unwrap();
        let g = metric_from_frame(&b.frame);
        prop_assert!(g.is_block_diagonal(&ZeroTest::default(), b.frame.domain()).unwrap());
    }
}
