use holonomy::expr::zero::ZeroTest;
use holonomy::expr::{parse_expr, Workspace};
use holonomy::flows::{derive_flow, integrate, residuals_along, DeriveOptions, DerivativeSource, FlowSystem, StepControl};
use holonomy::structures::{builtin_ansatz, BuiltinParams};
use holonomy::torsion::{torsion_forms, SampleOptions};
use proptest::prelude::*;

const DERIVABLE: [&str; 5] = ["yasui_ootsuka", "konishi_naka", "brandhuber", "six_function", "cone"];

fn derived(name: &str) -> (holonomy::structures::Builtin, FlowSystem) {
    let b = builtin_ansatz(name, &BuiltinParams::default()).unwrap();
    let opts = DeriveOptions { reference: b.reference.clone(), ..Default::default() };
    let f = derive_flow(&b.frame, b.kind, &opts).unwrap();
    (b, f)
}

#[test]
fn derived_flows_close_the_torsion_symbolically() {
    for name in DERIVABLE {
        let (b, flow) = derived(name);
        let rep = torsion_forms(&b.frame, b.kind, Some(&flow), SampleOptions { points: 5, seed: 3 }).unwrap();
        let test = ZeroTest::new(20, 1e-9);
        for form in rep.closed.as_ref().unwrap() {
            for (blade, c) in form.terms() {
                assert!(test.run(c, b.frame.domain()).unwrap().zero, "{name}: coefficient of {blade:?} = {}", c.bare());
            }
        }
    }
}

#[test]
fn trajectory_residuals_shrink_with_the_step() {
    let cases: [(&str, &[f64], (f64, f64)); 3] = [
        ("yasui_ootsuka", &[1.0, 1.0], (0.0, 0.25)),
        ("konishi_naka", &[1.0, 1.0], (0.0, 1.0)),
        ("brandhuber", &[1.0, 1.0, 1.0, 1.0], (0.0, 0.5)),
    ];
    for (name, init, range) in cases {
        let (b, flow) = derived(name);
        let res = |h: f64| {
            let t = integrate(&flow, init, range, StepControl::Fixed { h }).unwrap();
            residuals_along(&t, &b.frame, b.kind, DerivativeSource::Midpoint).unwrap().stats.max
        };
        let r: Vec<f64> = [0.05, 0.025, 0.0125, 0.00625].iter().map(|h| res(*h)).collect();
        for w in r.windows(2) {
            assert!(w[1] <= 1.1 * w[0], "{name}: {r:?}");
        }
    }
}

fn scalar_flow(k: f64, c: f64) -> FlowSystem {
    let mut ws = Workspace::with_coordinates(&["t"]);
    ws.declare_function("u", "t").unwrap();
    ws.declare_function("v", "t").unwrap();
    let p = |s: &str| parse_expr(s, &ws).unwrap();
    FlowSystem::new(
        "t",
        vec![("u".into(), p(&format!("({k})*u + ({c})*sin(t)*v"))), ("v".into(), p(&format!("-({c})*u/(1 + v^2)")))],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rk4_converges_at_fourth_order(k in -1.5f64..1.5, c in 0.2f64..1.5) {
        let flow = scalar_flow(k, c);
        let end = |h: f64| integrate(&flow, &[1.0, 0.5], (0.0, 1.0), StepControl::Fixed { h }).unwrap().last().unwrap().1.to_vec();
        let (a, b, d) = (end(0.1), end(0.05), end(0.025));
        let dist = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let order = (dist(&a, &b) / dist(&b, &d)).log2();
        prop_assert!((3.7..=4.3).contains(&order), "order {order}");
    }

    #[test]
    fn adaptive_steps_respect_the_tolerance(k in -1.5f64..1.5, c in 0.2f64..1.5, e in 6i32..=10) {
        let flow = scalar_flow(k, c);
        let tol = 10f64.powi(-e);
        let t = integrate(&flow, &[1.0, 0.5], (0.0, 2.0), StepControl::Adaptive { tol }).unwrap();
        let meta = t.meta.unwrap();
        prop_assert!(meta.max_error_ratio <= 1.0, "{}", meta.max_error_ratio);
        prop_assert!(meta.truncated.is_none());
        prop_assert!((t.t.last().unwrap() - 2.0).abs() < 1e-12);
    }
}
