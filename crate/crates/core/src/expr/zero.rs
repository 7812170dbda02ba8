//! Randomized identity testing.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EvalBinding, EvalTrace, Expr, ExprError, Fnv, Node};

pub const DEFAULT_TOL: f64 = 1e-9;
pub const DEFAULT_TRIALS: usize = 50;

/// Sampling intervals keyed by symbol name or unknown key (`a`, `a'`, ...).
#[derive(Debug, Clone)]
pub struct Domain {
    intervals: BTreeMap<String, (f64, f64)>,
    fallback: (f64, f64),
}

impl Default for Domain {
    fn default() -> Self {
        Domain { intervals: BTreeMap::new(), fallback: (0.5, 1.5) }
    }
}

impl Domain {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, key: &str, lo: f64, hi: f64) -> Self {
        self.set(key, lo, hi);
        self
    }

    pub fn set(&mut self, key: &str, lo: f64, hi: f64) {
        self.intervals.insert(key.to_string(), (lo, hi));
    }

    /// Interval used for keys without an explicit entry.
    pub fn with_fallback(mut self, lo: f64, hi: f64) -> Self {
        self.fallback = (lo, hi);
        self
    }

    pub fn interval(&self, key: &str) -> (f64, f64) {
        self.intervals.get(key).copied().unwrap_or(self.fallback)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, (f64, f64))> {
        self.intervals.iter().map(|(k, v)| (k.as_str(), *v))
    }
}

/// Outcome of a randomized zero test.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroVerdict {
    pub zero: bool,
    /// Largest |value| / (1 + largest intermediate term) seen.
    pub max_relative: f64,
}

#[derive(Debug, Clone)]
pub struct ZeroTest {
    pub trials: usize,
    pub tol: f64,
    /// Mixed into the expression hash to derive the sampling seed.
    pub salt: u64,
}

impl Default for ZeroTest {
    fn default() -> Self {
        ZeroTest { trials: DEFAULT_TRIALS, tol: DEFAULT_TOL, salt: 0 }
    }
}

impl ZeroTest {
    pub fn new(trials: usize, tol: f64) -> Self {
        ZeroTest { trials: trials.max(1), tol, salt: 0 }
    }

    pub fn salted(mut self, salt: u64) -> Self {
        self.salt = salt;
        self
    }

    pub fn run(&self, e: &Expr, domain: &Domain) -> Result<ZeroVerdict, ExprError> {
        if let Node::Const(r) = e.node() {
            let zero = *r.numer() == 0;
            return Ok(ZeroVerdict { zero, max_relative: if zero { 0.0 } else { f64::INFINITY } });
        }
        let seed = Fnv::new().u64(e.structural_hash()).u64(self.salt).finish();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = e.symbols();
        let unknowns = e.unknowns();
        let mut worst = 0.0f64;
        for _ in 0..self.trials.max(1) {
            let mut b = EvalBinding::new();
            let mut point = Vec::new();
            for s in &symbols {
                let (lo, hi) = domain.interval(s);
                let v = rng.gen_range(lo..=hi);
                b.set_sym(s, v);
                point.push(format!("{s}={v}"));
            }
            for u in &unknowns {
                let (lo, hi) = domain.interval(&u.key());
                let v = rng.gen_range(lo..=hi);
                b.set_unknown(u, v);
                point.push(format!("{}={v}", u.key()));
            }
            let mut trace = EvalTrace::default();
            let v = e.eval_traced(&b, &mut trace).map_err(|err| match err {
                ExprError::Domain { expr, detail } => {
                    ExprError::Domain { expr, detail: format!("{detail} at {}", point.join(", ")) }
                }
                other => other,
            })?;
            let rel = v.abs() / (1.0 + trace.max_term.max(v.abs()));
            worst = worst.max(rel);
            if v.abs() > self.tol * (1.0 + trace.max_term.max(v.abs())) {
                return Ok(ZeroVerdict { zero: false, max_relative: worst });
            }
        }
        Ok(ZeroVerdict { zero: true, max_relative: worst })
    }
}

/// True iff `e` vanishes (relative to its largest summand) at every sample.
pub fn is_identically_zero(e: &Expr, domain: &Domain, trials: usize, tol: f64) -> Result<bool, ExprError> {
    Ok(ZeroTest::new(trials, tol).run(e, domain)?.zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Workspace};

    #[test]
    fn hyperbolic_identity() {
        let ws = Workspace::with_coordinates(&["y"]);
        let e = parse_expr("sech(y)^2 + tanh(y)^2 - 1", &ws).unwrap();
        let d = Domain::new().with("y", -3.0, 3.0);
        assert!(is_identically_zero(&e, &d, 50, 1e-9).unwrap());
    }

    #[test]
    fn commuted_product() {
        let ws = Workspace::with_coordinates(&["x", "y"]);
        let e = parse_expr("x*y - y*x", &ws).unwrap();
        assert!(is_identically_zero(&e, &Domain::new(), 50, 1e-9).unwrap());
    }

    #[test]
    fn distinct_symbols_differ() {
        let ws = Workspace::with_coordinates(&["x", "y"]);
        let e = parse_expr("x - y", &ws).unwrap();
        let d = Domain::new().with("x", 1.0, 2.0).with("y", 1.0, 2.0);
        assert!(!is_identically_zero(&e, &d, 50, 1e-9).unwrap());
    }

    #[test]
    fn sampling_domain_errors_report_the_point() {
        let ws = Workspace::with_coordinates(&["x"]);
        let e = parse_expr("log(x)", &ws).unwrap();
        let err = is_identically_zero(&e, &Domain::new().with("x", -2.0, -1.0), 5, 1e-9).unwrap_err();
        match err {
            ExprError::Domain { detail, .. } => assert!(detail.contains("x=")),
            other => panic!("{other:?}"),
        }
    }
}
