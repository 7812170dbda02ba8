//! First-order flow systems: derivation from closure conditions,
//! integration, residual monitoring and conical diagnostics.

mod conical;
mod derive;
mod integrate;
mod residuals;

pub use conical::{conical_deviation, ConicalProfile, ConicalReport, DEFAULT_CONICAL_TOL};
pub use derive::{
    derive_flow, lambda_scan, DeriveOptions, Derivation, EquationMatch, LambdaChoice, LambdaSelection,
};
pub use integrate::{integrate, IntegratorMeta, StepControl, Trajectory, BLOWUP_DENOMINATOR, BLOWUP_VALUE};
pub use residuals::{residuals_along, DerivativeSource, ResidualSeries};

use std::collections::HashMap;

use thiserror::Error;

use crate::expr::{EvalBinding, Expr, ExprError, Node, Rational, Unknown};
use crate::frames::{AnsatzFrame, FrameError};
use crate::torsion::TorsionError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FlowError {
    #[error("ansatz unknowns do not share a single flow coordinate")]
    NoFlowCoordinate,
    #[error("derivative system is rank-deficient at lambda {lambdas}; blades: {}", blades.join(", "))]
    RankDeficient { lambdas: String, blades: Vec<String> },
    #[error("derivative system is inconsistent at lambda {lambdas}; offending blades: {}", blades.join(", "))]
    Inconsistent { lambdas: String, blades: Vec<String> },
    #[error("no block scale in the scan set gives a consistent system ({tried} tried)")]
    NoLambda { tried: usize },
    #[error("coefficient {0} is not linear in the first derivatives")]
    NonLinear(String),
    #[error("{0}")]
    Mismatch(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error(transparent)]
    Torsion(#[from] TorsionError),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// `du/dt = rhs(u, t)` for a list of unknown profiles.
#[derive(Debug, Clone)]
pub struct FlowSystem {
    pub variable: String,
    pub unknowns: Vec<String>,
    pub rhs: Vec<Expr>,
    /// Residual closure conditions after back-substitution that are not
    /// structurally zero; each must vanish identically.
    pub leftovers: Vec<Expr>,
    pub leftovers_ok: bool,
    /// Block scales the system was derived at (empty when not applicable).
    pub lambdas: Vec<Rational>,
    pub derivation: Option<Derivation>,
}

impl FlowSystem {
    pub fn new(variable: &str, equations: Vec<(String, Expr)>) -> Self {
        let (unknowns, rhs) = equations.into_iter().unzip();
        FlowSystem {
            variable: variable.to_string(),
            unknowns,
            rhs,
            leftovers: Vec::new(),
            leftovers_ok: true,
            lambdas: Vec::new(),
            derivation: None,
        }
    }

    pub fn with_lambdas(mut self, lambdas: Vec<Rational>) -> Self {
        self.lambdas = lambdas;
        self
    }

    pub fn dim(&self) -> usize {
        self.unknowns.len()
    }

    pub fn rhs_of(&self, name: &str) -> Option<&Expr> {
        self.unknowns.iter().position(|u| u == name).map(|i| &self.rhs[i])
    }

    /// Right-hand sides as shown to users: the reference form where it was
    /// certified equal, the derived one otherwise.
    pub fn display_rhs(&self) -> Vec<Expr> {
        match &self.derivation {
            Some(d) if d.display.len() == self.rhs.len() => d.display.clone(),
            _ => self.rhs.clone(),
        }
    }

    /// One `du/dt = rhs` line per unknown.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (u, r) in self.unknowns.iter().zip(self.display_rhs()) {
            out.push_str(&format!("d{u}/d{} = {}\n", self.variable, r.bare()));
        }
        out
    }

    /// Map `u'(t) ↦ rhs` for substitution into frame expressions.
    pub fn substitution(&self, frame: &AnsatzFrame) -> Result<HashMap<Unknown, Expr>, TorsionError> {
        let mut expected = frame.unknowns();
        let mut have = self.unknowns.clone();
        expected.sort();
        have.sort();
        if expected != have {
            return Err(TorsionError::Closure(format!(
                "flow unknowns [{}] vs frame unknowns [{}]",
                have.join(", "),
                expected.join(", ")
            )));
        }
        if frame.flow_coordinate().is_some_and(|v| v != self.variable) {
            return Err(TorsionError::Closure(format!("flow variable `{}` is not the frame's", self.variable)));
        }
        Ok(self
            .unknowns
            .iter()
            .zip(&self.rhs)
            .map(|(u, r)| (Unknown::new(u, &self.variable, 1), r.clone()))
            .collect())
    }

    pub fn binding(&self, t: f64, y: &[f64]) -> EvalBinding {
        let mut b = EvalBinding::new().sym(&self.variable, t);
        for (u, v) in self.unknowns.iter().zip(y) {
            b.set_unknown_key(u, 0, *v);
        }
        b
    }

    pub fn eval(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, ExprError> {
        let b = self.binding(t, y);
        self.rhs.iter().map(|r| r.eval(&b)).collect()
    }

    /// Quotient denominators and bases of negative powers in the RHS.
    pub fn denominators(&self) -> Vec<Expr> {
        let mut out: Vec<Expr> = Vec::new();
        for r in &self.rhs {
            r.visit(&mut |e| {
                let d = match e.node() {
                    Node::Quot(_, d) => Some(d.clone()),
                    Node::Pow(b, p) if *p.numer() < 0 => Some(b.clone()),
                    _ => None,
                };
                if let Some(d) = d {
                    if !out.contains(&d) {
                        out.push(d);
                    }
                }
            });
        }
        out
    }
}
