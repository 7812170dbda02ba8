use std::fmt::Write as _;

use super::{FlowError, FlowSystem};
use crate::expr::{Expr, Rational};

/// Integration stops once any value exceeds this magnitude.
pub const BLOWUP_VALUE: f64 = 1e12;
/// ... or once any right-hand-side denominator falls below this magnitude.
pub const BLOWUP_DENOMINATOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepControl {
    /// Classical fourth-order Runge-Kutta with step `h`.
    Fixed { h: f64 },
    /// Dormand-Prince 5(4) with mixed absolute/relative tolerance.
    Adaptive { tol: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorMeta {
    pub method: String,
    pub control: StepControl,
    pub accepted: usize,
    pub rejected: usize,
    /// Largest accepted local error estimate relative to the tolerance.
    pub max_error_ratio: f64,
    pub truncated: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub variable: String,
    pub unknowns: Vec<String>,
    pub t: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Right-hand side at each sample.
    pub derivatives: Vec<Vec<f64>>,
    pub lambdas: Vec<Rational>,
    pub meta: Option<IntegratorMeta>,
}

impl Trajectory {
    /// Trajectory from explicit samples; derivatives by finite differences.
    pub fn from_samples(variable: &str, unknowns: &[&str], t: Vec<f64>, values: Vec<Vec<f64>>) -> Self {
        let n = t.len();
        let mut derivatives = Vec::with_capacity(n);
        for i in 0..n {
            let (a, b) = match (i.checked_sub(1), i + 1 < n) {
                (Some(p), true) => (p, i + 1),
                (None, true) => (i, i + 1),
                (Some(p), false) => (p, i),
                (None, false) => (i, i),
            };
            let dt = t[b] - t[a];
            derivatives.push(
                (0..unknowns.len())
                    .map(|k| if dt == 0.0 { 0.0 } else { (values[b][k] - values[a][k]) / dt })
                    .collect(),
            );
        }
        Trajectory {
            variable: variable.to_string(),
            unknowns: unknowns.iter().map(|s| s.to_string()).collect(),
            t,
            values,
            derivatives,
            lambdas: Vec::new(),
            meta: None,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.unknowns.iter().position(|u| u == name)?;
        Some(self.values.iter().map(|v| v[k]).collect())
    }

    pub fn last(&self) -> Option<(f64, &[f64])> {
        Some((*self.t.last()?, self.values.last()?.as_slice()))
    }

    /// Cubic Hermite interpolation between samples.
    pub fn interpolate(&self, x: f64) -> Option<Vec<f64>> {
        let n = self.t.len();
        if n == 0 || x < self.t[0] || x > self.t[n - 1] {
            return None;
        }
        if n == 1 {
            return Some(self.values[0].clone());
        }
        let i = match self.t.partition_point(|&ti| ti <= x) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        };
        let (t0, t1) = (self.t[i], self.t[i + 1]);
        let h = t1 - t0;
        let s = (x - t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        Some(
            (0..self.unknowns.len())
                .map(|k| {
                    h00 * self.values[i][k]
                        + h10 * h * self.derivatives[i][k]
                        + h01 * self.values[i + 1][k]
                        + h11 * h * self.derivatives[i + 1][k]
                })
                .collect(),
        )
    }

    /// CSV with header `t,<unknowns>,residual_max`; numbers carry 17
    /// significant digits. The residual column is empty when not supplied.
    pub fn to_csv(&self, residuals: Option<&[f64]>) -> String {
        let mut out = String::new();
        out.push('t');
        for u in &self.unknowns {
            out.push(',');
            out.push_str(u);
        }
        out.push_str(",residual_max\n");
        for (i, t) in self.t.iter().enumerate() {
            write!(out, "{t:.16e}").unwrap();
            for v in &self.values[i] {
                write!(out, ",{v:.16e}").unwrap();
            }
            out.push(',');
            if let Some(r) = residuals.and_then(|r| r.get(i)) {
                write!(out, "{r:.16e}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

struct Rhs<'a> {
    flow: &'a FlowSystem,
    denominators: Vec<Expr>,
}

impl Rhs<'_> {
    fn eval(&self, t: f64, y: &[f64]) -> Result<Vec<f64>, String> {
        let d = self.flow.eval(t, y).map_err(|e| format!("right-hand side undefined at t={t}: {e}"))?;
        if d.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite derivative at t={t}"));
        }
        Ok(d)
    }

    /// Reason to stop at state `(t, y)`, if any.
    fn blowup(&self, t: f64, y: &[f64]) -> Option<String> {
        if let Some(v) = y.iter().find(|v| !v.is_finite() || v.abs() > BLOWUP_VALUE) {
            return Some(format!("value {v:e} beyond {BLOWUP_VALUE:e} at t={t}"));
        }
        let b = self.flow.binding(t, y);
        for d in &self.denominators {
            match d.eval(&b) {
                Ok(v) if v.abs() < BLOWUP_DENOMINATOR => {
                    return Some(format!("denominator {} = {v:e} at t={t}", d.bare()));
                }
                Err(_) => return Some(format!("denominator {} undefined at t={t}", d.bare())),
                _ => {}
            }
        }
        None
    }
}

fn axpy(y: &[f64], h: f64, terms: &[(&[f64], f64)]) -> Vec<f64> {
    (0..y.len()).map(|i| y[i] + h * terms.iter().map(|(k, c)| c * k[i]).sum::<f64>()).collect()
}

fn rk4_step(rhs: &Rhs, t: f64, y: &[f64], k1: &[f64], h: f64) -> Result<Vec<f64>, String> {
    let k2 = rhs.eval(t + h / 2.0, &axpy(y, h, &[(k1, 0.5)]))?;
    let k3 = rhs.eval(t + h / 2.0, &axpy(y, h, &[(&k2, 0.5)]))?;
    let k4 = rhs.eval(t + h, &axpy(y, h, &[(&k3, 1.0)]))?;
    Ok(axpy(y, h, &[(k1, 1.0 / 6.0), (&k2, 1.0 / 3.0), (&k3, 1.0 / 3.0), (&k4, 1.0 / 6.0)]))
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand-Prince step: (5th-order solution, error vector).
fn dopri_step(rhs: &Rhs, t: f64, y: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut k: Vec<Vec<f64>> = vec![k1.to_vec()];
    for s in 1..7 {
        let terms: Vec<(&[f64], f64)> = (0..s).map(|j| (k[j].as_slice(), A[s][j])).collect();
        let ys = axpy(y, h, &terms);
        k.push(rhs.eval(t + C[s] * h, &ys)?);
    }
    let y5 = axpy(y, h, &(0..7).map(|j| (k[j].as_slice(), B5[j])).collect::<Vec<_>>());
    let err = (0..y.len()).map(|i| h * (0..7).map(|j| (B5[j] - B4[j]) * k[j][i]).sum::<f64>()).collect();
    Ok((y5, err))
}

/// Integrates `flow` from `initial` over `range`.
pub fn integrate(flow: &FlowSystem, initial: &[f64], range: (f64, f64), control: StepControl) -> Result<Trajectory, FlowError> {
    if initial.len() != flow.dim() {
        return Err(FlowError::Mismatch(format!("{} initial values for {} unknowns", initial.len(), flow.dim())));
    }
    let (t0, t1) = range;
    if !(t1 > t0) {
        return Err(FlowError::Integration(format!("empty range [{t0}, {t1}]")));
    }
    let rhs = Rhs { flow, denominators: flow.denominators() };
    if let Some(reason) = rhs.blowup(t0, initial) {
        return Err(FlowError::Integration(format!("initial point is singular: {reason}")));
    }
    let k0 = rhs.eval(t0, initial).map_err(FlowError::Integration)?;
    let mut traj = Trajectory {
        variable: flow.variable.clone(),
        unknowns: flow.unknowns.clone(),
        t: vec![t0],
        values: vec![initial.to_vec()],
        derivatives: vec![k0],
        lambdas: flow.lambdas.clone(),
        meta: None,
    };
    let mut meta = IntegratorMeta {
        method: match control {
            StepControl::Fixed { .. } => "rk4".into(),
            StepControl::Adaptive { .. } => "dopri54".into(),
        },
        control,
        accepted: 0,
        rejected: 0,
        max_error_ratio: 0.0,
        truncated: None,
    };
    let span = t1 - t0;
    match control {
        StepControl::Fixed { h } => {
            if !(h > 0.0) {
                return Err(FlowError::Integration(format!("step {h} must be positive")));
            }
            let steps = (span / h - 1e-9).ceil().max(1.0) as usize;
            for i in 1..=steps {
                let t = *traj.t.last().unwrap();
                let tn = if i == steps { t1 } else { t0 + i as f64 * h };
                let y = traj.values.last().unwrap().clone();
                let k1 = traj.derivatives.last().unwrap().clone();
                let next = rk4_step(&rhs, t, &y, &k1, tn - t).and_then(|yn| {
                    if let Some(r) = rhs.blowup(tn, &yn) {
                        return Err(r);
                    }
                    rhs.eval(tn, &yn).map(|d| (yn, d))
                });
                match next {
                    Ok((yn, d)) => {
                        traj.t.push(tn);
                        traj.values.push(yn);
                        traj.derivatives.push(d);
                        meta.accepted += 1;
                    }
                    Err(reason) => {
                        meta.truncated = Some(reason);
                        break;
                    }
                }
            }
        }
        StepControl::Adaptive { tol } => {
            if !(tol > 0.0) {
                return Err(FlowError::Integration(format!("tolerance {tol} must be positive")));
            }
            let mut h = span * 1e-3;
            let h_min = span * 1e-14;
            loop {
                let t = *traj.t.last().unwrap();
                if t >= t1 {
                    break;
                }
                h = h.min(t1 - t);
                if h < h_min {
                    meta.truncated = Some(format!("step size underflow at t={t}"));
                    break;
                }
                let y = traj.values.last().unwrap().clone();
                let k1 = traj.derivatives.last().unwrap().clone();
                let (yn, err) = match dopri_step(&rhs, t, &y, &k1, h) {
                    Ok(v) => v,
                    Err(_) => {
                        meta.rejected += 1;
                        h *= 0.25;
                        continue;
                    }
                };
                let ratio = (0..y.len())
                    .map(|i| err[i].abs() / (tol * (1.0 + y[i].abs().max(yn[i].abs()))))
                    .fold(0.0, f64::max);
                if !ratio.is_finite() || ratio > 1.0 {
                    meta.rejected += 1;
                    let f = if ratio.is_finite() { (0.9 * ratio.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
                    h *= f;
                    continue;
                }
                let tn = if t1 - (t + h) < h_min { t1 } else { t + h };
                if let Some(r) = rhs.blowup(tn, &yn) {
                    meta.truncated = Some(r);
                    break;
                }
                let d = match rhs.eval(tn, &yn) {
                    Ok(d) => d,
                    Err(r) => {
                        meta.truncated = Some(r);
                        break;
                    }
                };
                meta.max_error_ratio = meta.max_error_ratio.max(ratio);
                meta.accepted += 1;
                traj.t.push(tn);
                traj.values.push(yn);
                traj.derivatives.push(d);
                let grow = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
                h *= grow;
            }
        }
    }
    traj.meta = Some(meta);
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_expr, Workspace};

    fn decay() -> FlowSystem {
        let mut ws = Workspace::with_coordinates(&["t"]);
        ws.declare_function("y", "t").unwrap();
        FlowSystem::new("t", vec![("y".into(), parse_expr("-y", &ws).unwrap())])
    }

    #[test]
    fn rk4_is_fourth_order() {
        let f = decay();
        let err = |h: f64| {
            let tr = integrate(&f, &[1.0], (0.0, 1.0), StepControl::Fixed { h }).unwrap();
            (tr.last().unwrap().1[0] - (-1.0f64).exp()).abs()
        };
        let order = (err(0.1) / err(0.05)).log2();
        assert!(order > 3.9 && order < 4.1, "order {order}");
    }

    #[test]
    fn adaptive_meets_tolerance() {
        let tr = integrate(&decay(), &[1.0], (0.0, 3.0), StepControl::Adaptive { tol: 1e-10 }).unwrap();
        let meta = tr.meta.as_ref().unwrap();
        assert!(meta.max_error_ratio <= 1.0);
        assert!((tr.last().unwrap().1[0] - (-3.0f64).exp()).abs() < 1e-8);
        assert_eq!(tr.last().unwrap().0, 3.0);
        assert!(tr.t.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn hermite_dense_output() {
        let tr = integrate(&decay(), &[1.0], (0.0, 1.0), StepControl::Fixed { h: 0.05 }).unwrap();
        let v = tr.interpolate(0.4321).unwrap()[0];
        assert!((v - (-0.4321f64).exp()).abs() < 1e-6);
        assert!(tr.interpolate(1.5).is_none());
    }

    #[test]
    fn blowup_truncates() {
        let mut ws = Workspace::with_coordinates(&["t"]);
        ws.declare_function("y", "t").unwrap();
        let f = FlowSystem::new("t", vec![("y".into(), parse_expr("y^2", &ws).unwrap())]);
        let tr = integrate(&f, &[1.0], (0.0, 2.0), StepControl::Adaptive { tol: 1e-9 }).unwrap();
        assert!(tr.meta.as_ref().unwrap().truncated.is_some());
        assert!(*tr.t.last().unwrap() < 1.0);
        let g = FlowSystem::new("t", vec![("y".into(), parse_expr("1/y", &ws).unwrap())]);
        assert!(integrate(&g, &[0.0], (0.0, 1.0), StepControl::Fixed { h: 0.1 }).is_err());
    }

    #[test]
    fn csv_format() {
        let tr = Trajectory::from_samples("t", &["a"], vec![0.0, 0.5], vec![vec![1.0], vec![2.0]]);
        let csv = tr.to_csv(Some(&[0.0, 1e-3]));
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,a,residual_max"));
        assert_eq!(lines.next(), Some("0.0000000000000000e0,1.0000000000000000e0,0.0000000000000000e0"));
    }
}
