use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FlowError, Trajectory};
use crate::expr::EvalBinding;
use crate::frames::{AnsatzFrame, FrameError};
use crate::structures::StructureKind;
use crate::torsion::{canonical_sample, symbolic_torsion, ResidualStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeSource {
    /// Values and right-hand-side derivatives stored at each sample.
    Stored,
    /// Interval midpoints: averaged values and difference quotients.
    Midpoint,
}

#[derive(Debug, Clone, Default)]
pub struct ResidualSeries {
    /// Abscissa and largest torsion coefficient at each evaluation point.
    pub points: Vec<(f64, f64)>,
    /// Largest coefficient of each torsion form over all points.
    pub per_form: Vec<f64>,
    pub stats: ResidualStats,
}

/// Torsion residuals of `kind` on `frame` along a trajectory. Base
/// coordinates other than the flow variable are drawn from the frame domain
/// with a fixed seed.
pub fn residuals_along(
    traj: &Trajectory,
    frame: &AnsatzFrame,
    kind: StructureKind,
    source: DerivativeSource,
) -> Result<ResidualSeries, FlowError> {
    let mut expected = frame.unknowns();
    let mut have = traj.unknowns.clone();
    expected.sort();
    have.sort();
    if expected != have {
        return Err(FlowError::Mismatch(format!(
            "trajectory unknowns [{}] vs frame unknowns [{}]",
            have.join(", "),
            expected.join(", ")
        )));
    }
    let frame = if traj.lambdas.is_empty() { frame.clone() } else { frame.with_lambdas(&traj.lambdas)? };
    let forms = symbolic_torsion(&frame, kind)?;
    if traj.is_empty() {
        return Ok(ResidualSeries { per_form: vec![0.0; forms.len()], ..Default::default() });
    }
    let extra: Vec<String> = frame.coframe().base().iter().filter(|c| **c != traj.variable).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);

    let evaluation: Vec<(f64, Vec<f64>, Vec<f64>)> = match source {
        DerivativeSource::Stored => traj
            .t
            .iter()
            .zip(&traj.values)
            .zip(&traj.derivatives)
            .map(|((t, v), d)| (*t, v.clone(), d.clone()))
            .collect(),
        DerivativeSource::Midpoint => (1..traj.len())
            .map(|i| {
                let dt = traj.t[i] - traj.t[i - 1];
                let (a, b) = (&traj.values[i - 1], &traj.values[i]);
                let mid = a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect();
                let diff = a.iter().zip(b).map(|(x, y)| (y - x) / dt).collect();
                (0.5 * (traj.t[i] + traj.t[i - 1]), mid, diff)
            })
            .collect(),
    };

    let mut points = Vec::with_capacity(evaluation.len());
    let mut per_form = vec![0.0f64; forms.len()];
    for (t, values, derivs) in evaluation {
        let mut b = EvalBinding::new().sym(&traj.variable, t);
        for c in &extra {
            let (lo, hi) = frame.domain().interval(c);
            b.set_sym(c, rng.gen_range(lo..=hi));
        }
        for (k, u) in traj.unknowns.iter().enumerate() {
            b.set_unknown_key(u, 0, values[k]);
            b.set_unknown_key(u, 1, derivs[k]);
        }
        let minv = frame.matrix_at(&b)?.try_inverse().ok_or(FrameError::Singular)?;
        let mut worst = 0.0f64;
        for (k, f) in forms.iter().enumerate() {
            let m = canonical_sample(f, &frame, &b, &minv)?.max_abs();
            per_form[k] = per_form[k].max(m);
            worst = worst.max(m);
        }
        points.push((t, worst));
    }
    let maxima: Vec<f64> = points.iter().map(|p| p.1).collect();
    Ok(ResidualSeries { stats: ResidualStats::from_maxima(&maxima), points, per_form })
}
