use super::Trajectory;

pub const DEFAULT_CONICAL_TOL: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct ConicalProfile {
    pub name: String,
    /// `(t, f(t)/t)` for every sample with `t > 0`.
    pub ratios: Vec<(f64, f64)>,
    /// Mean ratio over the last quartile.
    pub limit: f64,
    /// `(max − min)/|limit|` over the last quartile.
    pub spread: f64,
    pub converges: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicalReport {
    pub profiles: Vec<ConicalProfile>,
    pub conical: bool,
    pub tol: f64,
}

/// Ratios `f(t)/t` of the named profiles and whether they all settle to
/// positive limits.
pub fn conical_deviation(traj: &Trajectory, names: &[&str], tol: f64) -> ConicalReport {
    let profiles: Vec<ConicalProfile> = names
        .iter()
        .map(|name| {
            let ratios: Vec<(f64, f64)> = match traj.column(name) {
                Some(col) => traj.t.iter().zip(col).filter(|(t, _)| **t > 0.0).map(|(t, f)| (*t, f / t)).collect(),
                None => Vec::new(),
            };
            let tail = &ratios[ratios.len() * 3 / 4..];
            if tail.is_empty() {
                return ConicalProfile {
                    name: name.to_string(),
                    ratios,
                    limit: f64::NAN,
                    spread: f64::INFINITY,
                    converges: false,
                };
            }
            let limit = tail.iter().map(|r| r.1).sum::<f64>() / tail.len() as f64;
            let (lo, hi) = tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), r| (a.min(r.1), b.max(r.1)));
            let spread = if limit == 0.0 { f64::INFINITY } else { (hi - lo) / limit.abs() };
            ConicalProfile { name: name.to_string(), ratios, limit, spread, converges: spread < tol && limit > 0.0 }
        })
        .collect();
    let conical = !profiles.is_empty() && profiles.iter().all(|p| p.converges);
    ConicalReport { profiles, conical, tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn traj(f: impl Fn(f64) -> f64) -> Trajectory {
        let t: Vec<f64> = (1..=400).map(|i| i as f64 * 0.125).collect();
        let v = t.iter().map(|x| vec![f(*x)]).collect();
        Trajectory::from_samples("t", &["A"], t, v)
    }

    #[test]
    fn exact_cone() {
        let r = conical_deviation(&traj(|t| 3.0 * t), &["A"], DEFAULT_CONICAL_TOL);
        assert!(r.conical);
        assert!(r.profiles[0].ratios.iter().all(|x| (x.1 - 3.0).abs() < 1e-15));
    }

    #[test]
    fn asymptotic_cone() {
        let r = conical_deviation(&traj(|t| t + (-t).exp()), &["A"], DEFAULT_CONICAL_TOL);
        assert!(r.conical);
        assert!((r.profiles[0].limit - 1.0).abs() < 1e-12);
    }

    #[test]
    fn collapsing_direction() {
        let r = conical_deviation(&traj(|_| 1.0), &["A"], DEFAULT_CONICAL_TOL);
        assert!(!r.conical);
        assert!(r.profiles[0].limit < 0.05);
    }
}
