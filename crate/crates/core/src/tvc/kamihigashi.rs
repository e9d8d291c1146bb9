use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stochastic::{time_derivative, PerturbationCurve, Smoothstep, StochasticPath, Tail};

/// Smooth ramp from 0 at `t = 0` to its level at `ramp_end`, realised with
/// the quintic smoothstep. Its value and first two derivatives vanish at 0,
/// which covers objectives of order up to 3.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSpec {
    pub ramp_end: f64,
    /// Order `n` of the objective the curve is meant for.
    pub order: usize,
}

impl Default for RampSpec {
    fn default() -> Self {
        Self {
            ramp_end: 1.0,
            order: 2,
        }
    }
}

/// The curve `p(t, w) = a(t) * x(t, w)` with `a` ramping from 0 to `level`,
/// so that perturbing along it rescales the candidate path itself.
pub fn kamihigashi_curve(path: &StochasticPath, level: f64, ramp: RampSpec) -> Result<PerturbationCurve> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::input(format!("ramp level must lie in (0, 1), got {level}")));
    }
    kamihigashi_curve_unchecked(path, level, ramp)
}

/// As [`kamihigashi_curve`] without the range check on `level`.
pub(crate) fn kamihigashi_curve_unchecked(path: &StochasticPath, level: f64, ramp: RampSpec) -> Result<PerturbationCurve> {
    path.require_continuous("kamihigashi curve")?;
    if !(1..=Smoothstep::HEAD).contains(&ramp.order) {
        return Err(Error::Unsupported(format!(
            "the smoothstep ramp supports objectives of order 1..={}, got {}",
            Smoothstep::HEAD,
            ramp.order
        )));
    }
    if !(ramp.ramp_end > 0.0) {
        return Err(Error::input("ramp end must be positive"));
    }
    let domain = *path.domain();
    let r = ramp.ramp_end;
    let a = |m: usize, t: f64| level * Smoothstep::derivative(t / r, m) / r.powi(m as i32);
    let max_order = (1..=3).take_while(|k| path.len() > 2 * k).last().unwrap_or(0);
    let mut x = vec![path.clone()];
    for k in 1..=max_order {
        x.push(time_derivative(path, k)?);
    }
    let dim = path.dim();
    let curve_derivative = |k: usize| {
        let mut values = vec![0.0; path.values().len()];
        for w in 0..path.states() {
            for idx in 0..path.len() {
                let t = domain.time_at(idx);
                for i in 0..dim {
                    let mut acc = 0.0;
                    for m in 0..=k {
                        acc += binomial(k, m) * a(m, t) * x[k - m].get(idx, w)[i];
                    }
                    values[(w * path.len() + idx) * dim + i] = acc;
                }
            }
        }
        StochasticPath::new(domain, path.states(), dim, values)
    };
    let p = curve_derivative(0)?;
    let derivatives = (1..=max_order).map(curve_derivative).collect::<Result<Vec<_>>>()?;
    PerturbationCurve::with_derivatives(p, ramp.order, Tail::Unrestricted, derivatives)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::quadlin_continuous;
    use crate::stochastic::{SampleSpace, TimeDomain};
    use crate::tvc::continuous_boundary_term;

    fn grid() -> TimeDomain {
        TimeDomain::continuous(6.0, 1e-3).unwrap()
    }

    #[test]
    fn constant_path_gives_scaled_constant() {
        let path = StochasticPath::constant(grid(), &[2.0, 3.0]).unwrap();
        let p = kamihigashi_curve(&path, 0.5, RampSpec::default()).unwrap();
        for idx in [1000, 3000, 6000] {
            assert!((p.path().scalar(idx, 0) - 1.0).abs() < 1e-15);
            assert!((p.path().scalar(idx, 1) - 1.5).abs() < 1e-15);
        }
        assert_eq!(p.path().scalar(0, 0), 0.0);
    }

    #[test]
    fn level_out_of_range() {
        let path = StochasticPath::constant(grid(), &[1.0]).unwrap();
        for bad in [0.0, 1.0, -0.2, 1.5] {
            assert!(kamihigashi_curve(&path, bad, RampSpec::default()).is_err());
        }
        let disc = StochasticPath::constant(TimeDomain::discrete(5), &[1.0]).unwrap();
        assert!(kamihigashi_curve(&disc, 0.5, RampSpec::default()).is_err());
    }

    #[test]
    fn analytic_derivatives_match_leibniz_on_curved_path() {
        let path = StochasticPath::from_fn(grid(), 1, |t, _| 1.0 + t * t).unwrap();
        let p = kamihigashi_curve(&path, 0.5, RampSpec::default()).unwrap();
        let d1 = p.derivative(1).unwrap();
        // t >= 1: p = 0.5 (1 + t^2), p' = t
        let idx = 2500;
        assert!((d1.scalar(idx, 0) - 2.5).abs() < 1e-6);
    }

    #[test]
    fn bracket_scales_with_level() {
        let obj = quadlin_continuous(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let space = SampleSpace::uniform(2).unwrap();
        let path = StochasticPath::constant(grid(), &[1.0, 2.0]).unwrap();
        let half = kamihigashi_curve(&path, 0.5, RampSpec::default()).unwrap();
        let full = kamihigashi_curve_unchecked(&path, 1.0, RampSpec::default()).unwrap();
        for t in [1.0, 2.0, 4.5] {
            let a = continuous_boundary_term(&obj, &path, &space, &half, t).unwrap();
            let b = continuous_boundary_term(&obj, &path, &space, &full, t).unwrap();
            assert!((a - 0.5 * b).abs() < 1e-10);
        }
        // along x = alpha the bracket at T >= 1 is level * E[alpha beta]
        let v = continuous_boundary_term(&obj, &path, &space, &half, 3.0).unwrap();
        assert!((v - 0.5 * (0.5 * 1.0 * 0.5 + 0.5 * 2.0 * 0.4)).abs() < 1e-10);
    }
}
