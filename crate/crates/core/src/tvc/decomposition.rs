use serde::{Deserialize, Serialize};

use super::{check_curve, check_space, discrete_tvc_tail};
use crate::error::{Error, Result};
use crate::euler::{check_compatible, euler_row, ContinuousAnalysis};
use crate::objective::{eval_checked, Objective};
use crate::stochastic::{time_derivative, trapezoid, PerturbationCurve, SampleSpace, StochasticPath};

/// Both sides of the first-variation identity on a truncated horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub tprime: f64,
    pub eps: f64,
    /// Central difference in `eps` of the truncated expected objective.
    pub direct: f64,
    /// Euler rows below the order (discrete) or the bracket at 0 with its
    /// sign (continuous).
    pub boundary: f64,
    /// Euler rows from the order on (discrete) or the integral of the Euler
    /// residual against the curve (continuous).
    pub interior: f64,
    /// Tail at `T'` (discrete) or the bracket at `T'` (continuous).
    pub tail: f64,
    pub discrepancy: f64,
}

fn truncated_sum(obj: &dyn Objective, path: &StochasticPath, space: &SampleSpace, tprime: usize) -> Result<f64> {
    let n = obj.order();
    let mut total = 0.0;
    for (w, p) in space.probs().iter().enumerate() {
        for j in 0..=tprime {
            let v = eval_checked(obj, path.window_slice(j, n, w)?, j as f64, w)?;
            if v == f64::NEG_INFINITY {
                return Err(Error::domain(format!(
                    "objective is -inf at t = {j}, state {} under the perturbation",
                    w + 1
                )));
            }
            total += p * v;
        }
    }
    Ok(total)
}

/// Compares `d/d eps` of `sum_{j <= T'} E V` along `path + eps*q` with the
/// Euler rows weighted by `q` plus the tail at `T'`.
pub fn variation_decomposition_check(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    q: &PerturbationCurve,
    eps: f64,
    tprime: usize,
) -> Result<DecompositionReport> {
    check_compatible(obj, path)?;
    check_space(space, path)?;
    check_curve(path, q)?;
    path.require_discrete("discrete decomposition")?;
    let n = obj.order();
    if !(eps > 0.0) {
        return Err(Error::input("eps must be positive"));
    }
    if tprime + n > path.domain().last_index() || tprime + 1 < n {
        return Err(Error::horizon(format!(
            "T' = {tprime} needs n - 1 <= T' <= T_max - n"
        )));
    }
    let plus = crate::stochastic::perturb(path, q, eps)?;
    let minus = crate::stochastic::perturb(path, q, -eps)?;
    let direct = (truncated_sum(obj, &plus, space, tprime)? - truncated_sum(obj, &minus, space, tprime)?) / (2.0 * eps);
    let (mut boundary, mut interior) = (0.0, 0.0);
    for t in 0..=tprime {
        let mut row = 0.0;
        for (w, p) in space.probs().iter().enumerate() {
            let qs = q.path().get(t, w);
            if qs.iter().all(|v| *v == 0.0) {
                continue;
            }
            let r = euler_row(obj, path, t, w)?;
            row += p * r.iter().zip(qs).map(|(a, b)| a * b).sum::<f64>();
        }
        if t < n {
            boundary += row;
        } else {
            interior += row;
        }
    }
    let tail = discrete_tvc_tail(obj, path, space, q, tprime)?;
    Ok(DecompositionReport {
        tprime: tprime as f64,
        eps,
        direct,
        boundary,
        interior,
        tail,
        discrepancy: (direct - (boundary + interior + tail)).abs(),
    })
}

/// Continuous counterpart: `d/d eps` of `int_0^T' E v` along `x + eps*p`
/// against `int_0^T' E[euler * p] + bracket(T') - bracket(0)`. Agreement is
/// up to the O(h^2) error of the grid.
pub fn continuous_decomposition_check(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    p: &PerturbationCurve,
    eps: f64,
    tprime: f64,
) -> Result<DecompositionReport> {
    check_compatible(obj, path)?;
    check_space(space, path)?;
    check_curve(path, p)?;
    path.require_continuous("continuous decomposition")?;
    let n = obj.order();
    let dim = obj.dim();
    let domain = *path.domain();
    let h = domain.step();
    let upto = domain.index_of(tprime)?;
    let analysis = ContinuousAnalysis::new(obj, path)?;
    let mut xjet = vec![path.clone()];
    let mut pjet = vec![p.path().clone()];
    for k in 1..=n {
        xjet.push(time_derivative(path, k)?);
        pjet.push(p.derivative(k)?.into_owned());
    }
    let integral = |e: f64| -> Result<f64> {
        let mut total = 0.0;
        let mut slots = vec![0.0; (n + 1) * dim];
        for (w, prob) in space.probs().iter().enumerate() {
            let mut series = Vec::with_capacity(upto + 1);
            for idx in 0..=upto {
                for k in 0..=n {
                    let (xs, ps) = (xjet[k].get(idx, w), pjet[k].get(idx, w));
                    for i in 0..dim {
                        slots[k * dim + i] = xs[i] + e * ps[i];
                    }
                }
                let v = eval_checked(obj, &slots, domain.time_at(idx), w)?;
                if v == f64::NEG_INFINITY {
                    return Err(Error::domain(format!(
                        "objective is -inf at t = {}, state {} under the perturbation",
                        domain.time_at(idx),
                        w + 1
                    )));
                }
                series.push(v);
            }
            total += prob * trapezoid(&series, h, upto);
        }
        Ok(total)
    };
    let direct = (integral(eps)? - integral(-eps)?) / (2.0 * eps);
    let mut interior = 0.0;
    for (w, prob) in space.probs().iter().enumerate() {
        let series: Vec<f64> = (0..=upto)
            .map(|idx| {
                let e = analysis.euler_at(idx);
                e.per_state()[w].iter().zip(p.path().get(idx, w)).map(|(a, b)| a * b).sum()
            })
            .collect();
        interior += prob * trapezoid(&series, h, upto);
    }
    let boundary = -space.expectation(&analysis.bracket_at(p, 0)?)?;
    let tail = space.expectation(&analysis.bracket_at(p, upto)?)?;
    Ok(DecompositionReport {
        tprime,
        eps,
        direct,
        boundary,
        interior,
        tail,
        discrepancy: (direct - (boundary + interior + tail)).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{quadlin_continuous, quadlin_discrete, ExprObjective, ObjectiveKind};
    use crate::stochastic::TimeDomain;
    use std::collections::BTreeMap;

    #[test]
    fn euler_path_leaves_only_the_tail() {
        let (a, b, g) = ([1.0, 2.0], [0.5, 0.4], [0.25, 0.2]);
        let obj = quadlin_discrete(a.to_vec(), b.to_vec(), g.to_vec()).unwrap();
        let d = TimeDomain::discrete(20);
        let path = StochasticPath::from_fn(d, 2, |t, w| match t as usize {
            0 => a[w],
            1 => a[w] - b[w] / 2.0,
            _ => a[w] - (b[w] + g[w]) / 2.0,
        })
        .unwrap();
        let q = PerturbationCurve::step(d, 1, &[1.0, 1.0]).unwrap();
        let space = SampleSpace::uniform(2).unwrap();
        let r = variation_decomposition_check(&obj, &path, &space, &q, 1e-6, 8).unwrap();
        assert!(r.interior.abs() < 1e-12 && r.boundary.abs() < 1e-12);
        assert!((r.tail - 0.9).abs() < 1e-12);
        assert!(r.discrepancy <= 1e-8, "{r:?}");
        let zero = PerturbationCurve::zero(&path);
        let r = variation_decomposition_check(&obj, &path, &space, &zero, 1e-6, 8).unwrap();
        assert_eq!(r.discrepancy, 0.0);
    }

    #[test]
    fn nonlinear_dsl_model() {
        let consts = BTreeMap::from([("a".to_string(), vec![0.3, 0.7])]);
        let obj = ExprObjective::new("exp(-0.1*t)*(y0*y1 - a*y2^2) + sqrt(1 + y1^2)", 2, ObjectiveKind::Discrete, &consts).unwrap();
        let d = TimeDomain::discrete(15);
        let path = StochasticPath::from_fn(d, 2, |t, w| (t * 0.7 + w as f64).sin()).unwrap();
        let q = PerturbationCurve::new(
            StochasticPath::from_fn(d, 2, |t, w| (t * 1.3 - w as f64).cos()).unwrap(),
            0,
            crate::stochastic::Tail::Unrestricted,
        )
        .unwrap();
        let space = SampleSpace::new(vec![0.3, 0.7]).unwrap();
        for tp in 1..=12 {
            let r = variation_decomposition_check(&obj, &path, &space, &q, 1e-6, tp).unwrap();
            assert!(r.discrepancy <= 1e-6, "{r:?}");
        }
    }

    #[test]
    fn continuous_identity_on_the_grid() {
        let obj = quadlin_continuous(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let d = TimeDomain::continuous(6.0, 1e-3).unwrap();
        let path = StochasticPath::from_fn(d, 2, |t, w| (t + w as f64).sin()).unwrap();
        let p = PerturbationCurve::ramp(d, &[1.0, 0.5], 1.0).unwrap();
        let space = SampleSpace::uniform(2).unwrap();
        let r = continuous_decomposition_check(&obj, &path, &space, &p, 1e-6, 4.0).unwrap();
        assert!(r.discrepancy <= 1e-4, "{r:?}");
        assert!(r.boundary.abs() < 1e-8);
    }
}
