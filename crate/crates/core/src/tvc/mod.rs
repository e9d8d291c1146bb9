//! Transversality terms.
//!
//! Discrete time: the tail expression pairing the last `n` perturbation
//! values beyond a truncation point `T'` with the partials of the windows
//! that still reach them. Continuous time: the boundary bracket produced by
//! integrating the first variation by parts. Both are linear in the
//! perturbation.

mod decomposition;
mod kamihigashi;

pub use decomposition::{continuous_decomposition_check, variation_decomposition_check, DecompositionReport};
pub use kamihigashi::{kamihigashi_curve, RampSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::{check_compatible, ContinuousAnalysis, TOL_ANALYTIC, TOL_APPROX};
use crate::objective::{partial_slot, Objective, ObjectiveKind};
use crate::stochastic::{PerturbationCurve, RandomScalar, SampleSpace, StochasticPath};

/// Number of trailing samples the liminf estimate must leave in view.
pub const MIN_TAIL_SAMPLES: usize = 5;

fn check_curve(path: &StochasticPath, curve: &PerturbationCurve) -> Result<()> {
    path.check_same_shape(curve.path(), "perturbation curve")
}

fn check_space(space: &SampleSpace, path: &StochasticPath) -> Result<()> {
    if space.len() != path.states() {
        return Err(Error::input(format!(
            "sample space has {} states, path has {}",
            space.len(),
            path.states()
        )));
    }
    Ok(())
}

/// Per-state tail at truncation `tprime`.
pub fn discrete_tail_per_state(
    obj: &dyn Objective,
    path: &StochasticPath,
    q: &PerturbationCurve,
    tprime: usize,
) -> Result<RandomScalar> {
    check_compatible(obj, path)?;
    path.require_discrete("discrete tail")?;
    check_curve(path, q)?;
    let n = obj.order();
    if n == 0 {
        return Ok(vec![0.0; path.states()].into());
    }
    if tprime + 1 < n {
        return Err(Error::input(format!("tail needs T' >= n - 1 = {}, got {tprime}", n - 1)));
    }
    if tprime + n > path.domain().last_index() {
        return Err(Error::horizon(format!(
            "tail at T' = {tprime} reaches index {} beyond the horizon {}",
            tprime + n,
            path.domain().last_index()
        )));
    }
    let qp = q.path();
    (0..path.states())
        .map(|w| {
            let mut total = 0.0;
            for k in 1..=n {
                let s = tprime + k;
                let qs = qp.get(s, w);
                if qs.iter().all(|v| *v == 0.0) {
                    continue;
                }
                for j in (tprime + k - n)..=tprime {
                    let window = path.window_slice(j, n, w)?;
                    for (i, qi) in qs.iter().enumerate() {
                        total += partial_slot(obj, s - j, i, window, j as f64, w)? * qi;
                    }
                }
            }
            Ok(total)
        })
        .collect::<Result<Vec<_>>>()
        .map(Into::into)
}

/// Expected tail at truncation `tprime`.
pub fn discrete_tvc_tail(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    q: &PerturbationCurve,
    tprime: usize,
) -> Result<f64> {
    check_space(space, path)?;
    space.expectation(&discrete_tail_per_state(obj, path, q, tprime)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TvcVerdict {
    Satisfied,
    Violated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TvcReport {
    pub kind: ObjectiveKind,
    /// Truncation points `T'` (discrete) or horizons `T` (continuous).
    pub times: Vec<f64>,
    /// Expected tail (discrete) or `bracket(T) - bracket(0)` (continuous).
    pub values: Vec<f64>,
    /// `inf` over the values at positions `>= i`.
    pub running_inf: Vec<f64>,
    /// `sup` over the values at positions `>= i`.
    pub running_sup: Vec<f64>,
    /// Running inf at the last position leaving enough samples in view.
    pub liminf_estimate: f64,
    pub limsup_estimate: f64,
    pub tolerance: f64,
    /// `liminf <= 0` within tolerance.
    pub verdict: TvcVerdict,
    /// `liminf = 0` within tolerance.
    pub equals_zero: bool,
    /// `limsup >= 0` within tolerance.
    pub limsup_nonnegative: bool,
    /// Always set: a liminf cannot be certified on a finite horizon.
    pub finite_horizon_estimate: bool,
}

impl TvcReport {
    pub(crate) fn from_sequence(kind: ObjectiveKind, times: Vec<f64>, values: Vec<f64>, tolerance: f64) -> Result<Self> {
        let len = values.len();
        if len < MIN_TAIL_SAMPLES {
            return Err(Error::horizon(format!(
                "only {len} tail samples; at least {MIN_TAIL_SAMPLES} are needed"
            )));
        }
        let mut running_inf = values.clone();
        let mut running_sup = values.clone();
        for i in (0..len - 1).rev() {
            running_inf[i] = running_inf[i].min(running_inf[i + 1]);
            running_sup[i] = running_sup[i].max(running_sup[i + 1]);
        }
        let at = len - MIN_TAIL_SAMPLES;
        let liminf_estimate = running_inf[at];
        let limsup_estimate = running_sup[at];
        Ok(Self {
            kind,
            times,
            values,
            running_inf,
            running_sup,
            liminf_estimate,
            limsup_estimate,
            tolerance,
            verdict: if liminf_estimate <= tolerance {
                TvcVerdict::Satisfied
            } else {
                TvcVerdict::Violated
            },
            equals_zero: liminf_estimate.abs() <= tolerance,
            limsup_nonnegative: limsup_estimate >= -tolerance,
            finite_horizon_estimate: true,
        })
    }
}

/// Tail at every `T'` in `[n-1, T_max-n]` and its liminf/limsup estimates.
pub fn tvc_liminf_discrete(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    q: &PerturbationCurve,
    tolerance: Option<f64>,
) -> Result<TvcReport> {
    check_space(space, path)?;
    let n = obj.order();
    let last = path.domain().last_index();
    if last < 2 * n {
        return Err(Error::horizon(format!("horizon {last} too short for order {n}")));
    }
    let first = n.saturating_sub(1);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for tp in first..=last - n {
        times.push(tp as f64);
        values.push(discrete_tvc_tail(obj, path, space, q, tp)?);
    }
    let tol = tolerance.unwrap_or(if obj.has_analytic_partials() { TOL_ANALYTIC } else { TOL_APPROX });
    TvcReport::from_sequence(ObjectiveKind::Discrete, times, values, tol)
}

/// Expected boundary bracket at time `t`.
pub fn continuous_boundary_term(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    p: &PerturbationCurve,
    t: f64,
) -> Result<f64> {
    check_space(space, path)?;
    check_curve(path, p)?;
    let analysis = ContinuousAnalysis::new(obj, path)?;
    let idx = path.domain().index_of(t)?;
    space.expectation(&analysis.bracket_at(p, idx)?)
}

/// Default horizons for the continuous sequence: whole times inside the grid
/// interior.
pub fn default_horizons(obj: &dyn Objective, path: &StochasticPath) -> Vec<f64> {
    let d = path.domain();
    let h = d.step();
    let last = d.time_at(d.last_index()) - obj.order() as f64 * h;
    (1..).map(|k| k as f64).take_while(|t| *t <= last + 1e-9).collect()
}

/// `bracket(T) - bracket(0)` over `horizons` and its liminf/limsup estimates.
pub fn tvc_liminf_continuous(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    p: &PerturbationCurve,
    horizons: &[f64],
    tolerance: Option<f64>,
) -> Result<TvcReport> {
    check_space(space, path)?;
    check_curve(path, p)?;
    let analysis = ContinuousAnalysis::new(obj, path)?;
    let interior = analysis.interior();
    let at0 = space.expectation(&analysis.bracket_at(p, 0)?)?;
    let mut values = Vec::with_capacity(horizons.len());
    for (i, t) in horizons.iter().enumerate() {
        let idx = path.domain().index_of(*t)?;
        if !interior.contains(&idx) {
            return Err(Error::horizon(format!("horizon {t} is too close to the grid edge")));
        }
        if i > 0 && *t <= horizons[i - 1] {
            return Err(Error::input("horizons must be strictly increasing"));
        }
        values.push(space.expectation(&analysis.bracket_at(p, idx)?)? - at0);
    }
    TvcReport::from_sequence(
        ObjectiveKind::Continuous,
        horizons.to_vec(),
        values,
        tolerance.unwrap_or(TOL_APPROX),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{household_log, quadlin_continuous, quadlin_discrete};
    use crate::stochastic::TimeDomain;

    fn space() -> SampleSpace {
        SampleSpace::uniform(2).unwrap()
    }

    fn closed_form(t_max: usize) -> StochasticPath {
        let (a, b, g) = ([1.0, 2.0], [0.5, 0.4], [0.25, 0.2]);
        StochasticPath::from_fn(TimeDomain::discrete(t_max), 2, |t, w| match t as usize {
            0 => a[w],
            1 => a[w] - b[w] / 2.0,
            _ => a[w] - (b[w] + g[w]) / 2.0,
        })
        .unwrap()
    }

    fn quadlin() -> crate::objective::QuadLinear {
        quadlin_discrete(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap()
    }

    #[test]
    fn counterexample_tail_is_constant() {
        let path = closed_form(50);
        let q = PerturbationCurve::step(TimeDomain::discrete(50), 1, &[1.0, 1.0]).unwrap();
        for tp in 1..=48 {
            let v = discrete_tvc_tail(&quadlin(), &path, &space(), &q, tp).unwrap();
            assert!((v - 0.9).abs() < 1e-12, "T' = {tp}: {v}");
        }
        let rep = tvc_liminf_discrete(&quadlin(), &path, &space(), &q, None).unwrap();
        assert_eq!(rep.verdict, TvcVerdict::Violated);
        assert!((rep.liminf_estimate - 0.9).abs() < 1e-12);
        assert!(rep.limsup_nonnegative);
        assert!(!rep.equals_zero);
    }

    #[test]
    fn compact_support_tail_vanishes() {
        let path = closed_form(50);
        let q = PerturbationCurve::boxcar(TimeDomain::discrete(50), 1, 10, &[1.0, 1.0]).unwrap();
        let rep = tvc_liminf_discrete(&quadlin(), &path, &space(), &q, None).unwrap();
        for (t, v) in rep.times.iter().zip(&rep.values) {
            if *t >= 10.0 {
                assert_eq!(*v, 0.0);
            }
        }
        assert_eq!(rep.verdict, TvcVerdict::Satisfied);
        assert!(rep.equals_zero);
        let zero = PerturbationCurve::zero(&path);
        assert_eq!(discrete_tvc_tail(&quadlin(), &path, &space(), &zero, 7).unwrap(), 0.0);
    }

    #[test]
    fn running_extrema_are_monotone() {
        let rep = TvcReport::from_sequence(
            ObjectiveKind::Discrete,
            (0..8).map(f64::from).collect(),
            vec![3.0, -1.0, 2.0, 0.5, 4.0, 1.0, 2.0, 0.0],
            1e-8,
        )
        .unwrap();
        assert!(rep.running_inf.windows(2).all(|w| w[0] <= w[1]));
        assert!(rep.running_sup.windows(2).all(|w| w[0] >= w[1]));
        assert_eq!(rep.liminf_estimate, 0.0);
        assert_eq!(rep.limsup_estimate, 4.0);
        assert!(TvcReport::from_sequence(ObjectiveKind::Discrete, vec![0.0; 4], vec![0.0; 4], 1e-8).is_err());
    }

    #[test]
    fn household_tail_structure() {
        let h = household_log(0.9, 2).unwrap();
        let path = StochasticPath::from_fn(TimeDomain::discrete(14), 1, |t, _| 3.0 + 0.1 * t).unwrap();
        let tp = 8;
        let q = PerturbationCurve::step(TimeDomain::discrete(14), tp + 1, &[1.0]).unwrap();
        let c = |t: usize| {
            let y = |k: usize| 3.0 + 0.1 * k as f64;
            y(t) + y(t + 1) - y(t + 2)
        };
        let b = 0.9_f64;
        let v = discrete_tvc_tail(&h, &path, &SampleSpace::degenerate(), &q, tp).unwrap();
        // y(T'+1) meets slot 2 of window T'-1 (sign -1) and slot 1 of window
        // T' (sign +1); y(T'+2) meets slot 2 of window T' (sign -1)
        let by_hand = -b.powi(tp as i32 - 1) / c(tp - 1) + b.powi(tp as i32) / c(tp) - b.powi(tp as i32) / c(tp);
        assert!((v - by_hand).abs() < 1e-12, "{v} vs {by_hand}");
    }

    #[test]
    fn continuous_bracket_of_ramp() {
        let d = TimeDomain::continuous(6.0, 1e-3).unwrap();
        let obj = quadlin_continuous(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let path = StochasticPath::constant(d, &[1.0, 2.0]).unwrap();
        let p = PerturbationCurve::ramp(d, &[1.0, 1.0], 1.0).unwrap();
        for t in [2.0, 3.5, 5.0] {
            let b = continuous_boundary_term(&obj, &path, &space(), &p, t).unwrap();
            assert!((b - 0.45).abs() < 1e-10, "{t}: {b}");
        }
        assert!(continuous_boundary_term(&obj, &path, &space(), &p, 0.0).unwrap().abs() < 1e-8);
        let rep = tvc_liminf_continuous(&obj, &path, &space(), &p, &default_horizons(&obj, &path), None).unwrap();
        assert_eq!(rep.verdict, TvcVerdict::Violated);
        assert_eq!(rep.times, vec![1.0, 2.0, 3.0, 4.0, 5.0]);
        let zero = PerturbationCurve::zero(&path);
        let rep = tvc_liminf_continuous(&obj, &path, &space(), &zero, &[1.0, 2.0, 3.0, 4.0, 5.0], None).unwrap();
        assert_eq!(rep.verdict, TvcVerdict::Satisfied);
    }

    #[test]
    fn compact_bump_bracket_returns_to_zero() {
        let d = TimeDomain::continuous(20.0, 1e-3).unwrap();
        let obj = quadlin_continuous(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let path = StochasticPath::constant(d, &[1.0, 2.0]).unwrap();
        let p = PerturbationCurve::bump(d, &[1.0, 1.0], 10.0).unwrap();
        let horizons: Vec<f64> = (1..=19).map(f64::from).collect();
        let rep = tvc_liminf_continuous(&obj, &path, &space(), &p, &horizons, None).unwrap();
        for (t, v) in rep.times.iter().zip(&rep.values) {
            if *t >= 10.0 {
                assert!(v.abs() < 1e-12);
            }
        }
        assert_eq!(rep.verdict, TvcVerdict::Satisfied);
    }
}
