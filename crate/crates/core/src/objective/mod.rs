//! Reduced-form objectives of order `n`.
//!
//! A discrete objective reads the window `(y(t), ..., y(t+n))`; a continuous
//! one reads the jet `(x, x', ..., x^(n))`. Both are handed to [`Objective`]
//! as one flat slot vector of length `(n+1)*dim`, slot `k` occupying
//! `[k*dim..(k+1)*dim]`.

mod builtin;
mod dsl;

pub use builtin::{household_log, quadlin_continuous, quadlin_discrete, HeadConvention, HouseholdLog, QuadLinear};
pub use dsl::ExprObjective;

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Discrete,
    Continuous,
}

pub trait Objective: Debug + Send + Sync {
    fn order(&self) -> usize;

    fn dim(&self) -> usize {
        1
    }

    fn kind(&self) -> ObjectiveKind;

    /// Short human-readable description for reports.
    fn describe(&self) -> String;

    /// Number of states the parameters are defined for, if restricted.
    fn states(&self) -> Option<usize> {
        None
    }

    /// Value in `[-inf, inf)`.
    fn eval(&self, slots: &[f64], t: f64, w: usize) -> Result<f64>;

    /// Analytic partial in slot `slot`, component `comp`, when available.
    fn analytic_partial(&self, _slot: usize, _comp: usize, _slots: &[f64], _t: f64, _w: usize) -> Option<Result<f64>> {
        None
    }

    fn has_analytic_partials(&self) -> bool {
        false
    }

    /// An independently derived form of `v(x, y, z) = V(x, x+y, x+2y+z)` for
    /// second-order discrete objectives, when one is known in closed form.
    fn closed_form_induced(&self) -> Option<Box<dyn Objective>> {
        None
    }
}

fn check_slots(obj: &dyn Objective, slots: &[f64]) -> Result<()> {
    let want = (obj.order() + 1) * obj.dim();
    if slots.len() != want {
        return Err(Error::input(format!(
            "objective of order {} and dim {} takes {want} slot values, got {}",
            obj.order(),
            obj.dim(),
            slots.len()
        )));
    }
    Ok(())
}

/// Relative step for finite-difference slot partials.
pub fn fd_step(x: f64) -> f64 {
    1e-6 * x.abs().max(1.0)
}

/// Central finite difference of `obj` in one slot component, falling back to
/// a one-sided difference when one neighbour evaluates to `-inf`.
pub fn fd_partial(obj: &dyn Objective, slot: usize, comp: usize, slots: &[f64], t: f64, w: usize) -> Result<f64> {
    let idx = slot * obj.dim() + comp;
    let x = slots[idx];
    let h = fd_step(x);
    let mut probe = slots.to_vec();
    let mut at = |v: f64| {
        probe[idx] = v;
        obj.eval(&probe, t, w)
    };
    let hi = at(x + h)?;
    let lo = at(x - h)?;
    let mid = at(x)?;
    match (hi.is_finite(), lo.is_finite()) {
        (true, true) => Ok((hi - lo) / (2.0 * h)),
        (true, false) if mid.is_finite() => Ok((hi - mid) / h),
        (false, true) if mid.is_finite() => Ok((mid - lo) / h),
        _ => Err(Error::domain(format!(
            "objective is -inf next to slot {slot} value {x} at t = {t}, state {}",
            w + 1
        ))),
    }
}

/// `dV/d(slot, comp)`: analytic when the objective provides it, otherwise a
/// finite difference. A point where the objective is `-inf` is a domain error.
pub fn partial_slot(obj: &dyn Objective, slot: usize, comp: usize, slots: &[f64], t: f64, w: usize) -> Result<f64> {
    check_slots(obj, slots)?;
    if slot > obj.order() || comp >= obj.dim() {
        return Err(Error::input(format!(
            "slot {slot}/component {comp} out of range for order {} and dim {}",
            obj.order(),
            obj.dim()
        )));
    }
    let v = obj.eval(slots, t, w)?;
    if v == f64::NEG_INFINITY {
        return Err(Error::domain(format!(
            "objective is -inf at t = {t}, state {}; partials undefined",
            w + 1
        )));
    }
    match obj.analytic_partial(slot, comp, slots, t, w) {
        Some(r) => r,
        None => fd_partial(obj, slot, comp, slots, t, w),
    }
}

/// Value checked against the slot count.
pub fn eval_checked(obj: &dyn Objective, slots: &[f64], t: f64, w: usize) -> Result<f64> {
    check_slots(obj, slots)?;
    obj.eval(slots, t, w)
}

/// One evaluation point for a gradient check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub slots: Vec<f64>,
    pub t: f64,
    pub state: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CheckVerdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheckReport {
    /// Largest `|analytic - fd| / max(1, |fd|)` over all points and slots.
    pub max_gap: f64,
    /// `(sample index, slot, component)` where the largest gap occurred.
    pub worst: Option<(usize, usize, usize)>,
    pub checked: usize,
    /// Points skipped because the objective is `-inf` there.
    pub skipped: usize,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
}

pub const GRADIENT_TOL: f64 = 1e-6;

/// Compares analytic slot partials with central finite differences.
pub fn gradient_check(obj: &dyn Objective, samples: &[SamplePoint]) -> Result<GradientCheckReport> {
    if !obj.has_analytic_partials() {
        return Err(Error::Unsupported(format!(
            "{} has no analytic partials to check",
            obj.describe()
        )));
    }
    let mut max_gap = 0.0_f64;
    let mut worst = None;
    let mut checked = 0;
    let mut skipped = 0;
    for (s, p) in samples.iter().enumerate() {
        check_slots(obj, &p.slots)?;
        if !obj.eval(&p.slots, p.t, p.state)?.is_finite() {
            skipped += 1;
            continue;
        }
        let mut usable = true;
        let mut gaps = Vec::new();
        for slot in 0..=obj.order() {
            for comp in 0..obj.dim() {
                let fd = match fd_partial(obj, slot, comp, &p.slots, p.t, p.state) {
                    Ok(v) => v,
                    Err(Error::Domain(_)) => {
                        usable = false;
                        break;
                    }
                    Err(e) => return Err(e),
                };
                let an = obj
                    .analytic_partial(slot, comp, &p.slots, p.t, p.state)
                    .expect("objective advertises analytic partials")?;
                gaps.push(((an - fd).abs() / fd.abs().max(1.0), slot, comp));
            }
        }
        if !usable {
            skipped += 1;
            continue;
        }
        checked += 1;
        for (gap, slot, comp) in gaps {
            if gap > max_gap || worst.is_none() {
                max_gap = max_gap.max(gap);
                worst = Some((s, slot, comp));
            }
        }
    }
    let verdict = if checked == 0 {
        CheckVerdict::Inconclusive
    } else if max_gap <= GRADIENT_TOL {
        CheckVerdict::Pass
    } else {
        CheckVerdict::Fail
    };
    Ok(GradientCheckReport {
        max_gap,
        worst,
        checked,
        skipped,
        tolerance: GRADIENT_TOL,
        verdict,
    })
}

/// Seeded random evaluation points with slot values uniform in `[lo, hi]`,
/// keeping only points where the objective is finite. Gives up after
/// `50 * count` draws.
pub fn random_samples(
    obj: &dyn Objective,
    seed: u64,
    count: usize,
    range: (f64, f64),
    states: usize,
    t_range: (usize, usize),
) -> Result<Vec<SamplePoint>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (obj.order() + 1) * obj.dim();
    let mut out = Vec::with_capacity(count);
    for _ in 0..50 * count.max(1) {
        if out.len() == count {
            break;
        }
        let slots: Vec<f64> = (0..width).map(|_| rng.gen_range(range.0..=range.1)).collect();
        let t = rng.gen_range(t_range.0..=t_range.1) as f64;
        let state = rng.gen_range(0..states);
        if obj.eval(&slots, t, state).map(f64::is_finite).unwrap_or(false) {
            out.push(SamplePoint { slots, t, state });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug)]
    struct Cubic;

    impl Objective for Cubic {
        fn order(&self) -> usize {
            1
        }
        fn kind(&self) -> ObjectiveKind {
            ObjectiveKind::Discrete
        }
        fn describe(&self) -> String {
            "cubic".into()
        }
        fn eval(&self, s: &[f64], _: f64, _: usize) -> Result<f64> {
            Ok(s[0].powi(3) + s[0] * s[1])
        }
    }

    #[test]
    fn fd_partial_of_cubic() {
        let s = [2.0, 3.0];
        assert!((partial_slot(&Cubic, 0, 0, &s, 0.0, 0).unwrap() - 15.0).abs() < 1e-6);
        assert!((partial_slot(&Cubic, 1, 0, &s, 0.0, 0).unwrap() - 2.0).abs() < 1e-6);
        assert!(partial_slot(&Cubic, 2, 0, &s, 0.0, 0).is_err());
        assert!(partial_slot(&Cubic, 0, 0, &[1.0], 0.0, 0).is_err());
    }

    #[test]
    fn one_sided_difference_near_the_log_boundary() {
        #[derive(Debug)]
        struct Log;
        impl Objective for Log {
            fn order(&self) -> usize {
                0
            }
            fn kind(&self) -> ObjectiveKind {
                ObjectiveKind::Discrete
            }
            fn describe(&self) -> String {
                "log".into()
            }
            fn eval(&self, s: &[f64], _: f64, _: usize) -> Result<f64> {
                Ok(if s[0] > 0.0 { s[0].ln() } else { f64::NEG_INFINITY })
            }
        }
        // x - h <= 0 < x: only the forward neighbour is finite
        let x = 5e-7;
        let d = partial_slot(&Log, 0, 0, &[x], 0.0, 0).unwrap();
        assert!(d > 0.0 && d.is_finite());
        assert!(matches!(partial_slot(&Log, 0, 0, &[0.0], 0.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn gradient_check_needs_analytic_partials() {
        assert!(matches!(gradient_check(&Cubic, &[]), Err(Error::Unsupported(_))));
    }
}
