//! Change of variables from a second-order discrete objective to a
//! continuous one: `v(x, y, z, t) = V(x, x + y, x + 2y + z, t)`, so that
//! `y` and `z` play the roles of the first and second forward differences.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{fd_partial, partial_slot, CheckVerdict, Objective, ObjectiveKind, SamplePoint};

pub const TOL_CLOSED_FORM: f64 = 1e-10;
pub const TOL_FD: f64 = 1e-6;

/// `v` evaluated by substitution, with partials by the chain rule:
/// `v1 = V1 + V2 + V3`, `v2 = V2 + 2 V3`, `v3 = V3`.
#[derive(Debug, Clone)]
pub struct InducedContinuous {
    inner: Arc<dyn Objective>,
}

impl InducedContinuous {
    pub fn new(inner: Arc<dyn Objective>) -> Result<Self> {
        if inner.order() != 2 || inner.kind() != ObjectiveKind::Discrete {
            return Err(Error::Unsupported(format!(
                "the change of variables is defined for second-order discrete objectives; got order {} ({:?})",
                inner.order(),
                inner.kind()
            )));
        }
        Ok(Self { inner })
    }

    fn discrete_slots(&self, slots: &[f64]) -> Vec<f64> {
        let d = self.inner.dim();
        let (x, y, z) = (&slots[..d], &slots[d..2 * d], &slots[2 * d..3 * d]);
        let mut out = Vec::with_capacity(3 * d);
        out.extend_from_slice(x);
        out.extend((0..d).map(|i| x[i] + y[i]));
        out.extend((0..d).map(|i| x[i] + 2.0 * y[i] + z[i]));
        out
    }
}

impl Objective for InducedContinuous {
    fn order(&self) -> usize {
        2
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::Continuous
    }

    fn describe(&self) -> String {
        format!("induced from {}", self.inner.describe())
    }

    fn states(&self) -> Option<usize> {
        self.inner.states()
    }

    fn eval(&self, slots: &[f64], t: f64, w: usize) -> Result<f64> {
        self.inner.eval(&self.discrete_slots(slots), t, w)
    }

    fn analytic_partial(&self, slot: usize, comp: usize, slots: &[f64], t: f64, w: usize) -> Option<Result<f64>> {
        let s = self.discrete_slots(slots);
        let p = |k: usize| partial_slot(self.inner.as_ref(), k, comp, &s, t, w);
        Some((|| {
            Ok(match slot {
                0 => p(0)? + p(1)? + p(2)?,
                1 => p(1)? + 2.0 * p(2)?,
                2 => p(2)?,
                _ => return Err(Error::input(format!("slot {slot} out of range for order 2"))),
            })
        })())
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// A discrete objective with its induced continuous objective, and an
/// independently derived closed form when the discrete objective offers one.
#[derive(Debug, Clone)]
pub struct CorrespondencePair {
    pub discrete: Arc<dyn Objective>,
    pub continuous: Arc<dyn Objective>,
    pub closed_form: Option<Arc<dyn Objective>>,
}

pub fn discrete_to_continuous(discrete: Arc<dyn Objective>) -> Result<CorrespondencePair> {
    let continuous: Arc<dyn Objective> = Arc::new(InducedContinuous::new(discrete.clone())?);
    let closed_form = discrete.closed_form_induced().map(Arc::from);
    Ok(CorrespondencePair {
        discrete,
        continuous,
        closed_form,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialOracle {
    ClosedForm,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    /// Largest `|lhs - rhs| / max(1, |rhs|)`.
    pub max_gap: f64,
    /// Index of the sample with the largest gap.
    pub worst: Option<usize>,
    pub checked: usize,
    /// Samples where the objective is `-inf`.
    pub skipped: usize,
    pub tolerance: f64,
    pub verdict: CheckVerdict,
}

impl IdentityCheck {
    fn new(tolerance: f64) -> Self {
        Self {
            max_gap: 0.0,
            worst: None,
            checked: 0,
            skipped: 0,
            tolerance,
            verdict: CheckVerdict::Inconclusive,
        }
    }

    fn record(&mut self, sample: usize, lhs: f64, rhs: f64) {
        let gap = (lhs - rhs).abs() / rhs.abs().max(1.0);
        if self.worst.is_none() || gap > self.max_gap {
            self.max_gap = gap;
            self.worst = Some(sample);
        }
    }

    fn finish(&mut self) {
        self.verdict = if self.checked == 0 {
            CheckVerdict::Inconclusive
        } else if self.max_gap <= self.tolerance {
            CheckVerdict::Pass
        } else {
            CheckVerdict::Fail
        };
    }
}

/// Five consecutive discrete values `y(t..=t+4)` in one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub values: Vec<f64>,
    pub t: usize,
    pub state: usize,
}

/// Seeded random five-point sequences on which all three windows starting
/// at `t`, `t + 1`, `t + 2` are finite.
pub fn random_sequences(
    obj: &dyn Objective,
    seed: u64,
    count: usize,
    range: (f64, f64),
    states: usize,
    t_range: (usize, usize),
) -> Result<Vec<SequenceSample>> {
    let d = obj.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..50 * count.max(1) {
        if out.len() == count {
            break;
        }
        let values: Vec<f64> = (0..5 * d).map(|_| rng.gen_range(range.0..=range.1)).collect();
        let t = rng.gen_range(t_range.0..=t_range.1);
        let state = rng.gen_range(0..states);
        let finite = (0..3).all(|k| {
            obj.eval(&values[k * d..(k + 3) * d], (t + k) as f64, state)
                .map(f64::is_finite)
                .unwrap_or(false)
        });
        if finite {
            out.push(SequenceSample { values, t, state });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrespondenceReport {
    pub oracle: PartialOracle,
    /// `v_k` from the pair against the oracle.
    pub partials: IdentityCheck,
    /// `d/dy(t+2)` of `V(t) + V(t+1) + V(t+2)` against the difference form
    /// `v1(t+2) + (v2(t+1) - v2(t+2)) + (v3(t) - 2 v3(t+1) + v3(t+2))`.
    pub euler: IdentityCheck,
    pub verdict: CheckVerdict,
}

/// Checks the partial identities at `samples` (points `(x, y, z)` of `v`)
/// and the Euler identity along `sequences`.
pub fn correspondence_check(
    pair: &CorrespondencePair,
    samples: &[SamplePoint],
    sequences: &[SequenceSample],
) -> Result<CorrespondenceReport> {
    let v = pair.continuous.as_ref();
    let big_v = pair.discrete.as_ref();
    let d = big_v.dim();
    let (oracle, tol) = match pair.closed_form {
        Some(_) => (PartialOracle::ClosedForm, TOL_CLOSED_FORM),
        None => (PartialOracle::FiniteDifference, TOL_FD),
    };

    let mut partials = IdentityCheck::new(tol);
    'samples: for (s, p) in samples.iter().enumerate() {
        if p.slots.len() != 3 * d {
            return Err(Error::input(format!("sample {s} has {} slots, expected {}", p.slots.len(), 3 * d)));
        }
        if !v.eval(&p.slots, p.t, p.state)?.is_finite() {
            partials.skipped += 1;
            continue;
        }
        let mut pairs = Vec::with_capacity(3 * d + 1);
        if let Some(cf) = &pair.closed_form {
            pairs.push((v.eval(&p.slots, p.t, p.state)?, cf.eval(&p.slots, p.t, p.state)?));
        }
        for slot in 0..3 {
            for comp in 0..d {
                let lhs = match partial_slot(v, slot, comp, &p.slots, p.t, p.state) {
                    Ok(x) => x,
                    Err(Error::Domain(_)) => {
                        partials.skipped += 1;
                        continue 'samples;
                    }
                    Err(e) => return Err(e),
                };
                let rhs = match &pair.closed_form {
                    Some(cf) => partial_slot(cf.as_ref(), slot, comp, &p.slots, p.t, p.state),
                    None => fd_partial(v, slot, comp, &p.slots, p.t, p.state),
                };
                let rhs = match rhs {
                    Ok(x) => x,
                    Err(Error::Domain(_)) => {
                        partials.skipped += 1;
                        continue 'samples;
                    }
                    Err(e) => return Err(e),
                };
                pairs.push((lhs, rhs));
            }
        }
        partials.checked += 1;
        for (lhs, rhs) in pairs {
            partials.record(s, lhs, rhs);
        }
    }
    partials.finish();

    let euler_tol = if big_v.has_analytic_partials() { TOL_CLOSED_FORM } else { TOL_FD };
    let mut euler = IdentityCheck::new(euler_tol);
    for (s, seq) in sequences.iter().enumerate() {
        if seq.values.len() != 5 * d {
            return Err(Error::input(format!("sequence {s} needs {} values", 5 * d)));
        }
        let y = |k: usize| &seq.values[k * d..(k + 1) * d];
        let w = seq.state;
        let jet = |k: usize| -> Vec<f64> {
            let mut out = y(k).to_vec();
            out.extend((0..d).map(|i| y(k + 1)[i] - y(k)[i]));
            out.extend((0..d).map(|i| y(k + 2)[i] - 2.0 * y(k + 1)[i] + y(k)[i]));
            out
        };
        let result = (|| -> Result<Vec<(f64, f64)>> {
            let mut out = Vec::with_capacity(d);
            for i in 0..d {
                let lhs: f64 = (0..3)
                    .map(|k| {
                        let window = &seq.values[k * d..(k + 3) * d];
                        partial_slot(big_v, 2 - k, i, window, (seq.t + k) as f64, w)
                    })
                    .sum::<Result<f64>>()?;
                let vp = |slot: usize, k: usize| partial_slot(v, slot, i, &jet(k), (seq.t + k) as f64, w);
                let rhs = vp(0, 2)? + (vp(1, 1)? - vp(1, 2)?) + (vp(2, 0)? - 2.0 * vp(2, 1)? + vp(2, 2)?);
                out.push((lhs, rhs));
            }
            Ok(out)
        })();
        match result {
            Ok(pairs) => {
                euler.checked += 1;
                for (lhs, rhs) in pairs {
                    euler.record(s, lhs, rhs);
                }
            }
            Err(Error::Domain(_)) => euler.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    euler.finish();

    let verdict = match (partials.verdict, euler.verdict) {
        (CheckVerdict::Fail, _) | (_, CheckVerdict::Fail) => CheckVerdict::Fail,
        (CheckVerdict::Pass, CheckVerdict::Pass) => CheckVerdict::Pass,
        _ => CheckVerdict::Inconclusive,
    };
    Ok(CorrespondenceReport {
        oracle,
        partials,
        euler,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{quadlin_discrete, random_samples, ExprObjective};
    use std::collections::BTreeMap;

    fn run(discrete: Arc<dyn Objective>, seed: u64) -> CorrespondenceReport {
        let pair = discrete_to_continuous(discrete.clone()).unwrap();
        let pts = random_samples(pair.continuous.as_ref(), seed, 100, (-2.0, 2.0), 2, (0, 20)).unwrap();
        let seqs = random_sequences(discrete.as_ref(), seed, 100, (-2.0, 2.0), 2, (0, 20)).unwrap();
        correspondence_check(&pair, &pts, &seqs).unwrap()
    }

    #[test]
    fn quadlin_pair_passes_against_closed_form() {
        let q = quadlin_discrete(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let r = run(Arc::new(q), 11);
        assert_eq!(r.oracle, PartialOracle::ClosedForm);
        assert_eq!(r.verdict, CheckVerdict::Pass, "{r:?}");
        assert_eq!(r.partials.checked, 100);
    }

    #[test]
    fn induced_values_and_partials() {
        let q = quadlin_discrete(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let v = InducedContinuous::new(Arc::new(q)).unwrap();
        let (x, y, z) = (0.3, -0.7, 1.1);
        let want = (x - 1.0_f64).powi(2) + 0.5 * (x + y) + 0.25 * (x + 2.0 * y + z);
        assert!((v.eval(&[x, y, z], 0.0, 0).unwrap() - want).abs() < 1e-15);
        let p: Vec<f64> = (0..3)
            .map(|k| v.analytic_partial(k, 0, &[x, y, z], 0.0, 0).unwrap().unwrap())
            .collect();
        assert!((p[0] - (2.0 * (x - 1.0) + 0.75)).abs() < 1e-15);
        assert!((p[1] - 1.0).abs() < 1e-15 && (p[2] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn trivial_models() {
        let none = BTreeMap::new();
        let zero = ExprObjective::new("0", 2, ObjectiveKind::Discrete, &none).unwrap();
        let v = InducedContinuous::new(Arc::new(zero)).unwrap();
        assert_eq!(v.eval(&[1.0, 2.0, 3.0], 0.0, 0).unwrap(), 0.0);
        let x_only = ExprObjective::new("exp(y0)", 2, ObjectiveKind::Discrete, &none).unwrap();
        let v = InducedContinuous::new(Arc::new(x_only)).unwrap();
        for k in [1, 2] {
            assert_eq!(v.analytic_partial(k, 0, &[0.4, 1.0, 2.0], 0.0, 0).unwrap().unwrap(), 0.0);
        }
        let first = ExprObjective::new("y0*y1", 1, ObjectiveKind::Discrete, &none).unwrap();
        assert!(matches!(
            discrete_to_continuous(Arc::new(first)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn log_model_via_chain_rule() {
        let none = BTreeMap::new();
        let e = ExprObjective::new("ln(y0 + y1)", 2, ObjectiveKind::Discrete, &none).unwrap();
        let r = run(Arc::new(e.clone()), 5);
        assert_eq!(r.verdict, CheckVerdict::Pass, "{r:?}");
        // without the symbolic closed form the check falls back to finite differences
        let mut pair = discrete_to_continuous(Arc::new(e.clone())).unwrap();
        pair.closed_form = None;
        let pts = random_samples(pair.continuous.as_ref(), 5, 50, (0.1, 2.0), 1, (0, 5)).unwrap();
        let r = correspondence_check(&pair, &pts, &[]).unwrap();
        assert_eq!(r.oracle, PartialOracle::FiniteDifference);
        assert_eq!(r.partials.verdict, CheckVerdict::Pass, "{r:?}");
        // a point where ln is -inf is skipped, not failed
        let bad = SamplePoint {
            slots: vec![-1.0, 0.5, 0.0],
            t: 0.0,
            state: 0,
        };
        let r = correspondence_check(&pair, &[bad], &[]).unwrap();
        assert_eq!((r.partials.skipped, r.partials.verdict), (1, CheckVerdict::Inconclusive));
    }

    #[derive(Debug)]
    struct Corrupted(InducedContinuous);

    impl Objective for Corrupted {
        fn order(&self) -> usize {
            2
        }
        fn kind(&self) -> ObjectiveKind {
            ObjectiveKind::Continuous
        }
        fn describe(&self) -> String {
            "corrupted".into()
        }
        fn eval(&self, s: &[f64], t: f64, w: usize) -> Result<f64> {
            self.0.eval(s, t, w)
        }
        fn analytic_partial(&self, slot: usize, c: usize, s: &[f64], t: f64, w: usize) -> Option<Result<f64>> {
            let shift = if slot == 1 { 0.1 } else { 0.0 };
            self.0.analytic_partial(slot, c, s, t, w).map(|r| r.map(|v| v + shift))
        }
        fn has_analytic_partials(&self) -> bool {
            true
        }
    }

    #[test]
    fn injected_fault_in_v2() {
        let q: Arc<dyn Objective> =
            Arc::new(quadlin_discrete(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap());
        let mut pair = discrete_to_continuous(q.clone()).unwrap();
        pair.continuous = Arc::new(Corrupted(InducedContinuous::new(q).unwrap()));
        let pts = random_samples(pair.continuous.as_ref(), 1, 20, (-2.0, 2.0), 2, (0, 5)).unwrap();
        let r = correspondence_check(&pair, &pts, &[]).unwrap();
        assert_eq!(r.partials.verdict, CheckVerdict::Fail);
        // v2 = beta + 2 gamma is at most 0.9, so the relative gap is the raw 0.1
        assert!((r.partials.max_gap - 0.1).abs() < 1e-12);
    }
}
