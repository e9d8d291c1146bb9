//! Finite sample spaces, time grids and stochastic paths.
//!
//! Every expectation in the toolkit is an exact weighted sum over a finite
//! set of states. Continuous time is carried on a uniform grid `t_k = k*h`;
//! discrete time is the index set `0..=t_max`.

mod calculus;
mod perturbation;

pub use calculus::{fd_weights, integrate_time, time_derivative, trapezoid};
pub use perturbation::{perturb, PerturbationCurve, Smoothstep, Tail};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const PROB_SUM_TOL: f64 = 1e-12;

/// A finite probability space with states labelled `1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSpace {
    probs: Vec<f64>,
}

impl SampleSpace {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::input("sample space needs at least one state"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::input(format!("state probability {p} is not a finite nonnegative number")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_SUM_TOL {
            return Err(Error::input(format!("state probabilities sum to {total}, expected 1")));
        }
        Ok(Self { probs })
    }

    pub fn uniform(states: usize) -> Result<Self> {
        if states == 0 {
            return Err(Error::input("sample space needs at least one state"));
        }
        Self::new(vec![1.0 / states as f64; states])
    }

    pub fn degenerate() -> Self {
        Self { probs: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// State labels, 1-based.
    pub fn labels(&self) -> impl Iterator<Item = usize> {
        1..=self.probs.len()
    }

    pub fn expectation(&self, z: &RandomScalar) -> Result<f64> {
        expectation(self, z)
    }
}

/// `E z = sum_w P(w) z(w)`.
///
/// A `-inf` outcome on a state of positive mass makes the expectation `-inf`.
/// States of zero mass never contribute, whatever their value.
pub fn expectation(space: &SampleSpace, z: &RandomScalar) -> Result<f64> {
    if z.len() != space.len() {
        return Err(Error::input(format!(
            "random scalar has {} outcomes but the sample space has {} states",
            z.len(),
            space.len()
        )));
    }
    let mut acc = 0.0;
    for (p, v) in space.probs.iter().zip(z.values()) {
        if *p == 0.0 {
            continue;
        }
        if v.is_nan() || *v == f64::INFINITY {
            return Err(Error::input(format!("outcome {v} is not in [-inf, inf)")));
        }
        if *v == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        acc += p * v;
    }
    Ok(acc)
}

/// A real-valued function of the state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomScalar(Vec<f64>);

impl RandomScalar {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl From<Vec<f64>> for RandomScalar {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl std::ops::Index<usize> for RandomScalar {
    type Output = f64;
    fn index(&self, w: usize) -> &f64 {
        &self.0[w]
    }
}

/// A vector in `R^N` per state; residuals of N-dimensional problems live here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomVector(Vec<Vec<f64>>);

impl RandomVector {
    pub fn new(values: Vec<Vec<f64>>) -> Self {
        Self(values)
    }

    pub fn per_state(&self) -> &[Vec<f64>] {
        &self.0
    }

    pub fn component(&self, i: usize) -> RandomScalar {
        RandomScalar(self.0.iter().map(|v| v[i]).collect())
    }

    /// First component; the natural view for scalar problems.
    pub fn scalar(&self) -> RandomScalar {
        self.component(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.0
            .iter()
            .flatten()
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TimeDomain {
    Discrete { t_max: usize },
    Continuous { t_end: f64, h: f64 },
}

impl TimeDomain {
    pub fn discrete(t_max: usize) -> Self {
        TimeDomain::Discrete { t_max }
    }

    pub fn continuous(t_end: f64, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::input(format!("grid step h = {h} must be positive")));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::input(format!("end time {t_end} must be positive")));
        }
        let ratio = t_end / h;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::input(format!(
                "end time {t_end} is not an integer multiple of h = {h}"
            )));
        }
        Ok(TimeDomain::Continuous { t_end, h })
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, TimeDomain::Discrete { .. })
    }

    /// Number of grid points (including both ends).
    pub fn len(&self) -> usize {
        match *self {
            TimeDomain::Discrete { t_max } => t_max + 1,
            TimeDomain::Continuous { t_end, h } => (t_end / h).round() as usize + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn last_index(&self) -> usize {
        self.len() - 1
    }

    /// Grid spacing; 1 for discrete time.
    pub fn step(&self) -> f64 {
        match *self {
            TimeDomain::Discrete { .. } => 1.0,
            TimeDomain::Continuous { h, .. } => h,
        }
    }

    pub fn time_at(&self, k: usize) -> f64 {
        k as f64 * self.step()
    }

    /// Grid index of `time`; errors when `time` is off the grid or out of range.
    pub fn index_of(&self, time: f64) -> Result<usize> {
        let x = time / self.step();
        let k = x.round();
        if (x - k).abs() > 1e-9 * x.abs().max(1.0) || k < 0.0 {
            return Err(Error::input(format!("time {time} is not a grid point")));
        }
        let k = k as usize;
        if k > self.last_index() {
            return Err(Error::horizon(format!(
                "time {time} lies beyond the end of the grid ({})",
                self.time_at(self.last_index())
            )));
        }
        Ok(k)
    }

    /// Grid index closest to `time`, clamped to the grid.
    pub fn index_of_nearest(&self, time: f64) -> usize {
        ((time / self.step()).round().max(0.0) as usize).min(self.last_index())
    }

    /// Same grid up to rounding of the continuous parameters.
    pub fn same_grid(&self, other: &TimeDomain) -> bool {
        match (self, other) {
            (TimeDomain::Discrete { t_max: a }, TimeDomain::Discrete { t_max: b }) => a == b,
            (
                TimeDomain::Continuous { h: h1, .. },
                TimeDomain::Continuous { h: h2, .. },
            ) => (h1 - h2).abs() <= 1e-12 * h1.abs() && self.len() == other.len(),
            _ => false,
        }
    }
}

/// Trajectory `y(t, w)` in `R^dim`, stored state-major: `[w][k][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPath {
    domain: TimeDomain,
    states: usize,
    dim: usize,
    values: Vec<f64>,
}

impl StochasticPath {
    pub fn new(domain: TimeDomain, states: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if states == 0 || dim == 0 {
            return Err(Error::input("path needs at least one state and one dimension"));
        }
        let expected = states * domain.len() * dim;
        if values.len() != expected {
            return Err(Error::input(format!(
                "path has {} entries, expected {expected} ({states} states x {} points x {dim})",
                values.len(),
                domain.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("path entry {pos} is not finite")));
        }
        Ok(Self {
            domain,
            states,
            dim,
            values,
        })
    }

    /// Scalar path from per-state series, `rows[w][k]`.
    pub fn from_rows(domain: TimeDomain, rows: Vec<Vec<f64>>) -> Result<Self> {
        let states = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != domain.len()) {
            return Err(Error::input(format!(
                "path row has {} points, grid has {}",
                r.len(),
                domain.len()
            )));
        }
        Self::new(domain, states, 1, rows.into_iter().flatten().collect())
    }

    /// Scalar path sampled from `f(time, w)`.
    pub fn from_fn(
        domain: TimeDomain,
        states: usize,
        f: impl Fn(f64, usize) -> f64,
    ) -> Result<Self> {
        let n = domain.len();
        let mut values = Vec::with_capacity(states * n);
        for w in 0..states {
            for k in 0..n {
                values.push(f(domain.time_at(k), w));
            }
        }
        Self::new(domain, states, 1, values)
    }

    /// Scalar path constant in time, `levels[w]` per state.
    pub fn constant(domain: TimeDomain, levels: &[f64]) -> Result<Self> {
        Self::from_fn(domain, levels.len(), |_, w| levels[w])
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            values: vec![0.0; self.values.len()],
            ..self.clone()
        }
    }

    pub fn domain(&self) -> &TimeDomain {
        &self.domain
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.domain.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn offset(&self, k: usize, w: usize) -> usize {
        (w * self.domain.len() + k) * self.dim
    }

    /// `y(t_k, w)`.
    pub fn get(&self, k: usize, w: usize) -> &[f64] {
        let o = self.offset(k, w);
        &self.values[o..o + self.dim]
    }

    pub fn scalar(&self, k: usize, w: usize) -> f64 {
        self.values[self.offset(k, w)]
    }

    #[cfg(test)]
    pub(crate) fn set(&mut self, k: usize, w: usize, i: usize, v: f64) {
        let o = self.offset(k, w);
        self.values[o + i] = v;
    }

    /// The whole trajectory of state `w`, laid out `[k][i]`.
    pub fn series(&self, w: usize) -> &[f64] {
        let n = self.domain.len() * self.dim;
        &self.values[w * n..(w + 1) * n]
    }

    /// Component `i` of state `w` as a plain time series.
    pub fn component_series(&self, w: usize, i: usize) -> Vec<f64> {
        self.series(w).iter().skip(i).step_by(self.dim).copied().collect()
    }

    /// Values at grid index `k` across all states.
    pub fn at(&self, k: usize) -> RandomVector {
        RandomVector::new((0..self.states).map(|w| self.get(k, w).to_vec()).collect())
    }

    /// The `n+1` consecutive values `y(t..=t+n, w)` as one flat slice of
    /// length `(n+1)*dim`; slot `j` occupies `[j*dim..(j+1)*dim]`.
    pub fn window_slice(&self, t: usize, n: usize, w: usize) -> Result<&[f64]> {
        self.require_discrete("window")?;
        if t + n > self.domain.last_index() {
            return Err(Error::horizon(format!(
                "window [{t}, {}] runs past the horizon {}",
                t + n,
                self.domain.last_index()
            )));
        }
        let o = self.offset(t, w);
        Ok(&self.values[o..o + (n + 1) * self.dim])
    }

    /// Windows `(y(t), ..., y(t+n))` for every state.
    pub fn window(&self, t: usize, n: usize) -> Result<Vec<&[f64]>> {
        (0..self.states).map(|w| self.window_slice(t, n, w)).collect()
    }

    pub(crate) fn require_discrete(&self, op: &str) -> Result<()> {
        if self.domain.is_discrete() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!("{op} needs a discrete time domain")))
        }
    }

    pub(crate) fn require_continuous(&self, op: &str) -> Result<()> {
        if self.domain.is_discrete() {
            Err(Error::Unsupported(format!("{op} needs a continuous time domain")))
        } else {
            Ok(())
        }
    }

    pub(crate) fn same_shape(&self, other: &StochasticPath) -> bool {
        self.states == other.states && self.dim == other.dim && self.domain.same_grid(&other.domain)
    }

    pub(crate) fn check_same_shape(&self, other: &StochasticPath, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::input(format!(
                "{what}: shapes differ ({} states x {} points x {} vs {} states x {} points x {})",
                self.states,
                self.len(),
                self.dim,
                other.states,
                other.len(),
                other.dim
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expectation_examples() {
        let s = SampleSpace::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(expectation(&s, &vec![2.0, 4.0].into()).unwrap(), 3.0);
        let s = SampleSpace::degenerate();
        assert_eq!(expectation(&s, &vec![7.0].into()).unwrap(), 7.0);
        let s = SampleSpace::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(expectation(&s, &vec![0.0, 4.0].into()).unwrap(), 3.0);
    }

    #[test]
    fn expectation_rejects_mismatch_and_propagates_neg_inf() {
        let s = SampleSpace::new(vec![0.5, 0.5]).unwrap();
        assert!(matches!(expectation(&s, &vec![1.0].into()), Err(Error::Input(_))));
        let e = expectation(&s, &vec![1.0, f64::NEG_INFINITY].into()).unwrap();
        assert_eq!(e, f64::NEG_INFINITY);
        let s = SampleSpace::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(expectation(&s, &vec![1.0, f64::NEG_INFINITY].into()).unwrap(), 1.0);
    }

    #[test]
    fn sample_space_validation() {
        assert!(SampleSpace::new(vec![0.5, 0.4]).is_err());
        assert!(SampleSpace::new(vec![1.5, -0.5]).is_err());
        assert!(SampleSpace::new(vec![]).is_err());
        assert!(SampleSpace::new(vec![0.1; 10]).is_ok());
    }

    #[test]
    fn continuous_domain_needs_integral_step_count() {
        assert_eq!(TimeDomain::continuous(20.0, 1e-3).unwrap().len(), 20001);
        assert!(TimeDomain::continuous(1.0, 0.3).is_err());
        assert!(TimeDomain::continuous(1.0, 0.0).is_err());
        let d = TimeDomain::continuous(2.0, 0.5).unwrap();
        assert_eq!(d.index_of(1.5).unwrap(), 3);
        assert!(d.index_of(1.25).is_err());
        assert!(matches!(d.index_of(2.5), Err(Error::Horizon(_))));
    }

    #[test]
    fn windows() {
        let d = TimeDomain::discrete(5);
        let p = StochasticPath::from_fn(d, 2, |t, w| t + 10.0 * w as f64).unwrap();
        assert_eq!(p.window_slice(2, 0, 0).unwrap(), &[2.0]);
        assert_eq!(p.window_slice(3, 2, 1).unwrap(), &[13.0, 14.0, 15.0]);
        assert!(matches!(p.window_slice(4, 2, 0), Err(Error::Horizon(_))));
        let all = p.window(0, 5).unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[1].len(), 6);
    }

    #[test]
    fn path_rejects_non_finite() {
        let d = TimeDomain::discrete(1);
        assert!(StochasticPath::from_rows(d, vec![vec![0.0, f64::NAN]]).is_err());
        assert!(StochasticPath::from_rows(d, vec![vec![0.0]]).is_err());
    }
}
