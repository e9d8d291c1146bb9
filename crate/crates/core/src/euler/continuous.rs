use std::ops::RangeInclusive;

use super::check_compatible;
use crate::error::{Error, Result};
use crate::objective::{partial_slot, Objective};
use crate::stochastic::{time_derivative, PerturbationCurve, RandomScalar, RandomVector, StochasticPath};

/// Everything the continuous engines need along one path: the jet
/// `(x, x', ..., x^(n))` and, for each slot `k`, the series
/// `s_k(t) = v_{k+1}(jet(t), t)` together with its time derivatives up to
/// order `k`.
#[derive(Debug, Clone)]
pub struct ContinuousAnalysis {
    order: usize,
    dim: usize,
    states: usize,
    len: usize,
    /// `series[k][m]` is the `m`-th time derivative of `s_k`, `m <= k`.
    series: Vec<Vec<StochasticPath>>,
}

impl ContinuousAnalysis {
    pub fn new(obj: &dyn Objective, path: &StochasticPath) -> Result<Self> {
        check_compatible(obj, path)?;
        let n = obj.order();
        let dim = obj.dim();
        let len = path.len();
        if len < 2 * n + 1 {
            return Err(Error::horizon(format!(
                "a continuous objective of order {n} needs at least {} grid points, got {len}",
                2 * n + 1
            )));
        }
        let mut jet = vec![path.clone()];
        for k in 1..=n {
            jet.push(time_derivative(path, k)?);
        }
        let domain = *path.domain();
        let mut slots = vec![0.0; (n + 1) * dim];
        let mut raw = vec![vec![0.0; path.values().len()]; n + 1];
        for w in 0..path.states() {
            for idx in 0..len {
                for (k, j) in jet.iter().enumerate() {
                    slots[k * dim..(k + 1) * dim].copy_from_slice(j.get(idx, w));
                }
                let t = domain.time_at(idx);
                for (k, out) in raw.iter_mut().enumerate() {
                    for i in 0..dim {
                        out[(w * len + idx) * dim + i] = partial_slot(obj, k, i, &slots, t, w)?;
                    }
                }
            }
        }
        let mut series = Vec::with_capacity(n + 1);
        for (k, values) in raw.into_iter().enumerate() {
            let s = StochasticPath::new(domain, path.states(), dim, values)
                .map_err(|e| Error::numerical(format!("partial series {k}: {e}")))?;
            let mut ds = vec![s];
            for m in 1..=k {
                ds.push(time_derivative(&ds[0], m)?);
            }
            series.push(ds);
        }
        Ok(Self {
            order: n,
            dim,
            states: path.states(),
            len,
            series,
        })
    }

    /// Grid indices at least `n` points away from both ends.
    pub fn interior(&self) -> RangeInclusive<usize> {
        self.order..=self.len - 1 - self.order
    }

    /// `D^m s_k` at grid index `idx`, state `w`.
    pub fn series_derivative(&self, k: usize, m: usize, idx: usize, w: usize) -> &[f64] {
        self.series[k][m].get(idx, w)
    }

    /// `sum_k (-1)^k D^k s_k` at grid index `idx`.
    pub fn euler_at(&self, idx: usize) -> RandomVector {
        RandomVector::new(
            (0..self.states)
                .map(|w| {
                    (0..self.dim)
                        .map(|i| {
                            (0..=self.order)
                                .map(|k| sign(k) * self.series[k][k].get(idx, w)[i])
                                .sum()
                        })
                        .collect()
                })
                .collect(),
        )
    }

    /// Boundary bracket at grid index `idx`, per state:
    /// `sum_{j<n} p^(j) . sum_{k=j+1}^{n} (-1)^(k-j-1) D^(k-j-1) s_k`.
    pub fn bracket_at(&self, curve: &PerturbationCurve, idx: usize) -> Result<RandomScalar> {
        let p = curve.path();
        if p.states() != self.states || p.dim() != self.dim || p.len() != self.len || p.domain().is_discrete() {
            return Err(Error::input("perturbation curve does not match the analysed path"));
        }
        let n = self.order;
        let mut out = vec![0.0; self.states];
        for j in 0..n {
            let pj = curve.derivative(j)?;
            for (w, acc) in out.iter_mut().enumerate() {
                let pv = pj.get(idx, w);
                for (i, pvi) in pv.iter().enumerate() {
                    let inner: f64 = (j + 1..=n)
                        .map(|k| sign(k - j - 1) * self.series[k][k - j - 1].get(idx, w)[i])
                        .sum();
                    *acc += pvi * inner;
                }
            }
        }
        Ok(out.into())
    }
}

fn sign(k: usize) -> f64 {
    if k % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Continuous Euler residual at time `t`, which must lie at least `n` grid
/// steps from both ends.
pub fn continuous_euler_residual(obj: &dyn Objective, path: &StochasticPath, t: f64) -> Result<RandomVector> {
    let analysis = ContinuousAnalysis::new(obj, path)?;
    let idx = path.domain().index_of(t)?;
    let interior = analysis.interior();
    if !interior.contains(&idx) {
        return Err(Error::horizon(format!(
            "t = {t} is within {} grid steps of an edge",
            obj.order()
        )));
    }
    Ok(analysis.euler_at(idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{quadlin_continuous, ExprObjective, ObjectiveKind};
    use crate::stochastic::TimeDomain;
    use std::collections::BTreeMap;

    fn quadlin() -> crate::objective::QuadLinear {
        quadlin_continuous(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap()
    }

    #[test]
    fn constant_alpha_is_stationary() {
        let d = TimeDomain::continuous(5.0, 1e-3).unwrap();
        let path = StochasticPath::constant(d, &[1.0, 2.0]).unwrap();
        let a = ContinuousAnalysis::new(&quadlin(), &path).unwrap();
        for idx in a.interior() {
            assert!(a.euler_at(idx).max_abs() <= 1e-8);
        }
    }

    #[test]
    fn linear_path_residual_is_two_t() {
        let d = TimeDomain::continuous(4.0, 1e-3).unwrap();
        let path = StochasticPath::from_fn(d, 2, |t, w| [1.0, 2.0][w] + t).unwrap();
        for t in [0.5, 1.0, 2.5] {
            let r = continuous_euler_residual(&quadlin(), &path, t).unwrap();
            for w in 0..2 {
                assert!((r.per_state()[w][0] - 2.0 * t).abs() < 1e-8);
            }
        }
        assert!(continuous_euler_residual(&quadlin(), &path, 0.001).is_err());
    }

    #[test]
    fn zero_objective() {
        let d = TimeDomain::continuous(1.0, 1e-2).unwrap();
        let path = StochasticPath::from_fn(d, 1, |t, _| t * t).unwrap();
        let z = ExprObjective::new("0", 2, ObjectiveKind::Continuous, &BTreeMap::new()).unwrap();
        assert_eq!(continuous_euler_residual(&z, &path, 0.5).unwrap().max_abs(), 0.0);
    }

    /// `v = x^2/2 + x'^2/2` has Euler residual `x - x''`, which vanishes on
    /// `e^t` and equals `2 cos t` on `cos t`.
    #[test]
    fn first_order_objective_with_derivative_terms() {
        let e = ExprObjective::new("y0^2/2 + y1^2/2", 1, ObjectiveKind::Continuous, &BTreeMap::new()).unwrap();
        let d = TimeDomain::continuous(2.0, 1e-3).unwrap();
        let exp = StochasticPath::from_fn(d, 1, |t, _| t.exp()).unwrap();
        let a = ContinuousAnalysis::new(&e, &exp).unwrap();
        for idx in [10, 1000, 1990] {
            assert!(a.euler_at(idx).max_abs() < 1e-4);
        }
        let cos = StochasticPath::from_fn(d, 1, |t, _| t.cos()).unwrap();
        let a = ContinuousAnalysis::new(&e, &cos).unwrap();
        let r = a.euler_at(1000).scalar()[0];
        assert!((r - 2.0 * 1.0_f64.cos()).abs() < 1e-4);
    }
}
