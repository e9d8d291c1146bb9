//! Grid calculus: finite-difference time derivatives and trapezoid quadrature.

use super::{RandomScalar, StochasticPath};
use crate::error::{Error, Result};

/// Finite-difference weights for the `order`-th derivative at `x0` over the
/// nodes `xs` (Fornberg's recursion).
pub fn fd_weights(order: usize, x0: f64, xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order, "need more nodes than the derivative order");
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[order]).collect()
}

/// Stencils for one derivative order on a grid of `len` points: a shared
/// centred stencil for the interior and one-sided stencils near each edge.
/// All are second-order accurate.
pub(crate) struct Stencils {
    order: usize,
    len: usize,
    half: usize,
    central: Vec<f64>,
    edge_len: usize,
    left: Vec<Vec<f64>>,
    right: Vec<Vec<f64>>,
}

impl Stencils {
    pub(crate) fn new(order: usize, len: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::input("derivative order must be at least 1"));
        }
        if len < 2 * order + 1 {
            return Err(Error::input(format!(
                "a derivative of order {order} needs at least {} grid points, got {len}",
                2 * order + 1
            )));
        }
        let width = 2 * ((order + 1) / 2) + 1;
        let half = width / 2;
        let nodes: Vec<f64> = (0..width).map(|j| j as f64 - half as f64).collect();
        let central = fd_weights(order, 0.0, &nodes);
        let edge_len = order + 2;
        let left = (0..half)
            .map(|i| {
                let xs: Vec<f64> = (0..edge_len).map(|j| j as f64 - i as f64).collect();
                fd_weights(order, 0.0, &xs)
            })
            .collect();
        let right = (0..half)
            .map(|back| {
                // point len-1-back, nodes are the last edge_len grid points
                let xs: Vec<f64> = (0..edge_len)
                    .map(|j| (j as f64 - (edge_len - 1) as f64) + back as f64)
                    .collect();
                fd_weights(order, 0.0, &xs)
            })
            .collect();
        Ok(Self {
            order,
            len,
            half,
            central,
            edge_len,
            left,
            right,
        })
    }

    /// Derivative at point `i` of a series accessed through `f`.
    pub(crate) fn apply_at(&self, i: usize, h: f64, f: impl Fn(usize) -> f64) -> f64 {
        let scale = h.powi(self.order as i32);
        let acc: f64 = if i < self.half {
            self.left[i].iter().enumerate().map(|(j, w)| w * f(j)).sum()
        } else if i + self.half >= self.len {
            let back = self.len - 1 - i;
            let start = self.len - self.edge_len;
            self.right[back]
                .iter()
                .enumerate()
                .map(|(j, w)| w * f(start + j))
                .sum()
        } else {
            let start = i - self.half;
            self.central
                .iter()
                .enumerate()
                .map(|(j, w)| w * f(start + j))
                .sum()
        };
        acc / scale
    }
}

/// `k`-th time derivative of a continuous-time path, second-order accurate
/// everywhere: centred stencils in the interior and one-sided stencils at the
/// two edges.
pub fn time_derivative(path: &StochasticPath, k: usize) -> Result<StochasticPath> {
    path.require_continuous("time_derivative")?;
    let n = path.len();
    let stencils = Stencils::new(k, n)?;
    let h = path.domain().step();
    let dim = path.dim();
    let mut out = vec![0.0; path.values().len()];
    for w in 0..path.states() {
        let series = path.series(w);
        let base = w * n * dim;
        for i in 0..dim {
            for idx in 0..n {
                out[base + idx * dim + i] = stencils.apply_at(idx, h, |j| series[j * dim + i]);
            }
        }
    }
    StochasticPath::new(*path.domain(), path.states(), dim, out)
        .map_err(|e| Error::numerical(format!("derivative stencil produced non-finite values: {e}")))
}

/// Composite trapezoid rule over the first `upto + 1` samples of `values`.
pub fn trapezoid(values: &[f64], h: f64, upto: usize) -> f64 {
    if upto == 0 {
        return 0.0;
    }
    let inner: f64 = values[1..upto].iter().sum();
    h * (0.5 * (values[0] + values[upto]) + inner)
}

/// `int_0^{up_to} series(t, w) dt` per state, by the trapezoid rule.
pub fn integrate_time(series: &StochasticPath, up_to: f64) -> Result<RandomScalar> {
    series.require_continuous("integrate_time")?;
    if series.dim() != 1 {
        return Err(Error::input("integrate_time expects a scalar series"));
    }
    let k = series.domain().index_of(up_to)?;
    let h = series.domain().step();
    Ok((0..series.states())
        .map(|w| trapezoid(series.series(w), h, k))
        .collect::<Vec<_>>()
        .into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stochastic::TimeDomain;

    fn grid(t_end: f64, h: f64) -> TimeDomain {
        TimeDomain::continuous(t_end, h).unwrap()
    }

    #[test]
    fn classic_weights() {
        let w = fd_weights(1, 0.0, &[-1.0, 0.0, 1.0]);
        assert!((w[0] + 0.5).abs() < 1e-15 && w[1].abs() < 1e-15 && (w[2] - 0.5).abs() < 1e-15);
        let w = fd_weights(2, 0.0, &[-1.0, 0.0, 1.0]);
        assert_eq!(w, vec![1.0, -2.0, 1.0]);
        let w = fd_weights(1, 0.0, &[0.0, 1.0, 2.0]);
        assert!((w[0] + 1.5).abs() < 1e-15 && (w[1] - 2.0).abs() < 1e-15 && (w[2] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn derivative_of_square() {
        let d = grid(1.0, 1e-3);
        let p = StochasticPath::from_fn(d, 1, |t, _| t * t).unwrap();
        let dp = time_derivative(&p, 1).unwrap();
        let err = (1..d.last_index())
            .map(|k| (dp.scalar(k, 0) - 2.0 * d.time_at(k)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "max interior error {err}");
    }

    #[test]
    fn constant_has_zero_derivatives() {
        let d = grid(1.0, 0.01);
        let p = StochasticPath::constant(d, &[3.5, -1.0]).unwrap();
        for k in 1..=4 {
            let dp = time_derivative(&p, k).unwrap();
            assert!(dp.values().iter().all(|v| v.abs() < 1e-6), "order {k}");
        }
    }

    #[test]
    fn second_derivative_of_sine() {
        let d = grid(3.0, 1e-3);
        let p = StochasticPath::from_fn(d, 1, |t, _| t.sin()).unwrap();
        let dp = time_derivative(&p, 2).unwrap();
        let err = (0..d.len())
            .map(|k| (dp.scalar(k, 0) + d.time_at(k).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-5, "max error {err}");
    }

    #[test]
    fn derivative_preconditions() {
        let d = grid(0.3, 0.1);
        let p = StochasticPath::constant(d, &[1.0]).unwrap();
        assert!(time_derivative(&p, 2).is_err());
        let disc = StochasticPath::constant(TimeDomain::discrete(5), &[1.0]).unwrap();
        assert!(matches!(time_derivative(&disc, 1), Err(Error::Unsupported(_))));
    }

    #[test]
    fn integrals() {
        let d = grid(3.0, 1e-3);
        let one = StochasticPath::constant(d, &[1.0, 1.0]).unwrap();
        let r = integrate_time(&one, 2.0).unwrap();
        assert!(r.values().iter().all(|v| (v - 2.0).abs() < 1e-12));
        let lin = StochasticPath::from_fn(d, 1, |t, _| t).unwrap();
        assert!((integrate_time(&lin, 1.0).unwrap()[0] - 0.5).abs() < 1e-6);
        assert!(integrate_time(&lin, 1.0005).is_err());
    }
}
