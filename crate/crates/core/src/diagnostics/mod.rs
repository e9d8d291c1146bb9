//! Numerical diagnosis of the interchange-of-limits hypotheses.
//!
//! The central object is the matrix `A(T', eps)`: the truncated first
//! variation quotient `sum_{t <= T'} E[V(y + eps q) - V(y)] / eps` in discrete
//! time, or its trapezoid integral in continuous time.

mod domination;
mod limits;

pub use domination::{domination_check, GROWTH_RATIO, DominationCell, DominationReport, DominationStatus, DominationVerdict};
pub use limits::{
    iterated_limits, linear_fit, richardson_to_zero, uniformity_verdict, IteratedLimits, LimitEstimate, LinearFit,
    UniformityReport, UniformityVerdict,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::check_compatible;
use crate::objective::{eval_checked, Objective};
use crate::stochastic::{time_derivative, PerturbationCurve, SampleSpace, StochasticPath, TimeDomain};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellStatus {
    Finite,
    /// The quotient overflowed or became NaN.
    Diverging,
    /// The perturbed path left the finite-value domain at or before `T'`.
    DomainError,
}

/// `A(T', eps)` on a grid. Rows follow `tprime_grid`, columns `eps_grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticMatrix {
    pub eps_grid: Vec<f64>,
    pub tprime_grid: Vec<f64>,
    pub values: Vec<Vec<Option<f64>>>,
    pub status: Vec<Vec<CellStatus>>,
}

impl DiagnosticMatrix {
    pub fn new(eps_grid: Vec<f64>, tprime_grid: Vec<f64>, values: Vec<Vec<Option<f64>>>) -> Result<Self> {
        check_grids(&eps_grid, &tprime_grid)?;
        if values.len() != tprime_grid.len() || values.iter().any(|r| r.len() != eps_grid.len()) {
            return Err(Error::input("matrix values do not match the grid sizes"));
        }
        let status = values
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| match v {
                        Some(x) if x.is_finite() => CellStatus::Finite,
                        Some(_) => CellStatus::Diverging,
                        None => CellStatus::DomainError,
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            eps_grid,
            tprime_grid,
            values,
            status,
        })
    }

    pub fn rows(&self) -> usize {
        self.tprime_grid.len()
    }

    pub fn cols(&self) -> usize {
        self.eps_grid.len()
    }

    /// Finite value of a cell.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row][col].filter(|v| v.is_finite())
    }

    /// Largest finite `|A|`, at least 1. Used to make tolerances relative.
    pub fn scale(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .flatten()
            .filter(|v| v.is_finite())
            .fold(1.0_f64, |m, v| m.max(v.abs()))
    }

    /// Rows are `T'`, columns are `eps`; flagged cells hold their status.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("tprime");
        for e in &self.eps_grid {
            out.push_str(&format!(",{e:e}"));
        }
        out.push('\n');
        for (r, tp) in self.tprime_grid.iter().enumerate() {
            out.push_str(&tp.to_string());
            for c in 0..self.cols() {
                match (self.status[r][c], self.values[r][c]) {
                    (CellStatus::Finite, Some(v)) => out.push_str(&format!(",{v}")),
                    (CellStatus::Diverging, _) => out.push_str(",diverging"),
                    _ => out.push_str(",domain-error"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn check_grids(eps_grid: &[f64], tprime_grid: &[f64]) -> Result<()> {
    if eps_grid.is_empty() || tprime_grid.is_empty() {
        return Err(Error::input("diagnostic grids must be non-empty"));
    }
    if eps_grid.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
        return Err(Error::input("eps grid values must be positive and finite"));
    }
    if eps_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::input("eps grid must be strictly decreasing"));
    }
    if tprime_grid.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::input("T' grid values must be non-negative and finite"));
    }
    if tprime_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("T' grid must be strictly increasing"));
    }
    Ok(())
}

/// Geometric grid from `hi` down to `lo` with `count` points.
pub fn geometric_eps_grid(hi: f64, lo: f64, count: usize) -> Result<Vec<f64>> {
    if !(hi > lo && lo > 0.0) || count < 2 {
        return Err(Error::input("eps grid needs hi > lo > 0 and at least two points"));
    }
    let ratio = (lo / hi).powf(1.0 / (count - 1) as f64);
    Ok((0..count).map(|k| if k + 1 == count { lo } else { hi * ratio.powi(k as i32) }).collect())
}

pub fn default_eps_grid() -> Vec<f64> {
    vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6]
}

/// Geometric `T'` grid from `start` to the last admissible truncation,
/// rounded to grid times and deduplicated.
pub fn default_tprime_grid(obj: &dyn Objective, domain: &TimeDomain, start: f64, count: usize) -> Result<Vec<f64>> {
    let end = match *domain {
        TimeDomain::Discrete { t_max } => t_max.checked_sub(obj.order()).map(|v| v as f64),
        TimeDomain::Continuous { t_end, .. } => Some(t_end),
    }
    .ok_or_else(|| Error::horizon("horizon is shorter than the order"))?;
    let start = start.max(domain.step()).min(end);
    let mut grid: Vec<f64> = if count < 2 || start >= end {
        vec![end]
    } else {
        let ratio = (end / start).powf(1.0 / (count - 1) as f64);
        (0..count)
            .map(|k| {
                let t = if k + 1 == count { end } else { start * ratio.powi(k as i32) };
                domain.time_at(domain.index_of_nearest(t))
            })
            .collect()
    };
    grid.dedup_by(|a, b| a <= b);
    Ok(grid)
}

/// Evaluation context shared by the grid and the domination check: the
/// jets of the path and the curve, and the base objective values.
pub(crate) struct Variation<'a> {
    obj: &'a dyn Objective,
    xjet: Vec<StochasticPath>,
    pjet: Vec<StochasticPath>,
    /// Number of time indices with a full window.
    pub(crate) len: usize,
    base: Vec<Vec<f64>>,
}

/// Outcome of one difference quotient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Quotient {
    Value(f64),
    NegInf,
}

impl<'a> Variation<'a> {
    pub(crate) fn new(obj: &'a dyn Objective, path: &StochasticPath, curve: &PerturbationCurve) -> Result<Self> {
        check_compatible(obj, path)?;
        path.check_same_shape(curve.path(), "perturbation curve")?;
        let n = obj.order();
        let (xjet, pjet, len) = if path.domain().is_discrete() {
            let len = path
                .len()
                .checked_sub(n)
                .filter(|l| *l > 0)
                .ok_or_else(|| Error::horizon("horizon is shorter than the order"))?;
            (vec![path.clone()], vec![curve.path().clone()], len)
        } else {
            let mut xjet = vec![path.clone()];
            let mut pjet = vec![curve.path().clone()];
            for k in 1..=n {
                xjet.push(time_derivative(path, k)?);
                pjet.push(curve.derivative(k)?.into_owned());
            }
            (xjet, pjet, path.len())
        };
        let mut v = Self {
            obj,
            xjet,
            pjet,
            len,
            base: Vec::new(),
        };
        let mut base = vec![vec![0.0; len]; path.states()];
        let mut buf = vec![0.0; (n + 1) * obj.dim()];
        for (w, row) in base.iter_mut().enumerate() {
            for (k, out) in row.iter_mut().enumerate() {
                *out = v.value(k, w, 0.0, &mut buf)?;
                if !out.is_finite() {
                    return Err(Error::domain(format!(
                        "objective is not finite on the unperturbed path at t = {}, state {}",
                        v.time(k),
                        w + 1
                    )));
                }
            }
        }
        v.base = base;
        Ok(v)
    }

    pub(crate) fn domain(&self) -> &TimeDomain {
        self.xjet[0].domain()
    }

    pub(crate) fn states(&self) -> usize {
        self.xjet[0].states()
    }

    pub(crate) fn time(&self, k: usize) -> f64 {
        self.domain().time_at(k)
    }

    fn value(&self, k: usize, w: usize, eps: f64, buf: &mut [f64]) -> Result<f64> {
        let n = self.obj.order();
        let dim = self.obj.dim();
        if self.domain().is_discrete() {
            for s in 0..=n {
                let (x, q) = (self.xjet[0].get(k + s, w), self.pjet[0].get(k + s, w));
                for i in 0..dim {
                    buf[s * dim + i] = x[i] + eps * q[i];
                }
            }
        } else {
            for s in 0..=n {
                let (x, p) = (self.xjet[s].get(k, w), self.pjet[s].get(k, w));
                for i in 0..dim {
                    buf[s * dim + i] = x[i] + eps * p[i];
                }
            }
        }
        eval_checked(self.obj, buf, self.time(k), w)
    }

    /// `[V(y + eps q) - V(y)] / eps` at time index `k`, state `w`.
    pub(crate) fn quotient(&self, k: usize, w: usize, eps: f64, buf: &mut [f64]) -> Result<Quotient> {
        let v = self.value(k, w, eps, buf)?;
        if v == f64::NEG_INFINITY {
            return Ok(Quotient::NegInf);
        }
        Ok(Quotient::Value((v - self.base[w][k]) / eps))
    }
}

/// Builds `A(T', eps)` for every grid cell. Columns are evaluated in
/// parallel; each is a running sum (discrete) or running trapezoid
/// (continuous) of the expected quotient, so a `-inf` at some time flags
/// every `T'` from there on.
pub fn a_grid(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    curve: &PerturbationCurve,
    eps_grid: &[f64],
    tprime_grid: &[f64],
) -> Result<DiagnosticMatrix> {
    check_grids(eps_grid, tprime_grid)?;
    if space.len() != path.states() {
        return Err(Error::input(format!(
            "sample space has {} states, path has {}",
            space.len(),
            path.states()
        )));
    }
    let var = Variation::new(obj, path, curve)?;
    let domain = *path.domain();
    let rows: Vec<usize> = tprime_grid
        .iter()
        .map(|t| {
            let k = domain.index_of(*t)?;
            if k >= var.len {
                return Err(Error::horizon(format!(
                    "T' = {t} leaves no room for the order-{} window before the horizon",
                    obj.order()
                )));
            }
            Ok(k)
        })
        .collect::<Result<_>>()?;
    let last = *rows.last().expect("grid is non-empty");
    let discrete = domain.is_discrete();
    let h = domain.step();
    let columns: Vec<Vec<Option<f64>>> = eps_grid
        .par_iter()
        .map(|&eps| -> Result<Vec<Option<f64>>> {
            let mut buf = vec![0.0; (obj.order() + 1) * obj.dim()];
            let mut running = Vec::with_capacity(last + 1);
            let mut acc = 0.0;
            let mut prev = 0.0;
            let mut dead = false;
            for k in 0..=last {
                if dead {
                    running.push(None);
                    continue;
                }
                let mut e = 0.0;
                for (w, p) in space.probs().iter().enumerate() {
                    match var.quotient(k, w, eps, &mut buf)? {
                        Quotient::Value(q) => e += p * q,
                        Quotient::NegInf => dead = true,
                    }
                }
                if dead {
                    running.push(None);
                    continue;
                }
                if discrete {
                    acc += e;
                } else if k > 0 {
                    acc += 0.5 * h * (prev + e);
                }
                prev = e;
                running.push(Some(acc));
            }
            Ok(rows.iter().map(|&k| running[k]).collect())
        })
        .collect::<Result<_>>()?;
    let values: Vec<Vec<Option<f64>>> = (0..rows.len())
        .map(|r| columns.iter().map(|c| c[r]).collect())
        .collect();
    let matrix = DiagnosticMatrix::new(eps_grid.to_vec(), tprime_grid.to_vec(), values)?;
    if matrix.status.iter().flatten().all(|s| *s == CellStatus::DomainError) {
        return Err(Error::domain(
            "every cell of the diagnostic grid left the finite-value domain",
        ));
    }
    Ok(matrix)
}
