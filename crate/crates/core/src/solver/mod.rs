//! Finite-horizon solvers for the discrete Euler system and the
//! discrete-to-continuous change of variables for second-order objectives.
//!
//! The Newton solver targets stationarity, not maximality: the quadratic
//! counterexample is convex in each coordinate, so its Euler path is a
//! stationary point of an unbounded problem. The curvature of the reduced
//! objective at the solution is reported alongside.

mod band;
mod brute;
mod correspond;

pub use band::BandMatrix;
pub use brute::{brute_force_solve, grid_values, BruteForceResult, MAX_COMBINATIONS, MAX_FREE_VARIABLES};
pub use correspond::{
    correspondence_check, discrete_to_continuous, random_sequences, CorrespondencePair, CorrespondenceReport,
    IdentityCheck, InducedContinuous, PartialOracle, SequenceSample, TOL_CLOSED_FORM, TOL_FD,
};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::BoundaryMode;
use crate::objective::{eval_checked, partial_slot, Objective, ObjectiveKind};
use crate::stochastic::{SampleSpace, StochasticPath, TimeDomain};

pub const DEFAULT_SOLVE_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERATIONS: usize = 100;
/// Step halvings before the line search gives up.
const MAX_HALVINGS: usize = 40;

/// A finite-horizon Euler system. The guess spans `0..=T+n`; entries that
/// are not unknowns (the head in `fixed:k` mode and the tail `T+1..=T+n`)
/// are taken from it verbatim.
#[derive(Debug, Clone)]
pub struct SolveSpec {
    pub horizon: usize,
    pub boundary: BoundaryMode,
    pub guess: StochasticPath,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl SolveSpec {
    pub fn new(obj: &dyn Objective, horizon: usize, boundary: BoundaryMode, guess: StochasticPath) -> Result<Self> {
        if obj.kind() != ObjectiveKind::Discrete {
            return Err(Error::Unsupported("the Euler solver handles discrete objectives only".into()));
        }
        let n = obj.order();
        match *guess.domain() {
            TimeDomain::Discrete { t_max } if t_max == horizon + n => {}
            _ => {
                return Err(Error::input(format!(
                    "the guess must be a discrete path on 0..={} (horizon {horizon} plus order {n})",
                    horizon + n
                )))
            }
        }
        if guess.dim() != obj.dim() {
            return Err(Error::input(format!(
                "guess has dimension {}, objective expects {}",
                guess.dim(),
                obj.dim()
            )));
        }
        if let Some(s) = obj.states() {
            if s != guess.states() {
                return Err(Error::input(format!("guess has {} states, objective has {s}", guess.states())));
            }
        }
        if boundary.first_row() > horizon {
            return Err(Error::input(format!(
                "boundary mode {boundary} fixes more values than the horizon {horizon} has"
            )));
        }
        if guess.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::input("guess contains non-finite values"));
        }
        Ok(Self {
            horizon,
            boundary,
            guess,
            tolerance: DEFAULT_SOLVE_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        })
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn with_max_iterations(mut self, max: usize) -> Self {
        self.max_iterations = max;
        self
    }

    /// Number of free scalar unknowns per state.
    pub fn free_variables(&self) -> usize {
        (self.horizon + 1 - self.boundary.first_row()) * self.guess.dim()
    }
}

/// Scalar guess on `0..=t_max`: `head` pins the first values, `tail` the
/// last ones, and the gap is filled by linear interpolation. Each entry holds
/// one value per state.
pub fn interpolated_guess(t_max: usize, head: &[Vec<f64>], tail: &[Vec<f64>]) -> Result<StochasticPath> {
    let states = head
        .first()
        .or(tail.first())
        .map(Vec::len)
        .ok_or_else(|| Error::input("a guess needs at least one pinned value"))?;
    if head.iter().chain(tail).any(|v| v.len() != states) {
        return Err(Error::input("every pinned value needs one entry per state"));
    }
    if head.len() + tail.len() > t_max + 1 {
        return Err(Error::input("pinned values overlap"));
    }
    let tail_start = t_max + 1 - tail.len();
    let (a_t, a) = match head.last() {
        Some(v) => (head.len() - 1, v.clone()),
        None => (0, tail[0].clone()),
    };
    let (b_t, b) = match tail.first() {
        Some(v) => (tail_start, v.clone()),
        None => (t_max, a.clone()),
    };
    StochasticPath::from_fn(TimeDomain::discrete(t_max), states, |t, w| {
        let k = t as usize;
        if k < head.len() {
            head[k][w]
        } else if k >= tail_start {
            tail[k - tail_start][w]
        } else if b_t == a_t {
            a[w]
        } else {
            a[w] + (b[w] - a[w]) * (k - a_t) as f64 / (b_t - a_t) as f64
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Curvature {
    /// Strict local maximum of the truncated objective in the unknowns.
    NegativeDefinite,
    /// Strict local minimum.
    PositiveDefinite,
    NotDefinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSolve {
    pub state: usize,
    pub iterations: usize,
    pub residual_max: f64,
    pub curvature: Curvature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub horizon: usize,
    pub boundary: BoundaryMode,
    pub tolerance: f64,
    pub iterations: usize,
    pub residual_max: f64,
    /// `sum_{j <= T} E V` along the solution.
    pub value: f64,
    pub states: Vec<StateSolve>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub path: StochasticPath,
    pub report: SolveReport,
}

/// One state's Euler system over a flat copy of its path.
struct System<'a> {
    obj: &'a dyn Objective,
    w: usize,
    n: usize,
    dim: usize,
    horizon: usize,
    first: usize,
}

impl System<'_> {
    fn unknowns(&self) -> usize {
        (self.horizon + 1 - self.first) * self.dim
    }

    fn offset(&self) -> usize {
        self.first * self.dim
    }

    fn window<'y>(&self, ys: &'y [f64], j: usize) -> &'y [f64] {
        &ys[j * self.dim..(j + self.n + 1) * self.dim]
    }

    fn row(&self, ys: &[f64], t: usize, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        for j in t.saturating_sub(self.n)..=t.min(self.horizon) {
            let window = self.window(ys, j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += partial_slot(self.obj, t - j, i, window, j as f64, self.w)?;
            }
        }
        Ok(())
    }

    fn value(&self, ys: &[f64]) -> Result<f64> {
        (0..=self.horizon).map(|j| eval_checked(self.obj, self.window(ys, j), j as f64, self.w)).sum()
    }

    /// Residual rows, or `None` when the path leaves the finite-value domain.
    fn residual(&self, ys: &[f64]) -> Result<Option<Vec<f64>>> {
        if !self.value(ys)?.is_finite() {
            return Ok(None);
        }
        let mut f = vec![0.0; self.unknowns()];
        for t in self.first..=self.horizon {
            let k = (t - self.first) * self.dim;
            match self.row(ys, t, &mut f[k..k + self.dim]) {
                Ok(()) => {}
                Err(Error::Domain(_)) => return Ok(None),
                Err(e) => return Err(e),
            }
        }
        Ok(f.iter().all(|v| v.is_finite()).then_some(f))
    }

    /// Finite-difference Jacobian, built only on the band each unknown
    /// touches.
    fn jacobian(&self, ys: &[f64]) -> Result<BandMatrix> {
        let m = self.unknowns();
        let bw = (self.n + 1) * self.dim - 1;
        let mut jac = BandMatrix::zeros(m, bw, bw);
        let mut work = ys.to_vec();
        let mut plus = vec![0.0; self.dim];
        let mut minus = vec![0.0; self.dim];
        for c in 0..m {
            let idx = self.offset() + c;
            let s = idx / self.dim;
            let y0 = ys[idx];
            let h = 1e-5 * y0.abs().max(1.0);
            for t in s.saturating_sub(self.n).max(self.first)..=(s + self.n).min(self.horizon) {
                work[idx] = y0 + h;
                let up = self.row(&work, t, &mut plus);
                work[idx] = y0 - h;
                let down = self.row(&work, t, &mut minus);
                work[idx] = y0;
                let base = || -> Result<Vec<f64>> {
                    let mut b = vec![0.0; self.dim];
                    self.row(&work, t, &mut b)?;
                    Ok(b)
                };
                let (hi, lo, span): (&[f64], Vec<f64>, f64) = match (up, down) {
                    (Ok(()), Ok(())) => (&plus, minus.clone(), 2.0 * h),
                    (Ok(()), Err(Error::Domain(_))) => (&plus, base()?, h),
                    (Err(Error::Domain(_)), Ok(())) => {
                        let b = base()?;
                        for (i, v) in minus.iter().enumerate() {
                            let r = (t - self.first) * self.dim + i;
                            jac.set(r, c, (b[i] - v) / h);
                        }
                        continue;
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                };
                for i in 0..self.dim {
                    let r = (t - self.first) * self.dim + i;
                    jac.set(r, c, (hi[i] - lo[i]) / span);
                }
            }
        }
        Ok(jac)
    }

    fn solve(&self, mut ys: Vec<f64>, tol: f64, max_iterations: usize) -> Result<(Vec<f64>, StateSolve)> {
        let state = self.w + 1;
        let mut f = self.residual(&ys)?.ok_or_else(|| {
            Error::input(format!("the guess for state {state} is outside the objective's finite-value domain"))
        })?;
        let mut norm = max_abs(&f);
        let mut iterations = 0;
        while norm > tol {
            if iterations == max_iterations {
                return Err(Error::numerical(format!(
                    "state {state}: no convergence in {max_iterations} iterations (residual {norm:.3e})"
                )));
            }
            let neg: Vec<f64> = f.iter().map(|v| -v).collect();
            let delta = self
                .jacobian(&ys)?
                .solve(&neg)
                .map_err(|e| Error::numerical(format!("state {state}: {e}")))?;
            let mut lambda = 1.0;
            let mut accepted = None;
            for _ in 0..MAX_HALVINGS {
                let mut trial = ys.clone();
                for (k, d) in delta.iter().enumerate() {
                    trial[self.offset() + k] += lambda * d;
                }
                if let Some(ft) = self.residual(&trial)? {
                    let nt = max_abs(&ft);
                    if nt < norm {
                        accepted = Some((trial, ft, nt));
                        break;
                    }
                }
                lambda *= 0.5;
            }
            let (trial, ft, nt) = accepted.ok_or_else(|| {
                Error::numerical(format!(
                    "state {state}: no step keeps the path in the domain and reduces the residual {norm:.3e}"
                ))
            })?;
            ys = trial;
            f = ft;
            norm = nt;
            iterations += 1;
        }
        let curvature = if self.unknowns() == 0 {
            Curvature::NotDefinite
        } else {
            let jac = self.jacobian(&ys)?;
            if jac.is_definite(-1.0) {
                Curvature::NegativeDefinite
            } else if jac.is_definite(1.0) {
                Curvature::PositiveDefinite
            } else {
                Curvature::NotDefinite
            }
        };
        Ok((
            ys,
            StateSolve {
                state: self.w,
                iterations,
                residual_max: norm,
                curvature,
            },
        ))
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Damped Newton on the Euler rows `first_row..=T`, one independent system
/// per state solved in parallel.
pub fn newton_euler_solve(obj: &dyn Objective, spec: &SolveSpec, space: &SampleSpace) -> Result<Solution> {
    let guess = &spec.guess;
    if space.len() != guess.states() {
        return Err(Error::input(format!(
            "sample space has {} states, guess has {}",
            space.len(),
            guess.states()
        )));
    }
    let dim = guess.dim();
    let per_state = guess.len() * dim;
    let solved: Vec<(Vec<f64>, StateSolve)> = (0..guess.states())
        .into_par_iter()
        .map(|w| {
            let sys = System {
                obj,
                w,
                n: obj.order(),
                dim,
                horizon: spec.horizon,
                first: spec.boundary.first_row(),
            };
            sys.solve(
                guess.values()[w * per_state..(w + 1) * per_state].to_vec(),
                spec.tolerance,
                spec.max_iterations,
            )
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(guess.values().len());
    let mut value = 0.0;
    for ((ys, _), (w, p)) in solved.iter().zip(space.probs().iter().enumerate()) {
        let sys = System {
            obj,
            w,
            n: obj.order(),
            dim,
            horizon: spec.horizon,
            first: spec.boundary.first_row(),
        };
        value += p * sys.value(ys)?;
        values.extend_from_slice(ys);
    }
    let path = StochasticPath::new(*guess.domain(), guess.states(), dim, values)?;
    let states: Vec<StateSolve> = solved.into_iter().map(|(_, s)| s).collect();
    Ok(Solution {
        path,
        report: SolveReport {
            horizon: spec.horizon,
            boundary: spec.boundary,
            tolerance: spec.tolerance,
            iterations: states.iter().map(|s| s.iterations).max().unwrap_or(0),
            residual_max: states.iter().fold(0.0, |m, s| m.max(s.residual_max)),
            value,
            states,
        },
    })
}

/// `sum_{j <= T} E V(j)` along a path on `0..=T+n`.
pub fn truncated_value(obj: &dyn Objective, path: &StochasticPath, space: &SampleSpace, horizon: usize) -> Result<f64> {
    let n = obj.order();
    let mut total = 0.0;
    for (w, p) in space.probs().iter().enumerate() {
        for j in 0..=horizon {
            total += p * eval_checked(obj, path.window_slice(j, n, w)?, j as f64, w)?;
        }
    }
    Ok(total)
}
