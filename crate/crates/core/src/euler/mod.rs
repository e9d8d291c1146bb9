//! Euler-equation residuals.
//!
//! Discrete time: the residual at `t` is `d/dy(t)` of `V(t-n) + ... + V(t)`,
//! truncated at both ends of the grid. Continuous time: the alternating sum
//! `v1 - (v2)' + (v3)'' - ...` of total time derivatives taken along the path.

mod continuous;

pub use continuous::{continuous_euler_residual, ContinuousAnalysis};

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::objective::{partial_slot, Objective, ObjectiveKind};
use crate::stochastic::{RandomVector, SampleSpace, StochasticPath};

/// Which low indices carry an Euler condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Euler rows at every `t >= 0`, with sums truncated at `j = 0`.
    #[default]
    PaperLiteral,
    /// `y(0..k)` are pinned by initial data; Euler rows start at `t = k`.
    FixedInitial(usize),
}

impl BoundaryMode {
    pub fn first_row(self) -> usize {
        match self {
            BoundaryMode::PaperLiteral => 0,
            BoundaryMode::FixedInitial(k) => k,
        }
    }
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryMode::PaperLiteral => write!(f, "paper-literal"),
            BoundaryMode::FixedInitial(k) => write!(f, "fixed:{k}"),
        }
    }
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "paper-literal" {
            return Ok(BoundaryMode::PaperLiteral);
        }
        s.strip_prefix("fixed:")
            .and_then(|k| k.parse().ok())
            .map(BoundaryMode::FixedInitial)
            .ok_or_else(|| Error::input(format!("boundary mode `{s}`: expected `paper-literal` or `fixed:<k>`")))
    }
}

impl Serialize for BoundaryMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BoundaryMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const TOL_ANALYTIC: f64 = 1e-8;
pub const TOL_APPROX: f64 = 1e-4;

/// Default stationarity tolerance: tight for analytic partials on a
/// discrete grid, loose for finite differences or continuous grids.
pub fn default_tolerance(obj: &dyn Objective) -> f64 {
    if obj.has_analytic_partials() && obj.kind() == ObjectiveKind::Discrete {
        TOL_ANALYTIC
    } else {
        TOL_APPROX
    }
}

pub(crate) fn check_compatible(obj: &dyn Objective, path: &StochasticPath) -> Result<()> {
    let want_discrete = obj.kind() == ObjectiveKind::Discrete;
    if want_discrete != path.domain().is_discrete() {
        return Err(Error::input(format!(
            "{} is a {:?} objective but the path lives on a {} grid",
            obj.describe(),
            obj.kind(),
            if path.domain().is_discrete() { "discrete" } else { "continuous" }
        )));
    }
    if obj.dim() != path.dim() {
        return Err(Error::input(format!(
            "objective dim {} differs from path dim {}",
            obj.dim(),
            path.dim()
        )));
    }
    if let Some(m) = obj.states() {
        if m < path.states() {
            return Err(Error::input(format!(
                "objective parameters cover {m} states, path has {}",
                path.states()
            )));
        }
    }
    Ok(())
}

/// Indices `t` carrying an Euler row under `mode`: `[first_row, T_max - n]`.
pub fn admissible_rows(obj: &dyn Objective, path: &StochasticPath, mode: BoundaryMode) -> Result<RangeInclusive<usize>> {
    check_compatible(obj, path)?;
    let n = obj.order();
    let t_max = path.domain().last_index();
    if t_max < n {
        return Err(Error::horizon(format!("horizon {t_max} is shorter than the order {n}")));
    }
    if let BoundaryMode::FixedInitial(k) = mode {
        if k > n {
            return Err(Error::input(format!("fixed:{k} pins more than n = {n} initial values")));
        }
    }
    let start = mode.first_row();
    if start > t_max - n {
        return Err(Error::horizon(format!(
            "no admissible Euler rows: first row {start} exceeds T_max - n = {}",
            t_max - n
        )));
    }
    Ok(start..=t_max - n)
}

/// `d/dy(t)` of the windows `j` in `[max(0, t-n), min(t, T_max-n)]`, state `w`.
pub(crate) fn euler_row(obj: &dyn Objective, path: &StochasticPath, t: usize, w: usize) -> Result<Vec<f64>> {
    let n = obj.order();
    let dim = obj.dim();
    let last = path.domain().last_index() - n;
    let mut acc = vec![0.0; dim];
    for j in t.saturating_sub(n)..=t.min(last) {
        let window = path.window_slice(j, n, w)?;
        for (i, a) in acc.iter_mut().enumerate() {
            *a += partial_slot(obj, t - j, i, window, j as f64, w)?;
        }
    }
    Ok(acc)
}

/// Discrete Euler residual at `t`, one vector per state.
pub fn discrete_euler_residual(
    obj: &dyn Objective,
    path: &StochasticPath,
    t: usize,
    mode: BoundaryMode,
) -> Result<RandomVector> {
    let rows = admissible_rows(obj, path, mode)?;
    if !rows.contains(&t) {
        return Err(Error::horizon(format!(
            "t = {t} is outside the admissible rows {}..={} for mode {mode}",
            rows.start(),
            rows.end()
        )));
    }
    Ok(RandomVector::new(
        (0..path.states())
            .map(|w| euler_row(obj, path, t, w))
            .collect::<Result<_>>()?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EulerVerdict {
    Stationary,
    NotStationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EulerReport {
    pub kind: ObjectiveKind,
    /// Boundary mode; discrete time only.
    pub mode: Option<BoundaryMode>,
    /// Times of the rows, in order.
    pub times: Vec<f64>,
    /// `residuals[row][state][component]`.
    pub residuals: Vec<Vec<Vec<f64>>>,
    /// Expected residual per row and component.
    pub expected: Vec<Vec<f64>>,
    pub max_abs: f64,
    /// Time of the largest residual.
    pub argmax_time: f64,
    pub tolerance: f64,
    pub verdict: EulerVerdict,
    /// Discrete grid indices with no Euler row because their windows would
    /// run past the horizon.
    pub truncated_tail: Vec<usize>,
    pub analytic_partials: bool,
}

pub fn euler_report(
    obj: &dyn Objective,
    path: &StochasticPath,
    space: &SampleSpace,
    mode: BoundaryMode,
    tolerance: Option<f64>,
) -> Result<EulerReport> {
    check_compatible(obj, path)?;
    if space.len() != path.states() {
        return Err(Error::input(format!(
            "sample space has {} states, path has {}",
            space.len(),
            path.states()
        )));
    }
    let tolerance = tolerance.unwrap_or_else(|| {
        if path.domain().is_discrete() {
            default_tolerance(obj)
        } else {
            TOL_APPROX
        }
    });
    let (times, residuals, truncated_tail, mode) = if path.domain().is_discrete() {
        let rows = admissible_rows(obj, path, mode)?;
        let last = path.domain().last_index();
        let residuals = rows
            .clone()
            .map(|t| (0..path.states()).map(|w| euler_row(obj, path, t, w)).collect())
            .collect::<Result<Vec<Vec<Vec<f64>>>>>()?;
        let times: Vec<f64> = rows.clone().map(|t| t as f64).collect();
        (times, residuals, (rows.end() + 1..=last).collect(), Some(mode))
    } else {
        let analysis = ContinuousAnalysis::new(obj, path)?;
        let rows = analysis.interior();
        let residuals = rows
            .clone()
            .map(|k| analysis.euler_at(k).per_state().to_vec())
            .collect();
        let times = rows.map(|k| path.domain().time_at(k)).collect();
        (times, residuals, Vec::new(), None)
    };
    let dim = obj.dim();
    let expected = residuals
        .iter()
        .map(|row| {
            (0..dim)
                .map(|i| row.iter().zip(space.probs()).map(|(r, p)| p * r[i]).sum())
                .collect()
        })
        .collect();
    let (mut max_abs, mut argmax_time) = (0.0_f64, times.first().copied().unwrap_or(0.0));
    for (row, t) in residuals.iter().zip(&times) {
        for v in row.iter().flatten() {
            if v.abs() > max_abs {
                max_abs = v.abs();
                argmax_time = *t;
            }
        }
    }
    let verdict = if max_abs <= tolerance {
        EulerVerdict::Stationary
    } else {
        EulerVerdict::NotStationary
    };
    Ok(EulerReport {
        kind: obj.kind(),
        mode,
        times,
        residuals,
        expected,
        max_abs,
        argmax_time,
        tolerance,
        verdict,
        truncated_tail,
        analytic_partials: obj.has_analytic_partials(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{household_log, quadlin_discrete, ExprObjective};
    use crate::stochastic::TimeDomain;
    use std::collections::BTreeMap;

    /// Closed-form stationary path of the quadratic-linear model:
    /// `alpha`, then `alpha - beta/2`, then `alpha - (beta+gamma)/2`.
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
    fn mode_parsing() {
        assert_eq!("paper-literal".parse::<BoundaryMode>().unwrap(), BoundaryMode::PaperLiteral);
        assert_eq!("fixed:2".parse::<BoundaryMode>().unwrap(), BoundaryMode::FixedInitial(2));
        assert!("fixed:x".parse::<BoundaryMode>().is_err());
        assert_eq!(BoundaryMode::FixedInitial(1).to_string(), "fixed:1");
    }

    #[test]
    fn closed_form_is_stationary() {
        let path = closed_form(20);
        let q = quadlin();
        for t in 0..=18 {
            let r = discrete_euler_residual(&q, &path, t, BoundaryMode::PaperLiteral).unwrap();
            assert!(r.max_abs() <= 1e-12, "t = {t}: {r:?}");
        }
        let space = SampleSpace::uniform(2).unwrap();
        let rep = euler_report(&q, &path, &space, BoundaryMode::PaperLiteral, None).unwrap();
        assert_eq!(rep.verdict, EulerVerdict::Stationary);
        assert_eq!(rep.times.len(), 19);
        assert_eq!(rep.truncated_tail, vec![19, 20]);
    }

    #[test]
    fn bumped_entry_shows_up_in_its_row() {
        let mut path = closed_form(20);
        let y = path.scalar(5, 0);
        path.set(5, 0, 0, y + 0.1);
        let space = SampleSpace::uniform(2).unwrap();
        let rep = euler_report(&quadlin(), &path, &space, BoundaryMode::PaperLiteral, None).unwrap();
        assert_eq!(rep.verdict, EulerVerdict::NotStationary);
        assert!((rep.residuals[5][0][0] - 0.2).abs() < 1e-12);
        assert_eq!(rep.argmax_time, 5.0);
    }

    #[test]
    fn admissible_rows_by_mode() {
        let q = quadlin();
        let path = closed_form(10);
        assert_eq!(admissible_rows(&q, &path, BoundaryMode::PaperLiteral).unwrap(), 0..=8);
        assert_eq!(admissible_rows(&q, &path, BoundaryMode::FixedInitial(2)).unwrap(), 2..=8);
        assert!(admissible_rows(&q, &path, BoundaryMode::FixedInitial(3)).is_err());
        assert!(discrete_euler_residual(&q, &path, 1, BoundaryMode::FixedInitial(2)).is_err());
        assert!(discrete_euler_residual(&q, &path, 9, BoundaryMode::PaperLiteral).is_err());
        assert!(matches!(
            admissible_rows(&q, &closed_form(1), BoundaryMode::PaperLiteral),
            Err(Error::Horizon(_))
        ));
    }

    #[test]
    fn household_constant_path() {
        let h = household_log(0.9, 2).unwrap();
        let path = StochasticPath::constant(TimeDomain::discrete(12), &[1.0]).unwrap();
        let r = discrete_euler_residual(&h, &path, 5, BoundaryMode::PaperLiteral).unwrap();
        let expected = 0.9_f64.powi(3) * (-1.0 + 0.9 + 0.81);
        assert!((r.scalar()[0] - expected).abs() < 1e-12);
        let rep = euler_report(&h, &path, &SampleSpace::degenerate(), BoundaryMode::PaperLiteral, None).unwrap();
        assert_eq!(rep.verdict, EulerVerdict::NotStationary);
    }

    #[test]
    fn zero_objective_is_stationary_anywhere() {
        let z = ExprObjective::new("0", 2, ObjectiveKind::Discrete, &BTreeMap::new()).unwrap();
        let path = StochasticPath::from_fn(TimeDomain::discrete(9), 1, |t, _| t.sin() * 3.0).unwrap();
        for t in 0..=7 {
            let r = discrete_euler_residual(&z, &path, t, BoundaryMode::PaperLiteral).unwrap();
            assert_eq!(r.max_abs(), 0.0);
        }
    }
}
