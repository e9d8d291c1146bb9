use serde::{Deserialize, Serialize};

use super::{Quotient, Variation};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::stochastic::{PerturbationCurve, StochasticPath};

/// Grid points per decade of `eps` below `eps_bar`.
const POINTS_PER_DECADE: usize = 2;
/// Decades of `eps` examined below `eps_bar`.
const DECADES: usize = 6;
/// Relative rise between the two smallest `eps` that counts as growth.
pub const GROWTH_RATIO: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominationStatus {
    Bounded,
    GrowthDetected,
    DomainError,
}

/// Empirical bound for one `(t, state)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationCell {
    pub t: f64,
    pub state: usize,
    /// `sup |m_t(eps)|` over the grid, absent after a domain error.
    pub bound: Option<f64>,
    pub argmax_eps: Option<f64>,
    pub status: DominationStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DominationVerdict {
    BoundedOnGrid,
    GrowthDetected,
    DomainFlagged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub eps_bar: f64,
    pub eps_grid: Vec<f64>,
    pub cells: Vec<DominationCell>,
    pub verdict: DominationVerdict,
}

/// Sup of the difference quotient `m_t(eps) = [V(y + eps q) - V(y)] / eps`
/// over a geometric grid in `(0, eps_bar]`, per sampled time and state. A
/// finite sup that saturates certifies boundedness on the tested grid; a
/// sup still rising at the smallest `eps` is reported as growth.
pub fn domination_check(
    obj: &dyn Objective,
    path: &StochasticPath,
    curve: &PerturbationCurve,
    eps_bar: f64,
    sample_times: &[f64],
) -> Result<DominationReport> {
    if !(eps_bar > 0.0 && eps_bar.is_finite()) {
        return Err(Error::input("eps_bar must be positive and finite"));
    }
    let var = Variation::new(obj, path, curve)?;
    let steps = POINTS_PER_DECADE * DECADES;
    let eps_grid: Vec<f64> = (0..=steps)
        .map(|k| eps_bar * 10f64.powf(-(k as f64) / POINTS_PER_DECADE as f64))
        .collect();
    let mut buf = vec![0.0; (obj.order() + 1) * obj.dim()];
    let mut cells = Vec::with_capacity(sample_times.len() * var.states());
    for &t in sample_times {
        let k = var.domain().index_of(t)?;
        if k >= var.len {
            return Err(Error::horizon(format!(
                "t = {t} leaves no room for the order-{} window",
                obj.order()
            )));
        }
        for w in 0..var.states() {
            let mut mags = Vec::with_capacity(eps_grid.len());
            for &e in &eps_grid {
                match var.quotient(k, w, e, &mut buf)? {
                    Quotient::Value(m) => mags.push(m.abs()),
                    Quotient::NegInf => break,
                }
            }
            cells.push(if mags.len() < eps_grid.len() {
                DominationCell {
                    t,
                    state: w,
                    bound: None,
                    argmax_eps: None,
                    status: DominationStatus::DomainError,
                }
            } else {
                let (arg, bound) = mags
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, m)| if *m > best.1 { (i, *m) } else { best });
                let tail = &mags[mags.len() - 3..];
                let rising = tail.windows(2).all(|p| p[1] > p[0]) && tail[2] > tail[1] * (1.0 + GROWTH_RATIO);
                DominationCell {
                    t,
                    state: w,
                    bound: Some(bound),
                    argmax_eps: Some(eps_grid[arg]),
                    status: if rising || !bound.is_finite() {
                        DominationStatus::GrowthDetected
                    } else {
                        DominationStatus::Bounded
                    },
                }
            });
        }
    }
    let verdict = if cells.iter().any(|c| c.status == DominationStatus::DomainError) {
        DominationVerdict::DomainFlagged
    } else if cells.iter().any(|c| c.status == DominationStatus::GrowthDetected) {
        DominationVerdict::GrowthDetected
    } else {
        DominationVerdict::BoundedOnGrid
    };
    Ok(DominationReport {
        eps_bar,
        eps_grid,
        cells,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{household_log, quadlin_discrete, ExprObjective, ObjectiveKind};
    use crate::stochastic::TimeDomain;
    use std::collections::BTreeMap;

    #[test]
    fn quadratic_sup_is_at_eps_bar() {
        let obj = quadlin_discrete(vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2]).unwrap();
        let d = TimeDomain::discrete(20);
        let path = StochasticPath::from_fn(d, 2, |_, w| [1.0, 2.0][w]).unwrap();
        let q = PerturbationCurve::step(d, 1, &[1.0, 1.0]).unwrap();
        let r = domination_check(&obj, &path, &q, 0.5, &[0.0, 3.0, 10.0]).unwrap();
        assert_eq!(r.verdict, DominationVerdict::BoundedOnGrid);
        // at x = alpha with q = 1 in every slot: m = eps + beta + gamma
        let c = r.cells.iter().find(|c| c.t == 3.0 && c.state == 0).unwrap();
        assert!((c.bound.unwrap() - (0.5 + 0.75)).abs() < 1e-12);
        assert_eq!(c.argmax_eps, Some(0.5));
    }

    #[test]
    fn zero_curve_and_domain_flags() {
        let obj = household_log(0.9, 1).unwrap();
        let d = TimeDomain::discrete(10);
        let path = StochasticPath::from_fn(d, 1, |t, _| 2.0 - 0.05 * t).unwrap();
        let r = domination_check(&obj, &path, &PerturbationCurve::zero(&path), 1.0, &[2.0, 5.0]).unwrap();
        assert!(r.cells.iter().all(|c| c.bound == Some(0.0)));
        let raise = PerturbationCurve::step(d, 6, &[1.0]).unwrap();
        let r = domination_check(&obj, &path, &raise, 0.1, &[2.0, 5.0]).unwrap();
        assert_eq!(r.cells[0].status, DominationStatus::Bounded);
        assert_eq!(r.cells[1].status, DominationStatus::DomainError);
        assert_eq!(r.verdict, DominationVerdict::DomainFlagged);
    }

    #[test]
    fn kink_growth_is_flagged() {
        // sqrt(|y0|) at y0 = 0 has quotient eps^(-1/2)
        let obj = ExprObjective::new("sqrt(abs(y0))", 0, ObjectiveKind::Discrete, &BTreeMap::new()).unwrap();
        let d = TimeDomain::discrete(3);
        let path = StochasticPath::constant(d, &[0.0]).unwrap();
        let q = PerturbationCurve::step(d, 0, &[1.0]).unwrap();
        let r = domination_check(&obj, &path, &q, 1.0, &[1.0]).unwrap();
        assert_eq!(r.verdict, DominationVerdict::GrowthDetected);
        assert!(domination_check(&obj, &path, &q, 0.0, &[1.0]).is_err());
    }
}
