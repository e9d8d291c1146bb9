use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SolveSpec, System};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::stochastic::{SampleSpace, StochasticPath};

pub const MAX_FREE_VARIABLES: usize = 6;
pub const MAX_COMBINATIONS: u64 = 10_000_000;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub path: StochasticPath,
    /// `sum_{j <= T} E V` at the argmax.
    pub value: f64,
    pub summary: BruteForceSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceSummary {
    pub state_values: Vec<f64>,
    pub evaluated: u64,
    /// Combinations rejected because the objective was `-inf` there.
    pub skipped: u64,
}

/// `count` evenly spaced values from `lo` to `hi`.
pub fn grid_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// Exhaustive search over `grid[k]` for the `k`-th free variable of each
/// state, maximizing `sum_{j <= T} V`. States are independent and searched
/// in parallel. Ties keep the first combination in lexicographic order, and
/// a grid that excludes the optimum returns its best (boundary) point.
pub fn brute_force_solve(
    obj: &dyn Objective,
    spec: &SolveSpec,
    space: &SampleSpace,
    grid: &[Vec<f64>],
) -> Result<BruteForceResult> {
    let free = spec.free_variables();
    if free > MAX_FREE_VARIABLES {
        return Err(Error::input(format!(
            "{free} free variables per state exceeds the brute-force limit of {MAX_FREE_VARIABLES}"
        )));
    }
    if grid.len() != free {
        return Err(Error::input(format!(
            "brute force needs one value list per free variable ({free}), got {}",
            grid.len()
        )));
    }
    if grid.iter().any(Vec::is_empty) {
        return Err(Error::input("every free variable needs at least one grid value"));
    }
    let combos = grid
        .iter()
        .try_fold(1u64, |acc, g| acc.checked_mul(g.len() as u64))
        .filter(|c| *c <= MAX_COMBINATIONS)
        .ok_or_else(|| Error::input(format!("grid exceeds the budget of {MAX_COMBINATIONS} combinations")))?;
    if space.len() != spec.guess.states() {
        return Err(Error::input("sample space and guess disagree on the number of states"));
    }
    let guess = &spec.guess;
    let dim = guess.dim();
    let per_state = guess.len() * dim;
    let results: Vec<(Vec<f64>, f64, u64)> = (0..guess.states())
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
            let mut ys = guess.values()[w * per_state..(w + 1) * per_state].to_vec();
            let offset = sys.offset();
            let mut digits = vec![0usize; free];
            let mut best: Option<(Vec<f64>, f64)> = None;
            let mut skipped = 0;
            for _ in 0..combos {
                for (k, d) in digits.iter().enumerate() {
                    ys[offset + k] = grid[k][*d];
                }
                let v = sys.value(&ys)?;
                if v.is_finite() {
                    if best.as_ref().is_none_or(|(_, b)| v > *b) {
                        best = Some((ys.clone(), v));
                    }
                } else {
                    skipped += 1;
                }
                for k in (0..free).rev() {
                    digits[k] += 1;
                    if digits[k] < grid[k].len() {
                        break;
                    }
                    digits[k] = 0;
                }
            }
            let (ys, v) = best.ok_or_else(|| {
                Error::domain(format!("state {}: every grid combination is outside the domain", w + 1))
            })?;
            Ok((ys, v, skipped))
        })
        .collect::<Result<_>>()?;
    let mut values = Vec::with_capacity(guess.values().len());
    let mut value = 0.0;
    for ((ys, v, _), p) in results.iter().zip(space.probs()) {
        values.extend_from_slice(ys);
        value += p * v;
    }
    Ok(BruteForceResult {
        path: StochasticPath::new(*guess.domain(), guess.states(), dim, values)?,
        value,
        summary: BruteForceSummary {
            state_values: results.iter().map(|r| r.1).collect(),
            evaluated: combos * guess.states() as u64,
            skipped: results.iter().map(|r| r.2).sum(),
        },
    })
}
