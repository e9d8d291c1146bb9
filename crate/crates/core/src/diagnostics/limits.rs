use serde::{Deserialize, Serialize};

use super::DiagnosticMatrix;

/// Minimum points per axis before any limit is estimated.
pub const MIN_AXIS_POINTS: usize = 4;
/// A slope counts as growth when it exceeds this many standard errors.
pub const SLOPE_SIGMAS: f64 = 10.0;
/// Relative floor below which a fitted change over the `T'` span is noise.
const SLOPE_FLOOR: f64 = 1e-9;
/// Relative tolerance for agreement of limits and the deviation profile.
pub const UNIFORM_TOL: f64 = 1e-6;
/// Highest polynomial degree used when extrapolating to `eps = 0`.
const MAX_EXTRAPOLATION_DEGREE: usize = 3;

/// Ordinary least squares `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Infinite with fewer than three points.
    pub slope_stderr: f64,
    pub residual_rms: f64,
    pub points: usize,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len().min(ys.len());
    let nf = n as f64;
    let mx = xs[..n].iter().sum::<f64>() / nf;
    let my = ys[..n].iter().sum::<f64>() / nf;
    let sxx: f64 = xs[..n].iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs[..n].iter().zip(&ys[..n]).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let sse: f64 = xs[..n]
        .iter()
        .zip(&ys[..n])
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let slope_stderr = if n > 2 && sxx > 0.0 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    LinearFit {
        slope,
        intercept,
        slope_stderr,
        residual_rms: (sse / nf).sqrt(),
        points: n,
    }
}

/// Polynomial extrapolation of `ys(xs)` to `x = 0` by Neville's scheme, with
/// `xs` decreasing toward zero. Returns the tableau entry whose change from
/// its neighbours is smallest, and that change as the error estimate.
pub fn richardson_to_zero(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len().min(ys.len());
    match n {
        0 => return (f64::NAN, f64::INFINITY),
        1 => return (ys[0], f64::INFINITY),
        _ => {}
    }
    let mut table: Vec<Vec<f64>> = ys[..n].iter().map(|y| vec![*y]).collect();
    let mut best = (ys[n - 1], f64::INFINITY);
    for i in 1..n {
        for j in 1..=i.min(MAX_EXTRAPOLATION_DEGREE) {
            let (xl, xr) = (xs[i - j], xs[i]);
            let p = (xl * table[i][j - 1] - xr * table[i - 1][j - 1]) / (xl - xr);
            let err = (p - table[i][j - 1]).abs().max((p - table[i - 1][j - 1]).abs());
            table[i].push(p);
            if err < best.1 {
                best = (p, err);
            }
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LimitEstimate {
    Finite { value: f64, error: f64 },
    Diverges,
    Inconclusive { reason: String },
}

impl LimitEstimate {
    pub fn value(&self) -> Option<f64> {
        match self {
            LimitEstimate::Finite { value, .. } => Some(*value),
            _ => None,
        }
    }

    fn inconclusive(reason: impl Into<String>) -> Self {
        LimitEstimate::Inconclusive { reason: reason.into() }
    }
}

/// Limit along increasing `T'` from a linear fit over the trailing half of
/// the points. A significant slope means divergence; otherwise the last
/// value is the estimate and its change from the previous one the error.
fn along_tprime(ts: &[f64], ys: &[f64], scale: f64) -> (LimitEstimate, Option<LinearFit>) {
    if ts.len() < MIN_AXIS_POINTS {
        return (
            LimitEstimate::inconclusive(format!("fewer than {MIN_AXIS_POINTS} finite points along T'")),
            None,
        );
    }
    let from = ts.len() - (ts.len().div_ceil(2)).max(3);
    let (tt, ty) = (&ts[from..], &ys[from..]);
    let fit = linear_fit(tt, ty);
    let span = tt[tt.len() - 1] - tt[0];
    if growth_is_significant(&fit, span, scale) {
        return (LimitEstimate::Diverges, Some(fit));
    }
    let diffs: Vec<f64> = ty.windows(2).map(|w| w[1] - w[0]).collect();
    let sign_changes = diffs.windows(2).filter(|d| d[0] * d[1] < 0.0).count();
    let amplitude = diffs.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    if sign_changes >= 2 && amplitude > UNIFORM_TOL * scale {
        return (
            LimitEstimate::inconclusive(format!(
                "non-monotone variation of {amplitude:.3e} along T' exceeds the fit tolerance"
            )),
            Some(fit),
        );
    }
    let last = ty[ty.len() - 1];
    (
        LimitEstimate::Finite {
            value: last,
            error: (last - ty[ty.len() - 2]).abs(),
        },
        Some(fit),
    )
}

fn growth_is_significant(fit: &LinearFit, span: f64, scale: f64) -> bool {
    fit.slope.abs() > SLOPE_SIGMAS * fit.slope_stderr && fit.slope.abs() * span > SLOPE_FLOOR * scale
}

/// Both orders of the double limit, with the fits behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IteratedLimits {
    /// `lim_{eps -> 0} lim_{T' -> inf} A`.
    pub eps_then_t: LimitEstimate,
    /// `lim_{T' -> inf} lim_{eps -> 0} A`.
    pub t_then_eps: LimitEstimate,
    /// Per `eps`: limit along `T'`.
    pub column_limits: Vec<LimitEstimate>,
    /// Per `eps`: growth fit over the trailing `T'` points.
    pub column_fits: Vec<Option<LinearFit>>,
    /// Per `T'`: extrapolation to `eps = 0`.
    pub row_limits: Vec<LimitEstimate>,
}

pub fn iterated_limits(m: &DiagnosticMatrix) -> IteratedLimits {
    let scale = m.scale();
    if m.rows() < MIN_AXIS_POINTS || m.cols() < MIN_AXIS_POINTS {
        let why = format!("grid needs at least {MIN_AXIS_POINTS} points per axis");
        return IteratedLimits {
            eps_then_t: LimitEstimate::inconclusive(why.clone()),
            t_then_eps: LimitEstimate::inconclusive(why),
            column_limits: Vec::new(),
            column_fits: Vec::new(),
            row_limits: Vec::new(),
        };
    }

    let (column_limits, column_fits): (Vec<_>, Vec<_>) = (0..m.cols())
        .map(|c| {
            let (ts, ys): (Vec<f64>, Vec<f64>) = (0..m.rows())
                .filter_map(|r| m.get(r, c).map(|v| (m.tprime_grid[r], v)))
                .unzip();
            along_tprime(&ts, &ys, scale)
        })
        .unzip();
    let eps_then_t = if column_limits.iter().any(|l| *l == LimitEstimate::Diverges) {
        LimitEstimate::Diverges
    } else if let Some(bad) = column_limits.iter().find(|l| l.value().is_none()) {
        bad.clone()
    } else {
        let ys: Vec<f64> = column_limits.iter().filter_map(LimitEstimate::value).collect();
        let col_err = column_limits
            .iter()
            .map(|l| match l {
                LimitEstimate::Finite { error, .. } => *error,
                _ => 0.0,
            })
            .fold(0.0_f64, f64::max);
        let (value, err) = richardson_to_zero(&m.eps_grid, &ys);
        LimitEstimate::Finite {
            value,
            error: err + col_err,
        }
    };

    let row_limits: Vec<LimitEstimate> = (0..m.rows())
        .map(|r| {
            let (es, ys): (Vec<f64>, Vec<f64>) = (0..m.cols())
                .filter_map(|c| m.get(r, c).map(|v| (m.eps_grid[c], v)))
                .unzip();
            if es.len() < 2 {
                return LimitEstimate::inconclusive("fewer than 2 finite cells along eps");
            }
            let (value, error) = richardson_to_zero(&es, &ys);
            LimitEstimate::Finite { value, error }
        })
        .collect();
    let (ts, ys): (Vec<f64>, Vec<f64>) = row_limits
        .iter()
        .zip(&m.tprime_grid)
        .filter_map(|(l, t)| l.value().map(|v| (*t, v)))
        .unzip();
    let t_then_eps = match along_tprime(&ts, &ys, scale).0 {
        LimitEstimate::Finite { value, error } => {
            let last_err = match row_limits.iter().rev().find(|l| l.value().is_some()) {
                Some(LimitEstimate::Finite { error, .. }) => *error,
                _ => 0.0,
            };
            LimitEstimate::Finite {
                value,
                error: error + last_err,
            }
        }
        other => other,
    };

    IteratedLimits {
        eps_then_t,
        t_then_eps,
        column_limits,
        column_fits,
        row_limits,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum UniformityVerdict {
    Uniform,
    NonUniform,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub verdict: UniformityVerdict,
    pub reason: String,
    pub limits: IteratedLimits,
    /// Per `T'` except the last: `sup_eps |A(T', eps) - A(T'_max, eps)|`.
    pub deviation_profile: Vec<f64>,
    pub tolerance: f64,
}

pub fn uniformity_verdict(m: &DiagnosticMatrix) -> UniformityReport {
    let tolerance = UNIFORM_TOL * m.scale();
    let limits = iterated_limits(m);
    let last = m.rows() - 1;
    let deviation_profile: Vec<f64> = (0..last)
        .map(|r| {
            (0..m.cols()).fold(0.0_f64, |acc, c| match (m.get(r, c), m.get(last, c)) {
                (Some(a), Some(b)) => acc.max((a - b).abs()),
                _ => f64::INFINITY,
            })
        })
        .collect();

    let growth = limits
        .column_fits
        .iter()
        .zip(&limits.column_limits)
        .any(|(f, l)| *l == LimitEstimate::Diverges && f.is_some_and(|f| f.slope > 0.0));
    let (verdict, reason) = match (&limits.eps_then_t, &limits.t_then_eps) {
        (LimitEstimate::Inconclusive { reason }, _) | (_, LimitEstimate::Inconclusive { reason }) if !growth => {
            (UniformityVerdict::Inconclusive, reason.clone())
        }
        _ if growth => (
            UniformityVerdict::NonUniform,
            "A(T', eps) grows linearly in T' at fixed eps".to_string(),
        ),
        (LimitEstimate::Diverges, LimitEstimate::Finite { .. }) | (LimitEstimate::Finite { .. }, LimitEstimate::Diverges) => (
            UniformityVerdict::NonUniform,
            "one iterated limit diverges and the other is finite".to_string(),
        ),
        (LimitEstimate::Finite { value: a, error: ea }, LimitEstimate::Finite { value: b, error: eb }) => {
            let gap = (a - b).abs();
            if gap > SLOPE_SIGMAS * (ea + eb) && gap > tolerance {
                (
                    UniformityVerdict::NonUniform,
                    format!("iterated limits differ by {gap:.3e}, beyond {SLOPE_SIGMAS}x their error"),
                )
            } else if deviation_profile.last().is_some_and(|d| *d <= tolerance) {
                (
                    UniformityVerdict::Uniform,
                    "iterated limits agree and the deviation profile is below tolerance".to_string(),
                )
            } else {
                (
                    UniformityVerdict::Inconclusive,
                    "iterated limits agree but the deviation profile has not settled".to_string(),
                )
            }
        }
        _ => (
            UniformityVerdict::Inconclusive,
            "both iterated limits diverge".to_string(),
        ),
    };
    UniformityReport {
        verdict,
        reason,
        limits,
        deviation_profile,
        tolerance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(eps: &[f64], ts: &[f64], f: impl Fn(f64, f64) -> f64) -> DiagnosticMatrix {
        let values = ts.iter().map(|t| eps.iter().map(|e| Some(f(*t, *e))).collect()).collect();
        DiagnosticMatrix::new(eps.to_vec(), ts.to_vec(), values).unwrap()
    }

    const EPS: [f64; 6] = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    const TS: [f64; 7] = [4.0, 8.0, 12.0, 16.0, 24.0, 32.0, 48.0];

    #[test]
    fn fit_recovers_a_line() {
        let f = linear_fit(&[1.0, 2.0, 3.0, 4.0], &[3.0, 5.0, 7.0, 9.0]);
        assert!((f.slope - 2.0).abs() < 1e-14 && (f.intercept - 1.0).abs() < 1e-14);
        assert!(f.slope_stderr < 1e-12);
        assert!(linear_fit(&[1.0, 2.0], &[0.0, 1.0]).slope_stderr.is_infinite());
    }

    #[test]
    fn neville_extrapolation() {
        let xs = [0.4, 0.2, 0.1, 0.05, 0.025];
        let ys: Vec<f64> = xs.iter().map(|x| 0.9 + 3.0 * x).collect();
        let (v, e) = richardson_to_zero(&xs, &ys);
        assert!((v - 0.9).abs() < 1e-14 && e < 1e-14);
        let ys: Vec<f64> = xs.iter().map(|x| 1.5 - 2.0 * x + x * x * x).collect();
        let (v, e) = richardson_to_zero(&xs, &ys);
        assert!((v - 1.5).abs() <= e && e < 1e-3, "{v} {e}");
    }

    #[test]
    fn linear_growth_in_tprime_is_non_uniform() {
        let m = matrix(&EPS, &TS, |t, e| e * t + 0.9);
        let r = uniformity_verdict(&m);
        assert_eq!(r.limits.eps_then_t, LimitEstimate::Diverges);
        let v = r.limits.t_then_eps.value().unwrap();
        assert!((v - 0.9).abs() < 1e-10);
        assert_eq!(r.verdict, UniformityVerdict::NonUniform);
        for (fit, e) in r.limits.column_fits.iter().zip(EPS) {
            assert!((fit.unwrap().slope - e).abs() <= 0.05 * e);
        }
    }

    #[test]
    fn constant_past_support_is_uniform() {
        let m = matrix(&EPS, &TS, |t, e| if t >= 10.0 { 7.0 * e + 0.3 } else { e * t + 0.3 * t / 10.0 });
        let r = uniformity_verdict(&m);
        let (a, b) = (r.limits.eps_then_t.value().unwrap(), r.limits.t_then_eps.value().unwrap());
        assert!((a - b).abs() <= 1e-6 && (a - 0.3).abs() < 1e-10);
        assert_eq!(r.verdict, UniformityVerdict::Uniform);
    }

    #[test]
    fn disagreeing_finite_limits() {
        // A = 1 / (1 + eps T'): T' first gives 0, eps first gives 1
        let ts: Vec<f64> = (0..8).map(|k| 10f64.powi(k)).collect();
        let m = matrix(&EPS, &ts, |t, e| 1.0 / (1.0 + e * t));
        let r = uniformity_verdict(&m);
        assert_ne!(r.verdict, UniformityVerdict::Uniform);
    }

    #[test]
    fn coarse_and_zero_grids() {
        let m = matrix(&[0.1, 0.01], &[1.0, 2.0], |t, e| e * t);
        let r = uniformity_verdict(&m);
        assert_eq!(r.verdict, UniformityVerdict::Inconclusive);
        let z = matrix(&EPS, &TS, |_, _| 0.0);
        let r = uniformity_verdict(&z);
        assert_eq!(r.limits.eps_then_t.value(), Some(0.0));
        assert_eq!(r.limits.t_then_eps.value(), Some(0.0));
        assert_eq!(r.verdict, UniformityVerdict::Uniform);
    }

    #[test]
    fn noisy_columns_are_inconclusive() {
        let m = matrix(&EPS, &TS, |t, _| {
            let r = TS.iter().position(|x| *x == t).unwrap();
            1.0 + 0.01 * (r % 2) as f64
        });
        let r = uniformity_verdict(&m);
        assert_eq!(r.verdict, UniformityVerdict::Inconclusive, "{r:?}");
    }
}
