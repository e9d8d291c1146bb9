use std::borrow::Cow;

use super::{time_derivative, StochasticPath, TimeDomain};
use crate::error::{Error, Result};

/// Quintic smoothstep `s(x) = 6x^5 - 15x^4 + 10x^3` on `[0, 1]`, clamped
/// outside. `s, s', s''` vanish at 0 and `s', s''` vanish at 1, so a ramp
/// built from it is C^2 and has three vanishing head values.
#[derive(Debug, Clone, Copy, Default)]
pub struct Smoothstep;

impl Smoothstep {
    /// Number of derivatives (counting the value itself) that vanish at 0.
    pub const HEAD: usize = 3;

    pub fn value(x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
        }
    }

    /// `k`-th derivative, `k <= 3`.
    pub fn derivative(x: f64, k: usize) -> f64 {
        if k == 0 {
            return Self::value(x);
        }
        if !(0.0..=1.0).contains(&x) {
            return 0.0;
        }
        match k {
            1 => 30.0 * x * x * (x - 1.0) * (x - 1.0),
            2 => 60.0 * x * (2.0 * x * x - 3.0 * x + 1.0),
            3 => 60.0 * (6.0 * x * x - 6.0 * x + 1.0),
            _ => panic!("smoothstep derivatives are provided up to order 3"),
        }
    }
}

/// Tail structure of a perturbation curve.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail {
    Unrestricted,
    /// Values equal `value[w]` exactly for every grid index `>= onset`.
    EventuallyConstant { onset: usize, value: Vec<Vec<f64>> },
    /// Values are exactly zero for every grid index `> cutoff`.
    CompactSupport { cutoff: usize },
}

/// A variation `q(t, w)` added to a candidate path with scale `eps`.
///
/// `head = k` records that the first `k` values (discrete) or the value and
/// first `k-1` derivatives at `t = 0` (continuous) vanish; this is checked at
/// construction.
#[derive(Debug, Clone)]
pub struct PerturbationCurve {
    path: StochasticPath,
    head: usize,
    tail: Tail,
    derivatives: Vec<StochasticPath>,
}

impl PerturbationCurve {
    pub fn new(path: StochasticPath, head: usize, tail: Tail) -> Result<Self> {
        Self::with_parts(path, head, tail, Vec::new())
    }

    /// Curve with analytic time derivatives `derivatives[j]` of order `j+1`.
    pub fn with_derivatives(
        path: StochasticPath,
        head: usize,
        tail: Tail,
        derivatives: Vec<StochasticPath>,
    ) -> Result<Self> {
        path.require_continuous("analytic curve derivatives")?;
        for d in &derivatives {
            path.check_same_shape(d, "curve derivative")?;
        }
        Self::with_parts(path, head, tail, derivatives)
    }

    fn with_parts(
        path: StochasticPath,
        head: usize,
        tail: Tail,
        derivatives: Vec<StochasticPath>,
    ) -> Result<Self> {
        let curve = Self {
            path,
            head,
            tail,
            derivatives,
        };
        curve.validate()?;
        Ok(curve)
    }

    fn validate(&self) -> Result<()> {
        let p = &self.path;
        if self.path.domain().is_discrete() {
            if self.head > p.len() {
                return Err(Error::input("head longer than the curve"));
            }
            for w in 0..p.states() {
                for k in 0..self.head {
                    if p.get(k, w).iter().any(|v| *v != 0.0) {
                        return Err(Error::input(format!(
                            "curve claims {} vanishing head values but q({k}) != 0 in state {}",
                            self.head,
                            w + 1
                        )));
                    }
                }
            }
        } else {
            let tol = 10.0 * p.domain().step();
            for j in 0..self.head {
                let d = self.derivative(j)?;
                for w in 0..p.states() {
                    if d.get(0, w).iter().any(|v| v.abs() > tol) {
                        return Err(Error::input(format!(
                            "curve claims {} vanishing head derivatives but derivative {j} at t=0 exceeds {tol:e} in state {}",
                            self.head,
                            w + 1
                        )));
                    }
                }
            }
        }
        match &self.tail {
            Tail::Unrestricted => {}
            Tail::EventuallyConstant { onset, value } => {
                if value.len() != p.states() || value.iter().any(|v| v.len() != p.dim()) {
                    return Err(Error::input("tail value must give one vector per state"));
                }
                for w in 0..p.states() {
                    for k in *onset..p.len() {
                        if p.get(k, w) != value[w].as_slice() {
                            return Err(Error::input(format!(
                                "curve is not constant from index {onset}: differs at index {k}, state {}",
                                w + 1
                            )));
                        }
                    }
                }
            }
            Tail::CompactSupport { cutoff } => {
                for w in 0..p.states() {
                    for k in (*cutoff + 1)..p.len() {
                        if p.get(k, w).iter().any(|v| *v != 0.0) {
                            return Err(Error::input(format!(
                                "curve claims support up to index {cutoff} but is nonzero at {k}, state {}",
                                w + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The zero curve on the grid of `like`.
    pub fn zero(like: &StochasticPath) -> Self {
        let path = like.zeros_like();
        let derivatives = if like.domain().is_discrete() {
            Vec::new()
        } else {
            vec![path.clone(); 3]
        };
        Self {
            path,
            head: 0,
            tail: Tail::CompactSupport { cutoff: 0 },
            derivatives,
        }
    }

    /// Discrete step: `q(t) = 0` for `t < onset`, `levels[w]` from `onset` on.
    pub fn step(domain: TimeDomain, onset: usize, levels: &[f64]) -> Result<Self> {
        if !domain.is_discrete() {
            return Err(Error::Unsupported("step curves are discrete; use a ramp".into()));
        }
        let path = StochasticPath::from_fn(domain, levels.len(), |t, w| {
            if (t as usize) < onset {
                0.0
            } else {
                levels[w]
            }
        })?;
        let onset = onset.min(domain.len());
        Self::new(
            path,
            onset,
            Tail::EventuallyConstant {
                onset,
                value: levels.iter().map(|l| vec![*l]).collect(),
            },
        )
    }

    /// Discrete box: `levels[w]` on `start..=cutoff`, zero elsewhere.
    pub fn boxcar(domain: TimeDomain, start: usize, cutoff: usize, levels: &[f64]) -> Result<Self> {
        if !domain.is_discrete() {
            return Err(Error::Unsupported("box curves are discrete; use a bump".into()));
        }
        if start > cutoff {
            return Err(Error::input("box start after cutoff"));
        }
        let path = StochasticPath::from_fn(domain, levels.len(), |t, w| {
            let k = t as usize;
            if (start..=cutoff).contains(&k) {
                levels[w]
            } else {
                0.0
            }
        })?;
        Self::new(path, start, Tail::CompactSupport { cutoff })
    }

    /// Continuous ramp `levels[w] * s(t / ramp_end)` reaching its level at
    /// `ramp_end` and constant afterwards.
    pub fn ramp(domain: TimeDomain, levels: &[f64], ramp_end: f64) -> Result<Self> {
        if domain.is_discrete() {
            return Err(Error::Unsupported("ramps are continuous; use a step".into()));
        }
        if !(ramp_end > 0.0) {
            return Err(Error::input("ramp end must be positive"));
        }
        let onset = domain.index_of(ramp_end)?;
        let shape = |k: usize| {
            move |t: f64, w: usize| {
                levels[w] * Smoothstep::derivative(t / ramp_end, k) / ramp_end.powi(k as i32)
            }
        };
        let path = StochasticPath::from_fn(domain, levels.len(), |t, w| {
            if t >= ramp_end {
                levels[w]
            } else {
                shape(0)(t, w)
            }
        })?;
        let derivatives = (1..=3)
            .map(|k| StochasticPath::from_fn(domain, levels.len(), shape(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::with_derivatives(
            path,
            Smoothstep::HEAD,
            Tail::EventuallyConstant {
                onset,
                value: levels.iter().map(|l| vec![*l]).collect(),
            },
            derivatives,
        )
    }

    /// Continuous bump: rises over `[0, 1]`, holds `levels[w]`, falls over
    /// `[cutoff - 1, cutoff]` and is zero afterwards.
    pub fn bump(domain: TimeDomain, levels: &[f64], cutoff: f64) -> Result<Self> {
        if domain.is_discrete() {
            return Err(Error::Unsupported("bumps are continuous; use a box".into()));
        }
        if !(cutoff >= 2.0) {
            return Err(Error::input("bump cutoff must be at least 2"));
        }
        let cut = domain.index_of(cutoff)?;
        let shape = |k: usize| {
            move |t: f64, w: usize| {
                let rise = Smoothstep::derivative(t, k);
                let fall = Smoothstep::derivative(cutoff - t, k) * if k % 2 == 1 { -1.0 } else { 1.0 };
                let v = if t <= 1.0 {
                    rise
                } else if t >= cutoff {
                    0.0
                } else if t >= cutoff - 1.0 {
                    fall
                } else if k == 0 {
                    1.0
                } else {
                    0.0
                };
                levels[w] * v
            }
        };
        let path = StochasticPath::from_fn(domain, levels.len(), shape(0))?;
        let derivatives = (1..=3)
            .map(|k| StochasticPath::from_fn(domain, levels.len(), shape(k)))
            .collect::<Result<Vec<_>>>()?;
        Self::with_derivatives(path, Smoothstep::HEAD, Tail::CompactSupport { cutoff: cut }, derivatives)
    }

    pub fn path(&self) -> &StochasticPath {
        &self.path
    }

    pub fn head(&self) -> usize {
        self.head
    }

    pub fn tail(&self) -> &Tail {
        &self.tail
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        !self.derivatives.is_empty()
    }

    /// `k`-th time derivative; analytic when the curve carries it, otherwise
    /// from grid stencils.
    pub fn derivative(&self, k: usize) -> Result<Cow<'_, StochasticPath>> {
        if k == 0 {
            return Ok(Cow::Borrowed(&self.path));
        }
        if let Some(d) = self.derivatives.get(k - 1) {
            return Ok(Cow::Borrowed(d));
        }
        Ok(Cow::Owned(time_derivative(&self.path, k)?))
    }

    /// The curve multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        let scale = |p: &StochasticPath| {
            StochasticPath::new(
                *p.domain(),
                p.states(),
                p.dim(),
                p.values().iter().map(|v| v * c).collect(),
            )
        };
        let tail = match &self.tail {
            Tail::EventuallyConstant { onset, value } => Tail::EventuallyConstant {
                onset: *onset,
                value: value
                    .iter()
                    .map(|v| v.iter().map(|x| x * c).collect())
                    .collect(),
            },
            t => t.clone(),
        };
        Ok(Self {
            path: scale(&self.path)?,
            head: self.head,
            tail,
            derivatives: self.derivatives.iter().map(scale).collect::<Result<_>>()?,
        })
    }
}

/// `base + eps * curve`, pointwise.
pub fn perturb(base: &StochasticPath, curve: &PerturbationCurve, eps: f64) -> Result<StochasticPath> {
    base.check_same_shape(curve.path(), "perturb")?;
    let values = base
        .values()
        .iter()
        .zip(curve.path().values())
        .map(|(b, q)| b + eps * q)
        .collect();
    StochasticPath::new(*base.domain(), base.states(), base.dim(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smoothstep_boundary_values() {
        assert_eq!(Smoothstep::value(0.0), 0.0);
        assert_eq!(Smoothstep::value(1.0), 1.0);
        for k in 1..=2 {
            assert_eq!(Smoothstep::derivative(0.0, k), 0.0);
            assert_eq!(Smoothstep::derivative(1.0, k), 0.0);
        }
        // finite-difference check of the analytic derivatives
        let x = 0.37;
        let h = 1e-5;
        for k in 1..=3 {
            let fd = (Smoothstep::derivative(x + h, k - 1) - Smoothstep::derivative(x - h, k - 1)) / (2.0 * h);
            assert!((fd - Smoothstep::derivative(x, k)).abs() < 1e-6, "order {k}");
        }
    }

    #[test]
    fn perturb_examples() {
        let d = TimeDomain::discrete(6);
        let base = StochasticPath::constant(d, &[1.0]).unwrap();
        let q = PerturbationCurve::new(base.clone(), 0, Tail::Unrestricted).unwrap();
        assert_eq!(perturb(&base, &q, 0.0).unwrap(), base);
        let p = perturb(&base, &q, 0.5).unwrap();
        assert!(p.values().iter().all(|v| *v == 1.5));
    }

    #[test]
    fn perturb_shape_mismatch() {
        let base = StochasticPath::constant(TimeDomain::discrete(6), &[1.0]).unwrap();
        let q = PerturbationCurve::step(TimeDomain::discrete(5), 1, &[1.0]).unwrap();
        assert!(matches!(perturb(&base, &q, 0.1), Err(Error::Input(_))));
    }

    #[test]
    fn head_and_tail_are_validated() {
        let d = TimeDomain::discrete(5);
        let p = StochasticPath::from_rows(d, vec![vec![0.0, 1.0, 1.0, 2.0, 2.0, 2.0]]).unwrap();
        assert!(PerturbationCurve::new(p.clone(), 1, Tail::Unrestricted).is_ok());
        assert!(PerturbationCurve::new(p.clone(), 2, Tail::Unrestricted).is_err());
        let tail = |onset| Tail::EventuallyConstant {
            onset,
            value: vec![vec![2.0]],
        };
        assert!(PerturbationCurve::new(p.clone(), 1, tail(3)).is_ok());
        assert!(PerturbationCurve::new(p.clone(), 1, tail(2)).is_err());
        assert!(PerturbationCurve::new(p, 0, Tail::CompactSupport { cutoff: 4 }).is_err());
    }

    #[test]
    fn ramp_has_vanishing_head_and_constant_tail() {
        let d = TimeDomain::continuous(3.0, 1e-3).unwrap();
        let r = PerturbationCurve::ramp(d, &[1.0, 2.0], 1.0).unwrap();
        assert_eq!(r.head(), 3);
        assert_eq!(r.path().scalar(1000, 1), 2.0);
        assert_eq!(r.path().scalar(3000, 0), 1.0);
        // continuous validation rejects a curve with p(0) != 0 when a head is claimed
        let bad = StochasticPath::constant(d, &[1.0]).unwrap();
        assert!(PerturbationCurve::new(bad, 1, Tail::Unrestricted).is_err());
    }

    #[test]
    fn numeric_head_check_uses_grid_tolerance() {
        let d = TimeDomain::continuous(2.0, 1e-2).unwrap();
        let p = StochasticPath::from_fn(d, 1, |t, _| Smoothstep::value(t)).unwrap();
        let c = PerturbationCurve::new(p, 2, Tail::Unrestricted).unwrap();
        assert!(!c.has_analytic_derivatives());
        assert!(c.derivative(1).unwrap().scalar(0, 0).abs() <= 0.1);
    }

    #[test]
    fn bump_is_compactly_supported() {
        let d = TimeDomain::continuous(20.0, 1e-2).unwrap();
        let b = PerturbationCurve::bump(d, &[1.0], 10.0).unwrap();
        assert_eq!(b.path().scalar(500, 0), 1.0);
        assert_eq!(b.path().scalar(1000, 0), 0.0);
        assert!(b.path().scalar(950, 0) > 0.0);
        let d1 = b.derivative(1).unwrap();
        assert!(d1.scalar(950, 0) < 0.0);
    }
}
