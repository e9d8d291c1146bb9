use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveKind};
use crate::error::{Error, Result};

/// `(x - alpha)^2 + beta*x1 + gamma*x2` with per-state constants. The same
/// formula serves as a continuous objective (slots are `x, x', x''`) and as
/// a discrete one (slots are `y(t), y(t+1), y(t+2)`).
#[derive(Debug, Clone, PartialEq)]
pub struct QuadLinear {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    kind: ObjectiveKind,
}

impl QuadLinear {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>, kind: ObjectiveKind) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() || alpha.len() != gamma.len() {
            return Err(Error::input("alpha, beta and gamma need one value per state"));
        }
        for (name, xs) in [("alpha", &alpha), ("beta", &beta), ("gamma", &gamma)] {
            if let Some(w) = xs.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::input(format!(
                    "{name} must be positive, got {} in state {}",
                    xs[w],
                    w + 1
                )));
            }
        }
        Ok(Self {
            alpha,
            beta,
            gamma,
            kind,
        })
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    fn state(&self, w: usize) -> Result<(f64, f64, f64)> {
        if w >= self.alpha.len() {
            return Err(Error::input(format!(
                "state {} out of range: parameters cover {} states",
                w + 1,
                self.alpha.len()
            )));
        }
        Ok((self.alpha[w], self.beta[w], self.gamma[w]))
    }
}

pub fn quadlin_continuous(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<QuadLinear> {
    QuadLinear::new(alpha, beta, gamma, ObjectiveKind::Continuous)
}

pub fn quadlin_discrete(alpha: Vec<f64>, beta: Vec<f64>, gamma: Vec<f64>) -> Result<QuadLinear> {
    QuadLinear::new(alpha, beta, gamma, ObjectiveKind::Discrete)
}

impl Objective for QuadLinear {
    fn order(&self) -> usize {
        2
    }

    fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    fn describe(&self) -> String {
        match self.kind {
            ObjectiveKind::Continuous => "quadlin-continuous".into(),
            ObjectiveKind::Discrete => "quadlin-discrete".into(),
        }
    }

    fn states(&self) -> Option<usize> {
        Some(self.alpha.len())
    }

    fn eval(&self, s: &[f64], _t: f64, w: usize) -> Result<f64> {
        let (a, b, g) = self.state(w)?;
        Ok((s[0] - a).powi(2) + b * s[1] + g * s[2])
    }

    fn analytic_partial(&self, slot: usize, _comp: usize, s: &[f64], _t: f64, w: usize) -> Option<Result<f64>> {
        Some(self.state(w).map(|(a, b, g)| match slot {
            0 => 2.0 * (s[0] - a),
            1 => b,
            _ => g,
        }))
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }

    fn closed_form_induced(&self) -> Option<Box<dyn Objective>> {
        (self.kind == ObjectiveKind::Discrete).then(|| Box::new(InducedQuadLinear(self.clone())) as Box<dyn Objective>)
    }
}

/// `(x - alpha)^2 + beta*(x + y) + gamma*(x + 2y + z)` with hand-derived
/// partials; the reference against which chain-rule partials are compared.
#[derive(Debug, Clone)]
struct InducedQuadLinear(QuadLinear);

impl Objective for InducedQuadLinear {
    fn order(&self) -> usize {
        2
    }

    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::Continuous
    }

    fn describe(&self) -> String {
        "quadlin-discrete (induced, closed form)".into()
    }

    fn eval(&self, s: &[f64], _t: f64, w: usize) -> Result<f64> {
        let (a, b, g) = self.0.state(w)?;
        let (x, y, z) = (s[0], s[1], s[2]);
        Ok((x - a).powi(2) + b * (x + y) + g * (x + 2.0 * y + z))
    }

    fn analytic_partial(&self, slot: usize, _comp: usize, s: &[f64], _t: f64, w: usize) -> Option<Result<f64>> {
        Some(self.0.state(w).map(|(a, b, g)| match slot {
            0 => 2.0 * (s[0] - a) + b + g,
            1 => b + 2.0 * g,
            _ => g,
        }))
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

/// How the household objective treats the first `n` periods, whose
/// consumption would reach back before time 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeadConvention {
    /// `V(t) = 0` for `t < n`.
    #[default]
    ZeroHead,
    /// `V(t) = discount^t ln c_t` for every `t`.
    FullLog,
}

/// Log-utility household: `V(t) = discount^t ln c_t` with consumption
/// `c_t = y(t) + ... + y(t+n-1) - y(t+n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HouseholdLog {
    discount: f64,
    n: usize,
    head: HeadConvention,
}

pub fn household_log(discount: f64, n: usize) -> Result<HouseholdLog> {
    HouseholdLog::new(discount, n, HeadConvention::ZeroHead)
}

impl HouseholdLog {
    pub fn new(discount: f64, n: usize, head: HeadConvention) -> Result<Self> {
        if !(discount > 0.0 && discount < 1.0) {
            return Err(Error::input(format!("discount must lie in (0, 1), got {discount}")));
        }
        if n == 0 {
            return Err(Error::input("household lag order n must be at least 1"));
        }
        Ok(Self { discount, n, head })
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn head_convention(&self) -> HeadConvention {
        self.head
    }

    pub fn consumption(&self, s: &[f64]) -> f64 {
        s[..self.n].iter().sum::<f64>() - s[self.n]
    }

    fn active(&self, t: f64) -> bool {
        self.head == HeadConvention::FullLog || t >= self.n as f64
    }
}

impl Objective for HouseholdLog {
    fn order(&self) -> usize {
        self.n
    }

    fn kind(&self) -> ObjectiveKind {
        ObjectiveKind::Discrete
    }

    fn describe(&self) -> String {
        format!("household-log(discount={}, n={})", self.discount, self.n)
    }

    fn eval(&self, s: &[f64], t: f64, _w: usize) -> Result<f64> {
        if !self.active(t) {
            return Ok(0.0);
        }
        let c = self.consumption(s);
        if c <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.discount.powf(t) * c.ln())
    }

    fn analytic_partial(&self, slot: usize, _comp: usize, s: &[f64], t: f64, _w: usize) -> Option<Result<f64>> {
        if !self.active(t) {
            return Some(Ok(0.0));
        }
        let sign = if slot == self.n { -1.0 } else { 1.0 };
        Some(Ok(self.discount.powf(t) * sign / self.consumption(s)))
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{gradient_check, partial_slot, random_samples, CheckVerdict};

    fn set_b() -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (vec![1.0, 2.0], vec![0.5, 0.4], vec![0.25, 0.2])
    }

    #[test]
    fn quadlin_values() {
        let q = quadlin_continuous(vec![1.0], vec![0.5], vec![0.25]).unwrap();
        assert_eq!(q.eval(&[2.0, 0.0, 0.0], 0.0, 0).unwrap(), 1.0);
        assert_eq!(q.eval(&[1.0, 2.0, 4.0], 0.0, 0).unwrap(), 0.5 * 2.0 + 0.25 * 4.0);
        assert_eq!(partial_slot(&q, 0, 0, &[1.0, 3.0, 3.0], 0.0, 0).unwrap(), 0.0);
        let d = quadlin_discrete(vec![1.0], vec![0.5], vec![0.25]).unwrap();
        assert_eq!(d.eval(&[0.0, 1.0, 1.0], 0.0, 0).unwrap(), 1.75);
        assert_eq!(d.eval(&[1.0, 0.0, 0.0], 0.0, 0).unwrap(), 0.0);
        assert_eq!(partial_slot(&d, 2, 0, &[7.0, -3.0, 2.0], 4.0, 0).unwrap(), 0.25);
    }

    #[test]
    fn quadlin_rejects_nonpositive_params() {
        assert!(quadlin_discrete(vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]).is_err());
        assert!(quadlin_discrete(vec![1.0], vec![-0.5], vec![1.0]).is_err());
        assert!(quadlin_discrete(vec![1.0], vec![0.5], vec![]).is_err());
        let q = quadlin_discrete(vec![1.0], vec![0.5], vec![0.25]).unwrap();
        assert!(q.eval(&[0.0; 3], 0.0, 1).is_err());
    }

    #[test]
    fn household_values() {
        let h = household_log(0.9, 2).unwrap();
        assert_eq!(h.eval(&[5.0, -3.0, 8.0], 0.0, 0).unwrap(), 0.0);
        assert_eq!(h.eval(&[5.0, -3.0, 8.0], 1.0, 0).unwrap(), 0.0);
        assert_eq!(h.eval(&[1.0, 1.0, 1.0], 2.0, 0).unwrap(), 0.0);
        assert_eq!(h.eval(&[0.5, 0.0, 1.0], 3.0, 0).unwrap(), f64::NEG_INFINITY);
        let d = partial_slot(&h, 2, 0, &[1.0, 1.0, 1.0], 3.0, 0).unwrap();
        assert!((d + 0.729).abs() < 1e-15);
        assert!(household_log(1.0, 2).is_err());
        assert!(household_log(0.0, 2).is_err());
        assert!(household_log(0.5, 0).is_err());
    }

    #[test]
    fn household_full_log_head() {
        let h = HouseholdLog::new(0.9, 2, HeadConvention::FullLog).unwrap();
        let v = h.eval(&[1.0, 2.0, 1.0], 0.0, 0).unwrap();
        assert!((v - 2.0_f64.ln()).abs() < 1e-15);
        assert_eq!(h.analytic_partial(2, 0, &[1.0, 2.0, 1.0], 1.0, 0).unwrap().unwrap(), -0.9 / 2.0);
    }

    /// The slot-partial signs are exactly those of dc/dy, checked against
    /// finite differences of the consumption function itself.
    #[test]
    fn household_partial_signs_follow_consumption() {
        for n in 1..=4 {
            let h = household_log(0.8, n).unwrap();
            let s: Vec<f64> = (0..=n).map(|k| 1.0 + 0.1 * k as f64).collect();
            let s = {
                let mut s = s;
                s[n] = 0.5;
                s
            };
            let t = (n + 3) as f64;
            let c = h.consumption(&s);
            for k in 0..=n {
                let mut up = s.clone();
                up[k] += 1e-6;
                let dc = (h.consumption(&up) - c) / 1e-6;
                let sign = if k == n { -1.0 } else { 1.0 };
                assert!((dc - sign).abs() < 1e-6);
                let p = h.analytic_partial(k, 0, &s, t, 0).unwrap().unwrap();
                assert_eq!(p.signum(), sign);
            }
        }
    }

    #[test]
    fn gradient_checks_pass_for_builtins() {
        let (a, b, g) = set_b();
        let models: Vec<Box<dyn Objective>> = vec![
            Box::new(quadlin_continuous(a.clone(), b.clone(), g.clone()).unwrap()),
            Box::new(quadlin_discrete(a, b, g).unwrap()),
            Box::new(household_log(0.9, 2).unwrap()),
            Box::new(HouseholdLog::new(0.9, 3, HeadConvention::FullLog).unwrap()),
        ];
        for m in &models {
            let pts = random_samples(m.as_ref(), 7, 100, (0.2, 3.0), 2, (0, 20)).unwrap();
            assert_eq!(pts.len(), 100);
            let r = gradient_check(m.as_ref(), &pts).unwrap();
            assert_eq!(r.verdict, CheckVerdict::Pass, "{}: {r:?}", m.describe());
        }
    }

    #[test]
    fn induced_closed_form_matches_substitution() {
        let (a, b, g) = set_b();
        let q = quadlin_discrete(a, b, g).unwrap();
        let v = q.closed_form_induced().unwrap();
        let (x, y, z) = (0.3, -1.2, 0.7);
        for w in 0..2 {
            let direct = q.eval(&[x, x + y, x + 2.0 * y + z], 0.0, w).unwrap();
            assert!((v.eval(&[x, y, z], 0.0, w).unwrap() - direct).abs() < 1e-14);
        }
        assert!(quadlin_continuous(vec![1.0], vec![1.0], vec![1.0]).unwrap().closed_form_induced().is_none());
    }
}
