//! JSON scenarios: parsing with key-path errors, validation, default
//! resolution, and construction of the model objects they describe.
//!
//! A resolved scenario has every optional field filled in. Serializing it
//! and parsing the result yields the same resolved scenario, which is what
//! reports echo.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{default_eps_grid, default_tprime_grid};
use crate::error::{Error, Result};
use crate::euler::{BoundaryMode, TOL_ANALYTIC, TOL_APPROX};
use crate::objective::{
    gradient_check, random_samples, CheckVerdict, ExprObjective, HeadConvention, HouseholdLog, Objective,
    ObjectiveKind, QuadLinear,
};
use crate::solver::{interpolated_guess, newton_euler_solve, Solution, SolveSpec};
use crate::stochastic::{PerturbationCurve, SampleSpace, StochasticPath, Tail, TimeDomain};
use crate::tvc::{kamihigashi_curve, RampSpec};

pub const DEFAULT_SEED: u64 = 20240601;
pub const DEFAULT_EPS_BAR: f64 = 0.1;
pub const DEFAULT_DECOMPOSITION_TOL: f64 = 1e-6;
pub const DEFAULT_CORRESPONDENCE_SAMPLES: usize = 100;
/// Number of `T'` values in the default diagnostic grid.
pub const DEFAULT_TPRIME_POINTS: usize = 8;
/// Random points for the load-time gradient check of expression objectives.
pub const LOAD_CHECK_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TimeSpec {
    Discrete { t_max: usize },
    Continuous { t_end: f64, h: f64 },
}

impl TimeSpec {
    pub fn domain(&self) -> Result<TimeDomain> {
        match *self {
            TimeSpec::Discrete { t_max } => Ok(TimeDomain::discrete(t_max)),
            TimeSpec::Continuous { t_end, h } => {
                TimeDomain::continuous(t_end, h).map_err(|e| Error::schema("time", e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmegaSpec {
    pub probs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObjectiveSpec {
    /// `(y0 - alpha)^2 + beta*y1 + gamma*y2`, order 2.
    Quadlin {
        alpha: Vec<f64>,
        beta: Vec<f64>,
        gamma: Vec<f64>,
    },
    /// `discount^t * ln(y0 + ... + y_{n-1} - y_n)`, order `n`.
    Household {
        #[serde(default = "default_discount")]
        discount: f64,
        #[serde(default)]
        head: HeadConvention,
    },
    Expr {
        expr: String,
        #[serde(default)]
        constants: BTreeMap<String, Vec<f64>>,
    },
}

fn default_discount() -> f64 {
    0.9
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GuessKind {
    Zero,
    /// Linear interpolation between the pinned head and tail values.
    #[default]
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BruteForceSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

/// The horizon is `t_max - order`; the tail `t_max - order + 1..=t_max` and,
/// in `fixed:k` mode, the head `0..k` are pinned. `head` and `tail` list one
/// value per state for each pinned time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveDirective {
    #[serde(default)]
    pub head: Vec<Vec<f64>>,
    #[serde(default)]
    pub tail: Vec<Vec<f64>>,
    #[serde(default)]
    pub guess: GuessKind,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub brute_force: Option<BruteForceSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PathSpec {
    /// Closed-form stationary path of the quadratic-linear model: `alpha`,
    /// then `alpha - beta/2`, then `alpha - (beta + gamma)/2` in discrete
    /// time; `alpha` throughout in continuous time.
    QuadlinStationary,
    /// One row per state.
    Values { values: Vec<Vec<f64>> },
    /// One level per state.
    Constant { levels: Vec<f64> },
    Solve(SolveDirective),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PerturbationSpec {
    /// Discrete: zero before `onset`, `levels` from there on.
    Step {
        #[serde(default = "one")]
        onset: usize,
        levels: Vec<f64>,
    },
    /// Discrete: `levels` on `start..=cutoff`, zero elsewhere.
    Box {
        #[serde(default = "one")]
        start: usize,
        cutoff: usize,
        levels: Vec<f64>,
    },
    /// Continuous smooth ramp reaching `levels` at `ramp_end`.
    Ramp {
        levels: Vec<f64>,
        #[serde(default = "one_f64")]
        ramp_end: f64,
    },
    /// Continuous smooth bump vanishing after `cutoff`.
    Bump { levels: Vec<f64>, cutoff: f64 },
    /// Explicit values, one row per state; `head` leading values must vanish.
    Values {
        values: Vec<Vec<f64>>,
        #[serde(default)]
        head: usize,
    },
    /// Continuous `a(t) * x(t)` with `a` ramping to `level`.
    Kamihigashi {
        level: f64,
        #[serde(default = "one_f64")]
        ramp_end: f64,
    },
}

fn one() -> usize {
    1
}

fn one_f64() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSpec {
    #[serde(default)]
    pub eps_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub tprime_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub eps_bar: Option<f64>,
    #[serde(default)]
    pub sample_times: Option<Vec<f64>>,
    /// Treat a non-uniform verdict as a failed condition.
    #[serde(default)]
    pub assert_uniform: bool,
    #[serde(default)]
    pub correspondence_samples: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSpec {
    #[serde(default)]
    pub euler: Option<f64>,
    #[serde(default)]
    pub tvc: Option<f64>,
    #[serde(default)]
    pub decomposition: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub time: TimeSpec,
    pub omega: OmegaSpec,
    #[serde(default)]
    pub order: Option<usize>,
    pub objective: ObjectiveSpec,
    #[serde(default)]
    pub path: Option<PathSpec>,
    #[serde(default)]
    pub perturbation: Option<PerturbationSpec>,
    #[serde(default)]
    pub diagnostics: DiagnosticsSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default)]
    pub boundary: BoundaryMode,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// A parsed, validated and resolved scenario with its built objective.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub objective: Arc<dyn Objective>,
    pub space: SampleSpace,
    pub domain: TimeDomain,
    pub warnings: Vec<String>,
}

/// Parses JSON text into an unresolved scenario, reporting the key path of
/// any schema violation.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::schema(if path.is_empty() { ".".to_string() } else { path }, e.into_inner().to_string())
    })
}

pub fn load_scenario(file: &Path) -> Result<Loaded> {
    let text = std::fs::read_to_string(file)?;
    parse_scenario(&text)?.load()
}

impl Scenario {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn states(&self) -> usize {
        self.omega.probs.len()
    }

    /// Validates, fills in defaults and builds the objective.
    pub fn load(mut self) -> Result<Loaded> {
        let space = SampleSpace::new(self.omega.probs.clone()).map_err(|e| Error::schema("omega.probs", e.to_string()))?;
        let domain = self.time.domain()?;
        let states = space.len();
        let kind = if domain.is_discrete() {
            ObjectiveKind::Discrete
        } else {
            ObjectiveKind::Continuous
        };
        let order = match (&self.objective, self.order) {
            (ObjectiveSpec::Quadlin { .. }, None | Some(2)) => 2,
            (ObjectiveSpec::Quadlin { .. }, Some(n)) => {
                return Err(Error::schema("order", format!("the quadlin objective has order 2, not {n}")))
            }
            (ObjectiveSpec::Household { .. }, n) => n.unwrap_or(2),
            (ObjectiveSpec::Expr { .. }, Some(n)) => n,
            (ObjectiveSpec::Expr { .. }, None) => {
                return Err(Error::schema("order", "expression objectives need an explicit order"))
            }
        };
        self.order = Some(order);
        let mut warnings = Vec::new();
        let objective: Arc<dyn Objective> = match &self.objective {
            ObjectiveSpec::Quadlin { alpha, beta, gamma } => {
                for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
                    check_len(&format!("objective.{name}"), v.len(), states)?;
                }
                Arc::new(
                    QuadLinear::new(alpha.clone(), beta.clone(), gamma.clone(), kind)
                        .map_err(|e| Error::schema("objective", e.to_string()))?,
                )
            }
            ObjectiveSpec::Household { discount, head } => {
                if kind != ObjectiveKind::Discrete {
                    return Err(Error::schema("objective.type", "the household objective is discrete"));
                }
                Arc::new(
                    HouseholdLog::new(*discount, order, *head).map_err(|e| Error::schema("objective", e.to_string()))?,
                )
            }
            ObjectiveSpec::Expr { expr, constants } => {
                for (name, v) in constants {
                    check_len(&format!("objective.constants.{name}"), v.len(), states)?;
                }
                let e = ExprObjective::new(expr, order, kind, constants)?;
                let pts = random_samples(&e, self.seed(), LOAD_CHECK_SAMPLES, (-2.0, 2.0), states, (0, 10))?;
                let r = gradient_check(&e, &pts)?;
                if r.verdict != CheckVerdict::Pass {
                    warnings.push(format!(
                        "gradient check of `{expr}`: {:?} (max relative gap {:.3e} over {} points)",
                        r.verdict, r.max_gap, r.checked
                    ));
                }
                Arc::new(e)
            }
        };

        if let BoundaryMode::FixedInitial(k) = self.boundary {
            if k > order {
                return Err(Error::schema("boundary", format!("fixed:{k} pins more than the order {order}")));
            }
        }
        self.validate_path(order, states, &domain)?;
        self.validate_perturbation(states, &domain)?;
        self.resolve_defaults(objective.as_ref(), &domain)?;
        Ok(Loaded {
            scenario: self,
            objective,
            space,
            domain,
            warnings,
        })
    }

    fn validate_path(&self, order: usize, states: usize, domain: &TimeDomain) -> Result<()> {
        match &self.path {
            None | Some(PathSpec::QuadlinStationary) => {
                if self.path.is_some() && !matches!(self.objective, ObjectiveSpec::Quadlin { .. }) {
                    return Err(Error::schema("path.type", "quadlin-stationary needs the quadlin objective"));
                }
            }
            Some(PathSpec::Values { values }) => {
                check_len("path.values", values.len(), states)?;
                for (w, row) in values.iter().enumerate() {
                    check_len(&format!("path.values[{w}]"), row.len(), domain.len())?;
                }
            }
            Some(PathSpec::Constant { levels }) => check_len("path.levels", levels.len(), states)?,
            Some(PathSpec::Solve(s)) => {
                let TimeDomain::Discrete { t_max } = *domain else {
                    return Err(Error::schema("path.type", "the solver works on discrete time"));
                };
                if t_max < order {
                    return Err(Error::schema("time.t_max", "horizon shorter than the order"));
                }
                let k = self.boundary.first_row();
                if k > 0 && s.head.len() != k {
                    return Err(Error::schema(
                        "path.head",
                        format!("boundary fixed:{k} needs {k} head values, got {}", s.head.len()),
                    ));
                }
                if !s.tail.is_empty() && s.tail.len() != order {
                    return Err(Error::schema(
                        "path.tail",
                        format!("the tail pins {order} values, got {}", s.tail.len()),
                    ));
                }
                for (name, rows) in [("head", &s.head), ("tail", &s.tail)] {
                    for (i, r) in rows.iter().enumerate() {
                        check_len(&format!("path.{name}[{i}]"), r.len(), states)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_perturbation(&self, states: usize, domain: &TimeDomain) -> Result<()> {
        let Some(p) = &self.perturbation else { return Ok(()) };
        let discrete = domain.is_discrete();
        let (levels, needs_discrete) = match p {
            PerturbationSpec::Step { levels, .. } | PerturbationSpec::Box { levels, .. } => (Some(levels), true),
            PerturbationSpec::Ramp { levels, .. } | PerturbationSpec::Bump { levels, .. } => (Some(levels), false),
            PerturbationSpec::Values { values, .. } => {
                check_len("perturbation.values", values.len(), states)?;
                for (w, row) in values.iter().enumerate() {
                    check_len(&format!("perturbation.values[{w}]"), row.len(), domain.len())?;
                }
                return Ok(());
            }
            PerturbationSpec::Kamihigashi { .. } => (None, false),
        };
        if let Some(l) = levels {
            check_len("perturbation.levels", l.len(), states)?;
        }
        if needs_discrete != discrete {
            return Err(Error::schema(
                "perturbation.kind",
                format!("this curve is for {} time", if needs_discrete { "discrete" } else { "continuous" }),
            ));
        }
        Ok(())
    }

    fn resolve_defaults(&mut self, obj: &dyn Objective, domain: &TimeDomain) -> Result<()> {
        let d = &mut self.diagnostics;
        let eps = d.eps_grid.get_or_insert_with(default_eps_grid);
        if eps.is_empty() || eps.windows(2).any(|w| w[1] >= w[0]) || eps.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::schema("diagnostics.eps_grid", "must be positive and strictly decreasing"));
        }
        let start = match &self.perturbation {
            Some(PerturbationSpec::Step { onset, .. }) => *onset as f64 + 2.0,
            Some(PerturbationSpec::Box { cutoff, .. }) => *cutoff as f64 + 2.0,
            Some(PerturbationSpec::Bump { cutoff, .. }) => cutoff + 2.0,
            Some(PerturbationSpec::Ramp { ramp_end, .. }) | Some(PerturbationSpec::Kamihigashi { ramp_end, .. }) => {
                ramp_end + 2.0
            }
            _ => 2.0,
        };
        if d.tprime_grid.is_none() {
            d.tprime_grid = Some(default_tprime_grid(obj, domain, start, DEFAULT_TPRIME_POINTS)?);
        }
        let tps = d.tprime_grid.as_ref().expect("just set");
        if tps.is_empty() || tps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::schema("diagnostics.tprime_grid", "must be non-empty and strictly increasing"));
        }
        let eps_bar = *d.eps_bar.get_or_insert(DEFAULT_EPS_BAR);
        if !(eps_bar > 0.0) {
            return Err(Error::schema("diagnostics.eps_bar", "must be positive"));
        }
        if d.sample_times.is_none() {
            d.sample_times = Some(tps.iter().take(3).copied().collect());
        }
        d.correspondence_samples.get_or_insert(DEFAULT_CORRESPONDENCE_SAMPLES);
        let approx = !obj.has_analytic_partials() || !domain.is_discrete();
        let tol = if approx { TOL_APPROX } else { TOL_ANALYTIC };
        self.tolerances.euler.get_or_insert(tol);
        self.tolerances.tvc.get_or_insert(tol);
        self.tolerances.decomposition.get_or_insert(DEFAULT_DECOMPOSITION_TOL);
        if let Some(PathSpec::Solve(s)) = &mut self.path {
            s.tolerance.get_or_insert(crate::solver::DEFAULT_SOLVE_TOL);
            s.max_iterations.get_or_insert(crate::solver::DEFAULT_MAX_ITERATIONS);
        }
        self.seed.get_or_insert(DEFAULT_SEED);
        Ok(())
    }
}

fn check_len(path: &str, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(Error::schema(path, format!("expected {want} entries, got {got}")));
    }
    Ok(())
}

/// The path of a loaded scenario, with the solver output when the path was
/// obtained by solving.
#[derive(Debug, Clone)]
pub struct BuiltPath {
    pub path: StochasticPath,
    pub solution: Option<Solution>,
}

impl Loaded {
    pub fn order(&self) -> usize {
        self.objective.order()
    }

    pub fn tolerances(&self) -> (f64, f64, f64) {
        let t = &self.scenario.tolerances;
        (
            t.euler.unwrap_or(TOL_ANALYTIC),
            t.tvc.unwrap_or(TOL_ANALYTIC),
            t.decomposition.unwrap_or(DEFAULT_DECOMPOSITION_TOL),
        )
    }

    pub fn build_path(&self) -> Result<BuiltPath> {
        let states = self.space.len();
        let domain = self.domain;
        let spec = self
            .scenario
            .path
            .as_ref()
            .ok_or_else(|| Error::schema("path", "this command needs a path"))?;
        let path = match spec {
            PathSpec::QuadlinStationary => {
                let ObjectiveSpec::Quadlin { alpha, beta, gamma } = &self.scenario.objective else {
                    unreachable!("validated at load");
                };
                if domain.is_discrete() {
                    StochasticPath::from_fn(domain, states, |t, w| match t as usize {
                        0 => alpha[w],
                        1 => alpha[w] - beta[w] / 2.0,
                        _ => alpha[w] - (beta[w] + gamma[w]) / 2.0,
                    })?
                } else {
                    StochasticPath::constant(domain, alpha)?
                }
            }
            PathSpec::Values { values } => StochasticPath::from_rows(domain, values.clone())?,
            PathSpec::Constant { levels } => StochasticPath::constant(domain, levels)?,
            PathSpec::Solve(s) => {
                let solution = newton_euler_solve(self.objective.as_ref(), &self.solve_spec(s)?, &self.space)?;
                return Ok(BuiltPath {
                    path: solution.path.clone(),
                    solution: Some(solution),
                });
            }
        };
        Ok(BuiltPath { path, solution: None })
    }

    pub fn solve_spec(&self, s: &SolveDirective) -> Result<SolveSpec> {
        let TimeDomain::Discrete { t_max } = self.domain else {
            return Err(Error::schema("path.type", "the solver works on discrete time"));
        };
        let n = self.order();
        let states = self.space.len();
        let guess = match s.guess {
            GuessKind::Zero => {
                let mut rows = vec![vec![0.0; t_max + 1]; states];
                for (t, v) in s.head.iter().enumerate() {
                    for w in 0..states {
                        rows[w][t] = v[w];
                    }
                }
                for (i, v) in s.tail.iter().enumerate() {
                    for w in 0..states {
                        rows[w][t_max + 1 - s.tail.len() + i] = v[w];
                    }
                }
                StochasticPath::from_rows(TimeDomain::discrete(t_max), rows)?
            }
            GuessKind::Linear if s.head.is_empty() && s.tail.is_empty() => {
                StochasticPath::constant(TimeDomain::discrete(t_max), &vec![0.0; states])?
            }
            GuessKind::Linear => interpolated_guess(t_max, &s.head, &s.tail)?,
        };
        let mut spec = SolveSpec::new(self.objective.as_ref(), t_max - n, self.scenario.boundary, guess)?;
        if let Some(t) = s.tolerance {
            spec = spec.with_tolerance(t);
        }
        if let Some(m) = s.max_iterations {
            spec = spec.with_max_iterations(m);
        }
        Ok(spec)
    }

    pub fn build_curve(&self, path: &StochasticPath) -> Result<PerturbationCurve> {
        let domain = self.domain;
        let spec = self
            .scenario
            .perturbation
            .as_ref()
            .ok_or_else(|| Error::schema("perturbation", "this command needs a perturbation"))?;
        let err = |e: Error| Error::schema("perturbation", e.to_string());
        match spec {
            PerturbationSpec::Step { onset, levels } => PerturbationCurve::step(domain, *onset, levels).map_err(err),
            PerturbationSpec::Box { start, cutoff, levels } => {
                PerturbationCurve::boxcar(domain, *start, *cutoff, levels).map_err(err)
            }
            PerturbationSpec::Ramp { levels, ramp_end } => PerturbationCurve::ramp(domain, levels, *ramp_end).map_err(err),
            PerturbationSpec::Bump { levels, cutoff } => PerturbationCurve::bump(domain, levels, *cutoff).map_err(err),
            PerturbationSpec::Values { values, head } => {
                let p = StochasticPath::from_rows(domain, values.clone())?;
                PerturbationCurve::new(p, *head, Tail::Unrestricted).map_err(err)
            }
            PerturbationSpec::Kamihigashi { level, ramp_end } => kamihigashi_curve(
                path,
                *level,
                RampSpec {
                    ramp_end: *ramp_end,
                    order: self.order(),
                },
            )
            .map_err(err),
        }
    }
}

/// Serialized echo of a resolved scenario.
pub fn echo(s: &Scenario) -> serde_json::Value {
    serde_json::to_value(s).expect("scenarios serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const COUNTER: &str = r#"{
        "time": {"kind": "discrete", "t_max": 50},
        "omega": {"probs": [0.5, 0.5]},
        "objective": {"type": "quadlin", "alpha": [1, 2], "beta": [0.5, 0.4], "gamma": [0.25, 0.2]},
        "path": {"type": "quadlin-stationary"},
        "perturbation": {"kind": "step", "levels": [1, 1]}
    }"#;

    #[test]
    fn loads_resolves_and_round_trips() {
        let l = parse_scenario(COUNTER).unwrap().load().unwrap();
        assert_eq!(l.scenario.order, Some(2));
        assert_eq!(l.scenario.time, TimeSpec::Discrete { t_max: 50 });
        let tps = l.scenario.diagnostics.tprime_grid.clone().unwrap();
        assert_eq!((tps[0], *tps.last().unwrap()), (3.0, 48.0));
        let text = serde_json::to_string(&l.scenario).unwrap();
        let again = parse_scenario(&text).unwrap().load().unwrap();
        assert_eq!(again.scenario, l.scenario);
        let path = l.build_path().unwrap().path;
        assert_eq!(path.scalar(1, 1), 1.8);
        let q = l.build_curve(&path).unwrap();
        assert_eq!(q.path().scalar(0, 0), 0.0);
    }

    #[test]
    fn schema_errors_name_the_key() {
        let bad = COUNTER.replace("[0.5, 0.5]", "[0.5, 0.4]");
        match parse_scenario(&bad).unwrap().load() {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "omega.probs"),
            other => panic!("{other:?}"),
        }
        let bad = COUNTER.replace("\"beta\"", "\"bta\"");
        match parse_scenario(&bad) {
            Err(Error::Schema { path, message }) => {
                assert_eq!(path, "objective");
                assert!(message.contains("bta"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        let bad = COUNTER.replace("\"t_max\": 50", "\"t_max\": 50, \"h\": 1");
        assert!(matches!(parse_scenario(&bad), Err(Error::Schema { .. })));
        let bad = COUNTER.replace("\"levels\": [1, 1]", "\"levels\": [1]");
        match parse_scenario(&bad).unwrap().load() {
            Err(Error::Schema { path, .. }) => assert_eq!(path, "perturbation.levels"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn expression_errors() {
        let text = r#"{
            "time": {"kind": "discrete", "t_max": 10},
            "omega": {"probs": [1]},
            "order": 1,
            "objective": {"type": "expr", "expr": "y0 + delta"}
        }"#;
        match parse_scenario(text).unwrap().load() {
            Err(Error::Expr(e)) => assert!(e.to_string().contains("delta")),
            other => panic!("{other:?}"),
        }
        let missing_order = text.replace("\"order\": 1,", "");
        assert!(matches!(parse_scenario(&missing_order).unwrap().load(), Err(Error::Schema { .. })));
    }

    #[test]
    fn solve_directive() {
        let text = r#"{
            "time": {"kind": "discrete", "t_max": 6},
            "omega": {"probs": [1]},
            "objective": {"type": "household", "head": "full-log"},
            "boundary": "fixed:2",
            "path": {"type": "solve", "head": [[1], [1]], "tail": [[0.2], [0.1]]}
        }"#;
        let l = parse_scenario(text).unwrap().load().unwrap();
        let built = l.build_path().unwrap();
        let sol = built.solution.unwrap();
        assert!(sol.report.residual_max <= 1e-10);
        assert_eq!(built.path.scalar(5, 0), 0.2);
        let short_head = text.replace("[[1], [1]]", "[[1]]");
        assert!(matches!(parse_scenario(&short_head).unwrap().load(), Err(Error::Schema { .. })));
    }
}
