use std::collections::BTreeMap;

use super::{Objective, ObjectiveKind};
use crate::error::{Error, Result};
use crate::expr::{parse_str, symbolic_partial, Ast, BinOp, SymbolTable};

/// An objective written in the expression language. Slots are named
/// `y0..yn`, time is `t`, and every other identifier must be a declared
/// constant with one value per state.
#[derive(Debug, Clone)]
pub struct ExprObjective {
    source: String,
    order: usize,
    kind: ObjectiveKind,
    ast: Ast,
    partials: Vec<Ast>,
    /// Constant values per state, in symbol-table order after `t`.
    constants: Vec<Vec<f64>>,
    constant_names: Vec<String>,
    symbols: SymbolTable,
}

pub fn slot_name(k: usize) -> String {
    format!("y{k}")
}

impl ExprObjective {
    pub fn new(
        source: &str,
        order: usize,
        kind: ObjectiveKind,
        constants: &BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let mut symbols = SymbolTable::new((0..=order).map(slot_name));
        symbols.declare("t");
        let states = constants.values().next().map(Vec::len);
        for (name, values) in constants {
            if symbols.index_of(name).is_some() {
                return Err(Error::input(format!("constant `{name}` shadows a slot or `t`")));
            }
            if Some(values.len()) != states {
                return Err(Error::input(format!(
                    "constant `{name}` has {} values; every constant needs one per state",
                    values.len()
                )));
            }
            if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                return Err(Error::input(format!("constant `{name}` has non-finite value {v}")));
            }
            symbols.declare(name.clone());
        }
        let ast = parse_str(source, &symbols)?;
        let partials = (0..=order).map(|k| symbolic_partial(&ast, &slot_name(k))).collect();
        let states = states.unwrap_or(0);
        let constants_by_state = (0..states)
            .map(|w| constants.values().map(|v| v[w]).collect())
            .collect();
        Ok(Self {
            source: source.to_string(),
            order,
            kind,
            ast,
            partials,
            constants: constants_by_state,
            constant_names: constants.keys().cloned().collect(),
            symbols,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn ast(&self) -> &Ast {
        &self.ast
    }

    /// Symbolic partial in slot `k`, as an expression.
    pub fn partial_expr(&self, k: usize) -> &Ast {
        &self.partials[k]
    }

    pub fn constant_names(&self) -> &[String] {
        &self.constant_names
    }

    fn env(&self, slots: &[f64], t: f64, w: usize) -> Result<Vec<f64>> {
        let consts: &[f64] = if self.constant_names.is_empty() {
            &[]
        } else {
            self.constants.get(w).ok_or_else(|| {
                Error::input(format!(
                    "state {} out of range: constants cover {} states",
                    w + 1,
                    self.constants.len()
                ))
            })?
        };
        let mut env = Vec::with_capacity(slots.len() + 1 + consts.len());
        env.extend_from_slice(slots);
        env.push(t);
        env.extend_from_slice(consts);
        Ok(env)
    }

    fn with_ast(&self, ast: Ast, kind: ObjectiveKind, source: String) -> Self {
        let partials = (0..=self.order).map(|k| symbolic_partial(&ast, &slot_name(k))).collect();
        Self {
            source,
            order: self.order,
            kind,
            ast,
            partials,
            constants: self.constants.clone(),
            constant_names: self.constant_names.clone(),
            symbols: self.symbols.clone(),
        }
    }
}

impl Objective for ExprObjective {
    fn order(&self) -> usize {
        self.order
    }

    fn kind(&self) -> ObjectiveKind {
        self.kind
    }

    fn describe(&self) -> String {
        format!("expr `{}`", self.source)
    }

    fn states(&self) -> Option<usize> {
        (!self.constant_names.is_empty()).then_some(self.constants.len())
    }

    fn eval(&self, slots: &[f64], t: f64, w: usize) -> Result<f64> {
        Ok(self.ast.eval(&self.env(slots, t, w)?)?)
    }

    fn analytic_partial(&self, slot: usize, _comp: usize, slots: &[f64], t: f64, w: usize) -> Option<Result<f64>> {
        Some(
            self.env(slots, t, w)
                .and_then(|env| Ok(self.partials[slot].eval(&env)?)),
        )
    }

    fn has_analytic_partials(&self) -> bool {
        true
    }

    /// Substitutes `y0 -> y0`, `y1 -> y0 + y1`, `y2 -> y0 + 2*y1 + y2` in the
    /// expression tree and differentiates the result symbolically.
    fn closed_form_induced(&self) -> Option<Box<dyn Objective>> {
        if self.order != 2 || self.kind != ObjectiveKind::Discrete {
            return None;
        }
        let var = |k: usize| Ast::Var {
            name: slot_name(k),
            index: k,
        };
        let images = [
            var(0),
            Ast::binary(BinOp::Add, var(0), var(1)),
            Ast::binary(
                BinOp::Add,
                Ast::binary(BinOp::Add, var(0), Ast::binary(BinOp::Mul, Ast::Const(2.0), var(1))),
                var(2),
            ),
        ];
        let ast = substitute(&self.ast, &images);
        let source = ast.to_string();
        Some(Box::new(self.with_ast(ast, ObjectiveKind::Continuous, source)))
    }
}

fn substitute(ast: &Ast, images: &[Ast]) -> Ast {
    let sub = |a: &Ast| Box::new(substitute(a, images));
    match ast {
        Ast::Var { index, .. } if *index < images.len() => images[*index].clone(),
        Ast::Const(_) | Ast::Var { .. } => ast.clone(),
        Ast::Neg(a) => Ast::Neg(sub(a)),
        Ast::Binary(op, a, b) => Ast::Binary(*op, sub(a), sub(b)),
        Ast::Pow(a, c) => Ast::Pow(sub(a), *c),
        Ast::Call(f, a) => Ast::Call(*f, sub(a)),
    }
}
