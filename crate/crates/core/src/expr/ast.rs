use std::collections::HashMap;
use std::fmt;

use super::ExprError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Ln,
    Exp,
    Abs,
    Sqrt,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "ln" => Some(Func::Ln),
            "exp" => Some(Func::Exp),
            "abs" => Some(Func::Abs),
            "sqrt" => Some(Func::Sqrt),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
        }
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Ln if x <= 0.0 => f64::NEG_INFINITY,
            Func::Ln => x.ln(),
            Func::Exp => x.exp(),
            Func::Abs => x.abs(),
            Func::Sqrt => x.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Ast {
    Const(f64),
    /// `index` is the position of `name` in the symbol table the tree was parsed against.
    Var { name: String, index: usize },
    Neg(Box<Ast>),
    Binary(BinOp, Box<Ast>, Box<Ast>),
    /// Base raised to a constant exponent.
    Pow(Box<Ast>, f64),
    Call(Func, Box<Ast>),
}

impl Ast {
    pub fn constant(c: f64) -> Self {
        Ast::Const(c)
    }

    pub fn binary(op: BinOp, a: Ast, b: Ast) -> Self {
        Ast::Binary(op, Box::new(a), Box::new(b))
    }

    /// Evaluate with `values[i]` bound to the symbol at table index `i`.
    ///
    /// The result lies in `[-inf, inf)`; NaN and `+inf` are errors.
    pub fn eval(&self, values: &[f64]) -> Result<f64, ExprError> {
        let v = self.eval_inner(&|name, index| values.get(index).copied().ok_or_else(|| ExprError::Unbound(name.to_string())))?;
        finish(v)
    }

    /// Evaluate with symbols looked up by name.
    pub fn eval_env(&self, env: &HashMap<String, f64>) -> Result<f64, ExprError> {
        let v = self.eval_inner(&|name, _| env.get(name).copied().ok_or_else(|| ExprError::Unbound(name.to_string())))?;
        finish(v)
    }

    fn eval_inner(&self, lookup: &dyn Fn(&str, usize) -> Result<f64, ExprError>) -> Result<f64, ExprError> {
        let v = match self {
            Ast::Const(c) => *c,
            Ast::Var { name, index } => lookup(name, *index)?,
            Ast::Neg(a) => -a.eval_inner(lookup)?,
            Ast::Binary(op, a, b) => {
                let x = a.eval_inner(lookup)?;
                let y = b.eval_inner(lookup)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y == 0.0 {
                            return Err(ExprError::DivisionByZero);
                        }
                        x / y
                    }
                }
            }
            Ast::Pow(a, c) => {
                let x = a.eval_inner(lookup)?;
                if x == 0.0 && *c < 0.0 {
                    return Err(ExprError::DivisionByZero);
                }
                if c.fract() == 0.0 && c.abs() <= i32::MAX as f64 {
                    x.powi(*c as i32)
                } else {
                    x.powf(*c)
                }
            }
            Ast::Call(f, a) => f.apply(a.eval_inner(lookup)?),
        };
        if v.is_nan() {
            return Err(ExprError::NotANumber("NaN".into()));
        }
        Ok(v)
    }

    /// Names of the variables referenced by the tree.
    pub fn variables(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_vars<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Ast::Const(_) => {}
            Ast::Var { name, .. } => out.push(name),
            Ast::Neg(a) | Ast::Pow(a, _) | Ast::Call(_, a) => a.collect_vars(out),
            Ast::Binary(_, a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Ast::Binary(op, ..) => op.precedence(),
            Ast::Neg(_) => 3,
            Ast::Pow(..) => 4,
            Ast::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }

    fn write_child(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

fn finish(v: f64) -> Result<f64, ExprError> {
    if v == f64::INFINITY {
        Err(ExprError::NotANumber("+inf".into()))
    } else {
        Ok(v)
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c < 0.0 {
        write!(f, "-")?;
    }
    // `{:?}` keeps the shortest round-trip digits but renders large or tiny
    // magnitudes in exponent form, which the lexer reads back
    let text = format!("{:?}", c.abs());
    let text = text.strip_suffix(".0").unwrap_or(&text);
    write!(f, "{text}")
}

/// Prints with the minimum parentheses needed to reparse to the same tree.
impl fmt::Display for Ast {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ast::Const(c) => write_number(f, *c),
            Ast::Var { name, .. } => write!(f, "{name}"),
            Ast::Neg(a) => {
                write!(f, "-")?;
                a.write_child(f, 3)
            }
            Ast::Binary(op, a, b) => {
                let p = op.precedence();
                a.write_child(f, p)?;
                write!(f, "{}", op.symbol())?;
                b.write_child(f, p + 1)
            }
            Ast::Pow(a, c) => {
                a.write_child(f, 5)?;
                write!(f, "^")?;
                write_number(f, *c)
            }
            Ast::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(name: &str, index: usize) -> Ast {
        Ast::Var {
            name: name.into(),
            index,
        }
    }

    #[test]
    fn ln_of_nonpositive_is_neg_inf() {
        let e = Ast::Call(Func::Ln, Box::new(var("y0", 0)));
        assert_eq!(e.eval(&[0.0]).unwrap(), f64::NEG_INFINITY);
        assert_eq!(e.eval(&[-2.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn evaluation_errors() {
        let div = Ast::binary(BinOp::Div, var("y0", 0), Ast::Const(0.0));
        assert_eq!(div.eval(&[1.0]), Err(ExprError::DivisionByZero));
        let sq = Ast::Call(Func::Sqrt, Box::new(var("y0", 0)));
        assert!(matches!(sq.eval(&[-1.0]), Err(ExprError::NotANumber(_))));
        assert_eq!(var("beta", 3).eval(&[1.0]), Err(ExprError::Unbound("beta".into())));
        let neg_ln = Ast::Neg(Box::new(Ast::Call(Func::Ln, Box::new(var("y0", 0)))));
        assert!(matches!(neg_ln.eval(&[0.0]), Err(ExprError::NotANumber(_))));
    }

    #[test]
    fn env_lookup() {
        let mut env = HashMap::new();
        env.insert("y0".to_string(), 2.0);
        let e = Ast::Pow(Box::new(var("y0", 0)), 3.0);
        assert_eq!(e.eval_env(&env).unwrap(), 8.0);
    }

    #[test]
    fn printing() {
        let e = Ast::binary(
            BinOp::Mul,
            Ast::Const(2.0),
            Ast::binary(BinOp::Sub, var("y0", 0), var("alpha", 1)),
        );
        assert_eq!(e.to_string(), "2*(y0 - alpha)");
        let e = Ast::Neg(Box::new(Ast::Pow(Box::new(var("y0", 0)), 2.0)));
        assert_eq!(e.to_string(), "-y0^2");
        assert_eq!(Ast::Pow(Box::new(var("y0", 0)), -0.5).to_string(), "y0^-0.5");
        assert_eq!(Ast::Const(1e-300).to_string(), "1e-300");
    }
}
