use super::ast::{Ast, BinOp, Func};

/// `d ast / d variable`, simplified by constant folding and 0/1 identities only.
pub fn symbolic_partial(ast: &Ast, variable: &str) -> Ast {
    match ast {
        Ast::Const(_) => Ast::Const(0.0),
        Ast::Var { name, .. } => Ast::Const(if name == variable { 1.0 } else { 0.0 }),
        Ast::Neg(a) => neg(symbolic_partial(a, variable)),
        Ast::Binary(op, a, b) => {
            let da = symbolic_partial(a, variable);
            let db = symbolic_partial(b, variable);
            let (a, b) = (a.as_ref().clone(), b.as_ref().clone());
            match op {
                BinOp::Add => add(da, db),
                BinOp::Sub => sub(da, db),
                BinOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                BinOp::Div => {
                    if is_const(&db, 0.0) {
                        div(da, b)
                    } else {
                        div(sub(mul(da, b.clone()), mul(a, db)), pow(b, 2.0))
                    }
                }
            }
        }
        Ast::Pow(a, c) => {
            let da = symbolic_partial(a, variable);
            mul(mul(Ast::Const(*c), pow(a.as_ref().clone(), c - 1.0)), da)
        }
        Ast::Call(f, u) => {
            let du = symbolic_partial(u, variable);
            let u = u.as_ref().clone();
            match f {
                Func::Ln => div(du, u),
                Func::Exp => mul(Ast::Call(Func::Exp, Box::new(u)), du),
                Func::Sqrt => div(du, mul(Ast::Const(2.0), Ast::Call(Func::Sqrt, Box::new(u)))),
                Func::Abs => mul(div(u.clone(), Ast::Call(Func::Abs, Box::new(u))), du),
            }
        }
    }
}

fn is_const(a: &Ast, c: f64) -> bool {
    matches!(a, Ast::Const(x) if *x == c)
}

fn as_const(a: &Ast) -> Option<f64> {
    match a {
        Ast::Const(x) => Some(*x),
        _ => None,
    }
}

fn neg(a: Ast) -> Ast {
    match a {
        Ast::Const(c) => Ast::Const(-c),
        Ast::Neg(inner) => *inner,
        a => Ast::Neg(Box::new(a)),
    }
}

fn add(a: Ast, b: Ast) -> Ast {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Ast::Const(x + y),
        (Some(x), _) if x == 0.0 => b,
        (_, Some(y)) if y == 0.0 => a,
        _ => Ast::binary(BinOp::Add, a, b),
    }
}

fn sub(a: Ast, b: Ast) -> Ast {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Ast::Const(x - y),
        (_, Some(y)) if y == 0.0 => a,
        (Some(x), _) if x == 0.0 => neg(b),
        _ => Ast::binary(BinOp::Sub, a, b),
    }
}

fn mul(a: Ast, b: Ast) -> Ast {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) => Ast::Const(x * y),
        (Some(x), _) | (_, Some(x)) if x == 0.0 => Ast::Const(0.0),
        (Some(x), _) if x == 1.0 => b,
        (_, Some(y)) if y == 1.0 => a,
        _ => Ast::binary(BinOp::Mul, a, b),
    }
}

fn div(a: Ast, b: Ast) -> Ast {
    match (as_const(&a), as_const(&b)) {
        (Some(x), Some(y)) if y != 0.0 => Ast::Const(x / y),
        (Some(x), _) if x == 0.0 => Ast::Const(0.0),
        (_, Some(y)) if y == 1.0 => a,
        _ => Ast::binary(BinOp::Div, a, b),
    }
}

fn pow(a: Ast, c: f64) -> Ast {
    if c == 0.0 {
        return Ast::Const(1.0);
    }
    if c == 1.0 {
        return a;
    }
    match a {
        Ast::Const(x) if x.powf(c).is_finite() => Ast::Const(x.powf(c)),
        a => Ast::Pow(Box::new(a), c),
    }
}
