use super::ast::{Ast, BinOp};
use super::lexer::{tokenize, Token, TokenKind};
use super::ExprError;

/// Ordered list of declared symbols; a variable's index is its position here.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SymbolTable {
    names: Vec<String>,
}

impl SymbolTable {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Self {
        let mut table = Self::default();
        for n in names {
            table.declare(n);
        }
        table
    }

    /// Declares `name` (idempotent) and returns its index.
    pub fn declare(&mut self, name: impl Into<String>) -> usize {
        let name = name.into();
        match self.index_of(&name) {
            Some(i) => i,
            None => {
                self.names.push(name);
                self.names.len() - 1
            }
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

pub fn parse_str(source: &str, symbols: &SymbolTable) -> Result<Ast, ExprError> {
    parse(&tokenize(source)?, symbols)
}

/// Recursive-descent parser; rejects identifiers missing from `symbols`.
pub fn parse(tokens: &[Token], symbols: &SymbolTable) -> Result<Ast, ExprError> {
    let end = tokens.last().map_or(0, |t| t.pos + t.lexeme.len());
    let mut p = Parser {
        tokens,
        at: 0,
        symbols,
        end,
    };
    let ast = p.expr()?;
    if let Some(t) = p.peek() {
        return Err(ExprError::Syntax {
            pos: t.pos,
            message: format!("expected one of `+ - * / ^` or end of input, found `{}`", t.lexeme),
        });
    }
    Ok(ast)
}

struct Parser<'a> {
    tokens: &'a [Token],
    at: usize,
    symbols: &'a SymbolTable,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.at)
    }

    fn bump(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.at);
        self.at += 1;
        t
    }

    fn peek_op(&self) -> Option<char> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Op(c),
                ..
            }) => Some(*c),
            _ => None,
        }
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn found(&self) -> String {
        self.peek()
            .map_or_else(|| "end of input".to_string(), |t| format!("`{}`", t.lexeme))
    }

    fn expect_rparen(&mut self) -> Result<(), ExprError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::RParen,
                ..
            }) => {
                self.at += 1;
                Ok(())
            }
            _ => Err(ExprError::Syntax {
                pos: self.pos(),
                message: format!("expected `)`, found {}", self.found()),
            }),
        }
    }

    fn expr(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.term()?;
        while let Some(c @ ('+' | '-')) = self.peek_op() {
            self.at += 1;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Ast::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Ast, ExprError> {
        let mut lhs = self.unary()?;
        while let Some(c @ ('*' | '/')) = self.peek_op() {
            self.at += 1;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Ast::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Ast, ExprError> {
        if self.peek_op() == Some('-') {
            self.at += 1;
            return Ok(Ast::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast, ExprError> {
        let base = self.atom()?;
        if self.peek_op() != Some('^') {
            return Ok(base);
        }
        self.at += 1;
        let pos = self.pos();
        let exponent = self.unary()?;
        if !exponent.variables().is_empty() {
            return Err(ExprError::VariableExponent { pos });
        }
        let c = exponent.eval(&[]).map_err(|e| ExprError::Syntax {
            pos,
            message: format!("exponent does not evaluate to a number: {e}"),
        })?;
        if !c.is_finite() {
            return Err(ExprError::Syntax {
                pos,
                message: "exponent must be finite".into(),
            });
        }
        Ok(Ast::Pow(Box::new(base), c))
    }

    fn atom(&mut self) -> Result<Ast, ExprError> {
        let pos = self.pos();
        let Some(tok) = self.bump().cloned() else {
            return Err(ExprError::Syntax {
                pos,
                message: "expected a number, identifier, function or `(`, found end of input".into(),
            });
        };
        match tok.kind {
            TokenKind::Number(v) => Ok(Ast::Const(v)),
            TokenKind::Ident(name) => {
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::LParen)) {
                    return Err(ExprError::UnknownIdentifier { name, pos: tok.pos });
                }
                match self.symbols.index_of(&name) {
                    Some(index) => Ok(Ast::Var { name, index }),
                    None => Err(ExprError::UnknownIdentifier { name, pos: tok.pos }),
                }
            }
            TokenKind::Func(f) => {
                match self.peek().map(|t| &t.kind) {
                    Some(TokenKind::LParen) => self.at += 1,
                    _ => {
                        return Err(ExprError::Syntax {
                            pos: self.pos(),
                            message: format!("expected `(` after `{}`, found {}", f.name(), self.found()),
                        })
                    }
                }
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::RParen)) {
                    return Err(ExprError::Arity {
                        name: f.name().into(),
                        pos: tok.pos,
                    });
                }
                let arg = self.expr()?;
                if matches!(self.peek().map(|t| &t.kind), Some(TokenKind::Comma)) {
                    return Err(ExprError::Arity {
                        name: f.name().into(),
                        pos: tok.pos,
                    });
                }
                self.expect_rparen()?;
                Ok(Ast::Call(f, Box::new(arg)))
            }
            TokenKind::LParen => {
                let inner = self.expr()?;
                self.expect_rparen()?;
                Ok(inner)
            }
            _ => Err(ExprError::Syntax {
                pos: tok.pos,
                message: format!("expected a number, identifier, function or `(`, found `{}`", tok.lexeme),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Func;

    fn table() -> SymbolTable {
        SymbolTable::new(["y0", "y1", "y2", "alpha", "beta", "gamma"])
    }

    fn v(name: &str) -> Ast {
        Ast::Var {
            name: name.into(),
            index: table().index_of(name).unwrap(),
        }
    }

    #[test]
    fn quadratic_linear_objective() {
        let ast = parse_str("(y0 - alpha)^2 + beta*y1 + gamma*y2", &table()).unwrap();
        let expected = Ast::binary(
            BinOp::Add,
            Ast::binary(
                BinOp::Add,
                Ast::Pow(Box::new(Ast::binary(BinOp::Sub, v("y0"), v("alpha"))), 2.0),
                Ast::binary(BinOp::Mul, v("beta"), v("y1")),
            ),
            Ast::binary(BinOp::Mul, v("gamma"), v("y2")),
        );
        assert_eq!(ast, expected);
        // alpha=1, beta=0.5, gamma=0.25 on the window (0, 1, 1)
        assert_eq!(ast.eval(&[0.0, 1.0, 1.0, 1.0, 0.5, 0.25]).unwrap(), 1.75);
    }

    #[test]
    fn malformed_input_points_at_the_offender() {
        match parse_str("y0 + * y1", &table()) {
            Err(ExprError::Syntax { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse_str("(y0", &table()), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_str("y0 y1", &table()), Err(ExprError::Syntax { pos: 3, .. })));
        assert!(matches!(parse_str("", &table()), Err(ExprError::Syntax { pos: 0, .. })));
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let ast = parse_str("-y0^2", &table()).unwrap();
        assert_eq!(ast, Ast::Neg(Box::new(Ast::Pow(Box::new(v("y0")), 2.0))));
        assert_eq!(ast.eval(&[3.0]).unwrap(), -9.0);
    }

    #[test]
    fn power_is_right_associative_and_folds() {
        let ast = parse_str("y0^2^3", &table()).unwrap();
        assert_eq!(ast, Ast::Pow(Box::new(v("y0")), 8.0));
        let ast = parse_str("y0^-(1/2)", &table()).unwrap();
        assert_eq!(ast, Ast::Pow(Box::new(v("y0")), -0.5));
    }

    #[test]
    fn identifiers_and_arity() {
        assert_eq!(
            parse_str("y0 + delta", &table()),
            Err(ExprError::UnknownIdentifier {
                name: "delta".into(),
                pos: 5
            })
        );
        assert!(matches!(parse_str("ln(y0, y1)", &table()), Err(ExprError::Arity { .. })));
        assert!(matches!(parse_str("exp()", &table()), Err(ExprError::Arity { .. })));
        assert!(matches!(parse_str("foo(y0)", &table()), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(parse_str("y0^y1", &table()), Err(ExprError::VariableExponent { pos: 3 })));
        let ln = parse_str("ln(y0 + y1 - y2)", &table()).unwrap();
        assert!(matches!(ln, Ast::Call(Func::Ln, _)));
    }

    #[test]
    fn print_reparse_is_stable() {
        for src in [
            "(y0 - alpha)^2 + beta*y1 + gamma*y2",
            "-y0^2",
            "y0 - (y1 - y2)",
            "y0/(y1*y2)",
            "(y0/y1)/y2",
            "--y0",
            "(-y0)^3",
            "exp(-y0)*ln(abs(y1) + 1e-3)",
            "sqrt(y0^2 + 1)^-1.5",
        ] {
            let a = parse_str(src, &table()).unwrap();
            let b = parse_str(&a.to_string(), &table()).unwrap();
            assert_eq!(a, b, "{src} -> {a}");
        }
    }
}
