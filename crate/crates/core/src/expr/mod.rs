//! A small arithmetic language for user-defined objectives.
//!
//! ```text
//! expr  := term (("+"|"-") term)*
//! term  := unary (("*"|"/") unary)*
//! unary := "-" unary | power
//! power := atom ("^" unary)?
//! atom  := number | ident | ident "(" expr ")" | "(" expr ")"
//! ```
//!
//! Exponents must fold to constants, which keeps symbolic differentiation
//! closed over the node set. `ln` of a nonpositive number evaluates to `-inf`.

mod ast;
mod diff;
mod lexer;
mod parser;

pub use ast::{Ast, BinOp, Func};
pub use diff::symbolic_partial;
pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse, parse_str, SymbolTable};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },

    #[error("unknown identifier `{name}` at byte {pos}")]
    UnknownIdentifier { name: String, pos: usize },

    #[error("function `{name}` at byte {pos} takes exactly one argument")]
    Arity { name: String, pos: usize },

    #[error("exponent at byte {pos} must be a constant")]
    VariableExponent { pos: usize },

    #[error("unbound symbol `{0}`")]
    Unbound(String),

    #[error("division by zero")]
    DivisionByZero,

    #[error("evaluation produced {0}")]
    NotANumber(String),
}

impl ExprError {
    /// Errors raised while evaluating (as opposed to reading) an expression.
    pub fn is_evaluation(&self) -> bool {
        matches!(
            self,
            ExprError::Unbound(_) | ExprError::DivisionByZero | ExprError::NotANumber(_)
        )
    }
}
