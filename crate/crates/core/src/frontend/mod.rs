//! Program text, predicates and their normal forms.

pub mod ast;
mod lexer;
pub use lexer::Tok;
pub mod parser;
pub mod predicate;

pub use ast::{BExpr, CmpOp, Cond, DiscreteDist, Expr, Label, Program, Site, SiteKind, Stmt};
pub use parser::{parse_bexpr, parse_expr, parse_program, Parser};
pub use predicate::{parse_linear_predicate, to_dnf};
