//! Smooth maps with exact forward-mode jets and the expression DSL that
//! defines them.

pub mod expr;
pub mod jet;
pub mod map;

pub use expr::{parse_expression, BinaryOp, Constant, ExprAst, UnaryOp, Var};
pub use jet::{Jet, JetSpace};
pub use map::{const_field, eval_jet, fd_oracle_check, Field, FnField, Point, SmoothMap};
