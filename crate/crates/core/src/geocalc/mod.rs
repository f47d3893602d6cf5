//! Straight-line geometric expression language evaluated over workspace
//! values. Programs cannot loop, recurse or touch the outside world.

mod eval;
mod knowledge;
mod parser;
mod value;

pub use eval::{call_builtin, evaluate, evaluate_expr, EvalError, EvalErrorKind};
pub use knowledge::{render_knowledge, retrieve_knowledge, FormulaDoc, TypeTag, KNOWLEDGE_BASE};
pub use parser::{
    parse_expression, parse_program, BinOp, Builtin, Expr, GeoProgram, Pos, Stmt, SyntaxError,
    UnOp, MAX_NESTING,
};
pub use value::{Bindings, GeoValue, MAX_DEPTH};
