//! The shield specification language: parsing, validation, printing, and
//! set-expression evaluation.

pub mod ast;
pub mod check;
pub mod eval;
pub mod parse;
pub mod print;

pub use ast::{Builtin, ProcessTerm, ShieldSpec, StateSetExpr};
pub use check::{check_wellformed, subterm_count, ValidationReport};
pub use eval::{eval_bindings, eval_set};
pub use parse::parse_spec;
pub use print::{print_setexpr, print_spec, print_term};
