//! The scenario language: class and event-model declarations.

mod ast;
mod lexer;
mod optimize;
mod parser;
mod printer;
mod validate;

use std::sync::OnceLock;

pub use ast::*;
pub use lexer::{tokenize, DslError, Pos, Tok, Token};
pub use optimize::{
    build_trigger_tree, generated_name, optimize, optimize_all, Anchor, OptimizeError, OptimizedModel, TriggerTree,
};
pub use parser::{parse, parse_literal, parse_ontology, ROOT_CLASS};
pub use validate::{validate, ClassTable, Diagnostic};

pub const PRELUDE_SOURCE: &str = include_str!("prelude.screk");
pub const EXEMPLAR_SOURCE: &str = include_str!("exemplar.screk");

/// The built-in classes.
pub fn prelude() -> &'static Ontology {
    static PRELUDE: OnceLock<Ontology> = OnceLock::new();
    PRELUDE.get_or_init(|| parse(PRELUDE_SOURCE).expect("prelude parses"))
}

/// The shipped primitives and group event models, without the prelude.
pub fn exemplar() -> Ontology {
    parse(EXEMPLAR_SOURCE).expect("exemplar ontology parses")
}

/// Parses `text` and layers it over the prelude.
pub fn load_with_prelude(text: &str) -> Result<Ontology, DslError> {
    Ok(prelude().overlay(&parse_ontology(text)?))
}
