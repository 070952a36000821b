//! A grammar definition toolkit.
//!
//! Grammars are written in an EBNF notation and kept free of tool-specific
//! code. Metadata is attached from the outside by aspects: query patterns
//! over grammar rules paired with attributes to attach or constraints to
//! check. Templates provide parameterized grammar fragments, and the Yacc
//! backend lowers an annotated grammar to a parser-generator input file.
//!
//! ```
//! use gramweave::{apply_aspect, parse_aspect, parse_grammar};
//!
//! let grammar = parse_grammar("Sum -> Sum '+' INT || INT ;", "sum.grammar").value.unwrap();
//! let aspect = parse_aspect("Rec -> Rec ..; { Rec { leftRecursive; }; }", "rec.aspect").value.unwrap();
//! let (woven, diagnostics) = apply_aspect(&aspect, &grammar);
//! assert!(diagnostics.is_empty());
//! assert!(woven.symbol("Sum").unwrap().annotations.contains("leftRecursive"));
//! ```

pub mod cli;
pub mod diagnostic;
pub mod model;
pub mod query;
pub mod syntax;
pub mod template;
pub mod weave;
pub mod yacc;

pub use diagnostic::{Diagnostic, Severity, SourceSpan};
pub use model::{Attribute, Expression, Grammar, NodeId, Value};
pub use query::{match_query, Binding, Query, Target};
pub use syntax::{
    parse_aspect, parse_attributes, parse_grammar, parse_query, parse_query_file, parse_templates, print_grammar,
    ParseResult,
};
pub use template::{instantiate, resolve_imports, TemplateLibrary};
pub use weave::{apply_aspect, check_constraints, Aspect};
pub use yacc::{emit_yacc, export_yacc, lower_ebnf, BnfGrammar};
