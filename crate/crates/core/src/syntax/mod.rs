//! Concrete syntax: grammar files, aspect files, and template files.
//!
//! Parsing stops at the first syntax error; semantic checks (duplicate
//! names, unbound variables, undeclared placeholders) are collected and
//! reported together. A result carries a value only when no error was
//! reported.

mod lexer;
mod parser;
mod printer;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::model::{AnnotationSet, Grammar};
use crate::query::Query;
use crate::template::TemplateLibrary;
use crate::weave::Aspect;

pub use printer::{print_expression, print_grammar};

#[derive(Debug, Clone)]
pub struct ParseResult<T> {
    pub value: Option<T>,
    pub diagnostics: Vec<Diagnostic>,
}

impl<T> ParseResult<T> {
    pub(crate) fn new(value: Option<T>, diagnostics: Vec<Diagnostic>) -> Self {
        let value = if has_errors(&diagnostics) { None } else { value };
        ParseResult { value, diagnostics }
    }

    pub fn has_errors(&self) -> bool {
        has_errors(&self.diagnostics)
    }

    pub fn into_result(self) -> Result<T, Vec<Diagnostic>> {
        self.value.ok_or(self.diagnostics)
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> ParseResult<U> {
        ParseResult {
            value: self.value.map(f),
            diagnostics: self.diagnostics,
        }
    }
}

/// Parses a grammar file: rules, `import` declarations, and inline template
/// declarations, in any order.
pub fn parse_grammar(text: &str, file_name: &str) -> ParseResult<Grammar> {
    parser::run(text, file_name, |p| p.grammar_file())
}

/// Parses an aspect file. The aspect is named after the file stem.
pub fn parse_aspect(text: &str, file_name: &str) -> ParseResult<Aspect> {
    let name = std::path::Path::new(file_name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parser::run(text, file_name, |p| p.aspect_file(name))
}

/// Parses a single query with no rule body.
pub fn parse_query(text: &str, file_name: &str) -> ParseResult<Query> {
    parser::run(text, file_name, |p| p.query_only())
}

/// Parses a sequence of queries, each optionally followed by a rule body
/// (so an aspect file is also a valid query file). Bodies are checked and
/// then ignored.
pub fn parse_query_file(text: &str, file_name: &str) -> ParseResult<Vec<Query>> {
    parser::run(text, file_name, |p| p.query_file())
}

pub fn parse_templates(text: &str, file_name: &str) -> ParseResult<TemplateLibrary> {
    parser::run(text, file_name, |p| p.template_file())
}

/// Parses a bare list of attributes (`a; b = 1; c = { d; };`).
pub fn parse_attributes(text: &str, file_name: &str) -> ParseResult<AnnotationSet> {
    parser::run(text, file_name, |p| p.attribute_list())
}
