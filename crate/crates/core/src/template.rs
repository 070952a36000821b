//! Grammar templates: placeholders, instantiation into namespaces, and
//! import resolution.
//!
//! A template such as
//!
//! ```text
//! Symbol binaryOperation<ID $name, Expression $sign, Expression $argument> {
//!     $name -> $argument ($sign $argument)*;
//! }
//! ```
//!
//! is expanded eagerly by [`resolve_imports`]: each `import` becomes a
//! [`Namespace`] registered on the grammar, and the import declarations and
//! templates are dropped from the result.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::diagnostic::{has_errors, Diagnostic, SourceSpan};
use crate::model::{ExprKind, Expression, Grammar, Namespace, Production, QualifiedName, Symbol};
use crate::syntax::ParseResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateKind {
    Symbol,
    Production,
    Expression,
    Id,
}

impl TemplateKind {
    pub fn keyword(self) -> &'static str {
        match self {
            TemplateKind::Symbol => "Symbol",
            TemplateKind::Production => "Production",
            TemplateKind::Expression => "Expression",
            TemplateKind::Id => "ID",
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "Symbol" => TemplateKind::Symbol,
            "Production" => TemplateKind::Production,
            "Expression" => TemplateKind::Expression,
            "ID" => TemplateKind::Id,
            _ => return None,
        })
    }
}

impl fmt::Display for TemplateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

/// Placeholder kinds share their keywords with template kinds.
pub type ParamKind = TemplateKind;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub kind: ParamKind,
    /// `Production* $p` accepts any number of productions.
    pub many: bool,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RuleHead {
    Name(String),
    Placeholder(String),
}

#[derive(Debug, Clone)]
pub struct TemplateRule {
    pub head: RuleHead,
    pub productions: Vec<Production>,
    pub span: SourceSpan,
}

impl PartialEq for TemplateRule {
    fn eq(&self, other: &Self) -> bool {
        self.head == other.head && self.productions == other.productions
    }
}

#[derive(Debug, Clone)]
pub struct Template {
    pub kind: TemplateKind,
    pub name: String,
    pub params: Vec<Param>,
    pub rules: Vec<TemplateRule>,
    pub span: SourceSpan,
}

impl PartialEq for Template {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.name == other.name && self.params == other.params && self.rules == other.rules
    }
}

impl Template {
    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TemplateLibrary {
    templates: Vec<Template>,
}

impl TemplateLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, name: &str) -> Option<&Template> {
        self.templates.iter().find(|t| t.name == name)
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Template> {
        self.templates.iter()
    }

    /// Adds `template`; fails (returning it) if the name is taken.
    pub fn insert(&mut self, template: Template) -> Result<(), Box<Template>> {
        if self.get(&template.name).is_some() {
            return Err(Box::new(template));
        }
        self.templates.push(template);
        Ok(())
    }

    /// Merges `other` into `self`, reporting duplicate names.
    pub fn extend(&mut self, other: TemplateLibrary) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        for t in other.templates {
            if let Err(t) = self.insert(t) {
                diags.push(Diagnostic::error(format!("duplicate template `{}`", t.name), t.span.clone()));
            }
        }
        diags
    }
}

/// One argument of an import.
#[derive(Debug, Clone, PartialEq)]
pub enum Argument {
    /// One expression, or several `||`-separated productions.
    Productions(Vec<Expression>),
    /// The `empty` keyword: zero productions for a `Production*` parameter.
    Empty,
}

#[derive(Debug, Clone)]
pub struct ImportDecl {
    pub alias: Option<String>,
    pub template: String,
    pub args: Vec<Argument>,
    pub span: SourceSpan,
}

impl PartialEq for ImportDecl {
    fn eq(&self, other: &Self) -> bool {
        self.alias == other.alias && self.template == other.template && self.args == other.args
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template `{template}` expects {expected} argument(s), got {found}")]
    Arity {
        template: String,
        expected: usize,
        found: usize,
    },
    #[error("argument for `${param}` must be {expected}")]
    KindMismatch { param: String, expected: &'static str },
    #[error("instantiation defines symbol `{0}` more than once")]
    NameClash(String),
    #[error("symbol `{0}` has no productions after instantiation")]
    NoProductions(String),
    #[error("placeholder `${0}` is not a parameter of the template")]
    UndeclaredPlaceholder(String),
}

/// Expands `template` with `args` into a namespace named `alias`.
///
/// Argument kinds: `ID` takes a plain identifier (it may name a produced
/// symbol), `Symbol` takes a symbol reference, `Expression` takes one
/// expression, `Production` one production, and `Production*` any number of
/// `||`-separated productions (or `empty`). Every substituted node gets a
/// fresh id, so an argument used twice yields distinct nodes.
pub fn instantiate(template: &Template, args: &[Argument], alias: &str) -> Result<Namespace, TemplateError> {
    if args.len() != template.params.len() {
        return Err(TemplateError::Arity {
            template: template.name.clone(),
            expected: template.params.len(),
            found: args.len(),
        });
    }
    let bound: Vec<(&Param, Bound)> = template
        .params
        .iter()
        .zip(args)
        .map(|(p, a)| bind_argument(p, a).map(|b| (p, b)))
        .collect::<Result<_, _>>()?;
    let lookup = |name: &str| {
        bound
            .iter()
            .find(|(p, _)| p.name == name)
            .map(|(_, b)| b)
            .ok_or_else(|| TemplateError::UndeclaredPlaceholder(name.to_string()))
    };

    let mut symbols: Vec<Symbol> = Vec::new();
    for rule in &template.rules {
        let name = match &rule.head {
            RuleHead::Name(n) => n.clone(),
            RuleHead::Placeholder(p) => match lookup(p)? {
                Bound::Name(n) => n.clone(),
                _ => {
                    return Err(TemplateError::KindMismatch {
                        param: p.clone(),
                        expected: "an identifier (used as a rule head)",
                    })
                }
            },
        };
        if symbols.iter().any(|s| s.name == name) {
            return Err(TemplateError::NameClash(name));
        }
        let mut productions = Vec::new();
        for prod in &rule.productions {
            if let ExprKind::Placeholder(p) = &prod.body.kind {
                if let Bound::Productions(list) = lookup(p)? {
                    for body in list {
                        let mut spliced = Production::new(body.clone());
                        spliced.refresh_ids();
                        productions.push(spliced);
                    }
                    continue;
                }
            }
            let mut body = prod.body.clone();
            substitute(&mut body, &lookup)?;
            let mut out = Production {
                body,
                annotations: prod.annotations.clone(),
                id: prod.id,
                span: prod.span.clone(),
            };
            out.refresh_ids();
            productions.push(out);
        }
        if productions.is_empty() {
            return Err(TemplateError::NoProductions(name));
        }
        let mut sym = Symbol::new(name, productions);
        sym.span = rule.span.clone();
        symbols.push(sym);
    }
    Ok(Namespace {
        alias: alias.to_string(),
        symbols,
    })
}

enum Bound {
    Name(String),
    Reference(QualifiedName),
    Expr(Expression),
    Productions(Vec<Expression>),
}

fn bind_argument(param: &Param, arg: &Argument) -> Result<Bound, TemplateError> {
    let mismatch = |expected| TemplateError::KindMismatch {
        param: param.name.clone(),
        expected,
    };
    let single = match arg {
        Argument::Productions(list) if list.len() == 1 => Some(&list[0]),
        _ => None,
    };
    Ok(match param.kind {
        TemplateKind::Id => match single.map(|e| &e.kind) {
            Some(ExprKind::SymbolRef(QualifiedName { namespace: None, name })) => Bound::Name(name.clone()),
            _ => return Err(mismatch("a plain identifier")),
        },
        TemplateKind::Symbol => match single.map(|e| &e.kind) {
            Some(ExprKind::SymbolRef(q)) => Bound::Reference(q.clone()),
            _ => return Err(mismatch("a symbol name")),
        },
        TemplateKind::Expression => match single {
            Some(e) => Bound::Expr(e.clone()),
            None => return Err(mismatch("a single expression")),
        },
        TemplateKind::Production => match arg {
            Argument::Empty if param.many => Bound::Productions(Vec::new()),
            Argument::Productions(list) if param.many || list.len() == 1 => Bound::Productions(list.clone()),
            _ => return Err(mismatch("exactly one production")),
        },
    })
}

fn substitute<'b>(
    e: &mut Expression,
    lookup: &impl Fn(&str) -> Result<&'b Bound, TemplateError>,
) -> Result<(), TemplateError> {
    if let ExprKind::Placeholder(p) = &e.kind {
        let kind = match lookup(p)? {
            Bound::Name(n) => ExprKind::SymbolRef(QualifiedName::simple(n.clone())),
            Bound::Reference(q) => ExprKind::SymbolRef(q.clone()),
            Bound::Expr(arg) => arg.kind.clone(),
            Bound::Productions(list) => match list.as_slice() {
                [only] => only.kind.clone(),
                _ => {
                    return Err(TemplateError::KindMismatch {
                        param: p.clone(),
                        expected: "a single production when used inside an expression",
                    })
                }
            },
        };
        e.kind = kind;
        return Ok(());
    }
    for child in e.children_mut() {
        substitute(child, lookup)?;
    }
    Ok(())
}

/// Instantiates every import of `grammar` (against its inline templates and
/// `library`), registers the namespaces, and validates name resolution.
///
/// Anonymous imports are named `_ns1`, `_ns2`, … in file order. Only
/// `Symbol` templates can be imported.
pub fn resolve_imports(mut grammar: Grammar, library: &TemplateLibrary) -> ParseResult<Grammar> {
    let mut diags = Vec::new();
    let mut templates = std::mem::take(&mut grammar.templates);
    diags.extend(templates.extend(library.clone()));

    let mut aliases: HashSet<String> = grammar.namespaces.iter().map(|n| n.alias.clone()).collect();
    let mut anonymous = 0;
    for import in std::mem::take(&mut grammar.imports) {
        let alias = match &import.alias {
            Some(a) => a.clone(),
            None => {
                anonymous += 1;
                format!("_ns{anonymous}")
            }
        };
        if !aliases.insert(alias.clone()) {
            diags.push(Diagnostic::error(format!("namespace alias `{alias}` is already in use"), import.span.clone()));
            continue;
        }
        let Some(template) = templates.get(&import.template) else {
            diags.push(Diagnostic::error(format!("unknown template `{}`", import.template), import.span.clone()));
            continue;
        };
        if template.kind != TemplateKind::Symbol {
            diags.push(Diagnostic::error(
                format!(
                    "template `{}` produces {} objects; only Symbol templates can be imported",
                    template.name, template.kind
                ),
                import.span.clone(),
            ));
            continue;
        }
        match instantiate(template, &import.args, &alias) {
            Ok(ns) => grammar.namespaces.push(ns),
            Err(e) => diags.push(Diagnostic::error(
                format!("cannot instantiate `{}`: {e}", import.template),
                import.span.clone(),
            )),
        }
    }

    if !has_errors(&diags) {
        diags.extend(grammar.validate());
    }
    let value = (!has_errors(&diags)).then_some(grammar);
    ParseResult { value, diagnostics: diags }
}
