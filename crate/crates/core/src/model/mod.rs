//! In-memory grammars: symbols, productions, expression trees, and the
//! metadata attached to any of them.
//!
//! Every node (the grammar itself, each symbol, production, and expression
//! subnode) carries a [`NodeId`] that is unique within a grammar and an
//! [`AnnotationSet`]. Structural equality (`==`) ignores ids and spans.

mod annotation;
mod expr;

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

pub use annotation::{AnnotationSet, Attribute, SeqToken, Value, ValueKind};
pub use expr::{CharRange, ExprKind, Expression, QualifiedName, Repeat};

use crate::diagnostic::{Diagnostic, SourceSpan};
use crate::template::{ImportDecl, TemplateLibrary};

static NEXT_NODE_ID: AtomicU64 = AtomicU64::new(1);

/// Identity of one grammar node.
///
/// Ids come from a process-wide counter, so nodes created independently
/// (e.g. two template instantiations) never share one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u64);

impl NodeId {
    pub fn fresh() -> Self {
        NodeId(NEXT_NODE_ID.fetch_add(1, Ordering::Relaxed))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("no node with id {0} in this grammar")]
    UnknownNode(NodeId),
    #[error("symbol `{0}` not found")]
    SymbolNotFound(String),
    #[error("symbol `{name}` is ambiguous between namespaces {}", .namespaces.join(", "))]
    AmbiguousSymbol { name: String, namespaces: Vec<String> },
    #[error("unknown namespace `{0}`")]
    UnknownNamespace(String),
}

#[derive(Debug, Clone)]
pub struct Production {
    pub body: Expression,
    pub annotations: AnnotationSet,
    pub id: NodeId,
    pub span: SourceSpan,
}

impl PartialEq for Production {
    fn eq(&self, other: &Self) -> bool {
        self.body == other.body && self.annotations == other.annotations
    }
}

impl Production {
    pub fn new(body: Expression) -> Self {
        let span = body.span.clone();
        Production {
            body,
            annotations: AnnotationSet::new(),
            id: NodeId::fresh(),
            span,
        }
    }

    pub fn refresh_ids(&mut self) {
        self.id = NodeId::fresh();
        self.body.refresh_ids();
    }
}

#[derive(Debug, Clone)]
pub struct Symbol {
    pub name: String,
    pub productions: Vec<Production>,
    pub annotations: AnnotationSet,
    pub id: NodeId,
    pub span: SourceSpan,
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.productions == other.productions
            && self.annotations == other.annotations
    }
}

impl Symbol {
    pub fn new(name: impl Into<String>, productions: Vec<Production>) -> Self {
        Symbol {
            name: name.into(),
            productions,
            annotations: AnnotationSet::new(),
            id: NodeId::fresh(),
            span: SourceSpan::synthetic(),
        }
    }
}

/// The symbols produced by one template instantiation, reachable as
/// `alias.Name`.
#[derive(Debug, Clone, PartialEq)]
pub struct Namespace {
    pub alias: String,
    pub symbols: Vec<Symbol>,
}

impl Namespace {
    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }
}

/// Where a name is looked up from: the host grammar or inside a namespace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope<'a> {
    Root,
    Namespace(&'a str),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Resolution<'g> {
    Found(&'g Symbol),
    NotFound,
    /// Unqualified name exported by several namespaces.
    Ambiguous(Vec<String>),
    UnknownNamespace(String),
}

#[derive(Debug, Clone, Copy)]
pub enum NodeRef<'g> {
    Grammar(&'g Grammar),
    Symbol(&'g Symbol),
    Production(&'g Production),
    Expression(&'g Expression),
}

impl<'g> NodeRef<'g> {
    pub fn id(&self) -> NodeId {
        match self {
            NodeRef::Grammar(g) => g.id,
            NodeRef::Symbol(s) => s.id,
            NodeRef::Production(p) => p.id,
            NodeRef::Expression(e) => e.id,
        }
    }

    pub fn annotations(&self) -> &'g AnnotationSet {
        match self {
            NodeRef::Grammar(g) => &g.annotations,
            NodeRef::Symbol(s) => &s.annotations,
            NodeRef::Production(p) => &p.annotations,
            NodeRef::Expression(e) => &e.annotations,
        }
    }

    pub fn span(&self) -> &'g SourceSpan {
        match self {
            NodeRef::Grammar(g) => &g.span,
            NodeRef::Symbol(s) => &s.span,
            NodeRef::Production(p) => &p.span,
            NodeRef::Expression(e) => &e.span,
        }
    }
}

/// Printable location of a node: `Sum`, `Sum/production[1]`,
/// `Sum/production[1]/expr[0.2]`, or `<grammar>`. Namespace symbols are
/// written `alias.Name`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum NodePath {
    Grammar,
    Symbol(String),
    Production(String, usize),
    Expression(String, usize, Vec<usize>),
}

impl fmt::Display for NodePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodePath::Grammar => f.write_str("<grammar>"),
            NodePath::Symbol(s) => f.write_str(s),
            NodePath::Production(s, i) => write!(f, "{s}/production[{i}]"),
            NodePath::Expression(s, i, path) => {
                let steps: Vec<String> = path.iter().map(usize::to_string).collect();
                write!(f, "{s}/production[{i}]/expr[{}]", steps.join("."))
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Grammar {
    pub symbols: Vec<Symbol>,
    pub annotations: AnnotationSet,
    pub namespaces: Vec<Namespace>,
    /// Imports awaiting expansion; empty once imports are resolved.
    pub imports: Vec<ImportDecl>,
    /// Templates declared inline in the grammar file; empty once resolved.
    pub templates: TemplateLibrary,
    pub id: NodeId,
    pub span: SourceSpan,
}

impl PartialEq for Grammar {
    fn eq(&self, other: &Self) -> bool {
        self.symbols == other.symbols
            && self.annotations == other.annotations
            && self.namespaces == other.namespaces
            && self.imports == other.imports
            && self.templates == other.templates
    }
}

impl Default for Grammar {
    fn default() -> Self {
        Grammar::new(Vec::new())
    }
}

impl Grammar {
    pub fn new(symbols: Vec<Symbol>) -> Self {
        Grammar {
            symbols,
            annotations: AnnotationSet::new(),
            namespaces: Vec::new(),
            imports: Vec::new(),
            templates: TemplateLibrary::default(),
            id: NodeId::fresh(),
            span: SourceSpan::synthetic(),
        }
    }

    pub fn symbol(&self, name: &str) -> Option<&Symbol> {
        self.symbols.iter().find(|s| s.name == name)
    }

    pub fn namespace(&self, alias: &str) -> Option<&Namespace> {
        self.namespaces.iter().find(|n| n.alias == alias)
    }

    /// Every symbol in document order (host symbols, then each namespace in
    /// import order) with the alias of its namespace.
    pub fn all_symbols(&self) -> impl Iterator<Item = (Option<&str>, &Symbol)> {
        self.symbols.iter().map(|s| (None, s)).chain(
            self.namespaces
                .iter()
                .flat_map(|ns| ns.symbols.iter().map(move |s| (Some(ns.alias.as_str()), s))),
        )
    }

    /// Looks `name` up as seen from `scope`.
    ///
    /// Qualified names look only inside their namespace. Unqualified names
    /// try the current namespace, then the host grammar, then every other
    /// namespace; a name exported by more than one of those namespaces is
    /// ambiguous.
    pub fn resolve(&self, name: &QualifiedName, scope: Scope<'_>) -> Resolution<'_> {
        if let Some(alias) = &name.namespace {
            return match self.namespace(alias) {
                Some(ns) => ns.symbol(&name.name).map_or(Resolution::NotFound, Resolution::Found),
                None => Resolution::UnknownNamespace(alias.clone()),
            };
        }
        let own = match scope {
            Scope::Namespace(alias) => Some(alias),
            Scope::Root => None,
        };
        if let Some(sym) = own.and_then(|a| self.namespace(a)).and_then(|ns| ns.symbol(&name.name)) {
            return Resolution::Found(sym);
        }
        if let Some(sym) = self.symbol(&name.name) {
            return Resolution::Found(sym);
        }
        let found: Vec<(&str, &Symbol)> = self
            .namespaces
            .iter()
            .filter(|ns| Some(ns.alias.as_str()) != own)
            .filter_map(|ns| ns.symbol(&name.name).map(|s| (ns.alias.as_str(), s)))
            .collect();
        match found.as_slice() {
            [] => Resolution::NotFound,
            [(_, sym)] => Resolution::Found(sym),
            many => Resolution::Ambiguous(many.iter().map(|(a, _)| a.to_string()).collect()),
        }
    }

    /// Resolves `Name` or `alias.Name` from the host grammar's point of view.
    pub fn resolve_symbol(&self, name: &str) -> Result<&Symbol, ModelError> {
        match self.resolve(&QualifiedName::parse(name), Scope::Root) {
            Resolution::Found(sym) => Ok(sym),
            Resolution::NotFound => Err(ModelError::SymbolNotFound(name.to_string())),
            Resolution::Ambiguous(namespaces) => Err(ModelError::AmbiguousSymbol {
                name: name.to_string(),
                namespaces,
            }),
            Resolution::UnknownNamespace(ns) => Err(ModelError::UnknownNamespace(ns)),
        }
    }

    /// Maps every symbol reference node to the id of the symbol it uniquely
    /// resolves to, or `None` when it does not resolve.
    pub fn reference_targets(&self) -> HashMap<NodeId, Option<NodeId>> {
        let mut out = HashMap::new();
        for (alias, sym) in self.all_symbols() {
            let scope = alias.map_or(Scope::Root, Scope::Namespace);
            for prod in &sym.productions {
                for e in prod.body.descendants() {
                    if let ExprKind::SymbolRef(name) = &e.kind {
                        let target = match self.resolve(name, scope) {
                            Resolution::Found(s) => Some(s.id),
                            _ => None,
                        };
                        out.insert(e.id, target);
                    }
                }
            }
        }
        out
    }

    /// All nodes in depth-first pre-order, source order: the grammar, then
    /// for each symbol the symbol, each production, and its expression tree.
    pub fn walk(&self) -> Vec<NodeRef<'_>> {
        self.walk_with_paths().into_iter().map(|(_, n)| n).collect()
    }

    pub fn walk_with_paths(&self) -> Vec<(NodePath, NodeRef<'_>)> {
        let mut out = vec![(NodePath::Grammar, NodeRef::Grammar(self))];
        for (alias, sym) in self.all_symbols() {
            let name = qualify(alias, &sym.name);
            out.push((NodePath::Symbol(name.clone()), NodeRef::Symbol(sym)));
            for (i, prod) in sym.productions.iter().enumerate() {
                out.push((NodePath::Production(name.clone(), i), NodeRef::Production(prod)));
                let mut stack = vec![(Vec::new(), &prod.body)];
                while let Some((path, e)) = stack.pop() {
                    for (j, child) in e.children().iter().enumerate().rev() {
                        let mut p = path.clone();
                        p.push(j);
                        stack.push((p, child));
                    }
                    out.push((NodePath::Expression(name.clone(), i, path), NodeRef::Expression(e)));
                }
            }
        }
        out
    }

    pub fn node(&self, id: NodeId) -> Option<NodeRef<'_>> {
        if self.id == id {
            return Some(NodeRef::Grammar(self));
        }
        for (_, sym) in self.all_symbols() {
            if sym.id == id {
                return Some(NodeRef::Symbol(sym));
            }
            for prod in &sym.productions {
                if prod.id == id {
                    return Some(NodeRef::Production(prod));
                }
                if let Some(e) = prod.body.find(id) {
                    return Some(NodeRef::Expression(e));
                }
            }
        }
        None
    }

    pub fn path_of(&self, id: NodeId) -> Option<NodePath> {
        if self.id == id {
            return Some(NodePath::Grammar);
        }
        for (alias, sym) in self.all_symbols() {
            let name = || qualify(alias, &sym.name);
            if sym.id == id {
                return Some(NodePath::Symbol(name()));
            }
            for (i, prod) in sym.productions.iter().enumerate() {
                if prod.id == id {
                    return Some(NodePath::Production(name(), i));
                }
                if let Some(path) = prod.body.path_to(id) {
                    return Some(NodePath::Expression(name(), i, path));
                }
            }
        }
        None
    }

    pub fn annotations(&self, id: NodeId) -> Option<&AnnotationSet> {
        self.node(id).map(|n| n.annotations())
    }

    pub fn annotations_mut(&mut self, id: NodeId) -> Option<&mut AnnotationSet> {
        if self.id == id {
            return Some(&mut self.annotations);
        }
        let symbols = self
            .symbols
            .iter_mut()
            .chain(self.namespaces.iter_mut().flat_map(|ns| ns.symbols.iter_mut()));
        for sym in symbols {
            if sym.id == id {
                return Some(&mut sym.annotations);
            }
            for prod in &mut sym.productions {
                if prod.id == id {
                    return Some(&mut prod.annotations);
                }
                if let Some(e) = prod.body.find_mut(id) {
                    return Some(&mut e.annotations);
                }
            }
        }
        None
    }

    /// Attaches `attribute` to node `target`, replacing any attribute of the
    /// same name. Returns the replaced attribute.
    pub fn attach(&mut self, target: NodeId, attribute: Attribute) -> Result<Option<Attribute>, ModelError> {
        self.annotations_mut(target)
            .map(|set| set.set(attribute))
            .ok_or(ModelError::UnknownNode(target))
    }

    /// Checks well-formedness and name resolution.
    ///
    /// References that resolve nowhere are reported as warnings: they are
    /// treated as externally defined tokens. Ambiguous references, unknown
    /// namespaces, and structural defects are errors.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut diags = Vec::new();
        check_unique_names(&self.symbols, &mut diags);
        for ns in &self.namespaces {
            check_unique_names(&ns.symbols, &mut diags);
        }
        let mut undefined = HashSet::new();
        for (alias, sym) in self.all_symbols() {
            let scope = alias.map_or(Scope::Root, Scope::Namespace);
            if sym.productions.is_empty() {
                diags.push(Diagnostic::error(
                    format!("symbol `{}` has no productions", sym.name),
                    sym.span.clone(),
                ));
            }
            for prod in &sym.productions {
                for e in prod.body.descendants() {
                    validate_node(self, e, scope, &mut undefined, &mut diags);
                }
            }
        }
        diags
    }

    /// Hoists every namespace symbol into the host grammar, producing a plain
    /// grammar without namespaces.
    ///
    /// Namespace symbols keep their name unless it is defined more than once
    /// across the host and all namespaces; then they become `alias_Name`.
    /// References are rewritten to the final names of the symbols they
    /// resolve to. Ids and annotations are preserved.
    pub fn flatten(&self) -> Grammar {
        if self.namespaces.is_empty() {
            return self.clone();
        }
        let mut counts: HashMap<&str, usize> = HashMap::new();
        for (_, sym) in self.all_symbols() {
            *counts.entry(sym.name.as_str()).or_default() += 1;
        }
        let mut taken: HashSet<String> = self.symbols.iter().map(|s| s.name.clone()).collect();
        let mut final_names: HashMap<NodeId, String> = HashMap::new();
        for sym in &self.symbols {
            final_names.insert(sym.id, sym.name.clone());
        }
        for ns in &self.namespaces {
            for sym in &ns.symbols {
                let name = if counts[sym.name.as_str()] == 1 {
                    sym.name.clone()
                } else {
                    fresh_name(&format!("{}_{}", ns.alias, sym.name), &taken)
                };
                taken.insert(name.clone());
                final_names.insert(sym.id, name);
            }
        }

        let targets = self.reference_targets();
        let rename = |sym: &Symbol| {
            let mut sym = sym.clone();
            sym.name = final_names[&sym.id].clone();
            for prod in &mut sym.productions {
                rewrite_refs(&mut prod.body, &targets, &final_names);
            }
            sym
        };
        let mut symbols: Vec<Symbol> = self
            .namespaces
            .iter()
            .flat_map(|ns| ns.symbols.iter())
            .map(&rename)
            .collect();
        symbols.extend(self.symbols.iter().map(&rename));
        Grammar {
            symbols,
            namespaces: Vec::new(),
            ..self.clone()
        }
    }
}

pub(crate) fn qualify(alias: Option<&str>, name: &str) -> String {
    match alias {
        Some(a) => format!("{a}.{name}"),
        None => name.to_string(),
    }
}

pub(crate) fn fresh_name(base: &str, taken: &HashSet<String>) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (2..)
        .map(|n| format!("{base}_{n}"))
        .find(|candidate| !taken.contains(candidate))
        .unwrap()
}

fn rewrite_refs(e: &mut Expression, targets: &HashMap<NodeId, Option<NodeId>>, names: &HashMap<NodeId, String>) {
    if let ExprKind::SymbolRef(name) = &mut e.kind {
        if let Some(Some(target)) = targets.get(&e.id) {
            *name = QualifiedName::simple(names[target].clone());
        }
    }
    for child in e.children_mut() {
        rewrite_refs(child, targets, names);
    }
}

fn check_unique_names(symbols: &[Symbol], diags: &mut Vec<Diagnostic>) {
    let mut seen = HashSet::new();
    for sym in symbols {
        if !seen.insert(sym.name.as_str()) {
            diags.push(Diagnostic::error(
                format!("duplicate symbol `{}`", sym.name),
                sym.span.clone(),
            ));
        }
    }
}

fn validate_node(
    grammar: &Grammar,
    e: &Expression,
    scope: Scope<'_>,
    undefined: &mut HashSet<QualifiedName>,
    diags: &mut Vec<Diagnostic>,
) {
    match &e.kind {
        ExprKind::Sequence(items) | ExprKind::Alternative(items) if items.len() < 2 => {
            diags.push(Diagnostic::error("sequence or alternative with fewer than two terms", e.span.clone()));
        }
        ExprKind::SymbolRef(name) => match grammar.resolve(name, scope) {
            Resolution::Found(_) => {}
            Resolution::NotFound => {
                if undefined.insert(name.clone()) {
                    diags.push(Diagnostic::warning(
                        format!("undefined symbol `{name}` (treated as an external token)"),
                        e.span.clone(),
                    ));
                }
            }
            Resolution::Ambiguous(namespaces) => diags.push(Diagnostic::error(
                format!(
                    "ambiguous reference `{name}`: defined in namespaces {}; use a qualified name",
                    namespaces.join(", ")
                ),
                e.span.clone(),
            )),
            Resolution::UnknownNamespace(ns) => diags.push(Diagnostic::error(
                format!("unknown namespace `{ns}` in reference `{name}`"),
                e.span.clone(),
            )),
        },
        ExprKind::Literal(text) if text.is_empty() => {
            diags.push(Diagnostic::error("empty literal", e.span.clone()));
        }
        ExprKind::CharClass(ranges) => {
            if ranges.is_empty() {
                diags.push(Diagnostic::error("empty character class", e.span.clone()));
            }
            for r in ranges.iter().filter(|r| r.lo > r.hi) {
                diags.push(Diagnostic::error(
                    format!("character range '{}'--'{}' is reversed", r.lo, r.hi),
                    e.span.clone(),
                ));
            }
        }
        ExprKind::Placeholder(name) => {
            diags.push(Diagnostic::error(format!("unexpanded placeholder `${name}`"), e.span.clone()));
        }
        _ => {}
    }
}
