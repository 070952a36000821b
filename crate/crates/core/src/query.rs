//! Structural queries over grammars.
//!
//! A query is an optional rule pattern (`Op -> Arg (Sign Arg)* ;`) followed
//! by metadata patterns (`N { operation; !commutative; }`). Every identifier
//! in a rule pattern is a variable. A plain variable matches one symbol
//! reference and binds the referenced symbol; repeated occurrences must
//! agree, so `Rec -> Rec ..;` selects immediately left-recursive rules.
//! `X=( … )` and `X=..` capture the matched subexpression, `..` matches
//! anything, and `P: …` in front of a production pattern binds the whole
//! production.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::diagnostic::SourceSpan;
use crate::model::{
    AnnotationSet, CharRange, ExprKind, Expression, Grammar, NodeId, NodeRef, Repeat, Symbol, Value, ValueKind,
};

#[derive(Debug, Clone, PartialEq)]
pub enum Pattern {
    Sequence(Vec<Pattern>),
    Alternative(Vec<Pattern>),
    Iteration(Box<Pattern>, Repeat),
    /// Matches one symbol reference.
    Var(String),
    Literal(String),
    CharClass(Vec<CharRange>),
    /// `X=( … )`
    Capture(String, Box<Pattern>),
    /// `X=..`
    CaptureWild(String),
    /// `..`
    Wildcard,
}

impl Pattern {
    fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Pattern)) {
        f(self);
        match self {
            Pattern::Sequence(items) | Pattern::Alternative(items) => items.iter().for_each(|p| p.visit(f)),
            Pattern::Iteration(inner, _) | Pattern::Capture(_, inner) => inner.visit(f),
            _ => {}
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProductionPattern {
    /// `P:` binds the matched production.
    pub label: Option<String>,
    pub body: Pattern,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RulePattern {
    pub head: String,
    pub productions: Vec<ProductionPattern>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predicate {
    Present(String),
    Absent(String),
    Equals(String, Value),
    HasType(String, ValueKind),
}

impl Predicate {
    pub fn attribute(&self) -> &str {
        match self {
            Predicate::Present(n) | Predicate::Absent(n) | Predicate::Equals(n, _) | Predicate::HasType(n, _) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetaPattern {
    pub var: String,
    pub predicates: Vec<Predicate>,
}

#[derive(Debug, Clone)]
pub struct Query {
    pub rule: Option<RulePattern>,
    pub meta: Vec<MetaPattern>,
    pub span: SourceSpan,
}

impl PartialEq for Query {
    fn eq(&self, other: &Self) -> bool {
        self.rule == other.rule && self.meta == other.meta
    }
}

impl Query {
    /// Variables this query can bind, in order of first appearance.
    pub fn variables(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut add = |v: &str| {
            if !out.iter().any(|o| o == v) {
                out.push(v.to_string());
            }
        };
        if let Some(rule) = &self.rule {
            add(&rule.head);
            for prod in &rule.productions {
                if let Some(label) = &prod.label {
                    add(label);
                }
                prod.body.visit(&mut |p| match p {
                    Pattern::Var(v) | Pattern::Capture(v, _) | Pattern::CaptureWild(v) => add(v),
                    _ => {}
                });
            }
        }
        for m in &self.meta {
            add(&m.var);
        }
        out
    }
}

/// What a query variable is bound to.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    Symbol(NodeId),
    Production(NodeId),
    Expression(NodeId),
    /// A wildcard capture spanning zero or several consecutive terms of
    /// `parent` (a sequence, or a single node read as a one-term sequence).
    Run { parent: NodeId, start: usize, len: usize },
    /// A reference to a symbol the grammar does not define.
    External(String),
}

impl Target {
    pub fn node(&self) -> Option<NodeId> {
        match self {
            Target::Symbol(id) | Target::Production(id) | Target::Expression(id) => Some(*id),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Binding(BTreeMap<String, Target>);

impl Binding {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, var: &str) -> Option<&Target> {
        self.0.get(var)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Target)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// Binds `var`, or checks agreement if it is already bound.
    #[must_use]
    pub fn unify(mut self, var: &str, target: Target) -> Option<Binding> {
        match self.0.get(var) {
            Some(existing) if *existing != target => None,
            Some(_) => Some(self),
            None => {
                self.0.insert(var.to_string(), target);
                Some(self)
            }
        }
    }
}

impl FromIterator<(String, Target)> for Binding {
    fn from_iter<I: IntoIterator<Item = (String, Target)>>(iter: I) -> Self {
        Binding(iter.into_iter().collect())
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Symbol(id) => write!(f, "symbol {id}"),
            Target::Production(id) => write!(f, "production {id}"),
            Target::Expression(id) => write!(f, "expression {id}"),
            Target::Run { parent, start, len } => write!(f, "terms {start}..{} of {parent}", start + len),
            Target::External(name) => write!(f, "external {name}"),
        }
    }
}

pub fn eval_predicate(pred: &Predicate, annotations: &AnnotationSet) -> bool {
    match pred {
        Predicate::Present(name) => annotations.contains(name),
        Predicate::Absent(name) => !annotations.contains(name),
        Predicate::Equals(name, value) => {
            annotations.get(name).and_then(|a| a.value.as_ref()) == Some(value)
        }
        Predicate::HasType(name, kind) => annotations
            .get(name)
            .and_then(|a| a.value.as_ref())
            .is_some_and(|v| v.kind() == *kind),
    }
}

/// Runs `query` against `grammar`; see [`Matcher::match_query`].
pub fn match_query(query: &Query, grammar: &Grammar) -> Vec<Binding> {
    Matcher::new(grammar).match_query(query)
}

/// Query evaluation against one grammar, with symbol references resolved
/// up front.
pub struct Matcher<'g> {
    grammar: &'g Grammar,
    symbols: Vec<&'g Symbol>,
    refs: HashMap<NodeId, Target>,
}

static NO_ANNOTATIONS: std::sync::LazyLock<AnnotationSet> = std::sync::LazyLock::new(AnnotationSet::new);

impl<'g> Matcher<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let resolved = grammar.reference_targets();
        let mut refs = HashMap::new();
        for (_, sym) in grammar.all_symbols() {
            for prod in &sym.productions {
                for e in prod.body.descendants() {
                    if let ExprKind::SymbolRef(name) = &e.kind {
                        let target = match resolved.get(&e.id) {
                            Some(Some(id)) => Target::Symbol(*id),
                            _ => Target::External(name.to_string()),
                        };
                        refs.insert(e.id, target);
                    }
                }
            }
        }
        Matcher {
            grammar,
            symbols: grammar.all_symbols().map(|(_, s)| s).collect(),
            refs,
        }
    }

    /// All distinct bindings of `query`, ordered by head symbol, then
    /// production, then position within the production.
    ///
    /// Each production pattern must match a distinct production of the head
    /// symbol; the symbol may have further productions. A metadata pattern
    /// on a variable the rule pattern does not bind ranges over all symbols.
    pub fn match_query(&self, query: &Query) -> Vec<Binding> {
        let mut envs = Vec::new();
        match &query.rule {
            Some(rule) => {
                for sym in &self.symbols {
                    let env = Binding::new().unify(&rule.head, Target::Symbol(sym.id)).unwrap();
                    let mut used = vec![false; sym.productions.len()];
                    self.match_productions(&rule.productions, sym, &mut used, env, &mut envs);
                }
            }
            None => envs.push(Binding::new()),
        }
        for meta in &query.meta {
            envs = envs.into_iter().flat_map(|env| self.apply_meta(meta, env)).collect();
        }
        let mut seen = HashSet::new();
        envs.retain(|b| seen.insert(b.clone()));
        envs
    }

    fn match_productions(
        &self,
        patterns: &[ProductionPattern],
        sym: &Symbol,
        used: &mut [bool],
        env: Binding,
        out: &mut Vec<Binding>,
    ) {
        let Some((first, rest)) = patterns.split_first() else {
            out.push(env);
            return;
        };
        for (j, prod) in sym.productions.iter().enumerate() {
            if used[j] {
                continue;
            }
            let env = match &first.label {
                Some(label) => match env.clone().unify(label, Target::Production(prod.id)) {
                    Some(e) => e,
                    None => continue,
                },
                None => env.clone(),
            };
            used[j] = true;
            for extended in self.match_pattern(&first.body, &prod.body, &env) {
                self.match_productions(rest, sym, used, extended, out);
            }
            used[j] = false;
        }
    }

    fn apply_meta(&self, meta: &MetaPattern, env: Binding) -> Vec<Binding> {
        let holds = |set: &AnnotationSet| meta.predicates.iter().all(|p| eval_predicate(p, set));
        match env.get(&meta.var) {
            Some(target) => {
                if holds(self.target_annotations(target)) {
                    vec![env]
                } else {
                    Vec::new()
                }
            }
            None => self
                .symbols
                .iter()
                .filter(|s| holds(&s.annotations))
                .filter_map(|s| env.clone().unify(&meta.var, Target::Symbol(s.id)))
                .collect(),
        }
    }

    /// Annotations of the node behind `target`; runs and external symbols
    /// carry none.
    pub fn target_annotations(&self, target: &Target) -> &AnnotationSet {
        target
            .node()
            .and_then(|id| self.grammar.node(id))
            .map(|n: NodeRef<'g>| n.annotations())
            .unwrap_or(&NO_ANNOTATIONS)
    }

    /// Every way `pattern` matches `node` consistently with `env`.
    pub fn match_pattern(&self, pattern: &Pattern, node: &Expression, env: &Binding) -> Vec<Binding> {
        let mut out = Vec::new();
        self.pattern_into(pattern, node, env.clone(), &mut out);
        let mut seen = HashSet::new();
        out.retain(|b| seen.insert(b.clone()));
        out
    }

    fn pattern_into(&self, pattern: &Pattern, node: &Expression, env: Binding, out: &mut Vec<Binding>) {
        match (pattern, &node.kind) {
            (Pattern::Wildcard, _) => out.push(env),
            (Pattern::CaptureWild(v), _) => out.extend(env.unify(v, Target::Expression(node.id))),
            (Pattern::Capture(v, inner), _) => {
                if let Some(env) = env.unify(v, Target::Expression(node.id)) {
                    self.pattern_into(inner, node, env, out);
                }
            }
            (Pattern::Var(v), ExprKind::SymbolRef(_)) => {
                let target = self.refs.get(&node.id).cloned().unwrap_or_else(|| match &node.kind {
                    ExprKind::SymbolRef(name) => Target::External(name.to_string()),
                    _ => unreachable!(),
                });
                out.extend(env.unify(v, target));
            }
            (Pattern::Literal(a), ExprKind::Literal(b)) if a == b => out.push(env),
            (Pattern::CharClass(a), ExprKind::CharClass(b)) if a == b => out.push(env),
            (Pattern::Iteration(p, pk), ExprKind::Iteration(inner, nk)) if pk == nk => {
                self.pattern_into(p, inner, env, out)
            }
            (Pattern::Alternative(ps), ExprKind::Alternative(options)) if ps.len() == options.len() => {
                self.zip_into(ps, options, env, out)
            }
            (Pattern::Sequence(ps), _) => self.terms_into(ps, node.terms(), 0, node.id, env, out),
            _ => {}
        }
    }

    fn zip_into(&self, ps: &[Pattern], nodes: &[Expression], env: Binding, out: &mut Vec<Binding>) {
        let Some((p, rest)) = ps.split_first() else {
            out.push(env);
            return;
        };
        let mut partial = Vec::new();
        self.pattern_into(p, &nodes[0], env, &mut partial);
        for env in partial {
            self.zip_into(rest, &nodes[1..], env, out);
        }
    }

    /// Matches a sequence of patterns against `terms[offset..]`. Wildcards
    /// consume any number of consecutive terms, including none.
    fn terms_into(
        &self,
        ps: &[Pattern],
        terms: &[Expression],
        offset: usize,
        parent: NodeId,
        env: Binding,
        out: &mut Vec<Binding>,
    ) {
        let Some((p, rest)) = ps.split_first() else {
            if offset == terms.len() {
                out.push(env);
            }
            return;
        };
        let remaining = terms.len() - offset;
        match p {
            Pattern::Wildcard | Pattern::CaptureWild(_) => {
                for len in 0..=remaining {
                    let env = match p {
                        Pattern::CaptureWild(v) => {
                            let target = if len == 1 {
                                Target::Expression(terms[offset].id)
                            } else {
                                Target::Run { parent, start: offset, len }
                            };
                            match env.clone().unify(v, target) {
                                Some(e) => e,
                                None => continue,
                            }
                        }
                        _ => env.clone(),
                    };
                    self.terms_into(rest, terms, offset + len, parent, env, out);
                }
            }
            _ if remaining > 0 => {
                let mut partial = Vec::new();
                self.pattern_into(p, &terms[offset], env, &mut partial);
                for env in partial {
                    self.terms_into(rest, terms, offset + 1, parent, env, out);
                }
            }
            _ => {}
        }
    }
}
