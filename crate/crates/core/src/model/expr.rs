use std::fmt;

use super::{AnnotationSet, NodeId};
use crate::diagnostic::SourceSpan;

/// A symbol name, optionally qualified by a namespace alias (`alias.Name`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualifiedName {
    pub namespace: Option<String>,
    pub name: String,
}

impl QualifiedName {
    pub fn simple(name: impl Into<String>) -> Self {
        QualifiedName {
            namespace: None,
            name: name.into(),
        }
    }

    pub fn qualified(namespace: impl Into<String>, name: impl Into<String>) -> Self {
        QualifiedName {
            namespace: Some(namespace.into()),
            name: name.into(),
        }
    }

    /// Parses `Name` or `alias.Name`.
    pub fn parse(text: &str) -> Self {
        match text.split_once('.') {
            Some((ns, name)) => QualifiedName::qualified(ns, name),
            None => QualifiedName::simple(text),
        }
    }
}

impl fmt::Display for QualifiedName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.namespace {
            Some(ns) => write!(f, "{ns}.{}", self.name),
            None => f.write_str(&self.name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Repeat {
    /// `*`
    Star,
    /// `+`
    Plus,
    /// `?`
    Optional,
}

impl Repeat {
    pub fn symbol(self) -> char {
        match self {
            Repeat::Star => '*',
            Repeat::Plus => '+',
            Repeat::Optional => '?',
        }
    }
}

/// Inclusive character range; a single character is `lo == hi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CharRange {
    pub lo: char,
    pub hi: char,
}

impl CharRange {
    pub fn single(c: char) -> Self {
        CharRange { lo: c, hi: c }
    }

    pub fn contains(&self, c: char) -> bool {
        self.lo <= c && c <= self.hi
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    /// Juxtaposition of two or more terms.
    Sequence(Vec<Expression>),
    /// `a | b`, two or more options.
    Alternative(Vec<Expression>),
    Iteration(Box<Expression>, Repeat),
    SymbolRef(QualifiedName),
    /// An embedded lexical definition written in single quotes.
    Literal(String),
    CharClass(Vec<CharRange>),
    /// `$name`; only present inside template bodies.
    Placeholder(String),
}

/// A node of a production body. Equality ignores ids and spans.
#[derive(Debug, Clone)]
pub struct Expression {
    pub kind: ExprKind,
    pub annotations: AnnotationSet,
    pub id: NodeId,
    pub span: SourceSpan,
}

impl PartialEq for Expression {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.annotations == other.annotations
    }
}

impl Expression {
    pub fn new(kind: ExprKind) -> Self {
        Expression::with_span(kind, SourceSpan::synthetic())
    }

    pub fn with_span(kind: ExprKind, span: SourceSpan) -> Self {
        Expression {
            kind,
            annotations: AnnotationSet::new(),
            id: NodeId::fresh(),
            span,
        }
    }

    pub fn symbol(name: impl Into<String>) -> Self {
        Expression::new(ExprKind::SymbolRef(QualifiedName::simple(name)))
    }

    pub fn literal(text: impl Into<String>) -> Self {
        Expression::new(ExprKind::Literal(text.into()))
    }

    /// Builds a sequence, collapsing a single term to itself.
    pub fn sequence(mut terms: Vec<Expression>) -> Self {
        if terms.len() == 1 {
            return terms.pop().unwrap();
        }
        Expression::new(ExprKind::Sequence(terms))
    }

    /// Builds an alternative, collapsing a single option to itself.
    pub fn alternative(mut options: Vec<Expression>) -> Self {
        if options.len() == 1 {
            return options.pop().unwrap();
        }
        Expression::new(ExprKind::Alternative(options))
    }

    pub fn repeat(inner: Expression, repeat: Repeat) -> Self {
        Expression::new(ExprKind::Iteration(Box::new(inner), repeat))
    }

    pub fn children(&self) -> &[Expression] {
        match &self.kind {
            ExprKind::Sequence(items) | ExprKind::Alternative(items) => items,
            ExprKind::Iteration(inner, _) => std::slice::from_ref(inner.as_ref()),
            _ => &[],
        }
    }

    pub fn children_mut(&mut self) -> &mut [Expression] {
        match &mut self.kind {
            ExprKind::Sequence(items) | ExprKind::Alternative(items) => items,
            ExprKind::Iteration(inner, _) => std::slice::from_mut(inner.as_mut()),
            _ => &mut [],
        }
    }

    /// The terms of this node when read as a sequence: the children of a
    /// `Sequence`, otherwise the node itself.
    pub fn terms(&self) -> &[Expression] {
        match &self.kind {
            ExprKind::Sequence(items) => items,
            _ => std::slice::from_ref(self),
        }
    }

    /// Pre-order traversal of this node and all descendants.
    pub fn descendants(&self) -> Vec<&Expression> {
        let mut out = Vec::new();
        fn go<'a>(e: &'a Expression, out: &mut Vec<&'a Expression>) {
            out.push(e);
            for child in e.children() {
                go(child, out);
            }
        }
        go(self, &mut out);
        out
    }

    /// Gives this node and every descendant a new id.
    pub fn refresh_ids(&mut self) {
        self.id = NodeId::fresh();
        for child in self.children_mut() {
            child.refresh_ids();
        }
    }

    pub fn find(&self, id: NodeId) -> Option<&Expression> {
        if self.id == id {
            return Some(self);
        }
        self.children().iter().find_map(|c| c.find(id))
    }

    pub fn find_mut(&mut self, id: NodeId) -> Option<&mut Expression> {
        if self.id == id {
            return Some(self);
        }
        self.children_mut().iter_mut().find_map(|c| c.find_mut(id))
    }

    /// Child-index path from `self` down to the node `id`.
    pub fn path_to(&self, id: NodeId) -> Option<Vec<usize>> {
        if self.id == id {
            return Some(Vec::new());
        }
        for (i, child) in self.children().iter().enumerate() {
            if let Some(mut rest) = child.path_to(id) {
                rest.insert(0, i);
                return Some(rest);
            }
        }
        None
    }
}
