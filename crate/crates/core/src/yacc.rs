//! Yacc export: symbol classification, EBNF-to-BNF lowering, and emission.
//!
//! `*` and `+` lower to left-recursive helper rules, which suit LALR
//! generators. Targets that need LL input must rewrite them.

use std::collections::{HashMap, HashSet};
use std::fmt::Write;

use crate::diagnostic::{has_errors, Diagnostic};
use crate::model::{CharRange, ExprKind, Expression, Grammar, NodeId, Repeat, Symbol, Value};
use crate::syntax::print_expression;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    pub lexical: Vec<String>,
    pub syntactic: Vec<String>,
}

impl Classification {
    pub fn is_lexical(&self, name: &str) -> bool {
        self.lexical.iter().any(|n| n == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BnfTerm {
    Token(String),
    Nonterminal(String),
}

impl BnfTerm {
    pub fn name(&self) -> &str {
        match self {
            BnfTerm::Token(n) | BnfTerm::Nonterminal(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnfAlternative {
    pub terms: Vec<BnfTerm>,
    /// The production this alternative came from; `None` for helper rules.
    pub origin: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnfRule {
    pub head: String,
    pub alternatives: Vec<BnfAlternative>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lexeme {
    Literal(String),
    /// Regular definition of a lexical symbol or character class, in
    /// grammar syntax.
    Regular(String),
    /// Referenced but defined nowhere; the lexer is expected to supply it.
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenDecl {
    pub name: String,
    pub lexeme: Lexeme,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnfGrammar {
    pub tokens: Vec<TokenDecl>,
    pub rules: Vec<BnfRule>,
    pub start: String,
}

impl BnfGrammar {
    pub fn rule(&self, head: &str) -> Option<&BnfRule> {
        self.rules.iter().find(|r| r.head == head)
    }
}

fn has_lexical_name(name: &str) -> bool {
    !name.is_empty()
        && name.chars().any(|c| c.is_ascii_uppercase())
        && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Splits the (flattened) grammar's symbols into lexical and syntactic ones.
/// A symbol is lexical if it carries the `lexical` flag or its name is all
/// uppercase letters, digits, and underscores.
pub fn classify_symbols(grammar: &Grammar) -> (Classification, Vec<Diagnostic>) {
    let mut class = Classification {
        lexical: Vec::new(),
        syntactic: Vec::new(),
    };
    for sym in &grammar.symbols {
        if sym.annotations.contains("lexical") || has_lexical_name(&sym.name) {
            class.lexical.push(sym.name.clone());
        } else {
            class.syntactic.push(sym.name.clone());
        }
    }
    let mut diags = Vec::new();
    for sym in grammar.symbols.iter().filter(|s| class.is_lexical(&s.name)) {
        for prod in &sym.productions {
            for e in prod.body.descendants() {
                let ExprKind::SymbolRef(q) = &e.kind else { continue };
                if q.namespace.is_none() && class.syntactic.contains(&q.name) {
                    diags.push(Diagnostic::error(
                        format!("lexical symbol `{}` refers to syntactic symbol `{}`", sym.name, q.name),
                        e.span.clone(),
                    ));
                }
            }
        }
    }
    (class, diags)
}

fn literal_token_name(text: &str) -> String {
    let named = match text {
        "*" => "STAR",
        "+" => "PLUS",
        "-" => "MINUS",
        "/" => "SLASH",
        "(" => "LPAREN",
        ")" => "RPAREN",
        "[" => "LBRACKET",
        "]" => "RBRACKET",
        "{" => "LBRACE",
        "}" => "RBRACE",
        "," => "COMMA",
        ";" => "SEMICOLON",
        ":" => "COLON",
        "." => "DOT",
        "=" => "EQUALS",
        "<" => "LT",
        ">" => "GT",
        "!" => "BANG",
        "?" => "QUESTION",
        "|" => "PIPE",
        "&" => "AMP",
        "^" => "CARET",
        "%" => "PERCENT",
        "~" => "TILDE",
        "@" => "AT",
        "#" => "HASH",
        "$" => "DOLLAR",
        _ => {
            let hex: String = text.bytes().map(|b| format!("{b:02X}")).collect();
            return format!("LIT_{hex}");
        }
    };
    named.to_string()
}

struct Lowerer<'g> {
    grammar: &'g Grammar,
    class: &'g Classification,
    taken: HashSet<String>,
    counters: HashMap<String, usize>,
    literal_tokens: Vec<TokenDecl>,
    literals: HashMap<String, String>,
    classes: HashMap<Vec<CharRange>, String>,
    /// Helpers of the symbol being lowered, keyed by allocation order.
    pending: Vec<(usize, BnfRule)>,
    allocated: usize,
}

impl Lowerer<'_> {
    fn fresh(&mut self, owner: &str) -> (usize, String) {
        let counter = self.counters.entry(owner.to_string()).or_insert(0);
        loop {
            *counter += 1;
            let name = format!("{owner}_{counter}");
            if self.taken.insert(name.clone()) {
                self.allocated += 1;
                return (self.allocated, name);
            }
        }
    }

    fn token(&mut self, base: String, lexeme: Lexeme) -> String {
        let mut name = base.clone();
        let mut n = 1;
        while !self.taken.insert(name.clone()) {
            n += 1;
            name = format!("{base}_{n}");
        }
        self.literal_tokens.push(TokenDecl {
            name: name.clone(),
            lexeme,
        });
        name
    }

    fn literal(&mut self, text: &str) -> String {
        if let Some(name) = self.literals.get(text) {
            return name.clone();
        }
        let name = self.token(literal_token_name(text), Lexeme::Literal(text.to_string()));
        self.literals.insert(text.to_string(), name.clone());
        name
    }

    fn char_class(&mut self, e: &Expression, ranges: &[CharRange]) -> String {
        if let Some(name) = self.classes.get(ranges) {
            return name.clone();
        }
        let base = format!("CHARS_{}", self.classes.len() + 1);
        let name = self.token(base, Lexeme::Regular(print_expression(e)));
        self.classes.insert(ranges.to_vec(), name.clone());
        name
    }

    /// Top-level alternatives become separate BNF alternatives.
    fn alternatives(&mut self, owner: &str, e: &Expression) -> Vec<Vec<BnfTerm>> {
        match &e.kind {
            ExprKind::Alternative(options) => options.iter().flat_map(|o| self.alternatives(owner, o)).collect(),
            _ => vec![self.terms(owner, e)],
        }
    }

    fn helper(&mut self, owner: &str, build: impl FnOnce(&mut Self, &str) -> Vec<Vec<BnfTerm>>) -> Vec<BnfTerm> {
        let (order, name) = self.fresh(owner);
        let alternatives = build(self, &name)
            .into_iter()
            .map(|terms| BnfAlternative { terms, origin: None })
            .collect();
        self.pending.push((
            order,
            BnfRule {
                head: name.clone(),
                alternatives,
            },
        ));
        vec![BnfTerm::Nonterminal(name)]
    }

    fn terms(&mut self, owner: &str, e: &Expression) -> Vec<BnfTerm> {
        match &e.kind {
            ExprKind::Sequence(items) => items.iter().flat_map(|i| self.terms(owner, i)).collect(),
            ExprKind::Alternative(_) => self.helper(owner, |me, _| me.alternatives(owner, e)),
            ExprKind::Iteration(inner, repeat) => {
                let repeat = *repeat;
                self.helper(owner, |me, head| {
                    let body = me.alternatives(owner, inner);
                    let recursive = body.iter().map(|b| {
                        let mut terms = vec![BnfTerm::Nonterminal(head.to_string())];
                        terms.extend(b.iter().cloned());
                        terms
                    });
                    match repeat {
                        Repeat::Star => std::iter::once(Vec::new()).chain(recursive).collect(),
                        Repeat::Plus => body.iter().cloned().chain(recursive).collect(),
                        Repeat::Optional => std::iter::once(Vec::new()).chain(body.iter().cloned()).collect(),
                    }
                })
            }
            ExprKind::SymbolRef(q) => {
                let syntactic = q.namespace.is_none() && self.class.syntactic.contains(&q.name);
                if syntactic {
                    vec![BnfTerm::Nonterminal(q.name.clone())]
                } else {
                    vec![BnfTerm::Token(q.name.clone())]
                }
            }
            ExprKind::Literal(text) => vec![BnfTerm::Token(self.literal(text))],
            ExprKind::CharClass(ranges) => vec![BnfTerm::Token(self.char_class(e, ranges))],
            ExprKind::Placeholder(p) => vec![BnfTerm::Token(format!("${p}"))],
        }
    }

    fn lower_symbol(&mut self, sym: &Symbol) -> Vec<BnfRule> {
        let mut alternatives = Vec::new();
        for prod in &sym.productions {
            for terms in self.alternatives(&sym.name, &prod.body) {
                alternatives.push(BnfAlternative {
                    terms,
                    origin: Some(prod.id),
                });
            }
        }
        let mut helpers = std::mem::take(&mut self.pending);
        helpers.sort_by_key(|(order, _)| *order);
        let mut rules = vec![BnfRule {
            head: sym.name.clone(),
            alternatives,
        }];
        rules.extend(helpers.into_iter().map(|(_, r)| r));
        rules
    }
}

fn external_names(grammar: &Grammar, class: &Classification) -> Vec<String> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for sym in grammar.symbols.iter().filter(|s| !class.is_lexical(&s.name)) {
        for prod in &sym.productions {
            for e in prod.body.descendants() {
                if let ExprKind::SymbolRef(q) = &e.kind {
                    let defined = q.namespace.is_none() && grammar.symbol(&q.name).is_some();
                    if !defined && seen.insert(q.to_string()) {
                        out.push(q.to_string());
                    }
                }
            }
        }
    }
    out
}

fn start_symbol(grammar: &Grammar, class: &Classification) -> Result<String, Diagnostic> {
    let flagged: Vec<&Symbol> = grammar
        .symbols
        .iter()
        .filter(|s| s.annotations.contains("start"))
        .collect();
    match flagged.as_slice() {
        [] => class
            .syntactic
            .first()
            .cloned()
            .ok_or_else(|| Diagnostic::error("grammar has no syntactic symbol to start from", grammar.span.clone())),
        [one] if class.is_lexical(&one.name) => Err(Diagnostic::error(
            format!("start symbol `{}` is lexical", one.name),
            one.span.clone(),
        )
        .with_node(one.id, Some(one.name.clone()))),
        [one] => Ok(one.name.clone()),
        [_, second, ..] => Err(Diagnostic::error(
            format!("more than one symbol is marked `start` (`{}` is the second)", second.name),
            second.span.clone(),
        )
        .with_node(second.id, Some(second.name.clone()))),
    }
}

/// Lowers the grammar to plain BNF. Namespaces are flattened first.
pub fn lower_ebnf(grammar: &Grammar) -> Result<BnfGrammar, Vec<Diagnostic>> {
    let flat = grammar.flatten();
    let mut diags: Vec<Diagnostic> = flat.validate().into_iter().filter(|d| d.is_error()).collect();
    let (class, class_diags) = classify_symbols(&flat);
    diags.extend(class_diags);
    let start = start_symbol(&flat, &class).map_err(|d| diags.push(d)).ok();
    if has_errors(&diags) {
        return Err(diags);
    }

    let externals = external_names(&flat, &class);
    let mut taken: HashSet<String> = flat.symbols.iter().map(|s| s.name.clone()).collect();
    taken.extend(externals.iter().cloned());
    let mut lowerer = Lowerer {
        grammar: &flat,
        class: &class,
        taken,
        counters: HashMap::new(),
        literal_tokens: Vec::new(),
        literals: HashMap::new(),
        classes: HashMap::new(),
        pending: Vec::new(),
        allocated: 0,
    };
    let mut rules = Vec::new();
    for sym in lowerer.grammar.symbols.iter().filter(|s| !class.is_lexical(&s.name)) {
        rules.extend(lowerer.lower_symbol(sym));
    }

    let mut tokens: Vec<TokenDecl> = flat
        .symbols
        .iter()
        .filter(|s| class.is_lexical(&s.name))
        .map(|s| TokenDecl {
            name: s.name.clone(),
            lexeme: Lexeme::Regular(
                s.productions
                    .iter()
                    .map(|p| print_expression(&p.body))
                    .collect::<Vec<_>>()
                    .join(" | "),
            ),
        })
        .collect();
    tokens.extend(externals.into_iter().map(|name| TokenDecl {
        name,
        lexeme: Lexeme::External,
    }));
    tokens.extend(lowerer.literal_tokens);
    Ok(BnfGrammar {
        tokens,
        rules,
        start: start.expect("start symbol checked above"),
    })
}

fn comment(text: &str) -> String {
    format!("/* {} */", text.replace("*/", "* /"))
}

/// Renders the lowered grammar as a Yacc input file. Alternatives whose
/// originating production carries a string `action` attribute are followed
/// by that code in braces.
pub fn emit_yacc(bnf: &BnfGrammar, grammar: &Grammar) -> Result<String, Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let mut out = String::new();
    for token in &bnf.tokens {
        let _ = match &token.lexeme {
            Lexeme::Literal(text) => {
                let mut quoted = String::new();
                quoted.push('\'');
                for c in text.chars() {
                    if c == '\'' || c == '\\' {
                        quoted.push('\\');
                    }
                    quoted.push(c);
                }
                quoted.push('\'');
                writeln!(out, "%token {} {}", token.name, comment(&quoted))
            }
            Lexeme::Regular(def) => writeln!(out, "%token {} {}", token.name, comment(def)),
            Lexeme::External => writeln!(out, "%token {}", token.name),
        };
    }
    let _ = writeln!(out, "%start {}", bnf.start);
    out.push_str("%%\n");
    let mut reported = HashSet::new();
    for rule in &bnf.rules {
        let _ = writeln!(out, "\n{}", rule.head);
        for (i, alt) in rule.alternatives.iter().enumerate() {
            out.push_str(if i == 0 { "    :" } else { "    |" });
            if alt.terms.is_empty() {
                out.push_str(" /* empty */");
            }
            for term in &alt.terms {
                out.push(' ');
                out.push_str(term.name());
            }
            if let Some(id) = alt.origin {
                match action(grammar, id) {
                    Ok(Some(code)) => {
                        let _ = write!(out, " {{ {code} }}");
                    }
                    Ok(None) => {}
                    Err(d) => {
                        if reported.insert(id) {
                            diags.push(d);
                        }
                    }
                }
            }
            out.push('\n');
        }
        out.push_str("    ;\n");
    }
    out.push_str("\n%%\n");
    if diags.is_empty() {
        Ok(out)
    } else {
        Err(diags)
    }
}

fn action(grammar: &Grammar, production: NodeId) -> Result<Option<String>, Diagnostic> {
    let Some(node) = grammar.node(production) else { return Ok(None) };
    let Some(attr) = node.annotations().get("action") else { return Ok(None) };
    match &attr.value {
        Some(Value::Str(code)) => Ok(Some(code.clone())),
        other => {
            let found = other.as_ref().map(|v| v.kind().type_name()).unwrap_or("a flag");
            let subject = grammar.path_of(production).map(|p| p.to_string());
            Err(Diagnostic::error(
                format!(
                    "attribute `action` on {} must be a STRING, found {found}",
                    subject.as_deref().unwrap_or("production")
                ),
                node.span().clone(),
            )
            .with_node(production, subject))
        }
    }
}

/// Lowers and emits in one step.
pub fn export_yacc(grammar: &Grammar) -> Result<String, Vec<Diagnostic>> {
    let bnf = lower_ebnf(grammar)?;
    emit_yacc(&bnf, grammar)
}
