use std::collections::{HashMap, HashSet};

use super::lexer::{tokenize, Tok, Token};
use super::ParseResult;
use crate::diagnostic::{Diagnostic, LineIndex, Severity, SourceSpan};
use crate::model::{
    AnnotationSet, Attribute, CharRange, ExprKind, Expression, Grammar, Production, QualifiedName, Repeat, Symbol,
    Value, ValueKind,
};
use crate::query::{MetaPattern, Pattern, Predicate, ProductionPattern, Query, RulePattern};
use crate::template::{Argument, ImportDecl, Param, RuleHead, Template, TemplateKind, TemplateLibrary, TemplateRule};
use crate::weave::{Aspect, AspectRule, Attachment, ConstraintRule, ConstraintTarget};

type PResult<T> = Result<T, Diagnostic>;

pub(super) struct Parser {
    toks: Vec<Token>,
    pos: usize,
    index: LineIndex,
    diags: Vec<Diagnostic>,
    placeholders: bool,
}

pub(super) fn run<T>(text: &str, file_name: &str, f: impl FnOnce(&mut Parser) -> PResult<T>) -> ParseResult<T> {
    let index = LineIndex::new(file_name, text);
    let toks = match tokenize(text) {
        Ok(t) => t,
        Err(e) => {
            let d = Diagnostic::error(e.message, index.span(e.start, e.end));
            return ParseResult::new(None, vec![d]);
        }
    };
    let mut p = Parser {
        toks,
        pos: 0,
        index,
        diags: Vec::new(),
        placeholders: false,
    };
    let value = match f(&mut p) {
        Ok(v) => Some(v),
        Err(d) => {
            p.diags.push(d);
            None
        }
    };
    ParseResult::new(value, p.diags)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn at_ident(&self, word: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == word)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn here(&self) -> SourceSpan {
        let t = &self.toks[self.pos];
        self.index.span(t.start, t.end)
    }

    /// Span from the token at `start` to the last consumed token.
    fn span_from(&self, start: usize) -> SourceSpan {
        let first = &self.toks[start];
        let last = &self.toks[self.pos.saturating_sub(1).max(start)];
        self.index.span(first.start, last.end.max(first.start))
    }

    fn unexpected<T>(&self, expected: &str) -> PResult<T> {
        Err(Diagnostic::error(
            format!("expected {expected}, found {}", self.peek().describe()),
            self.here(),
        ))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<()> {
        if self.eat(&tok) {
            Ok(())
        } else {
            self.unexpected(what)
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Tok::Ident(_) => match self.bump() {
                Tok::Ident(s) => Ok(s),
                _ => unreachable!(),
            },
            _ => self.unexpected(what),
        }
    }

    fn error(&mut self, message: impl Into<String>, span: SourceSpan) {
        self.diags.push(Diagnostic::error(message, span));
    }

    // ---- grammar files ----

    pub(super) fn grammar_file(&mut self) -> PResult<Grammar> {
        let start = self.pos;
        let mut grammar = Grammar::default();
        let mut templates = Vec::new();
        while *self.peek() != Tok::Eof {
            let is_import = self.at_ident("import") && *self.peek_at(1) != Tok::Arrow;
            let is_template = matches!(self.peek(), Tok::Ident(k) if TemplateKind::from_keyword(k).is_some())
                && matches!(self.peek_at(1), Tok::Ident(_))
                && *self.peek_at(2) == Tok::Lt;
            if is_import {
                grammar.imports.push(self.import_decl()?);
            } else if is_template {
                templates.push(self.template_decl()?);
            } else {
                grammar.symbols.push(self.rule()?);
            }
        }
        let mut seen = HashSet::new();
        for sym in &grammar.symbols {
            if !seen.insert(sym.name.clone()) {
                self.error(format!("duplicate symbol `{}`", sym.name), sym.span.clone());
            }
        }
        grammar.templates = self.library(templates);
        grammar.span = self.span_from(start);
        Ok(grammar)
    }

    fn rule(&mut self) -> PResult<Symbol> {
        let start = self.pos;
        let name = self.ident("a rule name")?;
        self.expect(Tok::Arrow, "`->`")?;
        let productions = self.productions()?;
        self.expect(Tok::Semi, "`;` or `||` after production")?;
        let mut sym = Symbol::new(name, productions);
        sym.span = self.span_from(start);
        Ok(sym)
    }

    fn productions(&mut self) -> PResult<Vec<Production>> {
        let mut out = vec![Production::new(self.expr()?)];
        while self.eat(&Tok::OrOr) {
            out.push(Production::new(self.expr()?));
        }
        Ok(out)
    }

    fn expr(&mut self) -> PResult<Expression> {
        let start = self.pos;
        let mut options = vec![self.seq()?];
        while self.eat(&Tok::Bar) {
            options.push(self.seq()?);
        }
        Ok(self.collapse(options, start, ExprKind::Alternative))
    }

    fn seq(&mut self) -> PResult<Expression> {
        let start = self.pos;
        let mut terms = Vec::new();
        while self.at_atom_start() {
            terms.push(self.term()?);
        }
        if terms.is_empty() {
            return self.unexpected("an expression");
        }
        Ok(self.collapse(terms, start, ExprKind::Sequence))
    }

    fn collapse(&self, mut items: Vec<Expression>, start: usize, make: fn(Vec<Expression>) -> ExprKind) -> Expression {
        if items.len() == 1 {
            items.pop().unwrap()
        } else {
            Expression::with_span(make(items), self.span_from(start))
        }
    }

    fn at_atom_start(&self) -> bool {
        match self.peek() {
            Tok::Ident(_) | Tok::Lex(_) | Tok::LBracket | Tok::LParen => true,
            Tok::Placeholder(_) => self.placeholders,
            _ => false,
        }
    }

    fn term(&mut self) -> PResult<Expression> {
        let start = self.pos;
        let atom = self.atom()?;
        let repeat = match self.peek() {
            Tok::Star => Repeat::Star,
            Tok::Plus => Repeat::Plus,
            Tok::Question => Repeat::Optional,
            _ => return Ok(atom),
        };
        self.bump();
        Ok(Expression::with_span(
            ExprKind::Iteration(Box::new(atom), repeat),
            self.span_from(start),
        ))
    }

    fn atom(&mut self) -> PResult<Expression> {
        let start = self.pos;
        let kind = match self.bump() {
            Tok::Ident(name) => {
                if *self.peek() == Tok::Dot {
                    self.bump();
                    let inner = self.ident("a symbol name after `.`")?;
                    ExprKind::SymbolRef(QualifiedName::qualified(name, inner))
                } else {
                    ExprKind::SymbolRef(QualifiedName::simple(name))
                }
            }
            Tok::Lex(text) => ExprKind::Literal(text),
            Tok::Placeholder(name) if self.placeholders => ExprKind::Placeholder(name),
            Tok::LBracket => ExprKind::CharClass(self.char_class()?),
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                return Ok(inner);
            }
            _ => {
                self.pos = start;
                return self.unexpected("an expression");
            }
        };
        Ok(Expression::with_span(kind, self.span_from(start)))
    }

    /// Elements of `[ … ]`; the `[` is consumed.
    fn char_class(&mut self) -> PResult<Vec<CharRange>> {
        let mut ranges = Vec::new();
        loop {
            let lo = self.lex_char()?;
            let hi = if self.eat(&Tok::DashDash) { self.lex_char()? } else { lo };
            if lo > hi {
                let span = self.span_from(self.pos.saturating_sub(3));
                self.error(format!("character range '{lo}'--'{hi}' is reversed"), span);
            }
            ranges.push(CharRange { lo, hi });
            if self.eat(&Tok::RBracket) {
                return Ok(ranges);
            }
        }
    }

    fn lex_char(&mut self) -> PResult<char> {
        match self.peek().clone() {
            Tok::Lex(text) => {
                let mut chars = text.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) => {
                        self.bump();
                        Ok(c)
                    }
                    _ => Err(Diagnostic::error(
                        format!("character class elements must be single characters, found '{text}'"),
                        self.here(),
                    )),
                }
            }
            _ => self.unexpected("a quoted character in character class"),
        }
    }

    fn import_decl(&mut self) -> PResult<ImportDecl> {
        let start = self.pos;
        self.bump(); // import
        let alias = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Eq {
            let a = self.ident("an alias")?;
            self.bump();
            Some(a)
        } else {
            None
        };
        let template = self.ident("a template name")?;
        self.expect(Tok::Lt, "`<`")?;
        let mut args = vec![self.argument()?];
        while self.eat(&Tok::Comma) {
            args.push(self.argument()?);
        }
        self.expect(Tok::Gt, "`,` or `>`")?;
        self.expect(Tok::Semi, "`;` after import")?;
        Ok(ImportDecl {
            alias,
            template,
            args,
            span: self.span_from(start),
        })
    }

    fn argument(&mut self) -> PResult<Argument> {
        if self.at_ident("empty") && matches!(self.peek_at(1), Tok::Comma | Tok::Gt) {
            self.bump();
            return Ok(Argument::Empty);
        }
        let mut list = vec![self.expr()?];
        while self.eat(&Tok::OrOr) {
            list.push(self.expr()?);
        }
        Ok(Argument::Productions(list))
    }

    // ---- templates ----

    pub(super) fn template_file(&mut self) -> PResult<TemplateLibrary> {
        let mut templates = Vec::new();
        while *self.peek() != Tok::Eof {
            templates.push(self.template_decl()?);
        }
        Ok(self.library(templates))
    }

    fn library(&mut self, templates: Vec<Template>) -> TemplateLibrary {
        let mut lib = TemplateLibrary::new();
        let diags = templates.into_iter().fold(Vec::new(), |mut acc, t| {
            if let Err(t) = lib.insert(t) {
                acc.push(Diagnostic::error(format!("duplicate template `{}`", t.name), t.span.clone()));
            }
            acc
        });
        self.diags.extend(diags);
        lib
    }

    fn template_decl(&mut self) -> PResult<Template> {
        let start = self.pos;
        let kind_word = self.ident("a template kind")?;
        let Some(kind) = TemplateKind::from_keyword(&kind_word) else {
            self.pos = start;
            return self.unexpected("a template kind (Symbol, Production, Expression, ID)");
        };
        let name = self.ident("a template name")?;
        self.expect(Tok::Lt, "`<`")?;
        let mut params = vec![self.param()?];
        while self.eat(&Tok::Comma) {
            params.push(self.param()?);
        }
        self.expect(Tok::Gt, "`,` or `>`")?;
        self.expect(Tok::LBrace, "`{`")?;
        self.placeholders = true;
        let mut rules = Vec::new();
        let body = (|| {
            while !self.eat(&Tok::RBrace) {
                rules.push(self.template_rule()?);
            }
            Ok(())
        })();
        self.placeholders = false;
        body?;
        let template = Template {
            kind,
            name,
            params,
            rules,
            span: self.span_from(start),
        };
        self.check_template(&template);
        Ok(template)
    }

    fn param(&mut self) -> PResult<Param> {
        let here = self.here();
        let word = self.ident("a parameter kind")?;
        let Some(kind) = TemplateKind::from_keyword(&word) else {
            return Err(Diagnostic::error(
                format!("unknown parameter kind `{word}` (expected ID, Expression, Production, or Symbol)"),
                here,
            ));
        };
        let many = self.eat(&Tok::Star);
        match self.bump() {
            Tok::Placeholder(name) => Ok(Param { kind, many, name }),
            _ => {
                self.pos -= 1;
                self.unexpected("a `$name` parameter")
            }
        }
    }

    fn template_rule(&mut self) -> PResult<TemplateRule> {
        let start = self.pos;
        let head = match self.bump() {
            Tok::Ident(n) => RuleHead::Name(n),
            Tok::Placeholder(p) => RuleHead::Placeholder(p),
            _ => {
                self.pos = start;
                return self.unexpected("a rule name or `$placeholder`");
            }
        };
        self.expect(Tok::Arrow, "`->`")?;
        let productions = self.productions()?;
        self.expect(Tok::Semi, "`;` or `||` after production")?;
        Ok(TemplateRule {
            head,
            productions,
            span: self.span_from(start),
        })
    }

    fn check_template(&mut self, t: &Template) {
        let mut seen = HashSet::new();
        for p in &t.params {
            if !seen.insert(p.name.as_str()) {
                self.error(format!("duplicate parameter `${}` in template `{}`", p.name, t.name), t.span.clone());
            }
            if p.many && p.kind != TemplateKind::Production {
                self.error(
                    format!("only Production parameters may be repeated (`${}`)", p.name),
                    t.span.clone(),
                );
            }
        }
        for rule in &t.rules {
            if let RuleHead::Placeholder(name) = &rule.head {
                match t.param(name) {
                    None => self.error(format!("undeclared placeholder `${name}`"), rule.span.clone()),
                    Some(p) if p.kind != TemplateKind::Id => self.error(
                        format!("placeholder `${name}` in rule head must have kind ID, not {}", p.kind),
                        rule.span.clone(),
                    ),
                    _ => {}
                }
            }
            for prod in &rule.productions {
                let whole = matches!(prod.body.kind, ExprKind::Placeholder(_));
                for e in prod.body.descendants() {
                    let ExprKind::Placeholder(name) = &e.kind else { continue };
                    match t.param(name) {
                        None => self.error(format!("undeclared placeholder `${name}`"), e.span.clone()),
                        Some(p) if p.kind == TemplateKind::Production && p.many && !whole => self.error(
                            format!("placeholder `${name}` stands for productions and must form a whole production"),
                            e.span.clone(),
                        ),
                        _ => {}
                    }
                }
            }
        }
    }

    // ---- aspects and queries ----

    pub(super) fn aspect_file(&mut self, name: String) -> PResult<Aspect> {
        let mut rules = Vec::new();
        while *self.peek() != Tok::Eof {
            rules.push(self.aspect_rule()?);
        }
        Ok(Aspect { name, rules })
    }

    fn aspect_rule(&mut self) -> PResult<AspectRule> {
        let start = self.pos;
        let query = self.query()?;
        if *self.peek() != Tok::LBrace {
            return self.unexpected("`{` to start the rule body");
        }
        let (attachments, constraints) = self.rule_body(&query)?;
        Ok(AspectRule {
            query,
            attachments,
            constraints,
            span: self.span_from(start),
        })
    }

    pub(super) fn query_only(&mut self) -> PResult<Query> {
        let q = self.query()?;
        if *self.peek() != Tok::Eof {
            return self.unexpected("end of query");
        }
        Ok(q)
    }

    pub(super) fn query_file(&mut self) -> PResult<Vec<Query>> {
        let mut out = Vec::new();
        while *self.peek() != Tok::Eof {
            let q = self.query()?;
            if *self.peek() == Tok::LBrace {
                self.rule_body(&q)?;
            }
            out.push(q);
        }
        Ok(out)
    }

    fn query(&mut self) -> PResult<Query> {
        let start = self.pos;
        let rule = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Arrow {
            Some(self.rule_pattern()?)
        } else {
            None
        };
        let mut meta = Vec::new();
        while matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LBrace {
            meta.push(self.meta_pattern()?);
            self.eat(&Tok::Semi);
        }
        if rule.is_none() && meta.is_empty() {
            return self.unexpected("a query (`Var -> pattern;` or `Var { predicates }`)");
        }
        let query = Query {
            rule,
            meta,
            span: self.span_from(start),
        };
        self.check_query(&query);
        Ok(query)
    }

    fn check_query(&mut self, q: &Query) {
        let Some(rule) = &q.rule else { return };
        let mut introduced: HashMap<&str, usize> = HashMap::new();
        let mut plain = HashSet::new();
        *introduced.entry(rule.head.as_str()).or_default() += 1;
        for prod in &rule.productions {
            if let Some(label) = &prod.label {
                *introduced.entry(label.as_str()).or_default() += 1;
            }
            collect_vars(&prod.body, &mut introduced, &mut plain);
        }
        let mut bad: Vec<&str> = introduced
            .iter()
            .filter(|(name, n)| **n > 1 && **name != rule.head.as_str())
            .map(|(name, _)| *name)
            .collect();
        bad.extend(
            introduced
                .keys()
                .filter(|name| **name != rule.head.as_str() && plain.contains(**name)),
        );
        if introduced[rule.head.as_str()] > 1 {
            bad.push(rule.head.as_str());
        }
        bad.sort_unstable();
        bad.dedup();
        for name in bad {
            self.error(format!("variable `{name}` is introduced by more than one capture"), q.span.clone());
        }
    }

    fn rule_pattern(&mut self) -> PResult<RulePattern> {
        let head = self.ident("a variable")?;
        self.expect(Tok::Arrow, "`->`")?;
        let mut productions = vec![self.production_pattern()?];
        while self.eat(&Tok::OrOr) {
            productions.push(self.production_pattern()?);
        }
        self.expect(Tok::Semi, "`;` or `||` after pattern")?;
        Ok(RulePattern { head, productions })
    }

    fn production_pattern(&mut self) -> PResult<ProductionPattern> {
        let label = if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::Colon {
            let l = self.ident("a label")?;
            self.bump();
            Some(l)
        } else {
            None
        };
        Ok(ProductionPattern {
            label,
            body: self.pattern()?,
        })
    }

    fn pattern(&mut self) -> PResult<Pattern> {
        let mut options = vec![self.pattern_seq()?];
        while self.eat(&Tok::Bar) {
            options.push(self.pattern_seq()?);
        }
        Ok(if options.len() == 1 { options.pop().unwrap() } else { Pattern::Alternative(options) })
    }

    fn pattern_seq(&mut self) -> PResult<Pattern> {
        let mut terms = Vec::new();
        while matches!(
            self.peek(),
            Tok::Ident(_) | Tok::Lex(_) | Tok::LBracket | Tok::LParen | Tok::DotDot
        ) {
            terms.push(self.pattern_term()?);
        }
        match terms.len() {
            0 => self.unexpected("a pattern"),
            1 => Ok(terms.pop().unwrap()),
            _ => Ok(Pattern::Sequence(terms)),
        }
    }

    fn pattern_term(&mut self) -> PResult<Pattern> {
        let atom = self.pattern_atom()?;
        let repeat = match self.peek() {
            Tok::Star => Repeat::Star,
            Tok::Plus => Repeat::Plus,
            Tok::Question => Repeat::Optional,
            _ => return Ok(atom),
        };
        self.bump();
        Ok(Pattern::Iteration(Box::new(atom), repeat))
    }

    fn pattern_atom(&mut self) -> PResult<Pattern> {
        let start = self.pos;
        Ok(match self.bump() {
            Tok::DotDot => Pattern::Wildcard,
            Tok::Ident(name) if *self.peek() == Tok::Eq => {
                self.bump();
                match self.bump() {
                    Tok::DotDot => Pattern::CaptureWild(name),
                    Tok::LParen => {
                        let inner = self.pattern()?;
                        self.expect(Tok::RParen, "`)`")?;
                        Pattern::Capture(name, Box::new(inner))
                    }
                    _ => {
                        self.pos -= 1;
                        return self.unexpected("`..` or `(` after `=` in a capture");
                    }
                }
            }
            Tok::Ident(name) => Pattern::Var(name),
            Tok::Lex(text) => Pattern::Literal(text),
            Tok::LBracket => Pattern::CharClass(self.char_class()?),
            Tok::LParen => {
                let inner = self.pattern()?;
                self.expect(Tok::RParen, "`)`")?;
                inner
            }
            _ => {
                self.pos = start;
                return self.unexpected("a pattern");
            }
        })
    }

    fn meta_pattern(&mut self) -> PResult<MetaPattern> {
        let var = self.ident("a variable")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut predicates: Vec<Predicate> = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let here = self.here();
            let pred = self.predicate()?;
            if predicates.iter().any(|p| p.attribute() == pred.attribute()) {
                self.error(
                    format!("attribute `{}` constrained twice in one pattern", pred.attribute()),
                    here,
                );
            }
            predicates.push(pred);
        }
        Ok(MetaPattern { var, predicates })
    }

    fn predicate(&mut self) -> PResult<Predicate> {
        if self.eat(&Tok::Bang) {
            let name = self.ident("an attribute name after `!`")?;
            self.expect(Tok::Semi, "`;`")?;
            return Ok(Predicate::Absent(name));
        }
        let name = self.ident("an attribute predicate")?;
        let pred = match self.peek() {
            Tok::Semi => Predicate::Present(name),
            Tok::Eq => {
                self.bump();
                Predicate::Equals(name, self.value()?)
            }
            Tok::Colon => {
                self.bump();
                let here = self.here();
                let type_name = self.ident("a type name")?;
                match ValueKind::from_type_name(&type_name) {
                    Some(kind) => Predicate::HasType(name, kind),
                    None => {
                        return Err(Diagnostic::error(
                            format!("unknown value type `{type_name}` (expected ID, STRING, INT, Annotation, or Sequence)"),
                            here,
                        ))
                    }
                }
            }
            _ => return self.unexpected("`;`, `=`, or `:`"),
        };
        self.expect(Tok::Semi, "`;`")?;
        Ok(pred)
    }

    /// `{ (attachment | constraint)* }` followed by an optional `;`.
    fn rule_body(&mut self, query: &Query) -> PResult<(Vec<Attachment>, Vec<ConstraintRule>)> {
        self.expect(Tok::LBrace, "`{`")?;
        let vars = query.variables();
        let mut attachments = Vec::new();
        let mut constraints = Vec::new();
        while !self.eat(&Tok::RBrace) {
            let start = self.pos;
            let is_constraint =
                (self.at_ident("error") || self.at_ident("warning")) && matches!(self.peek_at(1), Tok::Ident(s) if s == "on");
            if is_constraint {
                let c = self.constraint(start)?;
                if let ConstraintTarget::Var(v) = &c.target {
                    if !vars.contains(v) {
                        self.error(
                            format!("constraint refers to variable `{v}`, which the query does not bind"),
                            c.span.clone(),
                        );
                    }
                }
                constraints.push(c);
            } else if matches!(self.peek(), Tok::Ident(_)) && *self.peek_at(1) == Tok::LBrace {
                let var = self.ident("a variable")?;
                let attributes = self.attribute_block()?;
                self.eat(&Tok::Semi);
                let span = self.span_from(start);
                if !vars.contains(&var) {
                    self.error(
                        format!("attachment refers to variable `{var}`, which the query does not bind"),
                        span.clone(),
                    );
                }
                attachments.push(Attachment { var, attributes, span });
            } else {
                return self.unexpected("an attachment `Var { … };` or a constraint `error on …`");
            }
        }
        self.eat(&Tok::Semi);
        Ok((attachments, constraints))
    }

    fn constraint(&mut self, start: usize) -> PResult<ConstraintRule> {
        let severity = if self.at_ident("error") { Severity::Error } else { Severity::Warning };
        self.bump();
        self.bump(); // on
        let target = match self.ident("a variable or `nomatch`")? {
            v if v == "nomatch" => ConstraintTarget::NoMatch,
            v => ConstraintTarget::Var(v),
        };
        self.expect(Tok::Colon, "`:`")?;
        let message = match self.bump() {
            Tok::Str(s) => s,
            _ => {
                self.pos -= 1;
                return self.unexpected("a message string");
            }
        };
        self.expect(Tok::Semi, "`;`")?;
        let span = self.span_from(start);
        if message.is_empty() {
            self.error("constraint message must not be empty", span.clone());
        }
        Ok(ConstraintRule {
            severity,
            target,
            message,
            span,
        })
    }

    /// `{ attribute* }`
    fn attribute_block(&mut self) -> PResult<Vec<Attribute>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut attrs = Vec::new();
        while !self.eat(&Tok::RBrace) {
            self.push_attribute(&mut attrs)?;
        }
        Ok(attrs)
    }

    fn push_attribute(&mut self, attrs: &mut Vec<Attribute>) -> PResult<()> {
        let here = self.here();
        let attr = self.attribute()?;
        if attrs.iter().any(|a| a.name == attr.name) {
            self.error(format!("duplicate attribute `{}`", attr.name), here);
        }
        attrs.push(attr);
        Ok(())
    }

    pub(super) fn attribute_list(&mut self) -> PResult<AnnotationSet> {
        let mut attrs = Vec::new();
        while *self.peek() != Tok::Eof {
            self.push_attribute(&mut attrs)?;
        }
        Ok(attrs.into_iter().collect())
    }

    fn attribute(&mut self) -> PResult<Attribute> {
        let name = self.ident("an attribute name")?;
        let value = if self.eat(&Tok::Eq) { Some(self.value()?) } else { None };
        self.expect(Tok::Semi, "`;` after attribute")?;
        Ok(Attribute { name, value })
    }

    fn value(&mut self) -> PResult<Value> {
        Ok(match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Value::Ident(s)
            }
            Tok::Str(s) => {
                self.bump();
                Value::Str(s)
            }
            Tok::Int(n) => {
                self.bump();
                Value::Int(n)
            }
            Tok::Seq(tokens) => {
                self.bump();
                Value::Sequence(tokens)
            }
            Tok::LBrace => Value::Annotation(self.attribute_block()?.into_iter().collect()),
            _ => return self.unexpected("a value"),
        })
    }
}

fn collect_vars<'a>(p: &'a Pattern, introduced: &mut HashMap<&'a str, usize>, plain: &mut HashSet<&'a str>) {
    match p {
        Pattern::Var(v) => {
            plain.insert(v);
        }
        Pattern::CaptureWild(v) => *introduced.entry(v).or_default() += 1,
        Pattern::Capture(v, inner) => {
            *introduced.entry(v).or_default() += 1;
            collect_vars(inner, introduced, plain);
        }
        Pattern::Sequence(items) | Pattern::Alternative(items) => {
            items.iter().for_each(|i| collect_vars(i, introduced, plain))
        }
        Pattern::Iteration(inner, _) => collect_vars(inner, introduced, plain),
        _ => {}
    }
}
