#![allow(dead_code)]

//! Shared generators and independent oracles for the integration tests.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use gramweave::model::{
    Attribute, CharRange, ExprKind, Expression, Grammar, NodeId, Production, QualifiedName, Repeat, Symbol, Value,
    ValueKind,
};
use gramweave::query::{MetaPattern, Pattern, Predicate, ProductionPattern, Query, RulePattern};
use gramweave::yacc::{BnfGrammar, BnfTerm, Lexeme};
use gramweave::{Binding, SourceSpan, Target};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub use rand::SeedableRng;
pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn fixture(name: &str) -> String {
    let path = format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"))
}

pub fn fixture_path(name: &str) -> String {
    format!("{}/tests/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

// ---- random grammars ----

const SYMBOL_NAMES: [&str; 10] = ["Expr", "Term", "Factor", "Sum", "Product", "Atom", "Item", "List", "Stmt", "Block"];
const EXTERNALS: [&str; 3] = ["ID", "NUM", "STRING"];
const LITERALS: [&str; 8] = ["+", "-", "*", "(", ")", "if", "'", "\\"];

#[derive(Clone, Copy)]
pub struct Shape {
    pub max_symbols: usize,
    pub max_productions: usize,
    pub max_depth: usize,
    pub max_width: usize,
    /// Chance that a production starts with a reference to its own symbol.
    pub left_recursion: f64,
}

impl Shape {
    pub const ROUND_TRIP: Shape = Shape {
        max_symbols: 8,
        max_productions: 3,
        max_depth: 4,
        max_width: 3,
        left_recursion: 0.2,
    };
    pub const QUERY: Shape = Shape {
        max_symbols: 8,
        max_productions: 2,
        max_depth: 3,
        max_width: 3,
        left_recursion: 0.25,
    };
}

fn expr(kind: ExprKind) -> Expression {
    Expression::new(kind)
}

fn random_leaf(rng: &mut TestRng, names: &[String]) -> Expression {
    let roll: f64 = rng.gen();
    if roll < 0.55 {
        let name = if rng.gen_bool(0.8) {
            names.choose(rng).unwrap().clone()
        } else {
            EXTERNALS.choose(rng).unwrap().to_string()
        };
        expr(ExprKind::SymbolRef(QualifiedName::simple(name)))
    } else if roll < 0.9 {
        expr(ExprKind::Literal(LITERALS.choose(rng).unwrap().to_string()))
    } else {
        let mut ranges = vec![CharRange { lo: 'a', hi: 'z' }];
        if rng.gen_bool(0.5) {
            ranges.push(CharRange::single('_'));
        }
        expr(ExprKind::CharClass(ranges))
    }
}

pub fn random_expression(rng: &mut TestRng, names: &[String], depth: usize, width: usize) -> Expression {
    if depth == 0 || rng.gen_bool(0.35) {
        return random_leaf(rng, names);
    }
    let n = rng.gen_range(2..=width.max(2));
    match rng.gen_range(0..3) {
        0 => expr(ExprKind::Sequence(
            (0..n).map(|_| random_expression(rng, names, depth - 1, width)).collect(),
        )),
        1 => expr(ExprKind::Alternative(
            (0..n).map(|_| random_expression(rng, names, depth - 1, width)).collect(),
        )),
        _ => {
            let repeat = *[Repeat::Star, Repeat::Plus, Repeat::Optional].choose(rng).unwrap();
            expr(ExprKind::Iteration(
                Box::new(random_expression(rng, names, depth - 1, width)),
                repeat,
            ))
        }
    }
}

pub fn random_grammar(rng: &mut TestRng, shape: Shape) -> Grammar {
    let count = rng.gen_range(1..=shape.max_symbols);
    let mut pool: Vec<String> = SYMBOL_NAMES.iter().map(|s| s.to_string()).collect();
    pool.shuffle(rng);
    let names: Vec<String> = pool.into_iter().take(count).collect();
    let symbols = names
        .iter()
        .map(|name| {
            let productions = (0..rng.gen_range(1..=shape.max_productions))
                .map(|_| {
                    let mut body = random_expression(rng, &names, shape.max_depth, shape.max_width);
                    if rng.gen_bool(shape.left_recursion) {
                        let head = expr(ExprKind::SymbolRef(QualifiedName::simple(name.clone())));
                        body = match body.kind {
                            ExprKind::Sequence(mut items) => {
                                items.insert(0, head);
                                expr(ExprKind::Sequence(items))
                            }
                            _ if rng.gen_bool(0.3) => head,
                            _ => expr(ExprKind::Sequence(vec![head, body])),
                        };
                    }
                    Production::new(body)
                })
                .collect();
            Symbol::new(name.clone(), productions)
        })
        .collect();
    Grammar::new(symbols)
}

/// Attaches random flags and small values to random nodes, for predicate
/// tests.
pub fn sprinkle_annotations(rng: &mut TestRng, g: &mut Grammar) {
    let ids: Vec<NodeId> = g.walk().iter().map(|n| n.id()).collect();
    for id in ids {
        if !rng.gen_bool(0.3) {
            continue;
        }
        let attr = match rng.gen_range(0..5) {
            0 => Attribute::flag("a"),
            1 => Attribute::flag("b"),
            2 => Attribute::new("k", Value::Int(1)),
            3 => Attribute::new("k", Value::Int(2)),
            _ => Attribute::new("k", Value::Ident("x".into())),
        };
        g.attach(id, attr).unwrap();
    }
}

// ---- random queries ----

struct Abstraction<'r> {
    rng: &'r mut TestRng,
    head: String,
    names: HashMap<String, String>,
    vars_left: usize,
    wild_left: usize,
    captures_left: usize,
    next: usize,
}

impl Abstraction<'_> {
    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn capture_wild(&mut self) -> Option<Pattern> {
        if self.wild_left > 0 && self.vars_left > 0 && self.captures_left > 0 {
            self.wild_left -= 1;
            self.vars_left -= 1;
            self.captures_left -= 1;
            Some(Pattern::CaptureWild(self.fresh("C")))
        } else {
            None
        }
    }

    fn wildcard(&mut self) -> Option<Pattern> {
        if self.wild_left > 0 {
            self.wild_left -= 1;
            Some(Pattern::Wildcard)
        } else {
            None
        }
    }

    fn wild_any(&mut self) -> Option<Pattern> {
        if self.rng.gen_bool(0.5) {
            self.capture_wild().or_else(|| self.wildcard())
        } else {
            self.wildcard()
        }
    }

    fn pattern(&mut self, e: &Expression) -> Pattern {
        let roll: f64 = self.rng.gen();
        if roll < 0.08 {
            if let Some(p) = self.wild_any() {
                return p;
            }
        }
        let compound = !e.children().is_empty();
        if roll > 0.85 && compound && self.vars_left > 0 && self.captures_left > 0 {
            self.vars_left -= 1;
            self.captures_left -= 1;
            let name = self.fresh("C");
            return Pattern::Capture(name, Box::new(self.structural(e)));
        }
        self.structural(e)
    }

    fn structural(&mut self, e: &Expression) -> Pattern {
        match &e.kind {
            ExprKind::SymbolRef(q) => {
                if q.name == self.head && self.rng.gen_bool(0.7) {
                    return Pattern::Var("H".into());
                }
                if let Some(v) = self.names.get(&q.name) {
                    if self.rng.gen_bool(0.8) {
                        return Pattern::Var(v.clone());
                    }
                }
                if self.vars_left > 0 {
                    self.vars_left -= 1;
                    let v = self.fresh("V");
                    self.names.insert(q.name.clone(), v.clone());
                    return Pattern::Var(v);
                }
                if let Some(p) = self.wildcard() {
                    return p;
                }
                let mut existing: Vec<String> = self.names.values().cloned().collect();
                existing.push("H".into());
                existing.sort();
                Pattern::Var(existing.choose(self.rng).unwrap().clone())
            }
            ExprKind::Literal(t) => {
                if self.rng.gen_bool(0.1) {
                    Pattern::Literal(LITERALS.choose(self.rng).unwrap().to_string())
                } else {
                    Pattern::Literal(t.clone())
                }
            }
            ExprKind::CharClass(r) => Pattern::CharClass(r.clone()),
            ExprKind::Placeholder(_) => Pattern::Wildcard,
            ExprKind::Iteration(inner, k) => {
                let k = if self.rng.gen_bool(0.1) {
                    *[Repeat::Star, Repeat::Plus, Repeat::Optional].choose(self.rng).unwrap()
                } else {
                    *k
                };
                Pattern::Iteration(Box::new(self.pattern(inner)), k)
            }
            ExprKind::Alternative(opts) => Pattern::Alternative(opts.iter().map(|o| self.pattern(o)).collect()),
            ExprKind::Sequence(items) => {
                let mut ps: Vec<Pattern> = items.iter().map(|i| self.pattern(i)).collect();
                if self.rng.gen_bool(0.3) {
                    let start = self.rng.gen_range(0..=ps.len());
                    let len = self.rng.gen_range(0..=2.min(ps.len() - start));
                    if let Some(w) = self.wild_any() {
                        ps.splice(start..start + len, [w]);
                    }
                }
                sequence_pattern(ps)
            }
        }
    }
}

fn sequence_pattern(mut ps: Vec<Pattern>) -> Pattern {
    if ps.len() == 1 {
        ps.pop().unwrap()
    } else {
        Pattern::Sequence(ps)
    }
}

fn random_predicate(rng: &mut TestRng) -> Predicate {
    match rng.gen_range(0..7) {
        0 => Predicate::Present("a".into()),
        1 => Predicate::Absent("a".into()),
        2 => Predicate::Present("b".into()),
        3 => Predicate::Absent("b".into()),
        4 => Predicate::Equals("k".into(), Value::Int(rng.gen_range(1..=2))),
        5 => Predicate::HasType("k".into(), ValueKind::Int),
        _ => Predicate::HasType("k".into(), ValueKind::Ident),
    }
}

fn random_meta(rng: &mut TestRng, var: String) -> MetaPattern {
    let mut predicates: Vec<Predicate> = Vec::new();
    for _ in 0..rng.gen_range(1..=2) {
        let p = random_predicate(rng);
        if predicates.iter().all(|q| q.attribute() != p.attribute()) {
            predicates.push(p);
        }
    }
    MetaPattern { var, predicates }
}

/// A query built by abstracting one or two productions of a random symbol,
/// within at most 4 variables and 2 wildcards.
pub fn random_query(rng: &mut TestRng, g: &Grammar) -> Query {
    if rng.gen_bool(0.08) {
        let meta = vec![random_meta(rng, "N".into())];
        return Query {
            rule: None,
            meta,
            span: SourceSpan::default(),
        };
    }
    let sym = g.symbols.choose(rng).unwrap();
    let mut prods: Vec<&Production> = sym.productions.iter().collect();
    prods.shuffle(rng);
    let take = if prods.len() > 1 && rng.gen_bool(0.3) { 2 } else { 1 };
    let mut st = Abstraction {
        rng,
        head: sym.name.clone(),
        names: HashMap::new(),
        vars_left: 3,
        wild_left: 2,
        captures_left: 2,
        next: 0,
    };
    let mut productions = Vec::new();
    for prod in prods.into_iter().take(take) {
        let label = if st.vars_left > 0 && st.rng.gen_bool(0.25) {
            st.vars_left -= 1;
            Some(st.fresh("P"))
        } else {
            None
        };
        let mut body = st.pattern(&prod.body);
        if !matches!(prod.body.kind, ExprKind::Sequence(_)) && st.rng.gen_bool(0.15) {
            if let Some(w) = st.wildcard() {
                body = Pattern::Sequence(vec![body, w]);
            }
        }
        productions.push(ProductionPattern { label, body });
    }
    let vars_left = st.vars_left;
    let rng = st.rng;
    let mut query = Query {
        rule: Some(RulePattern {
            head: "H".into(),
            productions,
        }),
        meta: Vec::new(),
        span: SourceSpan::default(),
    };
    if rng.gen_bool(0.35) {
        let bound = query.variables();
        let var = if vars_left > 0 && rng.gen_bool(0.3) {
            "M".to_string()
        } else {
            bound.choose(rng).unwrap().clone()
        };
        query.meta.push(random_meta(rng, var));
    }
    query
}

// ---- brute-force query oracle ----

#[derive(Clone, Copy, PartialEq)]
enum VarKind {
    Head,
    Plain,
    Capture,
    Label,
    MetaOnly,
}

fn collect_kinds(p: &Pattern, kinds: &mut BTreeMap<String, VarKind>) {
    match p {
        Pattern::Var(v) => {
            kinds.entry(v.clone()).or_insert(VarKind::Plain);
        }
        Pattern::Capture(v, inner) => {
            kinds.insert(v.clone(), VarKind::Capture);
            collect_kinds(inner, kinds);
        }
        Pattern::CaptureWild(v) => {
            kinds.insert(v.clone(), VarKind::Capture);
        }
        Pattern::Sequence(ps) | Pattern::Alternative(ps) => ps.iter().for_each(|p| collect_kinds(p, kinds)),
        Pattern::Iteration(inner, _) => collect_kinds(inner, kinds),
        _ => {}
    }
}

struct Oracle<'g> {
    g: &'g Grammar,
    asg: BTreeMap<String, Target>,
}

fn terms(e: &Expression) -> Vec<&Expression> {
    match &e.kind {
        ExprKind::Sequence(items) => items.iter().collect(),
        _ => vec![e],
    }
}

impl Oracle<'_> {
    fn resolve(&self, name: &QualifiedName) -> Target {
        match self.g.symbols.iter().find(|s| name.namespace.is_none() && s.name == name.name) {
            Some(s) => Target::Symbol(s.id),
            None => Target::External(name.to_string()),
        }
    }

    fn is(&self, var: &str, target: &Target) -> bool {
        self.asg.get(var) == Some(target)
    }

    fn verify(&self, p: &Pattern, e: &Expression) -> bool {
        match (p, &e.kind) {
            (Pattern::Wildcard, _) => true,
            (Pattern::CaptureWild(v), _) => self.is(v, &Target::Expression(e.id)),
            (Pattern::Capture(v, inner), _) => self.is(v, &Target::Expression(e.id)) && self.verify(inner, e),
            (Pattern::Var(v), ExprKind::SymbolRef(q)) => self.is(v, &self.resolve(q)),
            (Pattern::Literal(a), ExprKind::Literal(b)) => a == b,
            (Pattern::CharClass(a), ExprKind::CharClass(b)) => a == b,
            (Pattern::Iteration(p, pk), ExprKind::Iteration(inner, k)) => pk == k && self.verify(p, inner),
            (Pattern::Alternative(ps), ExprKind::Alternative(opts)) => {
                ps.len() == opts.len() && ps.iter().zip(opts).all(|(p, o)| self.verify(p, o))
            }
            (Pattern::Sequence(ps), _) => self.verify_terms(ps, &terms(e), 0, e.id),
            _ => false,
        }
    }

    fn verify_terms(&self, ps: &[Pattern], ts: &[&Expression], off: usize, parent: NodeId) -> bool {
        let Some((p, rest)) = ps.split_first() else {
            return off == ts.len();
        };
        let remaining = ts.len() - off;
        match p {
            Pattern::Wildcard => (0..=remaining).any(|len| self.verify_terms(rest, ts, off + len, parent)),
            Pattern::CaptureWild(v) => (0..=remaining).any(|len| {
                let target = if len == 1 {
                    Target::Expression(ts[off].id)
                } else {
                    Target::Run { parent, start: off, len }
                };
                self.is(v, &target) && self.verify_terms(rest, ts, off + len, parent)
            }),
            _ => remaining > 0 && self.verify(p, ts[off]) && self.verify_terms(rest, ts, off + 1, parent),
        }
    }

    /// Is there an injective assignment of production patterns to
    /// productions of `sym` under which every pattern verifies?
    fn productions_match(&self, patterns: &[ProductionPattern], sym: &Symbol, used: &mut Vec<bool>) -> bool {
        let Some((first, rest)) = patterns.split_first() else {
            return true;
        };
        for (j, prod) in sym.productions.iter().enumerate() {
            if used[j] {
                continue;
            }
            if let Some(label) = &first.label {
                if !self.is(label, &Target::Production(prod.id)) {
                    continue;
                }
            }
            if self.verify(&first.body, &prod.body) {
                used[j] = true;
                let ok = self.productions_match(rest, sym, used);
                used[j] = false;
                if ok {
                    return true;
                }
            }
        }
        false
    }
}

fn eval(pred: &Predicate, set: &gramweave::model::AnnotationSet) -> bool {
    let value = set.get(pred.attribute()).map(|a| a.value.clone());
    match pred {
        Predicate::Present(_) => value.is_some(),
        Predicate::Absent(_) => value.is_none(),
        Predicate::Equals(_, v) => value == Some(Some(v.clone())),
        Predicate::HasType(_, k) => matches!(value, Some(Some(v)) if v.kind() == *k),
    }
}

fn annotations_of<'g>(g: &'g Grammar, target: &Target) -> Option<&'g gramweave::model::AnnotationSet> {
    let id = match target {
        Target::Symbol(id) | Target::Production(id) | Target::Expression(id) => *id,
        _ => return None,
    };
    g.walk().into_iter().find(|n| n.id() == id).map(|n| n.annotations())
}

fn candidates(g: &Grammar, sym: Option<&Symbol>, kind: VarKind, externals: &[String]) -> Vec<Target> {
    match kind {
        VarKind::Head => vec![Target::Symbol(sym.unwrap().id)],
        VarKind::Plain => g
            .symbols
            .iter()
            .map(|s| Target::Symbol(s.id))
            .chain(externals.iter().map(|e| Target::External(e.clone())))
            .collect(),
        VarKind::MetaOnly => g.symbols.iter().map(|s| Target::Symbol(s.id)).collect(),
        VarKind::Label => sym.unwrap().productions.iter().map(|p| Target::Production(p.id)).collect(),
        VarKind::Capture => {
            let mut out = Vec::new();
            for prod in &sym.unwrap().productions {
                for e in prod.body.descendants() {
                    out.push(Target::Expression(e.id));
                    let n = terms(e).len();
                    for start in 0..=n {
                        for len in (0..=n - start).filter(|l| *l != 1) {
                            out.push(Target::Run { parent: e.id, start, len });
                        }
                    }
                }
            }
            out
        }
    }
}

fn external_names(g: &Grammar) -> Vec<String> {
    let defined: HashSet<&str> = g.symbols.iter().map(|s| s.name.as_str()).collect();
    let mut out = BTreeSet::new();
    for s in &g.symbols {
        for p in &s.productions {
            for e in p.body.descendants() {
                if let ExprKind::SymbolRef(q) = &e.kind {
                    if !defined.contains(q.to_string().as_str()) {
                        out.insert(q.to_string());
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Every assignment of the query's variables that satisfies it, found by
/// enumerating all candidate assignments and checking each one.
pub fn oracle_matches(q: &Query, g: &Grammar) -> BTreeSet<Binding> {
    let mut kinds: BTreeMap<String, VarKind> = BTreeMap::new();
    if let Some(rule) = &q.rule {
        for prod in &rule.productions {
            collect_kinds(&prod.body, &mut kinds);
            if let Some(l) = &prod.label {
                kinds.insert(l.clone(), VarKind::Label);
            }
        }
        kinds.insert(rule.head.clone(), VarKind::Head);
    }
    for m in &q.meta {
        kinds.entry(m.var.clone()).or_insert(VarKind::MetaOnly);
    }
    let externals = external_names(g);
    let heads: Vec<Option<&Symbol>> = match &q.rule {
        Some(_) => g.symbols.iter().map(Some).collect(),
        None => vec![None],
    };
    let vars: Vec<(String, VarKind)> = kinds.into_iter().collect();
    let mut out = BTreeSet::new();
    for head in heads {
        let domains: Vec<Vec<Target>> = vars.iter().map(|(_, k)| candidates(g, head, *k, &externals)).collect();
        let mut idx = vec![0usize; vars.len()];
        if domains.iter().any(|d| d.is_empty()) {
            continue;
        }
        loop {
            let asg: BTreeMap<String, Target> = vars
                .iter()
                .zip(&idx)
                .zip(&domains)
                .map(|(((v, _), i), d)| (v.clone(), d[*i].clone()))
                .collect();
            let oracle = Oracle { g, asg };
            let rule_ok = match (&q.rule, head) {
                (Some(rule), Some(sym)) => {
                    oracle.productions_match(&rule.productions, sym, &mut vec![false; sym.productions.len()])
                }
                _ => true,
            };
            let meta_ok = rule_ok
                && q.meta.iter().all(|m| {
                    let t = &oracle.asg[&m.var];
                    let empty = gramweave::model::AnnotationSet::new();
                    let set = annotations_of(g, t).unwrap_or(&empty);
                    m.predicates.iter().all(|p| eval(p, set))
                });
            if meta_ok {
                out.insert(oracle.asg.into_iter().collect());
            }
            // advance the odometer
            let mut k = 0;
            loop {
                if k == idx.len() {
                    break;
                }
                idx[k] += 1;
                if idx[k] < domains[k].len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

// ---- left recursion ----

/// Symbols whose some production begins with a reference to the symbol
/// itself.
pub fn directly_left_recursive(g: &Grammar) -> BTreeSet<String> {
    g.symbols
        .iter()
        .filter(|s| {
            s.productions.iter().any(|p| {
                let first = match &p.body.kind {
                    ExprKind::Sequence(items) => &items[0],
                    _ => &p.body,
                };
                matches!(&first.kind, ExprKind::SymbolRef(q) if q.namespace.is_none() && q.name == s.name)
            })
        })
        .map(|s| s.name.clone())
        .collect()
}

// ---- bounded sentence enumeration ----

pub type Sentence = Vec<String>;
pub type Language = BTreeSet<Sentence>;

fn concat(a: &Language, b: &Language, max: usize) -> Language {
    let mut by_len: Vec<Vec<&Sentence>> = vec![Vec::new(); max + 1];
    for y in b {
        by_len[y.len()].push(y);
    }
    let mut out = Language::new();
    for x in a {
        for bucket in by_len.iter().take(max + 1 - x.len()) {
            for y in bucket {
                let mut s = x.clone();
                s.extend(y.iter().cloned());
                out.insert(s);
            }
        }
    }
    out
}

fn epsilon() -> Language {
    [Vec::new()].into_iter().collect()
}

/// Terminal label of a grammar leaf: literals by text, named tokens by name.
pub fn literal_label(text: &str) -> String {
    format!("'{text}'")
}

fn expr_language(e: &Expression, env: &HashMap<String, Language>, max: usize) -> Language {
    match &e.kind {
        ExprKind::Literal(t) => [vec![literal_label(t)]].into_iter().collect(),
        ExprKind::CharClass(r) => [vec![format!("{r:?}")]].into_iter().collect(),
        ExprKind::SymbolRef(q) => match env.get(&q.to_string()) {
            Some(l) => l.clone(),
            None => [vec![q.to_string()]].into_iter().collect(),
        },
        ExprKind::Placeholder(_) => Language::new(),
        ExprKind::Sequence(items) => items
            .iter()
            .fold(epsilon(), |acc, i| concat(&acc, &expr_language(i, env, max), max)),
        ExprKind::Alternative(opts) => opts.iter().flat_map(|o| expr_language(o, env, max)).collect(),
        ExprKind::Iteration(inner, k) => {
            let x = expr_language(inner, env, max);
            match k {
                Repeat::Optional => x.union(&epsilon()).cloned().collect(),
                Repeat::Star | Repeat::Plus => {
                    let mut acc = x.clone();
                    loop {
                        let next: Language = acc.union(&concat(&acc, &x, max)).cloned().collect();
                        if next.len() == acc.len() {
                            break;
                        }
                        acc = next;
                    }
                    if *k == Repeat::Star {
                        acc.insert(Vec::new());
                    }
                    acc
                }
            }
        }
    }
}

/// Sentences of length ≤ `max` derivable from each of the named
/// nonterminals. Other symbols are terminals.
pub fn ebnf_languages(g: &Grammar, nonterminals: &[String], max: usize) -> HashMap<String, Language> {
    let mut env: HashMap<String, Language> = nonterminals.iter().map(|n| (n.clone(), Language::new())).collect();
    loop {
        let mut changed = false;
        for name in nonterminals {
            let sym = g.symbol(name).unwrap();
            let lang: Language = sym
                .productions
                .iter()
                .flat_map(|p| expr_language(&p.body, &env, max))
                .collect();
            if lang.len() != env[name].len() {
                changed = true;
                env.insert(name.clone(), lang);
            }
        }
        if !changed {
            return env;
        }
    }
}

/// The same for lowered grammars; tokens map back to the labels
/// `ebnf_languages` uses.
pub fn bnf_languages(bnf: &BnfGrammar, max: usize) -> HashMap<String, Language> {
    let labels: HashMap<&str, String> = bnf
        .tokens
        .iter()
        .map(|t| {
            let label = match &t.lexeme {
                Lexeme::Literal(text) => literal_label(text),
                _ => t.name.clone(),
            };
            (t.name.as_str(), label)
        })
        .collect();
    let mut env: HashMap<String, Language> = bnf.rules.iter().map(|r| (r.head.clone(), Language::new())).collect();
    loop {
        let mut changed = false;
        for rule in &bnf.rules {
            let mut lang = Language::new();
            for alt in &rule.alternatives {
                let mut acc = epsilon();
                for term in &alt.terms {
                    let part = match term {
                        BnfTerm::Nonterminal(n) => env[n].clone(),
                        BnfTerm::Token(t) => [vec![labels.get(t.as_str()).cloned().unwrap_or_else(|| t.clone())]]
                            .into_iter()
                            .collect(),
                    };
                    acc = concat(&acc, &part, max);
                }
                lang.extend(acc);
            }
            if lang.len() != env[&rule.head].len() {
                changed = true;
                env.insert(rule.head.clone(), lang);
            }
        }
        if !changed {
            return env;
        }
    }
}

const LOWERING_NAMES: [&str; 6] = ["Expr", "Term", "Factor", "List", "Item", "Stmt"];
const LOWERING_TOKENS: [&str; 5] = ["a", "b", "+", "NUM", "ID"];

fn lowering_leaf(rng: &mut TestRng, names: &[String]) -> Expression {
    if rng.gen_bool(0.35) {
        expr(ExprKind::SymbolRef(QualifiedName::simple(names.choose(rng).unwrap().clone())))
    } else {
        let t = *LOWERING_TOKENS.choose(rng).unwrap();
        if t.chars().all(|c| c.is_ascii_uppercase()) {
            expr(ExprKind::SymbolRef(QualifiedName::simple(t)))
        } else {
            expr(ExprKind::Literal(t.into()))
        }
    }
}

fn lowering_expr(rng: &mut TestRng, names: &[String], depth: usize) -> Expression {
    if depth == 0 || rng.gen_bool(0.3) {
        return lowering_leaf(rng, names);
    }
    let n = rng.gen_range(2..=3);
    match rng.gen_range(0..4) {
        0 | 1 => expr(ExprKind::Sequence((0..n).map(|_| lowering_expr(rng, names, depth - 1)).collect())),
        2 => expr(ExprKind::Alternative((0..n).map(|_| lowering_expr(rng, names, depth - 1)).collect())),
        _ => {
            let repeat = *[Repeat::Star, Repeat::Plus, Repeat::Optional].choose(rng).unwrap();
            expr(ExprKind::Iteration(Box::new(lowering_expr(rng, names, depth - 1)), repeat))
        }
    }
}

/// EBNF grammars over the tokens 'a', 'b', '+', NUM, ID with at most six
/// syntactic symbols.
pub fn random_lowering_grammar(rng: &mut TestRng) -> Grammar {
    let count = rng.gen_range(1..=6);
    let names: Vec<String> = LOWERING_NAMES[..count].iter().map(|s| s.to_string()).collect();
    let symbols = names
        .iter()
        .map(|name| {
            let prods = (0..rng.gen_range(1..=2))
                .map(|_| Production::new(lowering_expr(rng, &names, 3)))
                .collect();
            Symbol::new(name.clone(), prods)
        })
        .collect();
    Grammar::new(symbols)
}
