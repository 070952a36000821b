//! Aspects: query-driven metadata attachment and constraint checking.

use crate::diagnostic::{Diagnostic, Severity, SourceSpan};
use crate::model::{Attribute, Grammar};
use crate::query::{match_query, Binding, Query, Target};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConstraintTarget {
    Var(String),
    /// Fires once when the query matches nothing in the whole grammar.
    NoMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRule {
    pub severity: Severity,
    pub target: ConstraintTarget,
    pub message: String,
    pub span: SourceSpan,
}

/// `Var { attr; attr = value; };` inside a rule body.
#[derive(Debug, Clone, PartialEq)]
pub struct Attachment {
    pub var: String,
    pub attributes: Vec<Attribute>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AspectRule {
    pub query: Query,
    pub attachments: Vec<Attachment>,
    pub constraints: Vec<ConstraintRule>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aspect {
    pub name: String,
    pub rules: Vec<AspectRule>,
}

/// Applies the rules of `aspect` in order. Each rule's query sees the
/// annotations attached by earlier rules; its constraints are evaluated
/// right after its own attachments.
///
/// Re-attaching an attribute with a different value replaces it and emits a
/// warning.
pub fn apply_aspect(aspect: &Aspect, grammar: &Grammar) -> (Grammar, Vec<Diagnostic>) {
    let mut g = grammar.clone();
    let mut diags = Vec::new();
    for rule in &aspect.rules {
        if !rule.attachments.is_empty() {
            let bindings = match_query(&rule.query, &g);
            for binding in &bindings {
                for attachment in &rule.attachments {
                    attach_all(&mut g, binding, attachment, &mut diags);
                }
            }
        }
        if !rule.constraints.is_empty() {
            diags.extend(check_rule(rule, &g));
        }
    }
    (g, diags)
}

fn attach_all(g: &mut Grammar, binding: &Binding, attachment: &Attachment, diags: &mut Vec<Diagnostic>) {
    let Some(target) = binding.get(&attachment.var) else {
        return;
    };
    let Some(id) = target.node() else {
        diags.push(Diagnostic::warning(
            format!(
                "`{}` is bound to {}, which cannot carry attributes",
                attachment.var,
                describe_unattachable(target)
            ),
            attachment.span.clone(),
        ));
        return;
    };
    for attr in &attachment.attributes {
        match g.attach(id, attr.clone()) {
            Ok(Some(old)) if old.value != attr.value => {
                let subject = g.path_of(id).map(|p| p.to_string());
                let span = g.node(id).map(|n| n.span().clone()).unwrap_or_else(|| attachment.span.clone());
                diags.push(
                    Diagnostic::warning(
                        format!(
                            "attribute `{}` on {} replaced ({} -> {})",
                            attr.name,
                            subject.as_deref().unwrap_or("node"),
                            render(&old),
                            render(attr)
                        ),
                        span,
                    )
                    .with_node(id, subject),
                );
            }
            Ok(_) => {}
            Err(e) => diags.push(Diagnostic::error(e.to_string(), attachment.span.clone())),
        }
    }
}

fn describe_unattachable(target: &Target) -> String {
    match target {
        Target::External(name) => format!("undefined symbol `{name}`"),
        Target::Run { len: 0, .. } => "an empty run of terms".to_string(),
        _ => "a run of several terms".to_string(),
    }
}

fn render(attr: &Attribute) -> String {
    match &attr.value {
        Some(v) => v.to_string(),
        None => "flag".to_string(),
    }
}

/// Evaluates only the constraint rules of `aspect` against `grammar`.
pub fn check_constraints(aspect: &Aspect, grammar: &Grammar) -> Vec<Diagnostic> {
    aspect
        .rules
        .iter()
        .filter(|r| !r.constraints.is_empty())
        .flat_map(|r| check_rule(r, grammar))
        .collect()
}

fn check_rule(rule: &AspectRule, grammar: &Grammar) -> Vec<Diagnostic> {
    let bindings = match_query(&rule.query, grammar);
    let mut diags = Vec::new();
    for constraint in &rule.constraints {
        let make = |span: SourceSpan| match constraint.severity {
            Severity::Error => Diagnostic::error(constraint.message.clone(), span),
            Severity::Warning => Diagnostic::warning(constraint.message.clone(), span),
        };
        match &constraint.target {
            ConstraintTarget::NoMatch => {
                if bindings.is_empty() {
                    diags.push(make(rule.query.span.clone()));
                }
            }
            ConstraintTarget::Var(var) => {
                for binding in &bindings {
                    let Some(target) = binding.get(var) else { continue };
                    let node = target.node().and_then(|id| grammar.node(id));
                    let d = match node {
                        Some(n) => make(n.span().clone())
                            .with_node(n.id(), grammar.path_of(n.id()).map(|p| p.to_string())),
                        None => {
                            let mut d = make(rule.query.span.clone());
                            if let Target::External(name) = target {
                                d.subject = Some(name.clone());
                            }
                            d
                        }
                    };
                    diags.push(d);
                }
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_aspect, parse_grammar};

    fn grammar(src: &str) -> Grammar {
        parse_grammar(src, "g.grammar").value.unwrap()
    }

    fn aspect(src: &str) -> Aspect {
        let r = parse_aspect(src, "a.aspect");
        r.value.unwrap_or_else(|| panic!("{:?}", r.diagnostics))
    }

    const LEFT_REC: &str = "Rec -> Rec ..; { Rec { leftRecursive; }; }";

    #[test]
    fn marks_left_recursive_symbols() {
        let g = grammar("Expr -> Expr '+' Term || Term ; Term -> ID ;");
        let (out, diags) = apply_aspect(&aspect(LEFT_REC), &g);
        assert!(diags.is_empty());
        assert!(out.symbol("Expr").unwrap().annotations.contains("leftRecursive"));
        assert!(out.symbol("Term").unwrap().annotations.is_empty());
    }

    #[test]
    fn empty_aspect_is_identity() {
        let g = grammar("A -> b ;");
        let (out, diags) = apply_aspect(&Aspect { name: "e".into(), rules: vec![] }, &g);
        assert_eq!(out, g);
        assert!(diags.is_empty());
    }

    #[test]
    fn later_rules_see_earlier_annotations() {
        let g = grammar("E -> E x || y ; F -> z ;");
        let a = aspect("Rec -> Rec ..; { Rec { leftRecursive; }; } N { leftRecursive; } { N { seen; }; }");
        let (out, _) = apply_aspect(&a, &g);
        assert!(out.symbol("E").unwrap().annotations.contains("seen"));
        assert!(!out.symbol("F").unwrap().annotations.contains("seen"));
    }

    #[test]
    fn replacement_with_different_value_warns() {
        let g = grammar("E -> E x ;");
        let a = aspect("R -> R ..; { R { k = 1; }; } R -> R ..; { R { k = 2; }; }");
        let (out, diags) = apply_aspect(&a, &g);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
        let k = out.symbol("E").unwrap().annotations.get("k").unwrap();
        assert_eq!(k.value, Some(crate::model::Value::Int(2)));
    }

    #[test]
    fn constraint_per_match_and_nomatch() {
        let a = aspect(
            "N { leftAssoc; rightAssoc; }; { error on N : \"both\"; }
             E -> E .. ; { warning on nomatch : \"no left recursion found\"; }",
        );
        let mut g = grammar("Sum -> Sum '+' P || P ; P -> x ;");
        let sum = g.symbols[0].id;
        g.attach(sum, Attribute::flag("leftAssoc")).unwrap();
        assert!(check_constraints(&a, &g).is_empty());
        g.attach(sum, Attribute::flag("rightAssoc")).unwrap();
        let diags = check_constraints(&a, &g);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].message, "both");
        assert_eq!(diags[0].subject.as_deref(), Some("Sum"));
        assert_eq!(diags[0].node, Some(sum));

        let plain = grammar("P -> x ;");
        let diags = check_constraints(&a, &plain);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].severity, Severity::Warning);
    }

    #[test]
    fn constraints_run_after_attachments_of_the_same_rule() {
        let a = aspect("R -> R ..; { R { leftRecursive; }; error on R : \"left recursion\"; }");
        let g = grammar("E -> E x || y ;");
        let (_, diags) = apply_aspect(&a, &g);
        assert_eq!(diags.len(), 1);
    }

    #[test]
    fn attaching_to_external_symbol_warns() {
        let a = aspect("S -> X ; { X { token; }; }");
        let g = grammar("S -> ID ;");
        let (out, diags) = apply_aspect(&a, &g);
        assert_eq!(out, g);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("undefined symbol `ID`"));
    }
}
