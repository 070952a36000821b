use std::fmt::Write;

use crate::model::{CharRange, ExprKind, Expression, Grammar, Production};
use crate::template::{Argument, ImportDecl, RuleHead, Template};

#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Top,
    InAlternative,
    InSequence,
    InPostfix,
}

/// Canonical text of a grammar. Annotations are not printed. A grammar with
/// instantiated namespaces is printed in its flattened form.
pub fn print_grammar(grammar: &Grammar) -> String {
    if !grammar.namespaces.is_empty() {
        return print_grammar(&grammar.flatten());
    }
    let mut blocks: Vec<String> = Vec::new();
    blocks.extend(grammar.templates.iter().map(print_template));
    if !grammar.imports.is_empty() {
        blocks.push(grammar.imports.iter().map(print_import).collect());
    }
    blocks.extend(
        grammar
            .symbols
            .iter()
            .map(|s| print_rule(&s.name, &s.productions, "")),
    );
    blocks.join("\n")
}

fn print_rule(head: &str, productions: &[Production], indent: &str) -> String {
    if let [only] = productions {
        return format!("{indent}{head} -> {} ;\n", print_expression(&only.body));
    }
    let mut out = format!("{indent}{head}\n");
    for (i, p) in productions.iter().enumerate() {
        let op = if i == 0 { "->" } else { "||" };
        let _ = writeln!(out, "{indent}    {op} {}", print_expression(&p.body));
    }
    let _ = writeln!(out, "{indent}    ;");
    out
}

fn print_template(t: &Template) -> String {
    let params: Vec<String> = t
        .params
        .iter()
        .map(|p| format!("{}{} ${}", p.kind.keyword(), if p.many { "*" } else { "" }, p.name))
        .collect();
    let mut out = format!("{} {}<{}> {{\n", t.kind.keyword(), t.name, params.join(", "));
    for rule in &t.rules {
        let head = match &rule.head {
            RuleHead::Name(n) => n.clone(),
            RuleHead::Placeholder(p) => format!("${p}"),
        };
        out.push_str(&print_rule(&head, &rule.productions, "    "));
    }
    out.push_str("}\n");
    out
}

fn print_import(i: &ImportDecl) -> String {
    let args: Vec<String> = i
        .args
        .iter()
        .map(|a| match a {
            Argument::Empty => "empty".to_string(),
            Argument::Productions(list) => list.iter().map(print_expression).collect::<Vec<_>>().join(" || "),
        })
        .collect();
    match &i.alias {
        Some(alias) => format!("import {alias} = {}<{}>;\n", i.template, args.join(", ")),
        None => format!("import {}<{}>;\n", i.template, args.join(", ")),
    }
}

pub fn print_expression(e: &Expression) -> String {
    let mut out = String::new();
    write_expr(&mut out, e, Ctx::Top);
    out
}

fn write_expr(out: &mut String, e: &Expression, ctx: Ctx) {
    match &e.kind {
        ExprKind::Alternative(options) => {
            let paren = ctx != Ctx::Top;
            if paren {
                out.push('(');
            }
            for (i, o) in options.iter().enumerate() {
                if i > 0 {
                    out.push_str(" | ");
                }
                write_expr(out, o, Ctx::InAlternative);
            }
            if paren {
                out.push(')');
            }
        }
        ExprKind::Sequence(items) => {
            let paren = matches!(ctx, Ctx::InSequence | Ctx::InPostfix);
            if paren {
                out.push('(');
            }
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                write_expr(out, item, Ctx::InSequence);
            }
            if paren {
                out.push(')');
            }
        }
        ExprKind::Iteration(inner, repeat) => {
            let paren = ctx == Ctx::InPostfix;
            if paren {
                out.push('(');
            }
            write_expr(out, inner, Ctx::InPostfix);
            out.push(repeat.symbol());
            if paren {
                out.push(')');
            }
        }
        ExprKind::SymbolRef(name) => {
            let _ = write!(out, "{name}");
        }
        ExprKind::Literal(text) => quote_lex(out, text),
        ExprKind::CharClass(ranges) => {
            out.push('[');
            for (i, CharRange { lo, hi }) in ranges.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                quote_lex(out, &lo.to_string());
                if lo != hi {
                    out.push_str("--");
                    quote_lex(out, &hi.to_string());
                }
            }
            out.push(']');
        }
        ExprKind::Placeholder(name) => {
            let _ = write!(out, "${name}");
        }
    }
}

fn quote_lex(out: &mut String, text: &str) {
    out.push('\'');
    for c in text.chars() {
        if c == '\'' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('\'');
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::syntax::{parse_grammar, parse_templates};

    fn roundtrip(src: &str) -> String {
        let g = parse_grammar(src, "g").value.unwrap();
        let text = print_grammar(&g);
        let again = parse_grammar(&text, "g").value.unwrap_or_else(|| panic!("reparse failed:\n{text}"));
        assert_eq!(again, g, "{text}");
        text
    }

    #[test]
    fn single_and_multi_production_layout() {
        assert_eq!(roundtrip("INT -> ['0'--'9']+ ;"), "INT -> ['0'--'9']+ ;\n");
        assert_eq!(
            roundtrip("Factor -> Literal || ID || '(' Expression ')' ;"),
            "Factor\n    -> Literal\n    || ID\n    || '(' Expression ')'\n    ;\n"
        );
        assert_eq!(print_grammar(&Grammar::default()), "");
    }

    #[test]
    fn parenthesization() {
        assert_eq!(
            roundtrip("R -> INT ('.' INT)? (('e' | 'E') ('+' | '-')? INT)? ;"),
            "R -> INT ('.' INT)? (('e' | 'E') ('+' | '-')? INT)? ;\n"
        );
        roundtrip("A -> (b*)+ | (c d | e) ;");
        roundtrip("A -> ['a'--'z' '_' '\\''] '\\\\' x.y ;");
    }

    #[test]
    fn templates_and_imports_round_trip() {
        let src = "Symbol t<ID $n, Production* $p> {\n    $n\n        -> a\n        || $p\n        ;\n}\nimport q = t<Foo, empty>;\nimport t<Bar, x || y z>;\nS -> q.Foo ;";
        let expected = "Symbol t<ID $n, Production* $p> {\n    $n\n        -> a\n        || $p\n        ;\n}\n\nimport q = t<Foo, empty>;\nimport t<Bar, x || y z>;\n\nS -> q.Foo ;\n";
        assert_eq!(roundtrip(src), expected);
        let lib = parse_templates(src.split("import").next().unwrap(), "t").value.unwrap();
        let reparsed = parse_templates(&print_template(lib.get("t").unwrap()), "t").value.unwrap();
        assert_eq!(reparsed.get("t"), lib.get("t"));
    }
}
