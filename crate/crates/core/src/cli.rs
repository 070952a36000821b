//! Command-line driver: parse, resolve imports, weave aspects, then run one
//! command.
//!
//! Exit status: 0 on success, 1 if any error diagnostic was reported,
//! 2 on usage or I/O failure.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::diagnostic::{has_errors, Diagnostic};
use crate::model::Grammar;
use crate::query::{match_query, Target};
use crate::syntax::{parse_aspect, parse_grammar, parse_query_file, parse_templates, print_grammar};
use crate::template::{resolve_imports, TemplateLibrary};
use crate::weave::apply_aspect;
use crate::yacc::export_yacc;

#[derive(Debug, Parser)]
#[command(name = "gramweave", version, about = "Grammar toolkit with aspect-woven metadata and Yacc export")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Inputs {
    /// Grammar file
    pub grammar: PathBuf,
    /// Aspect file; repeatable, applied in the order given
    #[arg(long = "aspect", value_name = "FILE")]
    pub aspects: Vec<PathBuf>,
    /// Template library file; repeatable
    #[arg(long = "templates", value_name = "FILE")]
    pub templates: Vec<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse, resolve, and weave; report diagnostics only
    Check(Inputs),
    /// Print the bindings of each query in a query file
    Query {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        query_file: PathBuf,
    },
    /// Print the woven grammar followed by its annotations
    Weave {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print the grammar with all imports expanded
    Instantiate {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Write a Yacc input file
    ExportYacc {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print the canonical form of a grammar file
    Format {
        grammar: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Error diagnostics were collected.
    Reported,
    Usage(String),
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))
}

fn check(diags: &[Diagnostic]) -> Result<(), Failure> {
    if has_errors(diags) {
        Err(Failure::Reported)
    } else {
        Ok(())
    }
}

/// Parses the grammar, expands imports, flattens namespaces, and applies
/// the aspects in order.
fn load(inputs: &Inputs, diags: &mut Vec<Diagnostic>) -> Result<Grammar, Failure> {
    let name = inputs.grammar.display().to_string();
    let parsed = parse_grammar(&read(&inputs.grammar)?, &name);
    diags.extend(parsed.diagnostics);
    let grammar = parsed.value.ok_or(Failure::Reported)?;

    let mut library = TemplateLibrary::new();
    for path in &inputs.templates {
        let parsed = parse_templates(&read(path)?, &path.display().to_string());
        diags.extend(parsed.diagnostics);
        if let Some(lib) = parsed.value {
            diags.extend(library.extend(lib));
        }
    }
    let mut aspects = Vec::new();
    for path in &inputs.aspects {
        let parsed = parse_aspect(&read(path)?, &path.display().to_string());
        diags.extend(parsed.diagnostics);
        aspects.extend(parsed.value);
    }
    check(diags)?;

    let resolved = resolve_imports(grammar, &library);
    diags.extend(resolved.diagnostics);
    let mut grammar = resolved.value.ok_or(Failure::Reported)?.flatten();
    for aspect in &aspects {
        let (woven, d) = apply_aspect(aspect, &grammar);
        diags.extend(d);
        grammar = woven;
    }
    Ok(grammar)
}

fn target_path(grammar: &Grammar, target: &Target) -> String {
    let path = |id| {
        grammar
            .path_of(id)
            .map(|p| p.to_string())
            .unwrap_or_else(|| id.to_string())
    };
    match target {
        Target::Symbol(id) | Target::Production(id) | Target::Expression(id) => path(*id),
        Target::Run { parent, start, len } => format!("{}[{start}..{}]", path(*parent), start + len),
        Target::External(name) => name.clone(),
    }
}

fn query_output(inputs: &Inputs, query_file: &Path, diags: &mut Vec<Diagnostic>) -> Result<String, Failure> {
    let grammar = load(inputs, diags)?;
    let parsed = parse_query_file(&read(query_file)?, &query_file.display().to_string());
    diags.extend(parsed.diagnostics);
    let queries = parsed.value.ok_or(Failure::Reported)?;
    let mut blocks = Vec::new();
    for query in &queries {
        let vars = query.variables();
        for binding in match_query(query, &grammar) {
            let mut block = String::new();
            for var in &vars {
                if let Some(t) = binding.get(var) {
                    block.push_str(&format!("{var} = {}\n", target_path(&grammar, t)));
                }
            }
            blocks.push(block);
        }
    }
    Ok(blocks.join("\n"))
}

fn weave_output(grammar: &Grammar) -> String {
    let mut out = print_grammar(grammar);
    if !out.is_empty() {
        out.push('\n');
    }
    out.push_str("@annotations\n");
    for (path, node) in grammar.walk_with_paths() {
        let set = node.annotations();
        if !set.is_empty() {
            out.push_str(&format!("{path} {set}\n"));
        }
    }
    out
}

fn execute(command: &Command, diags: &mut Vec<Diagnostic>) -> Result<(String, Option<PathBuf>), Failure> {
    Ok(match command {
        Command::Check(inputs) => {
            load(inputs, diags)?;
            (String::new(), None)
        }
        Command::Query { inputs, query_file } => (query_output(inputs, query_file, diags)?, None),
        Command::Weave { inputs, out } => (weave_output(&load(inputs, diags)?), out.clone()),
        Command::Instantiate { inputs, out } => (print_grammar(&load(inputs, diags)?), out.clone()),
        Command::ExportYacc { inputs, out } => {
            let grammar = load(inputs, diags)?;
            check(diags)?;
            let text = export_yacc(&grammar).map_err(|d| {
                diags.extend(d);
                Failure::Reported
            })?;
            (text, out.clone())
        }
        Command::Format { grammar, out } => {
            let parsed = parse_grammar(&read(grammar)?, &grammar.display().to_string());
            diags.extend(parsed.diagnostics);
            (print_grammar(&parsed.value.ok_or(Failure::Reported)?), out.clone())
        }
    })
}

/// Runs one invocation. `args` includes the program name.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };

    let mut diags = Vec::new();
    let result = execute(&cli.command, &mut diags).and_then(|output| {
        check(&diags)?;
        Ok(output)
    });
    for d in &diags {
        let _ = writeln!(stderr, "{d}");
    }
    match result {
        Ok((text, None)) => {
            let _ = write!(stdout, "{text}");
            0
        }
        Ok((text, Some(path))) => match std::fs::write(&path, text) {
            Ok(()) => 0,
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                2
            }
        },
        Err(Failure::Reported) => 1,
        Err(Failure::Usage(message)) => {
            let _ = writeln!(stderr, "error: {message}");
            2
        }
    }
}
