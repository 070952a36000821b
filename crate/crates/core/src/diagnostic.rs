//! Source locations and diagnostics shared by every stage of the pipeline.

use std::fmt;
use std::sync::Arc;

use crate::model::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Severity::Error => f.write_str("error"),
            Severity::Warning => f.write_str("warning"),
        }
    }
}

/// A region of an input file. Offsets are byte offsets; `line` and `column`
/// are 1-based and describe the start of the region.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub file: Arc<str>,
    pub start: usize,
    pub end: usize,
    pub line: u32,
    pub column: u32,
}

impl SourceSpan {
    /// Span used for nodes that do not come from any input text.
    pub fn synthetic() -> Self {
        SourceSpan {
            file: Arc::from("<generated>"),
            start: 0,
            end: 0,
            line: 1,
            column: 1,
        }
    }

    /// The smallest span covering both `self` and `other` (same file assumed).
    pub fn to(&self, other: &SourceSpan) -> SourceSpan {
        if other.end <= self.start {
            return self.clone();
        }
        SourceSpan {
            end: other.end.max(self.end),
            ..self.clone()
        }
    }
}

impl Default for SourceSpan {
    fn default() -> Self {
        SourceSpan::synthetic()
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.file, self.line, self.column)
    }
}

/// Maps byte offsets of one file to line/column positions.
#[derive(Debug, Clone)]
pub struct LineIndex {
    file: Arc<str>,
    text: Arc<str>,
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(file: &str, text: &str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex {
            file: Arc::from(file),
            text: Arc::from(text),
            line_starts,
        }
    }

    pub fn span(&self, start: usize, end: usize) -> SourceSpan {
        let start = start.min(self.text.len());
        let end = end.clamp(start, self.text.len());
        let line = match self.line_starts.binary_search(&start) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let line_start = self.line_starts[line];
        let column = self.text[line_start..start].chars().count() + 1;
        SourceSpan {
            file: self.file.clone(),
            start,
            end,
            line: line as u32 + 1,
            column: column as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
    pub span: SourceSpan,
    /// The grammar node the diagnostic is about, if any.
    pub node: Option<NodeId>,
    /// Printable path of `node` (e.g. `Sum` or `Sum/production[1]`).
    pub subject: Option<String>,
}

impl Diagnostic {
    pub fn error(message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic {
            severity: Severity::Error,
            message: message.into(),
            span,
            node: None,
            subject: None,
        }
    }

    pub fn warning(message: impl Into<String>, span: SourceSpan) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            ..Diagnostic::error(message, span)
        }
    }

    pub fn with_node(mut self, node: NodeId, subject: Option<String>) -> Self {
        self.node = Some(node);
        self.subject = subject;
        self
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}: {}", self.span, self.severity, self.message)
    }
}

pub fn has_errors(diagnostics: &[Diagnostic]) -> bool {
    diagnostics.iter().any(Diagnostic::is_error)
}
