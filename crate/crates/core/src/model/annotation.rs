//! Metadata attached to grammar nodes: attributes and their values.

use std::fmt;

/// The predefined kinds an attribute value can have.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ValueKind {
    Ident,
    Str,
    Int,
    Annotation,
    Sequence,
}

impl ValueKind {
    /// The name used for this kind in `attr : TYPE;` predicates.
    pub fn type_name(self) -> &'static str {
        match self {
            ValueKind::Ident => "ID",
            ValueKind::Str => "STRING",
            ValueKind::Int => "INT",
            ValueKind::Annotation => "Annotation",
            ValueKind::Sequence => "Sequence",
        }
    }

    pub fn from_type_name(name: &str) -> Option<ValueKind> {
        Some(match name {
            "ID" => ValueKind::Ident,
            "STRING" => ValueKind::Str,
            "INT" => ValueKind::Int,
            "Annotation" => ValueKind::Annotation,
            "Sequence" => ValueKind::Sequence,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Ident(String),
    Str(String),
    Int(i64),
    Annotation(AnnotationSet),
    Sequence(Vec<SeqToken>),
}

impl Value {
    pub fn kind(&self) -> ValueKind {
        match self {
            Value::Ident(_) => ValueKind::Ident,
            Value::Str(_) => ValueKind::Str,
            Value::Int(_) => ValueKind::Int,
            Value::Annotation(_) => ValueKind::Annotation,
            Value::Sequence(_) => ValueKind::Sequence,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }
}

/// One element of a `{{ … }}` sequence value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum SeqToken {
    Value(Value),
    Punct(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Attribute {
    pub name: String,
    /// `None` for flag attributes such as `leftRecursive;`.
    pub value: Option<Value>,
}

impl Attribute {
    pub fn flag(name: impl Into<String>) -> Self {
        Attribute {
            name: name.into(),
            value: None,
        }
    }

    pub fn new(name: impl Into<String>, value: Value) -> Self {
        Attribute {
            name: name.into(),
            value: Some(value),
        }
    }
}

/// Ordered attributes with unique names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AnnotationSet {
    attributes: Vec<Attribute>,
}

impl AnnotationSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn len(&self) -> usize {
        self.attributes.len()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Attribute> {
        self.attributes.iter()
    }

    pub fn get(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.get(name).is_some()
    }

    /// Inserts `attribute`, replacing the value of an existing attribute with
    /// the same name in place. Returns the replaced attribute.
    pub fn set(&mut self, attribute: Attribute) -> Option<Attribute> {
        match self.attributes.iter_mut().find(|a| a.name == attribute.name) {
            Some(slot) => Some(std::mem::replace(slot, attribute)),
            None => {
                self.attributes.push(attribute);
                None
            }
        }
    }
}

impl<'a> IntoIterator for &'a AnnotationSet {
    type Item = &'a Attribute;
    type IntoIter = std::slice::Iter<'a, Attribute>;

    fn into_iter(self) -> Self::IntoIter {
        self.attributes.iter()
    }
}

impl FromIterator<Attribute> for AnnotationSet {
    fn from_iter<I: IntoIterator<Item = Attribute>>(iter: I) -> Self {
        let mut set = AnnotationSet::new();
        for attr in iter {
            set.set(attr);
        }
        set
    }
}

pub(crate) fn quote_string(text: &str) -> String {
    let mut out = String::with_capacity(text.len() + 2);
    out.push('"');
    for c in text.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Ident(name) => f.write_str(name),
            Value::Str(text) => f.write_str(&quote_string(text)),
            Value::Int(n) => write!(f, "{n}"),
            Value::Annotation(set) => write!(f, "{set}"),
            Value::Sequence(tokens) => {
                f.write_str("{{")?;
                for token in tokens {
                    match token {
                        SeqToken::Value(v) => write!(f, " {v}")?,
                        SeqToken::Punct(c) => write!(f, " {c}")?,
                    }
                }
                f.write_str(" }}")
            }
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.value {
            Some(v) => write!(f, "{} = {};", self.name, v),
            None => write!(f, "{};", self.name),
        }
    }
}

/// Single-line form: `{ a; b = c; }`.
impl fmt::Display for AnnotationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for attr in &self.attributes {
            write!(f, " {attr}")?;
        }
        f.write_str(" }")
    }
}
