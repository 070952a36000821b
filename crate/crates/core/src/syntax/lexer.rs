//! Tokenizer shared by the grammar, aspect, and template syntaxes.

use crate::model::{SeqToken, Value};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Int(i64),
    /// Double-quoted string.
    Str(String),
    /// Single-quoted lexical literal.
    Lex(String),
    /// `$name`
    Placeholder(String),
    /// A whole `{{ … }}` sequence value.
    Seq(Vec<SeqToken>),
    Arrow,
    OrOr,
    Bar,
    Semi,
    Star,
    Plus,
    Question,
    LParen,
    RParen,
    LBracket,
    RBracket,
    DashDash,
    Dot,
    DotDot,
    Eq,
    LBrace,
    RBrace,
    Colon,
    Bang,
    Lt,
    Gt,
    Comma,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(n) => format!("integer `{n}`"),
            Tok::Str(_) => "string".into(),
            Tok::Lex(s) => format!("literal '{s}'"),
            Tok::Placeholder(s) => format!("placeholder `${s}`"),
            Tok::Seq(_) => "`{{`".into(),
            Tok::Eof => "end of input".into(),
            other => format!("`{}`", other.punct_text()),
        }
    }

    fn punct_text(&self) -> &'static str {
        match self {
            Tok::Arrow => "->",
            Tok::OrOr => "||",
            Tok::Bar => "|",
            Tok::Semi => ";",
            Tok::Star => "*",
            Tok::Plus => "+",
            Tok::Question => "?",
            Tok::LParen => "(",
            Tok::RParen => ")",
            Tok::LBracket => "[",
            Tok::RBracket => "]",
            Tok::DashDash => "--",
            Tok::Dot => ".",
            Tok::DotDot => "..",
            Tok::Eq => "=",
            Tok::LBrace => "{",
            Tok::RBrace => "}",
            Tok::Colon => ":",
            Tok::Bang => "!",
            Tok::Lt => "<",
            Tok::Gt => ">",
            Tok::Comma => ",",
            _ => "?",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Token {
    pub tok: Tok,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LexError {
    pub message: String,
    pub start: usize,
    pub end: usize,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    let mut lx = Lexer { src, pos: 0 };
    let mut out = Vec::new();
    loop {
        lx.skip_trivia()?;
        let start = lx.pos;
        let Some(c) = lx.peek() else {
            out.push(Token { tok: Tok::Eof, start, end: start });
            return Ok(out);
        };
        let tok = lx.token(c)?;
        out.push(Token { tok, start, end: lx.pos });
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

impl<'a> Lexer<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn error<T>(&self, message: impl Into<String>, start: usize) -> Result<T, LexError> {
        Err(LexError {
            message: message.into(),
            start,
            end: self.pos.max(start),
        })
    }

    fn skip_trivia(&mut self) -> Result<(), LexError> {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('/') if self.rest().starts_with("//") => {
                    while let Some(c) = self.bump() {
                        if c == '\n' {
                            break;
                        }
                    }
                }
                Some('/') if self.rest().starts_with("/*") => {
                    let start = self.pos;
                    match self.rest()[2..].find("*/") {
                        Some(i) => self.pos += 2 + i + 2,
                        None => {
                            self.pos = self.src.len();
                            return self.error("unterminated block comment", start);
                        }
                    }
                }
                _ => return Ok(()),
            }
        }
    }

    fn token(&mut self, c: char) -> Result<Tok, LexError> {
        let start = self.pos;
        if is_ident_start(c) {
            return Ok(Tok::Ident(self.ident()));
        }
        if c.is_ascii_digit() || (c == '-' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
            return self.integer();
        }
        let two = |s: &str| self.rest().starts_with(s);
        let tok = if two("->") {
            Tok::Arrow
        } else if two("||") {
            Tok::OrOr
        } else if two("--") {
            Tok::DashDash
        } else if two("..") {
            Tok::DotDot
        } else if two("{{") {
            self.pos += 2;
            return self.sequence(start);
        } else {
            self.bump();
            return Ok(match c {
                '|' => Tok::Bar,
                ';' => Tok::Semi,
                '*' => Tok::Star,
                '+' => Tok::Plus,
                '?' => Tok::Question,
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '[' => Tok::LBracket,
                ']' => Tok::RBracket,
                '.' => Tok::Dot,
                '=' => Tok::Eq,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ':' => Tok::Colon,
                '!' => Tok::Bang,
                '<' => Tok::Lt,
                '>' => Tok::Gt,
                ',' => Tok::Comma,
                '"' => return self.string(start).map(Tok::Str),
                '\'' => return self.lex_literal(start).map(Tok::Lex),
                '$' => {
                    if !self.peek().is_some_and(is_ident_start) {
                        return self.error("expected a placeholder name after `$`", start);
                    }
                    return Ok(Tok::Placeholder(self.ident()));
                }
                other => return self.error(format!("unexpected character `{other}`"), start),
            });
        };
        self.pos += 2;
        Ok(tok)
    }

    fn ident(&mut self) -> String {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_continue) {
            self.bump();
        }
        self.src[start..self.pos].to_string()
    }

    fn integer(&mut self) -> Result<Tok, LexError> {
        let start = self.pos;
        if self.peek() == Some('-') {
            self.bump();
        }
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        match self.src[start..self.pos].parse::<i64>() {
            Ok(n) => Ok(Tok::Int(n)),
            Err(_) => self.error("integer literal out of range", start),
        }
    }

    /// Body of a double-quoted string; the opening quote is consumed.
    fn string(&mut self, start: usize) -> Result<String, LexError> {
        let mut text = String::new();
        loop {
            match self.bump() {
                None => return self.error("unterminated string", start),
                Some('"') => return Ok(text),
                Some('\\') => match self.bump() {
                    Some('"') => text.push('"'),
                    Some('\\') => text.push('\\'),
                    Some('n') => text.push('\n'),
                    Some('t') => text.push('\t'),
                    Some(other) => {
                        return self.error(format!("unknown escape `\\{other}` in string"), self.pos - other.len_utf8() - 1)
                    }
                    None => return self.error("unterminated string", start),
                },
                Some(c) => text.push(c),
            }
        }
    }

    /// Body of a single-quoted literal; the opening quote is consumed.
    fn lex_literal(&mut self, start: usize) -> Result<String, LexError> {
        let mut text = String::new();
        loop {
            match self.bump() {
                None => return self.error("unterminated literal", start),
                Some('\'') => {
                    if text.is_empty() {
                        return self.error("empty literal ''", start);
                    }
                    return Ok(text);
                }
                Some('\\') => match self.bump() {
                    Some('\'') => text.push('\''),
                    Some('\\') => text.push('\\'),
                    Some(other) => {
                        return self.error(format!("unknown escape `\\{other}` in literal"), self.pos - other.len_utf8() - 1)
                    }
                    None => return self.error("unterminated literal", start),
                },
                Some(c) => text.push(c),
            }
        }
    }

    /// Contents of `{{ … }}`; the opening `{{` is consumed. Nested `{{`/`}}`
    /// pairs are kept as punctuation and tracked for balance.
    fn sequence(&mut self, start: usize) -> Result<Tok, LexError> {
        let mut tokens = Vec::new();
        let mut depth = 0usize;
        loop {
            self.skip_trivia()?;
            let Some(c) = self.peek() else {
                return self.error("unterminated `{{` sequence", start);
            };
            let here = self.pos;
            if self.rest().starts_with("}}") {
                self.pos += 2;
                if depth == 0 {
                    return Ok(Tok::Seq(tokens));
                }
                depth -= 1;
                tokens.extend([SeqToken::Punct('}'), SeqToken::Punct('}')]);
            } else if self.rest().starts_with("{{") {
                self.pos += 2;
                depth += 1;
                tokens.extend([SeqToken::Punct('{'), SeqToken::Punct('{')]);
            } else if is_ident_start(c) {
                tokens.push(SeqToken::Value(Value::Ident(self.ident())));
            } else if c.is_ascii_digit() || (c == '-' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) {
                match self.integer()? {
                    Tok::Int(n) => tokens.push(SeqToken::Value(Value::Int(n))),
                    _ => unreachable!(),
                }
            } else if c == '"' {
                self.bump();
                let s = self.string(here)?;
                tokens.push(SeqToken::Value(Value::Str(s)));
            } else {
                self.bump();
                tokens.push(SeqToken::Punct(c));
            }
        }
    }
}
