//! Tokenizer shared by the `.arc`, `.aut` and `.scn` readers.

use crate::diag::Pos;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Str(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Semi,
    Colon,
    Comma,
    Dot,
    Arrow,
    Assign,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Str(_) => "string literal".to_string(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Assign => "`=`".into(),
            Tok::Eq => "`==`".into(),
            Tok::Ne => "`!=`".into(),
            Tok::Lt => "`<`".into(),
            Tok::Le => "`<=`".into(),
            Tok::Gt => "`>`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

/// Tokenizes `src`. `first_line` lets line-oriented readers keep file
/// positions when they lex one line at a time.
pub fn tokenize(src: &str, first_line: u32) -> Result<Vec<Token>, LexError> {
    let mut out = Vec::new();
    let mut chars = src.char_indices().peekable();
    let mut line = first_line;
    let mut line_start = 0usize;

    let col_of = |idx: usize, line_start: usize, src: &str| -> u32 { src[line_start..idx].chars().count() as u32 + 1 };

    while let Some(&(i, c)) = chars.peek() {
        let pos = Pos::new(line, col_of(i, line_start, src));
        if c == '\n' {
            chars.next();
            line += 1;
            line_start = i + 1;
            continue;
        }
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        if c == '/' {
            chars.next();
            match chars.peek() {
                Some(&(_, '/')) => {
                    while let Some(&(_, c)) = chars.peek() {
                        if c == '\n' {
                            break;
                        }
                        chars.next();
                    }
                    continue;
                }
                _ => {
                    return Err(LexError { pos, message: "unexpected character `/`".into() });
                }
            }
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&(_, c)) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(c);
                    chars.next();
                } else {
                    break;
                }
            }
            out.push(Token { tok: Tok::Ident(s), pos });
            continue;
        }
        if c.is_ascii_digit() || c == '-' {
            chars.next();
            if c == '-' {
                match chars.peek() {
                    Some(&(_, '>')) => {
                        chars.next();
                        out.push(Token { tok: Tok::Arrow, pos });
                        continue;
                    }
                    Some(&(_, d)) if d.is_ascii_digit() => {}
                    _ => return Err(LexError { pos, message: "unexpected character `-`".into() }),
                }
            }
            let mut s = String::from(c);
            while let Some(&(_, d)) = chars.peek() {
                if d.is_ascii_digit() {
                    s.push(d);
                    chars.next();
                } else {
                    break;
                }
            }
            let v = s.parse::<i64>().map_err(|_| LexError { pos, message: format!("integer `{s}` out of range") })?;
            out.push(Token { tok: Tok::Int(v), pos });
            continue;
        }
        if c == '"' {
            chars.next();
            let mut s = String::new();
            loop {
                match chars.next() {
                    None => return Err(LexError { pos, message: "unterminated string literal".into() }),
                    Some((_, '"')) => break,
                    Some((_, '\\')) => match chars.next() {
                        Some((_, 'n')) => s.push('\n'),
                        Some((_, 't')) => s.push('\t'),
                        Some((_, '"')) => s.push('"'),
                        Some((_, '\\')) => s.push('\\'),
                        _ => return Err(LexError { pos, message: "invalid escape in string".into() }),
                    },
                    Some((j, '\n')) => {
                        s.push('\n');
                        line += 1;
                        line_start = j + 1;
                    }
                    Some((_, ch)) => s.push(ch),
                }
            }
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        chars.next();
        let next = chars.peek().map(|&(_, n)| n);
        let tok = match (c, next) {
            ('{', _) => Tok::LBrace,
            ('}', _) => Tok::RBrace,
            ('(', _) => Tok::LParen,
            (')', _) => Tok::RParen,
            (';', _) => Tok::Semi,
            (':', _) => Tok::Colon,
            (',', _) => Tok::Comma,
            ('.', _) => Tok::Dot,
            ('=', Some('=')) => {
                chars.next();
                Tok::Eq
            }
            ('=', _) => Tok::Assign,
            ('!', Some('=')) => {
                chars.next();
                Tok::Ne
            }
            ('<', Some('=')) => {
                chars.next();
                Tok::Le
            }
            ('<', _) => Tok::Lt,
            ('>', Some('=')) => {
                chars.next();
                Tok::Ge
            }
            ('>', _) => Tok::Gt,
            _ => return Err(LexError { pos, message: format!("unexpected character `{c}`") }),
        };
        out.push(Token { tok, pos });
    }
    let eof_pos = Pos::new(line, col_of(src.len(), line_start, src));
    out.push(Token { tok: Tok::Eof, pos: eof_pos });
    Ok(out)
}

/// Escapes a string so that [`tokenize`] reads it back unchanged.
pub fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
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

/// A cursor over a token list with the small set of helpers the readers need.
pub struct Cursor<'a> {
    toks: &'a [Token],
    at: usize,
}

impl<'a> Cursor<'a> {
    pub fn new(toks: &'a [Token]) -> Self {
        Self { toks, at: 0 }
    }

    pub fn peek(&self) -> &'a Token {
        &self.toks[self.at.min(self.toks.len() - 1)]
    }

    pub fn peek_at(&self, n: usize) -> &'a Token {
        &self.toks[(self.at + n).min(self.toks.len() - 1)]
    }

    pub fn bump(&mut self) -> &'a Token {
        let t = self.peek();
        if self.at < self.toks.len() - 1 {
            self.at += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        self.peek().tok == Tok::Eof
    }

    pub fn eat(&mut self, tok: &Tok) -> bool {
        if &self.peek().tok == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(&self.peek().tok, Tok::Ident(s) if s == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(s) if s == kw)
    }

    pub fn expect(&mut self, tok: &Tok, what: &str) -> Result<Pos, LexError> {
        let t = self.peek();
        if &t.tok == tok {
            self.bump();
            Ok(t.pos)
        } else {
            Err(LexError { pos: t.pos, message: format!("expected {what}, found {}", t.tok.describe()) })
        }
    }

    pub fn expect_ident(&mut self, what: &str) -> Result<(String, Pos), LexError> {
        let t = self.peek();
        match &t.tok {
            Tok::Ident(s) => {
                self.bump();
                Ok((s.clone(), t.pos))
            }
            other => Err(LexError { pos: t.pos, message: format!("expected {what}, found {}", other.describe()) }),
        }
    }

    pub fn expect_keyword(&mut self, kw: &str) -> Result<Pos, LexError> {
        let t = self.peek();
        if self.eat_keyword(kw) {
            Ok(t.pos)
        } else {
            Err(LexError { pos: t.pos, message: format!("expected `{kw}`, found {}", t.tok.describe()) })
        }
    }
}
