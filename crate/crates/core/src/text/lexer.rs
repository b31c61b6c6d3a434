use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(String),
    Str(String),
    Directive(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Colon,
    Dot,
    Pipe,
    Star,
    Arrow,
    Choice,
    Ge,
    Eof,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Number(s) => format!("number `{s}`"),
            Tok::Str(s) => format!("string \"{s}\""),
            Tok::Directive(s) => format!("directive `#{s}`"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Pipe => "`|`".into(),
            Tok::Star => "`*`".into(),
            Tok::Arrow => "`<-`".into(),
            Tok::Choice => "`<~`".into(),
            Tok::Ge => "`>=`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

fn ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '^'
}

pub(crate) fn lex(src: &str) -> Result<Vec<Spanned>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |line, col, msg: String| Error::Syntax { line, col, msg };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let step = |n: usize, i: &mut usize, col: &mut usize| {
            *i += n;
            *col += n;
        };
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            step(1, &mut i, &mut col);
            continue;
        }
        if c == '%' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let next = chars.get(i + 1).copied();
        let tok = if ident_start(c) {
            let s: String = chars[i..].iter().take_while(|c| ident_char(**c)).collect();
            step(s.chars().count(), &mut i, &mut col);
            Tok::Ident(s)
        } else if c.is_ascii_digit() || (c == '-' && next.is_some_and(|d| d.is_ascii_digit() || d == '.')) || (c == '.' && next.is_some_and(|d| d.is_ascii_digit())) {
            let mut s = String::new();
            let mut j = i;
            if chars[j] == '-' {
                s.push('-');
                j += 1;
            }
            while j < chars.len() && chars[j].is_ascii_digit() {
                s.push(chars[j]);
                j += 1;
            }
            if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                s.push('.');
                j += 1;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    s.push(chars[j]);
                    j += 1;
                }
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '-' || chars[k] == '+') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    s.extend(&chars[j..k]);
                    j = k;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        s.push(chars[j]);
                        j += 1;
                    }
                }
            }
            if s == "-" {
                return Err(err(l0, c0, "stray `-`".into()));
            }
            let n = j - i;
            step(n, &mut i, &mut col);
            Tok::Number(s)
        } else if c == '"' {
            let mut s = String::new();
            let mut j = i + 1;
            loop {
                match chars.get(j) {
                    None | Some('\n') => return Err(err(l0, c0, "unterminated string".into())),
                    Some('"') => break,
                    Some('\\') if chars.get(j + 1).is_some_and(|c| *c == '"' || *c == '\\') => {
                        s.push(chars[j + 1]);
                        j += 2;
                    }
                    Some(ch) => {
                        s.push(*ch);
                        j += 1;
                    }
                }
            }
            let n = j + 1 - i;
            step(n, &mut i, &mut col);
            Tok::Str(s)
        } else if c == '#' {
            let s: String = chars[i + 1..].iter().take_while(|c| ident_char(**c)).collect();
            if s.is_empty() {
                return Err(err(l0, c0, "expected a directive name after `#`".into()));
            }
            step(s.chars().count() + 1, &mut i, &mut col);
            Tok::Directive(s)
        } else {
            let (t, n) = match (c, next) {
                ('<', Some('-')) => (Tok::Arrow, 2),
                ('<', Some('~')) => (Tok::Choice, 2),
                ('>', Some('=')) => (Tok::Ge, 2),
                ('(', _) => (Tok::LParen, 1),
                (')', _) => (Tok::RParen, 1),
                ('{', _) => (Tok::LBrace, 1),
                ('}', _) => (Tok::RBrace, 1),
                (',', _) => (Tok::Comma, 1),
                (':', _) => (Tok::Colon, 1),
                ('.', _) => (Tok::Dot, 1),
                ('|', _) => (Tok::Pipe, 1),
                ('*', _) => (Tok::Star, 1),
                _ => return Err(err(l0, c0, format!("unexpected character {c:?}"))),
            };
            step(n, &mut i, &mut col);
            t
        };
        out.push(Spanned { tok, line: l0, col: c0 });
    }
    out.push(Spanned { tok: Tok::Eof, line, col });
    Ok(out)
}
