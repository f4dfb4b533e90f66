//! Tokenizer. Positions are 1-based lines and character columns.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Num(f64),
    Ident(String),
    Param,
    Fn,
    Pixel,
    Range,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Eq,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number {n}"),
            Tok::Ident(s) => write!(f, "'{s}'"),
            Tok::Param => f.write_str("'param'"),
            Tok::Fn => f.write_str("'fn'"),
            Tok::Pixel => f.write_str("'pixel'"),
            Tok::Range => f.write_str("'range'"),
            Tok::LParen => f.write_str("'('"),
            Tok::RParen => f.write_str("')'"),
            Tok::LBrace => f.write_str("'{'"),
            Tok::RBrace => f.write_str("'}'"),
            Tok::Comma => f.write_str("','"),
            Tok::Semi => f.write_str("';'"),
            Tok::Eq => f.write_str("'='"),
            Tok::Plus => f.write_str("'+'"),
            Tok::Minus => f.write_str("'-'"),
            Tok::Star => f.write_str("'*'"),
            Tok::Slash => f.write_str("'/'"),
            Tok::Eof => f.write_str("end of file"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    pub pos: Pos,
    pub message: String,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    col: usize,
}

impl Cursor<'_> {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn second(&self) -> Option<char> {
        let mut it = self.chars.clone();
        it.next();
        it.next()
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, LexError> {
    let mut cur = Cursor { chars: text.chars().peekable(), line: 1, col: 1 };
    let mut out = Vec::new();
    while let Some(c) = cur.peek() {
        let pos = cur.pos();
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '/' && cur.second() == Some('/') {
            while cur.peek().is_some_and(|c| c != '\n') {
                cur.bump();
            }
            continue;
        }
        if c == '/' && cur.second() == Some('*') {
            cur.bump();
            cur.bump();
            loop {
                match cur.bump() {
                    None => return Err(LexError { pos, message: "unterminated block comment".into() }),
                    Some('*') if cur.peek() == Some('/') => {
                        cur.bump();
                        break;
                    }
                    Some(_) => {}
                }
            }
            continue;
        }
        let tok = if c.is_ascii_digit() || (c == '.' && cur.second().is_some_and(|d| d.is_ascii_digit())) {
            lex_number(&mut cur, pos)?
        } else if c.is_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(c) = cur.peek().filter(|c| c.is_alphanumeric() || *c == '_') {
                s.push(c);
                cur.bump();
            }
            match s.as_str() {
                "param" => Tok::Param,
                "fn" => Tok::Fn,
                "pixel" => Tok::Pixel,
                "range" => Tok::Range,
                _ => Tok::Ident(s),
            }
        } else {
            cur.bump();
            match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                '{' => Tok::LBrace,
                '}' => Tok::RBrace,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                other => return Err(LexError { pos, message: format!("unexpected character '{other}'") }),
            }
        };
        out.push(Token { tok, pos });
    }
    out.push(Token { tok: Tok::Eof, pos: cur.pos() });
    Ok(out)
}

fn lex_number(cur: &mut Cursor<'_>, pos: Pos) -> Result<Tok, LexError> {
    let mut s = String::new();
    let digits = |cur: &mut Cursor<'_>, s: &mut String| {
        while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
            s.push(d);
            cur.bump();
        }
    };
    digits(cur, &mut s);
    if cur.peek() == Some('.') {
        s.push('.');
        cur.bump();
        digits(cur, &mut s);
    }
    if matches!(cur.peek(), Some('e' | 'E')) {
        let sign = cur.second();
        let has_exp = match sign {
            Some('+' | '-') => {
                let mut it = cur.chars.clone();
                it.next();
                it.next();
                it.next().is_some_and(|d| d.is_ascii_digit())
            }
            Some(d) => d.is_ascii_digit(),
            None => false,
        };
        if has_exp {
            s.push('e');
            cur.bump();
            if let Some(sg @ ('+' | '-')) = cur.peek() {
                s.push(sg);
                cur.bump();
            }
            digits(cur, &mut s);
        }
    }
    s.parse().map(Tok::Num).map_err(|_| LexError { pos, message: format!("malformed number '{s}'") })
}
