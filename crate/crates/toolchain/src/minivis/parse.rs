//! Recursive-descent parser producing an unresolved syntax tree.

use super::lex::{Pos, Tok, Token};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Debug, Clone, PartialEq)]
pub enum AstKind {
    Num(f64),
    Var(String),
    Neg(Box<Ast>),
    Bin(BinOp, Box<Ast>, Box<Ast>),
    Call(String, Vec<Ast>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ast {
    pub kind: AstKind,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Float(f64),
    Vec3([f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDef {
    pub name: String,
    pub pos: Pos,
    pub value: Literal,
    pub range: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnDef {
    pub name: String,
    pub pos: Pos,
    pub params: Vec<(String, Pos)>,
    pub body: Ast,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Param(ParamDef),
    Fn(FnDef),
    Pixel { pos: Pos, body: Ast },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

struct Parser {
    toks: Vec<Token>,
    at: usize,
}

/// Parse a token stream (ending in `Eof`) into items. An empty file parses
/// to no items.
pub fn parse(toks: Vec<Token>) -> Result<Vec<Item>, ParseError> {
    let mut p = Parser { toks, at: 0 };
    let mut items = Vec::new();
    while p.peek() != &Tok::Eof {
        items.push(p.item()?);
    }
    Ok(items)
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.at].clone();
        if t.tok != Tok::Eof {
            self.at += 1;
        }
        t
    }

    fn error<T>(&self, expected: &str) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos(), message: format!("expected {expected}, found {}", self.peek()) })
    }

    fn expect(&mut self, tok: Tok) -> Result<Pos, ParseError> {
        if *self.peek() == tok {
            Ok(self.bump().pos)
        } else {
            self.error(&tok.to_string())
        }
    }

    fn ident(&mut self) -> Result<(String, Pos), ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().pos)),
            _ => self.error("identifier"),
        }
    }

    fn item(&mut self) -> Result<Item, ParseError> {
        match self.peek() {
            Tok::Param => self.param().map(Item::Param),
            Tok::Fn => self.func().map(Item::Fn),
            Tok::Pixel => {
                let pos = self.bump().pos;
                self.expect(Tok::LBrace)?;
                let body = self.expr()?;
                self.expect(Tok::RBrace)?;
                Ok(Item::Pixel { pos, body })
            }
            _ => self.error("'param', 'fn' or 'pixel'"),
        }
    }

    fn param(&mut self) -> Result<ParamDef, ParseError> {
        self.bump();
        let (name, pos) = self.ident()?;
        self.expect(Tok::Eq)?;
        let value = if *self.peek() == Tok::LParen {
            self.bump();
            let a = self.number()?;
            self.expect(Tok::Comma)?;
            let b = self.number()?;
            self.expect(Tok::Comma)?;
            let c = self.number()?;
            self.expect(Tok::RParen)?;
            Literal::Vec3([a, b, c])
        } else {
            Literal::Float(self.number()?)
        };
        let range = if *self.peek() == Tok::Range {
            self.bump();
            Some((self.number()?, self.number()?))
        } else {
            None
        };
        self.expect(Tok::Semi)?;
        Ok(ParamDef { name, pos, value, range })
    }

    /// A number literal with an optional leading minus.
    fn number(&mut self) -> Result<f64, ParseError> {
        let negate = *self.peek() == Tok::Minus;
        if negate {
            self.bump();
        }
        match *self.peek() {
            Tok::Num(n) => {
                self.bump();
                Ok(if negate { -n } else { n })
            }
            _ => self.error("number"),
        }
    }

    fn func(&mut self) -> Result<FnDef, ParseError> {
        self.bump();
        let (name, pos) = self.ident()?;
        self.expect(Tok::LParen)?;
        let mut params = Vec::new();
        if *self.peek() != Tok::RParen {
            params.push(self.ident()?);
            while *self.peek() == Tok::Comma {
                self.bump();
                params.push(self.ident()?);
            }
        }
        self.expect(Tok::RParen)?;
        self.expect(Tok::LBrace)?;
        let body = self.expr()?;
        self.expect(Tok::RBrace)?;
        Ok(FnDef { name, pos, params, body })
    }

    fn expr(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinOp::Add,
                Tok::Minus => BinOp::Sub,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.term()?;
            lhs = Ast { kind: AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), pos };
        }
    }

    fn term(&mut self) -> Result<Ast, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinOp::Mul,
                Tok::Slash => BinOp::Div,
                _ => return Ok(lhs),
            };
            let pos = self.bump().pos;
            let rhs = self.unary()?;
            lhs = Ast { kind: AstKind::Bin(op, Box::new(lhs), Box::new(rhs)), pos };
        }
    }

    fn unary(&mut self) -> Result<Ast, ParseError> {
        match self.peek() {
            Tok::Minus => {
                let pos = self.bump().pos;
                let inner = self.unary()?;
                Ok(Ast { kind: AstKind::Neg(Box::new(inner)), pos })
            }
            Tok::Plus => {
                self.bump();
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Ast, ParseError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Ast { kind: AstKind::Num(n), pos })
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() != Tok::LParen {
                    return Ok(Ast { kind: AstKind::Var(name), pos });
                }
                self.bump();
                let mut args = Vec::new();
                if *self.peek() != Tok::RParen {
                    args.push(self.expr()?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        args.push(self.expr()?);
                    }
                }
                self.expect(Tok::RParen)?;
                Ok(Ast { kind: AstKind::Call(name, args), pos })
            }
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            _ => self.error("expression"),
        }
    }
}
