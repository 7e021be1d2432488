//! Recursive-descent parser for scalar field expressions.
//!
//! Grammar, loosest binding first:
//!
//! ```text
//! sum     := product (('+' | '-') product)*
//! product := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := atom ('^' '-'? integer)?
//! atom    := number | 'pi' | 'e' | variable | func '(' sum ')' | '(' sum ')'
//! ```

use thiserror::Error;

use super::ast::{split_variable, BinOp, Expr, Families, Func, NamedConst, Node, Var};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("variable `{name}` at byte {offset} is out of range for dimension {dim}")]
    IndexOutOfRange {
        name: String,
        offset: usize,
        dim: usize,
    },
    #[error("variable `{name}` at byte {offset} is not allowed here")]
    IllegalFamily { name: String, offset: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(Token, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&b) = bytes.get(self.pos) else {
            return Ok((Token::End, start));
        };
        if b.is_ascii_digit() || b == b'.' {
            return self.number(start).map(|n| (Token::Number(n), start));
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while self.pos < bytes.len()
                && (bytes[self.pos].is_ascii_alphanumeric() || bytes[self.pos] == b'_')
            {
                self.pos += 1;
            }
            return Ok((Token::Ident(self.src[start..self.pos].to_string()), start));
        }
        if b"+-*/^()".contains(&b) {
            self.pos += 1;
            return Ok((Token::Sym(b as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }

    fn number(&mut self, start: usize) -> Result<f64, ParseError> {
        let bytes = self.src.as_bytes();
        let digits = |pos: &mut usize| {
            let s = *pos;
            while *pos < bytes.len() && bytes[*pos].is_ascii_digit() {
                *pos += 1;
            }
            *pos - s
        };
        let mut n = digits(&mut self.pos);
        if bytes.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            n += digits(&mut self.pos);
        }
        if n == 0 {
            return Err(ParseError::Syntax {
                offset: start,
                message: "malformed number".into(),
            });
        }
        if matches!(bytes.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(bytes.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if digits(&mut self.pos) == 0 {
                // `2e` followed by something else: leave `e` for the next token.
                self.pos = save;
            }
        }
        self.src[start..self.pos]
            .parse::<f64>()
            .map_err(|e| ParseError::Syntax {
                offset: start,
                message: format!("malformed number: {e}"),
            })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    token: Token,
    offset: usize,
    dim: usize,
    families: Families,
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(), ParseError> {
        let (token, offset) = self.lexer.next_token()?;
        self.token = token;
        self.offset = offset;
        Ok(())
    }

    fn syntax<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            offset: self.offset,
            message: message.into(),
        })
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.token == Token::Sym(c) {
            self.bump()
        } else {
            self.syntax(format!("expected `{c}`"))
        }
    }

    fn sum(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.token {
                Token::Sym('+') => BinOp::Add,
                Token::Sym('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.product()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn product(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.token {
                Token::Sym('*') => BinOp::Mul,
                Token::Sym('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump()?;
            let rhs = self.unary()?;
            lhs = Node::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.token == Token::Sym('-') {
            self.bump()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.atom()?;
        if self.token != Token::Sym('^') {
            return Ok(base);
        }
        self.bump()?;
        let negative = self.token == Token::Sym('-');
        if negative {
            self.bump()?;
        }
        let n = match self.token {
            Token::Number(n) if n.fract() == 0.0 && n.abs() <= i32::MAX as f64 => n as i32,
            _ => return self.syntax("exponent must be an integer literal"),
        };
        self.bump()?;
        if self.token == Token::Sym('^') {
            return self.syntax("chained exponents need parentheses");
        }
        Ok(Node::Pow(Box::new(base), if negative { -n } else { n }))
    }

    fn atom(&mut self) -> Result<Node, ParseError> {
        match std::mem::replace(&mut self.token, Token::End) {
            Token::Number(n) => {
                self.bump()?;
                Ok(Node::Const(n))
            }
            Token::Sym('(') => {
                self.bump()?;
                let inner = self.sum()?;
                self.expect(')')?;
                Ok(inner)
            }
            Token::Ident(name) => self.identifier(name),
            Token::End => self.syntax("unexpected end of input"),
            Token::Sym(c) => self.syntax(format!("unexpected `{c}`")),
        }
    }

    fn identifier(&mut self, name: String) -> Result<Node, ParseError> {
        let offset = self.offset;
        self.bump()?;
        if let Some(func) = Func::from_name(&name) {
            self.expect('(')?;
            let arg = self.sum()?;
            self.expect(')')?;
            return Ok(Node::Call(func, Box::new(arg)));
        }
        match name.as_str() {
            "pi" => return Ok(Node::Named(NamedConst::Pi)),
            "e" => return Ok(Node::Named(NamedConst::E)),
            _ => {}
        }
        let Some((family, index)) = split_variable(&name) else {
            return Err(ParseError::UnknownIdentifier { name, offset });
        };
        if !self.families.contains(family) {
            return Err(ParseError::IllegalFamily { name, offset });
        }
        match index {
            Some(index) if index < self.dim => Ok(Node::Var(Var { family, index })),
            _ => Err(ParseError::IndexOutOfRange {
                name,
                offset,
                dim: self.dim,
            }),
        }
    }
}

/// Parses `src` into an expression over `dim`-dimensional variables of the
/// given families.
pub fn parse_expression(src: &str, dim: usize, families: Families) -> Result<Expr, ParseError> {
    if dim == 0 {
        return Err(ParseError::ZeroDimension);
    }
    let mut parser = Parser {
        lexer: Lexer { src, pos: 0 },
        token: Token::End,
        offset: 0,
        dim,
        families,
    };
    parser.bump()?;
    let root = parser.sum()?;
    if parser.token != Token::End {
        return parser.syntax("unexpected trailing input");
    }
    Ok(Expr {
        root,
        dim,
        families,
    })
}
