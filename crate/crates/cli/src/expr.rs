//! Arithmetic expression evaluator for coefficient fields.
//!
//! Identifiers `x` and `y`, operators `+ - * / ^`, functions
//! `sin cos exp ln abs min max`, numeric literals and parentheses.

use anyhow::{anyhow, bail, Result};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Token::Plus);
                i += 1;
            }
            '-' => {
                out.push(Token::Minus);
                i += 1;
            }
            '*' => {
                out.push(Token::Star);
                i += 1;
            }
            '/' => {
                out.push(Token::Slash);
                i += 1;
            }
            '^' => {
                out.push(Token::Caret);
                i += 1;
            }
            '(' => {
                out.push(Token::LParen);
                i += 1;
            }
            ')' => {
                out.push(Token::RParen);
                i += 1;
            }
            ',' => {
                out.push(Token::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && i > start
                            && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| anyhow!("invalid number '{text}' at position {start}"))?;
                out.push(Token::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => bail!("unexpected character '{other}' at position {i}"),
        }
    }
    Ok(out)
}

/// Parsed expression tree.
#[derive(Debug, Clone)]
pub enum Expr {
    Num(f64),
    Var(usize), // 0 = x, 1 = y
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call1(Func1, Box<Expr>),
    Call2(Func2, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy)]
pub enum Func1 {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
}

#[derive(Debug, Clone, Copy)]
pub enum Func2 {
    Min,
    Max,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Token) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => bail!("expected {t:?}, found {got:?}"),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.next();
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.next();
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.next();
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(Token::Slash) => {
                    self.next();
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        // unary minus binds looser than ^, so -x^2 is -(x^2)
        if let Some(Token::Minus) = self.peek() {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if let Some(Token::Caret) = self.peek() {
            self.next();
            // right associative
            let exp = self.factor()?;
            return Ok(Expr::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Token::Num(v)) => Ok(Expr::Num(v)),
            Some(Token::LParen) => {
                let e = self.expr()?;
                self.expect(Token::RParen)?;
                Ok(e)
            }
            Some(Token::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::Var(0)),
                "y" => Ok(Expr::Var(1)),
                "sin" | "cos" | "exp" | "ln" | "abs" => {
                    self.expect(Token::LParen)?;
                    let arg = self.expr()?;
                    self.expect(Token::RParen)?;
                    let f = match name.as_str() {
                        "sin" => Func1::Sin,
                        "cos" => Func1::Cos,
                        "exp" => Func1::Exp,
                        "ln" => Func1::Ln,
                        _ => Func1::Abs,
                    };
                    Ok(Expr::Call1(f, Box::new(arg)))
                }
                "min" | "max" => {
                    self.expect(Token::LParen)?;
                    let a = self.expr()?;
                    self.expect(Token::Comma)?;
                    let b = self.expr()?;
                    self.expect(Token::RParen)?;
                    let f = if name == "min" { Func2::Min } else { Func2::Max };
                    Ok(Expr::Call2(f, Box::new(a), Box::new(b)))
                }
                other => bail!("unknown identifier '{other}' (allowed: x, y, sin, cos, exp, ln, abs, min, max)"),
            },
            other => bail!("unexpected token {other:?}"),
        }
    }
}

pub fn parse(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.expr()?;
    if p.pos != p.tokens.len() {
        bail!("trailing input after expression (token {})", p.pos);
    }
    Ok(e)
}

impl Expr {
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var(0) => x,
            Expr::Var(_) => y,
            Expr::Neg(a) => -a.eval(x, y),
            Expr::Add(a, b) => a.eval(x, y) + b.eval(x, y),
            Expr::Sub(a, b) => a.eval(x, y) - b.eval(x, y),
            Expr::Mul(a, b) => a.eval(x, y) * b.eval(x, y),
            Expr::Div(a, b) => a.eval(x, y) / b.eval(x, y),
            Expr::Pow(a, b) => a.eval(x, y).powf(b.eval(x, y)),
            Expr::Call1(f, a) => {
                let v = a.eval(x, y);
                match f {
                    Func1::Sin => v.sin(),
                    Func1::Cos => v.cos(),
                    Func1::Exp => v.exp(),
                    Func1::Ln => v.ln(),
                    Func1::Abs => v.abs(),
                }
            }
            Expr::Call2(f, a, b) => {
                let va = a.eval(x, y);
                let vb = b.eval(x, y);
                match f {
                    Func2::Min => va.min(vb),
                    Func2::Max => va.max(vb),
                }
            }
        }
    }
}
