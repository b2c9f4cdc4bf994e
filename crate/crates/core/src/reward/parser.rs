//! Lexer and recursive-descent parser for reward programs.
//!
//! ```text
//! program := ("stage" INT)? term*
//! term    := "term" IDENT "{" expr "}" "@" NUMBER
//! expr    := sum (("<" | "<=" | ">" | ">=" | "==" | "!=") sum)*
//! sum     := product (("+" | "-") product)*
//! product := unary (("*" | "/") unary)*
//! unary   := "-" NUMBER | "-" unary | atom
//! atom    := NUMBER | FEATURE | FEATURE "(" INT ")" | FUNC "(" expr ("," expr)* ")" | "(" expr ")"
//! ```
//!
//! `#` starts a comment that runs to the end of the line.

use std::collections::HashSet;
use std::fmt;

use super::ast::{BinOp, Expr, Func};
use super::features::Feature;
use super::program::{RewardProgram, RewardTerm};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}, column {column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    Expected { expected: String, found: String },
    UnknownFeature(String),
    Arity { name: String, expected: usize, got: usize },
    DuplicateTerm(String),
    NegativeWeight { term: String, weight: f64 },
    BadIndex(String),
    NonFiniteNumber(String),
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character {c:?}"),
            ParseErrorKind::Expected { expected, found } => write!(f, "expected {expected}, found {found}"),
            ParseErrorKind::UnknownFeature(name) => write!(f, "unknown feature `{name}`"),
            ParseErrorKind::Arity { name, expected, got } => {
                write!(f, "`{name}` takes {expected} argument(s), got {got}")
            }
            ParseErrorKind::DuplicateTerm(name) => write!(f, "duplicate term name `{name}`"),
            ParseErrorKind::NegativeWeight { term, weight } => {
                write!(f, "term `{term}` has negative weight {weight}")
            }
            ParseErrorKind::BadIndex(s) => write!(f, "expected a non-negative integer index, found {s}"),
            ParseErrorKind::NonFiniteNumber(s) => write!(f, "number {s} is not finite"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64, String),
    Sym(&'static str),
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(_, s) => write!(f, "number {s}"),
            Tok::Sym(s) => write!(f, "`{s}`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

const SYMBOLS: [&str; 16] = ["<=", ">=", "==", "!=", "<", ">", "+", "-", "*", "/", "(", ")", "{", "}", ",", "@"];

fn lex(src: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let s: String = chars[i..].iter().take_while(|c| c.is_ascii_alphanumeric() || **c == '_').collect();
            i += s.len();
            col += s.len();
            out.push(Spanned { tok: Tok::Ident(s), line: start_line, column: start_col });
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let mut j = i;
            while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                j += 1;
            }
            if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                let mut k = j + 1;
                if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                    k += 1;
                }
                if k < chars.len() && chars[k].is_ascii_digit() {
                    while k < chars.len() && chars[k].is_ascii_digit() {
                        k += 1;
                    }
                    j = k;
                }
            }
            let text: String = chars[i..j].iter().collect();
            let err = |kind| ParseError { line: start_line, column: start_col, kind };
            let value: f64 = text.parse().map_err(|_| {
                err(ParseErrorKind::Expected { expected: "a number".into(), found: text.clone() })
            })?;
            if !value.is_finite() {
                return Err(err(ParseErrorKind::NonFiniteNumber(text)));
            }
            col += j - i;
            i = j;
            out.push(Spanned { tok: Tok::Number(value, text), line: start_line, column: start_col });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
        match SYMBOLS.iter().find(|s| rest.starts_with(**s)) {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Spanned { tok: Tok::Sym(s), line: start_line, column: start_col });
            }
            None => {
                return Err(ParseError { line, column: col, kind: ParseErrorKind::UnexpectedChar(c) });
            }
        }
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let s = &self.toks[self.pos];
        ParseError { line: s.line, column: s.column, kind }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_here(ParseErrorKind::Expected { expected: what.into(), found: self.peek().to_string() })
    }

    fn eat_sym(&mut self, sym: &str) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Sym(s) if *s == sym => {
                self.next();
                Ok(())
            }
            _ => Err(self.expected(&format!("`{sym}`"))),
        }
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn ident(&mut self, what: &str) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.next();
                Ok(s)
            }
            _ => Err(self.expected(what)),
        }
    }

    fn index(&mut self) -> Result<usize, ParseError> {
        match self.peek().clone() {
            Tok::Number(_, text) => match text.parse::<usize>() {
                Ok(i) => {
                    self.next();
                    Ok(i)
                }
                Err(_) => Err(self.error_here(ParseErrorKind::BadIndex(text))),
            },
            other => Err(self.error_here(ParseErrorKind::BadIndex(other.to_string()))),
        }
    }

    fn program(&mut self) -> Result<RewardProgram, ParseError> {
        let mut stage_id = 0;
        if matches!(self.peek(), Tok::Ident(s) if s == "stage") {
            self.next();
            stage_id = self.index()?;
        }
        let mut terms = Vec::new();
        let mut weights = Vec::new();
        let mut seen = HashSet::new();
        while *self.peek() != Tok::Eof {
            match self.peek() {
                Tok::Ident(s) if s == "term" => {}
                _ => return Err(self.expected("`term`")),
            }
            self.next();
            let name_err_pos = self.pos;
            let name = self.ident("a term name")?;
            if !seen.insert(name.clone()) {
                self.pos = name_err_pos;
                return Err(self.error_here(ParseErrorKind::DuplicateTerm(name)));
            }
            self.eat_sym("{")?;
            let expr = self.expr()?;
            self.eat_sym("}")?;
            self.eat_sym("@")?;
            let negative = self.is_sym("-");
            if negative {
                self.next();
            }
            let weight = match self.next() {
                Tok::Number(v, _) => v,
                _ => {
                    self.pos -= 1;
                    return Err(self.expected("a weight"));
                }
            };
            if negative && weight != 0.0 {
                return Err(self.error_here(ParseErrorKind::NegativeWeight { term: name, weight: -weight }));
            }
            terms.push(RewardTerm { name, expr });
            weights.push(weight);
        }
        Ok(RewardProgram { terms, weights, stage_id })
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.sum()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("<") => BinOp::Lt,
                Tok::Sym("<=") => BinOp::Le,
                Tok::Sym(">") => BinOp::Gt,
                Tok::Sym(">=") => BinOp::Ge,
                Tok::Sym("==") => BinOp::Eq,
                Tok::Sym("!=") => BinOp::Ne,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::binary(op, lhs, self.sum()?);
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("+") => BinOp::Add,
                Tok::Sym("-") => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::binary(op, lhs, self.product()?);
        }
    }

    fn product(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Sym("*") => BinOp::Mul,
                Tok::Sym("/") => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::binary(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if !self.is_sym("-") {
            return self.atom();
        }
        self.next();
        if let Tok::Number(v, _) = *self.peek() {
            self.next();
            return Ok(Expr::Num(-v));
        }
        Ok(Expr::Neg(Box::new(self.unary()?)))
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Number(v, _) => {
                self.next();
                Ok(Expr::Num(v))
            }
            Tok::Sym("(") => {
                self.next();
                let e = self.expr()?;
                self.eat_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                let start = self.pos;
                self.next();
                if let Some(func) = Func::from_name(&name) {
                    self.eat_sym("(")?;
                    let mut args = vec![self.expr()?];
                    while self.is_sym(",") {
                        self.next();
                        args.push(self.expr()?);
                    }
                    self.eat_sym(")")?;
                    if args.len() != func.arity() {
                        self.pos = start;
                        return Err(self.error_here(ParseErrorKind::Arity {
                            name,
                            expected: func.arity(),
                            got: args.len(),
                        }));
                    }
                    return Ok(Expr::Call(func, args));
                }
                match Feature::is_indexed_name(&name) {
                    None => {
                        self.pos = start;
                        Err(self.error_here(ParseErrorKind::UnknownFeature(name)))
                    }
                    Some(false) => Ok(Expr::Feature(Feature::from_name(&name, None).unwrap())),
                    Some(true) => {
                        if !self.is_sym("(") || matches!(self.peek_at(1), Tok::Sym(")")) {
                            self.pos = start;
                            return Err(self.error_here(ParseErrorKind::Arity { name, expected: 1, got: 0 }));
                        }
                        self.next();
                        let idx = self.index()?;
                        self.eat_sym(")")?;
                        Ok(Expr::Feature(Feature::from_name(&name, Some(idx)).unwrap()))
                    }
                }
            }
            _ => Err(self.expected("an expression")),
        }
    }
}

/// Parses reward-program text. Feature names are resolved against the catalog.
pub fn parse_program(text: &str) -> Result<RewardProgram, ParseError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.program()
}

/// Parses a single expression, as used in term definitions and hints.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.expected("end of expression"));
    }
    Ok(e)
}
