use std::str::FromStr;

use thiserror::Error;

use super::{Atom, BinaryOp, Cmp, Formula, Interval, Term, UnaryOp};
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("unknown variable `{name}` at {line}:{col}")]
    UnknownVariable { name: String, line: usize, col: usize },
    #[error("malformed interval [{lo},{hi}] at {line}:{col}")]
    MalformedInterval { lo: usize, hi: usize, line: usize, col: usize },
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    LBrack,
    RBrack,
    Comma,
    Bang,
    Amp,
    Pipe,
    Arrow,
    Plus,
    Minus,
    Star,
    Cmp(Cmp),
    Num(String),
    Ident(String),
    End,
}

#[derive(Clone, Debug)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = (line, col);
        let mut adv = 1;
        let tok = match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => None,
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '[' => Some(Tok::LBrack),
            ']' => Some(Tok::RBrack),
            ',' => Some(Tok::Comma),
            '!' | '¬' => Some(Tok::Bang),
            '&' | '∧' => Some(Tok::Amp),
            '|' | '∨' => Some(Tok::Pipe),
            '→' => Some(Tok::Arrow),
            '+' => Some(Tok::Plus),
            '*' => Some(Tok::Star),
            '≥' => Some(Tok::Cmp(Cmp::Ge)),
            '≤' => Some(Tok::Cmp(Cmp::Le)),
            '-' if chars.get(i + 1) == Some(&'>') => {
                adv = 2;
                Some(Tok::Arrow)
            }
            '-' => Some(Tok::Minus),
            '>' | '<' => {
                let eq = chars.get(i + 1) == Some(&'=');
                if eq {
                    adv = 2;
                }
                Some(Tok::Cmp(match (c, eq) {
                    ('>', true) => Cmp::Ge,
                    ('>', false) => Cmp::Gt,
                    ('<', true) => Cmp::Le,
                    _ => Cmp::Lt,
                }))
            }
            c if c.is_ascii_digit() || c == '.' => {
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
                adv = j - i;
                Some(Tok::Num(chars[i..j].iter().collect()))
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                adv = j - i;
                Some(Tok::Ident(chars[i..j].iter().collect()))
            }
            other => {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        };
        if let Some(tok) = tok {
            out.push(Spanned { tok, line: start.0, col: start.1 });
        }
        i += adv;
        col += adv;
    }
    out.push(Spanned { tok: Tok::End, line, col });
    Ok(out)
}

fn unary_keyword(s: &str) -> Option<fn(Interval) -> UnaryOp> {
    Some(match s {
        "X" => |_| UnaryOp::Next,
        "wX" => |_| UnaryOp::WeakNext,
        "Y" => |_| UnaryOp::Yesterday,
        "wY" => |_| UnaryOp::WeakYesterday,
        "F" => UnaryOp::Eventually,
        "G" => UnaryOp::Globally,
        "O" => UnaryOp::Once,
        "H" => UnaryOp::Historically,
        _ => return None,
    })
}

fn takes_interval(s: &str) -> bool {
    matches!(s, "F" | "G" | "O" | "H" | "U" | "R" | "S" | "T")
}

fn binary_keyword(s: &str) -> Option<fn(Interval) -> BinaryOp> {
    Some(match s {
        "U" => BinaryOp::Until,
        "R" => BinaryOp::Release,
        "S" => BinaryOp::Since,
        "T" => BinaryOp::Triggers,
        _ => return None,
    })
}

fn is_keyword(s: &str) -> bool {
    unary_keyword(s).is_some() || binary_keyword(s).is_some() || s == "TRUE"
}

struct Parser<'a, S> {
    toks: Vec<Spanned>,
    pos: usize,
    names: &'a [S],
}

/// Parse formula text, resolving variable names against `names` (column
/// order of the dataset).
///
/// Comparison operators and derived temporal operators are kept as written.
/// `a -> b` is accepted as sugar for `!a | b`.
pub fn parse<T: Scalar, S: AsRef<str>>(text: &str, names: &[S]) -> Result<Formula<T>, ParseError> {
    let mut p = Parser { toks: lex(text)?, pos: 0, names };
    let f = p.implies()?;
    match p.peek() {
        Tok::End => Ok(f),
        _ => Err(p.error("unexpected trailing input")),
    }
}

impl<S: AsRef<str>> Parser<'_, S> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, msg: &str) -> ParseError {
        let s = &self.toks[self.pos];
        let found = match &s.tok {
            Tok::End => "end of input".to_string(),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Ident(n) => format!("`{n}`"),
            t => format!("{t:?}"),
        };
        ParseError::Syntax { line: s.line, col: s.col, msg: format!("{msg}, found {found}") }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(&format!("expected {what}")))
        }
    }

    fn implies<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        let lhs = self.or()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.implies()?;
            return Ok(Formula::or(Formula::not(lhs), rhs));
        }
        Ok(lhs)
    }

    fn or<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        let mut lhs = self.and()?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        let mut lhs = self.temporal()?;
        while *self.peek() == Tok::Amp {
            self.bump();
            lhs = Formula::and(lhs, self.temporal()?);
        }
        Ok(lhs)
    }

    fn temporal<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let ctor = match self.peek() {
                Tok::Ident(s) => match binary_keyword(s) {
                    Some(c) => c,
                    None => break,
                },
                _ => break,
            };
            self.bump();
            let iv = self.interval_opt()?;
            let rhs = self.unary()?;
            lhs = Formula::binary(ctor(iv), lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.unary()?))
            }
            Tok::Ident(s) if unary_keyword(&s).is_some() => {
                let ctor = unary_keyword(&s).unwrap();
                self.bump();
                let iv = if takes_interval(&s) { self.interval_opt()? } else { Interval::UNBOUNDED };
                Ok(Formula::unary(ctor(iv), self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let f = self.implies()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(s) if s == "TRUE" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(_) | Tok::Num(_) | Tok::Minus => self.atom(),
            _ => Err(self.error("expected formula")),
        }
    }

    fn interval_opt(&mut self) -> Result<Interval, ParseError> {
        if *self.peek() != Tok::LBrack {
            return Ok(Interval::UNBOUNDED);
        }
        let (line, col) = (self.toks[self.pos].line, self.toks[self.pos].col);
        self.bump();
        let lo = self.natural()?;
        self.expect(Tok::Comma, "`,`")?;
        let hi = match self.peek().clone() {
            Tok::Ident(s) if s == "inf" => {
                self.bump();
                None
            }
            _ => Some(self.natural()?),
        };
        self.expect(Tok::RBrack, "`]`")?;
        match hi {
            None => Ok(Interval::from(lo)),
            Some(hi) if lo <= hi => Ok(Interval::bounded(lo, hi).expect("checked")),
            Some(hi) => Err(ParseError::MalformedInterval { lo, hi, line, col }),
        }
    }

    fn natural(&mut self) -> Result<usize, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => match n.parse::<usize>() {
                Ok(v) => {
                    self.bump();
                    Ok(v)
                }
                Err(_) => Err(self.error("expected natural interval bound")),
            },
            _ => Err(self.error("expected natural interval bound")),
        }
    }

    fn number<T: Scalar>(&mut self) -> Result<T, ParseError> {
        match self.peek().clone() {
            Tok::Num(n) => match T::from_str(&n) {
                Ok(v) if v.is_finite() => {
                    self.bump();
                    Ok(v)
                }
                _ => Err(self.error("malformed number")),
            },
            _ => Err(self.error("expected number")),
        }
    }

    /// Signed sum of `NUMBER`, `NUMBER * IDENT` and `IDENT` items.
    fn linear<T: Scalar>(&mut self) -> Result<(Vec<Term<T>>, Option<T>), ParseError> {
        let mut terms = Vec::new();
        let mut constant: Option<T> = None;
        let mut first = true;
        loop {
            let negative = match self.peek() {
                Tok::Minus => {
                    self.bump();
                    true
                }
                Tok::Plus if !first => {
                    self.bump();
                    false
                }
                _ if first => false,
                _ => break,
            };
            first = false;
            let sign = |v: T| if negative { -v } else { v };
            match self.peek().clone() {
                Tok::Num(_) => {
                    let v = self.number::<T>()?;
                    if *self.peek() == Tok::Star {
                        self.bump();
                        let var = self.variable()?;
                        terms.push(Term { var, weight: sign(v) });
                    } else {
                        constant = Some(match constant {
                            None => sign(v),
                            Some(c) => c + sign(v),
                        });
                    }
                }
                Tok::Ident(_) => {
                    let var = self.variable()?;
                    terms.push(Term { var, weight: sign(T::one()) });
                }
                _ => return Err(self.error("expected variable or number")),
            }
            if !matches!(self.peek(), Tok::Plus | Tok::Minus) {
                break;
            }
        }
        Ok((terms, constant))
    }

    fn variable(&mut self) -> Result<usize, ParseError> {
        let s = &self.toks[self.pos];
        let (line, col) = (s.line, s.col);
        match self.peek().clone() {
            Tok::Ident(name) if !is_keyword(&name) => {
                let idx = self.names.iter().position(|n| n.as_ref() == name);
                match idx {
                    Some(i) => {
                        self.bump();
                        Ok(i)
                    }
                    None => Err(ParseError::UnknownVariable { name, line, col }),
                }
            }
            _ => Err(self.error("expected variable")),
        }
    }

    fn atom<T: Scalar>(&mut self) -> Result<Formula<T>, ParseError> {
        let (lhs_terms, lhs_const) = self.linear::<T>()?;
        let cmp = match self.peek() {
            Tok::Cmp(c) => *c,
            _ => return Err(self.error("expected comparison operator")),
        };
        self.bump();
        let (rhs_terms, rhs_const) = self.linear::<T>()?;
        let mut terms = lhs_terms;
        terms.extend(rhs_terms.into_iter().map(|t| Term { var: t.var, weight: -t.weight }));
        if terms.is_empty() {
            return Err(self.error("atom without variables"));
        }
        let threshold = match (rhs_const, lhs_const) {
            (Some(r), None) => r,
            (None, None) => T::zero(),
            (None, Some(l)) => -l,
            (Some(r), Some(l)) => r - l,
        };
        Ok(Formula::Atom(Atom { terms, cmp, threshold }))
    }
}

impl<T: Scalar> FromStr for Formula<T> {
    type Err = ParseError;

    /// Parse with positional names `x0, x1, ...`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let names: Vec<String> = (0..64).map(|i| format!("x{i}")).collect();
        parse(s, &names)
    }
}
