//! Concrete syntax for outcome formulas.
//!
//! ```text
//! implies := or ("->" implies)?
//! or      := and ("|" and)*
//! and     := until ("&" until)*
//! until   := unary ("U" until)?
//! unary   := ("!" | "F" | "G") unary | "(" implies ")" | atom
//! atom    := '"' ... '"' | "'" ... "'" | bare word
//! ```
//!
//! `¬ ∧ ∨ →` and `&& || =>` are accepted as synonyms. `F`, `G` and `U` are
//! reserved, so an activity with one of those names must be quoted.

use super::Formula;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
    Eventually,
    Always,
    Until,
    Atom(String),
}

fn syntax(position: usize, message: impl Into<String>) -> Error {
    Error::FormulaSyntax {
        position,
        message: message.into(),
    }
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || matches!(c, '_' | ':' | '.')
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, c)) = chars.peek() {
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '!' | '¬' | '~' => Some(Tok::Not),
            '∧' => Some(Tok::And),
            '∨' => Some(Tok::Or),
            '→' => Some(Tok::Implies),
            _ => None,
        };
        if let Some(tok) = single {
            chars.next();
            out.push((pos, tok));
            continue;
        }
        match c {
            '&' | '|' => {
                chars.next();
                if chars.peek().map(|&(_, d)| d) == Some(c) {
                    chars.next();
                }
                out.push((pos, if c == '&' { Tok::And } else { Tok::Or }));
            }
            '-' | '=' => {
                chars.next();
                match chars.next() {
                    Some((_, '>')) => out.push((pos, Tok::Implies)),
                    _ => return Err(syntax(pos, "expected `->`")),
                }
            }
            '"' | '\'' => {
                chars.next();
                let mut label = String::new();
                let mut closed = false;
                while let Some((_, d)) = chars.next() {
                    if d == '\\' {
                        match chars.next() {
                            Some((_, e)) => label.push(e),
                            None => break,
                        }
                    } else if d == c {
                        closed = true;
                        break;
                    } else {
                        label.push(d);
                    }
                }
                if !closed {
                    return Err(syntax(pos, "unterminated quoted activity"));
                }
                let label = label.trim().to_string();
                if label.is_empty() {
                    return Err(syntax(pos, "empty activity label"));
                }
                out.push((pos, Tok::Atom(label)));
            }
            c if is_word_char(c) => {
                let mut word = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if !is_word_char(d) {
                        break;
                    }
                    word.push(d);
                    chars.next();
                }
                let tok = match word.as_str() {
                    "F" => Tok::Eventually,
                    "G" => Tok::Always,
                    "U" => Tok::Until,
                    _ => Tok::Atom(word),
                };
                out.push((pos, tok));
            }
            other => return Err(syntax(pos, format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map(|(p, _)| *p).unwrap_or(self.end)
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn implies(&mut self) -> Result<Formula> {
        let lhs = self.or()?;
        if self.eat(&Tok::Implies) {
            Ok(Formula::implies(lhs, self.implies()?))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.eat(&Tok::Or) {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.until()?;
        while self.eat(&Tok::And) {
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.eat(&Tok::Until) {
            Ok(Formula::until(lhs, self.until()?))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Formula> {
        let at = self.offset();
        let Some(tok) = self.peek().cloned() else {
            return Err(syntax(at, "unexpected end of formula"));
        };
        self.pos += 1;
        match tok {
            Tok::Not => Ok(Formula::not(self.unary()?)),
            Tok::Eventually => Ok(Formula::eventually(self.unary()?)),
            Tok::Always => Ok(Formula::always(self.unary()?)),
            Tok::LParen => {
                let inner = self.implies()?;
                if !self.eat(&Tok::RParen) {
                    return Err(syntax(self.offset(), "expected `)`"));
                }
                Ok(inner)
            }
            Tok::Atom(label) => Ok(Formula::Atom(label)),
            other => Err(syntax(at, format!("unexpected {other:?}"))),
        }
    }
}

pub fn parse_formula(text: &str) -> Result<Formula> {
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        end: text.len(),
    };
    let formula = parser.implies()?;
    if parser.pos != parser.toks.len() {
        return Err(syntax(parser.offset(), "trailing input"));
    }
    Ok(formula)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn a(s: &str) -> Formula {
        Formula::atom(s)
    }

    #[test]
    fn outcome_formulas() {
        assert_eq!(
            parse_formula(r#"F("Accept Claim")"#).unwrap(),
            Formula::eventually(a("Accept Claim"))
        );
        assert_eq!(
            parse_formula(r#"!"a" U "b""#).unwrap(),
            Formula::until(Formula::not(a("a")), a("b"))
        );
        assert_eq!(
            parse_formula(r#"F("x") & F("y")"#).unwrap(),
            Formula::and(Formula::eventually(a("x")), Formula::eventually(a("y")))
        );
        assert_eq!(
            parse_formula(r#"G("send confirmation receipt" -> F("retrieve missing data"))"#).unwrap(),
            Formula::always(Formula::implies(
                a("send confirmation receipt"),
                Formula::eventually(a("retrieve missing data"))
            ))
        );
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(
            parse_formula("a | b & c -> d -> e").unwrap(),
            Formula::implies(
                Formula::or(a("a"), Formula::and(a("b"), a("c"))),
                Formula::implies(a("d"), a("e"))
            )
        );
        assert_eq!(
            parse_formula("a & b U c").unwrap(),
            Formula::and(a("a"), Formula::until(a("b"), a("c")))
        );
        assert_eq!(
            parse_formula("a U b U c").unwrap(),
            Formula::until(a("a"), Formula::until(a("b"), a("c")))
        );
        assert_eq!(
            parse_formula("¬a ∧ F b ∨ c → G d").unwrap(),
            parse_formula("((!a & F(b)) | c) -> G(d)").unwrap()
        );
    }

    #[test]
    fn syntax_errors_report_position() {
        match parse_formula("F(a & )") {
            Err(Error::FormulaSyntax { position, .. }) => assert_eq!(position, 6),
            other => panic!("{other:?}"),
        }
        match parse_formula("a b") {
            Err(Error::FormulaSyntax { position, .. }) => assert_eq!(position, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_formula("\"open").is_err());
        assert!(parse_formula("").is_err());
        assert!(parse_formula("a - b").is_err());
    }
}
