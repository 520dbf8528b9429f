use super::ast::{AtomicPredicate, Formula, TimeInterval};
use super::MtlError;

/// Parses a formula in the concrete syntax produced by [`Formula`]'s
/// `Display` impl.
///
/// Grammar, loosest to tightest binding:
///
/// ```text
/// formula  := or ("U" interval? formula)?      right-associative
/// or       := and ("|" and)*
/// and      := unary ("&" unary)*
/// unary    := ("!" | "F" interval? | "G" interval?) unary | primary
/// primary  := "true" | "false" | ident | "(" formula ")"
/// interval := "[" int "," (int | "inf") "]"
/// ```
///
/// A bare `U`/`F`/`G` means the unbounded window `[0, inf)`. Identifiers are
/// resolved against `atoms`; `U`, `F`, `G`, `true`, `false` and `inf` are
/// reserved words and cannot name atoms.
pub fn parse_formula(text: &str, atoms: &[AtomicPredicate]) -> Result<Formula, MtlError> {
    let tokens = lex(text)?;
    let mut parser = Parser { tokens, pos: 0, atoms };
    let formula = parser.formula()?;
    match parser.peek() {
        Token::End => Ok(formula),
        other => Err(parser.error(format!("unexpected {} after end of formula", other.describe()))),
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Number(usize),
    True,
    False,
    Until,
    Eventually,
    Always,
    Inf,
    Bang,
    Amp,
    Pipe,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    End,
}

impl Token {
    fn describe(&self) -> String {
        match self {
            Token::Ident(s) => format!("identifier `{s}`"),
            Token::Number(n) => format!("number `{n}`"),
            Token::True => "`true`".to_string(),
            Token::False => "`false`".to_string(),
            Token::Until => "`U`".to_string(),
            Token::Eventually => "`F`".to_string(),
            Token::Always => "`G`".to_string(),
            Token::Inf => "`inf`".to_string(),
            Token::Bang => "`!`".to_string(),
            Token::Amp => "`&`".to_string(),
            Token::Pipe => "`|`".to_string(),
            Token::LParen => "`(`".to_string(),
            Token::RParen => "`)`".to_string(),
            Token::LBracket => "`[`".to_string(),
            Token::RBracket => "`]`".to_string(),
            Token::Comma => "`,`".to_string(),
            Token::End => "end of input".to_string(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(usize, Token)>, MtlError> {
    let bytes = text.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let tok = match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
                continue;
            }
            b'!' => Token::Bang,
            b'&' => Token::Amp,
            b'|' => Token::Pipe,
            b'(' => Token::LParen,
            b')' => Token::RParen,
            b'[' => Token::LBracket,
            b']' => Token::RBracket,
            b',' => Token::Comma,
            b'0'..=b'9' => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let digits = &text[start..i];
                let value = digits.parse::<usize>().map_err(|_| MtlError::Parse {
                    pos: start,
                    msg: format!("number `{digits}` out of range"),
                })?;
                tokens.push((start, Token::Number(value)));
                continue;
            }
            b'a'..=b'z' | b'A'..=b'Z' | b'_' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                let word = &text[start..i];
                let tok = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    "U" => Token::Until,
                    "F" => Token::Eventually,
                    "G" => Token::Always,
                    "inf" => Token::Inf,
                    _ => Token::Ident(word.to_string()),
                };
                tokens.push((start, tok));
                continue;
            }
            _ => {
                return Err(MtlError::Parse {
                    pos: i,
                    msg: format!("unexpected character `{}`", &text[i..i + 1]),
                })
            }
        };
        tokens.push((i, tok));
        i += 1;
    }
    tokens.push((bytes.len(), Token::End));
    Ok(tokens)
}

struct Parser<'a> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    atoms: &'a [AtomicPredicate],
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos].1
    }

    fn bump(&mut self) -> Token {
        let tok = self.tokens[self.pos].1.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn error(&self, msg: String) -> MtlError {
        MtlError::Parse { pos: self.tokens[self.pos].0, msg }
    }

    fn expect(&mut self, want: Token) -> Result<(), MtlError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(self.error(format!(
                "expected {}, found {}",
                want.describe(),
                self.peek().describe()
            )))
        }
    }

    fn formula(&mut self) -> Result<Formula, MtlError> {
        let lhs = self.or()?;
        if *self.peek() == Token::Until {
            self.bump();
            let interval = self.optional_interval()?;
            let rhs = self.formula()?;
            Ok(Formula::until(interval, lhs, rhs))
        } else {
            Ok(lhs)
        }
    }

    fn or(&mut self) -> Result<Formula, MtlError> {
        let mut children = vec![self.and()?];
        while *self.peek() == Token::Pipe {
            self.bump();
            children.push(self.and()?);
        }
        Ok(Formula::or(children))
    }

    fn and(&mut self) -> Result<Formula, MtlError> {
        let mut children = vec![self.unary()?];
        while *self.peek() == Token::Amp {
            self.bump();
            children.push(self.unary()?);
        }
        Ok(Formula::and(children))
    }

    fn unary(&mut self) -> Result<Formula, MtlError> {
        match self.peek() {
            Token::Bang => {
                self.bump();
                Ok(self.unary()?.not())
            }
            Token::Eventually => {
                self.bump();
                let interval = self.optional_interval()?;
                Ok(Formula::eventually(interval, self.unary()?))
            }
            Token::Always => {
                self.bump();
                let interval = self.optional_interval()?;
                Ok(Formula::always(interval, self.unary()?))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Formula, MtlError> {
        match self.peek().clone() {
            Token::True => {
                self.bump();
                Ok(Formula::True)
            }
            Token::False => {
                self.bump();
                Ok(Formula::False)
            }
            Token::LParen => {
                self.bump();
                let inner = self.formula()?;
                self.expect(Token::RParen)?;
                Ok(inner)
            }
            Token::Ident(name) => {
                let pred = self
                    .atoms
                    .iter()
                    .find(|p| p.id == name)
                    .cloned()
                    .ok_or_else(|| MtlError::UnknownAtom(name.clone()))?;
                self.bump();
                Ok(Formula::Atom(pred))
            }
            other => Err(self.error(format!("expected a formula, found {}", other.describe()))),
        }
    }

    fn optional_interval(&mut self) -> Result<TimeInterval, MtlError> {
        if *self.peek() != Token::LBracket {
            return Ok(TimeInterval::all());
        }
        self.bump();
        let lo = match self.bump() {
            Token::Number(n) => n,
            other => {
                return Err(self.error(format!(
                    "expected interval lower bound, found {}",
                    other.describe()
                )))
            }
        };
        self.expect(Token::Comma)?;
        let hi = match self.bump() {
            Token::Number(n) => Some(n),
            Token::Inf => None,
            other => {
                return Err(self.error(format!(
                    "expected interval upper bound or `inf`, found {}",
                    other.describe()
                )))
            }
        };
        self.expect(Token::RBracket)?;
        match hi {
            Some(hi) => TimeInterval::bounded(lo, hi),
            None => Ok(TimeInterval::unbounded(lo)),
        }
    }
}
