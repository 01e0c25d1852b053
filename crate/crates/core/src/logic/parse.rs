//! Text syntax for formulas, with an exact print/parse round trip.
//!
//! Grammar (whitespace-insensitive):
//! `q` (decimal or `n/d` rational), `obs`, `min(f,g)`, `max(f,g)`, `1-f`,
//! `f (-) q`, `f (+) q`, `<t> f` (kernel modality), `int(g)` (path
//! integral), `f @ t` (evaluate along the path). Unary forms bind to the
//! smallest following formula; `(-)`/`(+)` chains associate leftwards.
//! State-level `max` and `(+)` are sugar for their complement expansions.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use super::{LogicError, Rational, StateFormula, TrajectoryFormula};

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(Rational),
    Obs,
    Min,
    Max,
    Int,
    LParen,
    RParen,
    Comma,
    Less,
    Greater,
    At,
    Dash,
    OpMinus,
    OpPlus,
}

struct Lexer;

impl Lexer {
    fn run(text: &str) -> Result<Vec<(usize, Token)>, LogicError> {
        let bytes = text.as_bytes();
        let mut tokens = Vec::new();
        let mut pos = 0;
        while pos < bytes.len() {
            let b = bytes[pos];
            match b {
                b' ' | b'\t' | b'\n' | b'\r' => pos += 1,
                b'(' => {
                    if pos + 2 < bytes.len()
                        && (bytes[pos + 1] == b'-' || bytes[pos + 1] == b'+')
                        && bytes[pos + 2] == b')'
                    {
                        let token = if bytes[pos + 1] == b'-' {
                            Token::OpMinus
                        } else {
                            Token::OpPlus
                        };
                        tokens.push((pos, token));
                        pos += 3;
                    } else {
                        tokens.push((pos, Token::LParen));
                        pos += 1;
                    }
                }
                b')' => {
                    tokens.push((pos, Token::RParen));
                    pos += 1;
                }
                b',' => {
                    tokens.push((pos, Token::Comma));
                    pos += 1;
                }
                b'<' => {
                    tokens.push((pos, Token::Less));
                    pos += 1;
                }
                b'>' => {
                    tokens.push((pos, Token::Greater));
                    pos += 1;
                }
                b'@' => {
                    tokens.push((pos, Token::At));
                    pos += 1;
                }
                b'-' => {
                    tokens.push((pos, Token::Dash));
                    pos += 1;
                }
                b'0'..=b'9' => {
                    let start = pos;
                    while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                        pos += 1;
                    }
                    if pos < bytes.len() && (bytes[pos] == b'.' || bytes[pos] == b'/') {
                        pos += 1;
                        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                            pos += 1;
                        }
                    }
                    let slice = &text[start..pos];
                    let value = Rational::parse(slice).ok_or_else(|| LogicError::Parse {
                        pos: start,
                        message: format!("invalid number `{slice}`"),
                    })?;
                    tokens.push((start, Token::Number(value)));
                }
                b'a'..=b'z' => {
                    let start = pos;
                    while pos < bytes.len() && bytes[pos].is_ascii_lowercase() {
                        pos += 1;
                    }
                    let word = &text[start..pos];
                    let token = match word {
                        "obs" => Token::Obs,
                        "min" => Token::Min,
                        "max" => Token::Max,
                        "int" => Token::Int,
                        other => {
                            return Err(LogicError::Parse {
                                pos: start,
                                message: format!("unknown word `{other}`"),
                            })
                        }
                    };
                    tokens.push((start, token));
                }
                other => {
                    return Err(LogicError::Parse {
                        pos,
                        message: format!("unexpected byte `{}`", other as char),
                    })
                }
            }
        }
        Ok(tokens)
    }
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    cursor: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.cursor).map(|(_, t)| t)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.cursor)
            .map(|(p, _)| *p)
            .unwrap_or(self.end)
    }

    fn advance(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.cursor).map(|(_, t)| t.clone());
        if token.is_some() {
            self.cursor += 1;
        }
        token
    }

    fn fail<T>(&self, message: &str) -> Result<T, LogicError> {
        Err(LogicError::Parse {
            pos: self.pos(),
            message: message.to_string(),
        })
    }

    fn expect(&mut self, want: Token, what: &str) -> Result<(), LogicError> {
        match self.peek() {
            Some(token) if *token == want => {
                self.advance();
                Ok(())
            }
            _ => self.fail(&format!("expected {what}")),
        }
    }

    fn unit_constant(&mut self) -> Result<Rational, LogicError> {
        match self.peek() {
            Some(Token::Number(q)) => {
                let q = *q;
                self.advance();
                if q.in_unit() {
                    Ok(q)
                } else {
                    Err(LogicError::ConstantOutOfRange(q))
                }
            }
            _ => self.fail("expected a constant in [0, 1]"),
        }
    }

    fn time_stamp(&mut self) -> Result<Rational, LogicError> {
        match self.peek() {
            Some(Token::Number(t)) => {
                let t = *t;
                self.advance();
                Ok(t)
            }
            _ => self.fail("expected a time stamp"),
        }
    }

    fn state_expr(&mut self) -> Result<StateFormula, LogicError> {
        let mut formula = self.state_primary()?;
        loop {
            match self.peek() {
                Some(Token::OpMinus) => {
                    self.advance();
                    let q = self.unit_constant()?;
                    formula = StateFormula::Minus(Box::new(formula), q);
                }
                Some(Token::OpPlus) => {
                    self.advance();
                    let q = self.unit_constant()?;
                    formula = formula.oplus(q);
                }
                _ => return Ok(formula),
            }
        }
    }

    fn state_primary(&mut self) -> Result<StateFormula, LogicError> {
        if self.peek().is_none() {
            return self.fail("expected a state formula");
        }
        match self.advance() {
            Some(Token::Number(q)) => {
                if q == Rational::ONE && self.peek() == Some(&Token::Dash) {
                    self.advance();
                    let inner = self.state_primary()?;
                    Ok(StateFormula::Complement(Box::new(inner)))
                } else if q.in_unit() {
                    Ok(StateFormula::Const(q))
                } else {
                    Err(LogicError::ConstantOutOfRange(q))
                }
            }
            Some(Token::Obs) => Ok(StateFormula::Obs),
            Some(Token::Min) => {
                self.expect(Token::LParen, "`(` after min")?;
                let a = self.state_expr()?;
                self.expect(Token::Comma, "`,` between arguments")?;
                let b = self.state_expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(StateFormula::Min(Box::new(a), Box::new(b)))
            }
            Some(Token::Max) => {
                self.expect(Token::LParen, "`(` after max")?;
                let a = self.state_expr()?;
                self.expect(Token::Comma, "`,` between arguments")?;
                let b = self.state_expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(a.max(b))
            }
            Some(Token::Int) => {
                self.expect(Token::LParen, "`(` after int")?;
                let g = self.trajectory_expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(StateFormula::Integral(Box::new(g)))
            }
            Some(Token::Less) => {
                let t = self.time_stamp()?;
                self.expect(Token::Greater, "closing `>`")?;
                let f = self.state_primary()?;
                Ok(StateFormula::Diamond(t, Box::new(f)))
            }
            Some(Token::LParen) => {
                let f = self.state_expr()?;
                self.expect(Token::RParen, "closing `)`")?;
                Ok(f)
            }
            _ => {
                self.cursor = self.cursor.saturating_sub(1);
                self.fail("expected a state formula")
            }
        }
    }

    fn trajectory_expr(&mut self) -> Result<TrajectoryFormula, LogicError> {
        let mut formula = self.trajectory_primary()?;
        loop {
            match self.peek() {
                Some(Token::OpMinus) => {
                    self.advance();
                    let q = self.unit_constant()?;
                    formula = TrajectoryFormula::Minus(Box::new(formula), q);
                }
                Some(Token::OpPlus) => {
                    self.advance();
                    let q = self.unit_constant()?;
                    formula = TrajectoryFormula::Plus(Box::new(formula), q);
                }
                _ => return Ok(formula),
            }
        }
    }

    fn trajectory_primary(&mut self) -> Result<TrajectoryFormula, LogicError> {
        // min/max and parentheses are ambiguous between the two sorts; try
        // the trajectory reading first and fall back to a state formula
        // followed by `@`.
        let saved = self.cursor;
        match self.peek() {
            Some(Token::Min) | Some(Token::Max) => {
                let is_min = self.peek() == Some(&Token::Min);
                self.advance();
                let attempt = (|| -> Result<TrajectoryFormula, LogicError> {
                    self.expect(Token::LParen, "`(`")?;
                    let a = self.trajectory_expr()?;
                    self.expect(Token::Comma, "`,`")?;
                    let b = self.trajectory_expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(if is_min {
                        TrajectoryFormula::Min(Box::new(a), Box::new(b))
                    } else {
                        TrajectoryFormula::Max(Box::new(a), Box::new(b))
                    })
                })();
                match attempt {
                    Ok(out) => Ok(out),
                    Err(_) => {
                        self.cursor = saved;
                        self.state_then_at()
                    }
                }
            }
            Some(Token::LParen) => {
                self.advance();
                let attempt = (|| -> Result<TrajectoryFormula, LogicError> {
                    let g = self.trajectory_expr()?;
                    self.expect(Token::RParen, "`)`")?;
                    Ok(g)
                })();
                match attempt {
                    Ok(out) => Ok(out),
                    Err(_) => {
                        self.cursor = saved;
                        self.state_then_at()
                    }
                }
            }
            _ => self.state_then_at(),
        }
    }

    fn state_then_at(&mut self) -> Result<TrajectoryFormula, LogicError> {
        let f = self.state_expr()?;
        self.expect(Token::At, "`@ t` after a state formula")?;
        let t = self.time_stamp()?;
        Ok(TrajectoryFormula::EvalAt(Box::new(f), t))
    }

    fn finish(&self) -> Result<(), LogicError> {
        if self.cursor == self.tokens.len() {
            Ok(())
        } else {
            Err(LogicError::Parse {
                pos: self.pos(),
                message: "trailing input".to_string(),
            })
        }
    }
}

/// Parses a state formula; the whole input must be consumed.
pub fn parse_state_formula(text: &str) -> Result<StateFormula, LogicError> {
    let tokens = Lexer::run(text)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end: text.len(),
    };
    let formula = parser.state_expr()?;
    parser.finish()?;
    Ok(formula)
}

/// Parses a trajectory formula; the whole input must be consumed.
pub fn parse_trajectory_formula(text: &str) -> Result<TrajectoryFormula, LogicError> {
    let tokens = Lexer::run(text)?;
    let mut parser = Parser {
        tokens,
        cursor: 0,
        end: text.len(),
    };
    let formula = parser.trajectory_expr()?;
    parser.finish()?;
    Ok(formula)
}

fn state_is_primary(f: &StateFormula) -> bool {
    !matches!(f, StateFormula::Minus(_, _))
}

impl core::fmt::Display for StateFormula {
    fn fmt(&self, out: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StateFormula::Const(q) => write!(out, "{q}"),
            StateFormula::Obs => write!(out, "obs"),
            StateFormula::Min(a, b) => write!(out, "min({a}, {b})"),
            StateFormula::Complement(f) => {
                if state_is_primary(f) {
                    write!(out, "1-{f}")
                } else {
                    write!(out, "1-({f})")
                }
            }
            StateFormula::Minus(f, q) => write!(out, "{f} (-) {q}"),
            StateFormula::Diamond(t, f) => {
                if state_is_primary(f) {
                    write!(out, "<{t}> {f}")
                } else {
                    write!(out, "<{t}> ({f})")
                }
            }
            StateFormula::Integral(g) => write!(out, "int({g})"),
        }
    }
}

impl core::fmt::Display for TrajectoryFormula {
    fn fmt(&self, out: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            TrajectoryFormula::EvalAt(f, t) => {
                if state_is_primary(f) {
                    write!(out, "{f} @ {t}")
                } else {
                    write!(out, "({f}) @ {t}")
                }
            }
            TrajectoryFormula::Min(a, b) => write!(out, "min({a}, {b})"),
            TrajectoryFormula::Max(a, b) => write!(out, "max({a}, {b})"),
            // Postfix chains reparse left-associatively, so no parentheses.
            TrajectoryFormula::Minus(g, q) => write!(out, "{g} (-) {q}"),
            TrajectoryFormula::Plus(g, q) => write!(out, "{g} (+) {q}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn round_trip_state(text: &str) {
        let parsed = parse_state_formula(text).unwrap();
        let shown = format!("{parsed}");
        let again = parse_state_formula(&shown).unwrap();
        assert_eq!(parsed, again, "{text} -> {shown}");
    }

    #[test]
    fn parses_the_documented_forms() {
        round_trip_state("0.25");
        round_trip_state("obs");
        round_trip_state("min(obs, 0.5)");
        round_trip_state("max(obs, 0.5)");
        round_trip_state("1-obs");
        round_trip_state("obs (-) 0.125");
        round_trip_state("obs (+) 0.125");
        round_trip_state("<0.5> obs");
        round_trip_state("<3/2> (obs (-) 0.25)");
        round_trip_state("int(obs @ 1)");
        round_trip_state("int(min(obs @ 0, 0.5 @ 1) (-) 0.125)");
        round_trip_state("1-min(obs, 1-obs)");
        round_trip_state("int(max(obs @ 0.5, obs @ 1) (+) 0.25)");
    }

    #[test]
    fn whitespace_is_ignored() {
        let a = parse_state_formula("min( obs ,0.5 )").unwrap();
        let b = parse_state_formula("min(obs,0.5)").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn postfix_chains_associate_left() {
        let f = parse_state_formula("obs (-) 0.125 (-) 0.25").unwrap();
        match f {
            StateFormula::Minus(inner, q) => {
                assert_eq!(q, Rational::new(1, 4).unwrap());
                assert!(matches!(*inner, StateFormula::Minus(_, _)));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn diamond_binds_tightly() {
        let f = parse_state_formula("<1> obs (-) 0.5").unwrap();
        assert!(matches!(f, StateFormula::Minus(_, _)));
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_state_formula("obs obs").is_err());
        assert!(parse_state_formula("min(obs").is_err());
        assert!(parse_state_formula("2.5").is_err());
        assert!(parse_state_formula("").is_err());
    }

    #[test]
    fn state_min_inside_eval_at_round_trips() {
        let g = parse_trajectory_formula("min(obs, 0.5) @ 1").unwrap();
        assert!(matches!(g, TrajectoryFormula::EvalAt(_, _)));
        let shown = format!("{g}");
        assert_eq!(parse_trajectory_formula(&shown).unwrap(), g);
    }
}
