//! Boolean projection expressions over parameter names.
//!
//! Grammar, loosest binding first; all binary operators are left-associative:
//!
//! ```text
//! expr    := or   (("implies" | "equiv") or)*
//! or      := xor  ("or" xor)*
//! xor     := nand ("xor" nand)*
//! nand    := and  (("nand" | "nor") and)*
//! and     := unary ("and" unary)*
//! unary   := "not" unary | "(" expr ")" | IDENT
//! ```
//!
//! Keywords are case-insensitive. `Complete` is a keyword that must form the
//! whole expression.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "detail", rename_all = "camelCase")]
pub enum ParseErrorKind {
    Empty,
    UnknownIdentifier(String),
    SliceAxis(String),
    UnexpectedToken(String),
    UnexpectedEnd,
    CompleteNotAlone,
}

/// Parse failure at a byte offset into the expression text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
pub struct ParseError {
    pub position: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ParseErrorKind::Empty => write!(f, "empty expression"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier {s:?}"),
            ParseErrorKind::SliceAxis(s) => write!(f, "slice axis in expression: {s:?}"),
            ParseErrorKind::UnexpectedToken(s) => write!(f, "unexpected token {s:?}"),
            ParseErrorKind::UnexpectedEnd => write!(f, "unexpected end of expression"),
            ParseErrorKind::CompleteNotAlone => {
                write!(f, "`Complete` must be the whole expression")
            }
        }?;
        write!(f, " at position {}", self.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    And,
    Or,
    Xor,
    Nand,
    Nor,
    Implies,
    Equiv,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 7] = [
        BinaryOp::And,
        BinaryOp::Or,
        BinaryOp::Xor,
        BinaryOp::Nand,
        BinaryOp::Nor,
        BinaryOp::Implies,
        BinaryOp::Equiv,
    ];

    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            BinaryOp::And => a && b,
            BinaryOp::Or => a || b,
            BinaryOp::Xor => a != b,
            BinaryOp::Nand => !(a && b),
            BinaryOp::Nor => !(a || b),
            BinaryOp::Implies => !a || b,
            BinaryOp::Equiv => a == b,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            BinaryOp::And => "and",
            BinaryOp::Or => "or",
            BinaryOp::Xor => "xor",
            BinaryOp::Nand => "nand",
            BinaryOp::Nor => "nor",
            BinaryOp::Implies => "implies",
            BinaryOp::Equiv => "equiv",
        }
    }

    /// Binding level; higher binds tighter.
    fn level(self) -> u8 {
        match self {
            BinaryOp::Implies | BinaryOp::Equiv => 0,
            BinaryOp::Or => 1,
            BinaryOp::Xor => 2,
            BinaryOp::Nand | BinaryOp::Nor => 3,
            BinaryOp::And => 4,
        }
    }
}

/// Expression tree. Atoms hold ensemble parameter indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ProjectionExpr {
    Complete,
    Atom(usize),
    Not(Box<ProjectionExpr>),
    Binary(BinaryOp, Box<ProjectionExpr>, Box<ProjectionExpr>),
}

impl ProjectionExpr {
    pub fn binary(op: BinaryOp, a: ProjectionExpr, b: ProjectionExpr) -> Self {
        ProjectionExpr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn negate(a: ProjectionExpr) -> Self {
        ProjectionExpr::Not(Box::new(a))
    }

    /// Evaluates with `atom` supplying the truth value of each parameter atom
    /// and `complete` the value of the `Complete` keyword.
    pub fn eval(&self, atom: &impl Fn(usize) -> bool, complete: bool) -> bool {
        match self {
            ProjectionExpr::Complete => complete,
            ProjectionExpr::Atom(k) => atom(*k),
            ProjectionExpr::Not(a) => !a.eval(atom, complete),
            ProjectionExpr::Binary(op, a, b) => op.apply(a.eval(atom, complete), b.eval(atom, complete)),
        }
    }

    /// Distinct atom parameters in ascending order.
    pub fn atoms(&self) -> Vec<usize> {
        fn walk(e: &ProjectionExpr, out: &mut Vec<usize>) {
            match e {
                ProjectionExpr::Complete => {}
                ProjectionExpr::Atom(k) => out.push(*k),
                ProjectionExpr::Not(a) => walk(a, out),
                ProjectionExpr::Binary(_, a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Fully parenthesized text using the given parameter names.
    pub fn to_text(&self, names: &[String]) -> String {
        match self {
            ProjectionExpr::Complete => "Complete".into(),
            ProjectionExpr::Atom(k) => names[*k].clone(),
            ProjectionExpr::Not(a) => format!("not ({})", a.to_text(names)),
            ProjectionExpr::Binary(op, a, b) => {
                format!("({}) {} ({})", a.to_text(names), op.keyword(), b.to_text(names))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    LParen,
    RParen,
    Not,
    Complete,
    Op(BinaryOp),
    Ident(String),
}

fn tokenize(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(pos, ch)) = chars.peek() {
        if ch.is_whitespace() {
            chars.next();
        } else if ch == '(' {
            out.push((pos, Tok::LParen));
            chars.next();
        } else if ch == ')' {
            out.push((pos, Tok::RParen));
            chars.next();
        } else if ch.is_alphanumeric() || ch == '_' {
            let mut end = pos;
            while let Some(&(p, c)) = chars.peek() {
                if c.is_alphanumeric() || c == '_' || c == '.' || c == '-' {
                    end = p + c.len_utf8();
                    chars.next();
                } else {
                    break;
                }
            }
            let word = &text[pos..end];
            let tok = match word.to_ascii_lowercase().as_str() {
                "not" => Tok::Not,
                "complete" => Tok::Complete,
                "and" => Tok::Op(BinaryOp::And),
                "or" => Tok::Op(BinaryOp::Or),
                "xor" => Tok::Op(BinaryOp::Xor),
                "nand" => Tok::Op(BinaryOp::Nand),
                "nor" => Tok::Op(BinaryOp::Nor),
                "implies" => Tok::Op(BinaryOp::Implies),
                "equiv" => Tok::Op(BinaryOp::Equiv),
                _ => Tok::Ident(word.to_string()),
            };
            out.push((pos, tok));
        } else {
            return Err(ParseError {
                position: pos,
                kind: ParseErrorKind::UnexpectedToken(ch.to_string()),
            });
        }
    }
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(usize, Tok)>,
    at: usize,
    end: usize,
    names: &'a [String],
    slice_axes: (usize, usize),
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.toks.get(self.at).map_or(self.end, |(p, _)| *p)
    }

    fn error(&self, kind: ParseErrorKind) -> ParseError {
        ParseError {
            position: self.position(),
            kind,
        }
    }

    fn unexpected(&self) -> ParseError {
        match self.toks.get(self.at) {
            None => self.error(ParseErrorKind::UnexpectedEnd),
            Some((_, t)) => self.error(ParseErrorKind::UnexpectedToken(match t {
                Tok::LParen => "(".into(),
                Tok::RParen => ")".into(),
                Tok::Not => "not".into(),
                Tok::Complete => "Complete".into(),
                Tok::Op(op) => op.keyword().into(),
                Tok::Ident(s) => s.clone(),
            })),
        }
    }

    fn binary(&mut self, level: u8) -> Result<ProjectionExpr, ParseError> {
        if level > 4 {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        while let Some(Tok::Op(op)) = self.peek() {
            let op = *op;
            if op.level() != level {
                break;
            }
            self.at += 1;
            let rhs = self.binary(level + 1)?;
            lhs = ProjectionExpr::binary(op, lhs, rhs);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<ProjectionExpr, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Not) => {
                self.at += 1;
                Ok(ProjectionExpr::negate(self.unary()?))
            }
            Some(Tok::LParen) => {
                self.at += 1;
                let inner = self.binary(0)?;
                if self.peek() != Some(&Tok::RParen) {
                    return Err(self.unexpected());
                }
                self.at += 1;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => {
                let k = self
                    .names
                    .iter()
                    .position(|n| *n == name)
                    .or_else(|| {
                        let mut hits = self
                            .names
                            .iter()
                            .enumerate()
                            .filter(|(_, n)| n.eq_ignore_ascii_case(&name));
                        match (hits.next(), hits.next()) {
                            (Some((k, _)), None) => Some(k),
                            _ => None,
                        }
                    })
                    .ok_or_else(|| self.error(ParseErrorKind::UnknownIdentifier(name.clone())))?;
                if k == self.slice_axes.0 || k == self.slice_axes.1 {
                    return Err(self.error(ParseErrorKind::SliceAxis(name)));
                }
                self.at += 1;
                Ok(ProjectionExpr::Atom(k))
            }
            Some(Tok::Complete) => Err(self.error(ParseErrorKind::CompleteNotAlone)),
            _ => Err(self.unexpected()),
        }
    }
}

/// Parses `text` against the ensemble's parameter names. Atoms naming either
/// slice axis are rejected.
pub fn parse_projection_expr(
    text: &str,
    slice_axes: (usize, usize),
    parameter_names: &[String],
) -> Result<ProjectionExpr, ParseError> {
    let toks = tokenize(text)?;
    if toks.is_empty() {
        return Err(ParseError {
            position: 0,
            kind: ParseErrorKind::Empty,
        });
    }
    if let Some((pos, _)) = toks.iter().find(|(_, t)| *t == Tok::Complete) {
        if toks.len() == 1 {
            return Ok(ProjectionExpr::Complete);
        }
        return Err(ParseError {
            position: *pos,
            kind: ParseErrorKind::CompleteNotAlone,
        });
    }
    let mut p = Parser {
        toks,
        at: 0,
        end: text.len(),
        names: parameter_names,
        slice_axes,
    };
    let expr = p.binary(0)?;
    if p.at < p.toks.len() {
        return Err(p.unexpected());
    }
    Ok(expr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProjectionExpr::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn parse(text: &str) -> Result<ProjectionExpr, ParseError> {
        parse_projection_expr(text, (1, 2), &names(&["a", "b", "c", "d", "e"]))
    }

    #[test]
    fn or_of_atoms() {
        let n = names(&["P1", "P2", "P3", "P4"]);
        let e = parse_projection_expr("P3 or P4", (0, 1), &n).unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Or, Atom(2), Atom(3)));
    }

    #[test]
    fn not_of_group() {
        let n = names(&["a", "b", "c", "d"]);
        let e = parse_projection_expr("not (c and d)", (0, 1), &n).unwrap();
        assert_eq!(e, ProjectionExpr::negate(ProjectionExpr::binary(BinaryOp::And, Atom(2), Atom(3))));
    }

    #[test]
    fn slice_axis_rejected_with_position() {
        let n = names(&["a", "b", "c", "d"]);
        let err = parse_projection_expr("b or c", (1, 2), &n).unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::SliceAxis("b".into()));
        assert_eq!(err.position, 0);
        assert!(err.to_string().contains("slice axis in expression"));
        let err = parse_projection_expr("d or c", (1, 2), &n).unwrap_err();
        assert_eq!(err.position, 5);
    }

    #[test]
    fn precedence_ladder() {
        // not > and > nand/nor > xor > or > implies/equiv
        let e = parse("a or d and e").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Or, Atom(0), ProjectionExpr::binary(BinaryOp::And, Atom(3), Atom(4))));
        let e = parse("a xor d or e").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Or, ProjectionExpr::binary(BinaryOp::Xor, Atom(0), Atom(3)), Atom(4)));
        let e = parse("a nand d xor e").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Xor, ProjectionExpr::binary(BinaryOp::Nand, Atom(0), Atom(3)), Atom(4)));
        let e = parse("a implies d or e").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Implies, Atom(0), ProjectionExpr::binary(BinaryOp::Or, Atom(3), Atom(4))));
        let e = parse("not a and d").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::And, ProjectionExpr::negate(Atom(0)), Atom(3)));
        let e = parse("a nor d nand e").unwrap();
        assert_eq!(e, ProjectionExpr::binary(BinaryOp::Nand, ProjectionExpr::binary(BinaryOp::Nor, Atom(0), Atom(3)), Atom(4)));
    }

    #[test]
    fn keywords_case_insensitive() {
        assert_eq!(parse("A OR D").unwrap(), parse("a or d").unwrap());
        assert_eq!(parse("NoT a").unwrap(), ProjectionExpr::negate(Atom(0)));
        assert_eq!(parse("complete").unwrap(), Complete);
        assert_eq!(parse("  COMPLETE ").unwrap(), Complete);
    }

    #[test]
    fn errors() {
        assert_eq!(parse("").unwrap_err().kind, ParseErrorKind::Empty);
        assert_eq!(parse("a or").unwrap_err(), ParseError { position: 4, kind: ParseErrorKind::UnexpectedEnd });
        assert_eq!(parse("a or zz").unwrap_err().kind, ParseErrorKind::UnknownIdentifier("zz".into()));
        assert_eq!(parse("(a or d").unwrap_err().kind, ParseErrorKind::UnexpectedEnd);
        assert_eq!(parse("a d").unwrap_err().kind, ParseErrorKind::UnexpectedToken("d".into()));
        assert_eq!(parse("a & d").unwrap_err().position, 2);
        let err = parse("Complete or a").unwrap_err();
        assert_eq!(err.kind, ParseErrorKind::CompleteNotAlone);
        assert_eq!(err.position, 0);
    }

    #[test]
    fn round_trip_through_text() {
        let n = names(&["a", "b", "c", "d", "e"]);
        for text in ["a or d and not e", "not (a xor d) equiv e", "a implies d nor e"] {
            let e = parse(text).unwrap();
            assert_eq!(parse(&e.to_text(&n)).unwrap(), e);
        }
    }

    #[test]
    fn operator_truth_tables() {
        let tt = |op: BinaryOp| [(false, false), (false, true), (true, false), (true, true)].map(|(a, b)| op.apply(a, b));
        assert_eq!(tt(BinaryOp::And), [false, false, false, true]);
        assert_eq!(tt(BinaryOp::Or), [false, true, true, true]);
        assert_eq!(tt(BinaryOp::Xor), [false, true, true, false]);
        assert_eq!(tt(BinaryOp::Nand), [true, true, true, false]);
        assert_eq!(tt(BinaryOp::Nor), [true, false, false, false]);
        assert_eq!(tt(BinaryOp::Implies), [true, true, false, true]);
        assert_eq!(tt(BinaryOp::Equiv), [true, false, false, true]);
    }
}
