//! A tiny drawing language standing in for diagram code.
//!
//! A scene is a list of `point <name>` and `segment <name> <name>`
//! statements. An auxiliary construction is a block of such statements
//! written in the reasoning trace; it counts only if it parses, references
//! declared points, and adds at least one statement the base scene lacks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::vocab::{TokenId, Vocab};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Statement {
    Point(u8),
    Segment(u8, u8),
}

impl fmt::Display for Statement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statement::Point(p) => write!(f, "point P{p}"),
            Statement::Segment(a, b) => write!(f, "segment P{a} P{b}"),
        }
    }
}

impl FromStr for Statement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let words: Vec<&str> = s.split_whitespace().collect();
        let point = |w: &str| -> Result<u8> {
            w.strip_prefix('P')
                .and_then(|n| n.parse::<u8>().ok())
                .filter(|&n| (n as usize) < crate::vocab::NUM_POINTS)
                .ok_or_else(|| Error::InvalidScene(format!("bad point name `{w}`")))
        };
        match words.as_slice() {
            ["point", p] => Ok(Statement::Point(point(p)?)),
            ["segment", a, b] => Ok(Statement::Segment(point(a)?, point(b)?)),
            _ => Err(Error::InvalidScene(format!("cannot parse statement `{s}`"))),
        }
    }
}

impl Serialize for Statement {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Statement {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bitmask over unordered point pairs, indexed by `pair_bit`.
pub(crate) type SegmentSet = u64;

pub(crate) fn pair_bit(a: u8, b: u8) -> u64 {
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    1u64 << (lo as u32 * 8 + hi as u32)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct SceneProgram {
    statements: Vec<Statement>,
}

impl SceneProgram {
    /// Validates that segments only reference earlier points, points are not
    /// declared twice and no segment is degenerate.
    pub fn new(statements: Vec<Statement>) -> Result<Self> {
        let mut declared = 0u8;
        for st in &statements {
            match *st {
                Statement::Point(p) => {
                    if declared & (1 << p) != 0 {
                        return Err(Error::InvalidScene(format!("point P{p} declared twice")));
                    }
                    declared |= 1 << p;
                }
                Statement::Segment(a, b) => {
                    for p in [a, b] {
                        if declared & (1 << p) == 0 {
                            return Err(Error::InvalidScene(format!("segment references undeclared point P{p}")));
                        }
                    }
                    if a == b {
                        return Err(Error::InvalidScene(format!("degenerate segment P{a} P{a}")));
                    }
                }
            }
        }
        Ok(Self { statements })
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    /// Bitmask of declared point indices.
    pub fn declared_points(&self) -> u8 {
        self.statements.iter().fold(0u8, |acc, st| match *st {
            Statement::Point(p) => acc | (1 << p),
            Statement::Segment(..) => acc,
        })
    }

    pub(crate) fn segment_set(&self) -> SegmentSet {
        self.statements.iter().fold(0, |acc, st| match *st {
            Statement::Segment(a, b) => acc | pair_bit(a, b),
            Statement::Point(_) => acc,
        })
    }

    pub fn to_tokens(&self, vocab: &Vocab) -> Vec<TokenId> {
        statements_to_tokens(&self.statements, vocab)
    }
}

impl<'de> Deserialize<'de> for SceneProgram {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let statements = Vec::<Statement>::deserialize(d)?;
        SceneProgram::new(statements).map_err(serde::de::Error::custom)
    }
}

/// Renders statements as DSL tokens, separated by `,`.
pub fn statements_to_tokens(statements: &[Statement], vocab: &Vocab) -> Vec<TokenId> {
    let mut out = Vec::new();
    for (i, st) in statements.iter().enumerate() {
        if i > 0 {
            out.push(vocab.dsl.comma);
        }
        match *st {
            Statement::Point(p) => {
                out.push(vocab.dsl.point);
                out.push(vocab.point(p as usize));
            }
            Statement::Segment(a, b) => {
                out.push(vocab.dsl.segment);
                out.push(vocab.point(a as usize));
                out.push(vocab.point(b as usize));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "reason", content = "detail")]
pub enum AuxInvalid {
    Empty,
    ParseError(String),
    UndeclaredPoint(u8),
    NoNewStatement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AuxValidity {
    Valid,
    Invalid(AuxInvalid),
}

impl AuxValidity {
    pub fn is_valid(&self) -> bool {
        matches!(self, AuxValidity::Valid)
    }
}

/// Splits an aux block into statements. Tokens are the block interior, not
/// including `<aux>`/`</aux>`.
pub fn parse_statements(tokens: &[TokenId], vocab: &Vocab) -> Result<Vec<Statement>, AuxInvalid> {
    if tokens.is_empty() {
        return Err(AuxInvalid::Empty);
    }
    let point = |id: TokenId| -> Result<u8, AuxInvalid> {
        vocab
            .point_index(id)
            .map(|p| p as u8)
            .ok_or_else(|| AuxInvalid::ParseError(format!("expected a point name, found `{}`", vocab.surface(id))))
    };
    let mut statements = Vec::new();
    for chunk in tokens.split(|&t| t == vocab.dsl.comma) {
        let st = match chunk {
            [kw, p] if *kw == vocab.dsl.point => Statement::Point(point(*p)?),
            [kw, a, b] if *kw == vocab.dsl.segment => {
                let (a, b) = (point(*a)?, point(*b)?);
                if a == b {
                    return Err(AuxInvalid::ParseError(format!("degenerate segment P{a} P{a}")));
                }
                Statement::Segment(a, b)
            }
            [] => return Err(AuxInvalid::ParseError("empty statement".into())),
            other => {
                return Err(AuxInvalid::ParseError(format!(
                    "malformed statement `{}`",
                    vocab.render(other)
                )))
            }
        };
        statements.push(st);
    }
    Ok(statements)
}

/// Checks an auxiliary construction against the base scene.
pub fn validate_aux_dsl(aux_tokens: &[TokenId], vocab: &Vocab, base: &SceneProgram) -> AuxValidity {
    let statements = match parse_statements(aux_tokens, vocab) {
        Ok(s) => s,
        Err(reason) => return AuxValidity::Invalid(reason),
    };
    let mut declared = base.declared_points();
    let mut segments = base.segment_set();
    let mut any_new = false;
    for st in statements {
        match st {
            Statement::Point(p) => {
                if declared & (1 << p) == 0 {
                    declared |= 1 << p;
                    any_new = true;
                }
            }
            Statement::Segment(a, b) => {
                for p in [a, b] {
                    if declared & (1 << p) == 0 {
                        return AuxValidity::Invalid(AuxInvalid::UndeclaredPoint(p));
                    }
                }
                let bit = pair_bit(a, b);
                if segments & bit == 0 {
                    segments |= bit;
                    any_new = true;
                }
            }
        }
    }
    if any_new {
        AuxValidity::Valid
    } else {
        AuxValidity::Invalid(AuxInvalid::NoNewStatement)
    }
}
