//! Closed token vocabulary shared by the verifier, the policy and the file
//! formats.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};

pub type TokenId = usize;

/// Number of answer symbols (`A0`..`A9`) in the standard vocabulary.
pub const NUM_ANSWER_SYMBOLS: usize = 10;
/// Number of point names (`P0`..`P7`) in the standard vocabulary.
pub const NUM_POINTS: usize = 8;
/// Filler words of the standard vocabulary; `f` is the first.
pub const FILLER_WORDS: &[&str] = &["f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    Structural,
    Answer,
    Dsl,
    Filler,
}

/// Ids of the structural tokens, resolved once at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Specials {
    pub think_open: TokenId,
    pub think_close: TokenId,
    pub answer_open: TokenId,
    pub answer_close: TokenId,
    pub aux_open: TokenId,
    pub aux_close: TokenId,
    pub eos: TokenId,
}

/// Ids of the drawing-language keywords.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DslWords {
    pub point: TokenId,
    pub segment: TokenId,
    pub comma: TokenId,
}

#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    roles: Vec<Role>,
    index: HashMap<String, TokenId>,
    answers: Vec<TokenId>,
    points: Vec<TokenId>,
    pub specials: Specials,
    pub dsl: DslWords,
}

const STRUCTURAL: [&str; 7] = [
    "<think>",
    "</think>",
    "<answer>",
    "</answer>",
    "<aux>",
    "</aux>",
    "<eos>",
];

impl Vocab {
    /// The vocabulary used throughout the crate: 7 structural tokens, answers
    /// `A0..A9`, the DSL words `point`, `segment`, `,`, points `P0..P7` and a
    /// single filler token `f`.
    pub fn standard() -> Self {
        let mut entries: Vec<(String, Role)> = STRUCTURAL.iter().map(|s| (s.to_string(), Role::Structural)).collect();
        entries.extend((0..NUM_ANSWER_SYMBOLS).map(|k| (format!("A{k}"), Role::Answer)));
        entries.push(("point".into(), Role::Dsl));
        entries.push(("segment".into(), Role::Dsl));
        entries.push((",".into(), Role::Dsl));
        entries.extend((0..NUM_POINTS).map(|k| (format!("P{k}"), Role::Dsl)));
        entries.extend(FILLER_WORDS.iter().map(|w| (w.to_string(), Role::Filler)));
        Self::new(entries).expect("standard vocabulary is well formed")
    }

    /// Builds a vocabulary from `(surface, role)` pairs in id order.
    ///
    /// All structural tokens, the DSL words and at least one answer symbol must
    /// be present. Answer symbols are recognised by the `A<k>` pattern and
    /// points by `P<k>`; their order in the list defines their index.
    pub fn new(entries: Vec<(String, Role)>) -> Result<Self> {
        if entries.len() > 64 {
            return Err(Error::InvalidConfig(format!(
                "vocabulary of {} tokens exceeds the 64-token limit",
                entries.len()
            )));
        }
        let mut index = HashMap::with_capacity(entries.len());
        let mut tokens = Vec::with_capacity(entries.len());
        let mut roles = Vec::with_capacity(entries.len());
        let mut answers = Vec::new();
        let mut points = Vec::new();
        for (id, (surface, role)) in entries.into_iter().enumerate() {
            if index.insert(surface.clone(), id).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "duplicate token surface form `{surface}`"
                )));
            }
            match role {
                Role::Answer => answers.push(id),
                Role::Dsl if is_point_name(&surface) => points.push(id),
                _ => {}
            }
            tokens.push(surface);
            roles.push(role);
        }
        let lookup = |s: &str, want: Role| -> Result<TokenId> {
            match index.get(s) {
                Some(&id) if roles[id] == want => Ok(id),
                Some(_) => Err(Error::InvalidConfig(format!("token `{s}` has the wrong role"))),
                None => Err(Error::InvalidConfig(format!("vocabulary lacks `{s}`"))),
            }
        };
        let specials = Specials {
            think_open: lookup("<think>", Role::Structural)?,
            think_close: lookup("</think>", Role::Structural)?,
            answer_open: lookup("<answer>", Role::Structural)?,
            answer_close: lookup("</answer>", Role::Structural)?,
            aux_open: lookup("<aux>", Role::Structural)?,
            aux_close: lookup("</aux>", Role::Structural)?,
            eos: lookup("<eos>", Role::Structural)?,
        };
        let dsl = DslWords {
            point: lookup("point", Role::Dsl)?,
            segment: lookup("segment", Role::Dsl)?,
            comma: lookup(",", Role::Dsl)?,
        };
        if answers.is_empty() {
            return Err(Error::InvalidConfig("vocabulary has no answer symbols".into()));
        }
        if points.len() > 8 {
            return Err(Error::InvalidConfig("at most 8 point names are supported".into()));
        }
        Ok(Self {
            tokens,
            roles,
            index,
            answers,
            points,
            specials,
            dsl,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surface(&self, id: TokenId) -> &str {
        &self.tokens[id]
    }

    pub fn role(&self, id: TokenId) -> Role {
        self.roles[id]
    }

    pub fn id(&self, surface: &str) -> Result<TokenId> {
        self.index
            .get(surface)
            .copied()
            .ok_or_else(|| Error::UnknownToken(surface.to_string()))
    }

    pub fn check(&self, id: TokenId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::InvalidToken {
                id,
                vocab_size: self.len(),
            })
        }
    }

    /// Token id of the `k`-th answer symbol.
    pub fn answer(&self, k: usize) -> TokenId {
        self.answers[k]
    }

    pub fn num_answers(&self) -> usize {
        self.answers.len()
    }

    /// Index of an answer token within the answer alphabet.
    pub fn answer_index(&self, id: TokenId) -> Option<usize> {
        self.answers.iter().position(|&a| a == id)
    }

    /// Token id of point `P<k>`.
    pub fn point(&self, k: usize) -> TokenId {
        self.points[k]
    }

    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    pub fn point_index(&self, id: TokenId) -> Option<usize> {
        self.points.iter().position(|&p| p == id)
    }

    pub fn filler_tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        (0..self.len()).filter(|&id| self.roles[id] == Role::Filler)
    }

    /// Parses whitespace-free surface forms into ids.
    pub fn encode<S: AsRef<str>>(&self, surfaces: &[S]) -> Result<Vec<TokenId>> {
        surfaces.iter().map(|s| self.id(s.as_ref())).collect()
    }

    /// Splits on whitespace and encodes. Handy in tests and examples.
    pub fn encode_str(&self, text: &str) -> Result<Vec<TokenId>> {
        text.split_whitespace().map(|s| self.id(s)).collect()
    }

    pub fn decode(&self, ids: &[TokenId]) -> Vec<String> {
        ids.iter().map(|&id| self.tokens[id].clone()).collect()
    }

    pub fn render(&self, ids: &[TokenId]) -> String {
        self.decode(ids).join(" ")
    }
}

impl Default for Vocab {
    fn default() -> Self {
        Self::standard()
    }
}

fn is_point_name(s: &str) -> bool {
    s.len() >= 2 && s.starts_with('P') && s[1..].chars().all(|c| c.is_ascii_digit())
}

/// A set of token ids, stored as a bitmask. Vocabularies are capped at 64
/// tokens so one word suffices.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct TokenSet(u64);

impl TokenSet {
    pub const EMPTY: TokenSet = TokenSet(0);

    pub fn all(vocab_size: usize) -> Self {
        if vocab_size >= 64 {
            TokenSet(u64::MAX)
        } else {
            TokenSet((1u64 << vocab_size) - 1)
        }
    }

    pub fn single(id: TokenId) -> Self {
        TokenSet(1u64 << id)
    }

    pub fn from_bits(bits: u64) -> Self {
        TokenSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn insert(&mut self, id: TokenId) {
        self.0 |= 1u64 << id;
    }

    pub fn remove(&mut self, id: TokenId) {
        self.0 &= !(1u64 << id);
    }

    pub fn contains(self, id: TokenId) -> bool {
        id < 64 && self.0 & (1u64 << id) != 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = TokenId> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let id = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(id)
            }
        })
    }
}

impl FromIterator<TokenId> for TokenSet {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        let mut set = TokenSet::EMPTY;
        for id in iter {
            set.insert(id);
        }
        set
    }
}

impl fmt::Debug for TokenSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_vocab_is_dense_and_unique() {
        let v = Vocab::standard();
        assert_eq!(v.len(), 29);
        for id in 0..v.len() {
            assert_eq!(v.id(v.surface(id)).unwrap(), id);
        }
        let eos_count = (0..v.len()).filter(|&i| v.surface(i) == "<eos>").count();
        assert_eq!(eos_count, 1);
        assert_eq!(v.num_answers(), 10);
        assert_eq!(v.num_points(), 8);
        assert_eq!(v.role(v.answer(3)), Role::Answer);
        assert_eq!(v.point_index(v.point(5)), Some(5));
    }

    #[test]
    fn duplicate_surface_rejected() {
        let mut entries: Vec<(String, Role)> = STRUCTURAL.iter().map(|s| (s.to_string(), Role::Structural)).collect();
        entries.push(("A0".into(), Role::Answer));
        entries.push(("A0".into(), Role::Answer));
        assert!(matches!(Vocab::new(entries), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn token_set_iterates_in_order() {
        let set: TokenSet = [5, 1, 9].into_iter().collect();
        assert_eq!(set.iter().collect::<Vec<_>>(), vec![1, 5, 9]);
        assert_eq!(set.len(), 3);
        assert!(set.contains(5) && !set.contains(2));
    }
}
