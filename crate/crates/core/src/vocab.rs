//! Token ↔ id mapping with reserved sentinels.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use crate::bag::TokenId;

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
/// Second unknown surface form used by the PTB preprocessing convention.
pub const UNK_SECONDARY: &str = "<UNK>";

/// How many unknown-token surface forms the vocabulary reserves.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UnknownMode {
    #[default]
    Single,
    /// Two distinct unknown tokens; both are ordinary vocabulary items and
    /// out-of-vocabulary words map to the first.
    Ptb,
}

impl UnknownMode {
    fn surfaces(self) -> &'static [&'static str] {
        match self {
            UnknownMode::Single => &[UNK],
            UnknownMode::Ptb => &[UNK, UNK_SECONDARY],
        }
    }

    pub fn reserved_count(self) -> usize {
        2 + self.surfaces().len()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VocabError {
    #[error("cannot build a vocabulary from an empty corpus")]
    EmptyCorpus,
    #[error("max_size {max_size} must exceed the {reserved} reserved tokens")]
    TooSmall { max_size: usize, reserved: usize },
    #[error("vocabulary line {line}: duplicate token {token:?}")]
    Duplicate { line: usize, token: String },
    #[error("vocabulary line {line}: expected reserved token {expected:?}, found {found:?}")]
    MissingReserved {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("vocabulary line {line}: empty or whitespace-bearing token")]
    BadToken { line: usize },
}

/// Bijection between surface forms and dense ids `0..len()`.
///
/// Reserved tokens always occupy the lowest ids: `<s>`, `</s>`, then the
/// unknown token(s).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: BTreeMap<String, TokenId>,
    mode: UnknownMode,
}

impl Vocabulary {
    /// Vocabulary with only the reserved tokens.
    pub fn new(mode: UnknownMode) -> Self {
        let mut vocab = Vocabulary {
            tokens: Vec::new(),
            ids: BTreeMap::new(),
            mode,
        };
        vocab.push(BOS);
        vocab.push(EOS);
        for unk in mode.surfaces() {
            vocab.push(unk);
        }
        vocab
    }

    /// Builds a vocabulary from reserved tokens followed by `words`, in order.
    /// Duplicates and reserved surface forms in `words` are skipped.
    pub fn from_words<'a, I>(mode: UnknownMode, words: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut vocab = Vocabulary::new(mode);
        for w in words {
            if !vocab.ids.contains_key(w) {
                vocab.push(w);
            }
        }
        vocab
    }

    fn push(&mut self, surface: &str) -> TokenId {
        let id = self.tokens.len() as TokenId;
        self.tokens.push(surface.to_string());
        self.ids.insert(surface.to_string(), id);
        id
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn mode(&self) -> UnknownMode {
        self.mode
    }

    pub fn bos(&self) -> TokenId {
        0
    }

    pub fn eos(&self) -> TokenId {
        1
    }

    /// The id out-of-vocabulary words map to.
    pub fn unk(&self) -> TokenId {
        2
    }

    pub fn unknown_ids(&self) -> Vec<TokenId> {
        (2..self.mode.reserved_count() as TokenId).collect()
    }

    pub fn reserved_count(&self) -> usize {
        self.mode.reserved_count()
    }

    pub fn is_reserved(&self, id: TokenId) -> bool {
        (id as usize) < self.reserved_count()
    }

    pub fn get(&self, surface: &str) -> Option<TokenId> {
        self.ids.get(surface).copied()
    }

    /// Id for `surface`, falling back to the unknown token.
    pub fn id(&self, surface: &str) -> TokenId {
        self.get(surface).unwrap_or(self.unk())
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, sentence: &str) -> Vec<TokenId> {
        sentence.split_whitespace().map(|w| self.id(w)).collect()
    }

    /// Space-joined surface forms; ids outside the vocabulary render as the unknown token.
    pub fn decode(&self, ids: &[TokenId]) -> String {
        let mut out = String::new();
        for (i, &id) in ids.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            out.push_str(self.token(id).unwrap_or(UNK));
        }
        out
    }

    /// Rank of each id under byte-wise lexicographic order of surface forms.
    pub fn collation_ranks(&self) -> Vec<u32> {
        let mut order: Vec<usize> = (0..self.tokens.len()).collect();
        order.sort_by(|&a, &b| self.tokens[a].as_bytes().cmp(self.tokens[b].as_bytes()));
        let mut ranks = alloc::vec![0u32; self.tokens.len()];
        for (rank, &id) in order.iter().enumerate() {
            ranks[id] = rank as u32;
        }
        ranks
    }

    /// One surface form per line; the line number is the id.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.tokens {
            let _ = writeln!(out, "{t}");
        }
        out
    }

    /// Parses the format written by [`Vocabulary::to_text`].
    pub fn from_text(text: &str) -> Result<Self, VocabError> {
        let lines: Vec<&str> = text.lines().collect();
        let mode = if lines.get(3).copied() == Some(UNK_SECONDARY) {
            UnknownMode::Ptb
        } else {
            UnknownMode::Single
        };
        let expected = Vocabulary::new(mode);
        for (i, want) in expected.tokens.iter().enumerate() {
            let found = lines.get(i).copied().unwrap_or("");
            if found != want {
                let expected = [BOS, EOS, UNK, UNK_SECONDARY][i];
                return Err(VocabError::MissingReserved {
                    line: i + 1,
                    expected,
                    found: found.to_string(),
                });
            }
        }
        let mut vocab = expected;
        for (i, line) in lines.iter().enumerate().skip(vocab.len()) {
            if line.is_empty() || line.contains(char::is_whitespace) {
                return Err(VocabError::BadToken { line: i + 1 });
            }
            if vocab.ids.contains_key(*line) {
                return Err(VocabError::Duplicate {
                    line: i + 1,
                    token: line.to_string(),
                });
            }
            vocab.push(line);
        }
        Ok(vocab)
    }

    /// 64-bit FNV-1a over the serialized token list; equal maps hash equal.
    pub fn fingerprint(&self) -> u64 {
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        for t in &self.tokens {
            for &b in t.as_bytes().iter().chain(core::iter::once(&b'\n')) {
                hash ^= b as u64;
                hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
            }
        }
        hash
    }
}

/// Keeps the `max_size - reserved` most frequent surface forms, breaking
/// frequency ties lexicographically.
pub fn build_vocab<'a, I>(corpus: I, max_size: usize, mode: UnknownMode) -> Result<Vocabulary, VocabError>
where
    I: IntoIterator<Item = &'a str>,
{
    let reserved = mode.reserved_count();
    if max_size <= reserved {
        return Err(VocabError::TooSmall { max_size, reserved });
    }
    let base = Vocabulary::new(mode);
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut seen_any = false;
    for w in corpus {
        seen_any = true;
        if base.get(w).is_none() {
            *counts.entry(w).or_default() += 1;
        }
    }
    if !seen_any {
        return Err(VocabError::EmptyCorpus);
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.as_bytes().cmp(b.0.as_bytes())));
    ranked.truncate(max_size - reserved);
    Ok(Vocabulary::from_words(mode, ranked.into_iter().map(|(w, _)| w)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(s: &str) -> impl Iterator<Item = &str> {
        s.split_whitespace()
    }

    #[test]
    fn keeps_most_frequent() {
        let v = build_vocab(words("b b a"), 1 + 3, UnknownMode::Single).unwrap();
        assert_eq!(v.len(), 4);
        assert!(v.get("b").is_some());
        assert!(v.get("a").is_none());
    }

    #[test]
    fn frequency_ties_break_lexicographically() {
        let v = build_vocab(words("a b"), 1 + 3, UnknownMode::Single).unwrap();
        assert!(v.get("a").is_some());
        assert!(v.get("b").is_none());
    }

    #[test]
    fn under_capacity_keeps_everything() {
        let corpus: Vec<String> = (0..20).map(|i| alloc::format!("w{i}")).collect();
        let v = build_vocab(corpus.iter().map(String::as_str), 25, UnknownMode::Single).unwrap();
        assert_eq!(v.len(), 23);
        for w in &corpus {
            assert!(v.get(w).is_some());
        }
    }

    #[test]
    fn rejects_empty_and_tiny() {
        assert_eq!(
            build_vocab(words(""), 10, UnknownMode::Single),
            Err(VocabError::EmptyCorpus)
        );
        assert!(matches!(
            build_vocab(words("a"), 3, UnknownMode::Single),
            Err(VocabError::TooSmall { .. })
        ));
    }

    #[test]
    fn reserved_ids_are_distinct_and_lowest() {
        let v = Vocabulary::new(UnknownMode::Ptb);
        assert_eq!(v.token(v.bos()), Some(BOS));
        assert_eq!(v.token(v.eos()), Some(EOS));
        assert_eq!(v.unknown_ids(), alloc::vec![2, 3]);
        assert_eq!(v.token(3), Some(UNK_SECONDARY));
        assert_eq!(v.id("never-seen"), 2);
    }

    #[test]
    fn text_round_trip() {
        let v = Vocabulary::from_words(UnknownMode::Ptb, words("the cat sat"));
        let back = Vocabulary::from_text(&v.to_text()).unwrap();
        assert_eq!(v, back);
        assert_eq!(v.fingerprint(), back.fingerprint());
        let single = Vocabulary::from_words(UnknownMode::Single, words("the cat sat"));
        assert_ne!(single.fingerprint(), v.fingerprint());
    }

    #[test]
    fn from_text_validates() {
        assert!(matches!(
            Vocabulary::from_text("<s>\n<unk>\n"),
            Err(VocabError::MissingReserved { line: 2, .. })
        ));
        assert!(matches!(
            Vocabulary::from_text("<s>\n</s>\n<unk>\na\na\n"),
            Err(VocabError::Duplicate { line: 5, .. })
        ));
    }

    #[test]
    fn collation_is_bytewise() {
        let v = Vocabulary::from_words(UnknownMode::Single, words("the cat The 're ."));
        let ranks = v.collation_ranks();
        let r = |w: &str| ranks[v.id(w) as usize];
        assert!(r("'re") < r("."));
        assert!(r(".") < r("The"));
        assert!(r("The") < r("cat"));
        assert!(r("cat") < r("the"));
    }
}
