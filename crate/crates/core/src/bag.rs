//! Bags of words: the multiset a decoder has to put in order.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::vocab::Vocabulary;

pub type TokenId = u32;

/// Ordered token ids, e.g. a sentence or a partial hypothesis.
pub type TokenSequence = Vec<TokenId>;

/// Multiset of token ids. Every stored count is at least one.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Bag {
    counts: BTreeMap<TokenId, u32>,
    size: usize,
}

impl Bag {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: TokenId) {
        *self.counts.entry(id).or_insert(0) += 1;
        self.size += 1;
    }

    /// Removes one occurrence of `id`; returns false if it was absent.
    pub fn remove(&mut self, id: TokenId) -> bool {
        match self.counts.get_mut(&id) {
            Some(c) if *c > 1 => *c -= 1,
            Some(_) => {
                self.counts.remove(&id);
            }
            None => return false,
        }
        self.size -= 1;
        true
    }

    /// Copy of the bag with one occurrence of `id` removed.
    pub fn without(&self, id: TokenId) -> Option<Bag> {
        let mut next = self.clone();
        next.remove(id).then_some(next)
    }

    pub fn count(&self, id: TokenId) -> u32 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    pub fn contains(&self, id: TokenId) -> bool {
        self.counts.contains_key(&id)
    }

    /// Total number of tokens, counting duplicates.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    /// Distinct token types, ascending by id.
    pub fn types(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.counts.keys().copied()
    }

    pub fn num_types(&self) -> usize {
        self.counts.len()
    }

    /// `(id, count)` pairs, ascending by id.
    pub fn iter(&self) -> impl Iterator<Item = (TokenId, u32)> + '_ {
        self.counts.iter().map(|(&id, &c)| (id, c))
    }

    /// Tokens with duplicates expanded, ascending by id.
    pub fn tokens(&self) -> impl Iterator<Item = TokenId> + '_ {
        self.iter().flat_map(|(id, c)| core::iter::repeat_n(id, c as usize))
    }

    /// Tokens sorted by a per-id collation rank, duplicates adjacent.
    pub fn sorted_by_rank(&self, ranks: &[u32]) -> TokenSequence {
        let mut types: Vec<(TokenId, u32)> = self.iter().collect();
        types.sort_by_key(|&(id, _)| (ranks.get(id as usize).copied().unwrap_or(u32::MAX), id));
        types
            .into_iter()
            .flat_map(|(id, c)| core::iter::repeat_n(id, c as usize))
            .collect()
    }

    /// True when `seq` uses exactly the tokens of this bag.
    pub fn is_permutation(&self, seq: &[TokenId]) -> bool {
        seq.len() == self.size && bag_of_words(seq) == *self
    }
}

impl FromIterator<TokenId> for Bag {
    fn from_iter<I: IntoIterator<Item = TokenId>>(iter: I) -> Self {
        let mut bag = Bag::new();
        for id in iter {
            bag.insert(id);
        }
        bag
    }
}

pub fn bag_of_words(sentence: &[TokenId]) -> Bag {
    sentence.iter().copied().collect()
}

/// Canonical sequence for a bag: surface forms in byte-wise ascending order.
pub fn sorted_bag_sequence(bag: &Bag, vocab: &Vocabulary) -> TokenSequence {
    bag.sorted_by_rank(&vocab.collation_ranks())
}
