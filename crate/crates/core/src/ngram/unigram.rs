use alloc::collections::BTreeMap;

use super::{NGramModel, LN_10, LOG10_ZERO};
use crate::bag::{Bag, TokenId, TokenSequence};

/// Natural-log unigram probabilities used as future-cost estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct UnigramTable {
    logp: BTreeMap<TokenId, f64>,
    floor: f64,
}

/// `ln(1 / (10 |V|))`, pushed below the smallest stored value when needed.
fn default_floor(vocab_size: usize, min_stored: Option<f64>) -> f64 {
    let floor = -libm::log(10.0 * vocab_size.max(1) as f64);
    match min_stored {
        Some(min) if floor >= min => min - LN_10,
        _ => floor,
    }
}

impl UnigramTable {
    pub fn new(logp: BTreeMap<TokenId, f64>, floor: f64) -> Self {
        UnigramTable { logp, floor }
    }

    /// Relative frequencies of the tokens in `corpus` (sentinels not counted).
    pub fn from_corpus(corpus: &[TokenSequence], vocab_size: usize) -> Self {
        let mut counts: BTreeMap<TokenId, u64> = BTreeMap::new();
        let mut total = 0u64;
        for sentence in corpus {
            for &w in sentence {
                *counts.entry(w).or_insert(0) += 1;
                total += 1;
            }
        }
        let logp: BTreeMap<TokenId, f64> = counts
            .into_iter()
            .map(|(w, c)| (w, libm::log(c as f64 / total as f64)))
            .collect();
        let min = logp.values().copied().reduce(f64::min);
        UnigramTable {
            floor: default_floor(vocab_size, min),
            logp,
        }
    }

    /// The unigram level of a trained model. Zero-probability entries are left
    /// out; the floor is the unknown token's probability when it has one.
    pub fn from_model(model: &NGramModel, unk: TokenId) -> Self {
        let logp: BTreeMap<TokenId, f64> = model
            .unigram_log10()
            .iter()
            .enumerate()
            .filter(|(_, &l)| l > LOG10_ZERO)
            .map(|(w, &l)| (w as TokenId, l * LN_10))
            .collect();
        let floor = match logp.get(&unk) {
            Some(&l) => l,
            None => default_floor(model.vocab_size(), logp.values().copied().reduce(f64::min)),
        };
        UnigramTable { logp, floor }
    }

    pub fn logp(&self, id: TokenId) -> f64 {
        self.logp.get(&id).copied().unwrap_or(self.floor)
    }

    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn entries(&self) -> impl Iterator<Item = (TokenId, f64)> + '_ {
        self.logp.iter().map(|(&w, &l)| (w, l))
    }

    /// Count-weighted sum of unigram log probabilities over a bag.
    pub fn bag_logp(&self, bag: &Bag) -> f64 {
        bag.iter().map(|(w, c)| c as f64 * self.logp(w)).sum()
    }
}
