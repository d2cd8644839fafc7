use alloc::collections::BTreeMap;

use super::SearchError;
use crate::bag::{Bag, TokenId};
use crate::ngram::UnigramTable;

/// Best conditional probability seen so far for each token type while
/// decoding one sentence. Stored in the log domain; a missing entry is
/// probability zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimateTable {
    best: BTreeMap<TokenId, f64>,
}

impl EstimateTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// `P̂(w)`, zero when `w` has not been scored yet.
    pub fn best(&self, word: TokenId) -> f64 {
        self.best.get(&word).map_or(0.0, |&l| libm::exp(l))
    }

    /// `log P̂(w)`, negative infinity when unseen.
    pub fn log_best(&self, word: TokenId) -> f64 {
        self.best.get(&word).copied().unwrap_or(f64::NEG_INFINITY)
    }

    /// Raises the estimate of `word` to `log_score` if that is higher.
    pub fn observe(&mut self, word: TokenId, log_score: f64) {
        let slot = self.best.entry(word).or_insert(f64::NEG_INFINITY);
        if log_score > *slot {
            *slot = log_score;
        }
    }

    /// Max-merges a batch of `(token, log score)` observations.
    pub fn update_estimates<I: IntoIterator<Item = (TokenId, f64)>>(&mut self, scores: I) {
        for (w, l) in scores {
            self.observe(w, l);
        }
    }

    /// Same as [`EstimateTable::update_estimates`] with probabilities in `[0, 1]`.
    pub fn update_probabilities<I: IntoIterator<Item = (TokenId, f64)>>(&mut self, probs: I) {
        for (w, p) in probs {
            if p > 0.0 {
                self.observe(w, libm::log(p));
            }
        }
    }

    pub fn clear(&mut self) {
        self.best.clear();
    }

    pub fn len(&self) -> usize {
        self.best.len()
    }

    pub fn is_empty(&self) -> bool {
        self.best.is_empty()
    }
}

/// `g = Σ log P̂(w)` over the prefix, one term per token occurrence.
pub fn heuristic_g(prefix: &[TokenId], estimates: &EstimateTable) -> Result<f64, SearchError> {
    let mut g = 0.0;
    for &w in prefix {
        let l = estimates.log_best(w);
        if l == f64::NEG_INFINITY {
            return Err(SearchError::MissingEstimate(w));
        }
        g += l;
    }
    Ok(g)
}

/// `f = weight · Σ log P_unigram(w)` over the remaining tokens, count-weighted.
pub fn heuristic_f(remaining: &Bag, unigrams: &UnigramTable, weight: f64) -> f64 {
    if remaining.is_empty() {
        return 0.0;
    }
    weight * unigrams.bag_logp(remaining)
}
