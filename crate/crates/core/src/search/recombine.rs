use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::bag::{Bag, TokenId};

use super::Hypothesis;

/// What recombination needs to know about a hypothesis.
pub trait Recombinable {
    fn remaining(&self) -> &Bag;
    fn prefix(&self) -> &[TokenId];
    fn score(&self) -> f64;
}

impl Recombinable for Hypothesis {
    fn remaining(&self) -> &Bag {
        &self.remaining
    }
    fn prefix(&self) -> &[TokenId] {
        &self.prefix
    }
    fn score(&self) -> f64 {
        self.score
    }
}

/// Merges hypotheses with equal remaining bags and equal last `k` prefix
/// tokens, keeping the highest-scoring one (ties: smaller prefix). Survivors
/// keep their relative order.
///
/// For an n-gram scorer and `k = n - 1` the merge loses nothing: two merged
/// hypotheses score every completion identically from here on.
pub fn recombine<H: Recombinable>(candidates: Vec<H>, k: usize) -> Vec<H> {
    let mut winner: BTreeMap<(&Bag, &[TokenId]), usize> = BTreeMap::new();
    for (i, c) in candidates.iter().enumerate() {
        let prefix = c.prefix();
        let tail = &prefix[prefix.len() - k.min(prefix.len())..];
        winner
            .entry((c.remaining(), tail))
            .and_modify(|best| {
                let b = &candidates[*best];
                if c.score() > b.score() || (c.score() == b.score() && c.prefix() < b.prefix()) {
                    *best = i;
                }
            })
            .or_insert(i);
    }
    let mut keep = alloc::vec![false; candidates.len()];
    for &i in winner.values() {
        keep[i] = true;
    }
    candidates
        .into_iter()
        .zip(keep)
        .filter_map(|(c, k)| k.then_some(c))
        .collect()
}
