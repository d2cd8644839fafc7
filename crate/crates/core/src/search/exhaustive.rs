use alloc::vec::Vec;

use super::{Hypothesis, SearchError};
use crate::bag::{Bag, TokenId};
use crate::combine::LogLinearCombo;
use crate::scorer::DecoderState;

/// Largest bag [`exhaustive_decode`] accepts.
pub const EXHAUSTIVE_MAX_BAG: usize = 8;

/// Number of distinct orderings of a multiset.
pub fn distinct_permutations(bag: &Bag) -> u128 {
    let mut result: u128 = 1;
    let mut placed: u128 = 0;
    for (_, c) in bag.iter() {
        for i in 1..=c as u128 {
            placed += 1;
            // multiply before dividing keeps the running value integral
            result = result * placed / i;
        }
    }
    result
}

struct Best {
    prefix: Vec<TokenId>,
    score: f64,
    states: Vec<DecoderState>,
}

/// Scores every distinct permutation of `bag` and returns the best, with the
/// lexicographically smallest sequence winning ties.
pub fn exhaustive_decode(bag: &Bag, combo: &LogLinearCombo<'_>) -> Result<Hypothesis, SearchError> {
    if bag.is_empty() {
        return Err(SearchError::EmptyBag);
    }
    if bag.size() > EXHAUSTIVE_MAX_BAG {
        return Err(SearchError::BagTooLarge {
            size: bag.size(),
            max: EXHAUSTIVE_MAX_BAG,
        });
    }
    let states = combo.init(bag)?;
    let next = combo.log_scores(&states);
    let mut best: Option<Best> = None;
    let mut prefix = Vec::with_capacity(bag.size());
    visit(combo, bag.clone(), &mut prefix, 0.0, &states, &next, &mut best);
    let best = best.expect("a non-empty bag has at least one ordering");
    Ok(Hypothesis {
        prefix: best.prefix,
        remaining: Bag::new(),
        score: best.score,
        states: best.states,
        complete: true,
    })
}

fn visit(
    combo: &LogLinearCombo<'_>,
    remaining: Bag,
    prefix: &mut Vec<TokenId>,
    score: f64,
    states: &[DecoderState],
    next: &[f64],
    best: &mut Option<Best>,
) {
    for w in remaining.types() {
        let rest = remaining.without(w).expect("type drawn from the bag");
        let child_score = score + next[w as usize];
        let child_states = combo.advance(states, w);
        let child_next = combo.log_scores(&child_states);
        prefix.push(w);
        if rest.is_empty() {
            let total = child_score + child_next[combo.eos() as usize];
            // visiting in ascending order means the first of equal scores is the smallest sequence
            if best.as_ref().is_none_or(|b| total > b.score) {
                *best = Some(Best {
                    prefix: prefix.clone(),
                    score: total,
                    states: child_states,
                });
            }
        } else {
            visit(combo, rest, prefix, child_score, &child_states, &child_next, best);
        }
        prefix.pop();
    }
}
