//! Multiset-constrained beam search.
//!
//! At every step a hypothesis may only be extended with a token still left in
//! its bag, so every finished hypothesis is a permutation of the input. The
//! beam keeps the `n` best extensions under one of three ranking scores:
//!
//! * `none`: the partial model score `s`;
//! * future cost `f`: `s` plus the weighted unigram log probabilities of the
//!   tokens still in the bag;
//! * upper bound `g`: `s - g`, where `g` sums, over the prefix tokens, the log
//!   of the best conditional probability seen for that token anywhere in the
//!   search so far. Since every prefix factor was itself one of those
//!   observations, `s - g <= 0` for every hypothesis.
//!
//! Scores are raw model conditionals (optionally renormalized over the
//! remaining tokens). When the bag empties, the end-of-sentence transition is
//! added to `s`. Ties are broken by the lexicographically smaller prefix.

mod estimates;
mod exhaustive;
mod recombine;

pub use estimates::{heuristic_f, heuristic_g, EstimateTable};
pub use exhaustive::{distinct_permutations, exhaustive_decode, EXHAUSTIVE_MAX_BAG};
pub use recombine::{recombine, Recombinable};

use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;
use core::str::FromStr;

use thiserror::Error;

use crate::bag::{Bag, TokenId, TokenSequence};
use crate::combine::LogLinearCombo;
use crate::ngram::UnigramTable;
use crate::scorer::{DecoderState, ScorerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("cannot decode an empty bag")]
    EmptyBag,
    #[error("beam size must be at least 1")]
    ZeroBeam,
    #[error("the future-cost heuristic needs a unigram table")]
    MissingUnigrams,
    #[error("hypothesis is already complete")]
    Complete,
    #[error("bag of {size} tokens exceeds the exhaustive limit of {max}")]
    BagTooLarge { size: usize, max: usize },
    #[error("no estimate recorded for token {0} in the prefix")]
    MissingEstimate(TokenId),
    #[error("decoded output is not a permutation of the input bag")]
    InvalidPermutation,
    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Hash)]
pub enum Heuristic {
    #[default]
    None,
    /// Unigram future-cost estimate of the remaining tokens.
    FutureCost,
    /// Product of the best conditional probabilities seen so far.
    UpperBound,
}

impl Heuristic {
    pub const ALL: [Heuristic; 3] = [Heuristic::None, Heuristic::FutureCost, Heuristic::UpperBound];

    pub fn name(self) -> &'static str {
        match self {
            Heuristic::None => "none",
            Heuristic::FutureCost => "f",
            Heuristic::UpperBound => "g",
        }
    }
}

impl fmt::Display for Heuristic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Heuristic {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "none" => Ok(Heuristic::None),
            "f" => Ok(Heuristic::FutureCost),
            "g" => Ok(Heuristic::UpperBound),
            _ => Err(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeamConfig {
    pub beam_size: usize,
    pub heuristic: Heuristic,
    pub recombination: bool,
    /// Number of trailing prefix tokens in the recombination signature.
    pub recombination_context: usize,
    /// Scale of the future-cost estimate.
    pub f_weight: f64,
    /// Renormalize each step's scores over the remaining token types.
    pub renormalize: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig {
            beam_size: 5,
            heuristic: Heuristic::None,
            recombination: false,
            recombination_context: 4,
            f_weight: 1.0,
            renormalize: false,
        }
    }
}

impl BeamConfig {
    pub fn new(beam_size: usize, heuristic: Heuristic) -> Self {
        BeamConfig {
            beam_size,
            heuristic,
            ..BeamConfig::default()
        }
    }

    pub fn with_recombination(mut self, context: usize) -> Self {
        self.recombination = true;
        self.recombination_context = context;
        self
    }
}

/// A partial or complete ordering of a bag.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub prefix: TokenSequence,
    pub remaining: Bag,
    /// Accumulated natural-log model score `s`.
    pub score: f64,
    /// One decoder state per combination member.
    pub states: Vec<DecoderState>,
    pub complete: bool,
}

/// Token types still available to extend `hyp`.
pub fn constrained_candidates(hyp: &Hypothesis) -> Result<Vec<TokenId>, SearchError> {
    if hyp.remaining.is_empty() {
        return Err(SearchError::Complete);
    }
    Ok(hyp.remaining.types().collect())
}

/// One entry seen at a pruning step.
#[derive(Clone, Debug, PartialEq)]
pub struct PruneRecord {
    pub prefix: TokenSequence,
    /// Model score `s`.
    pub score: f64,
    /// Heuristic term: `f` in future-cost mode, `g` in upper-bound mode, else 0.
    pub heuristic: f64,
    /// Ranking score `S`.
    pub ranking: f64,
    pub kept: bool,
}

/// Hook into the pruning steps of [`beam_search_observed`].
pub trait SearchObserver {
    fn on_prune(&mut self, step: usize, records: &[PruneRecord]);
}

struct Live {
    prefix: TokenSequence,
    remaining: Bag,
    score: f64,
    states: Vec<DecoderState>,
    /// Combined log scores for the next position.
    next: Vec<f64>,
}

struct Candidate {
    parent: usize,
    word: TokenId,
    prefix: TokenSequence,
    remaining: Bag,
    score: f64,
    /// Filled in for survivors (and for everything at the final step).
    materialized: Option<(Vec<DecoderState>, Vec<f64>)>,
}

impl Recombinable for Candidate {
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

fn rank_order(a: (f64, &[TokenId]), b: (f64, &[TokenId])) -> Ordering {
    b.0.partial_cmp(&a.0)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.1.cmp(b.1))
}

/// Decodes `bag`; returns the final beam as complete hypotheses sorted by `s`.
pub fn beam_search(
    bag: &Bag,
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
) -> Result<Vec<Hypothesis>, SearchError> {
    search(bag, combo, config, unigrams, None)
}

/// [`beam_search`] reporting every pruning step to `observer`.
pub fn beam_search_observed(
    bag: &Bag,
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
    observer: &mut dyn SearchObserver,
) -> Result<Vec<Hypothesis>, SearchError> {
    search(bag, combo, config, unigrams, Some(observer))
}

fn search(
    bag: &Bag,
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
    mut observer: Option<&mut dyn SearchObserver>,
) -> Result<Vec<Hypothesis>, SearchError> {
    if bag.is_empty() {
        return Err(SearchError::EmptyBag);
    }
    if config.beam_size == 0 {
        return Err(SearchError::ZeroBeam);
    }
    let unigrams = match (config.heuristic, unigrams) {
        (Heuristic::FutureCost, None) => return Err(SearchError::MissingUnigrams),
        (_, u) => u,
    };
    let eos = combo.eos();
    let mut estimates = EstimateTable::new();

    let states = combo.init(bag)?;
    let next = combo.log_scores(&states);
    let mut beam = alloc::vec![Live {
        prefix: Vec::new(),
        remaining: bag.clone(),
        score: 0.0,
        states,
        next,
    }];

    for step in 0..bag.size() {
        let mut candidates: Vec<Candidate> = Vec::new();
        for (parent, hyp) in beam.iter().enumerate() {
            let types: Vec<TokenId> = hyp.remaining.types().collect();
            let mut local: Vec<f64> = types.iter().map(|&w| hyp.next[w as usize]).collect();
            if config.renormalize {
                renormalize(&mut local);
            }
            if config.heuristic == Heuristic::UpperBound {
                estimates.update_estimates(types.iter().copied().zip(local.iter().copied()));
            }
            for (&w, &ls) in types.iter().zip(&local) {
                let mut prefix = Vec::with_capacity(hyp.prefix.len() + 1);
                prefix.extend_from_slice(&hyp.prefix);
                prefix.push(w);
                candidates.push(Candidate {
                    parent,
                    word: w,
                    prefix,
                    remaining: hyp.remaining.without(w).expect("candidate drawn from the bag"),
                    score: hyp.score + ls,
                    materialized: None,
                });
            }
        }
        if config.recombination {
            candidates = recombine(candidates, config.recombination_context);
        }

        let last = step + 1 == bag.size();
        if last {
            for c in &mut candidates {
                let states = combo.advance(&beam[c.parent].states, c.word);
                let next = combo.log_scores(&states);
                c.score += next[eos as usize];
                c.materialized = Some((states, next));
            }
        }

        let mut ranked: Vec<(f64, f64, usize)> = Vec::with_capacity(candidates.len());
        for (i, c) in candidates.iter().enumerate() {
            let h = match config.heuristic {
                Heuristic::None => 0.0,
                Heuristic::FutureCost => heuristic_f(&c.remaining, unigrams.expect("checked above"), config.f_weight),
                Heuristic::UpperBound => heuristic_g(&c.prefix, &estimates)?,
            };
            let s_rank = match config.heuristic {
                Heuristic::UpperBound => c.score - h,
                _ => c.score + h,
            };
            ranked.push((s_rank, h, i));
        }
        ranked.sort_by(|a, b| rank_order((a.0, &candidates[a.2].prefix), (b.0, &candidates[b.2].prefix)));
        let keep = ranked.len().min(config.beam_size);

        if let Some(obs) = observer.as_deref_mut() {
            let records: Vec<PruneRecord> = ranked
                .iter()
                .enumerate()
                .map(|(pos, &(s_rank, h, i))| PruneRecord {
                    prefix: candidates[i].prefix.clone(),
                    score: candidates[i].score,
                    heuristic: h,
                    ranking: s_rank,
                    kept: pos < keep,
                })
                .collect();
            obs.on_prune(step, &records);
        }

        let mut slots: Vec<Option<Candidate>> = candidates.into_iter().map(Some).collect();
        let mut next_beam = Vec::with_capacity(keep);
        for &(_, _, i) in &ranked[..keep] {
            let c = slots[i].take().expect("each candidate ranked once");
            let (states, next) = match c.materialized {
                Some(m) => m,
                None => {
                    let states = combo.advance(&beam[c.parent].states, c.word);
                    let next = combo.log_scores(&states);
                    (states, next)
                }
            };
            next_beam.push(Live {
                prefix: c.prefix,
                remaining: c.remaining,
                score: c.score,
                states,
                next,
            });
        }
        beam = next_beam;
    }

    let mut finished: Vec<Hypothesis> = beam
        .into_iter()
        .map(|l| Hypothesis {
            complete: l.remaining.is_empty(),
            prefix: l.prefix,
            remaining: l.remaining,
            score: l.score,
            states: l.states,
        })
        .collect();
    finished.sort_by(|a, b| rank_order((a.score, &a.prefix), (b.score, &b.prefix)));
    for h in &finished {
        if !bag.is_permutation(&h.prefix) {
            return Err(SearchError::InvalidPermutation);
        }
    }
    Ok(finished)
}

fn renormalize(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = scores.iter().map(|&s| libm::exp(s - max)).sum();
    let norm = max + libm::log(sum);
    scores.iter_mut().for_each(|s| *s -= norm);
}
