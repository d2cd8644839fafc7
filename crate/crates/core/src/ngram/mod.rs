//! Back-off n-gram language models.
//!
//! Probabilities are stored as log10 values in the ARPA layout: every explicit
//! k-gram carries a probability and, when it also serves as a context, a
//! back-off weight. Queries for unseen events back off recursively to shorter
//! contexts. The [`Scorer`] implementation converts to natural log.

mod arpa;
mod unigram;

pub use arpa::{export_arpa, import_arpa, ArpaError};
pub use unigram::UnigramTable;

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bag::{Bag, TokenId, TokenSequence};
use crate::scorer::{DecoderState, Scorer, ScorerError};
use crate::vocab::Vocabulary;

/// log10 value standing in for probability zero (SRILM convention).
pub const LOG10_ZERO: f64 = -99.0;

const LN_10: f64 = core::f64::consts::LN_10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Smoothing {
    /// Relative frequencies; unseen events get [`LOG10_ZERO`].
    MaximumLikelihood,
    /// Interpolated Witten-Bell.
    WittenBell,
    /// Interpolated modified Kneser-Ney; fails when discounts are ill-posed.
    KneserNey,
    /// Modified Kneser-Ney, falling back to Witten-Bell when discounts are ill-posed.
    #[default]
    Auto,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NgramError {
    #[error("n-gram order must be at least 1")]
    InvalidOrder,
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("token id {0} is outside the vocabulary")]
    UnknownId(TokenId),
    #[error(
        "Kneser-Ney discounts are undefined for order {order} (count-of-counts {counts:?}); use Witten-Bell instead"
    )]
    DiscountUndefined { order: usize, counts: [u64; 4] },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NgramEntry {
    /// log10 probability of the last token given the others.
    pub logp: f64,
    /// log10 back-off weight when this gram is used as a context.
    pub backoff: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NGramModel {
    order: usize,
    vocab_size: usize,
    bos: TokenId,
    eos: TokenId,
    /// `grams[k - 1]` holds the explicit k-grams.
    grams: Vec<BTreeMap<Vec<TokenId>, NgramEntry>>,
    /// Explicit continuations per context, derived from `grams`.
    successors: BTreeMap<Vec<TokenId>, Vec<(TokenId, f64)>>,
    unigram: Vec<f64>,
}

impl NGramModel {
    /// Assembles a model from explicit entries. Ids missing from the unigram
    /// level get [`LOG10_ZERO`].
    pub fn from_entries(
        order: usize,
        vocab_size: usize,
        bos: TokenId,
        eos: TokenId,
        grams: Vec<BTreeMap<Vec<TokenId>, NgramEntry>>,
    ) -> Result<Self, NgramError> {
        if order == 0 || grams.len() != order {
            return Err(NgramError::InvalidOrder);
        }
        let mut unigram = vec![LOG10_ZERO; vocab_size];
        let mut successors: BTreeMap<Vec<TokenId>, Vec<(TokenId, f64)>> = BTreeMap::new();
        for level in &grams {
            for (gram, entry) in level {
                for &id in gram {
                    if id as usize >= vocab_size {
                        return Err(NgramError::UnknownId(id));
                    }
                }
                let (&word, context) = gram.split_last().expect("n-grams are non-empty");
                if context.is_empty() {
                    unigram[word as usize] = entry.logp;
                } else {
                    successors.entry(context.to_vec()).or_default().push((word, entry.logp));
                }
            }
        }
        Ok(NGramModel {
            order,
            vocab_size,
            bos,
            eos,
            grams,
            successors,
            unigram,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    /// Explicit entries of one order (1-based).
    pub fn grams(&self, k: usize) -> &BTreeMap<Vec<TokenId>, NgramEntry> {
        &self.grams[k - 1]
    }

    /// log10 probabilities of the unigram level, indexed by id.
    pub fn unigram_log10(&self) -> &[f64] {
        &self.unigram
    }

    fn backoff(&self, context: &[TokenId]) -> f64 {
        if context.is_empty() || context.len() >= self.order {
            return 0.0;
        }
        self.grams[context.len() - 1]
            .get(context)
            .and_then(|e| e.backoff)
            .unwrap_or(0.0)
    }

    fn truncate<'h>(&self, history: &'h [TokenId]) -> &'h [TokenId] {
        let keep = history.len().min(self.order - 1);
        &history[history.len() - keep..]
    }

    /// log10 P(word | history), using at most the last `order - 1` history tokens.
    pub fn log10_prob(&self, word: TokenId, history: &[TokenId]) -> f64 {
        let history = self.truncate(history);
        let mut acc = 0.0;
        let mut gram: Vec<TokenId> = Vec::with_capacity(history.len() + 1);
        for start in 0..history.len() {
            let context = &history[start..];
            gram.clear();
            gram.extend_from_slice(context);
            gram.push(word);
            if let Some(e) = self.grams[gram.len() - 1].get(&gram) {
                return acc + e.logp;
            }
            acc += self.backoff(context);
        }
        acc + self.unigram.get(word as usize).copied().unwrap_or(LOG10_ZERO)
    }

    /// Natural-log P(word | history).
    pub fn logprob(&self, word: TokenId, history: &[TokenId]) -> f64 {
        self.log10_prob(word, history) * LN_10
    }

    /// log10 distribution over the whole vocabulary given `history`.
    pub fn log10_distribution(&self, history: &[TokenId]) -> Vec<f64> {
        let history = self.truncate(history);
        let mut dist = self.unigram.clone();
        for start in (0..history.len()).rev() {
            let context = &history[start..];
            let bow = self.backoff(context);
            if bow != 0.0 {
                dist.iter_mut().for_each(|d| *d += bow);
            }
            if let Some(next) = self.successors.get(context) {
                for &(w, logp) in next {
                    dist[w as usize] = logp;
                }
            }
        }
        dist
    }

    /// Perplexity over sentences padded with sentinels (end-of-sentence included).
    pub fn perplexity(&self, corpus: &[TokenSequence]) -> f64 {
        let mut total = 0.0;
        let mut tokens = 0usize;
        for sentence in corpus {
            let mut history = vec![self.bos; self.order - 1];
            for &w in sentence.iter().chain(core::iter::once(&self.eos)) {
                total += self.log10_prob(w, &history);
                history.push(w);
                tokens += 1;
            }
        }
        libm::pow(10.0, -total / tokens.max(1) as f64)
    }
}

impl Scorer for NGramModel {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn init(&self, _bag: &Bag) -> Result<DecoderState, ScorerError> {
        Ok(DecoderState::History(vec![self.bos; self.order - 1]))
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        let history = state.history().expect("n-gram state");
        let mut dist = self.log10_distribution(history);
        dist.iter_mut().for_each(|d| *d *= LN_10);
        dist
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        let history = state.history().expect("n-gram state");
        let mut next = Vec::with_capacity(self.order - 1);
        let keep = (self.order - 1).saturating_sub(1).min(history.len());
        next.extend_from_slice(&history[history.len() - keep..]);
        if self.order > 1 {
            next.push(word);
        }
        DecoderState::History(next)
    }
}

/// Raw or continuation counts of one order, plus per-context totals.
struct OrderCounts {
    grams: BTreeMap<Vec<TokenId>, u64>,
}

impl OrderCounts {
    fn count_of_counts(&self) -> [u64; 4] {
        let mut n = [0u64; 4];
        for &c in self.grams.values() {
            if (1..=4).contains(&c) {
                n[c as usize - 1] += 1;
            }
        }
        n
    }
}

/// Modified Kneser-Ney discounts `[D1, D2, D3+]`.
fn kn_discounts(n: [u64; 4]) -> Option<[f64; 3]> {
    if n.contains(&0) {
        return None;
    }
    let [n1, n2, n3, n4] = n.map(|c| c as f64);
    let y = n1 / (n1 + 2.0 * n2);
    let d = [
        1.0 - 2.0 * y * n2 / n1,
        2.0 - 3.0 * y * n3 / n2,
        3.0 - 4.0 * y * n4 / n3,
    ];
    let ok = d.iter().zip([1.0, 2.0, 3.0]).all(|(&di, cap)| di > 0.0 && di < cap);
    ok.then_some(d)
}

fn discount_for(d: &[f64; 3], count: u64) -> f64 {
    match count {
        0 => 0.0,
        1 => d[0],
        2 => d[1],
        _ => d[2],
    }
}

/// Estimates an n-gram model over `vocab`.
///
/// Sentences are padded with `order - 1` begin sentinels and one end sentinel.
pub fn train_ngram(
    corpus: &[TokenSequence],
    order: usize,
    smoothing: Smoothing,
    vocab: &Vocabulary,
) -> Result<NGramModel, NgramError> {
    if order == 0 {
        return Err(NgramError::InvalidOrder);
    }
    if corpus.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    let v = vocab.len();
    let (bos, eos) = (vocab.bos(), vocab.eos());

    // raw[k - 1]: counts of k-grams whose last token is a real token or eos
    let mut raw: Vec<BTreeMap<Vec<TokenId>, u64>> = vec![BTreeMap::new(); order];
    for sentence in corpus {
        let mut padded = vec![bos; order - 1];
        for &w in sentence {
            if w as usize >= v {
                return Err(NgramError::UnknownId(w));
            }
            padded.push(w);
        }
        padded.push(eos);
        for i in order - 1..padded.len() {
            for k in 1..=order {
                *raw[k - 1].entry(padded[i + 1 - k..=i].to_vec()).or_insert(0) += 1;
            }
        }
    }

    let smoothing = match smoothing {
        Smoothing::Auto => {
            if kn_discount_table(&raw, order).is_ok() {
                Smoothing::KneserNey
            } else {
                Smoothing::WittenBell
            }
        }
        s => s,
    };

    let counts: Vec<OrderCounts> = match smoothing {
        Smoothing::KneserNey => continuation_counts(&raw, order),
        _ => raw.into_iter().map(|grams| OrderCounts { grams }).collect(),
    };
    let discounts = match smoothing {
        Smoothing::KneserNey => Some(kn_discount_table_from(&counts)?),
        _ => None,
    };

    // Predictable vocabulary: everything except the begin sentinel.
    let predictable = (v - 1) as f64;
    let mut probs: Vec<BTreeMap<Vec<TokenId>, f64>> = Vec::with_capacity(order);

    for k in 1..=order {
        let level = &counts[k - 1];
        // Per-context totals and type counts by count value.
        let mut ctx_total: BTreeMap<&[TokenId], u64> = BTreeMap::new();
        let mut ctx_types: BTreeMap<&[TokenId], [u64; 3]> = BTreeMap::new();
        for (gram, &c) in &level.grams {
            let ctx = &gram[..k - 1];
            *ctx_total.entry(ctx).or_insert(0) += c;
            let slot = (c.min(3) - 1) as usize;
            ctx_types.entry(ctx).or_insert([0; 3])[slot] += 1;
        }
        let lower = |gram: &[TokenId]| -> f64 {
            if k == 1 {
                1.0 / predictable
            } else {
                probs[k - 2][&gram[1..]]
            }
        };
        let mut level_probs: BTreeMap<Vec<TokenId>, f64> = BTreeMap::new();
        for (gram, &c) in &level.grams {
            let ctx = &gram[..k - 1];
            let total = ctx_total[ctx] as f64;
            let types = ctx_types[ctx];
            let p = match smoothing {
                Smoothing::MaximumLikelihood => c as f64 / total,
                Smoothing::WittenBell => {
                    let distinct = (types[0] + types[1] + types[2]) as f64;
                    (c as f64 + distinct * lower(gram)) / (total + distinct)
                }
                Smoothing::KneserNey => {
                    let d = discounts.as_ref().expect("discounts")[k - 1];
                    let gamma = (d[0] * types[0] as f64 + d[1] * types[1] as f64 + d[2] * types[2] as f64) / total;
                    (c as f64 - discount_for(&d, c)) / total + gamma * lower(gram)
                }
                Smoothing::Auto => unreachable!(),
            };
            level_probs.insert(gram.clone(), p);
        }
        if k == 1 {
            // Unseen predictable words receive their interpolated share.
            let total = ctx_total.get(&[][..]).copied().unwrap_or(0) as f64;
            let types = ctx_types.get(&[][..]).copied().unwrap_or([0; 3]);
            let leftover = match smoothing {
                Smoothing::MaximumLikelihood => 0.0,
                Smoothing::WittenBell => {
                    let distinct = (types[0] + types[1] + types[2]) as f64;
                    distinct / (total + distinct) / predictable
                }
                Smoothing::KneserNey => {
                    let d = discounts.as_ref().expect("discounts")[0];
                    (d[0] * types[0] as f64 + d[1] * types[1] as f64 + d[2] * types[2] as f64) / total / predictable
                }
                Smoothing::Auto => unreachable!(),
            };
            for id in 0..v as TokenId {
                if id == bos {
                    continue;
                }
                level_probs.entry(vec![id]).or_insert(leftover);
            }
        }
        probs.push(level_probs);
    }

    // Back-off weights so every context's distribution sums to one.
    let mut grams: Vec<BTreeMap<Vec<TokenId>, NgramEntry>> = probs
        .iter()
        .map(|level| {
            level
                .iter()
                .map(|(g, &p)| {
                    let logp = if p > 0.0 { libm::log10(p) } else { LOG10_ZERO };
                    (g.clone(), NgramEntry { logp, backoff: None })
                })
                .collect()
        })
        .collect();
    grams[0].insert(
        vec![bos],
        NgramEntry {
            logp: LOG10_ZERO,
            backoff: None,
        },
    );

    for k in 2..=order {
        let mut explicit: BTreeMap<&[TokenId], (f64, f64)> = BTreeMap::new();
        for (gram, &p) in &probs[k - 1] {
            let ctx = &gram[..k - 1];
            let lower = probs[k - 2].get(&gram[1..]).copied().unwrap_or(0.0);
            let e = explicit.entry(ctx).or_insert((0.0, 0.0));
            e.0 += p;
            e.1 += lower;
        }
        for (ctx, (mass, lower_mass)) in explicit {
            let num = 1.0 - mass;
            let den = 1.0 - lower_mass;
            let bow = if num <= 1e-12 || den <= 1e-12 {
                LOG10_ZERO
            } else {
                libm::log10(num / den)
            };
            if let Some(entry) = grams[k - 2].get_mut(ctx) {
                entry.backoff = Some(bow);
            } else {
                // Contexts made only of begin sentinels have no probability of their own.
                grams[k - 2].insert(
                    ctx.to_vec(),
                    NgramEntry {
                        logp: LOG10_ZERO,
                        backoff: Some(bow),
                    },
                );
            }
        }
    }

    NGramModel::from_entries(order, v, bos, eos, grams)
}

fn continuation_counts(raw: &[BTreeMap<Vec<TokenId>, u64>], order: usize) -> Vec<OrderCounts> {
    let mut out = Vec::with_capacity(order);
    for k in 1..=order {
        if k == order {
            out.push(OrderCounts {
                grams: raw[k - 1].clone(),
            });
        } else {
            let mut grams: BTreeMap<Vec<TokenId>, u64> = BTreeMap::new();
            for gram in raw[k].keys() {
                *grams.entry(gram[1..].to_vec()).or_insert(0) += 1;
            }
            out.push(OrderCounts { grams });
        }
    }
    out
}

fn kn_discount_table(raw: &[BTreeMap<Vec<TokenId>, u64>], order: usize) -> Result<Vec<[f64; 3]>, NgramError> {
    kn_discount_table_from(&continuation_counts(raw, order))
}

fn kn_discount_table_from(counts: &[OrderCounts]) -> Result<Vec<[f64; 3]>, NgramError> {
    counts
        .iter()
        .enumerate()
        .map(|(i, level)| {
            let n = level.count_of_counts();
            kn_discounts(n).ok_or(NgramError::DiscountUndefined {
                order: i + 1,
                counts: n,
            })
        })
        .collect()
}
