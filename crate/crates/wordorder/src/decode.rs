//! Decoding many bags, optionally in parallel, and rendering the results.

use std::collections::VecDeque;
use std::fmt::Write;

use rayon::prelude::*;
use wordorder_core::combine::LogLinearCombo;
use wordorder_core::ngram::UnigramTable;
use wordorder_core::search::SearchError;
use wordorder_core::{beam_search, Bag, BeamConfig, Hypothesis, TokenId, Vocabulary};

/// One input line: its bag plus the surface forms hidden behind the unknown id,
/// so output lines can be permutations of the input text.
#[derive(Clone, Debug, PartialEq)]
pub struct BagLine {
    pub bag: Bag,
    pub unknown: Vec<String>,
}

impl BagLine {
    pub fn parse(line: &str, vocab: &Vocabulary) -> Self {
        let mut bag = Bag::new();
        let mut unknown = Vec::new();
        for w in line.split_whitespace() {
            let id = vocab.id(w);
            if id == vocab.unk() {
                unknown.push(w.to_string());
            }
            bag.insert(id);
        }
        BagLine { bag, unknown }
    }

    /// Surface text of `seq`; unknown ids take the hidden forms in input order.
    pub fn render(&self, seq: &[TokenId], vocab: &Vocabulary) -> String {
        let mut hidden: VecDeque<&str> = self.unknown.iter().map(String::as_str).collect();
        let words: Vec<&str> = seq
            .iter()
            .map(|&id| {
                if id == vocab.unk() {
                    if let Some(w) = hidden.pop_front() {
                        return w;
                    }
                }
                vocab.token(id).unwrap_or("<unk>")
            })
            .collect();
        words.join(" ")
    }
}

/// Decodes one bag. Empty bags give no hypotheses; outputs that are not
/// permutations of the bag are reported as [`SearchError::InvalidPermutation`].
pub fn decode_one(
    bag: &Bag,
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
) -> Result<Vec<Hypothesis>, SearchError> {
    if bag.is_empty() {
        return Ok(Vec::new());
    }
    let hyps = beam_search(bag, combo, config, unigrams)?;
    if hyps.is_empty() || hyps.iter().any(|h| !bag.is_permutation(&h.prefix)) {
        return Err(SearchError::InvalidPermutation);
    }
    Ok(hyps)
}

/// Decodes every bag, in input order, on `workers` threads (1 = the calling thread).
pub fn decode_all(
    bags: &[Bag],
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
    workers: usize,
) -> Vec<Result<Vec<Hypothesis>, SearchError>> {
    let run = |b: &Bag| decode_one(b, combo, config, unigrams);
    if workers <= 1 {
        return bags.iter().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| bags.par_iter().map(run).collect()),
        Err(_) => bags.iter().map(run).collect(),
    }
}

/// Best sequence per bag, or the index and error of the first failure.
pub fn best_sequences(
    results: Vec<Result<Vec<Hypothesis>, SearchError>>,
) -> Result<Vec<Vec<TokenId>>, (usize, SearchError)> {
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| match r {
            Ok(h) => Ok(h.into_iter().next().map(|h| h.prefix).unwrap_or_default()),
            Err(e) => Err((i, e)),
        })
        .collect()
}

/// `rank ||| sequence ||| s` records. Ranks start at 1 for every sentence, so
/// a rank of 1 marks the start of the next sentence's list.
pub fn format_nbest(line: &BagLine, hyps: &[Hypothesis], vocab: &Vocabulary, n: usize) -> String {
    let mut out = String::new();
    for (rank, h) in hyps.iter().take(n).enumerate() {
        let _ = writeln!(
            out,
            "{} ||| {} ||| {}",
            rank + 1,
            line.render(&h.prefix, vocab),
            h.score
        );
    }
    out
}
