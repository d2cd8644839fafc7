//! Word ordering: recover a fluent sentence from an unordered bag of words.
//!
//! This crate holds the algorithmic part of the toolkit and needs only `alloc`:
//!
//! * [`vocab`] and [`bag`]: vocabularies, token sequences and multisets.
//! * [`ngram`]: back-off n-gram models with ARPA interchange and unigram tables.
//! * [`neural`]: feedforward, recurrent and bag-conditioned attention scorers
//!   trained with hand-written backpropagation.
//! * [`search`]: multiset-constrained beam search with future-cost and
//!   upper-bound heuristics, hypothesis recombination and an exhaustive oracle.
//! * [`combine`]: log-linear scorer combination and derivative-free weight tuning.
//! * [`bleu`]: corpus BLEU.
//!
//! File IO, the model container format, timing and the command line live in the
//! `wordorder` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bag;
pub mod bleu;
pub mod combine;
pub mod neural;
pub mod ngram;
pub mod scorer;
pub mod search;
pub mod vocab;

pub use bag::{bag_of_words, sorted_bag_sequence, Bag, TokenId, TokenSequence};
pub use bleu::{corpus_bleu, BleuError, BleuReport};
pub use combine::{LogLinearCombo, TuneResult};
pub use scorer::{DecoderState, Scorer, ScorerError};
pub use search::{beam_search, exhaustive_decode, BeamConfig, Heuristic, Hypothesis};
pub use vocab::{build_vocab, UnknownMode, VocabError, Vocabulary};
