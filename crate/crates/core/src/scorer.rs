//! The step interface every model exposes to the decoder.

use alloc::sync::Arc;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bag::{Bag, TokenId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScorerError {
    #[error("this scorer conditions on the bag and cannot start from an empty one")]
    EmptyBag,
    #[error("decoder state does not belong to this scorer")]
    StateMismatch,
}

/// Recurrent cell contents.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState {
    pub hidden: Vec<f64>,
    pub cell: Vec<f64>,
}

/// Encoder output for one bag, shared by every hypothesis decoding it.
#[derive(Debug, PartialEq)]
pub struct Annotations {
    /// Canonically sorted bag the annotations were computed from.
    pub source: Vec<TokenId>,
    /// One annotation vector per source token.
    pub vectors: Vec<Vec<f64>>,
    /// Attention key for each annotation.
    pub keys: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentiveState {
    pub recurrent: RecurrentState,
    /// Context vector fed into the step that produced `recurrent`.
    pub context: Vec<f64>,
    pub annotations: Arc<Annotations>,
}

/// Opaque per-scorer decoding state. Advancing a state produces a new value
/// and never mutates the original, so hypotheses can branch freely.
#[derive(Clone, Debug, PartialEq)]
pub enum DecoderState {
    /// Last tokens of the history, for models with a fixed context window.
    History(Vec<TokenId>),
    Recurrent(Arc<RecurrentState>),
    Attentive(Arc<AttentiveState>),
}

impl DecoderState {
    pub fn history(&self) -> Option<&[TokenId]> {
        match self {
            DecoderState::History(h) => Some(h),
            _ => None,
        }
    }
}

/// A left-to-right model over a fixed vocabulary.
///
/// A fresh state from [`Scorer::init`] has already consumed the begin-of-sentence
/// token; [`Scorer::log_probs`] then gives the natural-log distribution over the
/// whole vocabulary for the next position.
pub trait Scorer: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn init(&self, bag: &Bag) -> Result<DecoderState, ScorerError>;

    fn log_probs(&self, state: &DecoderState) -> Vec<f64>;

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState;

    /// Consumes `word` and returns the conditional for the position after it.
    fn step(&self, state: &DecoderState, word: TokenId) -> (Vec<f64>, DecoderState) {
        let next = self.advance(state, word);
        (self.log_probs(&next), next)
    }
}

impl<S: Scorer + ?Sized> Scorer for &S {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }
    fn init(&self, bag: &Bag) -> Result<DecoderState, ScorerError> {
        (**self).init(bag)
    }
    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        (**self).log_probs(state)
    }
    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        (**self).advance(state, word)
    }
}

/// Natural-log score of `sentence` followed by end-of-sentence.
pub fn sentence_logprob<S: Scorer + ?Sized>(
    scorer: &S,
    bag: &Bag,
    sentence: &[TokenId],
    eos: TokenId,
) -> Result<f64, ScorerError> {
    let mut state = scorer.init(bag)?;
    let mut dist = scorer.log_probs(&state);
    let mut total = 0.0;
    for &w in sentence {
        total += dist[w as usize];
        let (d, s) = scorer.step(&state, w);
        dist = d;
        state = s;
    }
    Ok(total + dist[eos as usize])
}
