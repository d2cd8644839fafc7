//! Neural scorers: feedforward n-gram model, LSTM language model and the
//! bag-conditioned attention decoder, with hand-written backpropagation.

mod bag2seq;
mod gradcheck;
mod lstm;
mod nplm;
mod rnnlm;
mod tensor;
mod train;

pub use bag2seq::{attention_context, Bag2Seq, Bag2SeqParams};
pub use gradcheck::{gradient_check, gradient_check_model, GradCheckReport, TinyConfig};
pub use nplm::{Nplm, NplmParams};
pub use rnnlm::{RnnLm, RnnLmParams};
pub use tensor::Tensor;
pub use train::{perplexity, train, train_model, EpochReport, TrainConfig, TrainError};

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::bag::{Bag, TokenId};
use crate::scorer::{DecoderState, Scorer, ScorerError};

/// Named parameter tensors in a fixed declaration order.
pub trait Parameters: Clone {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)>;
    fn tensors_mut(&mut self) -> Vec<&mut Tensor>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x = 0.0);
        }
        z
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.is_finite())
    }
}

/// A scorer trained by minimizing per-token cross-entropy.
pub trait NeuralModel: Scorer {
    type Params: Parameters;

    fn params(&self) -> &Self::Params;
    fn params_mut(&mut self) -> &mut Self::Params;

    /// Negative log-likelihood of `sentence` followed by end-of-sentence, and
    /// the number of predicted tokens. When `grad` is given, the gradient of
    /// the loss is added into it.
    fn sentence_loss(&self, sentence: &[TokenId], grad: Option<&mut Self::Params>) -> (f64, usize);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Architecture {
    Nplm,
    Rnnlm,
    Bag2Seq,
}

impl Architecture {
    pub const ALL: [Architecture; 3] = [Architecture::Nplm, Architecture::Rnnlm, Architecture::Bag2Seq];

    pub fn name(self) -> &'static str {
        match self {
            Architecture::Nplm => "nplm",
            Architecture::Rnnlm => "rnnlm",
            Architecture::Bag2Seq => "bag2seq",
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Architecture::Nplm => 1,
            Architecture::Rnnlm => 2,
            Architecture::Bag2Seq => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.tag() == tag)
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Architecture {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|a| a.name() == s).ok_or(())
    }
}

/// Any trained neural scorer.
#[derive(Clone, Debug, PartialEq)]
pub enum AnyModel {
    Nplm(Nplm),
    Rnnlm(RnnLm),
    Bag2Seq(Bag2Seq),
}

impl AnyModel {
    pub fn architecture(&self) -> Architecture {
        match self {
            AnyModel::Nplm(_) => Architecture::Nplm,
            AnyModel::Rnnlm(_) => Architecture::Rnnlm,
            AnyModel::Bag2Seq(_) => Architecture::Bag2Seq,
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        match self {
            AnyModel::Nplm(m) => m.params.tensors(),
            AnyModel::Rnnlm(m) => m.params.tensors(),
            AnyModel::Bag2Seq(m) => m.params.tensors(),
        }
    }

    fn scorer(&self) -> &dyn Scorer {
        match self {
            AnyModel::Nplm(m) => m,
            AnyModel::Rnnlm(m) => m,
            AnyModel::Bag2Seq(m) => m,
        }
    }
}

impl Scorer for AnyModel {
    fn vocab_size(&self) -> usize {
        self.scorer().vocab_size()
    }

    fn init(&self, bag: &Bag) -> Result<DecoderState, ScorerError> {
        self.scorer().init(bag)
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        self.scorer().log_probs(state)
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        self.scorer().advance(state, word)
    }
}

#[cfg(test)]
mod tests;
