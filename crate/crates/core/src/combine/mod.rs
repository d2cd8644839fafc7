//! Log-linear combination of scorers and tuning of the combination weights.

mod tune;

pub use tune::{
    maximize_bounded, tune_weights, tune_weights_sequential, OptimizerOptions, TuneError, TuneResult, WEIGHT_MAX,
};

use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

use crate::bag::{Bag, TokenId};
use crate::scorer::{DecoderState, Scorer, ScorerError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CombineError {
    #[error("a combination needs at least one member")]
    NoMembers,
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight {index} is not finite")]
    NonFiniteWeight { index: usize },
    #[error("member {index} has a vocabulary of {got} tokens, expected {expected}")]
    VocabMismatch { index: usize, expected: usize, got: usize },
    #[error("expected {expected} member states, got {got}")]
    StateMismatch { expected: usize, got: usize },
}

#[derive(Clone, Copy)]
pub struct Member<'a> {
    pub name: &'a str,
    pub scorer: &'a dyn Scorer,
    pub weight: f64,
}

/// `score(w) = Σ_m λ_m log P_m(w | state_m)`; the sum is not renormalized.
#[derive(Clone)]
pub struct LogLinearCombo<'a> {
    members: Vec<Member<'a>>,
    eos: TokenId,
}

impl<'a> LogLinearCombo<'a> {
    pub fn new(members: Vec<Member<'a>>, eos: TokenId) -> Result<Self, CombineError> {
        let first = members.first().ok_or(CombineError::NoMembers)?;
        let expected = first.scorer.vocab_size();
        for (index, m) in members.iter().enumerate() {
            if !m.weight.is_finite() {
                return Err(CombineError::NonFiniteWeight { index });
            }
            let got = m.scorer.vocab_size();
            if got != expected {
                return Err(CombineError::VocabMismatch { index, expected, got });
            }
        }
        Ok(LogLinearCombo { members, eos })
    }

    /// A one-member combination with weight 1.
    pub fn single(name: &'a str, scorer: &'a dyn Scorer, eos: TokenId) -> Self {
        LogLinearCombo {
            members: alloc::vec![Member {
                name,
                scorer,
                weight: 1.0
            }],
            eos,
        }
    }

    pub fn members(&self) -> &[Member<'a>] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn vocab_size(&self) -> usize {
        self.members[0].scorer.vocab_size()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.members.iter().map(|m| String::from(m.name)).collect()
    }

    /// Same members with new weights.
    pub fn with_weights(&self, weights: &[f64]) -> Result<Self, CombineError> {
        if weights.len() != self.members.len() {
            return Err(CombineError::WeightCount {
                expected: self.members.len(),
                got: weights.len(),
            });
        }
        let members = self
            .members
            .iter()
            .zip(weights)
            .map(|(m, &weight)| Member { weight, ..*m })
            .collect();
        LogLinearCombo::new(members, self.eos)
    }

    pub fn init(&self, bag: &Bag) -> Result<Vec<DecoderState>, ScorerError> {
        self.members.iter().map(|m| m.scorer.init(bag)).collect()
    }

    /// Weighted sum of the members' next-token log distributions.
    pub fn log_scores(&self, states: &[DecoderState]) -> Vec<f64> {
        let mut combined = alloc::vec![0.0; self.vocab_size()];
        for (m, state) in self.members.iter().zip(states) {
            let dist = m.scorer.log_probs(state);
            for (c, d) in combined.iter_mut().zip(dist) {
                *c += m.weight * d;
            }
        }
        combined
    }

    /// Advances every member's state by `word`.
    pub fn advance(&self, states: &[DecoderState], word: TokenId) -> Vec<DecoderState> {
        self.members
            .iter()
            .zip(states)
            .map(|(m, s)| m.scorer.advance(s, word))
            .collect()
    }

    /// Consumes `word` in every member and returns the combined scores for the
    /// following position together with the new states.
    pub fn combined_step(
        &self,
        states: &[DecoderState],
        word: TokenId,
    ) -> Result<(Vec<f64>, Vec<DecoderState>), CombineError> {
        if states.len() != self.members.len() {
            return Err(CombineError::StateMismatch {
                expected: self.members.len(),
                got: states.len(),
            });
        }
        let next = self.advance(states, word);
        Ok((self.log_scores(&next), next))
    }
}
