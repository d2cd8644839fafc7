use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::tensor::{log_softmax, tanh, Tensor};
use super::{NeuralModel, Parameters};
use crate::bag::{Bag, TokenId};
use crate::scorer::{DecoderState, Scorer, ScorerError};

/// Feedforward n-gram model: `context` embeddings → tanh hidden layer → softmax.
#[derive(Clone, Debug, PartialEq)]
pub struct NplmParams {
    /// `|V| x E`
    pub embedding: Tensor,
    /// `H x (context * E)`
    pub hidden_weight: Tensor,
    /// `H x 1`
    pub hidden_bias: Tensor,
    /// `|V| x H`
    pub output_weight: Tensor,
    /// `|V| x 1`
    pub output_bias: Tensor,
}

impl NplmParams {
    pub fn init<R: Rng>(vocab: usize, embed: usize, hidden: usize, context: usize, scale: f64, rng: &mut R) -> Self {
        NplmParams {
            embedding: Tensor::uniform(vocab, embed, scale, rng),
            hidden_weight: Tensor::uniform(hidden, context * embed, scale, rng),
            hidden_bias: Tensor::uniform(hidden, 1, scale, rng),
            output_weight: Tensor::uniform(vocab, hidden, scale, rng),
            output_bias: Tensor::uniform(vocab, 1, scale, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_weight.rows
    }

    /// Number of history tokens (n - 1).
    pub fn context(&self) -> usize {
        self.hidden_weight.cols / self.embedding.cols
    }
}

impl Parameters for NplmParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("embedding", &self.embedding),
            ("hidden_weight", &self.hidden_weight),
            ("hidden_bias", &self.hidden_bias),
            ("output_weight", &self.output_weight),
            ("output_bias", &self.output_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.hidden_weight,
            &mut self.hidden_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nplm {
    pub params: NplmParams,
    bos: TokenId,
    eos: TokenId,
}

impl Nplm {
    pub fn new(params: NplmParams, bos: TokenId, eos: TokenId) -> Self {
        Nplm { params, bos, eos }
    }

    fn features(&self, history: &[TokenId]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.params.hidden_weight.cols);
        for &w in history {
            x.extend_from_slice(self.params.embedding.row(w as usize));
        }
        x
    }

    fn hidden(&self, x: &[f64]) -> Vec<f64> {
        let mut h = self.params.hidden_weight.affine(x, &self.params.hidden_bias);
        h.iter_mut().for_each(|v| *v = tanh(*v));
        h
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        let mut logits = self.params.output_weight.affine(hidden, &self.params.output_bias);
        log_softmax(&mut logits);
        logits
    }
}

impl Scorer for Nplm {
    fn vocab_size(&self) -> usize {
        self.params.vocab_size()
    }

    fn init(&self, _bag: &Bag) -> Result<DecoderState, ScorerError> {
        Ok(DecoderState::History(vec![self.bos; self.params.context()]))
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        let history = state.history().expect("NPLM expects a history state");
        self.output(&self.hidden(&self.features(history)))
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        let history = state.history().expect("NPLM expects a history state");
        let mut next = history[1..].to_vec();
        next.push(word);
        DecoderState::History(next)
    }
}

impl NeuralModel for Nplm {
    type Params = NplmParams;

    fn params(&self) -> &NplmParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut NplmParams {
        &mut self.params
    }

    fn sentence_loss(&self, sentence: &[TokenId], mut grad: Option<&mut NplmParams>) -> (f64, usize) {
        let p = &self.params;
        let n = p.context();
        let embed = p.embed_dim();
        let mut padded = vec![self.bos; n];
        padded.extend_from_slice(sentence);
        padded.push(self.eos);
        let mut loss = 0.0;
        for t in n..padded.len() {
            let history = &padded[t - n..t];
            let target = padded[t] as usize;
            let x = self.features(history);
            let h = self.hidden(&x);
            let dist = self.output(&h);
            loss -= dist[target];
            if let Some(g) = grad.as_deref_mut() {
                let mut dlogits: Vec<f64> = dist.iter().map(|&l| libm::exp(l)).collect();
                dlogits[target] -= 1.0;
                g.output_weight.outer_acc(&dlogits, &h);
                g.output_bias.add_assign(&dlogits);
                let mut dh = vec![0.0; h.len()];
                p.output_weight.matvec_t_acc(&dlogits, &mut dh);
                let dz: Vec<f64> = dh.iter().zip(&h).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
                g.hidden_weight.outer_acc(&dz, &x);
                g.hidden_bias.add_assign(&dz);
                let mut dx = vec![0.0; x.len()];
                p.hidden_weight.matvec_t_acc(&dz, &mut dx);
                for (slot, &w) in history.iter().enumerate() {
                    let row = g.embedding.row_mut(w as usize);
                    for (r, &d) in row.iter_mut().zip(&dx[slot * embed..(slot + 1) * embed]) {
                        *r += d;
                    }
                }
            }
        }
        (loss, padded.len() - n)
    }
}
