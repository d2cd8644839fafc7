use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::lstm;
use super::tensor::{log_softmax, Tensor};
use super::{NeuralModel, Parameters};
use crate::bag::{Bag, TokenId};
use crate::scorer::{DecoderState, RecurrentState, Scorer, ScorerError};

/// Single-layer LSTM language model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnLmParams {
    /// `|V| x E`
    pub embedding: Tensor,
    /// `4H x (E + H)`
    pub lstm_weight: Tensor,
    /// `4H x 1`
    pub lstm_bias: Tensor,
    /// `|V| x H`
    pub output_weight: Tensor,
    /// `|V| x 1`
    pub output_bias: Tensor,
}

impl RnnLmParams {
    pub fn init<R: Rng>(vocab: usize, embed: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        RnnLmParams {
            embedding: Tensor::uniform(vocab, embed, scale, rng),
            lstm_weight: Tensor::uniform(4 * hidden, embed + hidden, scale, rng),
            lstm_bias: Tensor::uniform(4 * hidden, 1, scale, rng),
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
        self.output_weight.cols
    }
}

impl Parameters for RnnLmParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("embedding", &self.embedding),
            ("lstm_weight", &self.lstm_weight),
            ("lstm_bias", &self.lstm_bias),
            ("output_weight", &self.output_weight),
            ("output_bias", &self.output_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.lstm_weight,
            &mut self.lstm_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }
}

/// LSTM language model: `P(w_t | w_1 .. w_{t-1})`.
#[derive(Clone, Debug, PartialEq)]
pub struct RnnLm {
    pub params: RnnLmParams,
    bos: TokenId,
    eos: TokenId,
}

impl RnnLm {
    pub fn new(params: RnnLmParams, bos: TokenId, eos: TokenId) -> Self {
        RnnLm { params, bos, eos }
    }

    fn recurrent<'s>(&self, state: &'s DecoderState) -> &'s RecurrentState {
        match state {
            DecoderState::Recurrent(r) => r,
            _ => panic!("RNNLM expects a recurrent decoder state"),
        }
    }

    fn output(&self, hidden: &[f64]) -> Vec<f64> {
        let p = &self.params;
        let mut logits = p.output_weight.affine(hidden, &p.output_bias);
        log_softmax(&mut logits);
        logits
    }
}

impl Scorer for RnnLm {
    fn vocab_size(&self) -> usize {
        self.params.vocab_size()
    }

    fn init(&self, _bag: &Bag) -> Result<DecoderState, ScorerError> {
        let h = self.params.hidden_dim();
        let zero = DecoderState::Recurrent(Arc::new(RecurrentState {
            hidden: vec![0.0; h],
            cell: vec![0.0; h],
        }));
        Ok(self.advance(&zero, self.bos))
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        self.output(&self.recurrent(state).hidden)
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        let prev = self.recurrent(state);
        let p = &self.params;
        let (hidden, cell) = lstm::step(
            &p.lstm_weight,
            &p.lstm_bias,
            p.embedding.row(word as usize),
            &prev.hidden,
            &prev.cell,
        );
        DecoderState::Recurrent(Arc::new(RecurrentState { hidden, cell }))
    }
}

impl NeuralModel for RnnLm {
    type Params = RnnLmParams;

    fn params(&self) -> &RnnLmParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut RnnLmParams {
        &mut self.params
    }

    fn sentence_loss(&self, sentence: &[TokenId], mut grad: Option<&mut RnnLmParams>) -> (f64, usize) {
        let p = &self.params;
        let hidden = p.hidden_dim();
        let embed = p.embed_dim();
        let inputs: Vec<TokenId> = core::iter::once(self.bos).chain(sentence.iter().copied()).collect();
        let targets: Vec<TokenId> = sentence.iter().copied().chain(core::iter::once(self.eos)).collect();

        let mut h = vec![0.0; hidden];
        let mut c = vec![0.0; hidden];
        let mut caches = Vec::with_capacity(inputs.len());
        let mut hiddens = Vec::with_capacity(inputs.len());
        let mut dists = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        for (&x, &y) in inputs.iter().zip(&targets) {
            let (h_next, c_next, cache) =
                lstm::forward(&p.lstm_weight, &p.lstm_bias, p.embedding.row(x as usize), &h, &c);
            let dist = self.output(&h_next);
            loss -= dist[y as usize];
            h = h_next;
            c = c_next;
            caches.push(cache);
            hiddens.push(h.clone());
            dists.push(dist);
        }

        if let Some(g) = grad.as_deref_mut() {
            let mut dh_next = vec![0.0; hidden];
            let mut dc_next = vec![0.0; hidden];
            for t in (0..inputs.len()).rev() {
                let mut dlogits: Vec<f64> = dists[t].iter().map(|&l| libm::exp(l)).collect();
                dlogits[targets[t] as usize] -= 1.0;
                g.output_weight.outer_acc(&dlogits, &hiddens[t]);
                g.output_bias.add_assign(&dlogits);
                let mut dh = dh_next.clone();
                p.output_weight.matvec_t_acc(&dlogits, &mut dh);
                let (dinput, dc_prev) = lstm::backward(
                    &p.lstm_weight,
                    &caches[t],
                    &dh,
                    &dc_next,
                    &mut g.lstm_weight,
                    &mut g.lstm_bias,
                );
                let row = g.embedding.row_mut(inputs[t] as usize);
                for (r, &d) in row.iter_mut().zip(&dinput[..embed]) {
                    *r += d;
                }
                dh_next = dinput[embed..].to_vec();
                dc_next = dc_prev;
            }
        }
        (loss, targets.len())
    }
}
