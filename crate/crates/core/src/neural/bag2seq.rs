//! Bag-conditioned attention decoder.
//!
//! The encoder maps every token of the canonically sorted bag to an annotation
//! `a_i = tanh(W_enc e_i + b_enc)` with no recurrence, so the annotations do not
//! depend on the order the bag was presented in. The decoder is an LSTM whose
//! input at each step is the previous word's embedding and an additive-attention
//! context over the annotations; its initial hidden state is a tanh-affine map
//! of the mean annotation. The output layer sees both the hidden state and the
//! context.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::lstm;
use super::tensor::{axpy, concat, dot, log_softmax, tanh, Tensor};
use super::{NeuralModel, Parameters};
use crate::bag::{bag_of_words, Bag, TokenId};
use crate::scorer::{Annotations, AttentiveState, DecoderState, RecurrentState, Scorer, ScorerError};
use crate::vocab::Vocabulary;

#[derive(Clone, Debug, PartialEq)]
pub struct Bag2SeqParams {
    /// `|V| x E`, shared by encoder and decoder.
    pub embedding: Tensor,
    /// `A x E`
    pub encoder_weight: Tensor,
    /// `A x 1`
    pub encoder_bias: Tensor,
    /// `H x A`
    pub init_weight: Tensor,
    /// `H x 1`
    pub init_bias: Tensor,
    /// `A x H`, projects the decoder state.
    pub attention_state: Tensor,
    /// `A x A`, projects annotations into attention keys.
    pub attention_annotation: Tensor,
    /// `A x 1`, scores `tanh(state + key)`.
    pub attention_vector: Tensor,
    /// `4H x (E + A + H)`
    pub lstm_weight: Tensor,
    /// `4H x 1`
    pub lstm_bias: Tensor,
    /// `|V| x (H + A)`
    pub output_weight: Tensor,
    /// `|V| x 1`
    pub output_bias: Tensor,
}

impl Bag2SeqParams {
    pub fn init<R: Rng>(vocab: usize, embed: usize, annotation: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        Bag2SeqParams {
            embedding: Tensor::uniform(vocab, embed, scale, rng),
            encoder_weight: Tensor::uniform(annotation, embed, scale, rng),
            encoder_bias: Tensor::uniform(annotation, 1, scale, rng),
            init_weight: Tensor::uniform(hidden, annotation, scale, rng),
            init_bias: Tensor::uniform(hidden, 1, scale, rng),
            attention_state: Tensor::uniform(annotation, hidden, scale, rng),
            attention_annotation: Tensor::uniform(annotation, annotation, scale, rng),
            attention_vector: Tensor::uniform(annotation, 1, scale, rng),
            lstm_weight: Tensor::uniform(4 * hidden, embed + annotation + hidden, scale, rng),
            lstm_bias: Tensor::uniform(4 * hidden, 1, scale, rng),
            output_weight: Tensor::uniform(vocab, hidden + annotation, scale, rng),
            output_bias: Tensor::uniform(vocab, 1, scale, rng),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows
    }

    pub fn embed_dim(&self) -> usize {
        self.embedding.cols
    }

    pub fn annotation_dim(&self) -> usize {
        self.encoder_weight.rows
    }

    pub fn hidden_dim(&self) -> usize {
        self.init_weight.rows
    }
}

impl Parameters for Bag2SeqParams {
    fn tensors(&self) -> Vec<(&'static str, &Tensor)> {
        vec![
            ("embedding", &self.embedding),
            ("encoder_weight", &self.encoder_weight),
            ("encoder_bias", &self.encoder_bias),
            ("init_weight", &self.init_weight),
            ("init_bias", &self.init_bias),
            ("attention_state", &self.attention_state),
            ("attention_annotation", &self.attention_annotation),
            ("attention_vector", &self.attention_vector),
            ("lstm_weight", &self.lstm_weight),
            ("lstm_bias", &self.lstm_bias),
            ("output_weight", &self.output_weight),
            ("output_bias", &self.output_bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        vec![
            &mut self.embedding,
            &mut self.encoder_weight,
            &mut self.encoder_bias,
            &mut self.init_weight,
            &mut self.init_bias,
            &mut self.attention_state,
            &mut self.attention_annotation,
            &mut self.attention_vector,
            &mut self.lstm_weight,
            &mut self.lstm_bias,
            &mut self.output_weight,
            &mut self.output_bias,
        ]
    }
}

/// Additive attention of `hidden` over `annotations`.
/// Returns the attention weights and the context vector `Σ α_i a_i`.
pub fn attention_context(params: &Bag2SeqParams, hidden: &[f64], annotations: &Annotations) -> (Vec<f64>, Vec<f64>) {
    let mut query = vec![0.0; params.annotation_dim()];
    params.attention_state.matvec(hidden, &mut query);
    let v = &params.attention_vector.data;
    let mut weights: Vec<f64> = annotations
        .keys
        .iter()
        .map(|key| query.iter().zip(key).zip(v).map(|((q, k), vj)| vj * tanh(q + k)).sum())
        .collect();
    let max = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    weights.iter_mut().for_each(|e| *e = libm::exp(*e - max));
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    let context = weighted_sum(&weights, &annotations.vectors);
    (weights, context)
}

/// Softmax-normalized energies plus the `tanh(W_a h + k_i)` activations.
fn attention_weights(params: &Bag2SeqParams, hidden: &[f64], keys: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let dim = params.annotation_dim();
    let mut query = vec![0.0; dim];
    params.attention_state.matvec(hidden, &mut query);
    let v = &params.attention_vector.data;
    let mut activations = Vec::with_capacity(keys.len());
    let mut energies = Vec::with_capacity(keys.len());
    for key in keys {
        let t: Vec<f64> = query.iter().zip(key).map(|(q, k)| tanh(q + k)).collect();
        energies.push(dot(v, &t));
        activations.push(t);
    }
    let max = energies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = energies.iter().map(|&e| libm::exp(e - max)).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
    (weights, activations)
}

fn weighted_sum(weights: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (&w, v) in weights.iter().zip(vectors) {
        axpy(w, v, &mut out);
    }
    out
}

/// `P(w_t | w_1 .. w_{t-1}, bag)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bag2Seq {
    pub params: Bag2SeqParams,
    ranks: Vec<u32>,
    bos: TokenId,
    eos: TokenId,
}

impl Bag2Seq {
    pub fn new(params: Bag2SeqParams, vocab: &Vocabulary) -> Self {
        Bag2Seq {
            params,
            ranks: vocab.collation_ranks(),
            bos: vocab.bos(),
            eos: vocab.eos(),
        }
    }

    /// Annotations and attention keys for a bag, computed once per sentence.
    pub fn encode(&self, bag: &Bag) -> Result<Annotations, ScorerError> {
        if bag.is_empty() {
            return Err(ScorerError::EmptyBag);
        }
        let p = &self.params;
        let source = bag.sorted_by_rank(&self.ranks);
        let vectors: Vec<Vec<f64>> = source.iter().map(|&w| self.annotate(w)).collect();
        let keys = vectors
            .iter()
            .map(|a| {
                let mut k = vec![0.0; p.annotation_dim()];
                p.attention_annotation.matvec(a, &mut k);
                k
            })
            .collect();
        Ok(Annotations { source, vectors, keys })
    }

    fn annotate(&self, word: TokenId) -> Vec<f64> {
        let p = &self.params;
        let mut a = p.encoder_weight.affine(p.embedding.row(word as usize), &p.encoder_bias);
        a.iter_mut().for_each(|x| *x = tanh(*x));
        a
    }

    fn initial_hidden(&self, vectors: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        let p = &self.params;
        let mut mean = vec![0.0; p.annotation_dim()];
        let scale = 1.0 / vectors.len() as f64;
        for a in vectors {
            axpy(scale, a, &mut mean);
        }
        let mut h = p.init_weight.affine(&mean, &p.init_bias);
        h.iter_mut().for_each(|x| *x = tanh(*x));
        (h, mean)
    }

    fn attentive<'s>(&self, state: &'s DecoderState) -> &'s AttentiveState {
        match state {
            DecoderState::Attentive(a) => a,
            _ => panic!("bag2seq expects an attentive decoder state"),
        }
    }

    fn step_from(&self, hidden: &[f64], cell: &[f64], word: TokenId, annotations: &Arc<Annotations>) -> DecoderState {
        let p = &self.params;
        let (_, context) = attention_context(p, hidden, annotations);
        let x = concat(&[p.embedding.row(word as usize), &context]);
        let (hidden, cell) = lstm::step(&p.lstm_weight, &p.lstm_bias, &x, hidden, cell);
        DecoderState::Attentive(Arc::new(AttentiveState {
            recurrent: RecurrentState { hidden, cell },
            context,
            annotations: Arc::clone(annotations),
        }))
    }
}

impl Scorer for Bag2Seq {
    fn vocab_size(&self) -> usize {
        self.params.vocab_size()
    }

    fn init(&self, bag: &Bag) -> Result<DecoderState, ScorerError> {
        let annotations = Arc::new(self.encode(bag)?);
        let (h0, _) = self.initial_hidden(&annotations.vectors);
        let c0 = vec![0.0; h0.len()];
        Ok(self.step_from(&h0, &c0, self.bos, &annotations))
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        let s = self.attentive(state);
        let p = &self.params;
        let out = concat(&[&s.recurrent.hidden, &s.context]);
        let mut logits = p.output_weight.affine(&out, &p.output_bias);
        log_softmax(&mut logits);
        logits
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        let s = self.attentive(state);
        self.step_from(&s.recurrent.hidden, &s.recurrent.cell, word, &s.annotations)
    }
}

struct StepCache {
    h_prev: Vec<f64>,
    activations: Vec<Vec<f64>>,
    weights: Vec<f64>,
    output_input: Vec<f64>,
    lstm: lstm::LstmCache,
    dist: Vec<f64>,
}

impl NeuralModel for Bag2Seq {
    type Params = Bag2SeqParams;

    fn params(&self) -> &Bag2SeqParams {
        &self.params
    }

    fn params_mut(&mut self) -> &mut Bag2SeqParams {
        &mut self.params
    }

    /// Trains on the sorted bag of `sentence` as input and `sentence` as target.
    fn sentence_loss(&self, sentence: &[TokenId], mut grad: Option<&mut Bag2SeqParams>) -> (f64, usize) {
        if sentence.is_empty() {
            return (0.0, 0);
        }
        let p = &self.params;
        let (embed, adim, hidden) = (p.embed_dim(), p.annotation_dim(), p.hidden_dim());
        let annotations = self.encode(&bag_of_words(sentence)).expect("non-empty bag");
        let (h0, mean) = self.initial_hidden(&annotations.vectors);

        let inputs: Vec<TokenId> = core::iter::once(self.bos).chain(sentence.iter().copied()).collect();
        let targets: Vec<TokenId> = sentence.iter().copied().chain(core::iter::once(self.eos)).collect();

        let mut h = h0.clone();
        let mut c = vec![0.0; hidden];
        let mut steps: Vec<StepCache> = Vec::with_capacity(inputs.len());
        let mut loss = 0.0;
        for (&x, &y) in inputs.iter().zip(&targets) {
            let (weights, activations) = attention_weights(p, &h, &annotations.keys);
            let context = weighted_sum(&weights, &annotations.vectors);
            let input = concat(&[p.embedding.row(x as usize), &context]);
            let (h_next, c_next, cache) = lstm::forward(&p.lstm_weight, &p.lstm_bias, &input, &h, &c);
            let output_input = concat(&[&h_next, &context]);
            let mut dist = p.output_weight.affine(&output_input, &p.output_bias);
            log_softmax(&mut dist);
            loss -= dist[y as usize];
            steps.push(StepCache {
                h_prev: core::mem::replace(&mut h, h_next),
                activations,
                weights,
                output_input,
                lstm: cache,
                dist,
            });
            c = c_next;
        }

        let Some(g) = grad.as_deref_mut() else {
            return (loss, targets.len());
        };

        let n_src = annotations.vectors.len();
        let mut d_annot = vec![vec![0.0; adim]; n_src];
        let mut d_keys = vec![vec![0.0; adim]; n_src];
        let mut dh_next = vec![0.0; hidden];
        let mut dc_next = vec![0.0; hidden];
        let v = &p.attention_vector.data;
        for t in (0..inputs.len()).rev() {
            let s = &steps[t];
            let mut dlogits: Vec<f64> = s.dist.iter().map(|&l| libm::exp(l)).collect();
            dlogits[targets[t] as usize] -= 1.0;
            g.output_weight.outer_acc(&dlogits, &s.output_input);
            g.output_bias.add_assign(&dlogits);
            let mut dout = vec![0.0; hidden + adim];
            p.output_weight.matvec_t_acc(&dlogits, &mut dout);

            let mut dh = dh_next.clone();
            axpy(1.0, &dout[..hidden], &mut dh);
            let (dinput, dc_prev) = lstm::backward(
                &p.lstm_weight,
                &s.lstm,
                &dh,
                &dc_next,
                &mut g.lstm_weight,
                &mut g.lstm_bias,
            );
            let row = g.embedding.row_mut(inputs[t] as usize);
            axpy(1.0, &dinput[..embed], row);
            let mut dcontext = dout[hidden..].to_vec();
            axpy(1.0, &dinput[embed..embed + adim], &mut dcontext);
            let mut dh_prev = dinput[embed + adim..].to_vec();

            // context = Σ α_i a_i
            let dalpha: Vec<f64> = annotations.vectors.iter().map(|a| dot(&dcontext, a)).collect();
            let mean_dalpha: f64 = s.weights.iter().zip(&dalpha).map(|(a, d)| a * d).sum();
            let mut dquery = vec![0.0; adim];
            for i in 0..n_src {
                axpy(s.weights[i], &dcontext, &mut d_annot[i]);
                let de = s.weights[i] * (dalpha[i] - mean_dalpha);
                if de == 0.0 {
                    continue;
                }
                let act = &s.activations[i];
                axpy(de, act, &mut g.attention_vector.data);
                for k in 0..adim {
                    let du = de * v[k] * (1.0 - act[k] * act[k]);
                    dquery[k] += du;
                    d_keys[i][k] += du;
                }
            }
            g.attention_state.outer_acc(&dquery, &s.h_prev);
            p.attention_state.matvec_t_acc(&dquery, &mut dh_prev);

            dh_next = dh_prev;
            dc_next = dc_prev;
        }

        // h0 = tanh(W_init mean + b_init)
        let dz: Vec<f64> = dh_next.iter().zip(&h0).map(|(d, hv)| d * (1.0 - hv * hv)).collect();
        g.init_weight.outer_acc(&dz, &mean);
        g.init_bias.add_assign(&dz);
        let mut dmean = vec![0.0; adim];
        p.init_weight.matvec_t_acc(&dz, &mut dmean);
        let scale = 1.0 / n_src as f64;

        for i in 0..n_src {
            let a = &annotations.vectors[i];
            axpy(scale, &dmean, &mut d_annot[i]);
            g.attention_annotation.outer_acc(&d_keys[i], a);
            p.attention_annotation.matvec_t_acc(&d_keys[i], &mut d_annot[i]);
            let dz: Vec<f64> = d_annot[i].iter().zip(a).map(|(d, av)| d * (1.0 - av * av)).collect();
            let word = annotations.source[i] as usize;
            g.encoder_weight.outer_acc(&dz, p.embedding.row(word));
            g.encoder_bias.add_assign(&dz);
            p.encoder_weight.matvec_t_acc(&dz, g.embedding.row_mut(word));
        }
        (loss, targets.len())
    }
}
