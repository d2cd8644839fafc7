use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{
    AnyModel, Architecture, Bag2Seq, Bag2SeqParams, NeuralModel, Nplm, NplmParams, Parameters, RnnLm, RnnLmParams,
};
use crate::bag::TokenSequence;
use crate::vocab::Vocabulary;

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub embed: usize,
    pub hidden: usize,
    /// Encoder annotation size for bag2seq.
    pub annotation: usize,
    /// History length of the feedforward model (n - 1).
    pub context: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clipping threshold.
    pub clip_norm: f64,
    /// Sentences per update.
    pub batch_size: usize,
    pub seed: u64,
    /// Parameters start uniform in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    /// Learning-rate factor applied when dev perplexity stops improving.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    /// Penn-Treebank-sized dimensions.
    fn default() -> Self {
        TrainConfig {
            embed: 300,
            hidden: 500,
            annotation: 500,
            context: 4,
            epochs: 10,
            learning_rate: 1.0,
            clip_norm: 5.0,
            batch_size: 20,
            seed: 1,
            init_scale: 0.08,
            lr_decay: 0.5,
        }
    }
}

impl TrainConfig {
    /// Small dimensions for toy corpora and CI.
    pub fn desk() -> Self {
        TrainConfig {
            embed: 32,
            hidden: 64,
            annotation: 64,
            epochs: 12,
            batch_size: 8,
            ..TrainConfig::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub train_perplexity: f64,
    pub dev_perplexity: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("model dimensions and batch size must be positive")]
    BadConfig,
    #[error("training diverged in epoch {epoch} at batch {batch}: loss {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
}

/// Per-token perplexity (end-of-sentence included).
pub fn perplexity<M: NeuralModel>(model: &M, corpus: &[TokenSequence]) -> f64 {
    let (mut loss, mut tokens) = (0.0, 0usize);
    for s in corpus {
        let (l, n) = model.sentence_loss(s, None);
        loss += l;
        tokens += n;
    }
    libm::exp(loss / tokens.max(1) as f64)
}

/// Minibatch SGD with global-norm clipping. The learning rate is multiplied by
/// `lr_decay` after every epoch whose dev perplexity fails to improve.
/// When `dev` is empty the training perplexity stands in for it.
pub fn train<M: NeuralModel>(
    model: &mut M,
    corpus: &[TokenSequence],
    dev: &[TokenSequence],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochReport),
) -> Result<Vec<EpochReport>, TrainError> {
    if corpus.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    if config.batch_size == 0 {
        return Err(TrainError::BadConfig);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut lr = config.learning_rate;
    let mut best_dev = f64::INFINITY;
    let mut reports = Vec::with_capacity(config.epochs);

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_tokens) = (0.0, 0usize);
        for (batch, chunk) in order.chunks(config.batch_size).enumerate() {
            let mut grad = model.params().zeros_like();
            let (mut loss, mut tokens) = (0.0, 0usize);
            for &i in chunk {
                let (l, n) = model.sentence_loss(&corpus[i], Some(&mut grad));
                loss += l;
                tokens += n;
            }
            if !loss.is_finite() || !grad.is_finite() {
                return Err(TrainError::Diverged { epoch, batch, loss });
            }
            if tokens == 0 {
                continue;
            }
            epoch_loss += loss;
            epoch_tokens += tokens;
            let inv = 1.0 / tokens as f64;
            let norm = libm::sqrt(grad.tensors().iter().map(|(_, t)| t.sum_squares()).sum::<f64>()) * inv;
            let mut factor = inv * lr;
            if norm > config.clip_norm {
                factor *= config.clip_norm / norm;
            }
            for (p, g) in model.params_mut().tensors_mut().into_iter().zip(grad.tensors()) {
                for (w, d) in p.data.iter_mut().zip(&g.1.data) {
                    *w -= factor * d;
                }
            }
        }
        let train_ppl = libm::exp(epoch_loss / epoch_tokens.max(1) as f64);
        let dev_ppl = if dev.is_empty() {
            train_ppl
        } else {
            perplexity(model, dev)
        };
        if !dev_ppl.is_finite() {
            return Err(TrainError::Diverged {
                epoch,
                batch: usize::MAX,
                loss: dev_ppl,
            });
        }
        let report = EpochReport {
            epoch,
            train_perplexity: train_ppl,
            dev_perplexity: dev_ppl,
            learning_rate: lr,
        };
        on_epoch(&report);
        reports.push(report);
        if dev_ppl >= best_dev {
            lr *= config.lr_decay;
        } else {
            best_dev = dev_ppl;
        }
    }
    Ok(reports)
}

/// Initializes a model of the given architecture from `config.seed` and trains it.
pub fn train_model(
    arch: Architecture,
    vocab: &Vocabulary,
    corpus: &[TokenSequence],
    dev: &[TokenSequence],
    config: &TrainConfig,
    on_epoch: impl FnMut(&EpochReport),
) -> Result<(AnyModel, Vec<EpochReport>), TrainError> {
    if config.embed == 0 || config.hidden == 0 || config.annotation == 0 || config.context == 0 {
        return Err(TrainError::BadConfig);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let v = vocab.len();
    let scale = config.init_scale;
    let (bos, eos) = (vocab.bos(), vocab.eos());
    Ok(match arch {
        Architecture::Nplm => {
            let params = NplmParams::init(v, config.embed, config.hidden, config.context, scale, &mut rng);
            let mut m = Nplm::new(params, bos, eos);
            let log = train(&mut m, corpus, dev, config, on_epoch)?;
            (AnyModel::Nplm(m), log)
        }
        Architecture::Rnnlm => {
            let params = RnnLmParams::init(v, config.embed, config.hidden, scale, &mut rng);
            let mut m = RnnLm::new(params, bos, eos);
            let log = train(&mut m, corpus, dev, config, on_epoch)?;
            (AnyModel::Rnnlm(m), log)
        }
        Architecture::Bag2Seq => {
            let params = Bag2SeqParams::init(v, config.embed, config.annotation, config.hidden, scale, &mut rng);
            let mut m = Bag2Seq::new(params, vocab);
            let log = train(&mut m, corpus, dev, config, on_epoch)?;
            (AnyModel::Bag2Seq(m), log)
        }
    })
}
