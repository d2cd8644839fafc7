use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Architecture, Bag2Seq, Bag2SeqParams, NeuralModel, Nplm, NplmParams, Parameters, RnnLm, RnnLmParams};
use crate::bag::{TokenId, TokenSequence};
use crate::vocab::{UnknownMode, Vocabulary};

/// Central-difference step.
pub const FD_STEP: f64 = 1e-4;

/// Gradients smaller than this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Dimensions for gradient checking.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TinyConfig {
    /// Ordinary words besides the reserved tokens.
    pub words: usize,
    pub embed: usize,
    pub hidden: usize,
    pub annotation: usize,
    pub context: usize,
    pub sentences: usize,
    pub max_len: usize,
    pub init_scale: f64,
}

impl Default for TinyConfig {
    fn default() -> Self {
        TinyConfig {
            words: 6,
            embed: 4,
            hidden: 5,
            annotation: 3,
            context: 4,
            sentences: 3,
            max_len: 5,
            init_scale: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Worst error per tensor, in declaration order.
    pub per_tensor: Vec<(&'static str, f64)>,
    /// Tensors whose analytic gradient is identically zero.
    pub zero_gradient: Vec<&'static str>,
    pub checked: usize,
}

/// Compares backpropagated gradients of the summed loss over `sentences` with
/// central finite differences for every parameter.
pub fn gradient_check_model<M: NeuralModel + Clone>(model: &M, sentences: &[TokenSequence]) -> GradCheckReport {
    let loss = |m: &M| -> f64 { sentences.iter().map(|s| m.sentence_loss(s, None).0).sum() };
    let mut grad = model.params().zeros_like();
    for s in sentences {
        model.sentence_loss(s, Some(&mut grad));
    }
    let names: Vec<&'static str> = grad.tensors().iter().map(|(n, _)| *n).collect();
    let analytic: Vec<Vec<f64>> = grad.tensors().iter().map(|(_, t)| t.data.clone()).collect();

    let mut probe = model.clone();
    let mut per_tensor = Vec::with_capacity(names.len());
    let mut zero_gradient = Vec::new();
    let mut max_err: f64 = 0.0;
    let mut checked = 0;
    for (ti, name) in names.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for k in 0..analytic[ti].len() {
            let original = probe.params_mut().tensors_mut()[ti].data[k];
            probe.params_mut().tensors_mut()[ti].data[k] = original + FD_STEP;
            let up = loss(&probe);
            probe.params_mut().tensors_mut()[ti].data[k] = original - FD_STEP;
            let down = loss(&probe);
            probe.params_mut().tensors_mut()[ti].data[k] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic[ti][k];
            let err = libm::fabs(a - numeric) / libm::fabs(a).max(libm::fabs(numeric)).max(RELATIVE_FLOOR);
            worst = worst.max(err);
            checked += 1;
        }
        if analytic[ti].iter().all(|&g| g == 0.0) {
            zero_gradient.push(*name);
        }
        max_err = max_err.max(worst);
        per_tensor.push((*name, worst));
    }
    GradCheckReport {
        max_relative_error: max_err,
        per_tensor,
        zero_gradient,
        checked,
    }
}

/// Builds a tiny random model and corpus for `arch` and checks its gradients.
/// The corpus uses every ordinary word at least once.
pub fn gradient_check(arch: Architecture, config: &TinyConfig, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let words: Vec<String> = (0..config.words).map(|i| alloc::format!("w{i}")).collect();
    let vocab = Vocabulary::from_words(UnknownMode::Single, words.iter().map(String::as_str));
    let first = vocab.reserved_count() as TokenId;
    let last = vocab.len() as TokenId;
    let mut sentences: Vec<TokenSequence> = (0..config.sentences)
        .map(|_| {
            let len = rng.gen_range(1..=config.max_len);
            (0..len).map(|_| rng.gen_range(first..last)).collect()
        })
        .collect();
    // cover every word once, chunked into sentences of at most max_len
    let all: Vec<TokenId> = (first..last).collect();
    for chunk in all.chunks(config.max_len) {
        sentences.push(chunk.to_vec());
    }
    let v = vocab.len();
    let s = config.init_scale;
    let (bos, eos) = (vocab.bos(), vocab.eos());
    match arch {
        Architecture::Nplm => {
            let p = NplmParams::init(v, config.embed, config.hidden, config.context, s, &mut rng);
            gradient_check_model(&Nplm::new(p, bos, eos), &sentences)
        }
        Architecture::Rnnlm => {
            let p = RnnLmParams::init(v, config.embed, config.hidden, s, &mut rng);
            gradient_check_model(&RnnLm::new(p, bos, eos), &sentences)
        }
        Architecture::Bag2Seq => {
            let p = Bag2SeqParams::init(v, config.embed, config.annotation, config.hidden, s, &mut rng);
            gradient_check_model(&Bag2Seq::new(p, &vocab), &sentences)
        }
    }
}
