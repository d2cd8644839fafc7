use super::*;
use crate::bag::{bag_of_words, TokenSequence};
use crate::scorer::{sentence_logprob, Annotations};
use crate::vocab::{UnknownMode, Vocabulary};
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn gradients_match_finite_differences() {
    for arch in Architecture::ALL {
        for seed in [1, 2] {
            let report = gradient_check(arch, &TinyConfig::default(), seed);
            assert!(
                report.max_relative_error < GRAD_TOL,
                "{arch} seed {seed}: {:?}",
                report.per_tensor
            );
            assert!(report.zero_gradient.is_empty(), "{arch}: {:?}", report.zero_gradient);
            assert!(report.checked > 0);
        }
    }
}

#[test]
fn lstm_step_hand_computed() {
    let weight = Tensor::from_vec(
        8,
        3,
        vec![
            0.5, -0.5, 0.2, 0.3, 0.2, -0.1, 0.1, 0.4, 0.3, -0.2, 0.1, 0.6, 0.7, 0.1, -0.3, 0.2, -0.4, 0.5, 0.9, 0.3,
            0.1, -0.6, 0.2, 0.4,
        ],
    );
    let bias = Tensor::from_vec(8, 1, vec![0.1, 0.0, -0.2, 0.05, 0.3, -0.1, 0.0, 0.2]);
    let (h, c) = lstm::step(&weight, &bias, &[1.0], &[0.5, -0.25], &[-0.3, 0.4]);
    let (want_h, want_c) = (
        [0.21405357131314784, -0.024225456350549516],
        [0.29153454056035394, -0.05461779108884632],
    );
    for k in 0..2 {
        assert!(close(h[k], want_h[k], 1e-12), "{h:?}");
        assert!(close(c[k], want_c[k], 1e-12), "{c:?}");
    }
    let (h2, c2, _) = lstm::forward(&weight, &bias, &[1.0], &[0.5, -0.25], &[-0.3, 0.4]);
    assert_eq!((h2, c2), (h, c));
}

#[test]
fn attention_hand_computed() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut p = Bag2SeqParams::init(5, 2, 2, 1, 0.1, &mut rng);
    p.attention_state = Tensor::from_vec(2, 1, vec![0.5, -1.0]);
    p.attention_annotation = Tensor::from_vec(2, 2, vec![1.0, 0.0, 0.5, 2.0]);
    p.attention_vector = Tensor::from_vec(2, 1, vec![1.0, -0.5]);
    let vectors = vec![vec![0.2, -0.1], vec![0.0, 0.4], vec![-0.3, 0.3]];
    let keys = vectors
        .iter()
        .map(|a| {
            let mut k = vec![0.0; 2];
            p.attention_annotation.matvec(a, &mut k);
            k
        })
        .collect();
    let ann = Annotations {
        source: vec![3, 3, 4],
        vectors,
        keys,
    };
    let (weights, context) = attention_context(&p, &[0.3], &ann);
    let want_w = [0.4958663193945315, 0.26982748290513914, 0.23430619770032932];
    let want_c = [0.028881404568807514, 0.1286362205327013];
    for (a, b) in weights.iter().zip(want_w) {
        assert!(close(*a, b, 1e-12), "{weights:?}");
    }
    for (a, b) in context.iter().zip(want_c) {
        assert!(close(*a, b, 1e-12), "{context:?}");
    }
    assert!(close(weights.iter().sum::<f64>(), 1.0, 1e-12));
}

fn tiny_vocab() -> Vocabulary {
    Vocabulary::from_words(UnknownMode::Single, ["a", "b", "c", "d"])
}

fn models(vocab: &Vocabulary, seed: u64) -> Vec<AnyModel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = vocab.len();
    let (bos, eos) = (vocab.bos(), vocab.eos());
    vec![
        AnyModel::Nplm(Nplm::new(NplmParams::init(v, 4, 6, 3, 0.3, &mut rng), bos, eos)),
        AnyModel::Rnnlm(RnnLm::new(RnnLmParams::init(v, 4, 6, 0.3, &mut rng), bos, eos)),
        AnyModel::Bag2Seq(Bag2Seq::new(Bag2SeqParams::init(v, 4, 5, 6, 0.3, &mut rng), vocab)),
    ]
}

#[test]
fn distributions_normalize_along_a_sentence() {
    let vocab = tiny_vocab();
    let sentence = vocab.encode("a b c a d");
    let bag = bag_of_words(&sentence);
    for m in models(&vocab, 3) {
        let mut state = m.init(&bag).unwrap();
        for &w in &sentence {
            let total: f64 = m.log_probs(&state).iter().map(|l| libm::exp(*l)).sum();
            assert!(close(total, 1.0, 1e-9), "{}", m.architecture());
            state = m.advance(&state, w);
        }
    }
}

#[test]
fn advancing_does_not_touch_the_parent_state() {
    let vocab = tiny_vocab();
    let bag = bag_of_words(&vocab.encode("a b c"));
    for m in models(&vocab, 4) {
        let s0 = m.init(&bag).unwrap();
        let before = m.log_probs(&s0);
        let child_a = m.advance(&s0, vocab.id("a"));
        let _child_b = m.advance(&s0, vocab.id("b"));
        assert_eq!(m.log_probs(&s0), before);
        assert_eq!(m.log_probs(&m.advance(&s0, vocab.id("a"))), m.log_probs(&child_a));
    }
}

#[test]
fn loss_agrees_with_scorer_interface() {
    let vocab = tiny_vocab();
    let sentence = vocab.encode("d c a b");
    let bag = bag_of_words(&sentence);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let v = vocab.len();
    let (bos, eos) = (vocab.bos(), vocab.eos());
    let nplm = Nplm::new(NplmParams::init(v, 3, 4, 2, 0.3, &mut rng), bos, eos);
    let rnn = RnnLm::new(RnnLmParams::init(v, 3, 4, 0.3, &mut rng), bos, eos);
    let b2s = Bag2Seq::new(Bag2SeqParams::init(v, 3, 4, 5, 0.3, &mut rng), &vocab);
    let check = |loss: (f64, usize), scorer: &dyn crate::Scorer| {
        let lp = sentence_logprob(scorer, &bag, &sentence, eos).unwrap();
        assert_eq!(loss.1, sentence.len() + 1);
        assert!(close(-loss.0, lp, 1e-10), "{} vs {lp}", -loss.0);
    };
    check(nplm.sentence_loss(&sentence, None), &nplm);
    check(rnn.sentence_loss(&sentence, None), &rnn);
    check(b2s.sentence_loss(&sentence, None), &b2s);
}

#[test]
fn bag2seq_ignores_presentation_order() {
    let vocab = tiny_vocab();
    let m = &models(&vocab, 6)[2];
    let one = bag_of_words(&vocab.encode("a b c a"));
    let two = bag_of_words(&vocab.encode("c a a b"));
    let (mut s1, mut s2) = (m.init(&one).unwrap(), m.init(&two).unwrap());
    assert_eq!(s1, s2);
    for w in vocab.encode("b a c a") {
        assert_eq!(m.log_probs(&s1), m.log_probs(&s2));
        s1 = m.advance(&s1, w);
        s2 = m.advance(&s2, w);
    }
    assert_eq!(m.init(&crate::Bag::new()), Err(crate::ScorerError::EmptyBag));
}

#[test]
fn bag2seq_conditions_on_the_bag() {
    let vocab = tiny_vocab();
    let m = &models(&vocab, 7)[2];
    let one = bag_of_words(&vocab.encode("a a a"));
    let two = bag_of_words(&vocab.encode("d d d"));
    assert_ne!(m.log_probs(&m.init(&one).unwrap()), m.log_probs(&m.init(&two).unwrap()));
    // the annotations are shared, not copied, between branches
    let s = m.init(&one).unwrap();
    let child = m.advance(&s, 3);
    match (&s, &child) {
        (crate::DecoderState::Attentive(a), crate::DecoderState::Attentive(b)) => {
            assert!(Arc::ptr_eq(&a.annotations, &b.annotations))
        }
        _ => panic!("expected attentive states"),
    }
}

fn copy_corpus(vocab: &Vocabulary) -> Vec<TokenSequence> {
    ["a b c d", "b c d a", "c d a b", "d a b c", "a b", "c d"]
        .iter()
        .map(|s| vocab.encode(s))
        .collect()
}

#[test]
fn training_lowers_perplexity() {
    let vocab = tiny_vocab();
    let corpus = copy_corpus(&vocab);
    let cfg = TrainConfig {
        embed: 8,
        hidden: 12,
        annotation: 8,
        context: 2,
        epochs: 30,
        batch_size: 2,
        init_scale: 0.1,
        ..TrainConfig::default()
    };
    for arch in Architecture::ALL {
        let mut epochs = 0;
        let (model, log) = train_model(arch, &vocab, &corpus, &[], &cfg, |_| epochs += 1).unwrap();
        assert_eq!(epochs, cfg.epochs);
        assert_eq!(model.architecture(), arch);
        assert!(
            log.last().unwrap().train_perplexity < 0.8 * log[0].train_perplexity,
            "{arch}: {:?}",
            log.iter().map(|r| r.train_perplexity).collect::<Vec<_>>()
        );
        assert!(model.tensors().iter().all(|(_, t)| t.is_finite()));
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let vocab = tiny_vocab();
    let corpus = copy_corpus(&vocab);
    let cfg = TrainConfig {
        embed: 4,
        hidden: 5,
        annotation: 4,
        epochs: 2,
        ..TrainConfig::default()
    };
    let a = train_model(Architecture::Rnnlm, &vocab, &corpus, &[], &cfg, |_| {}).unwrap();
    let b = train_model(Architecture::Rnnlm, &vocab, &corpus, &[], &cfg, |_| {}).unwrap();
    assert_eq!(a, b);
    let c = train_model(
        Architecture::Rnnlm,
        &vocab,
        &corpus,
        &[],
        &TrainConfig { seed: 9, ..cfg },
        |_| {},
    )
    .unwrap();
    assert_ne!(a.0, c.0);
}

#[test]
fn training_rejects_bad_input() {
    let vocab = tiny_vocab();
    let cfg = TrainConfig::desk();
    assert_eq!(
        train_model(Architecture::Nplm, &vocab, &[], &[], &cfg, |_| {}).unwrap_err(),
        TrainError::EmptyCorpus
    );
    let bad = TrainConfig {
        hidden: 0,
        ..cfg.clone()
    };
    assert_eq!(
        train_model(Architecture::Nplm, &vocab, &copy_corpus(&vocab), &[], &bad, |_| {}).unwrap_err(),
        TrainError::BadConfig
    );
    let bad = TrainConfig { batch_size: 0, ..cfg };
    assert_eq!(
        train_model(Architecture::Rnnlm, &vocab, &copy_corpus(&vocab), &[], &bad, |_| {}).unwrap_err(),
        TrainError::BadConfig
    );
}

#[test]
fn architecture_names_and_tags() {
    for arch in Architecture::ALL {
        assert_eq!(arch.name().parse::<Architecture>(), Ok(arch));
        assert_eq!(Architecture::from_tag(arch.tag()), Some(arch));
        assert_eq!(alloc::format!("{arch}"), arch.name());
    }
    assert!("lstm".parse::<Architecture>().is_err());
    assert_eq!(Architecture::from_tag(0), None);
    let names: Vec<String> = Architecture::ALL.iter().map(|a| String::from(a.name())).collect();
    assert_eq!(names, ["nplm", "rnnlm", "bag2seq"]);
}

fn zero_output(weight: &mut Tensor, bias: &mut Tensor) {
    weight
        .data
        .iter_mut()
        .chain(bias.data.iter_mut())
        .for_each(|x| *x = 0.0);
}

#[test]
fn zero_output_layer_is_uniform() {
    let vocab = tiny_vocab();
    let bag = bag_of_words(&vocab.encode("a b c"));
    let uniform = -libm::log(vocab.len() as f64);
    for mut m in models(&vocab, 8) {
        match &mut m {
            AnyModel::Nplm(x) => zero_output(&mut x.params.output_weight, &mut x.params.output_bias),
            AnyModel::Rnnlm(x) => zero_output(&mut x.params.output_weight, &mut x.params.output_bias),
            AnyModel::Bag2Seq(x) => zero_output(&mut x.params.output_weight, &mut x.params.output_bias),
        }
        let mut state = m.init(&bag).unwrap();
        for w in vocab.encode("a b") {
            assert!(m.log_probs(&state).iter().all(|&l| close(l, uniform, 1e-12)));
            state = m.advance(&state, w);
        }
    }
}

#[test]
fn rnnlm_three_word_golden() {
    // one-dimensional embedding and state, values worked through by hand
    let vocab = tiny_vocab();
    let v = vocab.len();
    let params = RnnLmParams {
        embedding: Tensor::from_vec(v, 1, (0..v).map(|w| 0.1 * w as f64 - 0.3).collect()),
        lstm_weight: Tensor::from_vec(4, 2, vec![0.5, -0.4, 0.3, 0.2, -0.6, 0.7, 0.9, -0.1]),
        lstm_bias: Tensor::from_vec(4, 1, vec![0.1, 0.2, -0.1, 0.05]),
        output_weight: Tensor::from_vec(v, 1, (0..v).map(|w| 0.2 * w as f64 - 0.5).collect()),
        output_bias: Tensor::from_vec(v, 1, (0..v).map(|w| 0.01 * w as f64).collect()),
    };
    let rnn = RnnLm::new(params, vocab.bos(), vocab.eos());
    let sentence = vocab.encode("a b c");
    let lp = sentence_logprob(&rnn, &bag_of_words(&sentence), &sentence, vocab.eos()).unwrap();
    assert!(close(lp, -7.794940678768053, 1e-10), "{lp}");
    assert!(close(rnn.sentence_loss(&sentence, None).0, 7.794940678768053, 1e-10));
}

#[test]
fn attention_over_one_or_identical_annotations() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = Bag2SeqParams::init(5, 2, 3, 2, 0.5, &mut rng);
    let annotations = |vectors: Vec<Vec<f64>>| {
        let keys = vectors
            .iter()
            .map(|a| {
                let mut k = vec![0.0; 3];
                p.attention_annotation.matvec(a, &mut k);
                k
            })
            .collect();
        Annotations {
            source: vec![3; vectors.len()],
            vectors,
            keys,
        }
    };
    let a = vec![0.3, -0.2, 0.7];
    let (w, ctx) = attention_context(&p, &[0.4, -0.9], &annotations(vec![a.clone()]));
    assert_eq!(w, [1.0]);
    assert!(ctx.iter().zip(&a).all(|(x, y)| close(*x, *y, 1e-15)));
    let (w, ctx) = attention_context(&p, &[0.4, -0.9], &annotations(vec![a.clone(); 4]));
    assert!(w.iter().all(|&x| close(x, 0.25, 1e-15)));
    assert!(ctx.iter().zip(&a).all(|(x, y)| close(*x, *y, 1e-12)));
}

#[test]
fn repeated_sentence_perplexity_approaches_one() {
    let vocab = tiny_vocab();
    let corpus = vec![vocab.encode("a c b d"); 40];
    let cfg = TrainConfig {
        embed: 8,
        hidden: 16,
        annotation: 8,
        context: 2,
        epochs: 25,
        batch_size: 4,
        init_scale: 0.1,
        ..TrainConfig::default()
    };
    for arch in Architecture::ALL {
        let (_, log) = train_model(arch, &vocab, &corpus, &corpus[..1], &cfg, |_| {}).unwrap();
        let last = log.last().unwrap();
        assert!(last.train_perplexity < 1.05, "{arch}: {}", last.train_perplexity);
        assert!(last.dev_perplexity < 1.05, "{arch}: {}", last.dev_perplexity);
    }
}

#[test]
fn first_epoch_beats_uniform_on_dev() {
    let vocab = tiny_vocab();
    let corpus = copy_corpus(&vocab);
    let cfg = TrainConfig {
        embed: 6,
        hidden: 8,
        annotation: 6,
        context: 2,
        epochs: 1,
        batch_size: 2,
        ..TrainConfig::default()
    };
    for arch in Architecture::ALL {
        let (_, log) = train_model(arch, &vocab, &corpus, &corpus[..2], &cfg, |_| {}).unwrap();
        assert!(log[0].dev_perplexity <= vocab.len() as f64, "{arch}: {:?}", log[0]);
    }
}

#[test]
fn nplm_pads_short_histories_with_bos() {
    let vocab = tiny_vocab();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let bos = vocab.bos();
    let nplm = Nplm::new(NplmParams::init(vocab.len(), 3, 5, 4, 0.3, &mut rng), bos, vocab.eos());
    let (a, b) = (vocab.id("a"), vocab.id("b"));
    let bag = bag_of_words(&[a, b]);
    let s0 = nplm.init(&bag).unwrap();
    assert_eq!(s0.history(), Some(&[bos, bos, bos, bos][..]));
    let s2 = nplm.advance(&nplm.advance(&s0, a), b);
    assert_eq!(s2.history(), Some(&[bos, bos, a, b][..]));
    let direct = crate::DecoderState::History(vec![bos, bos, a, b]);
    assert_eq!(nplm.log_probs(&s2), nplm.log_probs(&direct));
    // a long sentence keeps only the last four tokens
    let mut s = s0;
    for w in vocab.encode("a b c d a") {
        s = nplm.advance(&s, w);
    }
    assert_eq!(s.history(), Some(&vocab.encode("b c d a")[..]));
}
