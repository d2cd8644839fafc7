//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Trains its own desk-scale models on the toy grammar,
//! so a full run takes several minutes.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordorder::bench::{benchmark_decode, BenchConfig};
use wordorder::decode::{best_sequences, decode_all, decode_one};
use wordorder::toy::toy_corpus;
use wordorder_core::combine::{tune_weights, Member, OptimizerOptions};
use wordorder_core::neural::{gradient_check, train_model, AnyModel, Architecture, TinyConfig, TrainConfig};
use wordorder_core::ngram::{train_ngram, NGramModel, Smoothing, UnigramTable};
use wordorder_core::search::{
    beam_search_observed, distinct_permutations, exhaustive_decode, PruneRecord, SearchObserver,
};
use wordorder_core::{
    bag_of_words, beam_search, corpus_bleu, Bag, BeamConfig, Heuristic, LogLinearCombo, Scorer, TokenSequence,
    UnknownMode, Vocabulary,
};

const SEEDS: [u64; 3] = [1, 2, 3];
const RNN_EPOCHS: usize = 20;
const B2S_EPOCHS: usize = 30;

/// Toy-grammar split and the scorers trained on it.
struct Fixture {
    vocab: Vocabulary,
    dev: Vec<TokenSequence>,
    test: Vec<TokenSequence>,
    trigram: NGramModel,
    unigrams: UnigramTable,
    rnn: AnyModel,
    b2s: AnyModel,
}

impl Fixture {
    fn new(seed: u64) -> Self {
        let train_lines = toy_corpus(100 + seed, 2000);
        let vocab = Vocabulary::from_words(
            UnknownMode::Single,
            train_lines.iter().flat_map(|l| l.split_whitespace()),
        );
        let encode = |lines: Vec<String>| -> Vec<TokenSequence> { lines.iter().map(|l| vocab.encode(l)).collect() };
        let train = encode(train_lines.clone());
        let dev = encode(toy_corpus(500 + seed, 200));
        let test = encode(toy_corpus(900 + seed, 500));
        let trigram = train_ngram(&train, 3, Smoothing::Auto, &vocab).unwrap();
        let unigrams = UnigramTable::from_model(&trigram, vocab.unk());
        let config = TrainConfig {
            seed,
            ..TrainConfig::desk()
        };
        let t = Instant::now();
        let rnn = train_model(
            Architecture::Rnnlm,
            &vocab,
            &train,
            &dev,
            &TrainConfig {
                epochs: RNN_EPOCHS,
                ..config.clone()
            },
            |_| {},
        )
        .unwrap()
        .0;
        let b2s = train_model(
            Architecture::Bag2Seq,
            &vocab,
            &train,
            &dev,
            &TrainConfig {
                epochs: B2S_EPOCHS,
                ..config
            },
            |_| {},
        )
        .unwrap()
        .0;
        eprintln!(
            "  seed {seed}: vocabulary {} tokens, neural training {:.0}s",
            vocab.len(),
            t.elapsed().as_secs_f64()
        );
        Fixture {
            vocab,
            dev,
            test,
            trigram,
            unigrams,
            rnn,
            b2s,
        }
    }
}

fn bags(sentences: &[TokenSequence]) -> Vec<Bag> {
    sentences.iter().map(|s| bag_of_words(s)).collect()
}

/// 1-best sequences and their mean model score.
fn decode(
    bags: &[Bag],
    combo: &LogLinearCombo<'_>,
    config: &BeamConfig,
    unigrams: &UnigramTable,
) -> (Vec<TokenSequence>, f64) {
    let results = decode_all(bags, combo, config, Some(unigrams), 1);
    let mean = results.iter().map(|r| r.as_ref().unwrap()[0].score).sum::<f64>() / bags.len() as f64;
    (best_sequences(results).unwrap(), mean)
}

fn bleu(hyps: &[TokenSequence], refs: &[TokenSequence]) -> f64 {
    corpus_bleu(hyps, refs).unwrap().bleu
}

fn pair<'a>(a: (&'a str, &'a dyn Scorer), b: (&'a str, &'a dyn Scorer), eos: u32) -> LogLinearCombo<'a> {
    LogLinearCombo::new(
        vec![
            Member {
                name: a.0,
                scorer: a.1,
                weight: 1.0,
            },
            Member {
                name: b.0,
                scorer: b.1,
                weight: 1.0,
            },
        ],
        eos,
    )
    .unwrap()
}

struct Verdicts(Vec<bool>);

impl Verdicts {
    fn record(&mut self, id: usize, name: &str, pass: bool, detail: String) {
        println!("{} [{id}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
        self.0.push(pass);
    }
}

/// Collects every candidate seen at a pruning step.
#[derive(Default)]
struct Records {
    all: Vec<(usize, usize, PruneRecord)>,
    bag_size: usize,
}

impl SearchObserver for Records {
    fn on_prune(&mut self, step: usize, records: &[PruneRecord]) {
        self.all
            .extend(records.iter().map(|r| (step, self.bag_size, r.clone())));
    }
}

fn main() {
    let started = Instant::now();
    let mut v = Verdicts(Vec::new());

    eprintln!("training fixtures for seeds {SEEDS:?}");
    let fixtures: Vec<Fixture> = SEEDS.iter().map(|&s| Fixture::new(s)).collect();
    let fx = &fixtures[0];
    let eos = fx.vocab.eos();
    let nplm = train_model(
        Architecture::Nplm,
        &fx.vocab,
        &toy_corpus(101, 2000)
            .iter()
            .map(|l| fx.vocab.encode(l))
            .collect::<Vec<_>>(),
        &fx.dev,
        &TrainConfig {
            epochs: 5,
            ..TrainConfig::desk()
        },
        |_| {},
    )
    .unwrap()
    .0;
    let scorers: [(&str, &dyn Scorer); 4] = [
        ("trigram", &fx.trigram),
        ("nplm", &nplm),
        ("rnnlm", &fx.rnn),
        ("bag2seq", &fx.b2s),
    ];
    let test_bags = bags(&fx.test);

    // 1: every output is a permutation of its input
    {
        let mut combos: Vec<(String, LogLinearCombo)> = scorers
            .iter()
            .map(|&(n, s)| (n.to_string(), LogLinearCombo::single(n, s, eos)))
            .collect();
        combos.push(("rnnlm+bag2seq".into(), pair(scorers[2], scorers[3], eos)));
        let (mut total, mut valid, mut offset) = (0, 0, 0);
        for (_, combo) in &combos {
            for h in Heuristic::ALL {
                for beam in [1, 5, 64] {
                    let chunk = &test_bags[offset % 475..offset % 475 + 25];
                    offset += 25;
                    for bag in chunk {
                        total += 1;
                        let out = decode_one(bag, combo, &BeamConfig::new(beam, h), Some(&fx.unigrams));
                        if let Ok(hyps) = out {
                            if hyps.iter().all(|hyp| bag_of_words(&hyp.prefix) == *bag) {
                                valid += 1;
                            }
                        }
                    }
                }
            }
        }
        v.record(
            1,
            "permutation validity",
            total >= 1000 && valid == total,
            format!(
                "{valid}/{total} outputs over {} scorer sets x 3 heuristics x 3 beams",
                combos.len()
            ),
        );
    }

    // 2: S = s - g never positive in upper-bound mode
    {
        let mut checked = 0usize;
        let mut worst = f64::NEG_INFINITY;
        let runs: [(LogLinearCombo, usize); 2] = [
            (LogLinearCombo::single("trigram", &fx.trigram, eos), 64),
            (pair(scorers[2], scorers[3], eos), 5),
        ];
        for (combo, beam) in &runs {
            for bag in &test_bags[..200] {
                let mut obs = Records::default();
                beam_search_observed(
                    bag,
                    combo,
                    &BeamConfig::new(*beam, Heuristic::UpperBound),
                    None,
                    &mut obs,
                )
                .unwrap();
                for (_, _, r) in &obs.all {
                    checked += 1;
                    worst = worst.max(r.score - r.heuristic);
                }
            }
        }
        v.record(
            2,
            "upper-bound invariant",
            worst <= 1e-9,
            format!("max s - g = {worst:.3e} over {checked} hypotheses from 200 sentences"),
        );
    }

    // 3: beam search against the exhaustive oracle on a bigram model
    {
        let train: Vec<TokenSequence> = toy_corpus(101, 2000).iter().map(|l| fx.vocab.encode(l)).collect();
        let bigram = train_ngram(&train, 2, Smoothing::Auto, &fx.vocab).unwrap();
        let combo = LogLinearCombo::single("bigram", &bigram, eos);
        let reserved = [eos, fx.vocab.bos(), fx.vocab.unk()];
        let words: Vec<u32> = (0..fx.vocab.len() as u32).filter(|w| !reserved.contains(w)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (mut wide_hits, mut full_hits) = (0, 0);
        let n = 200;
        for _ in 0..n {
            let size = rng.gen_range(2..=7);
            // small pool so some bags repeat words
            let pool: Vec<u32> = words.choose_multiple(&mut rng, 5).copied().collect();
            let sentence: Vec<u32> = (0..size).map(|_| *pool.choose(&mut rng).unwrap()).collect();
            let bag = bag_of_words(&sentence);
            let oracle = exhaustive_decode(&bag, &combo).unwrap().score;
            let wide = beam_search(
                &bag,
                &combo,
                &BeamConfig::new(512, Heuristic::None).with_recombination(1),
                None,
            )
            .unwrap()[0]
                .score;
            let perms = distinct_permutations(&bag) as usize;
            let full = beam_search(&bag, &combo, &BeamConfig::new(perms, Heuristic::None), None).unwrap()[0].score;
            wide_hits += usize::from((wide - oracle).abs() <= 1e-9);
            full_hits += usize::from((full - oracle).abs() <= 1e-9);
        }
        v.record(
            3,
            "oracle equivalence",
            wide_hits * 100 >= 99 * n && full_hits == n,
            format!("beam 512 with recombination {wide_hits}/{n}, beam >= #permutations {full_hits}/{n}"),
        );
    }

    // 4: g beats none for the n-gram scorer at beam 64
    {
        let combo = LogLinearCombo::single("trigram", &fx.trigram, eos);
        let (none, s_none) = decode(&test_bags, &combo, &BeamConfig::new(64, Heuristic::None), &fx.unigrams);
        let (g, s_g) = decode(
            &test_bags,
            &combo,
            &BeamConfig::new(64, Heuristic::UpperBound),
            &fx.unigrams,
        );
        let (b_none, b_g) = (bleu(&none, &fx.test), bleu(&g, &fx.test));
        v.record(
            4,
            "heuristic pattern",
            b_g >= b_none + 1.0 && s_g >= s_none,
            format!(
                "trigram beam 64 on {} sentences: BLEU g {b_g:.2} vs none {b_none:.2}; mean score g {s_g:.3} vs none {s_none:.3}",
                fx.test.len()
            ),
        );
    }

    // 5: at beam 5, bag2seq beats the RNNLM and f helps the RNNLM
    let mut singles = Vec::new();
    {
        let (mut b2s_wins, mut f_wins) = (0, 0);
        let mut rows = Vec::new();
        for (seed, f) in SEEDS.iter().zip(&fixtures) {
            let refs = &f.test[..200];
            let bags = bags(refs);
            let rnn = LogLinearCombo::single("rnnlm", &f.rnn, f.vocab.eos());
            let b2s = LogLinearCombo::single("bag2seq", &f.b2s, f.vocab.eos());
            let b2s_none = bleu(
                &decode(&bags, &b2s, &BeamConfig::new(5, Heuristic::None), &f.unigrams).0,
                refs,
            );
            let rnn_none = bleu(
                &decode(&bags, &rnn, &BeamConfig::new(5, Heuristic::None), &f.unigrams).0,
                refs,
            );
            let rnn_f = bleu(
                &decode(&bags, &rnn, &BeamConfig::new(5, Heuristic::FutureCost), &f.unigrams).0,
                refs,
            );
            b2s_wins += usize::from(b2s_none > rnn_none);
            f_wins += usize::from(rnn_f > rnn_none);
            rows.push(format!(
                "seed {seed}: bag2seq {b2s_none:.2}, rnnlm {rnn_none:.2}, rnnlm+f {rnn_f:.2}"
            ));
            singles.push((b2s_none, rnn_none));
        }
        v.record(
            5,
            "small-beam pattern",
            b2s_wins * 2 > SEEDS.len() && f_wins * 2 > SEEDS.len(),
            format!(
                "bag2seq > rnnlm on {b2s_wins}/3, rnnlm f > none on {f_wins}/3 ({})",
                rows.join("; ")
            ),
        );
    }

    // 6: tuned combination at least matches the better single scorer
    let tuned_weights;
    {
        let combo = pair(scorers[2], scorers[3], eos);
        let dev_bags = bags(&fx.dev[..100]);
        let config = BeamConfig::new(5, Heuristic::None);
        let tuned = tune_weights(&combo, &fx.dev[..100], 20, &OptimizerOptions::default(), |c| {
            best_sequences(decode_all(&dev_bags, c, &config, None, 1))
        })
        .unwrap();
        tuned_weights = tuned.weights.clone();
        let refs = &fx.test[..200];
        let tuned_combo = combo.with_weights(&tuned.weights).unwrap();
        let combined = bleu(&decode(&bags(refs), &tuned_combo, &config, &fx.unigrams).0, refs);
        let (b2s, rnn) = singles[0];
        let best = b2s.max(rnn);
        v.record(
            6,
            "combination complementarity",
            combined >= best - 0.2,
            format!(
                "tuned weights {:?} ({} evaluations): combination {combined:.2} vs best single {best:.2} at beam 5",
                tuned
                    .weights
                    .iter()
                    .map(|w| (w * 1000.0).round() / 1000.0)
                    .collect::<Vec<_>>(),
                tuned.evaluations
            ),
        );
    }

    // 7: time grows with beam; the combination at 64 outruns the RNNLM at 512
    {
        let bench_bags = &test_bags[..50];
        let rnn = LogLinearCombo::single("rnnlm", &fx.rnn, eos);
        let combo = pair(scorers[2], scorers[3], eos).with_weights(&tuned_weights).unwrap();
        let mut configs: Vec<BenchConfig> = [1, 5, 64, 512]
            .into_iter()
            .map(|b| BenchConfig {
                scorers: "rnnlm".into(),
                combo: &rnn,
                beam: BeamConfig::new(b, Heuristic::None),
            })
            .collect();
        configs.push(BenchConfig {
            scorers: "rnnlm+bag2seq".into(),
            combo: &combo,
            beam: BeamConfig::new(64, Heuristic::None),
        });
        let report = benchmark_decode(bench_bags, &configs, None, 1, 1).unwrap();
        let times: Vec<f64> = report.rows[..4].iter().map(|r| r.seconds).collect();
        let monotone = times.windows(2).all(|w| w[0] < w[1]);
        let ratio = times[3] / report.rows[4].seconds;
        let refs = &fx.test[..50];
        let q_rnn = bleu(
            &decode(bench_bags, &rnn, &BeamConfig::new(512, Heuristic::None), &fx.unigrams).0,
            refs,
        );
        let q_combo = bleu(
            &decode(bench_bags, &combo, &BeamConfig::new(64, Heuristic::None), &fx.unigrams).0,
            refs,
        );
        v.record(
            7,
            "speed/quality trade-off",
            monotone && ratio >= 2.0,
            format!(
                "rnnlm seconds at beams 1/5/64/512: {}; rnnlm@512 / combination@64 = {ratio:.2}x (BLEU {q_rnn:.2} vs {q_combo:.2})",
                times.iter().map(|t| format!("{t:.3}")).collect::<Vec<_>>().join("/")
            ),
        );
    }

    // 8: analytic gradients agree with finite differences
    {
        let mut worst = 0.0f64;
        let mut parts = Vec::new();
        for arch in Architecture::ALL {
            let report = gradient_check(arch, &TinyConfig::default(), 1);
            worst = worst.max(report.max_relative_error);
            parts.push(format!("{arch} {:.2e}", report.max_relative_error));
        }
        v.record(
            8,
            "gradient checks",
            worst < 1e-4,
            format!("max relative error {}", parts.join(", ")),
        );
    }

    // 9: distributions normalize
    {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst = 0.0f64;
        for (_, scorer) in scorers {
            for _ in 0..100 {
                let s = fx.test.choose(&mut rng).unwrap();
                let cut = rng.gen_range(0..=s.len());
                let mut state = scorer.init(&bag_of_words(s)).unwrap();
                for &w in &s[..cut] {
                    state = scorer.advance(&state, w);
                }
                let total: f64 = scorer.log_probs(&state).iter().map(|l| l.exp()).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
        let mut backoff_worst = 0.0f64;
        let ids = fx.vocab.len() as u32;
        for _ in 0..100 {
            let history: Vec<u32> = (0..2).map(|_| rng.gen_range(0..ids)).collect();
            let total: f64 = fx
                .trigram
                .log10_distribution(&history)
                .iter()
                .map(|l| 10f64.powf(*l))
                .sum();
            backoff_worst = backoff_worst.max((total - 1.0).abs());
        }
        v.record(
            9,
            "normalization",
            worst <= 1e-5 && backoff_worst <= 1e-6,
            format!("scorer steps max |sum - 1| = {worst:.2e} (4 scorers x 100 states); back-off {backoff_worst:.2e} (100 histories)"),
        );
    }

    // 10: BLEU worked examples
    {
        let r = vec![vec!["a", "b", "c", "d"]];
        let identity = corpus_bleu(&r, &r).unwrap().bleu;
        let swapped = corpus_bleu(&[vec!["b", "a", "c", "d"]], &r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let shuffled: Vec<TokenSequence> = fx
            .test
            .iter()
            .map(|s| {
                let mut s = s.clone();
                s.shuffle(&mut rng);
                s
            })
            .collect();
        let permuted = corpus_bleu(&shuffled, &fx.test).unwrap();
        let drift = (permuted.recompose() - permuted.bleu).abs();
        v.record(
            10,
            "BLEU oracle",
            identity == 100.0 && swapped.bleu == 0.0 && permuted.brevity_penalty == 1.0 && drift <= 1e-6,
            format!(
                "identity {identity}, \"b a c d\" {}, permutation BP {}, recomposition drift {drift:.1e}",
                swapped.bleu, permuted.brevity_penalty
            ),
        );
    }

    // 11: the future cost vanishes on completed hypotheses
    {
        let combo = LogLinearCombo::single("trigram", &fx.trigram, eos);
        let mut completed = 0usize;
        let mut mismatched = 0usize;
        for bag in &test_bags[..100] {
            let mut obs = Records {
                bag_size: bag.size(),
                ..Records::default()
            };
            beam_search_observed(
                bag,
                &combo,
                &BeamConfig::new(5, Heuristic::FutureCost),
                Some(&fx.unigrams),
                &mut obs,
            )
            .unwrap();
            for (_, size, r) in &obs.all {
                if r.prefix.len() == *size {
                    completed += 1;
                    mismatched += usize::from(r.ranking - r.score != 0.0);
                }
            }
        }
        v.record(
            11,
            "f completion identity",
            completed > 0 && mismatched == 0,
            format!("{mismatched} of {completed} completed hypotheses with S_f != s over 100 sentences"),
        );
    }

    let passed = v.0.iter().filter(|&&p| p).count();
    println!(
        "{passed}/{} criteria passed in {:.0}s",
        v.0.len(),
        started.elapsed().as_secs_f64()
    );
    if passed != v.0.len() {
        std::process::exit(1);
    }
}
