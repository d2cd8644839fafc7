//! Bag-to-sequence training on a subject-verb-object language, then greedy
//! decoding of unseen bags.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wordorder_core::neural::{train_model, Architecture, TrainConfig};
use wordorder_core::{bag_of_words, beam_search, BeamConfig, Heuristic, LogLinearCombo, UnknownMode, Vocabulary};

const SUBJECTS: [&str; 8] = ["alice", "bob", "carol", "dave", "erin", "frank", "grace", "heidi"];
const VERBS: [&str; 6] = ["sees", "likes", "calls", "helps", "meets", "thanks"];
const OBJECTS: [&str; 8] = ["apples", "books", "cars", "dogs", "eggs", "films", "games", "hats"];

fn sentences(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let s = SUBJECTS[rng.gen_range(0..SUBJECTS.len())];
            let v = VERBS[rng.gen_range(0..VERBS.len())];
            let o = OBJECTS[rng.gen_range(0..OBJECTS.len())];
            format!("{s} {v} {o}")
        })
        .collect()
}

#[test]
fn greedy_decoding_recovers_svo_order() {
    let vocab = Vocabulary::from_words(
        UnknownMode::Single,
        SUBJECTS.iter().chain(&VERBS).chain(&OBJECTS).copied(),
    );
    let train: Vec<_> = sentences(1, 500).iter().map(|s| vocab.encode(s)).collect();
    let test: Vec<_> = sentences(2, 100).iter().map(|s| vocab.encode(s)).collect();
    let config = TrainConfig {
        epochs: 6,
        ..TrainConfig::desk()
    };
    let (model, _) = train_model(Architecture::Bag2Seq, &vocab, &train, &[], &config, |_| {}).unwrap();
    let combo = LogLinearCombo::single("bag2seq", &model, vocab.eos());
    let greedy = BeamConfig::new(1, Heuristic::None);
    let recovered = test
        .iter()
        .filter(|s| beam_search(&bag_of_words(s), &combo, &greedy, None).unwrap()[0].prefix == **s)
        .count();
    assert!(recovered >= 90, "recovered {recovered} of 100");
}
