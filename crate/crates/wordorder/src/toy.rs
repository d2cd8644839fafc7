//! A small English-like probabilistic grammar for desk-scale experiments.
//!
//! Sentences have subjects and objects drawn from noun classes that each verb
//! selects for, optional adjectives, place phrases, adverbs, clausal
//! complements and coordination. The vocabulary stays under 200 types and
//! frequent function words occur several times per sentence, which is what
//! makes unguided constrained search go wrong.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DETERMINERS: &[&str] = &["the", "a", "this", "every", "some", "that"];
const PEOPLE_ADJECTIVES: &[&str] = &[
    "happy", "tired", "clever", "lazy", "brave", "shy", "tall", "famous", "hungry", "angry", "gentle", "proud",
];
const PEOPLE: &[&str] = &[
    "teacher", "farmer", "child", "doctor", "king", "queen", "soldier", "student", "baker", "pilot", "singer",
    "driver", "nurse", "sailor", "painter", "poet", "judge", "girl", "boy", "woman", "man", "cat", "dog", "fox",
];
const NAMES: &[&str] = &[
    "alice", "bob", "carol", "dave", "erin", "frank", "grace", "henry", "irene", "jack", "kate", "liam",
];
const PRONOUNS: &[&str] = &["she", "he", "they"];

/// Things, the adjectives that describe them and the verbs that take them as objects.
struct Category {
    nouns: &'static [&'static str],
    adjectives: &'static [&'static str],
    verbs: &'static [&'static str],
}

const CATEGORIES: &[Category] = &[
    Category {
        nouns: &["apple", "cake", "bread", "soup", "cheese", "pie"],
        adjectives: &["fresh", "sweet", "warm"],
        verbs: &["ate", "cooked", "tasted", "shared"],
    },
    Category {
        nouns: &["milk", "tea", "coffee", "water", "juice"],
        adjectives: &["cold", "hot"],
        verbs: &["drank", "poured", "spilled"],
    },
    Category {
        nouns: &["book", "letter", "map", "newspaper", "poem"],
        adjectives: &["long", "short", "old"],
        verbs: &["read", "wrote", "found", "burned"],
    },
    Category {
        nouns: &["door", "window", "box", "bottle", "gate"],
        adjectives: &["heavy", "wooden", "broken"],
        verbs: &["opened", "closed", "painted", "fixed"],
    },
    Category {
        nouns: &["car", "boat", "bus", "truck", "bike"],
        adjectives: &["red", "new", "fast"],
        verbs: &["drove", "washed", "sold", "parked"],
    },
    Category {
        nouns: &["song", "piano", "guitar", "drum"],
        adjectives: &["loud", "sad", "beautiful"],
        verbs: &["played", "practiced", "loved", "tuned"],
    },
];
/// Verbs whose object is a person or animal.
const SOCIAL: &[&str] = &["saw", "helped", "met", "called"];
const PLACES: &[(&str, &[&str])] = &[
    ("in", &["kitchen", "garden", "park", "house", "forest", "city"]),
    ("on", &["table", "roof", "hill", "bridge"]),
    ("near", &["river", "school", "station"]),
    ("behind", &["wall"]),
];
const PLACE_ADJECTIVES: &[&str] = &["big", "small", "dark", "quiet"];
const INTRANSITIVE: &[&str] = &[
    "slept", "laughed", "smiled", "ran", "danced", "cried", "waited", "arrived", "left", "jumped", "worked", "sang",
];
const DITRANSITIVE: &[&str] = &["gave", "sent", "showed", "offered"];
const SAYING: &[&str] = &["said", "thought", "knew", "believed"];
const MANNER: &[&str] = &["quickly", "slowly", "happily", "quietly", "loudly", "carefully"];
const TIME: &[&str] = &["yesterday", "today", "again", "often"];
const CONJUNCTIONS: &[&str] = &["and", "but", "because", "when", "so"];
const FUNCTION: &[&str] = &["that", "to", "who", ",", "."];

/// Every surface form the grammar can produce.
pub fn toy_vocabulary() -> Vec<&'static str> {
    let groups: [&[&'static str]; 14] = [
        DETERMINERS,
        PEOPLE_ADJECTIVES,
        PEOPLE,
        NAMES,
        PRONOUNS,
        SOCIAL,
        PLACE_ADJECTIVES,
        INTRANSITIVE,
        DITRANSITIVE,
        SAYING,
        MANNER,
        TIME,
        CONJUNCTIONS,
        FUNCTION,
    ];
    let mut words: Vec<&str> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    for c in CATEGORIES {
        words.extend(c.nouns.iter().chain(c.adjectives).chain(c.verbs));
    }
    for (p, nouns) in PLACES {
        words.push(p);
        words.extend(nouns.iter());
    }
    words.sort_unstable();
    words.dedup();
    words
}

/// Picks from `items` with probability proportional to `1 / (rank + 1)`.
fn zipf<'a, T, R: Rng>(rng: &mut R, items: &'a [T]) -> &'a T {
    let total: f64 = (1..=items.len()).map(|r| 1.0 / r as f64).sum();
    let mut u = rng.gen::<f64>() * total;
    for (r, item) in items.iter().enumerate() {
        u -= 1.0 / (r + 1) as f64;
        if u <= 0.0 {
            return item;
        }
    }
    &items[items.len() - 1]
}

struct Generator<'r, R> {
    rng: &'r mut R,
    out: Vec<&'static str>,
}

impl<R: Rng> Generator<'_, R> {
    fn chance(&mut self, p: f64) -> bool {
        self.rng.gen_bool(p)
    }

    fn pick(&mut self, items: &'static [&'static str]) {
        let w = *zipf(self.rng, items);
        self.out.push(w);
    }

    fn noun_phrase(&mut self, adjectives: &'static [&'static str], nouns: &'static [&'static str]) {
        self.pick(DETERMINERS);
        if self.chance(0.4) {
            self.pick(adjectives);
        }
        self.pick(nouns);
    }

    fn person(&mut self, depth: usize) {
        if self.chance(0.2) {
            self.pick(NAMES);
            return;
        }
        self.noun_phrase(PEOPLE_ADJECTIVES, PEOPLE);
        if depth < 2 && self.chance(0.1) {
            self.out.push("who");
            self.verb_phrase(depth + 1);
        }
    }

    fn thing(&mut self) -> &'static Category {
        let c = zipf(self.rng, CATEGORIES);
        self.noun_phrase(c.adjectives, c.nouns);
        c
    }

    fn place(&mut self) {
        let &(p, nouns) = zipf(self.rng, PLACES);
        self.out.push(p);
        self.noun_phrase(PLACE_ADJECTIVES, nouns);
    }

    fn verb_phrase(&mut self, depth: usize) {
        let u: f64 = self.rng.gen();
        if u < 0.5 {
            let c = zipf(self.rng, CATEGORIES);
            self.pick(c.verbs);
            self.noun_phrase(c.adjectives, c.nouns);
        } else if u < 0.6 {
            self.pick(SOCIAL);
            self.person(depth + 1);
        } else if u < 0.78 {
            self.pick(INTRANSITIVE);
        } else if u < 0.9 || depth > 0 {
            self.pick(DITRANSITIVE);
            self.thing();
            self.out.push("to");
            self.person(depth + 1);
        } else {
            self.pick(SAYING);
            self.out.push("that");
            self.clause(depth + 1, false);
        }
        if self.chance(0.25) {
            self.pick(MANNER);
        }
        if depth == 0 && self.chance(0.35) {
            self.place();
        }
    }

    fn clause(&mut self, depth: usize, pronoun: bool) {
        if pronoun {
            self.pick(PRONOUNS);
        } else {
            self.person(depth);
        }
        self.verb_phrase(depth);
    }

    fn sentence(&mut self) {
        let time_first = self.chance(0.15);
        if time_first {
            self.pick(TIME);
            self.out.push(",");
        }
        self.clause(0, false);
        if self.chance(0.35) {
            self.pick(CONJUNCTIONS);
            let pronoun = self.chance(0.7);
            self.clause(0, pronoun);
        }
        if !time_first && self.chance(0.15) {
            self.pick(TIME);
        }
        self.out.push(".");
    }
}

/// One sentence as whitespace-separated tokens.
pub fn toy_sentence<R: Rng>(rng: &mut R) -> String {
    let mut g = Generator { rng, out: Vec::new() };
    g.sentence();
    g.out.join(" ")
}

/// `n` sentences from a seeded generator.
pub fn toy_corpus(seed: u64, n: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| toy_sentence(&mut rng)).collect()
}

/// Shuffles the tokens of `sentence` with `rng`.
pub fn shuffle_tokens<R: Rng>(sentence: &str, rng: &mut R) -> String {
    let mut tokens: Vec<&str> = sentence.split_whitespace().collect();
    tokens.shuffle(rng);
    tokens.join(" ")
}
