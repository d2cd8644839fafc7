//! The `wordorder` subcommands, driven by resolved [`Settings`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;
use wordorder_core::combine::{tune_weights, OptimizerOptions};
use wordorder_core::neural::{train_model, Architecture, EpochReport, TrainConfig, TrainError};
use wordorder_core::ngram::{train_ngram, Smoothing, UnigramTable};
use wordorder_core::search::SearchError;
use wordorder_core::{build_vocab, corpus_bleu, BeamConfig, Heuristic, TokenSequence, UnknownMode, Vocabulary};

use crate::bench::{benchmark_decode, BenchConfig};
use crate::config::{key, ConfigError, Key, Settings};
use crate::container::write_model;
use crate::decode::{best_sequences, decode_all, format_nbest, BagLine};
use crate::io::{load_vocab, read_lines, save_vocab, write_bytes, write_lines, write_text};
use crate::scorers::{
    arpa_with_fingerprint, format_weights, load_ngram, parse_specs, read_weights, ScorerLoadError, ScorerSet,
};

/// Failure of a command, classified by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags or settings (exit 1).
    #[error("{0}")]
    Usage(String),
    /// Missing, unreadable or inconsistent data (exit 2).
    #[error("{0}")]
    Data(String),
    /// A broken internal guarantee (exit 3).
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => CliError::Data(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        })*
    };
}

data_errors!(
    crate::io::IoError,
    ScorerLoadError,
    TrainError,
    wordorder_core::VocabError,
    wordorder_core::ngram::NgramError,
    wordorder_core::BleuError,
    wordorder_core::combine::TuneError,
    crate::bench::BenchError
);

fn search_failure(line: usize, e: SearchError) -> CliError {
    match e {
        SearchError::InvalidPermutation => CliError::Internal(format!("line {line}: {e}")),
        e => CliError::Data(format!("line {line}: {e}")),
    }
}

fn existing_file(s: &Settings, k: &str) -> Result<PathBuf, CliError> {
    let p = s.path(k)?;
    if !p.is_file() {
        return Err(CliError::Data(format!("{k}: {} does not exist", p.display())));
    }
    Ok(p)
}

fn output_path(s: &Settings, k: &str) -> Result<PathBuf, CliError> {
    let p = s.path(k)?;
    let parent = p
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    if !parent.is_dir() {
        return Err(CliError::Data(format!(
            "{k}: directory {} does not exist",
            parent.display()
        )));
    }
    Ok(p)
}

fn parse_with<T>(s: &Settings, k: &str, f: impl Fn(&str) -> Option<T>, expected: &str) -> Result<T, CliError> {
    let v = s.require(k)?;
    f(v).ok_or_else(|| s.bad_value(k, format!("expected {expected}")).into())
}

// ---------------------------------------------------------------- train

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainKind {
    Ngram,
    Nplm,
    Rnnlm,
    Bag2seq,
}

impl TrainKind {
    pub fn name(self) -> &'static str {
        match self {
            TrainKind::Ngram => "ngram",
            TrainKind::Nplm => "nplm",
            TrainKind::Rnnlm => "rnnlm",
            TrainKind::Bag2seq => "bag2seq",
        }
    }

    fn architecture(self) -> Option<Architecture> {
        match self {
            TrainKind::Ngram => None,
            TrainKind::Nplm => Some(Architecture::Nplm),
            TrainKind::Rnnlm => Some(Architecture::Rnnlm),
            TrainKind::Bag2seq => Some(Architecture::Bag2Seq),
        }
    }
}

const TRAIN_COMMON: &[Key] = &[
    key("corpus", None),
    key("dev", None),
    key("vocab", None),
    key("vocab_size", Some("50000")),
    key("unk", Some("single")),
    key("output", None),
];
const TRAIN_NGRAM: &[Key] = &[key("order", Some("5")), key("smoothing", Some("auto"))];
const TRAIN_NEURAL: &[Key] = &[
    key("preset", Some("ptb")),
    key("embed", None),
    key("hidden", None),
    key("epochs", None),
    key("learning_rate", None),
    key("clip_norm", None),
    key("batch_size", None),
    key("seed", None),
    key("init_scale", None),
    key("lr_decay", None),
];

/// Keys accepted by `train <kind>`.
pub fn train_keys(kind: TrainKind) -> Vec<Key> {
    let mut keys = TRAIN_COMMON.to_vec();
    match kind {
        TrainKind::Ngram => keys.extend_from_slice(TRAIN_NGRAM),
        _ => keys.extend_from_slice(TRAIN_NEURAL),
    }
    match kind {
        TrainKind::Nplm => keys.push(key("context", None)),
        TrainKind::Bag2seq => keys.push(key("annotation", None)),
        _ => {}
    }
    keys
}

fn unknown_mode(s: &Settings) -> Result<UnknownMode, CliError> {
    parse_with(
        s,
        "unk",
        |v| match v {
            "single" => Some(UnknownMode::Single),
            "ptb" => Some(UnknownMode::Ptb),
            _ => None,
        },
        "single or ptb",
    )
}

fn smoothing(s: &Settings) -> Result<Smoothing, CliError> {
    parse_with(
        s,
        "smoothing",
        |v| match v {
            "auto" => Some(Smoothing::Auto),
            "kn" => Some(Smoothing::KneserNey),
            "wb" => Some(Smoothing::WittenBell),
            "ml" => Some(Smoothing::MaximumLikelihood),
            _ => None,
        },
        "auto, kn, wb or ml",
    )
}

/// Preset dimensions overridden by any explicit settings; records the result in `s`.
fn train_config(s: &mut Settings, kind: TrainKind) -> Result<TrainConfig, CliError> {
    let mut c = match s.require("preset")? {
        "ptb" => TrainConfig::default(),
        "desk" => TrainConfig::desk(),
        _ => return Err(s.bad_value("preset", "expected ptb or desk").into()),
    };
    fn set<T: FromStr + ToString + Copy>(s: &mut Settings, k: &str, slot: &mut T) -> Result<(), CliError>
    where
        T::Err: std::fmt::Display,
    {
        if let Some(v) = s.parse_opt::<T>(k)? {
            *slot = v;
        }
        s.fill(k, slot.to_string());
        Ok(())
    }
    set(s, "embed", &mut c.embed)?;
    set(s, "hidden", &mut c.hidden)?;
    set(s, "epochs", &mut c.epochs)?;
    set(s, "learning_rate", &mut c.learning_rate)?;
    set(s, "clip_norm", &mut c.clip_norm)?;
    set(s, "batch_size", &mut c.batch_size)?;
    set(s, "seed", &mut c.seed)?;
    set(s, "init_scale", &mut c.init_scale)?;
    set(s, "lr_decay", &mut c.lr_decay)?;
    match kind {
        TrainKind::Nplm => set(s, "context", &mut c.context)?,
        TrainKind::Bag2seq => set(s, "annotation", &mut c.annotation)?,
        _ => {}
    }
    if c.embed == 0 || c.hidden == 0 || c.annotation == 0 || c.context == 0 || c.batch_size == 0 {
        return Err(CliError::Usage(
            "dimensions, context and batch_size must be positive".into(),
        ));
    }
    Ok(c)
}

fn encode_all(lines: &[String], vocab: &Vocabulary) -> Vec<TokenSequence> {
    lines.iter().map(|l| vocab.encode(l)).collect()
}

pub fn train(kind: TrainKind, mut s: Settings) -> Result<(), CliError> {
    let corpus_path = existing_file(&s, "corpus")?;
    let dev_path = s.path_opt("dev");
    if dev_path.is_some() {
        existing_file(&s, "dev")?;
    }
    let vocab_path = s.path("vocab")?;
    let output = output_path(&s, "output")?;
    let unk = unknown_mode(&s)?;
    let vocab_size: usize = s.parse("vocab_size")?;
    let (ngram, neural) = match kind.architecture() {
        None => {
            let order: usize = s.parse("order")?;
            if order == 0 {
                return Err(s.bad_value("order", "must be at least 1").into());
            }
            (Some((order, smoothing(&s)?)), None)
        }
        Some(arch) => (None, Some((arch, train_config(&mut s, kind)?))),
    };

    let lines = read_lines(&corpus_path)?;
    let vocab = if vocab_path.is_file() {
        load_vocab(&vocab_path)?
    } else {
        let v = build_vocab(lines.iter().flat_map(|l| l.split_whitespace()), vocab_size, unk)?;
        save_vocab(&vocab_path, &v)?;
        eprintln!("wrote vocabulary of {} tokens to {}", v.len(), vocab_path.display());
        v
    };
    let corpus = encode_all(&lines, &vocab);
    let dev = match &dev_path {
        Some(p) => encode_all(&read_lines(p)?, &vocab),
        None => Vec::new(),
    };

    if let Some((order, smoothing)) = ngram {
        let model = train_ngram(&corpus, order, smoothing, &vocab)?;
        write_text(&output, &arpa_with_fingerprint(&model, &vocab))?;
        if !dev.is_empty() {
            eprintln!("dev perplexity {:.3}", model.perplexity(&dev));
        }
    }
    if let Some((arch, config)) = neural {
        let mut log = String::from("epoch\ttrain_perplexity\tdev_perplexity\tlearning_rate\n");
        let on_epoch = |r: &EpochReport| {
            eprintln!(
                "epoch {}: train ppl {:.3}, dev ppl {:.3}, lr {}",
                r.epoch, r.train_perplexity, r.dev_perplexity, r.learning_rate
            );
        };
        let (model, reports) = train_model(arch, &vocab, &corpus, &dev, &config, on_epoch)?;
        for r in &reports {
            let _ = writeln!(
                log,
                "{}\t{}\t{}\t{}",
                r.epoch, r.train_perplexity, r.dev_perplexity, r.learning_rate
            );
        }
        write_bytes(&output, &write_model(&model, &vocab))?;
        let mut log_path = output.as_os_str().to_owned();
        log_path.push(".log");
        write_text(Path::new(&log_path), &log)?;
    }
    s.persist_next_to(&output)?;
    Ok(())
}

// ---------------------------------------------------------------- shuffle

pub const SHUFFLE_KEYS: &[Key] = &[
    key("input", None),
    key("output", None),
    key("mode", Some("random")),
    key("seed", Some("1")),
];

/// Each line's tokens in seeded random order, or sorted byte-wise.
pub fn shuffle_lines(lines: &[String], sorted: bool, seed: u64) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    lines
        .iter()
        .map(|l| {
            let mut tokens: Vec<&str> = l.split_whitespace().collect();
            if sorted {
                tokens.sort_unstable();
            } else {
                tokens.shuffle(&mut rng);
            }
            tokens.join(" ")
        })
        .collect()
}

pub fn shuffle(s: Settings) -> Result<(), CliError> {
    let input = existing_file(&s, "input")?;
    let output = output_path(&s, "output")?;
    let sorted = parse_with(
        &s,
        "mode",
        |v| match v {
            "random" => Some(false),
            "sorted" => Some(true),
            _ => None,
        },
        "random or sorted",
    )?;
    let seed: u64 = s.parse("seed")?;
    write_lines(&output, shuffle_lines(&read_lines(&input)?, sorted, seed))?;
    s.persist_next_to(&output)?;
    Ok(())
}

// ---------------------------------------------------------------- decode

const SEARCH_KEYS: &[Key] = &[
    key("vocab", None),
    key("scorers", None),
    key("weights", None),
    key("heuristic", Some("none")),
    key("f_weight", Some("1")),
    key("recombination", Some("off")),
    key("renormalize", Some("false")),
    key("unigrams", None),
    key("workers", Some("1")),
];

pub fn decode_keys() -> Vec<Key> {
    let mut keys = SEARCH_KEYS.to_vec();
    keys.extend_from_slice(&[
        key("input", None),
        key("output", None),
        key("beam", Some("5")),
        key("nbest", None),
        key("nbest_size", Some("10")),
    ]);
    keys
}

fn heuristic(v: &str) -> Option<Heuristic> {
    v.parse().ok()
}

/// Search settings shared by decode, tune and bench, for a given beam size.
fn beam_config(s: &Settings, beam: usize, heuristic_value: Heuristic) -> Result<BeamConfig, CliError> {
    if beam == 0 {
        return Err(CliError::Usage("beam size must be at least 1".into()));
    }
    let mut c = BeamConfig::new(beam, heuristic_value);
    c.f_weight = s.parse("f_weight")?;
    c.renormalize = s.parse("renormalize")?;
    match s.require("recombination")? {
        "off" => {}
        "on" => {
            let k = c.recombination_context;
            c = c.with_recombination(k)
        }
        v => match v.parse::<usize>() {
            Ok(k) if k > 0 => c = c.with_recombination(k),
            _ => {
                return Err(s
                    .bad_value("recombination", "expected off, on or a context length")
                    .into())
            }
        },
    }
    Ok(c)
}

fn workers(s: &Settings) -> Result<usize, CliError> {
    let w: usize = s.parse("workers")?;
    if w == 0 {
        return Err(s.bad_value("workers", "must be at least 1").into());
    }
    Ok(w)
}

/// Unigram table for f: the `unigrams` model if given, else the first n-gram scorer.
fn unigram_table(
    s: &Settings,
    sets: &[&ScorerSet],
    vocab: &Vocabulary,
    needed: bool,
) -> Result<Option<UnigramTable>, CliError> {
    if let Some(p) = s.path_opt("unigrams") {
        let lm = load_ngram(&p, vocab)?;
        return Ok(Some(UnigramTable::from_model(&lm, vocab.unk())));
    }
    let table = sets.iter().find_map(|set| set.unigrams(vocab));
    if needed && table.is_none() {
        return Err(ScorerLoadError::NoUnigrams.into());
    }
    Ok(table)
}

fn load_scorers(items: &[String], vocab: &Vocabulary) -> Result<ScorerSet, CliError> {
    let specs = parse_specs(items).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(ScorerSet::load(specs, vocab)?)
}

fn weights_for(s: &Settings, names: &[String]) -> Result<Option<Vec<(String, f64)>>, CliError> {
    Ok(s.path_opt("weights").map(|p| read_weights(&p, names)).transpose()?)
}

pub fn decode(s: Settings) -> Result<(), CliError> {
    let input = existing_file(&s, "input")?;
    let output = output_path(&s, "output")?;
    let vocab_path = existing_file(&s, "vocab")?;
    let nbest_path = match s.path_opt("nbest") {
        Some(_) => Some(output_path(&s, "nbest")?),
        None => None,
    };
    let nbest_size: usize = s.parse("nbest_size")?;
    let h = parse_with(&s, "heuristic", heuristic, "none, f or g")?;
    let config = beam_config(&s, s.parse("beam")?, h)?;
    let workers = workers(&s)?;

    let vocab = load_vocab(&vocab_path)?;
    let set = load_scorers(&s.list("scorers"), &vocab)?;
    let weights = weights_for(&s, &set.names())?;
    let combo = set.combo(weights.as_deref(), vocab.eos())?;
    let unigrams = unigram_table(&s, &[&set], &vocab, h == Heuristic::FutureCost)?;

    let lines: Vec<BagLine> = read_lines(&input)?.iter().map(|l| BagLine::parse(l, &vocab)).collect();
    let bags: Vec<_> = lines.iter().map(|l| l.bag.clone()).collect();
    let results = decode_all(&bags, &combo, &config, unigrams.as_ref(), workers);
    let mut out = Vec::with_capacity(lines.len());
    let mut nbest = String::new();
    for (i, (line, r)) in lines.iter().zip(results).enumerate() {
        let hyps = r.map_err(|e| search_failure(i + 1, e))?;
        out.push(hyps.first().map(|h| line.render(&h.prefix, &vocab)).unwrap_or_default());
        nbest.push_str(&format_nbest(line, &hyps, &vocab, nbest_size));
    }
    write_lines(&output, &out)?;
    if let Some(p) = nbest_path {
        write_text(&p, &nbest)?;
    }
    s.persist_next_to(&output)?;
    Ok(())
}

// ---------------------------------------------------------------- tune

pub fn tune_keys() -> Vec<Key> {
    let mut keys = SEARCH_KEYS.to_vec();
    keys.extend_from_slice(&[
        key("input", None),
        key("references", None),
        key("output", None),
        key("beam", Some("5")),
        key("tune_beam", Some("5")),
        key("budget", Some("100")),
    ]);
    keys
}

pub fn tune(s: Settings) -> Result<(), CliError> {
    let input = existing_file(&s, "input")?;
    let refs_path = existing_file(&s, "references")?;
    let output = output_path(&s, "output")?;
    let vocab_path = existing_file(&s, "vocab")?;
    let h = parse_with(&s, "heuristic", heuristic, "none, f or g")?;
    let full = beam_config(&s, s.parse("beam")?, h)?;
    let reduced = beam_config(&s, s.parse("tune_beam")?, h)?;
    let budget: usize = s.parse("budget")?;
    let workers = workers(&s)?;

    let vocab = load_vocab(&vocab_path)?;
    let set = load_scorers(&s.list("scorers"), &vocab)?;
    let combo = set.combo(None, vocab.eos())?;
    let unigrams = unigram_table(&s, &[&set], &vocab, h == Heuristic::FutureCost)?;
    let bags: Vec<_> = read_lines(&input)?
        .iter()
        .map(|l| BagLine::parse(l, &vocab).bag)
        .collect();
    let refs = encode_all(&read_lines(&refs_path)?, &vocab);
    if refs.len() != bags.len() {
        return Err(CliError::Data(format!(
            "{} bags but {} references",
            bags.len(),
            refs.len()
        )));
    }

    let result = tune_weights(&combo, &refs, budget, &OptimizerOptions::default(), |c| {
        best_sequences(decode_all(&bags, c, &reduced, unigrams.as_ref(), workers))
    })
    .map_err(|e| match e {
        wordorder_core::combine::TuneError::Decode {
            sentence,
            source: SearchError::InvalidPermutation,
        } => search_failure(sentence + 1, SearchError::InvalidPermutation),
        e => e.into(),
    })?;
    write_text(&output, &format_weights(&set.names(), &result.weights))?;
    let tuned = combo.with_weights(&result.weights).map_err(ScorerLoadError::from)?;
    let hyps = best_sequences(decode_all(&bags, &tuned, &full, unigrams.as_ref(), workers))
        .map_err(|(i, e)| search_failure(i + 1, e))?;
    let final_bleu = corpus_bleu(&hyps, &refs)?;
    println!(
        "tuned {} weights in {} evaluations: dev BLEU {:.2} at beam {}, {:.2} at beam {}",
        result.weights.len(),
        result.evaluations,
        result.bleu,
        reduced.beam_size,
        final_bleu.bleu,
        full.beam_size
    );
    s.persist_next_to(&output)?;
    Ok(())
}

// ---------------------------------------------------------------- eval

pub const EVAL_KEYS: &[Key] = &[key("hypotheses", None), key("references", None), key("output", None)];

pub fn eval(s: Settings) -> Result<String, CliError> {
    let hyp_path = existing_file(&s, "hypotheses")?;
    let ref_path = existing_file(&s, "references")?;
    let output = match s.path_opt("output") {
        Some(_) => Some(output_path(&s, "output")?),
        None => None,
    };
    let split = |lines: Vec<String>| -> Vec<Vec<String>> {
        lines
            .iter()
            .map(|l| l.split_whitespace().map(String::from).collect())
            .collect()
    };
    let hyps = split(read_lines(&hyp_path)?);
    let refs = split(read_lines(&ref_path)?);
    let report = corpus_bleu(&hyps, &refs)?;
    let text = format!("{report}\n{}\n", report.machine_row());
    if let Some(p) = output {
        write_text(&p, &text)?;
        s.persist_next_to(&p)?;
    }
    Ok(text)
}

// ---------------------------------------------------------------- bench

pub fn bench_keys() -> Vec<Key> {
    let mut keys = SEARCH_KEYS.to_vec();
    keys.retain(|k| k.name != "heuristic");
    keys.extend_from_slice(&[
        key("input", None),
        key("output", None),
        key("series", None),
        key("beams", Some("1,5,64,512")),
        key("heuristics", Some("none")),
        key("limit", Some("0")),
        key("repeats", Some("1")),
    ]);
    keys
}

pub fn bench(s: Settings) -> Result<(), CliError> {
    let input = existing_file(&s, "input")?;
    let output = output_path(&s, "output")?;
    let series = match s.path_opt("series") {
        Some(_) => Some(output_path(&s, "series")?),
        None => None,
    };
    let vocab_path = existing_file(&s, "vocab")?;
    let beams: Vec<usize> = s
        .list("beams")
        .iter()
        .map(|b| {
            b.parse()
                .map_err(|_| s.bad_value("beams", "expected comma-separated sizes"))
        })
        .collect::<Result<_, _>>()?;
    let heuristics: Vec<Heuristic> = s
        .list("heuristics")
        .iter()
        .map(|h| heuristic(h).ok_or_else(|| s.bad_value("heuristics", "expected none, f or g")))
        .collect::<Result<_, _>>()?;
    let limit: usize = s.parse("limit")?;
    let repeats: usize = s.parse("repeats")?;
    let workers = workers(&s)?;
    let set_specs: Vec<Vec<String>> = s
        .require("scorers")?
        .split(';')
        .map(|set| {
            set.split(',')
                .map(|x| x.trim().to_string())
                .filter(|x| !x.is_empty())
                .collect()
        })
        .filter(|v: &Vec<String>| !v.is_empty())
        .collect();
    if beams.is_empty() || heuristics.is_empty() || set_specs.is_empty() {
        return Err(CliError::Usage(
            "beams, heuristics and scorers must be non-empty".into(),
        ));
    }
    let mut configs_base = Vec::new();
    for &b in &beams {
        for &h in &heuristics {
            configs_base.push(beam_config(&s, b, h)?);
        }
    }

    let vocab = load_vocab(&vocab_path)?;
    let sets: Vec<ScorerSet> = set_specs
        .iter()
        .map(|items| load_scorers(items, &vocab))
        .collect::<Result<_, _>>()?;
    let all_names: Vec<String> = sets.iter().flat_map(|set| set.names()).collect();
    let weights = weights_for(&s, &all_names)?;
    let combos = sets
        .iter()
        .map(|set| set.combo(weights.as_deref(), vocab.eos()))
        .collect::<Result<Vec<_>, _>>()?;
    let set_refs: Vec<&ScorerSet> = sets.iter().collect();
    let unigrams = unigram_table(&s, &set_refs, &vocab, heuristics.contains(&Heuristic::FutureCost))?;

    let mut bags: Vec<_> = read_lines(&input)?
        .iter()
        .map(|l| BagLine::parse(l, &vocab).bag)
        .collect();
    if limit > 0 {
        bags.truncate(limit);
    }
    let mut configs = Vec::new();
    for (set, combo) in sets.iter().zip(&combos) {
        for beam in &configs_base {
            configs.push(BenchConfig {
                scorers: set.label(),
                combo,
                beam: beam.clone(),
            });
        }
    }
    let report = benchmark_decode(&bags, &configs, unigrams.as_ref(), workers, repeats)?;
    write_text(&output, &report.to_tsv())?;
    if let Some(p) = series {
        write_text(&p, &report.series())?;
    }
    print!("{}", report.to_tsv());
    s.persist_next_to(&output)?;
    Ok(())
}
