//! Loading scorers from disk, `name:path[:weight]` specs and weights files.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;
use wordorder_core::combine::{CombineError, LogLinearCombo, Member};
use wordorder_core::neural::AnyModel;
use wordorder_core::ngram::{export_arpa, import_arpa, ArpaError, NGramModel, UnigramTable};
use wordorder_core::{Bag, DecoderState, Scorer, ScorerError, TokenId, Vocabulary};

use crate::container::{is_model_file, read_model, ContainerError};
use crate::io::{read_bytes, read_lines, IoError};

const FINGERPRINT_PREFIX: &str = "vocabulary-fingerprint ";

#[derive(Debug, Error)]
pub enum ScorerLoadError {
    #[error("{0}")]
    Io(#[from] IoError),
    #[error("{}: {source}", path.display())]
    Container {
        path: PathBuf,
        #[source]
        source: ContainerError,
    },
    #[error("{}: {source}", path.display())]
    Arpa {
        path: PathBuf,
        #[source]
        source: ArpaError,
    },
    #[error("{}: neither a model container nor ARPA text", path.display())]
    UnknownFormat { path: PathBuf },
    #[error("{}: n-gram model was built for vocabulary {expected:016x} but {found:016x} was supplied", path.display())]
    VocabMismatch { path: PathBuf, expected: u64, found: u64 },
    #[error("scorer spec {0:?} is not name:path[:weight]")]
    Spec(String),
    #[error("{}:{line}: expected name<TAB>weight", path.display())]
    WeightsSyntax { path: PathBuf, line: usize },
    #[error("{}: weight for unknown scorer {name:?}", path.display())]
    WeightsName { path: PathBuf, name: String },
    #[error("two scorers are named {0:?}")]
    DuplicateName(String),
    #[error("no scorers given")]
    NoScorers,
    #[error("heuristic f needs unigram estimates: pass an ARPA model or include an n-gram scorer")]
    NoUnigrams,
    #[error(transparent)]
    Combine(#[from] CombineError),
}

/// `name:path[:weight]` from the command line.
#[derive(Clone, Debug, PartialEq)]
pub struct ScorerSpec {
    pub name: String,
    pub path: PathBuf,
    pub weight: Option<f64>,
}

impl std::str::FromStr for ScorerSpec {
    type Err = ScorerLoadError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ScorerLoadError::Spec(s.to_string());
        let (name, rest) = s.split_once(':').ok_or_else(bad)?;
        let (path, weight) = match rest.rsplit_once(':') {
            Some((p, w)) => match w.parse::<f64>() {
                Ok(w) if w.is_finite() => (p, Some(w)),
                _ => (rest, None),
            },
            None => (rest, None),
        };
        if name.is_empty() || path.is_empty() {
            return Err(bad());
        }
        Ok(ScorerSpec {
            name: name.to_string(),
            path: PathBuf::from(path),
            weight,
        })
    }
}

impl std::fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.name, self.path.display())?;
        if let Some(w) = self.weight {
            write!(f, ":{w}")?;
        }
        Ok(())
    }
}

pub fn parse_specs(items: &[String]) -> Result<Vec<ScorerSpec>, ScorerLoadError> {
    let specs: Vec<ScorerSpec> = items.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    if specs.is_empty() {
        return Err(ScorerLoadError::NoScorers);
    }
    for (i, s) in specs.iter().enumerate() {
        if specs[..i].iter().any(|t| t.name == s.name) {
            return Err(ScorerLoadError::DuplicateName(s.name.clone()));
        }
    }
    Ok(specs)
}

/// A scorer read from disk.
#[derive(Clone, Debug)]
pub enum LoadedScorer {
    Ngram(NGramModel),
    Neural(AnyModel),
}

impl LoadedScorer {
    fn inner(&self) -> &dyn Scorer {
        match self {
            LoadedScorer::Ngram(m) => m,
            LoadedScorer::Neural(m) => m,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LoadedScorer::Ngram(_) => "ngram",
            LoadedScorer::Neural(m) => m.architecture().name(),
        }
    }
}

impl Scorer for LoadedScorer {
    fn vocab_size(&self) -> usize {
        self.inner().vocab_size()
    }

    fn init(&self, bag: &Bag) -> Result<DecoderState, ScorerError> {
        self.inner().init(bag)
    }

    fn log_probs(&self, state: &DecoderState) -> Vec<f64> {
        self.inner().log_probs(state)
    }

    fn advance(&self, state: &DecoderState, word: TokenId) -> DecoderState {
        self.inner().advance(state, word)
    }
}

/// ARPA text preceded by a comment line recording the vocabulary fingerprint.
pub fn arpa_with_fingerprint(model: &NGramModel, vocab: &Vocabulary) -> String {
    format!(
        "{FINGERPRINT_PREFIX}{:016x}\n\n{}",
        vocab.fingerprint(),
        export_arpa(model, vocab)
    )
}

fn arpa_fingerprint(text: &str) -> Option<u64> {
    text.lines()
        .take_while(|l| l.trim() != "\\data\\")
        .find_map(|l| l.trim().strip_prefix(FINGERPRINT_PREFIX))
        .and_then(|h| u64::from_str_radix(h.trim(), 16).ok())
}

pub fn load_ngram(path: &Path, vocab: &Vocabulary) -> Result<NGramModel, ScorerLoadError> {
    let bytes = read_bytes(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| ScorerLoadError::UnknownFormat {
        path: path.to_path_buf(),
    })?;
    ngram_from_text(path, text, vocab)
}

fn ngram_from_text(path: &Path, text: &str, vocab: &Vocabulary) -> Result<NGramModel, ScorerLoadError> {
    if let Some(expected) = arpa_fingerprint(text) {
        if expected != vocab.fingerprint() {
            return Err(ScorerLoadError::VocabMismatch {
                path: path.to_path_buf(),
                expected,
                found: vocab.fingerprint(),
            });
        }
    }
    import_arpa(text, vocab).map_err(|source| ScorerLoadError::Arpa {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads a neural container or an ARPA file, checking it against `vocab`.
pub fn load_scorer(path: &Path, vocab: &Vocabulary) -> Result<LoadedScorer, ScorerLoadError> {
    let bytes = read_bytes(path)?;
    if is_model_file(&bytes) {
        return read_model(&bytes, vocab)
            .map(LoadedScorer::Neural)
            .map_err(|source| ScorerLoadError::Container {
                path: path.to_path_buf(),
                source,
            });
    }
    match std::str::from_utf8(&bytes) {
        Ok(text) if text.contains("\\data\\") => ngram_from_text(path, text, vocab).map(LoadedScorer::Ngram),
        _ => Err(ScorerLoadError::UnknownFormat {
            path: path.to_path_buf(),
        }),
    }
}

/// Scorers loaded from specs, in spec order.
pub struct ScorerSet {
    pub specs: Vec<ScorerSpec>,
    pub scorers: Vec<LoadedScorer>,
}

impl ScorerSet {
    pub fn load(specs: Vec<ScorerSpec>, vocab: &Vocabulary) -> Result<Self, ScorerLoadError> {
        let scorers = specs
            .iter()
            .map(|s| load_scorer(&s.path, vocab))
            .collect::<Result<_, _>>()?;
        Ok(ScorerSet { specs, scorers })
    }

    pub fn names(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.name.clone()).collect()
    }

    /// `name+name+..`, used to label timing rows.
    pub fn label(&self) -> String {
        self.names().join("+")
    }

    /// Inline weights (default 1), replaced by any from `weights`.
    pub fn combo(
        &self,
        weights: Option<&[(String, f64)]>,
        eos: TokenId,
    ) -> Result<LogLinearCombo<'_>, ScorerLoadError> {
        let members = self
            .specs
            .iter()
            .zip(&self.scorers)
            .map(|(spec, scorer)| {
                let from_file = weights.and_then(|w| w.iter().find(|(n, _)| *n == spec.name).map(|p| p.1));
                Member {
                    name: spec.name.as_str(),
                    scorer: scorer as &dyn Scorer,
                    weight: from_file.or(spec.weight).unwrap_or(1.0),
                }
            })
            .collect();
        Ok(LogLinearCombo::new(members, eos)?)
    }

    /// Unigram table of the first n-gram member.
    pub fn unigrams(&self, vocab: &Vocabulary) -> Option<UnigramTable> {
        self.scorers.iter().find_map(|s| match s {
            LoadedScorer::Ngram(m) => Some(UnigramTable::from_model(m, vocab.unk())),
            LoadedScorer::Neural(_) => None,
        })
    }
}

/// `name<TAB>weight` lines. Names must belong to `known`.
pub fn read_weights(path: &Path, known: &[String]) -> Result<Vec<(String, f64)>, ScorerLoadError> {
    let mut out = Vec::new();
    for (i, line) in read_lines(path)?.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || ScorerLoadError::WeightsSyntax {
            path: path.to_path_buf(),
            line: i + 1,
        };
        let (name, w) = line.split_once('\t').ok_or_else(bad)?;
        let w: f64 = w.trim().parse().map_err(|_| bad())?;
        if !w.is_finite() {
            return Err(bad());
        }
        if !known.iter().any(|k| k == name) {
            return Err(ScorerLoadError::WeightsName {
                path: path.to_path_buf(),
                name: name.to_string(),
            });
        }
        out.push((name.to_string(), w));
    }
    Ok(out)
}

pub fn format_weights(names: &[String], weights: &[f64]) -> String {
    let mut out = String::new();
    for (n, w) in names.iter().zip(weights) {
        let _ = writeln!(out, "{n}\t{w}");
    }
    out
}
