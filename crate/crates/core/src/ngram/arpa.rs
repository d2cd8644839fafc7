use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use thiserror::Error;

use super::{NGramModel, NgramEntry, NgramError};
use crate::bag::TokenId;
use crate::vocab::Vocabulary;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArpaError {
    #[error("line {line}: expected {expected}")]
    Expected { line: usize, expected: &'static str },
    #[error("line {line}: malformed header {text:?}")]
    BadHeader { line: usize, text: String },
    #[error("line {line}: malformed {order}-gram entry")]
    BadEntry { line: usize, order: usize },
    #[error("line {line}: token {token:?} is not in the vocabulary")]
    UnknownToken { line: usize, token: String },
    #[error("\\{order}-grams: header declares {declared} entries, found {found}")]
    CountMismatch {
        order: usize,
        declared: usize,
        found: usize,
    },
    #[error("sections out of order: found \\{found}-grams: where \\{expected}-grams: was expected")]
    SectionOrder { expected: usize, found: usize },
    #[error(transparent)]
    Model(#[from] NgramError),
}

/// Writes the model in ARPA layout. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn export_arpa(model: &NGramModel, vocab: &Vocabulary) -> String {
    let mut out = String::new();
    out.push_str("\\data\\\n");
    for k in 1..=model.order() {
        let _ = writeln!(out, "ngram {}={}", k, model.grams(k).len());
    }
    for k in 1..=model.order() {
        let _ = write!(out, "\n\\{k}-grams:\n");
        for (gram, entry) in model.grams(k) {
            let _ = write!(out, "{}\t", entry.logp);
            for (i, &id) in gram.iter().enumerate() {
                if i > 0 {
                    out.push(' ');
                }
                out.push_str(vocab.token(id).unwrap_or("<unk>"));
            }
            if let Some(bow) = entry.backoff {
                let _ = write!(out, "\t{bow}");
            }
            out.push('\n');
        }
    }
    out.push_str("\n\\end\\\n");
    out
}

/// Parses ARPA text, resolving tokens through `vocab`.
pub fn import_arpa(text: &str, vocab: &Vocabulary) -> Result<NGramModel, ArpaError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    // Anything before \data\ is a comment.
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some(_) => continue,
            None => {
                return Err(ArpaError::Expected {
                    line: 0,
                    expected: "\\data\\",
                })
            }
        }
    }

    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (line, text) in lines.by_ref() {
        if let Some(rest) = text.strip_prefix("ngram ") {
            let (k, n) = rest.split_once('=').ok_or_else(|| ArpaError::BadHeader {
                line,
                text: text.to_string(),
            })?;
            let k: usize = k.trim().parse().map_err(|_| ArpaError::BadHeader {
                line,
                text: text.to_string(),
            })?;
            let n: usize = n.trim().parse().map_err(|_| ArpaError::BadHeader {
                line,
                text: text.to_string(),
            })?;
            if k != declared.len() + 1 {
                return Err(ArpaError::BadHeader {
                    line,
                    text: text.to_string(),
                });
            }
            declared.push(n);
        } else {
            pending = Some((line, text));
            break;
        }
    }
    if declared.is_empty() {
        return Err(ArpaError::Expected {
            line: 0,
            expected: "ngram N=count",
        });
    }
    let order = declared.len();

    let mut grams: Vec<BTreeMap<Vec<TokenId>, NgramEntry>> = Vec::with_capacity(order);
    let mut current = pending;
    for k in 1..=order {
        let (line, header) = current.ok_or(ArpaError::Expected {
            line: 0,
            expected: "\\N-grams:",
        })?;
        let found = parse_section_header(header).ok_or_else(|| ArpaError::BadHeader {
            line,
            text: header.to_string(),
        })?;
        if found != k {
            return Err(ArpaError::SectionOrder { expected: k, found });
        }
        let mut level = BTreeMap::new();
        current = None;
        for (line, text) in lines.by_ref() {
            if text.starts_with('\\') {
                current = Some((line, text));
                break;
            }
            let (gram, entry) = parse_entry(text, k, line, vocab)?;
            level.insert(gram, entry);
        }
        if level.len() != declared[k - 1] {
            return Err(ArpaError::CountMismatch {
                order: k,
                declared: declared[k - 1],
                found: level.len(),
            });
        }
        grams.push(level);
    }
    match current {
        Some((_, "\\end\\")) => {}
        other => {
            return Err(ArpaError::Expected {
                line: other.map_or(0, |c| c.0),
                expected: "\\end\\",
            })
        }
    }
    Ok(NGramModel::from_entries(
        order,
        vocab.len(),
        vocab.bos(),
        vocab.eos(),
        grams,
    )?)
}

fn parse_section_header(text: &str) -> Option<usize> {
    text.strip_prefix('\\')?.strip_suffix("-grams:")?.parse().ok()
}

fn parse_entry(
    text: &str,
    order: usize,
    line: usize,
    vocab: &Vocabulary,
) -> Result<(Vec<TokenId>, NgramEntry), ArpaError> {
    let bad = || ArpaError::BadEntry { line, order };
    let mut fields = text.split_whitespace();
    let logp: f64 = fields.next().ok_or_else(bad)?.parse().map_err(|_| bad())?;
    let mut gram = Vec::with_capacity(order);
    for _ in 0..order {
        let token = fields.next().ok_or_else(bad)?;
        let id = vocab.get(token).ok_or_else(|| ArpaError::UnknownToken {
            line,
            token: token.to_string(),
        })?;
        gram.push(id);
    }
    let backoff = match fields.next() {
        Some(f) => Some(f.parse().map_err(|_| bad())?),
        None => None,
    };
    if fields.next().is_some() || !logp.is_finite() {
        return Err(bad());
    }
    Ok((gram, NgramEntry { logp, backoff }))
}
