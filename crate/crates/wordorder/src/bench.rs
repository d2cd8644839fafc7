//! Wall-clock decoding benchmarks over beam sizes, heuristics and scorer sets.

use std::fmt::Write;
use std::time::Instant;

use thiserror::Error;
use wordorder_core::combine::LogLinearCombo;
use wordorder_core::ngram::UnigramTable;
use wordorder_core::{Bag, BeamConfig, Heuristic};

use crate::decode::{decode_all, decode_one};

/// One configuration to time.
pub struct BenchConfig<'a> {
    /// Scorer-set label, e.g. `rnnlm+bag2seq`.
    pub scorers: String,
    pub combo: &'a LogLinearCombo<'a>,
    pub beam: BeamConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingRow {
    pub scorers: String,
    pub beam: usize,
    pub heuristic: Heuristic,
    /// Fastest of the timed repetitions.
    pub seconds: f64,
    pub sentences: usize,
    pub tokens: usize,
    pub tokens_per_sec: f64,
    /// Set when some sentence failed to decode; the timing is then partial.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimingReport {
    pub rows: Vec<TimingRow>,
    pub workers: usize,
}

#[derive(Debug, Error, PartialEq)]
pub enum BenchError {
    #[error("configuration {scorers} beam={beam} heuristic={heuristic} is listed twice")]
    Duplicate {
        scorers: String,
        beam: usize,
        heuristic: Heuristic,
    },
    #[error("nothing to decode")]
    NoSentences,
}

impl TimingReport {
    /// Single-worker timings are comparable across rows; parallel ones are not.
    pub fn comparable(&self) -> bool {
        self.workers <= 1
    }

    pub fn row(&self, scorers: &str, beam: usize, heuristic: Heuristic) -> Option<&TimingRow> {
        self.rows
            .iter()
            .find(|r| r.scorers == scorers && r.beam == beam && r.heuristic == heuristic)
    }

    /// Tab-separated table with a header line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if !self.comparable() {
            let _ = writeln!(
                out,
                "# parallel run with {} workers: timings are not comparable",
                self.workers
            );
        }
        out.push_str("scorers\tbeam\theuristic\tseconds\tsentences\ttokens_per_sec\tstatus\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}\t{:.1}\t{}",
                r.scorers,
                r.beam,
                r.heuristic,
                r.seconds,
                r.sentences,
                r.tokens_per_sec,
                r.error.as_deref().unwrap_or("ok")
            );
        }
        out
    }

    /// Time against beam size, one block per scorer set and heuristic,
    /// blocks separated by a blank line.
    pub fn series(&self) -> String {
        let mut keys: Vec<(&str, Heuristic)> = Vec::new();
        for r in &self.rows {
            if !keys.contains(&(r.scorers.as_str(), r.heuristic)) {
                keys.push((r.scorers.as_str(), r.heuristic));
            }
        }
        let mut out = String::new();
        for (i, (scorers, heuristic)) in keys.into_iter().enumerate() {
            if i > 0 {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# scorers={scorers} heuristic={heuristic}\n# beam\tseconds");
            let mut rows: Vec<&TimingRow> = self
                .rows
                .iter()
                .filter(|r| r.scorers == scorers && r.heuristic == heuristic && r.error.is_none())
                .collect();
            rows.sort_by_key(|r| r.beam);
            for r in rows {
                let _ = writeln!(out, "{}\t{:.6}", r.beam, r.seconds);
            }
        }
        out
    }
}

/// Times every configuration over the same bags. Each configuration first
/// decodes one sentence untimed, then the whole set `repeats` times; the
/// fastest repetition is reported. A failing configuration gets an error on
/// its row and the run moves on.
pub fn benchmark_decode(
    bags: &[Bag],
    configs: &[BenchConfig<'_>],
    unigrams: Option<&UnigramTable>,
    workers: usize,
    repeats: usize,
) -> Result<TimingReport, BenchError> {
    let warmup = bags.iter().find(|b| !b.is_empty()).ok_or(BenchError::NoSentences)?;
    for (i, c) in configs.iter().enumerate() {
        let key = |c: &BenchConfig<'_>| (c.scorers.clone(), c.beam.beam_size, c.beam.heuristic);
        if configs[..i].iter().any(|d| key(d) == key(c)) {
            return Err(BenchError::Duplicate {
                scorers: c.scorers.clone(),
                beam: c.beam.beam_size,
                heuristic: c.beam.heuristic,
            });
        }
    }
    let tokens: usize = bags.iter().map(Bag::size).sum();
    let mut rows = Vec::with_capacity(configs.len());
    for c in configs {
        let mut error = decode_one(warmup, c.combo, &c.beam, unigrams)
            .err()
            .map(|e| format!("warm-up: {e}"));
        let mut best = f64::INFINITY;
        if error.is_none() {
            for _ in 0..repeats.max(1) {
                let start = Instant::now();
                let results = decode_all(bags, c.combo, &c.beam, unigrams, workers);
                let seconds = start.elapsed().as_secs_f64().max(1e-9);
                best = best.min(seconds);
                if let Some((i, e)) = results
                    .iter()
                    .enumerate()
                    .find_map(|(i, r)| r.as_ref().err().map(|e| (i, e)))
                {
                    error = Some(format!("sentence {}: {e}", i + 1));
                    break;
                }
            }
        }
        if !best.is_finite() {
            best = 1e-9;
        }
        rows.push(TimingRow {
            scorers: c.scorers.clone(),
            beam: c.beam.beam_size,
            heuristic: c.beam.heuristic,
            seconds: best,
            sentences: bags.len(),
            tokens,
            tokens_per_sec: tokens as f64 / best,
            error,
        });
    }
    Ok(TimingReport { rows, workers })
}
