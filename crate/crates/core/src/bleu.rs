//! Corpus BLEU with clipped n-gram precision up to 4-grams, no smoothing and
//! a single reference per sentence (equivalent to multi-bleu on tokenized text).

use alloc::collections::BTreeMap;
use alloc::string::String;
use core::fmt;

use thiserror::Error;

pub const MAX_ORDER: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BleuError {
    #[error("{hypotheses} hypotheses but {references} references")]
    LengthMismatch { hypotheses: usize, references: usize },
    #[error("cannot score an empty corpus")]
    Empty,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BleuReport {
    /// Corpus BLEU on the 0-100 scale.
    pub bleu: f64,
    pub precisions: [f64; MAX_ORDER],
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

impl BleuReport {
    /// BLEU recomputed from the reported precisions and brevity penalty.
    pub fn recompose(&self) -> f64 {
        if self.precisions.iter().any(|&p| p <= 0.0) {
            return 0.0;
        }
        let mean_log = self.precisions.iter().map(|&p| libm::log(p)).sum::<f64>() / MAX_ORDER as f64;
        100.0 * self.brevity_penalty * libm::exp(mean_log)
    }

    /// Tab-separated `BLEU p1 p2 p3 p4 BP hyp_len ref_len`.
    pub fn machine_row(&self) -> String {
        let p = &self.precisions;
        alloc::format!(
            "{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}",
            self.bleu,
            p[0],
            p[1],
            p[2],
            p[3],
            self.brevity_penalty,
            self.hyp_len,
            self.ref_len
        )
    }
}

impl fmt::Display for BleuReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = self.precisions.map(|p| 100.0 * p);
        let ratio = self.hyp_len as f64 / self.ref_len.max(1) as f64;
        write!(
            f,
            "BLEU = {:.2}, {:.1}/{:.1}/{:.1}/{:.1} (BP={:.3}, ratio={:.3}, hyp_len={}, ref_len={})",
            self.bleu, p[0], p[1], p[2], p[3], self.brevity_penalty, ratio, self.hyp_len, self.ref_len
        )
    }
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], u64> {
    let mut counts = BTreeMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Scores line-aligned hypotheses against references.
pub fn corpus_bleu<T, H, R>(hypotheses: &[H], references: &[R]) -> Result<BleuReport, BleuError>
where
    T: Ord,
    H: AsRef<[T]>,
    R: AsRef<[T]>,
{
    if hypotheses.len() != references.len() {
        return Err(BleuError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(BleuError::Empty);
    }
    let mut matches = [0u64; MAX_ORDER];
    let mut totals = [0u64; MAX_ORDER];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let (hyp, reference) = (hyp.as_ref(), reference.as_ref());
        hyp_len += hyp.len();
        ref_len += reference.len();
        for n in 1..=MAX_ORDER {
            let ref_counts = ngram_counts(reference, n);
            for (gram, count) in ngram_counts(hyp, n) {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                matches[n - 1] += count.min(clip);
                totals[n - 1] += count;
            }
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        if totals[n] > 0 {
            precisions[n] = matches[n] as f64 / totals[n] as f64;
        }
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        libm::exp(1.0 - ref_len as f64 / hyp_len as f64)
    } else {
        1.0
    };
    let mut report = BleuReport {
        bleu: 0.0,
        precisions,
        matches,
        totals,
        brevity_penalty,
        hyp_len,
        ref_len,
    };
    report.bleu = report.recompose();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn toks(s: &str) -> Vec<&str> {
        s.split_whitespace().collect()
    }

    #[test]
    fn identity_is_100() {
        let refs = [toks("the cat sat on the mat"), toks("a dog barked at the moon .")];
        let r = corpus_bleu(&refs, &refs).unwrap();
        assert_eq!(r.bleu, 100.0);
        assert_eq!(r.brevity_penalty, 1.0);
    }

    #[test]
    fn swapped_bigram_zero_without_smoothing() {
        let r = corpus_bleu(&[toks("b a c d")], &[toks("a b c d")]).unwrap();
        assert_eq!(r.precisions[0], 1.0);
        assert!((r.precisions[1] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.precisions[2], 0.0);
        assert_eq!(r.bleu, 0.0);
    }

    #[test]
    fn clipping_and_brevity() {
        let r = corpus_bleu(&[toks("the the the")], &[toks("the cat is on the mat")]).unwrap();
        assert_eq!(r.matches[0], 2);
        assert_eq!(r.totals[0], 3);
        assert!((r.brevity_penalty - libm::exp(1.0 - 2.0)).abs() < 1e-15);
    }

    #[test]
    fn errors() {
        let one = [toks("a")];
        assert_eq!(
            corpus_bleu::<&str, _, _>(&one, &[] as &[Vec<&str>]),
            Err(BleuError::LengthMismatch {
                hypotheses: 1,
                references: 0
            })
        );
        assert_eq!(
            corpus_bleu::<&str, Vec<&str>, Vec<&str>>(&[], &[]),
            Err(BleuError::Empty)
        );
    }

    #[test]
    fn report_text() {
        let refs = [toks("a b c d")];
        let r = corpus_bleu(&refs, &refs).unwrap();
        assert!(alloc::format!("{r}").starts_with("BLEU = 100.00, 100.0/100.0/100.0/100.0 (BP=1.000"));
        assert!(r.machine_row().starts_with("100.000000\t1.000000"));
    }

    proptest! {
        #[test]
        fn permutations_have_unit_bp_and_recompose(
            sentences in proptest::collection::vec(proptest::collection::vec(0u8..6, 1..12), 1..8),
            rot in 0usize..12,
        ) {
            let hyps: Vec<Vec<u8>> = sentences
                .iter()
                .map(|s| { let mut h = s.clone(); let n = h.len(); h.rotate_left(rot % n); h })
                .collect();
            let r = corpus_bleu(&hyps, &sentences).unwrap();
            prop_assert_eq!(r.brevity_penalty, 1.0);
            prop_assert!((r.recompose() - r.bleu).abs() < 1e-6);
            prop_assert!((0.0..=100.0).contains(&r.bleu));

            let mut reversed_hyps = hyps.clone();
            let mut reversed_refs = sentences.clone();
            reversed_hyps.reverse();
            reversed_refs.reverse();
            let r2 = corpus_bleu(&reversed_hyps, &reversed_refs).unwrap();
            prop_assert_eq!(r.bleu, r2.bleu);
        }
    }
}
