//! Derivative-free, bound-constrained maximization of dev-set BLEU over the
//! combination weights.
//!
//! The optimizer is a trust-region method in the BOBYQA family: around the
//! incumbent it evaluates the `2n + 1` points `x ± r e_i`, fits a quadratic
//! model with diagonal Hessian through them, maximizes the model over the box
//! `[x - r, x + r] ∩ bounds` (separable, so solved exactly per coordinate) and
//! accepts the step on actual improvement. The radius doubles after a good
//! model prediction and halves otherwise; the run ends when the radius falls
//! below a threshold or the evaluation budget is spent. The incumbent never
//! gets worse.
//!
//! BLEU is piecewise constant in the weights, so the model is often flat. Until
//! the first improvement a flat model grows the radius (up to the box size)
//! instead of shrinking it, which lets the search leave a starting plateau.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use super::{CombineError, LogLinearCombo};
use crate::bag::{Bag, TokenSequence};
use crate::bleu::{corpus_bleu, BleuError};
use crate::ngram::UnigramTable;
use crate::search::{beam_search, BeamConfig, SearchError};

/// Upper end of the weight search box `[0, WEIGHT_MAX]`.
pub const WEIGHT_MAX: f64 = 10.0;

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerOptions {
    pub initial_radius: f64,
    pub min_radius: f64,
    /// Minimum ratio of actual to predicted gain for the radius to grow.
    pub expand_ratio: f64,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        OptimizerOptions {
            initial_radius: 1.0,
            min_radius: 0.05,
            expand_ratio: 0.75,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TuneResult {
    /// Best weights found; for combinations the first is fixed at 1.
    pub weights: Vec<f64>,
    /// Objective (dev BLEU) at `weights`.
    pub bleu: f64,
    /// Incumbent objective after each evaluation.
    pub trajectory: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TuneError {
    #[error("tuning needs at least one dev sentence")]
    NoDevData,
    #[error("tuning budget must allow at least one evaluation")]
    ZeroBudget,
    #[error("decoding dev sentence {sentence} failed: {source}")]
    Decode { sentence: usize, source: SearchError },
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error(transparent)]
    Combine(#[from] CombineError),
}

struct Evaluator<F> {
    objective: F,
    cache: Vec<(Vec<f64>, f64)>,
    budget: usize,
    best_x: Vec<f64>,
    best_f: f64,
    trajectory: Vec<f64>,
}

impl<F, E> Evaluator<F>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    fn exhausted(&self) -> bool {
        self.trajectory.len() >= self.budget
    }

    /// `None` once the budget is spent.
    fn eval(&mut self, x: &[f64]) -> Result<Option<f64>, E> {
        if let Some((_, f)) = self.cache.iter().find(|(p, _)| p.as_slice() == x) {
            return Ok(Some(*f));
        }
        if self.exhausted() {
            return Ok(None);
        }
        let f = (self.objective)(x)?;
        self.cache.push((x.to_vec(), f));
        if f > self.best_f {
            self.best_f = f;
            self.best_x = x.to_vec();
        }
        self.trajectory.push(self.best_f);
        Ok(Some(f))
    }
}

/// Maximizes `objective` over the box `[lower, upper]` starting from `start`,
/// using at most `budget` objective evaluations. Returns the incumbent.
pub fn maximize_bounded<F, E>(
    objective: F,
    start: &[f64],
    lower: &[f64],
    upper: &[f64],
    budget: usize,
    options: &OptimizerOptions,
) -> Result<TuneResult, E>
where
    F: FnMut(&[f64]) -> Result<f64, E>,
{
    let n = start.len();
    let clamp = |x: &mut [f64]| {
        for i in 0..n {
            x[i] = x[i].clamp(lower[i], upper[i]);
        }
    };
    let mut x0 = start.to_vec();
    clamp(&mut x0);
    let mut ev = Evaluator {
        objective,
        cache: Vec::new(),
        budget: budget.max(1),
        best_x: x0.clone(),
        best_f: f64::NEG_INFINITY,
        trajectory: Vec::new(),
    };
    ev.eval(&x0)?;

    let span = (0..n).map(|i| upper[i] - lower[i]).fold(0.0, f64::max);
    let mut radius = options.initial_radius;
    let mut exploring = true;
    let mut iterations = 0;
    while n > 0 && radius >= options.min_radius && !ev.exhausted() {
        iterations += 1;
        let center = ev.best_x.clone();
        let f0 = ev.best_f;

        // diagonal quadratic model from the 2n + 1 interpolation points
        let mut grad = vec![0.0; n];
        let mut curv = vec![0.0; n];
        let mut out_of_budget = false;
        for i in 0..n {
            let up = (center[i] + radius).min(upper[i]);
            let down = (center[i] - radius).max(lower[i]);
            let mut sample = |v: f64| -> Result<Option<f64>, E> {
                let mut p = center.clone();
                p[i] = v;
                ev.eval(&p)
            };
            let f_up = if up > center[i] { sample(up)? } else { Some(f0) };
            let f_down = if down < center[i] { sample(down)? } else { Some(f0) };
            let (Some(f_up), Some(f_down)) = (f_up, f_down) else {
                out_of_budget = true;
                break;
            };
            let (a, b) = (up - center[i], center[i] - down);
            match (a > 0.0, b > 0.0) {
                (true, true) => {
                    let (su, sd) = ((f_up - f0) / a, (f0 - f_down) / b);
                    curv[i] = 2.0 * (su - sd) / (a + b);
                    grad[i] = su - 0.5 * curv[i] * a;
                }
                (true, false) => grad[i] = (f_up - f0) / a,
                (false, true) => grad[i] = (f0 - f_down) / b,
                (false, false) => {}
            }
        }
        if out_of_budget {
            break;
        }
        if ev.best_f > f0 {
            // a model point already beat the center; recentre there
            exploring = false;
            radius *= 2.0;
            continue;
        }

        let mut step = vec![0.0; n];
        let mut predicted = 0.0;
        for i in 0..n {
            let lo = (lower[i] - center[i]).max(-radius);
            let hi = (upper[i] - center[i]).min(radius);
            let model = |d: f64| grad[i] * d + 0.5 * curv[i] * d * d;
            let mut best_d = if model(hi) >= model(lo) { hi } else { lo };
            if curv[i] < 0.0 {
                let d = (-grad[i] / curv[i]).clamp(lo, hi);
                if model(d) > model(best_d) {
                    best_d = d;
                }
            }
            if model(best_d) > 0.0 {
                step[i] = best_d;
                predicted += model(best_d);
            }
        }
        if predicted <= 1e-12 {
            if exploring && radius < span {
                radius = (2.0 * radius).min(span);
            } else {
                exploring = false;
                radius *= 0.5;
            }
            continue;
        }
        let mut trial: Vec<f64> = center.iter().zip(&step).map(|(c, d)| c + d).collect();
        clamp(&mut trial);
        let Some(f_trial) = ev.eval(&trial)? else { break };
        let ratio = (f_trial - f0) / predicted;
        if f_trial > f0 {
            exploring = false;
        }
        if f_trial > f0 && ratio >= options.expand_ratio {
            radius *= 2.0;
        } else if f_trial <= f0 {
            radius *= 0.5;
        }
    }

    Ok(TuneResult {
        weights: ev.best_x,
        bleu: ev.best_f,
        evaluations: ev.trajectory.len(),
        trajectory: ev.trajectory,
        iterations,
    })
}

/// Tunes the weights of `combo` for corpus BLEU against `references`.
///
/// `decode_dev` decodes the whole dev set with a given weighting and returns
/// one 1-best sequence per sentence, or the index of the failing sentence.
/// The first weight stays 1 (rankings are scale invariant); the others range
/// over `[0, WEIGHT_MAX]` starting from 1.
pub fn tune_weights<F>(
    combo: &LogLinearCombo<'_>,
    references: &[TokenSequence],
    budget: usize,
    options: &OptimizerOptions,
    mut decode_dev: F,
) -> Result<TuneResult, TuneError>
where
    F: FnMut(&LogLinearCombo<'_>) -> Result<Vec<TokenSequence>, (usize, SearchError)>,
{
    if references.is_empty() {
        return Err(TuneError::NoDevData);
    }
    if budget == 0 {
        return Err(TuneError::ZeroBudget);
    }
    let free = combo.len() - 1;
    let objective = |x: &[f64]| -> Result<f64, TuneError> {
        let mut weights = Vec::with_capacity(free + 1);
        weights.push(1.0);
        weights.extend_from_slice(x);
        let candidate = combo.with_weights(&weights)?;
        let hyps = decode_dev(&candidate).map_err(|(sentence, source)| TuneError::Decode { sentence, source })?;
        Ok(corpus_bleu(&hyps, references)?.bleu)
    };
    let result = maximize_bounded(
        objective,
        &vec![1.0; free],
        &vec![0.0; free],
        &vec![WEIGHT_MAX; free],
        budget,
        options,
    )?;
    let mut weights = vec![1.0];
    weights.extend_from_slice(&result.weights);
    Ok(TuneResult { weights, ..result })
}

/// [`tune_weights`] decoding the dev bags one after another.
pub fn tune_weights_sequential(
    combo: &LogLinearCombo<'_>,
    dev_bags: &[Bag],
    references: &[TokenSequence],
    config: &BeamConfig,
    unigrams: Option<&UnigramTable>,
    budget: usize,
) -> Result<TuneResult, TuneError> {
    tune_weights(combo, references, budget, &OptimizerOptions::default(), |c| {
        dev_bags
            .iter()
            .enumerate()
            .map(|(i, bag)| {
                beam_search(bag, c, config, unigrams)
                    .map(|mut hyps| hyps.swap_remove(0).prefix)
                    .map_err(|e| (i, e))
            })
            .collect()
    })
}
