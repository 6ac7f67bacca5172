//! Sentence-level BLEU (clipped k-gram precision, brevity penalty) and
//! cosine similarity.

use std::collections::HashMap;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::codec::vocab::tokenize;
use crate::error::{Error, Result};

/// Exact fraction `matches / total`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Precision {
    pub matches: usize,
    pub total: usize,
}

impl Precision {
    pub fn value(&self) -> f64 {
        self.matches as f64 / self.total as f64
    }
}

fn ngram_counts<T: Eq + Hash>(tokens: &[T], k: usize) -> HashMap<&[T], usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(k) {
        *counts.entry(w).or_insert(0) += 1;
    }
    counts
}

/// Clipped k-gram precision of `candidate` against `reference`. `None` when
/// the candidate has fewer than `k` tokens (the order is undefined).
pub fn kgram_precision<T: Eq + Hash>(candidate: &[T], reference: &[T], k: usize) -> Option<Precision> {
    if k == 0 || candidate.len() < k {
        return None;
    }
    let refs = ngram_counts(reference, k);
    let matches = ngram_counts(candidate, k)
        .into_iter()
        .map(|(g, c)| c.min(refs.get(g).copied().unwrap_or(0)))
        .sum();
    Some(Precision {
        matches,
        total: candidate.len() + 1 - k,
    })
}

/// `1` if `c > r`, else `exp(1 − r/c)`.
pub fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    weights: Vec<f64>,
}

impl BleuConfig {
    /// Uniform weights `1/K` up to order `K`.
    pub fn uniform(max_order: usize) -> Result<Self> {
        if max_order == 0 {
            return Err(Error::Config("BLEU order must be >= 1".into()));
        }
        Ok(BleuConfig {
            weights: vec![1.0 / max_order as f64; max_order],
        })
    }

    pub fn with_weights(weights: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.is_empty() || weights.iter().any(|w| !(*w > 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "BLEU weights must be positive and sum to 1: {weights:?}"
            )));
        }
        Ok(BleuConfig { weights })
    }

    pub fn max_order(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

impl Default for BleuConfig {
    fn default() -> Self {
        BleuConfig::uniform(2).expect("order 2 is valid")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub bleu: f64,
    /// Per-order precision; `None` where the candidate is shorter than `k`.
    pub precisions: Vec<Option<Precision>>,
    pub brevity_penalty: f64,
    pub candidate_len: usize,
    pub reference_len: usize,
}

/// Sentence BLEU with per-order detail. Orders the candidate is too short
/// for are dropped and the remaining weights renormalised; any zero
/// precision makes the score zero.
pub fn bleu_report<T: Eq + Hash>(candidate: &[T], reference: &[T], config: &BleuConfig) -> BleuReport {
    let (c, r) = (candidate.len(), reference.len());
    let precisions: Vec<Option<Precision>> = (1..=config.max_order())
        .map(|k| kgram_precision(candidate, reference, k))
        .collect();
    if c == 0 || r == 0 {
        return BleuReport {
            bleu: 0.0,
            precisions,
            brevity_penalty: 0.0,
            candidate_len: c,
            reference_len: r,
        };
    }
    let bp = brevity_penalty(c, r);
    let present: Vec<(f64, Precision)> = config
        .weights()
        .iter()
        .zip(&precisions)
        .filter_map(|(w, p)| p.map(|p| (*w, p)))
        .collect();
    let wsum: f64 = present.iter().map(|(w, _)| w).sum();
    let bleu = if present.iter().any(|(_, p)| p.matches == 0) {
        0.0
    } else {
        let log_mean: f64 = present
            .iter()
            .map(|(w, p)| w / wsum * p.value().ln())
            .sum();
        (bp * log_mean.exp()).clamp(0.0, 1.0)
    };
    BleuReport {
        bleu,
        precisions,
        brevity_penalty: bp,
        candidate_len: c,
        reference_len: r,
    }
}

pub fn bleu<T: Eq + Hash>(candidate: &[T], reference: &[T], config: &BleuConfig) -> f64 {
    bleu_report(candidate, reference, config).bleu
}

/// BLEU on raw text, case-insensitive.
pub fn bleu_text(candidate: &str, reference: &str, config: &BleuConfig) -> f64 {
    bleu(&tokenize(candidate), &tokenize(reference), config)
}

/// `Σ a_i b_i / (‖a‖·‖b‖)`.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dim("cosine_similarity", &[a.len()], &[b.len()]));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::UndefinedSimilarity);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
