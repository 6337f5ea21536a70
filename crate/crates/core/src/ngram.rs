//! Additive-smoothed unigram and bigram language models, plus the
//! information-theoretic primitives (entropy, KL divergence, cross-entropy)
//! the rest of the pipeline is built on. All logarithms are base 2, so
//! every quantity is in bits.

use std::collections::BTreeMap;

use serde_json::json;

use crate::corpus::{Document, Token};
use crate::error::{Error, Result};

/// Sum tolerance when validating explicit probability vectors.
const DIST_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NGramOrder {
    Unigram,
    Bigram,
}

/// The conditioning context for a bigram lookup.
///
/// `Start` marks the beginning of a tweet; contexts never cross tweet
/// boundaries, so the last token of one tweet tells us nothing about the
/// first token of the next.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Context<'a> {
    Start,
    Word(&'a str),
}

#[derive(Clone, Debug)]
struct BigramTable {
    /// Row 0 is the start-of-tweet context; row `i + 1` is vocab id `i`.
    counts: Vec<BTreeMap<u32, u64>>,
    totals: Vec<u64>,
}

/// A per-user language model with additive smoothing.
///
/// Unseen mass: every count is inflated by `delta`, and the denominator
/// treats the vocabulary as `V + 1` categories — the observed types plus
/// one shared unknown-word bucket. Any token outside the training
/// vocabulary scores as that bucket, so probabilities over
/// `vocab ∪ {unknown}` sum to one in every context.
#[derive(Clone, Debug)]
pub struct NGramModel {
    owner: String,
    order: NGramOrder,
    delta: f64,
    vocab: BTreeMap<Token, u32>,
    unigram_counts: Vec<u64>,
    total_tokens: u64,
    bigram: Option<BigramTable>,
}

/// Trains a model of the given order on one document.
///
/// `delta` must be positive; zero would assign zero probability to unseen
/// tokens and make cross-entropies infinite.
pub fn train_ngram(doc: &Document, order: NGramOrder, delta: f64) -> Result<NGramModel> {
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig(format!("smoothing delta must be > 0, got {delta}")));
    }
    if doc.is_empty() {
        return Err(Error::Untrainable(doc.owner().to_string()));
    }

    let mut vocab = BTreeMap::new();
    for token in doc.counts().keys() {
        let id = vocab.len() as u32;
        vocab.insert(token.clone(), id);
    }
    let mut unigram_counts = vec![0u64; vocab.len()];
    for (token, &count) in doc.counts() {
        unigram_counts[vocab[token] as usize] = count;
    }

    let bigram = match order {
        NGramOrder::Unigram => None,
        NGramOrder::Bigram => {
            let rows = vocab.len() + 1;
            let mut counts = vec![BTreeMap::new(); rows];
            let mut totals = vec![0u64; rows];
            for segment in doc.segments() {
                let mut row = 0usize; // start-of-tweet
                for token in segment {
                    let id = vocab[token];
                    *counts[row].entry(id).or_insert(0) += 1;
                    totals[row] += 1;
                    row = id as usize + 1;
                }
            }
            Some(BigramTable { counts, totals })
        }
    };

    Ok(NGramModel {
        owner: doc.owner().to_string(),
        order,
        delta,
        vocab,
        unigram_counts,
        total_tokens: doc.total_tokens() as u64,
        bigram,
    })
}

impl NGramModel {
    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn order(&self) -> NGramOrder {
        self.order
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn smoothed(&self, count: u64, total: u64) -> f64 {
        let categories = self.vocab.len() as f64 + 1.0;
        (count as f64 + self.delta) / (total as f64 + self.delta * categories)
    }

    /// P(token) under the unigram table; unknown tokens share one bucket.
    pub fn unigram_prob(&self, token: &str) -> f64 {
        let count = self
            .vocab
            .get(token)
            .map_or(0, |&id| self.unigram_counts[id as usize]);
        self.smoothed(count, self.total_tokens)
    }

    /// P(token | context). Falls back to the unigram table when the model
    /// was trained without bigram counts.
    pub fn conditional_prob(&self, context: Context<'_>, token: &str) -> f64 {
        let Some(table) = &self.bigram else {
            return self.unigram_prob(token);
        };
        let row = match context {
            Context::Start => Some(0usize),
            Context::Word(w) => self.vocab.get(w).map(|&id| id as usize + 1),
        };
        // A context outside the vocabulary has no counts: the distribution
        // degenerates to uniform over V + 1 categories.
        let (count, total) = match row {
            Some(r) => {
                let count = self
                    .vocab
                    .get(token)
                    .and_then(|id| table.counts[r].get(id))
                    .copied()
                    .unwrap_or(0);
                (count, table.totals[r])
            }
            None => (0, 0),
        };
        self.smoothed(count, total)
    }

    /// Average per-token surprise, in bits, of `doc` under this model:
    /// `-(1/N) Σ log2 P(token | context)`. Each tweet restarts the bigram
    /// context.
    pub fn cross_entropy(&self, doc: &Document) -> Result<f64> {
        if doc.is_empty() {
            return Err(Error::EmptyDocument);
        }
        let mut sum = 0.0;
        match self.order {
            NGramOrder::Unigram => {
                // Grouping by type is exact: unigram probability ignores position.
                for (token, &count) in doc.counts() {
                    sum += count as f64 * self.unigram_prob(token).log2();
                }
            }
            NGramOrder::Bigram => {
                for segment in doc.segments() {
                    let mut context = Context::Start;
                    for token in segment {
                        sum += self.conditional_prob(context, token).log2();
                        context = Context::Word(token);
                    }
                }
            }
        }
        Ok(-sum / doc.total_tokens() as f64)
    }

    /// Serialises the smoothed tables (including the unknown bucket) for
    /// offline inspection.
    pub fn dump_json(&self) -> serde_json::Value {
        let unigram: BTreeMap<&str, f64> = self
            .vocab
            .keys()
            .map(|t| (t.as_str(), self.unigram_prob(t)))
            .chain(std::iter::once(("<unknown>", self.smoothed(0, self.total_tokens))))
            .collect();
        let mut value = json!({
            "owner": self.owner,
            "order": match self.order { NGramOrder::Unigram => 1, NGramOrder::Bigram => 2 },
            "delta": self.delta,
            "vocab_size": self.vocab.len(),
            "total_tokens": self.total_tokens,
            "unigram": unigram,
        });
        if self.bigram.is_some() {
            let tokens: Vec<&Token> = self.vocab.keys().collect();
            let mut rows = BTreeMap::new();
            for (row, label) in std::iter::once("<start>")
                .chain(tokens.iter().map(|t| t.as_str()))
                .enumerate()
            {
                let dist: BTreeMap<&str, f64> = tokens
                    .iter()
                    .map(|t| {
                        let context = if row == 0 { Context::Start } else { Context::Word(tokens[row - 1]) };
                        (t.as_str(), self.conditional_prob(context, t))
                    })
                    .collect();
                rows.insert(label.to_string(), dist);
            }
            value["bigram"] = serde_json::to_value(rows).expect("serialisable");
        }
        value
    }
}

fn validate_distribution(p: &[f64]) -> Result<()> {
    let mut sum = 0.0;
    for &v in p {
        if !(v >= 0.0) {
            return Err(Error::NotADistribution(v));
        }
        sum += v;
    }
    if (sum - 1.0).abs() > DIST_TOLERANCE {
        return Err(Error::NotADistribution(sum));
    }
    Ok(())
}

/// Shannon entropy of an explicit distribution, in bits. Zero entries
/// contribute nothing (`0 log 0 = 0`).
pub fn entropy(p: &[f64]) -> Result<f64> {
    validate_distribution(p)?;
    Ok(-p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.log2()).sum::<f64>())
}

/// KL divergence `D(P ‖ Q)` in bits. Errors where P has mass but Q does
/// not — the divergence would be infinite.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    let mut sum = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuity { index });
        }
        sum += pi * (pi / qi).log2();
    }
    // Mathematically nonnegative; guard against float round-off near zero.
    Ok(sum.max(0.0))
}

/// Cross-entropy `H(P, Q) = H(P) + D(P ‖ Q)` of explicit distributions,
/// computed directly as `-Σ p log2 q`.
pub fn cross_entropy_dist(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    validate_distribution(p)?;
    validate_distribution(q)?;
    let mut sum = 0.0;
    for (index, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::AbsoluteContinuity { index });
        }
        sum += pi * qi.log2();
    }
    Ok(-sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Scope;
    use approx::assert_abs_diff_eq;

    fn doc(owner: &str, segments: &[&[&str]]) -> Document {
        Document::from_segments(
            owner,
            Scope::Event,
            segments
                .iter()
                .map(|s| s.iter().map(|t| t.to_string()).collect())
                .collect(),
        )
    }

    #[test]
    fn add_one_smoothing_matches_hand_computation() {
        // Counts a:2, b:1, V = 2, delta = 1: denominators are 3 + 3 = 6.
        let m = train_ngram(&doc("u", &[&["a", "a", "b"]]), NGramOrder::Unigram, 1.0).unwrap();
        assert_abs_diff_eq!(m.unigram_prob("a"), 3.0 / 6.0);
        assert_abs_diff_eq!(m.unigram_prob("b"), 2.0 / 6.0);
        assert_abs_diff_eq!(m.unigram_prob("zzz"), 1.0 / 6.0);
    }

    #[test]
    fn unigram_mass_sums_to_one_with_unknown_bucket() {
        let m = train_ngram(
            &doc("u", &[&["x", "y", "y", "z", "x", "x"]]),
            NGramOrder::Unigram,
            0.01,
        )
        .unwrap();
        let mass: f64 =
            ["x", "y", "z"].iter().map(|t| m.unigram_prob(t)).sum::<f64>() + m.unigram_prob("?");
        assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn unigram_cross_entropy_frozen_value() {
        // Model [a,a,b] with delta = 1; doc [a,b,c]:
        // -(log2(1/2) + log2(1/3) + log2(1/6)) / 3
        let m = train_ngram(&doc("u", &[&["a", "a", "b"]]), NGramOrder::Unigram, 1.0).unwrap();
        let h = m.cross_entropy(&doc("v", &[&["a", "b", "c"]])).unwrap();
        assert_abs_diff_eq!(h, 1.7233083338141042, epsilon = 1e-12);
    }

    #[test]
    fn self_cross_entropy_is_minimal_over_smoothed_family() {
        // H(P, Q) >= H(P, P) when Q ranges over models of other documents.
        let train = doc("u", &[&["a", "a", "b", "c", "a"]]);
        let m_self = train_ngram(&train, NGramOrder::Unigram, 0.01).unwrap();
        let m_other =
            train_ngram(&doc("v", &[&["d", "e", "a"]]), NGramOrder::Unigram, 0.01).unwrap();
        let h_self = m_self.cross_entropy(&train).unwrap();
        let h_other = m_other.cross_entropy(&train).unwrap();
        assert!(h_self < h_other, "{h_self} should beat {h_other}");
    }

    #[test]
    fn bigram_contexts_reset_at_tweet_boundaries() {
        // Train on segments [a b], [a c] with delta = 1, V = 3:
        // P(a|start) = (2+1)/(2+4) = 1/2, P(b|a) = (1+1)/(2+4) = 1/3,
        // P(b|start) = (0+1)/(2+4) = 1/6.
        let m = train_ngram(&doc("u", &[&["a", "b"], &["a", "c"]]), NGramOrder::Bigram, 1.0).unwrap();
        assert_abs_diff_eq!(m.conditional_prob(Context::Start, "a"), 0.5);
        assert_abs_diff_eq!(m.conditional_prob(Context::Word("a"), "b"), 1.0 / 3.0);

        let chained = m.cross_entropy(&doc("v", &[&["a", "b"]])).unwrap();
        assert_abs_diff_eq!(chained, 1.2924812503605781, epsilon = 1e-12);

        // Same tokens split across tweets: b is scored from start, not from a.
        let split = m.cross_entropy(&doc("v", &[&["a"], &["b"]])).unwrap();
        assert_abs_diff_eq!(split, 1.7924812503605783, epsilon = 1e-12);
    }

    #[test]
    fn bigram_rows_are_distributions() {
        let m = train_ngram(
            &doc("u", &[&["a", "b", "a", "c"], &["c", "c", "b"]]),
            NGramOrder::Bigram,
            0.01,
        )
        .unwrap();
        for context in [Context::Start, Context::Word("a"), Context::Word("b"), Context::Word("q")] {
            let mass: f64 = ["a", "b", "c"]
                .iter()
                .map(|t| m.conditional_prob(context, t))
                .sum::<f64>()
                + m.conditional_prob(context, "?");
            assert_abs_diff_eq!(mass, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn unknown_context_is_uniform() {
        let m = train_ngram(&doc("u", &[&["a", "b"]]), NGramOrder::Bigram, 0.01).unwrap();
        // V = 2, so an unseen context spreads mass over 3 categories.
        assert_abs_diff_eq!(m.conditional_prob(Context::Word("nope"), "a"), 1.0 / 3.0);
    }

    #[test]
    fn empty_inputs_are_rejected() {
        let empty = doc("u", &[]);
        assert!(train_ngram(&empty, NGramOrder::Unigram, 0.01).is_err());
        assert!(train_ngram(&doc("u", &[&["a"]]), NGramOrder::Unigram, 0.0).is_err());
        let m = train_ngram(&doc("u", &[&["a"]]), NGramOrder::Unigram, 0.01).unwrap();
        assert!(matches!(m.cross_entropy(&empty), Err(Error::EmptyDocument)));
    }

    #[test]
    fn kl_divergence_frozen_values() {
        let h = kl_divergence(&[0.5, 0.5], &[0.25, 0.75]).unwrap();
        assert_abs_diff_eq!(h, 0.20751874963942185, epsilon = 1e-12);
        assert_abs_diff_eq!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
    }

    #[test]
    fn cross_entropy_decomposes_into_entropy_plus_kl() {
        let p = [0.5, 0.5];
        let q = [0.25, 0.75];
        let lhs = cross_entropy_dist(&p, &q).unwrap();
        let rhs = entropy(&p).unwrap() + kl_divergence(&p, &q).unwrap();
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        assert_abs_diff_eq!(lhs, 1.2075187496394219, epsilon = 1e-12);
    }

    #[test]
    fn absolute_continuity_is_enforced() {
        let err = kl_divergence(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err();
        assert!(err.to_string().starts_with("absolute continuity violated"));
        // Q may have extra support; P zeros impose nothing.
        assert!(kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).is_ok());
    }

    #[test]
    fn malformed_distributions_are_rejected() {
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[-0.1, 1.1]).is_err());
        assert!(kl_divergence(&[0.5, 0.5], &[1.0]).is_err());
    }

    #[test]
    fn model_dump_is_deterministic_and_complete() {
        let m = train_ngram(&doc("u", &[&["b", "a"]]), NGramOrder::Bigram, 0.5).unwrap();
        let dump = m.dump_json();
        assert_eq!(dump["vocab_size"], 2);
        assert_eq!(serde_json::to_string(&dump).unwrap(), serde_json::to_string(&m.dump_json()).unwrap());
        let unigram = dump["unigram"].as_object().unwrap();
        assert!(unigram.contains_key("<unknown>"));
    }
}
