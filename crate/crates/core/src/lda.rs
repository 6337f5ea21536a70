//! Latent topic modelling via collapsed Gibbs sampling, topic membership,
//! and per-topic document assembly.
//!
//! Topics are numbered 1..=K everywhere in the public interface (matching
//! scope labels like `topic3`); the raw `phi` matrix is row-indexed from 0.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, user_event_document, Document, EventCorpus, Scope, Token, UserId};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Gibbs sweeps used when folding a new document into a fitted model.
/// With the word-topic table frozen the chain mixes fast; a fixed count
/// keeps inference deterministic and cheap.
const INFERENCE_SWEEPS: usize = 50;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LdaParams {
    pub topics: usize,
    /// Symmetric document-topic prior.
    pub alpha: f64,
    /// Symmetric topic-word prior.
    pub beta: f64,
    /// Full Gibbs sweeps over the corpus during fitting.
    pub iterations: usize,
}

impl LdaParams {
    /// Conventional defaults: alpha = 50/K, beta = 0.01, 1000 sweeps.
    pub fn for_topics(topics: usize) -> Self {
        LdaParams { topics, alpha: 50.0 / topics as f64, beta: 0.01, iterations: 1000 }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if self.topics < 2 {
            return Err(Error::InvalidConfig(format!(
                "need at least 2 topics, got {}",
                self.topics
            )));
        }
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "priors must be positive (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// A fitted topic model: the smoothed word distribution of each topic.
#[derive(Clone, Debug)]
pub struct TopicModel {
    params: LdaParams,
    vocab: Vec<Token>,
    vocab_index: BTreeMap<Token, usize>,
    /// `phi[k][w]`: P(word w | topic k). Rows sum to 1.
    phi: Vec<Vec<f64>>,
}

/// A document-topic mixture estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaEstimate {
    /// P(topic | document); sums to 1.
    pub theta: Vec<f64>,
    /// Tokens the model actually saw; 0 means `theta` fell back to uniform.
    pub in_vocab_tokens: usize,
}

/// Fits a topic model on the given documents by collapsed Gibbs sampling.
///
/// Empty documents are skipped. The vocabulary is exactly the distinct
/// tokens of the remaining documents and must reach at least the topic
/// count. Fully deterministic for a fixed (documents, params, seed).
pub fn fit_lda(docs: &[Document], params: &LdaParams, seed: u64) -> Result<TopicModel> {
    params.validate()?;
    let trainable: Vec<&Document> = docs.iter().filter(|d| !d.is_empty()).collect();
    if trainable.is_empty() {
        return Err(Error::NoTrainableDocuments(docs.len()));
    }

    let mut vocab_index: BTreeMap<Token, usize> = BTreeMap::new();
    for doc in &trainable {
        for token in doc.counts().keys() {
            let next = vocab_index.len();
            vocab_index.entry(token.clone()).or_insert(next);
        }
    }
    let v = vocab_index.len();
    let k = params.topics;
    if v < k {
        return Err(Error::InsufficientVocabulary { vocab: v, topics: k });
    }
    let vocab: Vec<Token> = {
        let mut by_id = vec![String::new(); v];
        for (token, &id) in &vocab_index {
            by_id[id] = token.clone();
        }
        by_id
    };

    let token_ids: Vec<Vec<usize>> = trainable
        .iter()
        .map(|d| d.tokens().iter().map(|t| vocab_index[t]).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut n_dk = vec![vec![0u32; k]; token_ids.len()];
    let mut n_kw = vec![vec![0u32; v]; k];
    let mut n_k = vec![0u32; k];
    let mut z: Vec<Vec<usize>> = token_ids
        .iter()
        .enumerate()
        .map(|(d, ids)| {
            ids.iter()
                .map(|&w| {
                    let t = rng.random_range(0..k);
                    n_dk[d][t] += 1;
                    n_kw[t][w] += 1;
                    n_k[t] += 1;
                    t
                })
                .collect()
        })
        .collect();

    let vbeta = v as f64 * params.beta;
    let mut weights = vec![0.0f64; k];
    for _ in 0..params.iterations {
        for d in 0..token_ids.len() {
            for (pos, &w) in token_ids[d].iter().enumerate() {
                let old = z[d][pos];
                n_dk[d][old] -= 1;
                n_kw[old][w] -= 1;
                n_k[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (n_dk[d][t] as f64 + params.alpha)
                        * (n_kw[t][w] as f64 + params.beta)
                        / (n_k[t] as f64 + vbeta);
                    total += p;
                    weights[t] = total;
                }
                let r = rng.random::<f64>() * total;
                let new = weights.iter().position(|&cum| r < cum).unwrap_or(k - 1);

                z[d][pos] = new;
                n_dk[d][new] += 1;
                n_kw[new][w] += 1;
                n_k[new] += 1;
            }
        }
    }

    let phi = (0..k)
        .map(|t| {
            let denom = n_k[t] as f64 + vbeta;
            (0..v).map(|w| (n_kw[t][w] as f64 + params.beta) / denom).collect()
        })
        .collect();
    Ok(TopicModel { params: *params, vocab, vocab_index, phi })
}

impl TopicModel {
    /// Builds a model from an explicit word-topic table (each row a
    /// distribution over `vocab`). Mainly for injecting known topics in
    /// tests and tools.
    pub fn from_phi(params: LdaParams, vocab: Vec<Token>, phi: Vec<Vec<f64>>) -> Result<TopicModel> {
        params.validate()?;
        if phi.len() != params.topics {
            return Err(Error::MismatchedTopics { left: params.topics, right: phi.len() });
        }
        for row in &phi {
            if row.len() != vocab.len() {
                return Err(Error::LengthMismatch { left: vocab.len(), right: row.len() });
            }
            crate::ngram::entropy(row)?; // validates it is a distribution
        }
        let vocab_index = vocab.iter().cloned().zip(0..).collect();
        Ok(TopicModel { params, vocab, vocab_index, phi })
    }

    pub fn topics(&self) -> usize {
        self.params.topics
    }

    pub fn params(&self) -> &LdaParams {
        &self.params
    }

    pub fn vocab(&self) -> &[Token] {
        &self.vocab
    }

    /// Raw word-topic matrix, rows indexed 0..K.
    pub fn phi(&self) -> &[Vec<f64>] {
        &self.phi
    }

    /// The `n` most probable words of `topic` (1-based), heaviest first;
    /// ties resolve alphabetically.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<(Token, f64)> {
        assert!(topic >= 1 && topic <= self.params.topics, "topic {topic} out of range");
        let row = &self.phi[topic - 1];
        let mut ranked: Vec<(Token, f64)> =
            self.vocab.iter().cloned().zip(row.iter().copied()).collect();
        ranked.sort_by(|(ta, wa), (tb, wb)| {
            wb.partial_cmp(wa).expect("phi is finite").then_with(|| ta.cmp(tb))
        });
        ranked.truncate(n);
        ranked
    }

    /// Estimates P(topic | doc) with the word-topic table frozen.
    ///
    /// Out-of-vocabulary tokens are ignored; a document with no known
    /// token gets the uniform mixture (flagged by `in_vocab_tokens == 0`).
    pub fn infer_theta(&self, doc: &Document, seed: u64) -> ThetaEstimate {
        let k = self.params.topics;
        let ids: Vec<usize> =
            doc.tokens().iter().filter_map(|t| self.vocab_index.get(t).copied()).collect();
        if ids.is_empty() {
            return ThetaEstimate { theta: vec![1.0 / k as f64; k], in_vocab_tokens: 0 };
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut n_t = vec![0u32; k];
        let mut z: Vec<usize> = ids
            .iter()
            .map(|_| {
                let t = rng.random_range(0..k);
                n_t[t] += 1;
                t
            })
            .collect();

        let mut weights = vec![0.0f64; k];
        for _ in 0..INFERENCE_SWEEPS {
            for (pos, &w) in ids.iter().enumerate() {
                let old = z[pos];
                n_t[old] -= 1;
                let mut total = 0.0;
                for t in 0..k {
                    let p = (n_t[t] as f64 + self.params.alpha) * self.phi[t][w];
                    total += p;
                    weights[t] = total;
                }
                let r = rng.random::<f64>() * total;
                let new = weights.iter().position(|&cum| r < cum).unwrap_or(k - 1);
                z[pos] = new;
                n_t[new] += 1;
            }
        }

        let n = ids.len() as f64;
        let denom = n + k as f64 * self.params.alpha;
        let theta = n_t.iter().map(|&c| (c as f64 + self.params.alpha) / denom).collect();
        ThetaEstimate { theta, in_vocab_tokens: ids.len() }
    }
}

/// A user's topic mixture in one event, with the derived participation set.
#[derive(Clone, Debug, PartialEq)]
pub struct TopicMembership {
    pub user: UserId,
    pub theta: Vec<f64>,
    /// Topics (1-based) where the mixture strictly exceeds uniform (1/K).
    pub participates: BTreeSet<usize>,
}

/// Applies the participation rule: user belongs to topic k iff
/// theta[k] > 1/K, strictly — sitting exactly at uniform is no signal.
pub fn membership_from_theta(user: impl Into<UserId>, theta: Vec<f64>) -> TopicMembership {
    let uniform = 1.0 / theta.len() as f64;
    let participates = theta
        .iter()
        .enumerate()
        .filter(|&(_, &p)| p > uniform)
        .map(|(i, _)| i + 1)
        .collect();
    TopicMembership { user: user.into(), theta, participates }
}

/// All users participating in `topic` (1-based), sorted.
pub fn topic_participants<'a>(
    memberships: impl IntoIterator<Item = &'a TopicMembership>,
    topic: usize,
) -> BTreeSet<UserId> {
    memberships
        .into_iter()
        .filter(|m| m.participates.contains(&topic))
        .map(|m| m.user.clone())
        .collect()
}

/// Builds the topic-scope document of one participating user: the tweets
/// whose dominant inferred topic is `topic`.
///
/// Tweets are routed by running inference on each tweet alone (stopwords
/// removed, ties to the smallest topic). A participant whose tweets all
/// land elsewhere still owns a document — the full event document — since
/// membership came from the aggregate mixture; the `bool` reports that
/// fallback. Raw (unfiltered) tokens populate the result either way, so
/// downstream models see natural text.
pub fn build_topic_document(
    model: &TopicModel,
    corpus: &EventCorpus,
    membership: &TopicMembership,
    topic: usize,
    stopwords: &BTreeSet<Token>,
    seed: u64,
) -> Result<(Document, bool)> {
    let user = membership.user.as_str();
    if !membership.participates.contains(&topic) {
        return Err(Error::NotAParticipant { user: user.to_string(), topic });
    }

    let mut seen = HashSet::new();
    let mut segments: Vec<Vec<Token>> = Vec::new();
    for tweet in corpus.tweets_of(user) {
        if !seen.insert(tweet.tweet_id.clone()) {
            continue;
        }
        let raw = tokenize(&tweet.text);
        let filtered: Vec<Token> =
            raw.iter().filter(|t| !stopwords.contains(*t)).cloned().collect();
        if filtered.is_empty() {
            continue;
        }
        let mini = Document::from_segments(user, Scope::Topic(topic), vec![filtered]);
        let est = mini_theta(model, &mini, seed, &tweet.tweet_id);
        if est.in_vocab_tokens == 0 {
            continue;
        }
        let dominant = est
            .theta
            .iter()
            .enumerate()
            .max_by(|(ia, pa), (ib, pb)| {
                pa.partial_cmp(pb).expect("theta is finite").then(ib.cmp(ia))
            })
            .map(|(i, _)| i + 1)
            .expect("theta is nonempty");
        if dominant == topic {
            segments.push(raw);
        }
    }

    if segments.is_empty() {
        let fallback = user_event_document(corpus, user)?.with_scope(Scope::Topic(topic));
        Ok((fallback, true))
    } else {
        Ok((Document::from_segments(user, Scope::Topic(topic), segments), false))
    }
}

fn mini_theta(model: &TopicModel, doc: &Document, seed: u64, tweet_id: &str) -> ThetaEstimate {
    model.infer_theta(doc, derive_seed(seed, &["tweet", tweet_id]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TweetRecord;
    use approx::assert_abs_diff_eq;

    const ROCK: [&str; 4] = ["guitar", "amp", "riff", "drums"];
    const BOND: [&str; 4] = ["yield", "rates", "bond", "market"];

    fn word_doc(owner: &str, words: &[&str], repeats: usize) -> Document {
        let tokens: Vec<Token> = words
            .iter()
            .cycle()
            .take(words.len() * repeats)
            .map(|t| t.to_string())
            .collect();
        Document::from_segments(owner, Scope::Event, vec![tokens])
    }

    fn two_pool_corpus() -> Vec<Document> {
        let mut docs = Vec::new();
        for i in 0..6 {
            docs.push(word_doc(&format!("r{i}"), &ROCK, 5));
            docs.push(word_doc(&format!("b{i}"), &BOND, 5));
        }
        docs
    }

    fn quick_params() -> LdaParams {
        LdaParams { topics: 2, alpha: 0.5, beta: 0.01, iterations: 200 }
    }

    #[test]
    fn fit_recovers_disjoint_word_pools() {
        let model = fit_lda(&two_pool_corpus(), &quick_params(), 11).unwrap();
        let tops1: BTreeSet<Token> = model.top_words(1, 4).into_iter().map(|(t, _)| t).collect();
        let tops2: BTreeSet<Token> = model.top_words(2, 4).into_iter().map(|(t, _)| t).collect();
        let rock: BTreeSet<Token> = ROCK.iter().map(|t| t.to_string()).collect();
        let bond: BTreeSet<Token> = BOND.iter().map(|t| t.to_string()).collect();
        // Label order is arbitrary; the pools must come out, one per topic.
        assert!(
            (tops1 == rock && tops2 == bond) || (tops1 == bond && tops2 == rock),
            "topics did not align with pools: {tops1:?} vs {tops2:?}"
        );

        // A held-out rock document loads onto a single topic.
        let est = model.infer_theta(&word_doc("probe", &ROCK, 5), 3);
        assert_eq!(est.in_vocab_tokens, 20);
        assert!(est.theta.iter().cloned().fold(f64::MIN, f64::max) > 0.9);
        assert_abs_diff_eq!(est.theta.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn fitting_and_inference_are_seed_deterministic() {
        let docs = two_pool_corpus();
        let m1 = fit_lda(&docs, &quick_params(), 7).unwrap();
        let m2 = fit_lda(&docs, &quick_params(), 7).unwrap();
        assert_eq!(m1.phi(), m2.phi());
        let probe = word_doc("p", &["guitar", "yield"], 3);
        assert_eq!(m1.infer_theta(&probe, 5), m2.infer_theta(&probe, 5));
    }

    #[test]
    fn degenerate_training_inputs_error() {
        let params = quick_params();
        assert!(matches!(
            fit_lda(&[], &params, 1),
            Err(Error::NoTrainableDocuments(0))
        ));
        let empty = Document::from_segments("e", Scope::Event, vec![]);
        assert!(fit_lda(&[empty], &params, 1).is_err());
        let tiny = word_doc("t", &["sole"], 3);
        let err = fit_lda(&[tiny], &params, 1).unwrap_err();
        assert!(err.to_string().starts_with("insufficient vocabulary"));
    }

    #[test]
    fn unknown_words_fall_back_to_uniform() {
        let model = fit_lda(&two_pool_corpus(), &quick_params(), 11).unwrap();
        let est = model.infer_theta(&word_doc("x", &["zzz", "qqq"], 1), 9);
        assert_eq!(est.in_vocab_tokens, 0);
        assert_eq!(est.theta, vec![0.5, 0.5]);
    }

    #[test]
    fn membership_requires_strictly_above_uniform() {
        let third = 1.0 / 3.0;
        let at_uniform = membership_from_theta("u", vec![third, third, third]);
        assert!(at_uniform.participates.is_empty());

        let mixed = membership_from_theta("u", vec![0.4, 0.35, 0.25]);
        assert_eq!(mixed.participates, BTreeSet::from([1, 2]));

        let members = [
            membership_from_theta("a", vec![0.8, 0.1, 0.1]),
            membership_from_theta("b", vec![0.1, 0.8, 0.1]),
            membership_from_theta("c", vec![0.45, 0.45, 0.1]),
        ];
        let ones = topic_participants(&members, 1);
        assert_eq!(ones, BTreeSet::from(["a".to_string(), "c".to_string()]));
    }

    fn planted_model() -> TopicModel {
        // Three near-deterministic topics over six words.
        let vocab: Vec<Token> =
            ["a1", "a2", "b1", "b2", "c1", "c2"].iter().map(|t| t.to_string()).collect();
        let row = |hot: [usize; 2]| {
            let mut r = vec![0.002; 6];
            for h in hot {
                r[h] = 0.496;
            }
            r
        };
        TopicModel::from_phi(
            LdaParams { topics: 3, alpha: 0.1, beta: 0.01, iterations: 1 },
            vocab,
            vec![row([0, 1]), row([2, 3]), row([4, 5])],
        )
        .unwrap()
    }

    fn tweet(id: &str, user: &str, text: &str) -> TweetRecord {
        TweetRecord {
            tweet_id: id.to_string(),
            user_id: user.to_string(),
            hashtags: BTreeSet::from(["e".to_string()]),
            text: text.to_string(),
        }
    }

    #[test]
    fn topic_documents_route_tweets_by_dominant_topic() {
        let model = planted_model();
        let corpus = EventCorpus::new(
            "e",
            vec![
                tweet("t1", "u", "a1 a2 a1 a2"),
                tweet("t2", "u", "b1 b2 b1 b2"),
                tweet("t3", "u", "a1 a1 a2"),
            ],
        );
        let membership = membership_from_theta("u", vec![0.5, 0.4, 0.1]);
        let stop = BTreeSet::new();
        let (doc1, fell_back) =
            build_topic_document(&model, &corpus, &membership, 1, &stop, 99).unwrap();
        assert!(!fell_back);
        assert_eq!(doc1.segment_count(), 2); // t1 and t3
        assert_eq!(doc1.scope(), Scope::Topic(1));
        let (doc2, fell_back) =
            build_topic_document(&model, &corpus, &membership, 2, &stop, 99).unwrap();
        assert!(!fell_back);
        assert_eq!(doc2.segment_count(), 1); // t2

        // Not a participant of topic 3.
        assert!(matches!(
            build_topic_document(&model, &corpus, &membership, 3, &stop, 99),
            Err(Error::NotAParticipant { .. })
        ));
    }

    #[test]
    fn participants_with_no_matching_tweet_fall_back_to_event_document() {
        let model = planted_model();
        // Aggregate mixture says topic 1, but both tweets individually read
        // as topics 2 and 3.
        let corpus =
            EventCorpus::new("e", vec![tweet("t1", "u", "b1 b2 b1"), tweet("t2", "u", "c1 c2 c1")]);
        let membership = membership_from_theta("u", vec![0.4, 0.35, 0.25]);
        let (doc, fell_back) =
            build_topic_document(&model, &corpus, &membership, 1, &BTreeSet::new(), 1).unwrap();
        assert!(fell_back);
        assert_eq!(doc.segment_count(), 2);
        assert_eq!(doc.scope(), Scope::Topic(1));
    }

    #[test]
    fn from_phi_validates_shape_and_rows() {
        let params = LdaParams { topics: 2, alpha: 1.0, beta: 0.01, iterations: 1 };
        let vocab: Vec<Token> = vec!["x".into(), "y".into()];
        assert!(TopicModel::from_phi(params, vocab.clone(), vec![vec![0.5, 0.5]]).is_err());
        assert!(
            TopicModel::from_phi(params, vocab.clone(), vec![vec![0.9, 0.2], vec![0.5, 0.5]])
                .is_err()
        );
        assert!(
            TopicModel::from_phi(params, vocab, vec![vec![0.5, 0.5], vec![0.1, 0.9]]).is_ok()
        );
    }
}
