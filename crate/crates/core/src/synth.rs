//! Synthetic microblog corpora with planted community structure.
//!
//! Users are split into communities; a follower edge appears with
//! probability `p_in` inside a community and `p_out` across. Tweet tokens
//! come from a shared pool with probability `1 - b` and from
//! community-specific vocabulary with probability `b`, so `b` dials the
//! word-level community signal from none (`b = 0`) to total.
//!
//! With `topics_per_event > 0` the community vocabulary gains nested
//! structure: a per-community base pool plus per-subtopic pools. Each user
//! gets a primary subtopic inside their community and a secondary interest
//! anywhere, giving topics that cut across communities — the setup for
//! comparing event-level against topic-level detection.

use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::error::{Error, Result};
use crate::seeding::rng_for;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_communities: usize,
    /// Follower-edge probability within a community.
    pub p_in: f64,
    /// Follower-edge probability across communities.
    pub p_out: f64,
    pub vocab_size: usize,
    /// Probability a token is drawn from community-specific vocabulary
    /// instead of the shared pool.
    pub community_vocab_bias: f64,
    /// Subtopics per event, distributed over communities; 0 disables
    /// subtopic structure.
    pub topics_per_event: usize,
    /// Inclusive range of tweets per user per event.
    pub tweets_per_user: (usize, usize),
    /// Inclusive range of tokens per tweet.
    pub tweet_len: (usize, usize),
    /// Fraction of the vocabulary reserved for the shared pool.
    pub shared_vocab_frac: f64,
    /// With subtopics: chance a tweet goes to the user's secondary
    /// interest (which may sit in another community).
    pub cross_interest_rate: f64,
    /// With subtopics: share of community-vocabulary draws that use the
    /// community base pool rather than the tweet's subtopic pool.
    pub base_vocab_share: f64,
    pub n_events: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 100,
            n_communities: 4,
            p_in: 0.3,
            p_out: 0.02,
            vocab_size: 400,
            community_vocab_bias: 0.8,
            topics_per_event: 0,
            tweets_per_user: (3, 8),
            tweet_len: (6, 12),
            shared_vocab_frac: 0.4,
            cross_interest_rate: 0.35,
            base_vocab_share: 0.5,
            n_events: 1,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_users < 2 {
            return bad(format!("need at least 2 users, got {}", self.n_users));
        }
        if self.n_communities == 0 || self.n_communities > self.n_users {
            return bad(format!(
                "community count {} out of range for {} users",
                self.n_communities, self.n_users
            ));
        }
        for (name, p) in [
            ("p_in", self.p_in),
            ("p_out", self.p_out),
            ("community_vocab_bias", self.community_vocab_bias),
            ("shared_vocab_frac", self.shared_vocab_frac),
            ("cross_interest_rate", self.cross_interest_rate),
            ("base_vocab_share", self.base_vocab_share),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        let (t_lo, t_hi) = self.tweets_per_user;
        let (l_lo, l_hi) = self.tweet_len;
        if t_lo < 1 || t_hi < t_lo || l_lo < 1 || l_hi < l_lo {
            return bad("tweet count/length ranges must be nonempty and start at 1".into());
        }
        if self.topics_per_event != 0 && self.topics_per_event < self.n_communities {
            return bad(format!(
                "{} subtopics cannot cover {} communities",
                self.topics_per_event, self.n_communities
            ));
        }
        if self.n_events == 0 {
            return bad("need at least one event".into());
        }
        Ok(())
    }
}

/// How the vocabulary ids were carved into pools (as id ranges).
#[derive(Clone, Debug)]
pub struct PoolLayout {
    pub shared: Range<usize>,
    /// The whole community slice, one per community.
    pub community: Vec<Range<usize>>,
    /// Community base pools (empty unless subtopics are enabled).
    pub base: Vec<Range<usize>>,
    /// Subtopic pools per community (empty unless subtopics are enabled).
    pub subtopics: Vec<Vec<Range<usize>>>,
}

impl PoolLayout {
    /// Global subtopic list as (community, pool) pairs, in id order.
    pub fn all_subtopics(&self) -> Vec<(usize, Range<usize>)> {
        self.subtopics
            .iter()
            .enumerate()
            .flat_map(|(c, pools)| pools.iter().map(move |p| (c, p.clone())))
            .collect()
    }
}

/// Splits `0..len` into `parts` contiguous chunks, sizes differing by at
/// most one, earlier chunks larger.
fn chunk(offset: usize, len: usize, parts: usize) -> Vec<Range<usize>> {
    let size = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = offset;
    for i in 0..parts {
        let this = size + usize::from(i < extra);
        out.push(start..start + this);
        start += this;
    }
    out
}

fn split_vocab(cfg: &SynthConfig) -> Result<PoolLayout> {
    let v = cfg.vocab_size;
    let shared_n = (v as f64 * cfg.shared_vocab_frac).round() as usize;
    let shared_n = shared_n.min(v);
    if cfg.community_vocab_bias < 1.0 && shared_n == 0 {
        return Err(Error::VocabTooSmall(format!(
            "no shared words: vocab {v} at shared fraction {}",
            cfg.shared_vocab_frac
        )));
    }
    let rest = v - shared_n;
    let needs_community = cfg.community_vocab_bias > 0.0;
    if needs_community && rest < cfg.n_communities {
        return Err(Error::VocabTooSmall(format!(
            "{rest} community words cannot cover {} communities",
            cfg.n_communities
        )));
    }

    let community = if rest >= cfg.n_communities {
        chunk(shared_n, rest, cfg.n_communities)
    } else {
        vec![shared_n..shared_n; cfg.n_communities] // unused: bias is 0
    };

    let mut base = Vec::new();
    let mut subtopics = Vec::new();
    if cfg.topics_per_event > 0 && needs_community {
        let per_comm = chunk(0, cfg.topics_per_event, cfg.n_communities);
        for (c, slice) in community.iter().enumerate() {
            let s = per_comm[c].len();
            if slice.len() < s + 1 {
                return Err(Error::VocabTooSmall(format!(
                    "community {c} slice of {} words cannot fit a base pool plus {s} subtopics",
                    slice.len()
                )));
            }
            let mut parts = chunk(slice.start, slice.len(), s + 1);
            base.push(parts.remove(0));
            subtopics.push(parts);
        }
    }

    Ok(PoolLayout { shared: 0..shared_n, community, base, subtopics })
}

/// A generated dataset, ready to write or to feed straight into ingest.
#[derive(Clone, Debug)]
pub struct SynthOutput {
    /// `tweet_id \t user_id \t hashtag \t text` lines.
    pub tweets_tsv: String,
    /// `user \t user` follower pairs.
    pub edges_tsv: String,
    /// The planted community assignment (ground truth).
    pub planted: Partition,
    pub events: Vec<String>,
    pub layout: PoolLayout,
}

pub struct SynthPaths {
    pub tweets: PathBuf,
    pub edges: PathBuf,
    pub planted: PathBuf,
}

impl SynthOutput {
    /// Writes `tweets.tsv`, `social.tsv`, and `planted.tsv` under `dir`.
    pub fn write_to_dir(&self, dir: impl AsRef<Path>) -> Result<SynthPaths> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let paths = SynthPaths {
            tweets: dir.join("tweets.tsv"),
            edges: dir.join("social.tsv"),
            planted: dir.join("planted.tsv"),
        };
        std::fs::write(&paths.tweets, &self.tweets_tsv)?;
        std::fs::write(&paths.edges, &self.edges_tsv)?;
        std::fs::write(&paths.planted, self.planted.dump_to_string())?;
        Ok(paths)
    }
}

fn word(idx: usize, width: usize) -> String {
    format!("w{idx:0width$}")
}

/// Generates a corpus, follower graph, and planted partition from `cfg`.
/// Byte-identical output for identical configs.
pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput> {
    cfg.validate()?;
    let layout = split_vocab(cfg)?;
    let word_width = cfg.vocab_size.saturating_sub(1).to_string().len();
    let user_width = cfg.n_users.saturating_sub(1).to_string().len().max(3);

    let users: Vec<String> =
        (0..cfg.n_users).map(|i| format!("u{i:0w$}", w = user_width)).collect();
    // Contiguous, near-equal community blocks.
    let community_of: Vec<usize> = chunk(0, cfg.n_users, cfg.n_communities)
        .into_iter()
        .enumerate()
        .flat_map(|(c, range)| range.map(move |_| c))
        .collect();
    let planted = Partition::new(
        users.iter().cloned().zip(community_of.iter().copied()).collect::<BTreeMap<_, _>>(),
    );

    // Follower edges.
    let mut edges_tsv = String::new();
    {
        let mut rng = rng_for(cfg.seed, &["social"]);
        for i in 0..cfg.n_users {
            for j in i + 1..cfg.n_users {
                let p = if community_of[i] == community_of[j] { cfg.p_in } else { cfg.p_out };
                if rng.random::<f64>() < p {
                    edges_tsv.push_str(&format!("{}\t{}\n", users[i], users[j]));
                }
            }
        }
    }

    let all_subtopics = layout.all_subtopics();
    let subtopic_ids_of: Vec<Vec<usize>> = (0..cfg.n_communities)
        .map(|c| {
            all_subtopics
                .iter()
                .enumerate()
                .filter(|(_, (sc, _))| *sc == c)
                .map(|(i, _)| i)
                .collect()
        })
        .collect();
    let subtopics_enabled = !all_subtopics.is_empty();

    let mut tweets_tsv = String::new();
    let events: Vec<String> = (0..cfg.n_events).map(|e| format!("event{e:02}")).collect();
    for (e, event_id) in events.iter().enumerate() {
        // Per-event interests: a primary subtopic in the user's own
        // community and a distinct secondary anywhere.
        let interests: Vec<(usize, usize)> = if subtopics_enabled {
            let mut rng = rng_for(cfg.seed, &["interests", event_id]);
            (0..cfg.n_users)
                .map(|u| {
                    let own = &subtopic_ids_of[community_of[u]];
                    let primary = own[rng.random_range(0..own.len())];
                    let secondary = if all_subtopics.len() > 1 {
                        let pick = rng.random_range(0..all_subtopics.len() - 1);
                        if pick >= primary {
                            pick + 1
                        } else {
                            pick
                        }
                    } else {
                        primary
                    };
                    (primary, secondary)
                })
                .collect()
        } else {
            Vec::new()
        };

        for (u, user) in users.iter().enumerate() {
            let c = community_of[u];
            let mut rng = rng_for(cfg.seed, &["tweets", event_id, user]);
            let n_tweets = rng.random_range(cfg.tweets_per_user.0..=cfg.tweets_per_user.1);
            for t in 0..n_tweets {
                let len = rng.random_range(cfg.tweet_len.0..=cfg.tweet_len.1);
                let tweet_subtopic = if subtopics_enabled {
                    let (primary, secondary) = interests[u];
                    if rng.random::<f64>() < cfg.cross_interest_rate {
                        secondary
                    } else {
                        primary
                    }
                } else {
                    0
                };
                let mut text = String::new();
                for pos in 0..len {
                    let pool = if rng.random::<f64>() < cfg.community_vocab_bias {
                        if subtopics_enabled {
                            if rng.random::<f64>() < cfg.base_vocab_share {
                                layout.base[c].clone()
                            } else {
                                all_subtopics[tweet_subtopic].1.clone()
                            }
                        } else {
                            layout.community[c].clone()
                        }
                    } else {
                        layout.shared.clone()
                    };
                    let idx = rng.random_range(pool.start..pool.end);
                    if pos > 0 {
                        text.push(' ');
                    }
                    text.push_str(&word(idx, word_width));
                }
                tweets_tsv.push_str(&format!(
                    "t{e:02}.{user}.{t:02}\t{user}\t{event_id}\t{text}\n"
                ));
            }
        }
    }

    Ok(SynthOutput { tweets_tsv, edges_tsv, planted, events, layout })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_tweets, load_social_graph};

    #[test]
    fn generation_is_deterministic() {
        let cfg = SynthConfig { n_users: 20, seed: 9, ..SynthConfig::default() };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a.tweets_tsv, b.tweets_tsv);
        assert_eq!(a.edges_tsv, b.edges_tsv);
        assert_eq!(a.planted, b.planted);
    }

    #[test]
    fn output_ingests_cleanly() {
        let cfg = SynthConfig { n_users: 30, n_events: 2, seed: 4, ..SynthConfig::default() };
        let out = generate(&cfg).unwrap();
        let (events, report) = ingest_tweets(out.tweets_tsv.as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(report.malformed_lines, 0);
        assert_eq!(report.duplicate_records, 0);
        assert_eq!(report.records_without_hashtags, 0);
        for event in &events {
            assert_eq!(event.users().len(), 30, "every user tweets in every event");
        }
        let members = events[0].users().clone();
        let (_, social_report) = load_social_graph(out.edges_tsv.as_bytes(), &members).unwrap();
        assert_eq!(social_report.malformed_lines, 0);
        assert_eq!(social_report.unknown_endpoints, 0);
        assert_eq!(out.planted.node_set(), members);
    }

    #[test]
    fn bias_zero_draws_only_shared_words() {
        let cfg = SynthConfig {
            n_users: 10,
            community_vocab_bias: 0.0,
            vocab_size: 100,
            seed: 2,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let shared_max = out.layout.shared.end;
        let (events, _) = ingest_tweets(out.tweets_tsv.as_bytes()).unwrap();
        for tweet in events[0].tweets() {
            for token in crate::corpus::tokenize(&tweet.text) {
                let idx: usize = token.trim_start_matches('w').parse().unwrap();
                assert!(idx < shared_max, "token {token} is outside the shared pool");
            }
        }
    }

    #[test]
    fn planted_blocks_shape_the_follower_graph() {
        let cfg = SynthConfig {
            n_users: 60,
            n_communities: 3,
            p_in: 0.5,
            p_out: 0.02,
            seed: 1,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        let mut within = 0usize;
        let mut across = 0usize;
        for line in out.edges_tsv.lines() {
            let (a, b) = line.split_once('\t').unwrap();
            if out.planted.of(a) == out.planted.of(b) {
                within += 1;
            } else {
                across += 1;
            }
        }
        // 570 within-pairs at 0.5 vs 1200 cross-pairs at 0.02: the split
        // must be lopsided for any reasonable seed.
        assert!(within > 200, "only {within} within-community edges");
        assert!(across < 60, "{across} cross-community edges");
    }

    #[test]
    fn subtopic_layout_nests_inside_communities() {
        let cfg = SynthConfig {
            n_users: 40,
            topics_per_event: 8,
            vocab_size: 400,
            seed: 3,
            ..SynthConfig::default()
        };
        let out = generate(&cfg).unwrap();
        assert_eq!(out.layout.subtopics.iter().map(Vec::len).sum::<usize>(), 8);
        for (c, pools) in out.layout.subtopics.iter().enumerate() {
            let slice = &out.layout.community[c];
            assert!(out.layout.base[c].start >= slice.start);
            for pool in pools {
                assert!(pool.start >= slice.start && pool.end <= slice.end);
                assert!(!pool.is_empty());
            }
        }
    }

    #[test]
    fn infeasible_vocab_splits_are_rejected() {
        let err = generate(&SynthConfig {
            vocab_size: 5,
            n_communities: 4,
            ..SynthConfig::default()
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("vocab too small to split"));

        // rest = 12 words -> community slices of 3; 16 subtopics over 4
        // communities demand base + 4 pools = 5 nonempty parts per slice.
        let err = generate(&SynthConfig {
            vocab_size: 20,
            n_communities: 4,
            topics_per_event: 16,
            ..SynthConfig::default()
        })
        .unwrap_err();
        assert!(err.to_string().starts_with("vocab too small to split"));

        assert!(generate(&SynthConfig { topics_per_event: 2, ..SynthConfig::default() }).is_err());
    }
}
