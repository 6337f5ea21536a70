//! Tweet ingestion and document assembly.
//!
//! Events are identified by hashtag. Every downstream object — language
//! models, topic mixtures, content graphs — is built from [`Document`]s
//! assembled here, so tokenisation and deduplication decisions are made
//! exactly once.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::collections::HashSet;
use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{GraphKind, WeightedGraph};

pub type UserId = String;
pub type Token = String;

/// Placeholder token for anything that looks like a link.
pub const URL_TOKEN: &str = "<url>";
/// Placeholder token for @-mentions.
pub const MENTION_TOKEN: &str = "<mention>";

/// Which slice of an event a document (or graph) covers.
///
/// Topic indices are 1-based so they read naturally in output files
/// (`topic1`..`topicK`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Event,
    Topic(usize),
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Event => write!(f, "event"),
            Scope::Topic(k) => write!(f, "topic{k}"),
        }
    }
}

impl FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "event" {
            return Ok(Scope::Event);
        }
        if let Some(rest) = s.strip_prefix("topic") {
            if let Ok(k) = rest.parse::<usize>() {
                return Ok(Scope::Topic(k));
            }
        }
        Err(Error::InvalidConfig(format!("unrecognised scope `{s}`")))
    }
}

impl Serialize for Scope {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scope {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One parsed tweet. `hashtags` are lowercased and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TweetRecord {
    pub tweet_id: String,
    pub user_id: UserId,
    pub hashtags: BTreeSet<String>,
    pub text: String,
}

/// All tweets of one event (hashtag), in input order, deduplicated by
/// tweet id.
#[derive(Clone, Debug)]
pub struct EventCorpus {
    pub event_id: String,
    tweets: Vec<TweetRecord>,
    users: BTreeSet<UserId>,
}

impl EventCorpus {
    pub fn new(event_id: impl Into<String>, tweets: Vec<TweetRecord>) -> Self {
        let mut seen = HashSet::new();
        let tweets: Vec<TweetRecord> = tweets
            .into_iter()
            .filter(|t| seen.insert(t.tweet_id.clone()))
            .collect();
        let users = tweets.iter().map(|t| t.user_id.clone()).collect();
        EventCorpus { event_id: event_id.into(), tweets, users }
    }

    pub fn tweets(&self) -> &[TweetRecord] {
        &self.tweets
    }

    /// Participants: every user with at least one tweet in the event.
    pub fn users(&self) -> &BTreeSet<UserId> {
        &self.users
    }

    pub fn tweets_of<'a>(&'a self, user: &'a str) -> impl Iterator<Item = &'a TweetRecord> {
        self.tweets.iter().filter(move |t| t.user_id == user)
    }
}

/// A tokenised document: a flat token stream plus the tweet boundaries
/// inside it. Boundaries matter because bigram contexts never span tweets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    owner: String,
    scope: Scope,
    tokens: Vec<Token>,
    /// Start offset of each (nonempty) tweet segment within `tokens`.
    segment_starts: Vec<usize>,
    counts: BTreeMap<Token, u64>,
}

impl Document {
    /// Builds a document from per-tweet token vectors. Empty tweets are
    /// dropped; they carry no content and would create zero-length segments.
    pub fn from_segments(owner: impl Into<String>, scope: Scope, segments: Vec<Vec<Token>>) -> Self {
        let mut tokens = Vec::new();
        let mut segment_starts = Vec::new();
        let mut counts: BTreeMap<Token, u64> = BTreeMap::new();
        for segment in segments {
            if segment.is_empty() {
                continue;
            }
            segment_starts.push(tokens.len());
            for token in segment {
                *counts.entry(token.clone()).or_insert(0) += 1;
                tokens.push(token);
            }
        }
        Document { owner: owner.into(), scope, tokens, segment_starts, counts }
    }

    pub fn owner(&self) -> &str {
        &self.owner
    }

    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn total_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn distinct_tokens(&self) -> usize {
        self.counts.len()
    }

    /// Token multiplicities, ordered by token.
    pub fn counts(&self) -> &BTreeMap<Token, u64> {
        &self.counts
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn segment_count(&self) -> usize {
        self.segment_starts.len()
    }

    /// Iterates tweet segments as token slices.
    pub fn segments(&self) -> impl Iterator<Item = &[Token]> {
        let ends = self
            .segment_starts
            .iter()
            .skip(1)
            .copied()
            .chain(std::iter::once(self.tokens.len()));
        self.segment_starts
            .iter()
            .zip(ends)
            .map(move |(&start, end)| &self.tokens[start..end])
    }

    /// The same document with the given tokens removed. Segments that
    /// become empty are dropped.
    pub fn without_tokens(&self, remove: &BTreeSet<Token>) -> Document {
        let segments = self
            .segments()
            .map(|seg| seg.iter().filter(|t| !remove.contains(*t)).cloned().collect())
            .collect();
        Document::from_segments(self.owner.clone(), self.scope, segments)
    }

    /// The same document relabelled with a different scope.
    pub fn with_scope(mut self, scope: Scope) -> Document {
        self.scope = scope;
        self
    }
}

/// Lowercases and splits tweet text into tokens.
///
/// URLs collapse to [`URL_TOKEN`], @-mentions to [`MENTION_TOKEN`]; a
/// leading `#` is stripped so hashtags count as ordinary words; everything
/// else splits on non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    for raw in text.split_whitespace() {
        let word = raw.to_lowercase();
        if word.starts_with("http://") || word.starts_with("https://") || word.starts_with("www.") {
            tokens.push(URL_TOKEN.to_string());
            continue;
        }
        if let Some(rest) = word.strip_prefix('@') {
            if rest.chars().next().is_some_and(|c| c.is_alphanumeric() || c == '_') {
                tokens.push(MENTION_TOKEN.to_string());
                continue;
            }
        }
        let body = word.strip_prefix('#').unwrap_or(&word);
        for piece in body.split(|c: char| !c.is_alphanumeric()) {
            if !piece.is_empty() {
                tokens.push(piece.to_string());
            }
        }
    }
    tokens
}

/// Ingest accounting, serialised to the diagnostics stream.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct IngestReport {
    pub lines_read: usize,
    pub blank_lines: usize,
    pub malformed_lines: usize,
    pub parsed_records: usize,
    pub records_without_hashtags: usize,
    /// Records dropped because an event already held the same tweet id.
    pub duplicate_records: usize,
    pub events: BTreeMap<String, EventIngest>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EventIngest {
    pub tweets: usize,
    pub users: usize,
}

/// Parses tab-separated tweet records and groups them into events.
///
/// Line format: `tweet_id \t user_id \t comma,separated,hashtags \t text`.
/// Malformed lines are counted and skipped, never fatal. Returns events
/// sorted by event id; errors only if no event emerges at all.
pub fn ingest_tweets<R: BufRead>(reader: R) -> Result<(Vec<EventCorpus>, IngestReport)> {
    let mut report = IngestReport::default();
    let mut grouped: BTreeMap<String, Vec<TweetRecord>> = BTreeMap::new();
    let mut seen: BTreeMap<String, HashSet<String>> = BTreeMap::new();

    for line in reader.lines() {
        let line = line?;
        report.lines_read += 1;
        if line.trim().is_empty() {
            report.blank_lines += 1;
            continue;
        }
        let mut fields = line.splitn(4, '\t');
        let (tweet_id, user_id, hashtags, text) =
            match (fields.next(), fields.next(), fields.next(), fields.next()) {
                (Some(a), Some(b), Some(c), Some(d)) => (a.trim(), b.trim(), c, d),
                _ => {
                    report.malformed_lines += 1;
                    continue;
                }
            };
        if tweet_id.is_empty() || user_id.is_empty() {
            report.malformed_lines += 1;
            continue;
        }
        report.parsed_records += 1;

        let tags: BTreeSet<String> = hashtags
            .split(',')
            .map(|t| t.trim().trim_start_matches('#').to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if tags.is_empty() {
            report.records_without_hashtags += 1;
            continue;
        }

        for tag in tags {
            let dedup = seen.entry(tag.clone()).or_default();
            if !dedup.insert(tweet_id.to_string()) {
                report.duplicate_records += 1;
                continue;
            }
            grouped.entry(tag.clone()).or_default().push(TweetRecord {
                tweet_id: tweet_id.to_string(),
                user_id: user_id.to_string(),
                hashtags: BTreeSet::from([tag]),
                text: text.to_string(),
            });
        }
    }

    if grouped.is_empty() {
        return Err(Error::NoEvents);
    }

    let events: Vec<EventCorpus> = grouped
        .into_iter()
        .map(|(event_id, tweets)| EventCorpus::new(event_id, tweets))
        .collect();
    for event in &events {
        report.events.insert(
            event.event_id.clone(),
            EventIngest { tweets: event.tweets().len(), users: event.users().len() },
        );
    }
    Ok((events, report))
}

pub fn ingest_tweets_path(path: impl AsRef<Path>) -> Result<(Vec<EventCorpus>, IngestReport)> {
    let file = std::fs::File::open(path)?;
    ingest_tweets(std::io::BufReader::new(file))
}

/// Accounting for the followership edge list.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SocialReport {
    pub lines_read: usize,
    pub blank_lines: usize,
    pub malformed_lines: usize,
    pub self_loops: usize,
    /// Pairs dropped because an endpoint never tweeted in the corpus.
    pub unknown_endpoints: usize,
    pub duplicate_pairs: usize,
    pub edges: usize,
}

/// Loads `user \t user` pairs as an undirected simple graph over `members`.
///
/// All of `members` become nodes, so users without declared links still
/// appear (as isolates) and partitions over content and social graphs stay
/// comparable. Direction, self-loops, and repeats are discarded.
pub fn load_social_graph<R: BufRead>(
    reader: R,
    members: &BTreeSet<UserId>,
) -> Result<(WeightedGraph, SocialReport)> {
    let mut report = SocialReport::default();
    let mut graph = WeightedGraph::new(GraphKind::Social);
    for user in members {
        graph.add_node(user.clone());
    }
    for line in reader.lines() {
        let line = line?;
        report.lines_read += 1;
        if line.trim().is_empty() {
            report.blank_lines += 1;
            continue;
        }
        let mut fields = line.splitn(2, '\t');
        let (a, b) = match (fields.next(), fields.next()) {
            (Some(a), Some(b)) => (a.trim(), b.trim()),
            _ => {
                report.malformed_lines += 1;
                continue;
            }
        };
        if a.is_empty() || b.is_empty() {
            report.malformed_lines += 1;
            continue;
        }
        if a == b {
            report.self_loops += 1;
            continue;
        }
        if !members.contains(a) || !members.contains(b) {
            report.unknown_endpoints += 1;
            continue;
        }
        if graph.weight(a, b).is_some() {
            report.duplicate_pairs += 1;
            continue;
        }
        graph.add_edge(a, b, 1.0);
    }
    report.edges = graph.edge_count();
    Ok((graph, report))
}

pub fn load_social_graph_path(
    path: impl AsRef<Path>,
    members: &BTreeSet<UserId>,
) -> Result<(WeightedGraph, SocialReport)> {
    let file = std::fs::File::open(path)?;
    load_social_graph(std::io::BufReader::new(file), members)
}

/// The per-user document for one event: that user's deduplicated tweets,
/// tokenised, one segment per tweet, in input order.
pub fn user_event_document(corpus: &EventCorpus, user: &str) -> Result<Document> {
    if !corpus.users().contains(user) {
        return Err(Error::UnknownParticipant {
            user: user.to_string(),
            event: corpus.event_id.clone(),
        });
    }
    let segments = corpus.tweets_of(user).map(|t| tokenize(&t.text)).collect();
    Ok(Document::from_segments(user, Scope::Event, segments))
}

/// The whole-event document: the union of all participants' documents,
/// participants in sorted order.
pub fn event_document(corpus: &EventCorpus) -> Result<Document> {
    if corpus.users().is_empty() {
        return Err(Error::EmptyEvent(corpus.event_id.clone()));
    }
    let mut segments = Vec::new();
    for user in corpus.users() {
        segments.extend(corpus.tweets_of(user).map(|t| tokenize(&t.text)));
    }
    Ok(Document::from_segments(corpus.event_id.clone(), Scope::Event, segments))
}

/// A user's text across all events, deduplicated by tweet id.
///
/// Language models are trained on this: what a user sounds like is a
/// property of the user, not of any single event.
pub fn user_lifetime_document(events: &[EventCorpus], user: &str) -> Result<Document> {
    let mut seen = HashSet::new();
    let mut segments = Vec::new();
    let mut found = false;
    for event in events {
        if !event.users().contains(user) {
            continue;
        }
        found = true;
        for tweet in event.tweets_of(user) {
            if seen.insert(tweet.tweet_id.clone()) {
                segments.push(tokenize(&tweet.text));
            }
        }
    }
    if !found {
        return Err(Error::UnknownParticipant { user: user.to_string(), event: "*".to_string() });
    }
    Ok(Document::from_segments(user, Scope::Event, segments))
}

/// A small English stopword list; applied only where a caller asks for it
/// (topic modelling). Override with [`load_stopwords`].
pub fn default_stopwords() -> BTreeSet<Token> {
    [
        "a", "about", "after", "all", "an", "and", "are", "as", "at", "be", "been", "but", "by",
        "can", "do", "for", "from", "had", "has", "have", "he", "her", "his", "i", "if", "in",
        "is", "it", "its", "just", "me", "my", "no", "not", "of", "on", "or", "our", "out", "she",
        "so", "that", "the", "their", "them", "they", "this", "to", "up", "was", "we", "were",
        "what", "when", "who", "will", "with", "you", "your",
    ]
    .into_iter()
    .map(str::to_string)
    .collect()
}

/// Reads one stopword per line; blank lines are skipped.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<Token>> {
    let text = std::fs::read_to_string(path)?;
    Ok(text
        .lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_handles_urls_mentions_and_hashtags() {
        let toks = tokenize("Great set! #Junos2013 http://t.co/abc @GretchenW www.cbc.ca");
        assert_eq!(toks, vec!["great", "set", "junos2013", "<url>", "<mention>", "<url>"]);
    }

    #[test]
    fn tokenize_splits_punctuation_and_lowercases() {
        assert_eq!(tokenize("Can't stop,won't stop"), vec!["can", "t", "stop", "won", "t", "stop"]);
        assert_eq!(tokenize("  \t "), Vec::<Token>::new());
        // A bare '@' or '#' is not a mention or hashtag.
        assert_eq!(tokenize("# @ ok"), vec!["ok"]);
    }

    fn sample_input() -> &'static str {
        "t1\tu1\tjunos\tGreat show tonight\n\
         t2\tu2\tjunos,gala\tLoved the #Junos gala\n\
         t2\tu2\tjunos\tduplicate of t2 for junos\n\
         t3\tu1\t\tno hashtags here\n\
         bad line without tabs\n\
         \n\
         t4\tu3\tgala\tGala after party\n"
    }

    #[test]
    fn ingest_groups_by_hashtag_and_dedupes() {
        let (events, report) = ingest_tweets(sample_input().as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert_eq!(events[0].event_id, "gala");
        assert_eq!(events[1].event_id, "junos");
        assert_eq!(events[1].tweets().len(), 2); // t2 duplicate dropped
        assert_eq!(events[0].tweets().len(), 2); // t2 and t4
        assert_eq!(report.lines_read, 7);
        assert_eq!(report.blank_lines, 1);
        assert_eq!(report.malformed_lines, 1);
        assert_eq!(report.parsed_records, 5);
        assert_eq!(report.records_without_hashtags, 1);
        assert_eq!(report.duplicate_records, 1);
        assert_eq!(report.events["junos"].users, 2);
    }

    #[test]
    fn ingest_with_no_usable_records_errors() {
        let err = ingest_tweets("t1\tu1\t\tno tags\n".as_bytes()).unwrap_err();
        assert!(err.to_string().starts_with("no events"));
    }

    #[test]
    fn one_tweet_joins_every_tagged_event() {
        let (events, _) = ingest_tweets("t1\tu1\ta,b\thello\n".as_bytes()).unwrap();
        assert_eq!(events.len(), 2);
        assert!(events.iter().all(|e| e.tweets().len() == 1));
    }

    #[test]
    fn documents_dedupe_and_keep_tweet_boundaries() {
        let (events, _) = ingest_tweets(sample_input().as_bytes()).unwrap();
        let junos = &events[1];
        let doc = user_event_document(junos, "u2").unwrap();
        assert_eq!(doc.segment_count(), 1);
        assert_eq!(doc.tokens(), ["loved", "the", "junos", "gala"]);
        assert_eq!(doc.counts()["junos"], 1);

        let whole = event_document(junos).unwrap();
        assert_eq!(whole.segment_count(), 2);
        assert_eq!(whole.total_tokens(), 7);

        assert!(user_event_document(junos, "u3").is_err());
    }

    #[test]
    fn lifetime_document_merges_events_without_double_counting() {
        let (events, _) = ingest_tweets(sample_input().as_bytes()).unwrap();
        // u2's t2 appears in both gala and junos; lifetime keeps it once.
        let doc = user_lifetime_document(&events, "u2").unwrap();
        assert_eq!(doc.segment_count(), 1);
        assert!(user_lifetime_document(&events, "nobody").is_err());
    }

    #[test]
    fn social_loader_filters_and_reports() {
        let members: BTreeSet<UserId> =
            ["u1", "u2", "u3"].into_iter().map(str::to_string).collect();
        let input = "u1\tu2\nu2\tu1\nu1\tu1\nu1\tu9\nu2\tu3\njunk\n";
        let (graph, report) = load_social_graph(input.as_bytes(), &members).unwrap();
        assert_eq!(graph.node_count(), 3);
        assert_eq!(graph.edge_count(), 2);
        assert_eq!(report.duplicate_pairs, 1);
        assert_eq!(report.self_loops, 1);
        assert_eq!(report.unknown_endpoints, 1);
        assert_eq!(report.malformed_lines, 1);
        assert_eq!(graph.weight("u1", "u2"), Some(1.0));
        assert_eq!(graph.weight("u2", "u1"), Some(1.0));
    }

    #[test]
    fn stopword_removal_drops_emptied_segments() {
        let doc = Document::from_segments(
            "u",
            Scope::Event,
            vec![vec!["the".into(), "show".into()], vec!["the".into()]],
        );
        let filtered = doc.without_tokens(&default_stopwords());
        assert_eq!(filtered.segment_count(), 1);
        assert_eq!(filtered.tokens(), ["show"]);
    }

    #[test]
    fn scope_round_trips_through_strings() {
        assert_eq!("event".parse::<Scope>().unwrap(), Scope::Event);
        assert_eq!("topic3".parse::<Scope>().unwrap(), Scope::Topic(3));
        assert_eq!(Scope::Topic(12).to_string(), "topic12");
        assert!("banana".parse::<Scope>().is_err());
    }
}
