use thiserror::Error;

/// Errors produced by the corpus, modelling, graph, and evaluation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// Ingest finished without producing a single usable event.
    #[error("no events: input contained no records with at least one hashtag")]
    NoEvents,

    /// A document was requested for a user that never tweeted in the event.
    #[error("unknown participant: user `{user}` has no tweets in event `{event}`")]
    UnknownParticipant { user: String, event: String },

    /// An event document was requested for an event with no participants.
    #[error("empty event `{0}`")]
    EmptyEvent(String),

    /// A language model was requested for a document with no tokens.
    #[error("untrainable: document `{0}` has no tokens")]
    Untrainable(String),

    /// Cross-entropy over an empty token stream is undefined.
    #[error("empty document: cannot score a document with no tokens")]
    EmptyDocument,

    /// KL divergence requires Q > 0 wherever P > 0.
    #[error("absolute continuity violated: P has mass at index {index} where Q is zero")]
    AbsoluteContinuity { index: usize },

    /// A vector passed as a probability distribution does not sum to one.
    #[error("not a distribution: entries sum to {0}, expected 1")]
    NotADistribution(f64),

    /// Topic model fitting needs more distinct tokens than topics.
    #[error("insufficient vocabulary: {vocab} distinct tokens for {topics} topics")]
    InsufficientVocabulary { vocab: usize, topics: usize },

    /// Topic model fitting needs at least one nonempty document.
    #[error("no trainable documents: all {0} documents are empty after filtering")]
    NoTrainableDocuments(usize),

    /// Two topic mixtures being combined disagree on the topic count.
    #[error("mismatched topic counts: {left} vs {right}")]
    MismatchedTopics { left: usize, right: usize },

    /// Paired vectors (distributions, assignments) differ in length.
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    /// A topic document was requested for a user outside the topic's participant set.
    #[error("not a participant: user `{user}` does not pass the membership rule for topic {topic}")]
    NotAParticipant { user: String, topic: usize },

    /// Edge-retention thresholds live in (0, 100].
    #[error("invalid threshold: {0} is outside (0, 100]")]
    BadThreshold(f64),

    /// Modularity is undefined on a graph with zero total edge weight.
    #[error("undefined modularity: graph has no positive edge weight")]
    UndefinedModularity,

    /// The exhaustive partition search is capped to keep runtime sane.
    #[error("oracle limit: {nodes} nodes exceeds the brute-force cap of {cap}")]
    OracleLimit { nodes: usize, cap: usize },

    /// Mutual information requires both partitions to cover the same node set.
    #[error("unaligned partitions: node sets differ")]
    UnalignedPartitions,

    /// The requested normalisation divides by a zero entropy.
    #[error("degenerate partition: normalising entropy is zero")]
    DegeneratePartition,

    /// A configuration value is out of range or inconsistent.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    /// The synthetic generator cannot satisfy the requested shape.
    #[error("vocab too small to split: {0}")]
    VocabTooSmall(String),

    /// A line in an on-disk artefact could not be parsed back.
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
