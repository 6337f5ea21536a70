//! Predicting who talks to whom from what they say.
//!
//! This crate ingests event-tagged microblog posts, fits per-user language
//! models (unigram, bigram, and an LDA topic model), links users whose
//! text is mutually predictable, and measures how well the communities of
//! that content graph line up with the follower graph via normalised
//! mutual information.
//!
//! The main entry point for batch work is [`pipeline::run`]; the building
//! blocks (tokenisation, model fitting, graph construction, Louvain
//! community detection, NMI scoring) are public so they can be driven
//! individually. A synthetic corpus generator with planted communities
//! lives in [`synth`] for benchmarking without platform data.
//!
//! All randomised stages take explicit seeds and produce identical results
//! across runs, with or without the `parallel` feature (on by default),
//! which only changes how work is scheduled.

pub mod community;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod graph;
pub mod lda;
pub mod ngram;
pub mod pipeline;
pub mod seeding;
pub mod synth;

pub use community::{brute_force_max_modularity, louvain, modularity, Partition};
pub use corpus::{
    ingest_tweets, load_social_graph, tokenize, Document, EventCorpus, IngestReport, Scope,
    SocialReport, TweetRecord, UserId,
};
pub use error::{Error, Result};
pub use eval::{goodness, nmi, GoodnessScore, NmiMode};
pub use graph::{
    build_lda_graph, build_ngram_graph, GraphKind, ModelKind, WeightedGraph,
};
pub use lda::{fit_lda, LdaParams, TopicModel};
pub use ngram::{train_ngram, NGramModel, NGramOrder};
pub use pipeline::{run, PipelineConfig, RunManifest, RunOutput};
pub use synth::{generate, SynthConfig, SynthOutput};
