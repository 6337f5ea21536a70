//! The batch pipeline: ingest (or synthesise) a corpus, build per-user
//! language models, derive content graphs per (event, scope, model),
//! detect communities at each retention threshold, and score agreement
//! with the follower graph.
//!
//! Each grid cell fails independently: a degenerate graph in one cell is
//! recorded in the manifest and the rest of the run proceeds. Everything
//! is deterministic for a fixed (inputs, config, seed), including the
//! bytes of every written artefact.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::community::{louvain, Partition};
use crate::corpus::{
    default_stopwords, ingest_tweets, load_social_graph, load_stopwords, user_event_document,
    user_lifetime_document, Document, IngestReport, Scope, SocialReport, Token, UserId,
};
use crate::error::{Error, Result};
use crate::eval::{goodness, GoodnessScore};
use crate::graph::{build_lda_graph, build_ngram_graph, ModelKind, WeightedGraph};
use crate::lda::{
    build_topic_document, fit_lda, membership_from_theta, topic_participants, LdaParams,
    TopicMembership, TopicModel,
};
use crate::ngram::{train_ngram, NGramModel, NGramOrder};
use crate::seeding::derive_seed;
use crate::synth::SynthConfig;

pub const DEFAULT_THRESHOLDS: [f64; 6] = [5.0, 10.0, 20.0, 30.0, 40.0, 50.0];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Tab-separated tweet records; unset when `synth` provides the corpus.
    pub tweets: Option<PathBuf>,
    /// Follower pairs for the same corpus.
    pub social_edges: Option<PathBuf>,
    /// Generate inputs instead of reading them.
    pub synth: Option<SynthConfig>,
    pub models: Vec<ModelKind>,
    /// Edge-retention percentages, each in (0, 100].
    pub thresholds: Vec<f64>,
    /// Topic count K for the topic model and topic scopes.
    pub topics: usize,
    /// Also score per-topic subgraphs, not just whole events.
    pub topic_scopes: bool,
    /// Document-topic prior; defaults to 50/K.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub lda_iterations: usize,
    /// Additive smoothing for the n-gram models.
    pub smoothing_delta: f64,
    /// Ignore content edge weights during detection (keep structure only).
    pub binarize_content: bool,
    /// Drop nodes left edgeless by thresholding instead of keeping them as
    /// singleton communities.
    pub drop_isolates: bool,
    /// One stopword per line; the built-in list applies when unset.
    /// Stopwords affect only the topic-model path.
    pub stopwords_file: Option<PathBuf>,
    /// Where to write artefacts; nothing is written when unset.
    pub output_dir: Option<PathBuf>,
    pub dump_graphs: bool,
    pub dump_partitions: bool,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tweets: None,
            social_edges: None,
            synth: None,
            models: ModelKind::ALL.to_vec(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            topics: 10,
            topic_scopes: true,
            lda_alpha: None,
            lda_beta: 0.01,
            lda_iterations: 1000,
            smoothing_delta: 0.01,
            binarize_content: false,
            drop_isolates: false,
            stopwords_file: None,
            output_dir: None,
            dump_graphs: false,
            dump_partitions: true,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        match (&self.synth, &self.tweets, &self.social_edges) {
            (Some(_), None, None) => {}
            (None, Some(_), Some(_)) => {}
            (Some(_), _, _) => {
                return bad("synth config and input files are mutually exclusive".into())
            }
            _ => return bad("provide either synth config or both tweets and social_edges".into()),
        }
        if self.models.is_empty() {
            return bad("no models selected".into());
        }
        if self.thresholds.is_empty() {
            return bad("no thresholds selected".into());
        }
        for &t in &self.thresholds {
            if !(t > 0.0 && t <= 100.0) {
                return Err(Error::BadThreshold(t));
            }
        }
        if !(self.smoothing_delta > 0.0) {
            return bad(format!("smoothing_delta must be > 0, got {}", self.smoothing_delta));
        }
        if self.needs_lda() {
            self.lda_params().validate()?;
        }
        Ok(())
    }

    fn needs_lda(&self) -> bool {
        self.topic_scopes || self.models.contains(&ModelKind::Lda)
    }

    fn lda_params(&self) -> LdaParams {
        LdaParams {
            topics: self.topics,
            alpha: self.lda_alpha.unwrap_or(50.0 / self.topics as f64),
            beta: self.lda_beta,
            iterations: self.lda_iterations,
        }
    }

    /// Grid order: thresholds ascending, deduplicated; model order as
    /// configured, deduplicated.
    fn normalised(&self) -> PipelineConfig {
        let mut cfg = self.clone();
        let mut seen = BTreeSet::new();
        cfg.models.retain(|m| seen.insert(*m));
        cfg.thresholds.sort_by(|a, b| a.partial_cmp(b).expect("validated finite"));
        cfg.thresholds.dedup();
        cfg
    }
}

/// A grid cell (or build stage) that failed, with the pipeline stage
/// fields it applies to. `None` means the failure covers every value of
/// that dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CellFailure {
    pub event: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scope: Option<Scope>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_pct: Option<f64>,
    pub error: String,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EventSummary {
    pub event: String,
    pub tweets: usize,
    pub users: usize,
    /// Users with at least one token in this event.
    pub documented_users: usize,
    pub lda_fitted: bool,
    /// Users whose filtered text had no in-vocabulary token: their topic
    /// mixture fell back to uniform.
    pub uniform_theta_users: usize,
    /// Topic documents that fell back to the full event document.
    pub topic_doc_fallbacks: usize,
    /// Topics (1-based) with at least two participants.
    pub active_topics: Vec<usize>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub ingest: IngestReport,
    pub social: SocialReport,
    /// Users skipped entirely: no tokens anywhere in the corpus.
    pub skipped_users: Vec<UserId>,
    pub events: Vec<EventSummary>,
    pub cells_scored: usize,
    pub failures: Vec<CellFailure>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub scores: Vec<GoodnessScore>,
    pub manifest: RunManifest,
    /// Artefacts written under `output_dir`, in write order.
    pub written: Vec<PathBuf>,
}

/// Applies `f` to every map entry, in parallel when the build allows, and
/// reassembles a `BTreeMap` so downstream iteration order is unaffected.
fn try_map_values<K, V, R, F>(map: &BTreeMap<K, V>, f: F) -> Result<BTreeMap<K, R>>
where
    K: Ord + Clone + Send + Sync,
    V: Sync,
    R: Send,
    F: Fn(&K, &V) -> Result<R> + Send + Sync,
{
    let entries: Vec<(&K, &V)> = map.iter().collect();
    #[cfg(feature = "parallel")]
    let mapped: Result<Vec<(K, R)>> =
        entries.par_iter().map(|(k, v)| Ok(((*k).clone(), f(k, v)?))).collect();
    #[cfg(not(feature = "parallel"))]
    let mapped: Result<Vec<(K, R)>> =
        entries.iter().map(|(k, v)| Ok(((*k).clone(), f(k, v)?))).collect();
    Ok(mapped?.into_iter().collect())
}

fn map_cells<T, R, F>(cells: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        cells.par_iter().map(&f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        cells.iter().map(&f).collect()
    }
}

struct Artefacts {
    dir: Option<PathBuf>,
    written: Vec<PathBuf>,
}

impl Artefacts {
    fn write(&mut self, relative: &str, bytes: &[u8]) -> Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }
}

/// Runs the whole pipeline. See the module docs for the stages.
pub fn run(config: &PipelineConfig) -> Result<RunOutput> {
    config.validate()?;
    let cfg = config.normalised();
    let mut artefacts =
        Artefacts { dir: cfg.output_dir.clone(), written: Vec::new() };

    // --- Inputs -----------------------------------------------------------
    let (tweet_text, edge_text) = if let Some(synth_cfg) = &cfg.synth {
        let out = crate::synth::generate(synth_cfg)?;
        artefacts.write("inputs/tweets.tsv", out.tweets_tsv.as_bytes())?;
        artefacts.write("inputs/social.tsv", out.edges_tsv.as_bytes())?;
        artefacts.write("inputs/planted.tsv", out.planted.dump_to_string().as_bytes())?;
        (out.tweets_tsv, out.edges_tsv)
    } else {
        let tweets = cfg.tweets.as_ref().expect("validated");
        let edges = cfg.social_edges.as_ref().expect("validated");
        (std::fs::read_to_string(tweets)?, std::fs::read_to_string(edges)?)
    };

    let (events, ingest_report) = ingest_tweets(tweet_text.as_bytes())?;
    let all_users: BTreeSet<UserId> =
        events.iter().flat_map(|e| e.users().iter().cloned()).collect();
    let (social_graph, social_report) = load_social_graph(edge_text.as_bytes(), &all_users)?;

    let stopwords = match &cfg.stopwords_file {
        Some(path) => load_stopwords(path)?,
        None => default_stopwords(),
    };

    // --- Per-user language models (trained on lifetime text) --------------
    let lifetime: BTreeMap<UserId, Document> = all_users
        .iter()
        .map(|u| Ok((u.clone(), user_lifetime_document(&events, u)?)))
        .collect::<Result<_>>()?;
    let skipped_users: Vec<UserId> =
        lifetime.iter().filter(|(_, d)| d.is_empty()).map(|(u, _)| u.clone()).collect();
    let trainable: BTreeMap<UserId, Document> =
        lifetime.into_iter().filter(|(_, d)| !d.is_empty()).collect();

    let train_models = |order: NGramOrder| -> Result<BTreeMap<UserId, NGramModel>> {
        try_map_values(&trainable, |_, doc| train_ngram(doc, order, cfg.smoothing_delta))
    };
    let unigram_models = if cfg.models.contains(&ModelKind::Unigram) {
        train_models(NGramOrder::Unigram)?
    } else {
        BTreeMap::new()
    };
    let bigram_models = if cfg.models.contains(&ModelKind::Bigram) {
        train_models(NGramOrder::Bigram)?
    } else {
        BTreeMap::new()
    };

    let mut manifest = RunManifest {
        ingest: ingest_report,
        social: social_report,
        skipped_users,
        ..RunManifest::default()
    };
    let mut scores: Vec<GoodnessScore> = Vec::new();

    // --- Per-event grid ----------------------------------------------------
    for corpus in &events {
        let event = corpus.event_id.clone();
        let mut summary = EventSummary {
            event: event.clone(),
            tweets: corpus.tweets().len(),
            users: corpus.users().len(),
            ..EventSummary::default()
        };

        let mut event_docs: BTreeMap<UserId, Document> = BTreeMap::new();
        for user in corpus.users() {
            let doc = user_event_document(corpus, user)?;
            if !doc.is_empty() && trainable.contains_key(user) {
                event_docs.insert(user.clone(), doc);
            }
        }
        summary.documented_users = event_docs.len();

        // Topic model for this event (feeds both lda edges and topic scopes).
        let mut topic_model: Option<TopicModel> = None;
        let mut memberships: BTreeMap<UserId, TopicMembership> = BTreeMap::new();
        let mut thetas: BTreeMap<UserId, Vec<f64>> = BTreeMap::new();
        if cfg.needs_lda() && !event_docs.is_empty() {
            let filtered: Vec<Document> =
                event_docs.values().map(|d| d.without_tokens(&stopwords)).collect();
            let params = cfg.lda_params();
            match fit_lda(&filtered, &params, derive_seed(cfg.seed, &["lda-fit", &event])) {
                Ok(model) => {
                    let estimates = try_map_values(&event_docs, |user, doc| {
                        let fdoc = doc.without_tokens(&stopwords);
                        let seed = derive_seed(cfg.seed, &["lda-theta", &event, user]);
                        Ok(model.infer_theta(&fdoc, seed))
                    })?;
                    for (user, est) in estimates {
                        if est.in_vocab_tokens == 0 {
                            summary.uniform_theta_users += 1;
                        }
                        thetas.insert(user.clone(), est.theta.clone());
                        memberships.insert(user.clone(), membership_from_theta(user, est.theta));
                    }
                    summary.lda_fitted = true;
                    topic_model = Some(model);
                }
                Err(err) => manifest.failures.push(CellFailure {
                    event: event.clone(),
                    scope: None,
                    model: Some(ModelKind::Lda),
                    threshold_pct: None,
                    error: err.to_string(),
                }),
            }
        }

        // Scopes: the event itself plus every topic with >= 2 participants.
        let mut scopes = vec![Scope::Event];
        if cfg.topic_scopes {
            if let Some(_model) = &topic_model {
                for k in 1..=cfg.topics {
                    let participants = topic_participants(memberships.values(), k);
                    if participants.len() >= 2 {
                        scopes.push(Scope::Topic(k));
                        summary.active_topics.push(k);
                    }
                }
            }
        }

        // Documents per scope (topic scopes route tweets by dominant topic).
        let mut scope_docs: BTreeMap<Scope, BTreeMap<UserId, Document>> = BTreeMap::new();
        scope_docs.insert(Scope::Event, event_docs);
        if let Some(model) = &topic_model {
            for &scope in &scopes {
                let Scope::Topic(k) = scope else { continue };
                let members: BTreeMap<UserId, &TopicMembership> = memberships
                    .iter()
                    .filter(|(_, m)| m.participates.contains(&k))
                    .map(|(u, m)| (u.clone(), m))
                    .collect();
                let built = try_map_values(&members, |user, membership| {
                    let seed =
                        derive_seed(cfg.seed, &["topic-doc", &event, &k.to_string(), user]);
                    build_topic_document(model, corpus, membership, k, &stopwords, seed)
                })?;
                let mut docs = BTreeMap::new();
                for (user, (doc, fell_back)) in built {
                    if fell_back {
                        summary.topic_doc_fallbacks += 1;
                    }
                    docs.insert(user, doc);
                }
                scope_docs.insert(scope, docs);
            }
        }

        // Content graphs per (scope, model).
        let mut graphs: BTreeMap<(Scope, ModelKind), WeightedGraph> = BTreeMap::new();
        for &scope in &scopes {
            for &model in &cfg.models {
                if model == ModelKind::Lda && topic_model.is_none() {
                    continue; // failure already recorded once
                }
                let built = match model {
                    ModelKind::Unigram => build_ngram_graph(
                        model,
                        scope,
                        &unigram_models,
                        &scope_docs[&scope],
                    ),
                    ModelKind::Bigram => {
                        build_ngram_graph(model, scope, &bigram_models, &scope_docs[&scope])
                    }
                    ModelKind::Lda => build_lda_graph(scope, &thetas),
                };
                match built {
                    Ok(graph) => {
                        if cfg.dump_graphs {
                            artefacts.write(
                                &format!("graphs/{event}.{scope}.{model}.tsv"),
                                graph.dump_to_string().as_bytes(),
                            )?;
                        }
                        graphs.insert((scope, model), graph);
                    }
                    Err(err) => manifest.failures.push(CellFailure {
                        event: event.clone(),
                        scope: Some(scope),
                        model: Some(model),
                        threshold_pct: None,
                        error: err.to_string(),
                    }),
                }
            }
        }

        // Score every cell, in parallel, in deterministic grid order.
        struct CellSpec {
            scope: Scope,
            model: ModelKind,
            threshold: f64,
        }
        let mut specs: Vec<CellSpec> = Vec::new();
        for &scope in &scopes {
            for &model in &cfg.models {
                if !graphs.contains_key(&(scope, model)) {
                    continue;
                }
                for &threshold in &cfg.thresholds {
                    specs.push(CellSpec { scope, model, threshold });
                }
            }
        }

        type CellOutcome =
            std::result::Result<(GoodnessScore, Partition, Partition), String>;
        let outcomes: Vec<CellOutcome> = map_cells(&specs, |spec| {
            let cell = || -> Result<(GoodnessScore, Partition, Partition)> {
                let graph = &graphs[&(spec.scope, spec.model)];
                let mut retained = graph.retain_top_percent(spec.threshold)?;
                if cfg.binarize_content {
                    retained = retained.binarized();
                }
                if cfg.drop_isolates {
                    retained = retained.without_isolates();
                }
                let labels = [
                    spec.scope.to_string(),
                    spec.model.to_string(),
                    format!("{}", spec.threshold),
                ];
                let content_seed = derive_seed(
                    cfg.seed,
                    &["louvain", &event, &labels[0], &labels[1], &labels[2], "content"],
                );
                let content = louvain(&retained, content_seed)?;
                let social_sub = social_graph.induced(retained.node_set());
                let social_seed = derive_seed(
                    cfg.seed,
                    &["louvain", &event, &labels[0], &labels[1], &labels[2], "social"],
                );
                let social = louvain(&social_sub, social_seed)?;
                let score = goodness(
                    &event,
                    spec.scope,
                    spec.model,
                    spec.threshold,
                    &content,
                    &social,
                )?;
                Ok((score, content, social))
            };
            cell().map_err(|e| e.to_string())
        });

        for (spec, outcome) in specs.iter().zip(outcomes) {
            match outcome {
                Ok((score, content, social)) => {
                    if cfg.dump_partitions {
                        let stem = format!(
                            "partitions/{event}.{}.{}.t{}",
                            spec.scope, spec.model, spec.threshold
                        );
                        artefacts.write(
                            &format!("{stem}.content.tsv"),
                            content.dump_to_string().as_bytes(),
                        )?;
                        artefacts.write(
                            &format!("{stem}.social.tsv"),
                            social.dump_to_string().as_bytes(),
                        )?;
                    }
                    scores.push(score);
                }
                Err(error) => manifest.failures.push(CellFailure {
                    event: event.clone(),
                    scope: Some(spec.scope),
                    model: Some(spec.model),
                    threshold_pct: Some(spec.threshold),
                    error,
                }),
            }
        }

        // Topic digest for offline inspection.
        if let Some(model) = &topic_model {
            #[derive(Serialize)]
            struct TopicDigest {
                topic: usize,
                participants: usize,
                top_words: Vec<(Token, f64)>,
            }
            let digest: Vec<TopicDigest> = (1..=model.topics())
                .map(|k| TopicDigest {
                    topic: k,
                    participants: topic_participants(memberships.values(), k).len(),
                    top_words: model.top_words(k, 20),
                })
                .collect();
            let mut text = serde_json::to_string_pretty(&digest)?;
            text.push('\n');
            artefacts.write(&format!("topics/{event}.topics.json"), text.as_bytes())?;
        }

        manifest.events.push(summary);
    }

    manifest.cells_scored = scores.len();

    // --- Artefacts ----------------------------------------------------------
    artefacts.write("scores.csv", scores_to_csv(&scores)?.as_bytes())?;
    let mut scores_json = serde_json::to_string_pretty(&scores)?;
    scores_json.push('\n');
    artefacts.write("scores.json", scores_json.as_bytes())?;
    let mut manifest_json = serde_json::to_string_pretty(&manifest)?;
    manifest_json.push('\n');
    artefacts.write("manifest.json", manifest_json.as_bytes())?;

    Ok(RunOutput { scores, manifest, written: artefacts.written })
}

/// Renders scores as CSV (stable column order, shortest-round-trip floats).
pub fn scores_to_csv(scores: &[GoodnessScore]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for score in scores {
        writer.serialize(score)?;
    }
    let bytes = writer.into_inner().expect("flushing to a Vec cannot fail");
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Reads back a `scores.json` produced by [`run`].
pub fn load_scores_json(path: impl AsRef<Path>) -> Result<Vec<GoodnessScore>> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes one tab-separated series per (event, scope, model): NMI against
/// retention threshold, ready for plotting. Returns the paths written.
pub fn emit_plot_data(scores: &[GoodnessScore], dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut series: BTreeMap<(String, Scope, ModelKind), Vec<&GoodnessScore>> = BTreeMap::new();
    for score in scores {
        series
            .entry((score.event.clone(), score.scope, score.model))
            .or_default()
            .push(score);
    }
    let mut written = Vec::new();
    for ((event, scope, model), mut rows) in series {
        rows.sort_by(|a, b| {
            a.threshold_pct.partial_cmp(&b.threshold_pct).expect("thresholds are finite")
        });
        let mut text = String::from("threshold_pct\tnmi_sym\tnmi_xy\tnmi_yx\tnodes\n");
        for row in rows {
            text.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                row.threshold_pct, row.nmi_sym, row.nmi_xy, row.nmi_yx, row.nodes
            ));
        }
        let path = dir.join(format!("{event}.{scope}.{model}.tsv"));
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}
