//! Undirected weighted graphs over users, and the builders that turn
//! language models or topic mixtures into content graphs.
//!
//! Cross-entropy is a dissimilarity, so n-gram edges are re-expressed as
//! `max_pair_cost - cost` before community detection; topic-mixture edges
//! are similarities already and are used as-is.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Scope, UserId};
use crate::error::{Error, Result};
use crate::ngram::NGramModel;

/// Which similarity signal an edge set was derived from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ModelKind {
    Unigram,
    Bigram,
    Lda,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Unigram, ModelKind::Bigram, ModelKind::Lda];
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Unigram => "unigram",
            ModelKind::Bigram => "bigram",
            ModelKind::Lda => "lda",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unigram" => Ok(ModelKind::Unigram),
            "bigram" => Ok(ModelKind::Bigram),
            "lda" => Ok(ModelKind::Lda),
            other => Err(Error::InvalidConfig(format!("unrecognised model `{other}`"))),
        }
    }
}

impl Serialize for ModelKind {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelKind {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Provenance of a graph: content-derived (model × scope) or the declared
/// follower graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphKind {
    Content { model: ModelKind, scope: Scope },
    Social,
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphKind::Content { model, scope } => write!(f, "content\t{model}\t{scope}"),
            GraphKind::Social => write!(f, "social"),
        }
    }
}

/// An undirected weighted simple graph. Edges are stored once under the
/// lexicographically ordered endpoint pair; all weights are positive.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedGraph {
    kind: GraphKind,
    nodes: BTreeSet<UserId>,
    edges: BTreeMap<(UserId, UserId), f64>,
}

fn ordered(a: &str, b: &str) -> (UserId, UserId) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl WeightedGraph {
    pub fn new(kind: GraphKind) -> Self {
        WeightedGraph { kind, nodes: BTreeSet::new(), edges: BTreeMap::new() }
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn add_node(&mut self, node: impl Into<UserId>) {
        self.nodes.insert(node.into());
    }

    /// Inserts (or overwrites) an undirected edge. Self-loops and
    /// non-positive weights are programming errors here; loaders validate
    /// before calling.
    pub fn add_edge(&mut self, a: &str, b: &str, weight: f64) {
        assert!(a != b, "self-loop on `{a}`");
        assert!(weight > 0.0 && weight.is_finite(), "bad weight {weight} on ({a}, {b})");
        self.nodes.insert(a.to_string());
        self.nodes.insert(b.to_string());
        self.edges.insert(ordered(a, b), weight);
    }

    pub fn has_node(&self, node: &str) -> bool {
        self.nodes.contains(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn node_set(&self) -> &BTreeSet<UserId> {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in lexicographic endpoint order.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.edges.iter().map(|((a, b), &w)| (a.as_str(), b.as_str(), w))
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<f64> {
        self.edges.get(&ordered(a, b)).copied()
    }

    /// Sum of edge weights (each undirected edge counted once).
    pub fn total_weight(&self) -> f64 {
        self.edges.values().sum()
    }

    pub fn weighted_degree(&self, node: &str) -> f64 {
        self.edges
            .iter()
            .filter(|((a, b), _)| a == node || b == node)
            .map(|(_, &w)| w)
            .sum()
    }

    /// All weights replaced by 1, structure unchanged.
    pub fn binarized(&self) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.kind);
        g.nodes = self.nodes.clone();
        g.edges = self.edges.keys().map(|k| (k.clone(), 1.0)).collect();
        g
    }

    /// Drops nodes with no incident edge.
    pub fn without_isolates(&self) -> WeightedGraph {
        let connected: BTreeSet<UserId> = self
            .edges
            .keys()
            .flat_map(|(a, b)| [a.clone(), b.clone()])
            .collect();
        let mut g = WeightedGraph::new(self.kind);
        g.nodes = connected;
        g.edges = self.edges.clone();
        g
    }

    /// The subgraph induced on `keep`: those nodes and every edge with both
    /// endpoints inside.
    pub fn induced(&self, keep: &BTreeSet<UserId>) -> WeightedGraph {
        let mut g = WeightedGraph::new(self.kind);
        for node in self.nodes.intersection(keep) {
            g.add_node(node.clone());
        }
        for ((a, b), &w) in &self.edges {
            if keep.contains(a) && keep.contains(b) {
                g.add_edge(a, b, w);
            }
        }
        g
    }

    /// Keeps the `percent`% heaviest edges (count rounded up), dropping the
    /// rest. Ties at the cut are broken by endpoint order, so the result
    /// never depends on sort instability.
    pub fn retain_top_percent(&self, percent: f64) -> Result<WeightedGraph> {
        if !(percent > 0.0 && percent <= 100.0) {
            return Err(Error::BadThreshold(percent));
        }
        let mut ranked: Vec<(&(UserId, UserId), f64)> =
            self.edges.iter().map(|(k, &w)| (k, w)).collect();
        ranked.sort_by(|(ka, wa), (kb, wb)| {
            wb.partial_cmp(wa).expect("weights are finite").then_with(|| ka.cmp(kb))
        });
        // Exact multiples of an edge must not be bumped up by float error
        // (20% of 45 edges is 9, not 10).
        let raw = percent * self.edge_count() as f64 / 100.0;
        let keep = if (raw - raw.round()).abs() < 1e-9 { raw.round() } else { raw.ceil() } as usize;
        let mut g = WeightedGraph::new(self.kind);
        g.nodes = self.nodes.clone();
        g.edges = ranked.into_iter().take(keep).map(|(k, w)| (k.clone(), w)).collect();
        Ok(g)
    }

    /// Writes the graph as tagged tab-separated lines: a kind header, one
    /// `node` line per node, one `edge` line per edge. Weights use the
    /// shortest decimal that round-trips, so load-then-dump is identity.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "kind\t{}", self.kind)?;
        for node in &self.nodes {
            writeln!(out, "node\t{node}")?;
        }
        for ((a, b), w) in &self.edges {
            writeln!(out, "edge\t{a}\t{b}\t{w}")?;
        }
        Ok(())
    }

    pub fn dump_to_string(&self) -> String {
        let mut buf = Vec::new();
        self.dump(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("dump is UTF-8")
    }

    pub fn load<R: BufRead>(reader: R) -> Result<WeightedGraph> {
        let mut kind = None;
        let mut graph = WeightedGraph::new(GraphKind::Social);
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let parse_err = |message: String| Error::Parse { line: lineno, message };
            match fields.as_slice() {
                ["kind", "social"] => kind = Some(GraphKind::Social),
                ["kind", "content", model, scope] => {
                    kind = Some(GraphKind::Content { model: model.parse()?, scope: scope.parse()? })
                }
                ["node", node] => graph.nodes.insert(node.to_string()).then_some(()).ok_or_else(
                    || parse_err(format!("duplicate node `{node}`")),
                )?,
                ["edge", a, b, w] => {
                    let weight: f64 = w
                        .parse()
                        .map_err(|e| parse_err(format!("bad weight `{w}`: {e}")))?;
                    if a == b || !(weight > 0.0 && weight.is_finite()) {
                        return Err(parse_err(format!("invalid edge `{a}` `{b}` {w}")));
                    }
                    graph.add_edge(a, b, weight);
                }
                _ => return Err(parse_err(format!("unrecognised record `{line}`"))),
            }
        }
        graph.kind = kind.ok_or_else(|| Error::Parse {
            line: 0,
            message: "missing kind header".to_string(),
        })?;
        Ok(graph)
    }
}

/// The symmetrised pair cost: each user's model scores the other's
/// document, averaged. Low cost means the two read alike.
pub fn average_cross_entropy(
    model_a: &NGramModel,
    doc_a: &Document,
    model_b: &NGramModel,
    doc_b: &Document,
) -> Result<f64> {
    Ok(0.5 * (model_a.cross_entropy(doc_b)? + model_b.cross_entropy(doc_a)?))
}

fn pair_indices(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    pairs
}

type PairCost = (UserId, UserId, f64);

fn gather_entries<'a>(
    models: &'a BTreeMap<UserId, NGramModel>,
    docs: &'a BTreeMap<UserId, Document>,
) -> Result<Vec<(&'a UserId, &'a NGramModel, &'a Document)>> {
    docs.iter()
        .map(|(user, doc)| {
            let model = models.get(user).ok_or_else(|| Error::UnknownParticipant {
                user: user.clone(),
                event: "model table".to_string(),
            })?;
            if doc.is_empty() {
                return Err(Error::EmptyDocument);
            }
            Ok((user, model, doc))
        })
        .collect()
}

/// Sequential kernel: averaged cross-entropy for every unordered pair of
/// documented users. Output is sorted by endpoint pair.
pub fn ngram_pair_costs_seq(
    models: &BTreeMap<UserId, NGramModel>,
    docs: &BTreeMap<UserId, Document>,
) -> Result<Vec<PairCost>> {
    let entries = gather_entries(models, docs)?;
    pair_indices(entries.len())
        .into_iter()
        .map(|(i, j)| score_pair(&entries, i, j))
        .collect()
}

/// Data-parallel kernel; identical output to [`ngram_pair_costs_seq`]
/// because pairs are scored independently and collected in index order.
#[cfg(feature = "parallel")]
pub fn ngram_pair_costs_par(
    models: &BTreeMap<UserId, NGramModel>,
    docs: &BTreeMap<UserId, Document>,
) -> Result<Vec<PairCost>> {
    let entries = gather_entries(models, docs)?;
    pair_indices(entries.len())
        .into_par_iter()
        .map(|(i, j)| score_pair(&entries, i, j))
        .collect()
}

fn score_pair(
    entries: &[(&UserId, &NGramModel, &Document)],
    i: usize,
    j: usize,
) -> Result<PairCost> {
    let (ua, ma, da) = entries[i];
    let (ub, mb, db) = entries[j];
    let cost = average_cross_entropy(ma, da, mb, db)?;
    Ok((ua.clone(), ub.clone(), cost))
}

/// Scores all pairs with whichever kernel the build enables.
pub fn ngram_pair_costs(
    models: &BTreeMap<UserId, NGramModel>,
    docs: &BTreeMap<UserId, Document>,
) -> Result<Vec<PairCost>> {
    #[cfg(feature = "parallel")]
    {
        ngram_pair_costs_par(models, docs)
    }
    #[cfg(not(feature = "parallel"))]
    {
        ngram_pair_costs_seq(models, docs)
    }
}

/// Turns pair costs into edge weights: `weight = max_cost - cost`, so the
/// most dissimilar pair defines zero and drops out. All `nodes` are kept
/// even when every incident edge vanishes.
pub fn graph_from_costs(
    kind: GraphKind,
    nodes: &BTreeSet<UserId>,
    costs: &[PairCost],
) -> WeightedGraph {
    let mut g = WeightedGraph::new(kind);
    for node in nodes {
        g.add_node(node.clone());
    }
    let max_cost = costs.iter().map(|&(_, _, c)| c).fold(f64::NEG_INFINITY, f64::max);
    for (a, b, cost) in costs {
        let weight = max_cost - cost;
        if weight > 0.0 {
            g.add_edge(a, b, weight);
        }
    }
    g
}

/// Builds the n-gram content graph for one scope: score every pair, then
/// re-express costs as weights.
pub fn build_ngram_graph(
    model: ModelKind,
    scope: Scope,
    models: &BTreeMap<UserId, NGramModel>,
    docs: &BTreeMap<UserId, Document>,
) -> Result<WeightedGraph> {
    if model == ModelKind::Lda {
        return Err(Error::InvalidConfig("lda graphs are built from topic mixtures".into()));
    }
    let costs = ngram_pair_costs(models, docs)?;
    let nodes: BTreeSet<UserId> = docs.keys().cloned().collect();
    Ok(graph_from_costs(GraphKind::Content { model, scope }, &nodes, &costs))
}

/// Builds the topic-model content graph for one scope.
///
/// Event scope: every documented user, weight = θ_u · θ_v (dot product).
/// Topic-k scope: only users whose membership for k clears the uniform
/// level 1/K (strictly), weight = θ_u[k] · θ_v[k].
pub fn build_lda_graph(scope: Scope, thetas: &BTreeMap<UserId, Vec<f64>>) -> Result<WeightedGraph> {
    let kind = GraphKind::Content { model: ModelKind::Lda, scope };
    let mut g = WeightedGraph::new(kind);
    let Some(k_topics) = thetas.values().next().map(Vec::len) else {
        return Ok(g);
    };
    for theta in thetas.values() {
        if theta.len() != k_topics {
            return Err(Error::MismatchedTopics { left: k_topics, right: theta.len() });
        }
    }

    let members: Vec<(&UserId, &Vec<f64>)> = match scope {
        Scope::Event => thetas.iter().collect(),
        Scope::Topic(k) => {
            if k == 0 || k > k_topics {
                return Err(Error::InvalidConfig(format!(
                    "topic {k} outside 1..={k_topics}"
                )));
            }
            let uniform = 1.0 / k_topics as f64;
            thetas.iter().filter(|(_, theta)| theta[k - 1] > uniform).collect()
        }
    };
    for (user, _) in &members {
        g.add_node((*user).clone());
    }
    for i in 0..members.len() {
        for j in i + 1..members.len() {
            let (ua, ta) = members[i];
            let (ub, tb) = members[j];
            let weight = match scope {
                Scope::Event => ta.iter().zip(tb.iter()).map(|(x, y)| x * y).sum::<f64>(),
                Scope::Topic(k) => ta[k - 1] * tb[k - 1],
            };
            if weight > 0.0 {
                g.add_edge(ua, ub, weight);
            }
        }
    }
    Ok(g)
}
