//! Modularity-based community detection: the greedy two-phase algorithm
//! (local moves, then graph aggregation, repeated) plus an exhaustive
//! oracle for small graphs.
//!
//! Node visit order is shuffled from a caller-supplied seed; every other
//! choice is deterministic (ties prefer the smallest community id), so a
//! (graph, seed) pair always yields the same partition.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::UserId;
use crate::error::{Error, Result};
use crate::graph::WeightedGraph;

/// Gains below this are treated as zero so float noise cannot produce
/// move cycles.
const GAIN_TOLERANCE: f64 = 1e-9;

/// Largest graph the exhaustive oracle accepts: Bell(12) ≈ 4.2 million
/// partitions is still cheap, Bell(14) is not.
pub const ORACLE_NODE_CAP: usize = 12;

/// A hard assignment of nodes to communities, labelled `0..k` densely.
/// Labels are an artefact of enumeration order and carry no meaning across
/// partitions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    assignment: BTreeMap<UserId, usize>,
    communities: usize,
}

impl Partition {
    /// Normalises arbitrary labels to dense ids in order of first
    /// appearance over the sorted node set.
    pub fn new(labels: BTreeMap<UserId, usize>) -> Self {
        let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
        let mut assignment = BTreeMap::new();
        for (node, label) in labels {
            let next = remap.len();
            let dense = *remap.entry(label).or_insert(next);
            assignment.insert(node, dense);
        }
        let communities = remap.len();
        Partition { assignment, communities }
    }

    pub fn singletons<'a>(nodes: impl IntoIterator<Item = &'a str>) -> Self {
        Partition::new(nodes.into_iter().enumerate().map(|(i, n)| (n.to_string(), i)).collect())
    }

    pub fn one_community<'a>(nodes: impl IntoIterator<Item = &'a str>) -> Self {
        Partition::new(nodes.into_iter().map(|n| (n.to_string(), 0)).collect())
    }

    pub fn of(&self, node: &str) -> Option<usize> {
        self.assignment.get(node).copied()
    }

    pub fn node_count(&self) -> usize {
        self.assignment.len()
    }

    pub fn community_count(&self) -> usize {
        self.communities
    }

    pub fn assignment(&self) -> &BTreeMap<UserId, usize> {
        &self.assignment
    }

    pub fn node_set(&self) -> BTreeSet<UserId> {
        self.assignment.keys().cloned().collect()
    }

    pub fn community_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.communities];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }

    /// Members of each community, communities in label order.
    pub fn communities(&self) -> Vec<Vec<&str>> {
        let mut groups = vec![Vec::new(); self.communities];
        for (node, &c) in &self.assignment {
            groups[c].push(node.as_str());
        }
        groups
    }

    /// One `node \t community` line per node, nodes sorted.
    pub fn dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (node, c) in &self.assignment {
            writeln!(out, "{node}\t{c}")?;
        }
        Ok(())
    }

    pub fn dump_to_string(&self) -> String {
        let mut buf = Vec::new();
        self.dump(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("dump is UTF-8")
    }

    pub fn load<R: BufRead>(reader: R) -> Result<Partition> {
        let mut labels = BTreeMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: idx + 1, message };
            let (node, label) = line
                .split_once('\t')
                .ok_or_else(|| parse_err("expected `node\\tcommunity`".to_string()))?;
            let label: usize = label
                .trim()
                .parse()
                .map_err(|e| parse_err(format!("bad community id: {e}")))?;
            if labels.insert(node.to_string(), label).is_some() {
                return Err(parse_err(format!("node `{node}` assigned twice")));
            }
        }
        Ok(Partition::new(labels))
    }
}

/// Newman-Girvan modularity of `partition` on `graph`, using edge weights.
///
/// Errors if the partition does not cover exactly the graph's nodes, or if
/// the graph has no edge weight (the measure divides by total weight).
pub fn modularity(graph: &WeightedGraph, partition: &Partition) -> Result<f64> {
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    if graph.node_count() != partition.node_count()
        || !graph.nodes().all(|n| partition.of(n).is_some())
    {
        return Err(Error::UnalignedPartitions);
    }
    let mut intra = vec![0.0; partition.community_count()];
    let mut degree = vec![0.0; partition.community_count()];
    for (a, b, w) in graph.edges() {
        let (ca, cb) = (partition.of(a).unwrap(), partition.of(b).unwrap());
        if ca == cb {
            intra[ca] += w;
        }
        degree[ca] += w;
        degree[cb] += w;
    }
    Ok(intra
        .iter()
        .zip(&degree)
        .map(|(&win, &deg)| win / m - (deg / (2.0 * m)).powi(2))
        .sum())
}

/// Flat-array mirror of a graph during detection. Aggregated levels carry
/// self-loops (collapsed intra-community weight); the interface graphs
/// never do.
#[derive(Clone)]
struct DenseGraph {
    adj: Vec<Vec<(usize, f64)>>,
    self_loop: Vec<f64>,
    degree: Vec<f64>,
    /// Total weight m: each edge once plus self-loops once.
    total: f64,
}

impl DenseGraph {
    fn from_graph(graph: &WeightedGraph, index: &BTreeMap<&str, usize>) -> DenseGraph {
        let n = index.len();
        let mut adj = vec![Vec::new(); n];
        for (a, b, w) in graph.edges() {
            let (ia, ib) = (index[a], index[b]);
            adj[ia].push((ib, w));
            adj[ib].push((ia, w));
        }
        let mut dense = DenseGraph { adj, self_loop: vec![0.0; n], degree: vec![0.0; n], total: 0.0 };
        dense.refresh();
        dense
    }

    fn refresh(&mut self) {
        let n = self.adj.len();
        self.degree = vec![0.0; n];
        let mut total = 0.0;
        for i in 0..n {
            let neighbour_sum: f64 = self.adj[i].iter().map(|&(_, w)| w).sum();
            // A self-loop adds twice to the degree, by the usual convention.
            self.degree[i] = neighbour_sum + 2.0 * self.self_loop[i];
            total += neighbour_sum;
        }
        self.total = total / 2.0 + self.self_loop.iter().sum::<f64>();
    }

    fn len(&self) -> usize {
        self.adj.len()
    }
}

/// One round of local moves: repeatedly offer every node its best
/// community until nothing improves. Returns the assignment and whether
/// any node moved at all.
fn local_moves(graph: &DenseGraph, init: Vec<usize>, order: &[usize]) -> (Vec<usize>, bool) {
    let n = graph.len();
    let m = graph.total;
    let mut comm = init;
    let mut sigma_tot = vec![0.0; n];
    for i in 0..n {
        sigma_tot[comm[i]] += graph.degree[i];
    }

    let mut moved_any = false;
    loop {
        let mut moved_this_pass = false;
        for &i in order {
            let current = comm[i];
            let k_i = graph.degree[i];
            // Weight from i to each adjacent community (self excluded).
            let mut links: BTreeMap<usize, f64> = BTreeMap::new();
            for &(j, w) in &graph.adj[i] {
                if j != i {
                    *links.entry(comm[j]).or_insert(0.0) += w;
                }
            }
            sigma_tot[current] -= k_i;

            // ΔQ of joining c, up to terms constant in c.
            let gain = |c: usize| {
                let to_c = links.get(&c).copied().unwrap_or(0.0);
                to_c / m - sigma_tot[c] * k_i / (2.0 * m * m)
            };
            // Only strict improvements move the node, so Q rises by more
            // than the tolerance each time and the sweep must terminate.
            // Candidates are visited in ascending order: among equal gains
            // the smallest community id wins.
            let stay = gain(current);
            let mut best = (current, stay);
            for &c in links.keys() {
                if c != current && gain(c) > best.1 + GAIN_TOLERANCE {
                    best = (c, gain(c));
                }
            }

            sigma_tot[best.0] += k_i;
            if best.0 != current {
                comm[i] = best.0;
                moved_this_pass = true;
                moved_any = true;
            }
        }
        if !moved_this_pass {
            break;
        }
    }
    (comm, moved_any)
}

/// Renumbers arbitrary labels densely in order of first appearance.
fn renumber(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut remap: BTreeMap<usize, usize> = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    for &l in labels {
        let next = remap.len();
        out.push(*remap.entry(l).or_insert(next));
    }
    let count = remap.len();
    (out, count)
}

/// Collapses communities into single nodes; parallel edges accumulate,
/// intra-community weight becomes a self-loop.
fn aggregate(graph: &DenseGraph, comm: &[usize], communities: usize) -> DenseGraph {
    let mut self_loop = vec![0.0; communities];
    let mut between: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for i in 0..graph.len() {
        self_loop[comm[i]] += graph.self_loop[i];
        for &(j, w) in &graph.adj[i] {
            if j < i {
                continue; // each undirected edge once
            }
            let (ci, cj) = (comm[i], comm[j]);
            if ci == cj {
                self_loop[ci] += w;
            } else {
                *between.entry((ci.min(cj), ci.max(cj))).or_insert(0.0) += w;
            }
        }
    }
    let mut adj = vec![Vec::new(); communities];
    for (&(a, b), &w) in &between {
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let mut dense = DenseGraph { adj, self_loop, degree: Vec::new(), total: 0.0 };
    dense.refresh();
    dense
}

fn shuffled_order(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    order
}

/// Independent restarts; the greedy search is order-sensitive and small
/// graphs have shallow local optima that a single descent gets stuck in.
/// The first restart uses the classic all-singletons start, the rest
/// begin from random coarse partitions to reach other basins.
const RESTARTS: usize = 6;

/// Greedy modularity maximisation (local moves + aggregation, repeated),
/// then a polish phase alternating pairwise swaps with single-node moves
/// until neither improves, so the result is stable under both. The best
/// of [`RESTARTS`] independently seeded searches is polished; every step
/// strictly raises Q, which bounds the whole procedure.
pub fn louvain(graph: &WeightedGraph, seed: u64) -> Result<Partition> {
    if graph.total_weight() <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    let names: Vec<&str> = graph.nodes().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let base = DenseGraph::from_graph(graph, &index);

    let mut best: Option<(f64, Vec<usize>)> = None;
    for restart in 0..RESTARTS {
        let run_seed = crate::seeding::derive_seed(seed, &["restart", &restart.to_string()]);
        let labels = louvain_descent(&base, run_seed, restart > 0);
        let q = dense_modularity(&base, &labels);
        if best.as_ref().map_or(true, |(bq, _)| q > bq + GAIN_TOLERANCE) {
            best = Some((q, labels));
        }
    }
    let mut labels = best.expect("at least one restart").1;

    // Swapping two nodes between communities can pay off even when each
    // individual move does not; quadratic in nodes, cheap at this scale.
    let order: Vec<usize> = (0..base.len()).collect();
    for _ in 0..200 {
        if !swap_pass(&base, &mut labels) {
            break;
        }
        labels = local_moves(&base, labels, &order).0;
    }

    let (dense, _) = renumber(&labels);
    Ok(Partition::new(
        names.iter().zip(&dense).map(|(&n, &c)| (n.to_string(), c)).collect(),
    ))
}

/// One seeded multi-level descent over `base`; returns labels per node.
fn louvain_descent(base: &DenseGraph, seed: u64, random_init: bool) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut node_comm: Vec<usize> = (0..base.len()).collect();
    let mut level = base.clone();
    let mut first = true;
    loop {
        let order = shuffled_order(level.len(), &mut rng);
        let seeded_start = first && random_init && level.len() > 2;
        let init: Vec<usize> = if seeded_start {
            let groups = rng.random_range(2..=level.len().div_ceil(2));
            (0..level.len()).map(|_| rng.random_range(0..groups)).collect()
        } else {
            (0..level.len()).collect()
        };
        first = false;
        let (assign, moved) = local_moves(&level, init, &order);
        // A random start is itself a coarsening that must be folded in,
        // even when no further move improved on it.
        if !moved && !seeded_start {
            break;
        }
        let (dense_assign, communities) = renumber(&assign);
        for c in node_comm.iter_mut() {
            *c = dense_assign[*c];
        }
        if communities == level.len() {
            break;
        }
        level = aggregate(&level, &dense_assign, communities);
    }

    // Aggregated moves can leave individual nodes better off elsewhere;
    // one warm-started round on the original graph removes that slack.
    let order = shuffled_order(base.len(), &mut rng);
    local_moves(base, node_comm, &order).0
}

/// Q for labels over a dense graph, same quantity [`modularity`] reports.
fn dense_modularity(graph: &DenseGraph, labels: &[usize]) -> f64 {
    let m = graph.total;
    let mut internal: BTreeMap<usize, f64> = BTreeMap::new();
    let mut degree: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..graph.len() {
        *degree.entry(labels[i]).or_insert(0.0) += graph.degree[i];
        *internal.entry(labels[i]).or_insert(0.0) += graph.self_loop[i];
        for &(j, w) in &graph.adj[i] {
            if j > i && labels[j] == labels[i] {
                *internal.entry(labels[i]).or_insert(0.0) += w;
            }
        }
    }
    degree
        .iter()
        .map(|(c, k)| {
            let w_in = internal.get(c).copied().unwrap_or(0.0);
            w_in / m - (k / (2.0 * m)).powi(2)
        })
        .sum()
}

/// Scans node pairs in ascending order and commits the first swap of two
/// nodes between their communities that strictly raises Q. Returns whether a
/// swap was committed; the caller rescans until a pass comes back clean.
fn swap_pass(graph: &DenseGraph, labels: &mut [usize]) -> bool {
    let n = graph.len();
    let m = graph.total;
    // Links from each node to each community, and community degree sums.
    let mut to_comm: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut neighbour: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    let mut sigma: BTreeMap<usize, f64> = BTreeMap::new();
    for i in 0..n {
        *sigma.entry(labels[i]).or_insert(0.0) += graph.degree[i];
        for &(j, w) in &graph.adj[i] {
            if j != i {
                *to_comm[i].entry(labels[j]).or_insert(0.0) += w;
                *neighbour[i].entry(j).or_insert(0.0) += w;
            }
        }
    }

    for u in 0..n {
        for v in u + 1..n {
            let (a, b) = (labels[u], labels[v]);
            if a == b {
                continue;
            }
            let link = |map: &BTreeMap<usize, f64>, key: usize| map.get(&key).copied().unwrap_or(0.0);
            let adjacency = (link(&to_comm[u], b) + link(&to_comm[v], a)
                - 2.0 * link(&neighbour[u], v))
                - (link(&to_comm[u], a) + link(&to_comm[v], b));
            let d = graph.degree[v] - graph.degree[u];
            let expected = (d * (sigma[&a] - sigma[&b]) + d * d) / (2.0 * m * m);
            let gain = adjacency / m - expected;
            if gain > GAIN_TOLERANCE {
                labels[u] = b;
                labels[v] = a;
                return true;
            }
        }
    }
    false
}

/// Exhaustively maximises modularity over all set partitions.
///
/// Only for cross-checking the greedy search; refuses graphs above
/// [`ORACLE_NODE_CAP`] nodes.
pub fn brute_force_max_modularity(graph: &WeightedGraph) -> Result<(Partition, f64)> {
    let n = graph.node_count();
    if n > ORACLE_NODE_CAP {
        return Err(Error::OracleLimit { nodes: n, cap: ORACLE_NODE_CAP });
    }
    let m = graph.total_weight();
    if m <= 0.0 {
        return Err(Error::UndefinedModularity);
    }
    let names: Vec<&str> = graph.nodes().collect();
    let index: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    let edges: Vec<(usize, usize, f64)> =
        graph.edges().map(|(a, b, w)| (index[a], index[b], w)).collect();
    let degree = {
        let mut d = vec![0.0; n];
        for &(a, b, w) in &edges {
            d[a] += w;
            d[b] += w;
        }
        d
    };

    let q_of = |labels: &[usize]| {
        let mut intra = vec![0.0; n];
        let mut comm_degree = vec![0.0; n];
        for &(a, b, w) in &edges {
            if labels[a] == labels[b] {
                intra[labels[a]] += w;
            }
        }
        for i in 0..n {
            comm_degree[labels[i]] += degree[i];
        }
        intra
            .iter()
            .zip(&comm_degree)
            .map(|(&win, &deg)| win / m - (deg / (2.0 * m)).powi(2))
            .sum::<f64>()
    };

    // Enumerate set partitions as restricted growth strings:
    // labels[0] = 0 and labels[i] <= max(labels[..i]) + 1.
    let mut labels = vec![0usize; n];
    let mut best: Option<(Vec<usize>, f64)> = None;
    loop {
        let q = q_of(&labels);
        if best.as_ref().map_or(true, |(_, bq)| q > bq + f64::EPSILON) {
            best = Some((labels.clone(), q));
        }
        // Advance to the next restricted growth string.
        let mut pos = n as isize - 1;
        loop {
            if pos <= 0 {
                pos = -1;
                break;
            }
            let p = pos as usize;
            let max_prefix = labels[..p].iter().copied().max().unwrap_or(0);
            if labels[p] <= max_prefix {
                labels[p] += 1;
                for l in labels[p + 1..].iter_mut() {
                    *l = 0;
                }
                break;
            }
            pos -= 1;
        }
        if pos < 0 {
            break;
        }
    }

    let (labels, q) = best.expect("at least the all-zeros partition was scored");
    let partition =
        Partition::new(names.iter().zip(&labels).map(|(&n, &c)| (n.to_string(), c)).collect());
    Ok((partition, q))
}
