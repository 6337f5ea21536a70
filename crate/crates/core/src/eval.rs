//! Agreement between a content-derived partition and the follower-graph
//! partition, measured by normalised mutual information (bits).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::community::Partition;
use crate::corpus::Scope;
use crate::error::{Error, Result};
use crate::graph::ModelKind;

/// Which entropy normalises the mutual information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NmiMode {
    /// I(X; Y) / H(X)
    ByHx,
    /// I(X; Y) / H(Y)
    ByHy,
    /// I(X; Y) / sqrt(H(X) · H(Y))
    Symmetric,
}

/// Shannon entropy of a partition's community-size distribution, in bits.
pub fn partition_entropy(partition: &Partition) -> f64 {
    let n = partition.node_count() as f64;
    -partition
        .community_sizes()
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Mutual information between two partitions of the same node set, in
/// bits. Zero means independent labellings; it never exceeds either
/// entropy (up to rounding).
pub fn mutual_information(x: &Partition, y: &Partition) -> Result<f64> {
    if x.node_count() != y.node_count()
        || !x.assignment().keys().all(|node| y.of(node).is_some())
    {
        return Err(Error::UnalignedPartitions);
    }
    let n = x.node_count() as f64;
    let mut joint: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for (node, &cx) in x.assignment() {
        let cy = y.of(node).expect("alignment checked above");
        *joint.entry((cx, cy)).or_insert(0) += 1;
    }
    let mut px = vec![0u64; x.community_count()];
    let mut py = vec![0u64; y.community_count()];
    for (&(cx, cy), &count) in &joint {
        px[cx] += count;
        py[cy] += count;
    }
    let mut info = 0.0;
    for (&(cx, cy), &count) in &joint {
        let p_xy = count as f64 / n;
        let p_x = px[cx] as f64 / n;
        let p_y = py[cy] as f64 / n;
        info += p_xy * (p_xy / (p_x * p_y)).log2();
    }
    // Nonnegative in exact arithmetic; trim float dust.
    Ok(info.max(0.0))
}

/// Normalised mutual information under the chosen normalisation.
///
/// Two single-community partitions agree perfectly by convention (1).
/// If only the normalising side is a single community the ratio is 0/0
/// on one axis and undefined; that is an error the caller must handle.
pub fn nmi(x: &Partition, y: &Partition, mode: NmiMode) -> Result<f64> {
    let info = mutual_information(x, y)?;
    let hx = partition_entropy(x);
    let hy = partition_entropy(y);
    let denominator = match mode {
        NmiMode::ByHx => hx,
        NmiMode::ByHy => hy,
        NmiMode::Symmetric => (hx * hy).sqrt(),
    };
    if denominator == 0.0 {
        return if hx == 0.0 && hy == 0.0 {
            Ok(1.0)
        } else {
            Err(Error::DegeneratePartition)
        };
    }
    Ok((info / denominator).clamp(0.0, 1.0))
}

/// One scored cell of the experiment grid: a content partition (X)
/// compared against the follower partition (Y) at a given model, scope,
/// and edge-retention threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodnessScore {
    pub event: String,
    pub scope: Scope,
    pub model: ModelKind,
    pub threshold_pct: f64,
    /// I(X; Y) / H(Y): how much of the follower structure content explains.
    pub nmi_xy: f64,
    /// I(X; Y) / H(X).
    pub nmi_yx: f64,
    /// I(X; Y) / sqrt(H(X) H(Y)).
    pub nmi_sym: f64,
    pub nodes: usize,
    pub content_comms: usize,
    pub social_comms: usize,
}

/// Scores one cell. `content` and `social` must cover the same nodes.
pub fn goodness(
    event: &str,
    scope: Scope,
    model: ModelKind,
    threshold_pct: f64,
    content: &Partition,
    social: &Partition,
) -> Result<GoodnessScore> {
    Ok(GoodnessScore {
        event: event.to_string(),
        scope,
        model,
        threshold_pct,
        nmi_xy: nmi(content, social, NmiMode::ByHy)?,
        nmi_yx: nmi(content, social, NmiMode::ByHx)?,
        nmi_sym: nmi(content, social, NmiMode::Symmetric)?,
        nodes: content.node_count(),
        content_comms: content.community_count(),
        social_comms: social.community_count(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn partition(pairs: &[(&str, usize)]) -> Partition {
        Partition::new(pairs.iter().map(|&(n, c)| (n.to_string(), c)).collect())
    }

    #[test]
    fn mutual_information_matches_hand_computation() {
        // X splits {a,b} | {c,d}; Y splits {a,b,c} | {d}.
        let x = partition(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let y = partition(&[("a", 0), ("b", 0), ("c", 0), ("d", 1)]);
        let info = mutual_information(&x, &y).unwrap();
        assert_abs_diff_eq!(info, 0.31127812445913283, epsilon = 1e-12);
        assert_abs_diff_eq!(partition_entropy(&x), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(partition_entropy(&y), 0.8112781244591328, epsilon = 1e-12);

        assert_abs_diff_eq!(nmi(&x, &y, NmiMode::ByHy).unwrap(), 0.3836885, epsilon = 1e-6);
        assert_abs_diff_eq!(nmi(&x, &y, NmiMode::ByHx).unwrap(), 0.31127812445913283, epsilon = 1e-9);
        assert_abs_diff_eq!(nmi(&x, &y, NmiMode::Symmetric).unwrap(), 0.3455920, epsilon = 1e-6);
    }

    #[test]
    fn mutual_information_is_symmetric() {
        let x = partition(&[("a", 0), ("b", 0), ("c", 1), ("d", 1), ("e", 2)]);
        let y = partition(&[("a", 0), ("b", 1), ("c", 1), ("d", 0), ("e", 0)]);
        assert_abs_diff_eq!(
            mutual_information(&x, &y).unwrap(),
            mutual_information(&y, &x).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn identical_partitions_score_one_in_every_mode() {
        let x = partition(&[("a", 0), ("b", 0), ("c", 1), ("d", 2)]);
        for mode in [NmiMode::ByHx, NmiMode::ByHy, NmiMode::Symmetric] {
            assert_abs_diff_eq!(nmi(&x, &x, mode).unwrap(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn independent_partitions_score_zero() {
        let x = partition(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let y = partition(&[("a", 0), ("b", 1), ("c", 0), ("d", 1)]);
        for mode in [NmiMode::ByHx, NmiMode::ByHy, NmiMode::Symmetric] {
            assert_abs_diff_eq!(nmi(&x, &y, mode).unwrap(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trivial_partitions_follow_the_convention() {
        let one_x = partition(&[("a", 0), ("b", 0), ("c", 0)]);
        let one_y = partition(&[("a", 5), ("b", 5), ("c", 5)]);
        let split = partition(&[("a", 0), ("b", 1), ("c", 1)]);
        for mode in [NmiMode::ByHx, NmiMode::ByHy, NmiMode::Symmetric] {
            assert_abs_diff_eq!(nmi(&one_x, &one_y, mode).unwrap(), 1.0);
        }
        // The normalising side is degenerate: undefined, not zero.
        assert!(matches!(nmi(&one_x, &split, NmiMode::ByHx), Err(Error::DegeneratePartition)));
        assert!(matches!(nmi(&split, &one_x, NmiMode::ByHy), Err(Error::DegeneratePartition)));
        assert!(matches!(
            nmi(&split, &one_x, NmiMode::Symmetric),
            Err(Error::DegeneratePartition)
        ));
        // ... but normalising by the informative side still works: I = 0.
        assert_abs_diff_eq!(nmi(&one_x, &split, NmiMode::ByHy).unwrap(), 0.0);
    }

    #[test]
    fn unaligned_node_sets_are_rejected() {
        let x = partition(&[("a", 0), ("b", 1)]);
        let y = partition(&[("a", 0), ("z", 1)]);
        assert!(matches!(mutual_information(&x, &y), Err(Error::UnalignedPartitions)));
        let bigger = partition(&[("a", 0), ("b", 1), ("c", 1)]);
        assert!(matches!(mutual_information(&x, &bigger), Err(Error::UnalignedPartitions)));
    }

    #[test]
    fn goodness_packs_all_three_normalisations() {
        let content = partition(&[("a", 0), ("b", 0), ("c", 1), ("d", 1)]);
        let social = partition(&[("a", 0), ("b", 0), ("c", 0), ("d", 1)]);
        let score = goodness(
            "junos",
            Scope::Event,
            ModelKind::Unigram,
            20.0,
            &content,
            &social,
        )
        .unwrap();
        assert_abs_diff_eq!(score.nmi_xy, 0.3836885, epsilon = 1e-6);
        assert_abs_diff_eq!(score.nmi_yx, 0.31127812445913283, epsilon = 1e-9);
        assert_eq!(score.nodes, 4);
        assert_eq!(score.content_comms, 2);
        assert_eq!(score.social_comms, 2);
    }
}
