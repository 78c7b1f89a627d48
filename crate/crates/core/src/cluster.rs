//! Partitions of mention ids and greedy merging of scored pairs.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("mention `{0}` appears in more than one cluster")]
    Overlap(String),
    #[error("pair `{pair_id}` references mention `{mention}` outside the universe")]
    OutsideUniverse { pair_id: String, mention: String },
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
}

/// A partition of a mention-id universe. Singletons are explicit clusters.
///
/// Clusters are kept in canonical order: members sorted, clusters ordered by
/// their smallest member, so equal partitions compare and serialize equal.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ClusterSet {
    clusters: Vec<Vec<String>>,
    universe: BTreeSet<String>,
}

impl ClusterSet {
    /// Builds a partition from disjoint clusters; empty clusters are dropped.
    ///
    /// Panics if a mention occurs twice. Use [`ClusterSet::try_from_clusters`]
    /// for untrusted input.
    pub fn from_clusters<I, C>(clusters: I) -> Self
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = String>,
    {
        Self::try_from_clusters(clusters).expect("clusters must be disjoint")
    }

    pub fn try_from_clusters<I, C>(clusters: I) -> Result<Self, ClusterError>
    where
        I: IntoIterator<Item = C>,
        C: IntoIterator<Item = String>,
    {
        let mut universe = BTreeSet::new();
        let mut out = Vec::new();
        for cluster in clusters {
            let mut members: Vec<String> = Vec::new();
            for m in cluster {
                if !universe.insert(m.clone()) {
                    return Err(ClusterError::Overlap(m));
                }
                members.push(m);
            }
            if !members.is_empty() {
                members.sort();
                out.push(members);
            }
        }
        out.sort();
        Ok(ClusterSet {
            clusters: out,
            universe,
        })
    }

    /// Every mention of `universe` as its own cluster.
    pub fn singletons<I: IntoIterator<Item = String>>(universe: I) -> Self {
        Self::from_clusters(universe.into_iter().map(|m| vec![m]))
    }

    /// Adds any mention of `universe` not yet covered as a singleton.
    pub fn with_universe<'a, I: IntoIterator<Item = &'a String>>(mut self, universe: I) -> Self {
        for m in universe {
            if self.universe.insert(m.clone()) {
                self.clusters.push(vec![m.clone()]);
            }
        }
        self.clusters.sort();
        self
    }

    pub fn clusters(&self) -> &[Vec<String>] {
        &self.clusters
    }

    pub fn universe(&self) -> &BTreeSet<String> {
        &self.universe
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    /// Map from mention id to the index of its cluster.
    pub fn membership(&self) -> HashMap<&str, usize> {
        let mut map = HashMap::with_capacity(self.universe.len());
        for (idx, c) in self.clusters.iter().enumerate() {
            for m in c {
                map.insert(m.as_str(), idx);
            }
        }
        map
    }

    /// Union of two partitions over disjoint universes.
    pub fn union(self, other: ClusterSet) -> Result<ClusterSet, ClusterError> {
        Self::try_from_clusters(self.clusters.into_iter().chain(other.clusters))
    }

    /// True if every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &ClusterSet) -> bool {
        let owner = coarser.membership();
        self.clusters.iter().all(|c| {
            let first = owner.get(c[0].as_str());
            first.is_some() && c.iter().all(|m| owner.get(m.as_str()) == first)
        })
    }
}

#[derive(Serialize, Deserialize)]
struct ClusterSetWire {
    clusters: Vec<Vec<String>>,
}

impl Serialize for ClusterSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        ClusterSetWire {
            clusters: self.clusters.clone(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for ClusterSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let wire = ClusterSetWire::deserialize(deserializer)?;
        ClusterSet::try_from_clusters(wire.clusters).map_err(serde::de::Error::custom)
    }
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns true if `a` and `b` were in different sets.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// A pair score as consumed by clustering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEdge {
    pub pair_id: String,
    pub first: String,
    pub second: String,
    pub score: f64,
}

pub const DEFAULT_THRESHOLD: f64 = 0.5;

/// Merges mentions greedily over edges scoring at least `threshold`.
///
/// Edges are visited by descending score, ties by ascending pair id; each
/// accepted edge joins the clusters currently holding its endpoints.
/// Mentions touched by no accepted edge stay singletons.
pub fn greedy_merge(
    scored: &[ScoredEdge],
    threshold: f64,
    universe: &BTreeSet<String>,
) -> Result<ClusterSet, ClusterError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ClusterError::Threshold(threshold));
    }
    let index: HashMap<&str, usize> = universe
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let mut edges = Vec::with_capacity(scored.len());
    for e in scored {
        let lookup = |m: &String| {
            index
                .get(m.as_str())
                .copied()
                .ok_or_else(|| ClusterError::OutsideUniverse {
                    pair_id: e.pair_id.clone(),
                    mention: m.clone(),
                })
        };
        let (a, b) = (lookup(&e.first)?, lookup(&e.second)?);
        if e.score >= threshold {
            edges.push((e, a, b));
        }
    }
    edges.sort_by(|(x, ..), (y, ..)| {
        y.score
            .partial_cmp(&x.score)
            .unwrap_or(Ordering::Equal)
            .then_with(|| x.pair_id.cmp(&y.pair_id))
    });

    let mut uf = UnionFind::new(universe.len());
    for (_, a, b) in edges {
        uf.union(a, b);
    }
    let names: Vec<&String> = universe.iter().collect();
    let mut groups: BTreeMap<usize, Vec<String>> = BTreeMap::new();
    for (i, name) in names.iter().enumerate() {
        let root = uf.find(i);
        groups.entry(root).or_default().push((*name).clone());
    }
    Ok(ClusterSet::from_clusters(groups.into_values()))
}

/// Edges and mentions of a single topic.
#[derive(Debug, Clone, Default)]
pub struct TopicEdges {
    pub universe: BTreeSet<String>,
    pub edges: Vec<ScoredEdge>,
}

/// Runs [`greedy_merge`] inside each topic and unions the results.
///
/// An edge whose endpoints are not both in its topic's universe is rejected.
pub fn cluster_within_topics(
    by_topic: &BTreeMap<String, TopicEdges>,
    threshold: f64,
) -> Result<ClusterSet, ClusterError> {
    let mut out = ClusterSet::default();
    for topic in by_topic.values() {
        let part = greedy_merge(&topic.edges, threshold, &topic.universe)?;
        out = out.union(part)?;
    }
    Ok(out)
}
