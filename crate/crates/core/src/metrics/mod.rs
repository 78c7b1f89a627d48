//! Coreference metrics (MUC, B³, CEAF_e, LEA, CoNLL), pairwise reports with
//! task completeness, and parsers for LLM evaluation transcripts.
//!
//! A zero denominator yields 0.0, as in the reference CoNLL scorer. Two empty
//! clusterings therefore score 0, not 1.

mod assignment;
pub mod doc_template;
pub mod pairwise;

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterSet;

pub use assignment::max_weight_assignment;
pub use doc_template::{parse_doc_template, DocTemplateAnnotation, DocTemplateError, GoldDocMention, LlmErrorTaxonomy};
pub use pairwise::{pairwise_report, parse_pairwise_cot, CotLabel, CotParse, PairPrediction, PairwiseReport};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("key and response cover different mentions ({only_key} only in key, {only_response} only in response)")]
    UniverseMismatch { only_key: usize, only_response: usize },
    #[error("prediction for unknown pair `{0}`")]
    UnknownPair(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(recall: f64, precision: f64) -> Self {
        Prf {
            recall,
            precision,
            f1: f1(recall, precision),
        }
    }
}

pub fn f1(recall: f64, precision: f64) -> f64 {
    if recall + precision == 0.0 {
        0.0
    } else {
        2.0 * recall * precision / (recall + precision)
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn check_universe(key: &ClusterSet, response: &ClusterSet) -> Result<(), MetricError> {
    if key.universe() == response.universe() {
        return Ok(());
    }
    Err(MetricError::UniverseMismatch {
        only_key: key.universe().difference(response.universe()).count(),
        only_response: response.universe().difference(key.universe()).count(),
    })
}

/// Sizes of the intersections of `cluster` with each cluster of `other`.
fn overlaps(cluster: &[String], other: &HashMap<&str, usize>) -> HashMap<usize, usize> {
    let mut counts = HashMap::new();
    for m in cluster {
        if let Some(&c) = other.get(m.as_str()) {
            *counts.entry(c).or_insert(0) += 1;
        }
    }
    counts
}

fn muc_recall(key: &ClusterSet, response: &ClusterSet) -> f64 {
    let owner = response.membership();
    let (mut num, mut den) = (0usize, 0usize);
    for k in key.clusters() {
        let parts = overlaps(k, &owner);
        // Mentions absent from the response each form their own part.
        let covered: usize = parts.values().sum();
        let partitions = parts.len() + (k.len() - covered);
        num += k.len() - partitions;
        den += k.len() - 1;
    }
    ratio(num as f64, den as f64)
}

pub fn muc(key: &ClusterSet, response: &ClusterSet) -> Result<Prf, MetricError> {
    check_universe(key, response)?;
    Ok(Prf::new(muc_recall(key, response), muc_recall(response, key)))
}

fn b_cubed_recall(key: &ClusterSet, response: &ClusterSet) -> f64 {
    let owner = response.membership();
    let mut total = 0.0;
    let mut n = 0usize;
    for k in key.clusters() {
        for (_, shared) in overlaps(k, &owner) {
            // Each of the `shared` mentions scores shared / |k|.
            total += (shared * shared) as f64 / k.len() as f64;
        }
        n += k.len();
    }
    ratio(total, n as f64)
}

pub fn b_cubed(key: &ClusterSet, response: &ClusterSet) -> Result<Prf, MetricError> {
    check_universe(key, response)?;
    Ok(Prf::new(b_cubed_recall(key, response), b_cubed_recall(response, key)))
}

/// φ₄(K, R) = 2|K ∩ R| / (|K| + |R|).
pub fn phi4(k: &[String], r: &[String]) -> f64 {
    let ks: BTreeSet<&str> = k.iter().map(String::as_str).collect();
    let shared = r.iter().filter(|m| ks.contains(m.as_str())).count();
    ratio(2.0 * shared as f64, (k.len() + r.len()) as f64)
}

pub fn ceaf_e(key: &ClusterSet, response: &ClusterSet) -> Result<Prf, MetricError> {
    check_universe(key, response)?;
    let weights: Vec<Vec<f64>> = key
        .clusters()
        .iter()
        .map(|k| response.clusters().iter().map(|r| phi4(k, r)).collect())
        .collect();
    let assignment = max_weight_assignment(&weights);
    let similarity: f64 = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.map(|j| weights[i][j]))
        .sum();
    Ok(Prf::new(
        ratio(similarity, key.len() as f64),
        ratio(similarity, response.len() as f64),
    ))
}

/// How LEA treats one-mention entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeaSingletons {
    /// A singleton has one self-link, resolved iff the mention is also a
    /// singleton on the other side.
    #[default]
    SelfLink,
    /// Singletons carry no weight at all.
    Exclude,
}

fn links(n: usize) -> usize {
    n * n.saturating_sub(1) / 2
}

fn lea_recall(key: &ClusterSet, response: &ClusterSet, singletons: LeaSingletons) -> f64 {
    let owner = response.membership();
    let sizes: Vec<usize> = response.clusters().iter().map(Vec::len).collect();
    let (mut num, mut den) = (0.0, 0.0);
    for k in key.clusters() {
        let resolution = if k.len() == 1 {
            match singletons {
                LeaSingletons::Exclude => continue,
                LeaSingletons::SelfLink => {
                    let single = owner.get(k[0].as_str()).is_some_and(|&c| sizes[c] == 1);
                    if single {
                        1.0
                    } else {
                        0.0
                    }
                }
            }
        } else {
            let resolved: usize = overlaps(k, &owner).values().map(|&s| links(s)).sum();
            resolved as f64 / links(k.len()) as f64
        };
        num += k.len() as f64 * resolution;
        den += k.len() as f64;
    }
    ratio(num, den)
}

pub fn lea(key: &ClusterSet, response: &ClusterSet) -> Result<Prf, MetricError> {
    lea_with(key, response, LeaSingletons::default())
}

pub fn lea_with(key: &ClusterSet, response: &ClusterSet, singletons: LeaSingletons) -> Result<Prf, MetricError> {
    check_universe(key, response)?;
    Ok(Prf::new(
        lea_recall(key, response, singletons),
        lea_recall(response, key, singletons),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_e: Prf,
    pub lea: Prf,
    pub conll_f1: f64,
}

impl MetricReport {
    /// Text table: one row per metric (R, P, F1) plus the CoNLL F1, in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<8} {:>7} {:>7} {:>7}", "metric", "R", "P", "F1");
        for (name, m) in [("MUC", self.muc), ("B3", self.b_cubed), ("CEAF_e", self.ceaf_e), ("LEA", self.lea)] {
            let _ = writeln!(
                out,
                "{:<8} {:>7.2} {:>7.2} {:>7.2}",
                name,
                m.recall * 100.0,
                m.precision * 100.0,
                m.f1 * 100.0
            );
        }
        let _ = writeln!(out, "{:<8} {:>7} {:>7} {:>7.2}", "CoNLL", "", "", self.conll_f1 * 100.0);
        out
    }
}

pub fn conll(key: &ClusterSet, response: &ClusterSet) -> Result<MetricReport, MetricError> {
    conll_with(key, response, LeaSingletons::default())
}

pub fn conll_with(key: &ClusterSet, response: &ClusterSet, singletons: LeaSingletons) -> Result<MetricReport, MetricError> {
    let muc = muc(key, response)?;
    let b_cubed = b_cubed(key, response)?;
    let ceaf_e = ceaf_e(key, response)?;
    let lea = lea_with(key, response, singletons)?;
    Ok(MetricReport {
        muc,
        b_cubed,
        ceaf_e,
        lea,
        conll_f1: (muc.f1 + b_cubed.f1 + ceaf_e.f1) / 3.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cs(clusters: &[&[&str]]) -> ClusterSet {
        ClusterSet::from_clusters(clusters.iter().map(|c| c.iter().map(|m| m.to_string()).collect::<Vec<_>>()))
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn running_example() {
        let key = cs(&[&["a", "b", "c"], &["d", "e"]]);
        let resp = cs(&[&["a", "b"], &["c", "d", "e"]]);
        let r = conll(&key, &resp).unwrap();
        close(r.muc.f1, 2.0 / 3.0);
        close(r.b_cubed.recall, 11.0 / 15.0);
        close(r.b_cubed.precision, 11.0 / 15.0);
        close(r.ceaf_e.f1, 0.8);
        close(r.lea.f1, 0.6);
        close(r.conll_f1, (2.0 / 3.0 + 11.0 / 15.0 + 0.8) / 3.0);
        assert!(r.to_table().contains("CoNLL"));
    }

    #[test]
    fn identity_and_degenerate() {
        let key = cs(&[&["a", "b", "c"], &["d", "e"]]);
        let r = conll(&key, &key).unwrap();
        close(r.conll_f1, 1.0);
        close(r.lea.f1, 1.0);
        let singles = cs(&[&["a"], &["b"], &["c"]]);
        assert_eq!(muc(&singles, &singles).unwrap().recall, 0.0);
        let empty = ClusterSet::default();
        assert_eq!(conll(&empty, &empty).unwrap().conll_f1, 0.0);
    }

    #[test]
    fn singleton_response_against_one_cluster() {
        let key = cs(&[&["a", "b", "c"]]);
        let resp = cs(&[&["a"], &["b"], &["c"]]);
        let b = b_cubed(&key, &resp).unwrap();
        close(b.precision, 1.0);
        close(b.recall, 1.0 / 3.0);
    }

    #[test]
    fn lea_singleton_conventions() {
        let key = cs(&[&["a"], &["b", "c"]]);
        let resp = cs(&[&["a"], &["b", "c"]]);
        close(lea(&key, &resp).unwrap().f1, 1.0);
        let merged = cs(&[&["a", "b", "c"]]);
        // Self-link: a's entity is unresolved in recall; excluded: only {b,c} counts.
        close(lea(&key, &merged).unwrap().recall, 2.0 / 3.0);
        close(lea_with(&key, &merged, LeaSingletons::Exclude).unwrap().recall, 1.0);
    }

    #[test]
    fn universe_mismatch() {
        let key = cs(&[&["a", "b"]]);
        let resp = cs(&[&["a"], &["c"]]);
        assert_eq!(
            muc(&key, &resp),
            Err(MetricError::UniverseMismatch {
                only_key: 1,
                only_response: 1
            })
        );
    }
}
