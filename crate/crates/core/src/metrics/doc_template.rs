//! Parsing of document-template responses, where the model rewrites a
//! document with every event mention tagged as `[mention](#cluster)`.
//!
//! Tags are aligned to the gold mentions (in document order) by a longest
//! common subsequence over mention texts. From the alignment:
//! - a gold mention whose tag has an empty id is a type-1 miss,
//! - a gold mention with no aligned tag is a type-2 miss,
//! - a tag aligned to no gold mention is redundant and excluded from scoring.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterSet;

#[derive(Debug, Error, PartialEq)]
pub enum DocTemplateError {
    #[error("response is empty")]
    Unreadable,
}

/// A gold mention of the document, listed in document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldDocMention {
    pub mention_id: String,
    pub text: String,
    pub gold_cluster_id: String,
}

/// A tag found in the response, with its char span in the tag-stripped text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSpan {
    pub text: String,
    pub span: (usize, usize),
    /// Cluster id; `None` for an empty `(#)`.
    pub tag: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedMention {
    pub mention_id: String,
    /// The aligned tag, if any.
    pub tagged: Option<TaggedSpan>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocTemplateAnnotation {
    pub mentions: Vec<AnnotatedMention>,
    pub redundant: Vec<TaggedSpan>,
    /// Response clustering over the gold mentions; untagged mentions are singletons.
    pub response: ClusterSet,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmErrorTaxonomy {
    pub missing_type1: usize,
    pub missing_type2: usize,
    pub redundant: usize,
    pub wrong_prediction: usize,
}

impl LlmErrorTaxonomy {
    pub fn add(&mut self, other: &LlmErrorTaxonomy) {
        self.missing_type1 += other.missing_type1;
        self.missing_type2 += other.missing_type2;
        self.redundant += other.redundant;
        self.wrong_prediction += other.wrong_prediction;
    }
}

fn tag_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]+)\]\(\\?#([^()\s]*)\)").unwrap())
}

fn norm(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// All tags of `raw`, with spans measured in the text where tags are replaced by their contents.
pub fn extract_tags(raw: &str) -> Vec<TaggedSpan> {
    let mut out = Vec::new();
    let mut plain_chars = 0;
    let mut last = 0;
    for c in tag_re().captures_iter(raw) {
        let whole = c.get(0).unwrap();
        plain_chars += raw[last..whole.start()].chars().count();
        let text = c[1].to_string();
        let len = text.chars().count();
        let id = c[2].trim().to_string();
        out.push(TaggedSpan {
            span: (plain_chars, plain_chars + len),
            text,
            tag: (!id.is_empty()).then_some(id),
        });
        plain_chars += len;
        last = whole.end();
    }
    out
}

/// Index pairs (gold, tag) of a longest common subsequence by normalised text.
fn align(gold: &[GoldDocMention], tags: &[TaggedSpan]) -> Vec<(usize, usize)> {
    let g: Vec<String> = gold.iter().map(|m| norm(&m.text)).collect();
    let t: Vec<String> = tags.iter().map(|m| norm(&m.text)).collect();
    let (n, m) = (g.len(), t.len());
    let mut dp = vec![vec![0usize; m + 1]; n + 1];
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            dp[i][j] = if g[i] == t[j] {
                dp[i + 1][j + 1] + 1
            } else {
                dp[i + 1][j].max(dp[i][j + 1])
            };
        }
    }
    let (mut i, mut j) = (0, 0);
    let mut pairs = Vec::new();
    while i < n && j < m {
        if g[i] == t[j] && dp[i][j] == dp[i + 1][j + 1] + 1 {
            pairs.push((i, j));
            i += 1;
            j += 1;
        } else if dp[i + 1][j] >= dp[i][j + 1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    pairs
}

/// Parses one document's response against its gold mentions.
pub fn parse_doc_template(
    gold: &[GoldDocMention],
    raw: &str,
) -> Result<(DocTemplateAnnotation, LlmErrorTaxonomy), DocTemplateError> {
    if raw.trim().is_empty() {
        return Err(DocTemplateError::Unreadable);
    }
    let tags = extract_tags(raw);
    let pairs = align(gold, &tags);
    let gold_to_tag: HashMap<usize, usize> = pairs.iter().copied().collect();
    let used: HashSet<usize> = pairs.iter().map(|&(_, j)| j).collect();

    let mut errors = LlmErrorTaxonomy::default();
    let mut mentions = Vec::with_capacity(gold.len());
    let mut by_tag: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut untagged = Vec::new();
    for (i, m) in gold.iter().enumerate() {
        let tagged = gold_to_tag.get(&i).map(|&j| &tags[j]);
        match tagged.map(|t| t.tag.as_deref()) {
            Some(Some(id)) => by_tag.entry(id).or_default().push(m.mention_id.clone()),
            Some(None) => {
                errors.missing_type1 += 1;
                untagged.push(m.mention_id.clone());
            }
            None => {
                errors.missing_type2 += 1;
                untagged.push(m.mention_id.clone());
            }
        }
        mentions.push(AnnotatedMention {
            mention_id: m.mention_id.clone(),
            tagged: tagged.cloned(),
        });
    }
    let tagged_ids: HashSet<String> = by_tag.values().flatten().cloned().collect();
    let clusters: Vec<Vec<String>> = by_tag.into_values().chain(untagged.into_iter().map(|m| vec![m])).collect();
    let response = ClusterSet::from_clusters(clusters);

    let redundant: Vec<TaggedSpan> = tags
        .iter()
        .enumerate()
        .filter(|(j, _)| !used.contains(j))
        .map(|(_, t)| t.clone())
        .collect();
    errors.redundant = redundant.len();
    errors.wrong_prediction = wrong_predictions(gold, &response, &tagged_ids);

    Ok((
        DocTemplateAnnotation {
            mentions,
            redundant,
            response,
        },
        errors,
    ))
}

/// Tagged gold mentions whose predicted co-members differ from their gold
/// co-members, both restricted to tagged mentions.
fn wrong_predictions(gold: &[GoldDocMention], response: &ClusterSet, tagged: &HashSet<String>) -> usize {
    let owner = response.membership();
    gold.iter()
        .filter(|m| tagged.contains(&m.mention_id))
        .filter(|m| {
            let predicted: Vec<&str> = response.clusters()[owner[m.mention_id.as_str()]]
                .iter()
                .map(String::as_str)
                .collect();
            let mut expected: Vec<&str> = gold
                .iter()
                .filter(|o| o.gold_cluster_id == m.gold_cluster_id && tagged.contains(&o.mention_id))
                .map(|o| o.mention_id.as_str())
                .collect();
            expected.sort();
            predicted != expected
        })
        .count()
}
