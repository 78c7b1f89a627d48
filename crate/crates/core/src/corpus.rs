//! Mention-annotated multi-document corpora.
//!
//! The on-disk format is JSON-Lines with two record kinds:
//!
//! ```text
//! {"kind":"doc","doc_id":"d1","topic_id":"t1","subtopic_id":"t1a","sentences":[["A","fire","broke","out."]]}
//! {"kind":"mention","mention_id":"m1","doc_id":"d1","sent_idx":0,"span":[1,2],"head_lemma":"fire","gold_cluster_id":"c1"}
//! ```
//!
//! Records may appear in any order. The trigger text of a mention is derived
//! from the sentence tokens and is never stored.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterSet;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read corpus {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("corpus integrity violated: {message} (offending ids: {})", ids.join(", "))]
    Integrity { message: String, ids: Vec<String> },
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
    #[error("unknown split `{0}` (expected train, dev or test)")]
    UnknownSplit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl FromStr for Split {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" | "validation" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(CorpusError::UnknownSplit(s.to_string())),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentenceRec {
    pub sent_idx: usize,
    pub tokens: Vec<String>,
}

impl SentenceRec {
    /// Tokens joined by single spaces.
    pub fn text(&self) -> String {
        self.tokens.join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub topic_id: String,
    pub subtopic_id: String,
    pub sentences: Vec<SentenceRec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mention {
    pub mention_id: String,
    pub doc_id: String,
    pub sent_idx: usize,
    /// Token range `[start, end)` within the sentence.
    pub trigger_span: (usize, usize),
    pub trigger_text: String,
    pub head_lemma: String,
    pub gold_cluster_id: String,
}

/// An immutable, fully indexed corpus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub split: Split,
    pub documents: BTreeMap<String, Document>,
    pub mentions: BTreeMap<String, Mention>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Doc {
        doc_id: String,
        topic_id: String,
        subtopic_id: String,
        sentences: Vec<Vec<String>>,
    },
    Mention {
        mention_id: String,
        doc_id: String,
        sent_idx: usize,
        span: (usize, usize),
        head_lemma: String,
        gold_cluster_id: String,
    },
}

struct RawMention {
    mention_id: String,
    doc_id: String,
    sent_idx: usize,
    span: (usize, usize),
    head_lemma: String,
    gold_cluster_id: String,
}

/// Loads a corpus file and enforces every structural invariant.
pub fn load_corpus(path: &Path, split: Split) -> Result<Corpus, CorpusError> {
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_corpus(&text, split)
}

/// Parses corpus JSON-Lines text. Identical input always yields an identical corpus.
pub fn parse_corpus(text: &str, split: Split) -> Result<Corpus, CorpusError> {
    let mut documents = BTreeMap::new();
    let mut raw_mentions: Vec<RawMention> = Vec::new();
    let mut seen_mentions = BTreeSet::new();

    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(line).map_err(|e| CorpusError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        match record {
            Record::Doc {
                doc_id,
                topic_id,
                subtopic_id,
                sentences,
            } => {
                if documents.contains_key(&doc_id) {
                    return Err(CorpusError::Integrity {
                        message: format!("duplicate document id at line {line_no}"),
                        ids: vec![doc_id],
                    });
                }
                if let Some(empty) = sentences.iter().position(Vec::is_empty) {
                    return Err(CorpusError::Integrity {
                        message: format!("sentence {empty} has no tokens (line {line_no})"),
                        ids: vec![doc_id],
                    });
                }
                let sentences = sentences
                    .into_iter()
                    .enumerate()
                    .map(|(sent_idx, tokens)| SentenceRec { sent_idx, tokens })
                    .collect();
                documents.insert(
                    doc_id.clone(),
                    Document {
                        doc_id,
                        topic_id,
                        subtopic_id,
                        sentences,
                    },
                );
            }
            Record::Mention {
                mention_id,
                doc_id,
                sent_idx,
                span,
                head_lemma,
                gold_cluster_id,
            } => {
                if !seen_mentions.insert(mention_id.clone()) {
                    return Err(CorpusError::Integrity {
                        message: format!("duplicate mention id at line {line_no}"),
                        ids: vec![mention_id],
                    });
                }
                raw_mentions.push(RawMention {
                    mention_id,
                    doc_id,
                    sent_idx,
                    span,
                    head_lemma,
                    gold_cluster_id,
                });
            }
        }
    }

    let mut dangling = Vec::new();
    let mut out_of_bounds = Vec::new();
    let mut mentions = BTreeMap::new();
    for raw in raw_mentions {
        let Some(sentence) = documents
            .get(&raw.doc_id)
            .and_then(|d: &Document| d.sentences.get(raw.sent_idx))
        else {
            dangling.push(raw.mention_id);
            continue;
        };
        let (start, end) = raw.span;
        if start >= end || end > sentence.tokens.len() {
            out_of_bounds.push(raw.mention_id);
            continue;
        }
        let trigger_text = sentence.tokens[start..end].join(" ");
        mentions.insert(
            raw.mention_id.clone(),
            Mention {
                mention_id: raw.mention_id,
                doc_id: raw.doc_id,
                sent_idx: raw.sent_idx,
                trigger_span: raw.span,
                trigger_text,
                head_lemma: raw.head_lemma,
                gold_cluster_id: raw.gold_cluster_id,
            },
        );
    }
    if !dangling.is_empty() {
        return Err(CorpusError::Integrity {
            message: "mentions reference unknown documents or sentences".into(),
            ids: dangling,
        });
    }
    if !out_of_bounds.is_empty() {
        return Err(CorpusError::Integrity {
            message: "trigger spans are empty or exceed sentence bounds".into(),
            ids: out_of_bounds,
        });
    }

    Ok(Corpus {
        split,
        documents,
        mentions,
    })
}

impl Corpus {
    pub fn mention(&self, mention_id: &str) -> Result<&Mention, CorpusError> {
        self.mentions.get(mention_id).ok_or_else(|| CorpusError::NotFound {
            kind: "mention",
            id: mention_id.to_string(),
        })
    }

    pub fn document(&self, doc_id: &str) -> Result<&Document, CorpusError> {
        self.documents.get(doc_id).ok_or_else(|| CorpusError::NotFound {
            kind: "document",
            id: doc_id.to_string(),
        })
    }

    /// Topic of the document a mention belongs to.
    pub fn topic_of(&self, mention: &Mention) -> &str {
        self.documents
            .get(&mention.doc_id)
            .map(|d| d.topic_id.as_str())
            .unwrap_or_default()
    }

    pub fn topics(&self) -> BTreeSet<&str> {
        self.documents.values().map(|d| d.topic_id.as_str()).collect()
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.values().map(|d| d.sentences.len()).sum()
    }

    /// Mention ids grouped by topic, in ascending id order within each topic.
    pub fn mentions_by_topic(&self) -> BTreeMap<String, Vec<String>> {
        let mut out: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for m in self.mentions.values() {
            out.entry(self.topic_of(m).to_string())
                .or_default()
                .push(m.mention_id.clone());
        }
        out
    }

    /// Mentions in reading order: document id, sentence index, span start.
    pub fn mentions_in_document_order(&self, doc_id: &str) -> Vec<&Mention> {
        let mut ms: Vec<&Mention> = self
            .mentions
            .values()
            .filter(|m| m.doc_id == doc_id)
            .collect();
        ms.sort_by(|a, b| {
            (a.sent_idx, a.trigger_span.0, &a.mention_id).cmp(&(
                b.sent_idx,
                b.trigger_span.0,
                &b.mention_id,
            ))
        });
        ms
    }
}

/// Expected counts for one split, e.g. a row of a published statistics table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitStats {
    pub documents: usize,
    pub sentences: usize,
    pub mentions: usize,
}

impl SplitStats {
    pub fn of(corpus: &Corpus) -> Self {
        SplitStats {
            documents: corpus.documents.len(),
            sentences: corpus.sentence_count(),
            mentions: corpus.mentions.len(),
        }
    }
}

/// Published split sizes for the three standard cross-document benchmarks.
pub fn benchmark_stats(dataset: &str, split: Split) -> Option<SplitStats> {
    let (documents, sentences, mentions) = match (dataset.to_ascii_lowercase().as_str(), split) {
        ("ecb+" | "ecbplus", Split::Train) => (574, 9366, 3808),
        ("ecb+" | "ecbplus", Split::Dev) => (196, 2837, 1245),
        ("ecb+" | "ecbplus", Split::Test) => (206, 3505, 1780),
        ("fcc", Split::Train) => (207, 7018, 1604),
        ("fcc", Split::Dev) => (117, 3648, 680),
        ("fcc", Split::Test) => (127, 4274, 1074),
        ("gvc", Split::Train) => (358, 7607, 5313),
        ("gvc", Split::Dev) => (78, 1325, 977),
        ("gvc", Split::Test) => (74, 1360, 1008),
        _ => return None,
    };
    Some(SplitStats {
        documents,
        sentences,
        mentions,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatCheck {
    pub field: String,
    pub expected: usize,
    pub actual: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<StatCheck>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

/// Compares corpus counts with an expected row. Mismatches are reported, never raised.
pub fn validate_split_stats(corpus: &Corpus, expected: &SplitStats) -> ValidationReport {
    let actual = SplitStats::of(corpus);
    let check = |field: &str, expected: usize, actual: usize| StatCheck {
        field: field.to_string(),
        expected,
        actual,
        pass: expected == actual,
    };
    ValidationReport {
        checks: vec![
            check("documents", expected.documents, actual.documents),
            check("sentences", expected.sentences, actual.sentences),
            check("mentions", expected.mentions, actual.mentions),
        ],
    }
}

/// Partitions the in-scope mentions by gold cluster id. Singletons are kept.
pub fn gold_clustering(corpus: &Corpus, topic_scope: Option<&str>) -> Result<ClusterSet, CorpusError> {
    if let Some(topic) = topic_scope {
        if !corpus.documents.values().any(|d| d.topic_id == topic) {
            return Err(CorpusError::NotFound {
                kind: "topic",
                id: topic.to_string(),
            });
        }
    }
    let mut groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for m in corpus.mentions.values() {
        if topic_scope.is_some_and(|t| corpus.topic_of(m) != t) {
            continue;
        }
        groups
            .entry(m.gold_cluster_id.as_str())
            .or_default()
            .push(m.mention_id.clone());
    }
    Ok(ClusterSet::from_clusters(groups.into_values()))
}
