//! Discourse windows and nearest-neighbour mention-pair datasets.

mod stopwords;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, CorpusError, Mention, Split};

pub use stopwords::{is_stopword, STOPWORDS};

pub const DEFAULT_WINDOW: usize = 2;
pub const DEFAULT_K_TRAIN: usize = 15;
pub const DEFAULT_K_INFER: usize = 5;

#[derive(Debug, Error)]
pub enum PairingError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("k must be at least 1")]
    ZeroK,
}

/// Up to `2w + 1` sentences around a mention, truncated at document edges.
///
/// `trigger_span` is a character (Unicode scalar) range into `center`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscourseWindow {
    pub mention_id: String,
    pub prefix: Vec<String>,
    pub center: String,
    pub suffix: Vec<String>,
    pub w: usize,
    pub trigger: String,
    pub trigger_span: (usize, usize),
    pub head_lemma: String,
}

impl DiscourseWindow {
    /// All sentences joined by single spaces.
    pub fn text(&self) -> String {
        self.sentences().collect::<Vec<_>>().join(" ")
    }

    pub fn sentences(&self) -> impl Iterator<Item = &str> {
        self.prefix
            .iter()
            .map(String::as_str)
            .chain(std::iter::once(self.center.as_str()))
            .chain(self.suffix.iter().map(String::as_str))
    }

    /// Trigger character span within [`DiscourseWindow::text`].
    pub fn text_trigger_span(&self) -> (usize, usize) {
        let offset: usize = self.prefix.iter().map(|s| s.chars().count() + 1).sum();
        (offset + self.trigger_span.0, offset + self.trigger_span.1)
    }

    /// Renders the window with `<s>`/`</s>` around every sentence.
    pub fn marked(&self) -> String {
        self.sentences().map(|s| format!("<s>{s}</s>")).collect()
    }
}

/// Character span of `needle` in `haystack`, case-insensitive, first occurrence.
pub fn find_char_span(haystack: &str, needle: &str) -> Option<(usize, usize)> {
    if needle.is_empty() {
        return None;
    }
    let hay: Vec<char> = haystack.chars().flat_map(char::to_lowercase).collect();
    let pat: Vec<char> = needle.chars().flat_map(char::to_lowercase).collect();
    // Lowercasing can change char counts for a few scripts; fall back to exact search there.
    if hay.len() != haystack.chars().count() || pat.len() != needle.chars().count() {
        let byte = haystack.find(needle)?;
        let start = haystack[..byte].chars().count();
        return Some((start, start + needle.chars().count()));
    }
    hay.windows(pat.len())
        .position(|w| w == pat.as_slice())
        .map(|start| (start, start + pat.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairLabel {
    Coref,
    NotCoref,
}

impl PairLabel {
    pub fn negate(self) -> Self {
        match self {
            PairLabel::Coref => PairLabel::NotCoref,
            PairLabel::NotCoref => PairLabel::Coref,
        }
    }

    pub fn is_coref(self) -> bool {
        self == PairLabel::Coref
    }
}

impl fmt::Display for PairLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PairLabel::Coref => "coref",
            PairLabel::NotCoref => "not_coref",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionPair {
    pub pair_id: String,
    pub first: DiscourseWindow,
    pub second: DiscourseWindow,
    pub label: PairLabel,
    /// Neighbour rank of `second` for anchor `first` (0 = nearest).
    #[serde(default)]
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDataset {
    pub pairs: Vec<MentionPair>,
    pub k_train: usize,
    pub k_infer: usize,
}

/// Builds the window of `mention_id` with radius `w`.
pub fn extract_window(corpus: &Corpus, mention_id: &str, w: usize) -> Result<DiscourseWindow, CorpusError> {
    let mention = corpus.mention(mention_id)?;
    let doc = corpus.document(&mention.doc_id)?;
    let i = mention.sent_idx;
    let lo = i.saturating_sub(w);
    let hi = (i + w + 1).min(doc.sentences.len());
    let text = |idx: usize| doc.sentences[idx].text();

    let tokens = &doc.sentences[i].tokens;
    let (start, end) = mention.trigger_span;
    let char_start: usize = tokens[..start].iter().map(|t| t.chars().count() + 1).sum();
    let char_end = char_start + mention.trigger_text.chars().count();
    debug_assert!(end <= tokens.len());

    Ok(DiscourseWindow {
        mention_id: mention.mention_id.clone(),
        prefix: (lo..i).map(text).collect(),
        center: text(i),
        suffix: (i + 1..hi).map(text).collect(),
        w,
        trigger: mention.trigger_text.clone(),
        trigger_span: (char_start, char_end),
        head_lemma: mention.head_lemma.clone(),
    })
}

/// A similarity between two mentions; larger means closer.
pub trait MentionSimilarity: Sync {
    fn similarity(&self, a: &Mention, b: &Mention) -> f64;
}

/// Number of distinct content tokens shared by the two mention windows.
///
/// Tokens are lowercased and stripped of surrounding punctuation; stopwords
/// and empty tokens are ignored.
pub struct TokenOverlap {
    sets: HashMap<String, Vec<u32>>,
}

impl TokenOverlap {
    pub fn new(corpus: &Corpus, w: usize) -> Self {
        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut sets = HashMap::with_capacity(corpus.mentions.len());
        for m in corpus.mentions.values() {
            let doc = &corpus.documents[&m.doc_id];
            let lo = m.sent_idx.saturating_sub(w);
            let hi = (m.sent_idx + w + 1).min(doc.sentences.len());
            let mut ids: Vec<u32> = doc.sentences[lo..hi]
                .iter()
                .flat_map(|s| s.tokens.iter())
                .filter_map(|t| content_token(t))
                .map(|t| {
                    let next = vocab.len() as u32;
                    *vocab.entry(t).or_insert(next)
                })
                .collect();
            ids.sort_unstable();
            ids.dedup();
            sets.insert(m.mention_id.clone(), ids);
        }
        TokenOverlap { sets }
    }
}

/// Normalised content form of a token, or `None` for stopwords and punctuation.
pub fn content_token(token: &str) -> Option<String> {
    let t = token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase();
    (!t.is_empty() && !is_stopword(&t)).then_some(t)
}

impl MentionSimilarity for TokenOverlap {
    fn similarity(&self, a: &Mention, b: &Mention) -> f64 {
        let (Some(x), Some(y)) = (self.sets.get(&a.mention_id), self.sets.get(&b.mention_id)) else {
            return 0.0;
        };
        let (mut i, mut j, mut shared) = (0, 0, 0usize);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    shared += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        shared as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RetrievalScope {
    #[default]
    WithinTopic,
    CorpusWide,
}

impl FromStr for RetrievalScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "within-topic" | "topic" => Ok(RetrievalScope::WithinTopic),
            "corpus-wide" | "corpus" => Ok(RetrievalScope::CorpusWide),
            other => Err(format!("unknown retrieval scope `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbors {
    /// Neighbour ids with their similarity, best first.
    pub ranked: Vec<(String, f64)>,
    /// Fewer than `k` candidates were available.
    pub short: bool,
}

/// The `k` mentions closest to `anchor`, excluding the anchor itself.
///
/// Ordering is by descending similarity, ties broken by ascending mention id,
/// so the result does not depend on corpus insertion order.
pub fn retrieve_nearest(
    corpus: &Corpus,
    anchor: &str,
    k: usize,
    sim: &dyn MentionSimilarity,
    scope: RetrievalScope,
) -> Result<Neighbors, PairingError> {
    if k == 0 {
        return Err(PairingError::ZeroK);
    }
    let anchor_m = corpus.mention(anchor)?;
    let topic = corpus.topic_of(anchor_m);
    let mut scored: Vec<(String, f64)> = corpus
        .mentions
        .values()
        .filter(|m| m.mention_id != anchor_m.mention_id)
        .filter(|m| scope == RetrievalScope::CorpusWide || corpus.topic_of(m) == topic)
        .map(|m| (m.mention_id.clone(), sim.similarity(anchor_m, m)))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    let short = scored.len() < k;
    scored.truncate(k);
    Ok(Neighbors { ranked: scored, short })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub w: usize,
    pub k_train: usize,
    pub k_infer: usize,
    pub scope: RetrievalScope,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            w: DEFAULT_WINDOW,
            k_train: DEFAULT_K_TRAIN,
            k_infer: DEFAULT_K_INFER,
            scope: RetrievalScope::WithinTopic,
        }
    }
}

impl PairingConfig {
    /// Neighbour count for the corpus split: `k_train` for train, `k_infer` otherwise.
    pub fn k_for(&self, split: Split) -> usize {
        match split {
            Split::Train => self.k_train,
            Split::Dev | Split::Test => self.k_infer,
        }
    }
}

pub fn pair_id(first: &str, second: &str) -> String {
    format!("{first}~{second}")
}

/// One pair per (anchor, neighbour), anchors in ascending id order.
pub fn build_pair_dataset(
    corpus: &Corpus,
    config: &PairingConfig,
    sim: &dyn MentionSimilarity,
) -> Result<PairDataset, PairingError> {
    let k = config.k_for(corpus.split);
    let anchors: Vec<&Mention> = corpus.mentions.values().collect();
    let per_anchor: Vec<Result<Vec<MentionPair>, PairingError>> = anchors
        .par_iter()
        .map(|anchor| {
            let neighbors = retrieve_nearest(corpus, &anchor.mention_id, k, sim, config.scope)?;
            if neighbors.short {
                log::debug!(
                    "anchor {} has only {} candidates (k = {k})",
                    anchor.mention_id,
                    neighbors.ranked.len()
                );
            }
            let first = extract_window(corpus, &anchor.mention_id, config.w)?;
            neighbors
                .ranked
                .iter()
                .enumerate()
                .map(|(rank, (other, _))| {
                    let other_m = corpus.mention(other)?;
                    let label = if other_m.gold_cluster_id == anchor.gold_cluster_id {
                        PairLabel::Coref
                    } else {
                        PairLabel::NotCoref
                    };
                    Ok(MentionPair {
                        pair_id: pair_id(&anchor.mention_id, other),
                        first: first.clone(),
                        second: extract_window(corpus, other, config.w)?,
                        label,
                        rank,
                    })
                })
                .collect()
        })
        .collect();
    let mut pairs = Vec::new();
    for chunk in per_anchor {
        pairs.extend(chunk?);
    }
    Ok(PairDataset {
        pairs,
        k_train: config.k_train,
        k_infer: config.k_infer,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::parse_corpus;

    fn corpus_from(docs: &[(&str, &str, Vec<&str>)], mentions: &[(&str, &str, usize, (usize, usize), &str)]) -> Corpus {
        let mut lines = Vec::new();
        for (id, topic, sents) in docs {
            let sentences: Vec<Vec<&str>> = sents.iter().map(|s| s.split(' ').collect()).collect();
            lines.push(
                serde_json::json!({"kind":"doc","doc_id":id,"topic_id":topic,"subtopic_id":topic,"sentences":sentences})
                    .to_string(),
            );
        }
        for (id, doc, sent, span, cluster) in mentions {
            lines.push(
                serde_json::json!({"kind":"mention","mention_id":id,"doc_id":doc,"sent_idx":sent,
                    "span":[span.0, span.1],"head_lemma":"x","gold_cluster_id":cluster})
                .to_string(),
            );
        }
        parse_corpus(&lines.join("\n"), Split::Train).unwrap()
    }

    #[test]
    fn window_truncates_at_single_sentence_document() {
        let c = corpus_from(&[("d", "t", vec!["A big fire ."])], &[("m", "d", 0, (2, 3), "c")]);
        let w = extract_window(&c, "m", 2).unwrap();
        assert!(w.prefix.is_empty() && w.suffix.is_empty());
        assert_eq!(w.center, "A big fire .");
        assert_eq!(w.trigger_span, (6, 10));
        assert_eq!(&w.center[6..10], "fire");
    }

    #[test]
    fn interior_window_and_zero_radius() {
        let sents: Vec<String> = (0..20).map(|i| format!("s{i} word")).collect();
        let refs: Vec<&str> = sents.iter().map(String::as_str).collect();
        let c = corpus_from(&[("d", "t", refs)], &[("m", "d", 5, (1, 2), "c")]);
        let w = extract_window(&c, "m", 2).unwrap();
        assert_eq!(w.prefix, vec!["s3 word", "s4 word"]);
        assert_eq!(w.suffix, vec!["s6 word", "s7 word"]);
        let w0 = extract_window(&c, "m", 0).unwrap();
        assert!(w0.prefix.is_empty() && w0.suffix.is_empty());
        assert_eq!(w0.center, "s5 word");
        assert!(matches!(extract_window(&c, "zz", 1), Err(CorpusError::NotFound { .. })));
    }

    #[test]
    fn text_span_points_at_trigger() {
        let c = corpus_from(
            &[("d", "t", vec!["Zero one .", "The quake struck today .", "Last ."])],
            &[("m", "d", 1, (1, 3), "c")],
        );
        let w = extract_window(&c, "m", 1).unwrap();
        let text = w.text();
        let (s, e) = w.text_trigger_span();
        let got: String = text.chars().skip(s).take(e - s).collect();
        assert_eq!(got, "quake struck");
        assert_eq!(w.marked(), "<s>Zero one .</s><s>The quake struck today .</s><s>Last .</s>");
    }

    #[test]
    fn overlap_ranking_matches_hand_count() {
        // anchor shares {storm, coast, harbor} with m2 and {storm} with m3.
        let c = corpus_from(
            &[
                ("d1", "t", vec!["the storm hit the coast near the harbor"]),
                ("d2", "t", vec!["a storm battered coast and harbor"]),
                ("d3", "t", vec!["storm warnings issued"]),
            ],
            &[("a", "d1", 0, (1, 2), "c1"), ("m2", "d2", 0, (1, 2), "c1"), ("m3", "d3", 0, (0, 1), "c2")],
        );
        let sim = TokenOverlap::new(&c, 2);
        let a = c.mention("a").unwrap();
        assert_eq!(sim.similarity(a, c.mention("m2").unwrap()), 3.0);
        assert_eq!(sim.similarity(a, c.mention("m3").unwrap()), 1.0);
        let n = retrieve_nearest(&c, "a", 5, &sim, RetrievalScope::WithinTopic).unwrap();
        let ids: Vec<&str> = n.ranked.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["m2", "m3"]);
        assert!(n.short);
        assert!(matches!(
            retrieve_nearest(&c, "a", 0, &sim, RetrievalScope::WithinTopic),
            Err(PairingError::ZeroK)
        ));
    }

    #[test]
    fn within_topic_scope_excludes_other_topics() {
        let c = corpus_from(
            &[("d1", "t1", vec!["fire fire"]), ("d2", "t2", vec!["fire fire"]), ("d3", "t1", vec!["rain"])],
            &[("a", "d1", 0, (0, 1), "c"), ("b", "d2", 0, (0, 1), "c"), ("c", "d3", 0, (0, 1), "d")],
        );
        let sim = TokenOverlap::new(&c, 0);
        let within = retrieve_nearest(&c, "a", 3, &sim, RetrievalScope::WithinTopic).unwrap();
        assert_eq!(within.ranked.len(), 1);
        assert_eq!(within.ranked[0].0, "c");
        let wide = retrieve_nearest(&c, "a", 3, &sim, RetrievalScope::CorpusWide).unwrap();
        assert_eq!(wide.ranked[0].0, "b");
    }

    #[test]
    fn one_cluster_gives_all_coref_and_n_times_k_pairs() {
        let docs = vec![("d", "t", vec!["a b c d"])];
        let mentions: Vec<_> = (0..4).map(|i| (["w", "x", "y", "z"][i], "d", 0, (i, i + 1), "c")).collect();
        let c = corpus_from(&docs, &mentions);
        let sim = TokenOverlap::new(&c, 0);
        let cfg = PairingConfig { w: 0, k_train: 3, k_infer: 1, scope: RetrievalScope::WithinTopic };
        let ds = build_pair_dataset(&c, &cfg, &sim).unwrap();
        assert_eq!(ds.pairs.len(), 4 * 3);
        assert!(ds.pairs.iter().all(|p| p.label == PairLabel::Coref));
        let mut ids: Vec<&str> = ds.pairs.iter().map(|p| p.pair_id.as_str()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 12);
    }

    #[test]
    fn char_span_search_is_case_insensitive() {
        assert_eq!(find_char_span("Prince Departed from", "departed"), Some((7, 15)));
        assert_eq!(find_char_span("naïve fire", "fire"), Some((6, 10)));
        assert_eq!(find_char_span("abc", ""), None);
    }
}
