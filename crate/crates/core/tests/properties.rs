//! Invariants of pairing, clustering, mixing and trigger classification.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use ecr_cad::augment::{mix_dataset, AugmentKind, AugmentedPair, AugmentationPlan};
use ecr_cad::cluster::{greedy_merge, ScoredEdge};
use ecr_cad::corpus::parse_corpus;
use ecr_cad::pairing::{build_pair_dataset, extract_window, is_stopword, PairingConfig, TokenOverlap};
use ecr_cad::triggersim::{classify_pair_triggers, HeadLemma};
use ecr_cad::{MentionPair, PairDataset, PairLabel, Split};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

fn fixture_text() -> String {
    std::fs::read_to_string(common::fixture_dir().join("corpus_fixture.jsonl")).unwrap()
}

/// Top-`k` within-topic neighbours per anchor, by brute force over the raw records.
fn brute_force_pairs(text: &str, k: usize, w: usize) -> Vec<(String, String, bool)> {
    let records: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let docs: HashMap<&str, &Value> = records
        .iter()
        .filter(|r| r["kind"] == "doc")
        .map(|r| (r["doc_id"].as_str().unwrap(), r))
        .collect();
    let mentions: Vec<&Value> = records.iter().filter(|r| r["kind"] == "mention").collect();
    let bag = |m: &Value| -> BTreeSet<String> {
        let doc = docs[m["doc_id"].as_str().unwrap()];
        let sents = doc["sentences"].as_array().unwrap();
        let i = m["sent_idx"].as_u64().unwrap() as usize;
        let lo = i.saturating_sub(w);
        let hi = (i + w + 1).min(sents.len());
        sents[lo..hi]
            .iter()
            .flat_map(|s| s.as_array().unwrap())
            .map(|t| {
                t.as_str()
                    .unwrap()
                    .trim_matches(|c: char| !c.is_alphanumeric())
                    .to_lowercase()
            })
            .filter(|t| !t.is_empty() && !is_stopword(t))
            .collect()
    };
    let topic = |m: &Value| docs[m["doc_id"].as_str().unwrap()]["topic_id"].as_str().unwrap().to_string();
    let id = |m: &Value| m["mention_id"].as_str().unwrap().to_string();
    let mut anchors = mentions.clone();
    anchors.sort_by_key(|m| id(m));
    let mut out = Vec::new();
    for a in &anchors {
        let mut scored: Vec<(usize, String, bool)> = mentions
            .iter()
            .filter(|b| id(b) != id(a) && topic(b) == topic(a))
            .map(|b| (bag(a).intersection(&bag(b)).count(), id(b), a["gold_cluster_id"] == b["gold_cluster_id"]))
            .collect();
        scored.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)));
        for (_, b, coref) in scored.into_iter().take(k) {
            out.push((id(a), b, coref));
        }
    }
    out
}

fn dataset(text: &str, k: usize) -> PairDataset {
    let corpus = parse_corpus(text, Split::Train).unwrap();
    let config = PairingConfig {
        k_train: k,
        ..PairingConfig::default()
    };
    build_pair_dataset(&corpus, &config, &TokenOverlap::new(&corpus, config.w)).unwrap()
}

#[test]
fn top_two_pairs_match_brute_force() {
    let text = fixture_text();
    let got: Vec<(String, String, bool)> = dataset(&text, 2)
        .pairs
        .iter()
        .map(|p| (p.first.mention_id.clone(), p.second.mention_id.clone(), p.label == PairLabel::Coref))
        .collect();
    assert_eq!(got, brute_force_pairs(&text, 2, 2));
}

#[test]
fn windows_stay_inside_their_document() {
    let corpus = common::fixture_corpus(Split::Train);
    for w in 0..4 {
        for m in corpus.mentions.values() {
            let win = extract_window(&corpus, &m.mention_id, w).unwrap();
            let doc = corpus.document(&m.doc_id).unwrap();
            assert!(win.prefix.len() <= w && win.suffix.len() <= w);
            assert_eq!(win.prefix.len(), m.sent_idx.min(w));
            assert_eq!(win.suffix.len(), (doc.sentences.len() - m.sent_idx - 1).min(w));
            let all: Vec<String> = doc.sentences.iter().map(|s| s.text()).collect();
            let lo = m.sent_idx - win.prefix.len();
            assert_eq!(win.sentences().collect::<Vec<_>>(), all[lo..lo + win.prefix.len() + 1 + win.suffix.len()]);
        }
    }
}

#[test]
fn labels_are_symmetric() {
    let d = dataset(&fixture_text(), 15);
    let labels: HashMap<(&str, &str), PairLabel> = d
        .pairs
        .iter()
        .map(|p| ((p.first.mention_id.as_str(), p.second.mention_id.as_str()), p.label))
        .collect();
    for ((a, b), l) in &labels {
        if let Some(r) = labels.get(&(*b, *a)) {
            assert_eq!(l, r);
        }
    }
}

#[test]
fn corpus_loading_is_pure() {
    let text = fixture_text();
    assert_eq!(parse_corpus(&text, Split::Test).unwrap(), parse_corpus(&text, Split::Test).unwrap());
}

fn edges(n: usize, raw: &[(usize, usize, u8)]) -> (BTreeSet<String>, Vec<ScoredEdge>) {
    let ids: Vec<String> = (0..n).map(|i| format!("m{i:02}")).collect();
    let edges = raw
        .iter()
        .enumerate()
        .map(|(i, &(a, b, s))| ScoredEdge {
            pair_id: format!("e{i:03}"),
            first: ids[a % n].clone(),
            second: ids[b % n].clone(),
            score: f64::from(s) / 100.0,
        })
        .collect();
    (ids.into_iter().collect(), edges)
}

fn raw_edges() -> impl Strategy<Value = (usize, Vec<(usize, usize, u8)>)> {
    (1usize..15, proptest::collection::vec((0usize..15, 0usize..15, 0u8..=100), 0..30))
}

proptest! {
    #[test]
    fn merge_output_is_a_partition((n, raw) in raw_edges(), t in 0u8..=100) {
        let (universe, e) = edges(n, &raw);
        let cs = greedy_merge(&e, f64::from(t) / 100.0, &universe).unwrap();
        let mut seen = BTreeSet::new();
        for c in cs.clusters() {
            prop_assert!(!c.is_empty());
            for m in c {
                prop_assert!(seen.insert(m.clone()));
            }
        }
        prop_assert_eq!(&seen, &universe);
    }

    #[test]
    fn higher_threshold_refines((n, raw) in raw_edges(), t1 in 0u8..=100, t2 in 0u8..=100) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let (universe, e) = edges(n, &raw);
        let coarse = greedy_merge(&e, f64::from(lo) / 100.0, &universe).unwrap();
        let fine = greedy_merge(&e, f64::from(hi) / 100.0, &universe).unwrap();
        prop_assert!(fine.refines(&coarse));
    }

    #[test]
    fn edge_order_does_not_matter((n, raw) in raw_edges(), seed in any::<u64>()) {
        let (universe, e) = edges(n, &raw);
        let mut shuffled = e.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(greedy_merge(&e, 0.5, &universe).unwrap(), greedy_merge(&shuffled, 0.5, &universe).unwrap());
    }

    #[test]
    fn insertion_order_does_not_change_pairs(seed in any::<u64>()) {
        let text = fixture_text();
        let mut lines: Vec<&str> = text.lines().collect();
        lines.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(dataset(&lines.join("\n"), 3).pairs, dataset(&text, 3).pairs);
    }

    #[test]
    fn mixing_is_bounded_and_reproducible(per in 1usize..4, top in 1usize..6, seed in any::<u64>(), fan in 0usize..6) {
        let ori = dataset(&fixture_text(), 6);
        let augs: Vec<AugmentedPair> = ori
            .pairs
            .iter()
            .flat_map(|p| (0..fan).map(move |i| fake_aug(p, i)))
            .collect();
        let plan = AugmentationPlan::new(per, top, seed).unwrap();
        let a = mix_dataset(&ori, &augs, &plan);
        prop_assert_eq!(&a, &mix_dataset(&ori, &augs, &plan));
        prop_assert_eq!(&a.pairs[..ori.pairs.len()], &ori.pairs[..]);
        let mut per_source: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &a.pairs[ori.pairs.len()..] {
            *per_source.entry(p.pair_id.split('#').next().unwrap()).or_default() += 1;
        }
        for src in &ori.pairs {
            let n = per_source.get(src.pair_id.as_str()).copied().unwrap_or(0);
            let want = if src.rank < top { fan.min(per) } else { 0 };
            prop_assert_eq!(n, want);
        }
    }

    #[test]
    fn raising_threshold_never_makes_a_pair_similar(t1 in 0u8..=100, t2 in 0u8..=100) {
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        for p in &dataset(&fixture_text(), 15).pairs {
            let at_hi = classify_pair_triggers(p, &HeadLemma, hi).unwrap();
            let at_lo = classify_pair_triggers(p, &HeadLemma, lo).unwrap();
            prop_assert!(!at_hi.is_similar || at_lo.is_similar);
        }
    }
}

fn fake_aug(src: &MentionPair, i: usize) -> AugmentedPair {
    let mut pair = src.clone();
    pair.pair_id = format!("{}#cad{i}", src.pair_id);
    pair.label = src.label.negate();
    AugmentedPair {
        pair,
        kind: AugmentKind::Cad,
        source_pair_id: src.pair_id.clone(),
        edit_ledger: Vec::new(),
        plausibility: 1.0,
    }
}

#[test]
fn identical_triggers_are_always_similar() {
    for p in &dataset(&fixture_text(), 15).pairs {
        if p.first.head_lemma.eq_ignore_ascii_case(&p.second.head_lemma) {
            assert!(classify_pair_triggers(p, &HeadLemma, 100).unwrap().is_similar);
        }
        assert!(classify_pair_triggers(p, &HeadLemma, 0).unwrap().is_similar);
    }
}
