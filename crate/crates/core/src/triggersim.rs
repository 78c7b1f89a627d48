//! Trigger lexical matching: fuzz ratio between triggers and its distribution
//! over pair datasets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::{DiscourseWindow, MentionPair, PairLabel};

pub const DEFAULT_THRESHOLD: u8 = 80;

#[derive(Debug, Error, PartialEq)]
pub enum TriggerSimError {
    #[error("fuzz ratio is undefined for empty strings")]
    EmptyString,
    #[error("dataset is empty")]
    EmptyDataset,
}

/// Edit-cost model used by [`fuzz_ratio_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditCost {
    /// Insertions and deletions cost 1, substitutions cost 2 (the usual fuzz ratio).
    #[default]
    Indel,
    /// Plain Levenshtein: every operation costs 1.
    Levenshtein,
}

/// Weighted edit distance over Unicode scalars.
pub fn edit_distance(a: &str, b: &str, cost: EditCost) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let sub = match cost {
        EditCost::Indel => 2,
        EditCost::Levenshtein => 1,
    };
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let replace = prev[j] + if ca == cb { 0 } else { sub };
            cur[j + 1] = replace.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `round(100 * num / den)` with ties to even, in exact integer arithmetic.
fn round_half_even(num: usize, den: usize) -> usize {
    let (q, r) = (num / den, num % den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q % 2),
    }
}

/// Fuzz ratio in `0..=100`: `100 * (|a| + |b| - d(a, b)) / (|a| + |b|)`.
pub fn fuzz_ratio(a: &str, b: &str) -> Result<u8, TriggerSimError> {
    fuzz_ratio_with(a, b, EditCost::Indel)
}

pub fn fuzz_ratio_with(a: &str, b: &str, cost: EditCost) -> Result<u8, TriggerSimError> {
    if a.is_empty() || b.is_empty() {
        return Err(TriggerSimError::EmptyString);
    }
    let total = a.chars().count() + b.chars().count();
    let dist = edit_distance(a, b, cost).min(total);
    Ok(round_half_even(100 * (total - dist), total) as u8)
}

/// Maps a window to the string its trigger is compared by.
pub trait TriggerNormalizer: Sync {
    fn normalize(&self, window: &DiscourseWindow) -> String;
}

/// Lowercased stored head lemma (falls back to the trigger text if the lemma is blank).
#[derive(Debug, Clone, Copy, Default)]
pub struct HeadLemma;

impl TriggerNormalizer for HeadLemma {
    fn normalize(&self, window: &DiscourseWindow) -> String {
        let lemma = window.head_lemma.trim();
        if lemma.is_empty() {
            window.trigger.trim().to_lowercase()
        } else {
            lemma.to_lowercase()
        }
    }
}

/// Lowercased surface trigger.
#[derive(Debug, Clone, Copy, Default)]
pub struct SurfaceForm;

impl TriggerNormalizer for SurfaceForm {
    fn normalize(&self, window: &DiscourseWindow) -> String {
        window.trigger.trim().to_lowercase()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexicalSimilarityClass {
    pub ratio: u8,
    pub is_similar: bool,
}

pub fn classify_pair_triggers(
    pair: &MentionPair,
    normalizer: &dyn TriggerNormalizer,
    threshold: u8,
) -> Result<LexicalSimilarityClass, TriggerSimError> {
    classify_pair_triggers_with(pair, normalizer, threshold, EditCost::Indel)
}

pub fn classify_pair_triggers_with(
    pair: &MentionPair,
    normalizer: &dyn TriggerNormalizer,
    threshold: u8,
    cost: EditCost,
) -> Result<LexicalSimilarityClass, TriggerSimError> {
    let a = normalizer.normalize(&pair.first);
    let b = normalizer.normalize(&pair.second);
    let ratio = fuzz_ratio_with(&a, &b, cost)?;
    Ok(LexicalSimilarityClass {
        ratio,
        is_similar: ratio >= threshold,
    })
}

/// Counts of lexically similar/divergent trigger pairs per label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasHistogram {
    pub coref_similar: usize,
    pub coref_divergent: usize,
    pub not_coref_similar: usize,
    pub not_coref_divergent: usize,
    /// `coref_similar / (coref_similar + coref_divergent)`; absent without coreferential pairs.
    pub percent_similar_coref: Option<f64>,
    /// Mean fuzz ratio over coreferential pairs.
    pub mean_ratio_coref: Option<f64>,
    pub threshold: u8,
}

impl BiasHistogram {
    pub fn total(&self) -> usize {
        self.coref_similar + self.coref_divergent + self.not_coref_similar + self.not_coref_divergent
    }

    /// `label,class,count` rows with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,class,count\n");
        for (label, class, count) in [
            ("coref", "similar", self.coref_similar),
            ("coref", "divergent", self.coref_divergent),
            ("not_coref", "similar", self.not_coref_similar),
            ("not_coref", "divergent", self.not_coref_divergent),
        ] {
            out.push_str(&format!("{label},{class},{count}\n"));
        }
        out
    }
}

pub fn bias_histogram<'a, I>(
    pairs: I,
    normalizer: &dyn TriggerNormalizer,
    threshold: u8,
) -> Result<BiasHistogram, TriggerSimError>
where
    I: IntoIterator<Item = &'a MentionPair>,
{
    let mut h = BiasHistogram {
        coref_similar: 0,
        coref_divergent: 0,
        not_coref_similar: 0,
        not_coref_divergent: 0,
        percent_similar_coref: None,
        mean_ratio_coref: None,
        threshold,
    };
    let mut coref_ratio_sum = 0u64;
    for pair in pairs {
        let class = classify_pair_triggers(pair, normalizer, threshold)?;
        match (pair.label, class.is_similar) {
            (PairLabel::Coref, true) => h.coref_similar += 1,
            (PairLabel::Coref, false) => h.coref_divergent += 1,
            (PairLabel::NotCoref, true) => h.not_coref_similar += 1,
            (PairLabel::NotCoref, false) => h.not_coref_divergent += 1,
        }
        if pair.label == PairLabel::Coref {
            coref_ratio_sum += u64::from(class.ratio);
        }
    }
    if h.total() == 0 {
        return Err(TriggerSimError::EmptyDataset);
    }
    let coref = h.coref_similar + h.coref_divergent;
    if coref > 0 {
        h.percent_similar_coref = Some(h.coref_similar as f64 / coref as f64);
        h.mean_ratio_coref = Some(coref_ratio_sum as f64 / coref as f64);
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(lemma: &str) -> DiscourseWindow {
        DiscourseWindow {
            mention_id: lemma.into(),
            prefix: vec![],
            center: lemma.into(),
            suffix: vec![],
            w: 0,
            trigger: lemma.into(),
            trigger_span: (0, lemma.chars().count()),
            head_lemma: lemma.into(),
        }
    }

    fn pair(a: &str, b: &str, label: PairLabel) -> MentionPair {
        MentionPair {
            pair_id: format!("{a}~{b}"),
            first: window(a),
            second: window(b),
            label,
            rank: 0,
        }
    }

    #[test]
    fn identity_and_known_values() {
        assert_eq!(fuzz_ratio("died", "died"), Ok(100));
        assert_eq!(fuzz_ratio("fire", "fired"), Ok(89));
        assert!(fuzz_ratio("pay", "shelled").unwrap() < 80);
        assert_eq!(fuzz_ratio("", "x"), Err(TriggerSimError::EmptyString));
    }

    #[test]
    fn ties_round_to_even() {
        // |a|+|b| = 8, distance 3 -> 62.5 -> 62; distance 1 -> 87.5 -> 88
        assert_eq!(fuzz_ratio("abcd", "abce"), Ok(75));
        assert_eq!(round_half_even(625, 10), 62);
        assert_eq!(round_half_even(875, 10), 88);
    }

    #[test]
    fn levenshtein_flag_changes_substitution_cost() {
        // one substitution: indel distance 2, levenshtein distance 1
        assert_eq!(edit_distance("cat", "cut", EditCost::Indel), 2);
        assert_eq!(edit_distance("cat", "cut", EditCost::Levenshtein), 1);
        assert_eq!(fuzz_ratio_with("cat", "cut", EditCost::Levenshtein), Ok(83));
    }

    #[test]
    fn classification_by_threshold() {
        let same = pair("die", "die", PairLabel::Coref);
        assert!(classify_pair_triggers(&same, &HeadLemma, 80).unwrap().is_similar);
        let diverse = pair("pay", "shelled out", PairLabel::Coref);
        assert!(!classify_pair_triggers(&diverse, &HeadLemma, 80).unwrap().is_similar);
        assert!(classify_pair_triggers(&diverse, &HeadLemma, 0).unwrap().is_similar);
    }

    #[test]
    fn histogram_counts() {
        let mut pairs = Vec::new();
        for _ in 0..7 {
            pairs.push(pair("die", "die", PairLabel::Coref));
        }
        for _ in 0..3 {
            pairs.push(pair("pay", "shelled", PairLabel::Coref));
        }
        pairs.push(pair("fire", "fire", PairLabel::NotCoref));
        let h = bias_histogram(&pairs, &HeadLemma, 80).unwrap();
        assert_eq!((h.coref_similar, h.coref_divergent, h.not_coref_similar), (7, 3, 1));
        assert!((h.percent_similar_coref.unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(h.total(), 11);
        assert!(h.to_csv().contains("coref,similar,7\n"));
    }

    #[test]
    fn histogram_without_coref_reports_absent_percent() {
        let pairs = vec![pair("a", "b", PairLabel::NotCoref)];
        assert_eq!(bias_histogram(&pairs, &HeadLemma, 80).unwrap().percent_similar_coref, None);
        assert_eq!(bias_histogram(&[], &HeadLemma, 80), Err(TriggerSimError::EmptyDataset));
    }

    #[test]
    fn all_identical_coref_is_full_percent() {
        let pairs = vec![pair("die", "die", PairLabel::Coref); 4];
        assert_eq!(bias_histogram(&pairs, &HeadLemma, 80).unwrap().percent_similar_coref, Some(1.0));
    }
}
