use crate::pairing::MentionPair;

/// Scores how plausible (close to minimal) an edit from `source` to `generated` is.
///
/// The default is [`TokenEditProxy`]; an embedding-based scorer can be plugged in here.
pub trait PlausibilityScorer: Sync {
    fn score(&self, source: &MentionPair, generated: &MentionPair) -> f64;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct TokenEditProxy;

impl PlausibilityScorer for TokenEditProxy {
    fn score(&self, source: &MentionPair, generated: &MentionPair) -> f64 {
        plausibility_proxy(source, generated)
    }
}

/// Unit-cost Levenshtein distance over token sequences.
pub fn token_edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ta) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, tb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ta != tb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn tokens(pair: &MentionPair) -> Vec<&str> {
    pair.first
        .sentences()
        .chain(pair.second.sentences())
        .flat_map(str::split_whitespace)
        .collect()
}

/// `1 - d(source, generated) / max(|source|, |generated|)` over whitespace tokens
/// of both windows; `1.0` when both are empty.
pub fn plausibility_proxy(source: &MentionPair, generated: &MentionPair) -> f64 {
    let a = tokens(source);
    let b = tokens(generated);
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 1.0;
    }
    1.0 - token_edit_distance(&a, &b) as f64 / longest as f64
}
