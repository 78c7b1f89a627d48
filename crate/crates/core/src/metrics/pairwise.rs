//! Pairwise classification reports and the chain-of-thought answer parser.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{f1, ratio, MetricError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CotLabel {
    Coreferential,
    NonCoreferential,
}

/// Outcome of parsing one chain-of-thought response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotParse {
    /// `None` marks an incomplete (unparseable) response.
    pub label: Option<CotLabel>,
    pub score: Option<f64>,
}

impl CotParse {
    pub fn is_complete(&self) -> bool {
        self.label.is_some()
    }
}

fn result_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[\s*_]*coreferential\s+results?[\s*_]*:[\s*_]*(.*?)\s*$").unwrap())
}

fn score_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?im)^[\s*_]*coreferential\s+score[\s*_]*:[\s*_]*([0-9]*\.?[0-9]+)").unwrap())
}

/// Extracts the first `Coreferential result(s):` answer and the `Coreferential score:`.
///
/// The answer must be exactly `Coreferential` or `Non-Coreferential` (quotes,
/// emphasis and a trailing period are tolerated). Anything else is incomplete.
pub fn parse_pairwise_cot(raw: &str) -> CotParse {
    let label = result_re().captures(raw).and_then(|c| {
        let answer = c[1]
            .trim_matches(|ch: char| ch.is_whitespace() || "*_`'\".".contains(ch))
            .to_ascii_lowercase();
        match answer.as_str() {
            "coreferential" => Some(CotLabel::Coreferential),
            "non-coreferential" => Some(CotLabel::NonCoreferential),
            _ => None,
        }
    });
    let score = score_re()
        .captures(raw)
        .and_then(|c| c[1].parse::<f64>().ok())
        .filter(|s| (0.0..=1.0).contains(s));
    CotParse { label, score }
}

/// One model prediction; `None` when the response could not be parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub pair_id: String,
    pub prediction: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairwiseReport {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    /// Fraction of accurate answers among all items; incomplete ones count as wrong.
    pub accuracy: f64,
    /// Share of complete items predicted positive.
    pub positive_rate: f64,
    /// Task completeness, `n_complete / n_total`.
    pub tcomp: f64,
    pub n_total: usize,
    pub n_complete: usize,
}

/// Scores predictions against gold labels keyed by pair id.
///
/// Gold pairs without a prediction count as incomplete. R, P, F1 and the
/// positive rate use complete items only.
pub fn pairwise_report(gold: &BTreeMap<String, bool>, predictions: &[PairPrediction]) -> Result<PairwiseReport, MetricError> {
    let mut by_id: BTreeMap<&str, Option<bool>> = BTreeMap::new();
    for p in predictions {
        if !gold.contains_key(&p.pair_id) {
            return Err(MetricError::UnknownPair(p.pair_id.clone()));
        }
        by_id.insert(p.pair_id.as_str(), p.prediction);
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0usize, 0usize, 0usize, 0usize);
    for (id, &truth) in gold {
        match (by_id.get(id.as_str()).copied().flatten(), truth) {
            (Some(true), true) => tp += 1,
            (Some(true), false) => fp += 1,
            (Some(false), false) => tn += 1,
            (Some(false), true) => fn_ += 1,
            (None, _) => {}
        }
    }
    Ok(report_from_counts(tp, fp, tn, fn_, gold.len()))
}

/// Report from confusion counts over complete items and the total item count.
pub fn report_from_counts(tp: usize, fp: usize, tn: usize, fn_: usize, n_total: usize) -> PairwiseReport {
    let n_complete = tp + fp + tn + fn_;
    let recall = ratio(tp as f64, (tp + fn_) as f64);
    let precision = ratio(tp as f64, (tp + fp) as f64);
    PairwiseReport {
        recall,
        precision,
        f1: f1(recall, precision),
        accuracy: ratio((tp + tn) as f64, n_total as f64),
        positive_rate: ratio((tp + fp) as f64, n_complete as f64),
        tcomp: ratio(n_complete as f64, n_total as f64),
        n_total,
        n_complete,
    }
}

/// Pair ids referenced in `predictions` but absent from `gold`.
pub fn unknown_pairs<'a>(gold: &BTreeMap<String, bool>, predictions: &'a [PairPrediction]) -> BTreeSet<&'a str> {
    predictions
        .iter()
        .filter(|p| !gold.contains_key(&p.pair_id))
        .map(|p| p.pair_id.as_str())
        .collect()
}
