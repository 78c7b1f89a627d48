//! Pairwise coreference scoring: the head-lemma baseline and a JSON-over-HTTP
//! client for external (neural) scorers.
//!
//! Pairs are always scored in their stored `(first, second)` orientation.

use std::collections::HashMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pairing::{DiscourseWindow, MentionPair};

pub const DEFAULT_BATCH_SIZE: usize = 32;
pub const DEFAULT_IN_FLIGHT: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScorerError {
    #[error("malformed scorer response: {message}")]
    Protocol { message: String, payload: String },
    #[error("score {score} for pair `{pair_id}` is outside [0, 1]")]
    Validation { pair_id: String, score: f64 },
    #[error("scorer transport failure: {0}")]
    Transport(String),
    #[error("empty scoring batch")]
    EmptyBatch,
    #[error("invalid trigger span {span:?} for pair `{pair_id}` (text has {len} chars)")]
    InvalidSpan {
        pair_id: String,
        span: (usize, usize),
        len: usize,
    },
}

/// Window text with the trigger's char span inside it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoredMention {
    pub text: String,
    pub span: (usize, usize),
}

impl ScoredMention {
    pub fn from_window(w: &DiscourseWindow) -> Self {
        ScoredMention {
            text: w.text(),
            span: w.text_trigger_span(),
        }
    }

    fn is_valid(&self) -> bool {
        self.span.0 < self.span.1 && self.span.1 <= self.text.chars().count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub pair_id: String,
    pub first: ScoredMention,
    pub second: ScoredMention,
}

impl ScoreRequest {
    pub fn from_pair(pair: &MentionPair) -> Self {
        ScoreRequest {
            pair_id: pair.pair_id.clone(),
            first: ScoredMention::from_window(&pair.first),
            second: ScoredMention::from_window(&pair.second),
        }
    }

    pub fn validate(&self) -> Result<(), ScorerError> {
        for m in [&self.first, &self.second] {
            if !m.is_valid() {
                return Err(ScorerError::InvalidSpan {
                    pair_id: self.pair_id.clone(),
                    span: m.span,
                    len: m.text.chars().count(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub pair_id: String,
    pub score: f64,
}

impl ScoreResult {
    pub fn new(pair_id: impl Into<String>, score: f64) -> Result<Self, ScorerError> {
        let pair_id = pair_id.into();
        if !(0.0..=1.0).contains(&score) {
            return Err(ScorerError::Validation { pair_id, score });
        }
        Ok(ScoreResult { pair_id, score })
    }
}

/// 1.0 when the case-folded head lemmas match, otherwise 0.0.
pub fn lemma_baseline_score(pair: &MentionPair) -> ScoreResult {
    let same = pair.first.head_lemma.to_lowercase() == pair.second.head_lemma.to_lowercase();
    ScoreResult {
        pair_id: pair.pair_id.clone(),
        score: if same { 1.0 } else { 0.0 },
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    pairs: &'a [ScoreRequest],
}

#[derive(Deserialize)]
struct WireResponse {
    scores: Vec<WireScore>,
}

#[derive(Deserialize)]
struct WireScore {
    pair_id: String,
    score: f64,
}

#[derive(Debug, Clone)]
pub struct ExternalScorer {
    pub url: String,
    pub batch_size: usize,
    pub in_flight: usize,
    pub timeout: Duration,
}

impl ExternalScorer {
    /// `endpoint` is either the server root or the full `/score` URL.
    pub fn new(endpoint: &str) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/score") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/score")
        };
        ExternalScorer {
            url,
            batch_size: DEFAULT_BATCH_SIZE,
            in_flight: DEFAULT_IN_FLIGHT,
            timeout: Duration::from_secs(60),
        }
    }

    pub fn with_batch_size(mut self, n: usize) -> Self {
        self.batch_size = n.max(1);
        self
    }

    /// Scores `requests`, returning exactly one outcome per request in request order.
    ///
    /// A failing batch marks only its own items as failed.
    pub fn score_batch(&self, requests: &[ScoreRequest]) -> Result<Vec<Result<ScoreResult, ScorerError>>, ScorerError> {
        if requests.is_empty() {
            return Err(ScorerError::EmptyBatch);
        }
        let agent = ureq::AgentBuilder::new().timeout(self.timeout).build();
        let chunks: Vec<&[ScoreRequest]> = requests.chunks(self.batch_size.max(1)).collect();
        let mut out = Vec::with_capacity(requests.len());
        for group in chunks.chunks(self.in_flight.max(1)) {
            let results: Vec<Vec<Result<ScoreResult, ScorerError>>> = std::thread::scope(|s| {
                let handles: Vec<_> = group.iter().map(|chunk| s.spawn(|| self.post_chunk(&agent, chunk))).collect();
                handles.into_iter().map(|h| h.join().expect("scorer worker panicked")).collect()
            });
            out.extend(results.into_iter().flatten());
        }
        Ok(out)
    }

    fn post_chunk(&self, agent: &ureq::Agent, chunk: &[ScoreRequest]) -> Vec<Result<ScoreResult, ScorerError>> {
        let mut valid = Vec::new();
        for r in chunk {
            if r.validate().is_ok() {
                valid.push(r.clone());
            }
        }
        let response = if valid.is_empty() {
            Ok(HashMap::new())
        } else {
            self.send(agent, &valid)
        };
        chunk
            .iter()
            .map(|r| {
                r.validate()?;
                let scores = response.as_ref().map_err(Clone::clone)?;
                match scores.get(r.pair_id.as_str()) {
                    Some(&score) => ScoreResult::new(r.pair_id.clone(), score),
                    None => Err(ScorerError::Protocol {
                        message: format!("no score returned for pair `{}`", r.pair_id),
                        payload: String::new(),
                    }),
                }
            })
            .collect()
    }

    /// One POST, retried once on transport failure (timeouts included).
    fn send(&self, agent: &ureq::Agent, pairs: &[ScoreRequest]) -> Result<HashMap<String, f64>, ScorerError> {
        let body = serde_json::to_value(WireRequest { pairs }).expect("requests serialize");
        let mut last = None;
        for attempt in 0..2 {
            match agent.post(&self.url).send_json(body.clone()) {
                Ok(resp) => {
                    if resp.status() != 200 {
                        let status = resp.status();
                        let payload = resp.into_string().unwrap_or_default();
                        return Err(ScorerError::Protocol {
                            message: format!("unexpected HTTP status {status}"),
                            payload,
                        });
                    }
                    let payload = resp
                        .into_string()
                        .map_err(|e| ScorerError::Transport(e.to_string()))?;
                    return parse_wire_response(&payload);
                }
                Err(ureq::Error::Status(code, resp)) => {
                    return Err(ScorerError::Protocol {
                        message: format!("HTTP status {code}"),
                        payload: resp.into_string().unwrap_or_default(),
                    });
                }
                Err(ureq::Error::Transport(t)) => {
                    log::warn!("scorer request attempt {} failed: {t}", attempt + 1);
                    last = Some(t.to_string());
                }
            }
        }
        Err(ScorerError::Transport(last.unwrap_or_default()))
    }
}

/// Decodes a `{"scores": [...]}` body into a pair-id map.
pub fn parse_wire_response(payload: &str) -> Result<HashMap<String, f64>, ScorerError> {
    let wire: WireResponse = serde_json::from_str(payload).map_err(|e| ScorerError::Protocol {
        message: e.to_string(),
        payload: payload.to_string(),
    })?;
    Ok(wire.scores.into_iter().map(|s| (s.pair_id, s.score)).collect())
}

/// Convenience wrapper over [`ExternalScorer::score_batch`] with default batching.
pub fn external_score_batch(
    requests: &[ScoreRequest],
    endpoint: &str,
) -> Result<Vec<Result<ScoreResult, ScorerError>>, ScorerError> {
    ExternalScorer::new(endpoint).score_batch(requests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairing::{find_char_span, PairLabel};

    fn window(id: &str, center: &str, trigger: &str, lemma: &str) -> DiscourseWindow {
        DiscourseWindow {
            mention_id: id.into(),
            prefix: vec!["Before.".into()],
            center: center.into(),
            suffix: vec![],
            w: 2,
            trigger: trigger.into(),
            trigger_span: find_char_span(center, trigger).unwrap(),
            head_lemma: lemma.into(),
        }
    }

    fn pair(a: (&str, &str), b: (&str, &str)) -> MentionPair {
        MentionPair {
            pair_id: "x~y".into(),
            first: window("x", &format!("She {} today.", a.0), a.0, a.1),
            second: window("y", &format!("He {} today.", b.0), b.0, b.1),
            label: PairLabel::Coref,
            rank: 0,
        }
    }

    #[test]
    fn lemma_baseline() {
        assert_eq!(lemma_baseline_score(&pair(("died", "die"), ("Died", "Die"))).score, 1.0);
        assert_eq!(lemma_baseline_score(&pair(("paid", "pay"), ("shelled", "shell"))).score, 0.0);
    }

    #[test]
    fn request_span_points_at_trigger_in_window_text() {
        let r = ScoreRequest::from_pair(&pair(("died", "die"), ("left", "leave")));
        let t: String = r.first.text.chars().skip(r.first.span.0).take(r.first.span.1 - r.first.span.0).collect();
        assert_eq!(t, "died");
        assert!(r.first.text.starts_with("Before. "));
        r.validate().unwrap();
        let json = serde_json::to_value(&r).unwrap();
        assert_eq!(json["first"]["span"], serde_json::json!([12, 16]));
    }

    #[test]
    fn range_enforced() {
        assert!(ScoreResult::new("p", 0.0).is_ok());
        assert!(matches!(ScoreResult::new("p", 1.7), Err(ScorerError::Validation { .. })));
        assert!(ScoreResult::new("p", f64::NAN).is_err());
    }

    #[test]
    fn malformed_payload_is_kept() {
        match parse_wire_response("{\"oops\": 1}") {
            Err(ScorerError::Protocol { payload, .. }) => assert_eq!(payload, "{\"oops\": 1}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn endpoint_normalisation() {
        assert_eq!(ExternalScorer::new("http://h:1/").url, "http://h:1/score");
        assert_eq!(ExternalScorer::new("http://h:1/score").url, "http://h:1/score");
    }
}
