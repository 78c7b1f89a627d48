//! Offline clients: replay by prompt hash, and transcript lookup by content.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use super::{prompt_hash, ChatClient, CompletionRequest, LlmError};

/// One canned response keyed by the SHA-256 of the rendered prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    pub prompt_hash: String,
    pub operator: String,
    /// Where the response text came from, for humans.
    #[serde(default)]
    pub source: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockFixtures {
    pub responses: Vec<MockEntry>,
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, LlmError> {
    let text = std::fs::read_to_string(path).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| LlmError::Config(format!("{}: {e}", path.display())))
}

impl MockFixtures {
    pub fn load(path: &Path) -> Result<Self, LlmError> {
        read_json(path)
    }

    pub fn to_pretty_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("fixtures serialize");
        s.push('\n');
        s
    }
}

/// Replays canned responses; never touches the network.
#[derive(Debug, Default)]
pub struct MockClient {
    by_hash: HashMap<String, String>,
    calls: AtomicUsize,
}

impl MockClient {
    pub fn new(fixtures: MockFixtures) -> Self {
        MockClient {
            by_hash: fixtures
                .responses
                .into_iter()
                .map(|e| (e.prompt_hash, e.response))
                .collect(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Ok(Self::new(MockFixtures::load(path)?))
    }

    /// Maps a raw prompt string to a response.
    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.by_hash.insert(prompt_hash(prompt), response.into());
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl ChatClient for MockClient {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let hash = prompt_hash(&request.prompt);
        self.by_hash
            .get(&hash)
            .cloned()
            .ok_or(LlmError::MissingFixture {
                prompt_hash: hash,
                operator: request.operator.clone(),
            })
    }
}

/// A human-authored response, selected by operator and prompt content.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub operator: String,
    /// Every string must occur in the rendered prompt for the entry to apply.
    pub matches: Vec<String>,
    #[serde(default)]
    pub source: String,
    pub response: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
struct TranscriptFile {
    transcripts: Vec<TranscriptEntry>,
}

/// Answers from transcripts and records every answer by prompt hash, so a
/// run against it can be frozen into [`MockFixtures`].
#[derive(Debug, Default)]
pub struct TranscriptClient {
    entries: Vec<TranscriptEntry>,
    served: Mutex<BTreeMap<String, MockEntry>>,
}

impl TranscriptClient {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        TranscriptClient {
            entries,
            served: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        let file: TranscriptFile = read_json(path)?;
        Ok(Self::new(file.transcripts))
    }

    /// Every response served so far, ordered by prompt hash.
    pub fn recorded(&self) -> MockFixtures {
        MockFixtures {
            responses: self.served.lock().values().cloned().collect(),
        }
    }
}

impl ChatClient for TranscriptClient {
    fn complete_raw(&self, request: &CompletionRequest) -> Result<String, LlmError> {
        let hits: Vec<&TranscriptEntry> = self
            .entries
            .iter()
            .filter(|e| e.operator == request.operator && e.matches.iter().all(|m| request.prompt.contains(m.as_str())))
            .collect();
        let hash = prompt_hash(&request.prompt);
        match hits.as_slice() {
            [] => Err(LlmError::MissingFixture {
                prompt_hash: hash,
                operator: request.operator.clone(),
            }),
            [entry] => {
                self.served.lock().insert(
                    hash.clone(),
                    MockEntry {
                        prompt_hash: hash,
                        operator: entry.operator.clone(),
                        source: entry.source.clone(),
                        response: entry.response.clone(),
                    },
                );
                Ok(entry.response.clone())
            }
            many => Err(LlmError::Config(format!(
                "{} transcripts match one {} prompt: {}",
                many.len(),
                request.operator,
                many.iter().map(|e| e.source.as_str()).collect::<Vec<_>>().join(", ")
            ))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(op: &str, prompt: &str) -> CompletionRequest {
        CompletionRequest {
            operator: op.into(),
            model: "m".into(),
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 10,
        }
    }

    #[test]
    fn mock_replays_by_prompt_hash() {
        let mut m = MockClient::default();
        m.insert("hello", "canned");
        assert_eq!(m.complete_raw(&req("SYN", "hello")).unwrap(), "canned");
        assert!(matches!(
            m.complete_raw(&req("SYN", "other")),
            Err(LlmError::MissingFixture { .. })
        ));
        assert_eq!(m.calls(), 2);
    }

    #[test]
    fn transcript_lookup_records_hashes() {
        let t = TranscriptClient::new(vec![
            TranscriptEntry {
                operator: "PARA".into(),
                matches: vec!["alpha".into()],
                source: "one".into(),
                response: "r1".into(),
            },
            TranscriptEntry {
                operator: "PARA".into(),
                matches: vec!["beta".into()],
                source: "two".into(),
                response: "r2".into(),
            },
        ]);
        assert_eq!(t.complete_raw(&req("PARA", "x beta y")).unwrap(), "r2");
        assert!(t.complete_raw(&req("TC", "x beta y")).is_err());
        assert!(matches!(
            t.complete_raw(&req("PARA", "alpha beta")),
            Err(LlmError::Config(_))
        ));
        let rec = t.recorded();
        assert_eq!(rec.responses.len(), 1);
        assert_eq!(rec.responses[0].prompt_hash, prompt_hash("x beta y"));

        let replay = MockClient::new(rec);
        assert_eq!(replay.complete_raw(&req("PARA", "x beta y")).unwrap(), "r2");
    }
}
