//! Shared helpers for integration tests: brute-force oracles, fixture
//! loaders and a tiny HTTP stub server.

#![allow(dead_code)]

pub mod augmentation;
pub mod oracles;
pub mod stub;

use std::path::PathBuf;

use ecr_cad::corpus::{load_corpus, Corpus, Split};
use ecr_cad::llm::{Llm, LlmSettings, MockClient, MockFixtures, TranscriptClient};

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures")
}

pub fn fixture_corpus(split: Split) -> Corpus {
    load_corpus(&fixture_dir().join("corpus_fixture.jsonl"), split).expect("fixture corpus loads")
}

/// LLM front end replaying the frozen mock fixtures.
pub fn mock_llm() -> Llm {
    let fixtures = MockFixtures::load(&fixture_dir().join("mock_llm.json")).expect("mock fixtures load");
    Llm::new(Box::new(MockClient::new(fixtures)), LlmSettings::default())
}

pub fn transcript_client() -> TranscriptClient {
    TranscriptClient::from_file(&fixture_dir().join("transcripts.json")).expect("transcripts load")
}
