//! Rationale-centric counterfactual data augmentation for cross-document
//! event coreference resolution (ECR), plus the machinery around it:
//!
//! * [`corpus`] loads mention-annotated JSON-Lines corpora.
//! * [`pairing`] builds discourse windows and nearest-neighbour mention pairs.
//! * [`triggersim`] measures the trigger lexical-matching feature and its
//!   distribution over a pair dataset.
//! * [`llm`] renders prompt operators, talks to a chat-completion provider
//!   (or a replayed mock), caches exchanges and parses responses.
//! * [`augment`] generates CAD, TIA, CIA and TAD pairs and mixes them into a
//!   training set.
//! * [`scorer`] scores mention pairs, either with the head-lemma baseline or
//!   through an external HTTP scorer.
//! * [`cluster`] merges scored pairs into clusters.
//! * [`metrics`] implements MUC, B³, CEAF_e, LEA, CoNLL, pairwise reports with
//!   task completeness, and parsing of LLM clustering transcripts.

pub mod augment;
pub mod cluster;
pub mod corpus;
pub mod jsonl;
pub mod llm;
pub mod metrics;
pub mod pairing;
pub mod scorer;
pub mod triggersim;

pub use cluster::ClusterSet;
pub use corpus::{Corpus, Mention, Split};
pub use pairing::{DiscourseWindow, MentionPair, PairDataset, PairLabel};

/// Version of this library, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
