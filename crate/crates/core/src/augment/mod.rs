//! LLM-in-the-loop generation of counterfactual (CAD), trigger-ablation (TIA),
//! context-ablation (CIA) and temporal-commonsense (TAD) mention pairs.
//!
//! Every generator targets one side of the source pair according to its
//! label. Coreferential sources get a non-coreferential replacement for the
//! first mention sentence. Non-coreferential sources get a first mention
//! rebuilt to corefer with the second one. The generated pair always carries
//! the negated label.

mod mix;
mod plausibility;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{self, prompt, Llm, LlmError};
use crate::pairing::{find_char_span, DiscourseWindow, MentionPair};

pub use mix::{mix_dataset, select_augmentations, AugmentationPlan, DEFAULT_PER_ORIGINAL, DEFAULT_TOP_N};
pub use plausibility::{plausibility_proxy, token_edit_distance, PlausibilityScorer, TokenEditProxy};

#[derive(Debug, Error)]
pub enum AugmentError {
    #[error("per_original must be at least 1")]
    ZeroPerOriginal,
    #[error("top_n must be at least 1")]
    ZeroTopN,
    #[error("unknown augmentation kind `{0}` (expected cad, tia, cia or tad)")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum AugmentKind {
    Cad,
    Tia,
    Cia,
    Tad,
}

impl AugmentKind {
    pub const ALL: [AugmentKind; 4] = [AugmentKind::Cad, AugmentKind::Tia, AugmentKind::Cia, AugmentKind::Tad];

    fn tag(self) -> &'static str {
        match self {
            AugmentKind::Cad => "cad",
            AugmentKind::Tia => "tia",
            AugmentKind::Cia => "cia",
            AugmentKind::Tad => "tad",
        }
    }
}

impl fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag().to_uppercase())
    }
}

impl FromStr for AugmentKind {
    type Err = AugmentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cad" => Ok(AugmentKind::Cad),
            "tia" => Ok(AugmentKind::Tia),
            "cia" => Ok(AugmentKind::Cia),
            "tad" => Ok(AugmentKind::Tad),
            _ => Err(AugmentError::UnknownKind(s.to_string())),
        }
    }
}

/// One of the six text segments of a mention pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Segment {
    #[serde(rename = "first.prefix")]
    FirstPrefix,
    #[serde(rename = "first.center")]
    FirstCenter,
    #[serde(rename = "first.suffix")]
    FirstSuffix,
    #[serde(rename = "second.prefix")]
    SecondPrefix,
    #[serde(rename = "second.center")]
    SecondCenter,
    #[serde(rename = "second.suffix")]
    SecondSuffix,
}

impl Segment {
    pub const ALL: [Segment; 6] = [
        Segment::FirstPrefix,
        Segment::FirstCenter,
        Segment::FirstSuffix,
        Segment::SecondPrefix,
        Segment::SecondCenter,
        Segment::SecondSuffix,
    ];

    /// The segment's sentences within `pair`.
    pub fn sentences(self, pair: &MentionPair) -> Vec<&str> {
        let (w, part) = match self {
            Segment::FirstPrefix => (&pair.first, 0),
            Segment::FirstCenter => (&pair.first, 1),
            Segment::FirstSuffix => (&pair.first, 2),
            Segment::SecondPrefix => (&pair.second, 0),
            Segment::SecondCenter => (&pair.second, 1),
            Segment::SecondSuffix => (&pair.second, 2),
        };
        match part {
            0 => w.prefix.iter().map(String::as_str).collect(),
            1 => vec![w.center.as_str()],
            _ => w.suffix.iter().map(String::as_str).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditAction {
    /// Replaced by an LLM-generated mention sentence.
    Generated,
    /// Replaced by a paraphrase of existing context.
    Paraphrased,
    /// Replaced by generated temporal-commonsense context.
    TemporalContext,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub segment: Segment,
    pub action: EditAction,
}

/// A generated pair with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedPair {
    #[serde(flatten)]
    pub pair: MentionPair,
    pub kind: AugmentKind,
    pub source_pair_id: String,
    pub edit_ledger: Vec<LedgerEntry>,
    pub plausibility: f64,
}

impl AugmentedPair {
    /// Segments named in the edit ledger.
    pub fn edited_segments(&self) -> Vec<Segment> {
        self.edit_ledger.iter().map(|e| e.segment).collect()
    }
}

/// Why candidates were discarded while generating for one source pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    /// LLM calls that failed outright (transport, refusal, missing fixture).
    pub llm_errors: usize,
    /// Responses that did not match the expected format.
    pub parse_errors: usize,
    /// Candidate sentences lacking the required trigger.
    pub missing_trigger: usize,
    /// Candidates discarded because their context could not be generated.
    pub context_failures: usize,
}

impl DropCounts {
    pub fn total(&self) -> usize {
        self.llm_errors + self.parse_errors + self.missing_trigger + self.context_failures
    }

    fn add(&mut self, other: &DropCounts) {
        self.llm_errors += other.llm_errors;
        self.parse_errors += other.parse_errors;
        self.missing_trigger += other.missing_trigger;
        self.context_failures += other.context_failures;
    }

    fn record(&mut self, err: &LlmError) {
        match err {
            LlmError::Parse { .. } => self.parse_errors += 1,
            _ => self.llm_errors += 1,
        }
    }
}

/// Output of one generator run on one source pair.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generation {
    pub pairs: Vec<AugmentedPair>,
    pub dropped: DropCounts,
}

/// A validated mention sentence and the trigger found in it.
struct Candidate {
    sentence: String,
    trigger: String,
    head_lemma: String,
    span: (usize, usize),
}

/// Left or right context of a window as produced by an operator.
#[derive(Clone)]
struct Context {
    prefixes: Vec<String>,
    suffixes: Vec<String>,
}

impl Context {
    fn pick(&self, k: usize) -> (String, String) {
        (
            self.prefixes[k % self.prefixes.len()].clone(),
            self.suffixes[k % self.suffixes.len()].clone(),
        )
    }
}

fn log_drop(kind: AugmentKind, pair: &MentionPair, what: &str, err: &LlmError) {
    log::debug!("{kind} {}: {what}: {err}", pair.pair_id);
}

/// Step one of every generator: candidate mention sentences for the target side.
fn candidates(kind: AugmentKind, pair: &MentionPair, llm: &Llm, dropped: &mut DropCounts) -> Vec<Candidate> {
    let coref = pair.label.is_coref();
    let target = if coref { &pair.first } else { &pair.second };
    let slots = prompt::slot_map([("trigger", target.trigger.as_str()), ("sentence", target.center.as_str())]);

    let (sentences, triggers, lemma_of): (Vec<String>, Vec<String>, Box<dyn Fn(&str) -> String>) =
        if kind == AugmentKind::Tia {
            let op = if coref { prompt::nce() } else { prompt::ce() };
            let raw = match llm.run(&op, &slots) {
                Ok(ex) => ex.response,
                Err(e) => {
                    dropped.record(&e);
                    log_drop(kind, pair, "mention generation failed", &e);
                    return Vec::new();
                }
            };
            match llm::parse_mentions(&raw) {
                Ok(s) => {
                    let lemma = target.head_lemma.clone();
                    (s, vec![target.trigger.clone()], Box::new(move |_| lemma.clone()))
                }
                Err(e) => {
                    dropped.record(&e);
                    log_drop(kind, pair, "unparseable mentions", &e);
                    return Vec::new();
                }
            }
        } else {
            let op = if coref { prompt::syn_nce() } else { prompt::syn_ce() };
            let raw = match llm.run(&op, &slots) {
                Ok(ex) => ex.response,
                Err(e) => {
                    dropped.record(&e);
                    log_drop(kind, pair, "synonym generation failed", &e);
                    return Vec::new();
                }
            };
            match llm::parse_generation(&raw) {
                Ok(b) => (b.mention_sentences, b.synonyms, Box::new(|syn: &str| syn.to_lowercase())),
                Err(e) => {
                    dropped.record(&e);
                    log_drop(kind, pair, "unparseable generation", &e);
                    return Vec::new();
                }
            }
        };

    let mut out = Vec::new();
    for sentence in sentences {
        // First trigger (in listed order) that the sentence actually contains.
        let hit = triggers
            .iter()
            .find_map(|t| find_char_span(&sentence, t).map(|span| (t, span)));
        match hit {
            Some((t, span)) => {
                let surface: String = sentence.chars().skip(span.0).take(span.1 - span.0).collect();
                out.push(Candidate {
                    trigger: surface,
                    head_lemma: lemma_of(t),
                    span,
                    sentence,
                });
            }
            None => {
                dropped.missing_trigger += 1;
                log::debug!("{kind} {}: candidate lacks a required trigger: {sentence}", pair.pair_id);
            }
        }
    }
    out
}

fn paraphrase(window: &DiscourseWindow, llm: &Llm) -> Result<Context, LlmError> {
    if window.prefix.is_empty() && window.suffix.is_empty() {
        return Ok(Context {
            prefixes: vec![String::new()],
            suffixes: vec![String::new()],
        });
    }
    let prefix = window.prefix.join(" ");
    let suffix = window.suffix.join(" ");
    let text = window.text();
    let slots = prompt::slot_map([
        ("text", text.as_str()),
        ("prefix", prefix.as_str()),
        ("mention", window.center.as_str()),
        ("suffix", suffix.as_str()),
    ]);
    let ex = llm.run(&prompt::para(), &slots)?;
    let (mut prefixes, mut suffixes) = llm::parse_paraphrases(&ex.response)?;
    // An empty source side stays empty whatever the model wrote for it.
    if window.prefix.is_empty() {
        prefixes = vec![String::new()];
    }
    if window.suffix.is_empty() {
        suffixes = vec![String::new()];
    }
    Ok(Context { prefixes, suffixes })
}

fn temporal(trigger: &str, sentence: &str, llm: &Llm) -> Result<Context, LlmError> {
    let slots = prompt::slot_map([("sentence", sentence), ("trigger", trigger)]);
    let ex = llm.run(&prompt::tc(), &slots)?;
    let (prefixes, suffixes) = llm::parse_paraphrases(&ex.response)?;
    Ok(Context { prefixes, suffixes })
}

fn segment(text: String) -> Vec<String> {
    if text.is_empty() {
        Vec::new()
    } else {
        vec![text]
    }
}

/// Window built around a candidate sentence.
fn candidate_window(source: &DiscourseWindow, cand: &Candidate, id: &str, pre: Vec<String>, suf: Vec<String>) -> DiscourseWindow {
    DiscourseWindow {
        mention_id: id.to_string(),
        prefix: pre,
        center: cand.sentence.clone(),
        suffix: suf,
        w: source.w,
        trigger: cand.trigger.clone(),
        trigger_span: cand.span,
        head_lemma: cand.head_lemma.clone(),
    }
}

/// Ledger entries for every segment whose text differs from the source.
fn ledger(source: &MentionPair, generated: &MentionPair, actions: &[(Segment, EditAction)]) -> Vec<LedgerEntry> {
    Segment::ALL
        .iter()
        .filter(|s| s.sentences(source) != s.sentences(generated))
        .map(|&segment| {
            let action = actions
                .iter()
                .find(|(s, _)| *s == segment)
                .map(|(_, a)| *a)
                .unwrap_or(EditAction::Generated);
            LedgerEntry { segment, action }
        })
        .collect()
}

/// Runs generator `kind` on `pair`, scoring plausibility with the token-edit proxy.
pub fn generate(kind: AugmentKind, pair: &MentionPair, llm: &Llm) -> Generation {
    generate_with(kind, pair, llm, &TokenEditProxy)
}

pub fn generate_with(kind: AugmentKind, pair: &MentionPair, llm: &Llm, scorer: &dyn PlausibilityScorer) -> Generation {
    let mut g = Generation::default();
    let cands = candidates(kind, pair, llm, &mut g.dropped);
    if cands.is_empty() {
        log::debug!("{kind} {}: no usable candidates", pair.pair_id);
        return g;
    }
    let coref = pair.label.is_coref();

    // Context for the first window (`first_ctx`) and, for CIA/TAD, the second.
    let mut first_ctx: Option<Context> = None;
    let mut second_ctx: Option<Context> = None;
    match kind {
        AugmentKind::Cad | AugmentKind::Tia if !coref => match paraphrase(&pair.second, llm) {
            Ok(c) => first_ctx = Some(c),
            Err(e) => {
                g.dropped.record(&e);
                g.dropped.context_failures += cands.len();
                log_drop(kind, pair, "paraphrasing the second context failed", &e);
                return g;
            }
        },
        AugmentKind::Cia => {
            let both = paraphrase(&pair.first, llm).and_then(|a| paraphrase(&pair.second, llm).map(|b| (a, b)));
            match both {
                Ok((a, b)) => {
                    first_ctx = Some(a);
                    second_ctx = Some(b);
                }
                Err(e) => {
                    g.dropped.record(&e);
                    g.dropped.context_failures += cands.len();
                    log_drop(kind, pair, "paraphrasing failed", &e);
                    return g;
                }
            }
        }
        AugmentKind::Tad => match temporal(&pair.second.trigger, &pair.second.center, llm) {
            Ok(c) => second_ctx = Some(c),
            Err(e) => {
                g.dropped.record(&e);
                g.dropped.context_failures += cands.len();
                log_drop(kind, pair, "temporal context for the second mention failed", &e);
                return g;
            }
        },
        _ => {}
    }

    for (k, cand) in cands.iter().enumerate() {
        let id = format!("{}#{}{k}", pair.first.mention_id, kind.tag());
        let mut actions = vec![(Segment::FirstCenter, EditAction::Generated)];
        let first = match kind {
            AugmentKind::Cad | AugmentKind::Tia if coref => {
                candidate_window(&pair.first, cand, &id, pair.first.prefix.clone(), pair.first.suffix.clone())
            }
            AugmentKind::Cad | AugmentKind::Tia | AugmentKind::Cia => {
                let (pre, suf) = first_ctx.as_ref().expect("context prepared above").pick(k);
                actions.push((Segment::FirstPrefix, EditAction::Paraphrased));
                actions.push((Segment::FirstSuffix, EditAction::Paraphrased));
                candidate_window(&pair.first, cand, &id, segment(pre), segment(suf))
            }
            AugmentKind::Tad => match temporal(&cand.trigger, &cand.sentence, llm) {
                Ok(ctx) => {
                    let (pre, suf) = ctx.pick(0);
                    actions.push((Segment::FirstPrefix, EditAction::TemporalContext));
                    actions.push((Segment::FirstSuffix, EditAction::TemporalContext));
                    candidate_window(&pair.first, cand, &id, segment(pre), segment(suf))
                }
                Err(e) => {
                    g.dropped.record(&e);
                    g.dropped.context_failures += 1;
                    log_drop(kind, pair, "temporal context for a candidate failed", &e);
                    continue;
                }
            },
        };
        let second = match &second_ctx {
            Some(ctx) => {
                let (pre, suf) = ctx.pick(k);
                let action = if kind == AugmentKind::Tad {
                    EditAction::TemporalContext
                } else {
                    EditAction::Paraphrased
                };
                actions.push((Segment::SecondPrefix, action));
                actions.push((Segment::SecondSuffix, action));
                DiscourseWindow {
                    prefix: segment(pre),
                    suffix: segment(suf),
                    ..pair.second.clone()
                }
            }
            None => pair.second.clone(),
        };
        let generated = MentionPair {
            pair_id: format!("{}#{}{k}", pair.pair_id, kind.tag()),
            first,
            second,
            label: pair.label.negate(),
            rank: pair.rank,
        };
        let edit_ledger = ledger(pair, &generated, &actions);
        let plausibility = scorer.score(pair, &generated);
        g.pairs.push(AugmentedPair {
            pair: generated,
            kind,
            source_pair_id: pair.pair_id.clone(),
            edit_ledger,
            plausibility,
        });
    }
    if g.pairs.is_empty() {
        log::debug!("{kind} {}: every candidate was dropped", pair.pair_id);
    }
    g
}

pub fn generate_cad(pair: &MentionPair, llm: &Llm) -> Generation {
    generate(AugmentKind::Cad, pair, llm)
}

pub fn generate_tia(pair: &MentionPair, llm: &Llm) -> Generation {
    generate(AugmentKind::Tia, pair, llm)
}

pub fn generate_cia(pair: &MentionPair, llm: &Llm) -> Generation {
    generate(AugmentKind::Cia, pair, llm)
}

pub fn generate_tad(pair: &MentionPair, llm: &Llm) -> Generation {
    generate(AugmentKind::Tad, pair, llm)
}

/// Per-run statistics.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub kind: Option<AugmentKind>,
    pub sources_total: usize,
    pub sources_eligible: usize,
    pub sources_with_output: usize,
    pub generated: usize,
    pub dropped: DropCounts,
    pub mean_plausibility: Option<f64>,
    /// Number of generated pairs per source pair id.
    pub per_source: BTreeMap<String, usize>,
}

/// Generates `kind` for every eligible pair (rank below `plan.top_n`).
///
/// Sources run in parallel; output order follows the input order.
pub fn augment_pairs(
    pairs: &[MentionPair],
    kind: AugmentKind,
    llm: &Llm,
    plan: &AugmentationPlan,
) -> (Vec<AugmentedPair>, AugmentReport) {
    let eligible: Vec<&MentionPair> = pairs.iter().filter(|p| plan.is_eligible(p)).collect();
    let generations: Vec<Generation> = eligible.par_iter().map(|p| generate(kind, p, llm)).collect();

    let mut report = AugmentReport {
        kind: Some(kind),
        sources_total: pairs.len(),
        sources_eligible: eligible.len(),
        ..AugmentReport::default()
    };
    let mut out = Vec::new();
    for (source, g) in eligible.iter().zip(generations) {
        report.dropped.add(&g.dropped);
        if !g.pairs.is_empty() {
            report.sources_with_output += 1;
            report.per_source.insert(source.pair_id.clone(), g.pairs.len());
        }
        out.extend(g.pairs);
    }
    report.generated = out.len();
    if !out.is_empty() {
        report.mean_plausibility = Some(out.iter().map(|a| a.plausibility).sum::<f64>() / out.len() as f64);
    }
    (out, report)
}

/// Human-readable rendering with `<s>`/`</s>` sentence markers.
pub fn dump(aug: &AugmentedPair) -> String {
    let ledger: Vec<String> = aug
        .edit_ledger
        .iter()
        .map(|e| serde_json::to_value(e.segment).unwrap().as_str().unwrap_or_default().to_string())
        .collect();
    format!(
        "[{}] {} (source {}, label {}, plausibility {:.4})\nedited: {}\n{}\n{}\n",
        aug.kind,
        aug.pair.pair_id,
        aug.source_pair_id,
        aug.pair.label,
        aug.plausibility,
        ledger.join(", "),
        aug.pair.first.marked(),
        aug.pair.second.marked()
    )
}
