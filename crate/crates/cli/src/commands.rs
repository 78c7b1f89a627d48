//! Stage implementations. Each stage reads its inputs, writes artifacts
//! through a [`ManifestBuilder`] and returns a summary for the terminal.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ecr_cad::augment::{self, mix_dataset, AugmentKind, AugmentReport, AugmentedPair};
use ecr_cad::cluster::{cluster_within_topics, greedy_merge, ScoredEdge, TopicEdges};
use ecr_cad::corpus::{benchmark_stats, gold_clustering, load_corpus, validate_split_stats, SplitStats};
use ecr_cad::jsonl::read_jsonl;
use ecr_cad::llm::{
    DiskCache, HttpClient, HttpClientConfig, Llm, LlmSettings, MockClient, TranscriptClient,
};
use ecr_cad::metrics::{
    conll_with, pairwise_report, parse_doc_template, parse_pairwise_cot, GoldDocMention, LeaSingletons,
    LlmErrorTaxonomy, MetricReport, PairPrediction,
};
use ecr_cad::pairing::{build_pair_dataset, PairingConfig, RetrievalScope, TokenOverlap};
use ecr_cad::scorer::{lemma_baseline_score, ExternalScorer, ScoreRequest};
use ecr_cad::triggersim::{bias_histogram, BiasHistogram, HeadLemma, SurfaceForm, TriggerNormalizer};
use ecr_cad::{ClusterSet, Corpus, MentionPair, PairDataset, Split};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{LlmProvider, RunConfig};
use crate::manifest::ManifestBuilder;
use crate::{Cli, Command, CorpusArgs, EvalFormat, Failure, LeaMode, Normalizer, PairingArgs};

/// What a successful command reports: JSON for `--json`, text otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub json: Value,
    pub text: String,
}

impl Summary {
    fn new(json: Value, text: impl Into<String>) -> Self {
        Summary { json, text: text.into() }
    }
}

pub fn run(cli: &Cli) -> Result<Summary, Failure> {
    if let Some(path) = &cli.global.config {
        require(path)?;
    }
    let mut cfg = RunConfig::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &cli.global.cache_dir {
        cfg.cache_dir = Some(dir.clone());
    }
    apply_overrides(&mut cfg, &cli.command)?;
    cfg.validate()?;
    let name = cli.command.name();

    match &cli.command {
        Command::Ingest { corpus, out } => {
            let mut mb = ManifestBuilder::new(name, out);
            let corpus = open_corpus(&cfg, corpus, &mut mb)?;
            let summary = ingest(&corpus, &mut mb)?;
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Validate {
            corpus,
            dataset,
            expected,
            strict,
            out,
        } => validate(&cfg, corpus, dataset.as_deref(), expected.as_deref(), *strict, out.as_deref()),
        Command::AnalyzeBias {
            pairs,
            threshold,
            normalizer,
            out,
        } => {
            let mut mb = ManifestBuilder::new(name, out);
            let pairs = read_pairs(pairs, &mut mb)?;
            let summary = analyze_bias(&pairs, *threshold, *normalizer, &mut mb)?;
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::BuildPairs { corpus, out, .. } => {
            let mut mb = ManifestBuilder::new(name, out);
            let corpus = open_corpus(&cfg, corpus, &mut mb)?;
            let (_, summary) = build_pairs(&cfg, &corpus, &mut mb)?;
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Augment {
            pairs,
            kind,
            record_fixtures,
            dump,
            out,
            ..
        } => {
            let kind: AugmentKind = kind.parse().map_err(Failure::config)?;
            if record_fixtures.is_some() && cfg.llm.provider != LlmProvider::Transcripts {
                return Err(Failure::config("--record-fixtures needs the transcripts provider"));
            }
            let mut mb = ManifestBuilder::new(name, out);
            let pairs = read_pairs(pairs, &mut mb)?;
            let backend = LlmBackend::open(&cfg, &mut mb)?;
            let dataset = PairDataset {
                pairs,
                k_train: cfg.pairing.k_train,
                k_infer: cfg.pairing.k_infer,
            };
            let (_, summary) = augment_stage(&cfg, &dataset, kind, &backend.llm, *dump, &mut mb)?;
            if let Some(path) = record_fixtures {
                backend.record(path)?;
            }
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Score { pairs, out, .. } => {
            let mut mb = ManifestBuilder::new(name, out);
            let pairs = read_pairs(pairs, &mut mb)?;
            let (_, summary) = score(&cfg, &pairs, &mut mb)?;
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Cluster {
            scores,
            corpus,
            scope,
            out,
            ..
        } => {
            let scope = parse_scope(scope.as_deref())?.unwrap_or(cfg.pairing.scope);
            let mut mb = ManifestBuilder::new(name, out);
            require(scores)?;
            mb.input(scores);
            let edges: Vec<ScoredEdge> = read_jsonl(scores).map_err(Failure::data)?;
            let corpus = open_corpus(&cfg, corpus, &mut mb)?;
            let (_, _, summary) = cluster(&cfg, &corpus, &edges, scope, &mut mb)?;
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Evaluate { key, response, out, .. } => {
            let key_set = read_clusters(key)?;
            let resp_set = read_clusters(response)?;
            let report = conll_with(&key_set, &resp_set, cfg.metrics.lea_singletons).map_err(Failure::data)?;
            if let Some(out) = out {
                let mut mb = ManifestBuilder::new(name, out);
                mb.input(key);
                mb.input(response);
                mb.write("report.json", pretty(&report))?;
                mb.finish(&cfg)?;
            }
            Ok(Summary::new(to_value(&report), report.to_table()))
        }
        Command::LlmEvalParse {
            transcripts,
            gold,
            format,
            out,
        } => {
            require(transcripts)?;
            require(gold)?;
            let mut mb = ManifestBuilder::new(name, out);
            let summary = match format {
                EvalFormat::Pairwise => eval_pairwise(transcripts, gold, &mut mb)?,
                EvalFormat::DocTemplate => eval_doc_template(&cfg, transcripts, gold, &mut mb)?,
            };
            mb.finish(&cfg)?;
            Ok(summary)
        }
        Command::Pipeline {
            corpus,
            augment,
            out,
            ..
        } => pipeline(&cfg, corpus, augment, out),
    }
}

/// Folds command-specific flags into the effective configuration, so the
/// manifest records what was actually run.
fn apply_overrides(cfg: &mut RunConfig, command: &Command) -> Result<(), Failure> {
    fn pairing(cfg: &mut RunConfig, p: &PairingArgs) -> Result<(), Failure> {
        if let Some(w) = p.w {
            cfg.pairing.w = w;
        }
        if let Some(k) = p.k_train {
            cfg.pairing.k_train = k;
        }
        if let Some(k) = p.k_infer {
            cfg.pairing.k_infer = k;
        }
        if let Some(scope) = parse_scope(p.scope.as_deref())? {
            cfg.pairing.scope = scope;
        }
        Ok(())
    }
    match command {
        Command::BuildPairs { pairing: p, .. } => pairing(cfg, p)?,
        Command::Augment {
            provider,
            fixtures,
            per_original,
            top_n,
            ..
        } => {
            if let Some(p) = provider {
                cfg.llm.provider = serde_json::from_value(Value::String(p.clone()))
                    .map_err(|_| Failure::config(format!("unknown LLM provider `{p}` (expected mock, transcripts or http)")))?;
            }
            if let Some(f) = fixtures {
                cfg.llm.fixtures = Some(f.clone());
            }
            if let Some(n) = per_original {
                cfg.augment.per_original = *n;
            }
            if let Some(n) = top_n {
                cfg.augment.top_n = *n;
            }
        }
        Command::Score { scorer, batch_size, .. } => {
            if let Some(s) = scorer {
                cfg.scorer.scorer = s.clone();
            }
            if let Some(b) = batch_size {
                cfg.scorer.batch_size = *b;
            }
        }
        Command::Cluster { threshold, .. } => {
            if let Some(t) = threshold {
                cfg.cluster.threshold = *t;
            }
        }
        Command::Evaluate { lea_singletons, .. } => {
            if let Some(mode) = lea_singletons {
                cfg.metrics.lea_singletons = match mode {
                    LeaMode::SelfLink => LeaSingletons::SelfLink,
                    LeaMode::Exclude => LeaSingletons::Exclude,
                };
            }
        }
        Command::Pipeline {
            pairing: p,
            scorer,
            threshold,
            fixtures,
            ..
        } => {
            pairing(cfg, p)?;
            if let Some(s) = scorer {
                cfg.scorer.scorer = s.clone();
            }
            if let Some(t) = threshold {
                cfg.cluster.threshold = *t;
            }
            if let Some(f) = fixtures {
                cfg.llm.fixtures = Some(f.clone());
            }
        }
        Command::Ingest { .. } | Command::Validate { .. } | Command::AnalyzeBias { .. } | Command::LlmEvalParse { .. } => {}
    }
    Ok(())
}

fn parse_scope(s: Option<&str>) -> Result<Option<RetrievalScope>, Failure> {
    s.map(|s| s.parse::<RetrievalScope>().map_err(Failure::config)).transpose()
}

/// Missing inputs are configuration errors.
fn require(path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::config(format!("path not found: {}", path.display())))
    }
}

fn pretty<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn to_value<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("artifact serializes")
}

fn jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("artifact serializes"));
        out.push('\n');
    }
    out
}

fn corpus_location(cfg: &RunConfig, args: &CorpusArgs) -> Result<(PathBuf, Split), Failure> {
    let split: Split = args.split.parse().map_err(Failure::config)?;
    let configured = match split {
        Split::Train => &cfg.corpus.train,
        Split::Dev => &cfg.corpus.dev,
        Split::Test => &cfg.corpus.test,
    };
    let path = args
        .corpus
        .clone()
        .or_else(|| configured.clone())
        .ok_or_else(|| Failure::config(format!("no corpus given for split {split} (use --corpus or corpus.{split})")))?;
    require(&path)?;
    Ok((path, split))
}

fn open_corpus(cfg: &RunConfig, args: &CorpusArgs, mb: &mut ManifestBuilder) -> Result<Corpus, Failure> {
    let (path, split) = corpus_location(cfg, args)?;
    mb.input(&path);
    load_corpus(&path, split).map_err(Failure::data)
}

fn read_pairs(path: &Path, mb: &mut ManifestBuilder) -> Result<Vec<MentionPair>, Failure> {
    require(path)?;
    mb.input(path);
    read_jsonl(path).map_err(Failure::data)
}

fn read_clusters(path: &Path) -> Result<ClusterSet, Failure> {
    require(path)?;
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn ingest(corpus: &Corpus, mb: &mut ManifestBuilder) -> Result<Summary, Failure> {
    let stats = SplitStats::of(corpus);
    let clusters: BTreeSet<&str> = corpus.mentions.values().map(|m| m.gold_cluster_id.as_str()).collect();
    mb.write("mentions.jsonl", jsonl(corpus.mentions.values()))?;
    let report = json!({
        "split": corpus.split,
        "topics": corpus.topics().len(),
        "documents": stats.documents,
        "sentences": stats.sentences,
        "mentions": stats.mentions,
        "gold_clusters": clusters.len(),
    });
    mb.write("stats.json", pretty(&report))?;
    let text = format!(
        "{}: {} documents, {} sentences, {} mentions, {} gold clusters\n",
        corpus.split,
        stats.documents,
        stats.sentences,
        stats.mentions,
        clusters.len()
    );
    Ok(Summary::new(report, text))
}

fn parse_expected(s: &str) -> Result<SplitStats, Failure> {
    let nums: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::config(format!("--expected `{s}` is not `documents,sentences,mentions`")))?;
    match nums[..] {
        [documents, sentences, mentions] => Ok(SplitStats {
            documents,
            sentences,
            mentions,
        }),
        _ => Err(Failure::config(format!("--expected `{s}` is not `documents,sentences,mentions`"))),
    }
}

fn validate(
    cfg: &RunConfig,
    args: &CorpusArgs,
    dataset: Option<&str>,
    expected: Option<&str>,
    strict: bool,
    out: Option<&Path>,
) -> Result<Summary, Failure> {
    let (path, split) = corpus_location(cfg, args)?;
    let expected = match (dataset, expected) {
        (_, Some(e)) => parse_expected(e)?,
        (Some(d), None) => benchmark_stats(d, split)
            .ok_or_else(|| Failure::config(format!("no published statistics for dataset `{d}` (expected ecb+, fcc or gvc)")))?,
        (None, None) => return Err(Failure::config("validate needs --dataset or --expected")),
    };
    let corpus = load_corpus(&path, split).map_err(Failure::data)?;
    let report = validate_split_stats(&corpus, &expected);
    if let Some(out) = out {
        let mut mb = ManifestBuilder::new("validate", out);
        mb.input(&path);
        mb.write("validation.json", pretty(&report))?;
        mb.finish(cfg)?;
    }
    let mut text = String::new();
    for c in &report.checks {
        let _ = writeln!(
            text,
            "{:<10} expected {:>6} actual {:>6} {}",
            c.field,
            c.expected,
            c.actual,
            if c.pass { "ok" } else { "MISMATCH" }
        );
    }
    if strict && !report.all_pass() {
        return Err(Failure::data(format!(
            "{} statistic(s) differ from the expected counts\n{text}",
            report.failures()
        )));
    }
    Ok(Summary::new(to_value(&report), text))
}

fn bias_text(h: &BiasHistogram) -> String {
    let pct = h
        .percent_similar_coref
        .map_or("n/a".to_string(), |p| format!("{:.1}%", p * 100.0));
    format!(
        "{}similar coreferential triggers: {pct} (threshold {})\n",
        h.to_csv(),
        h.threshold
    )
}

fn analyze_bias(
    pairs: &[MentionPair],
    threshold: u8,
    normalizer: Normalizer,
    mb: &mut ManifestBuilder,
) -> Result<Summary, Failure> {
    let norm: &dyn TriggerNormalizer = match normalizer {
        Normalizer::Lemma => &HeadLemma,
        Normalizer::Surface => &SurfaceForm,
    };
    let h = bias_histogram(pairs, norm, threshold).map_err(Failure::data)?;
    mb.write("bias.csv", h.to_csv())?;
    mb.write("bias.json", pretty(&h))?;
    Ok(Summary::new(to_value(&h), bias_text(&h)))
}

fn build_pairs(cfg: &RunConfig, corpus: &Corpus, mb: &mut ManifestBuilder) -> Result<(PairDataset, Summary), Failure> {
    let pairing: PairingConfig = cfg.pairing.to_pairing();
    let sim = TokenOverlap::new(corpus, pairing.w);
    let dataset = build_pair_dataset(corpus, &pairing, &sim).map_err(Failure::data)?;
    let coref = dataset.pairs.iter().filter(|p| p.label.is_coref()).count();
    mb.write("pairs.jsonl", jsonl(&dataset.pairs))?;
    let meta = json!({
        "split": corpus.split,
        "pairs": dataset.pairs.len(),
        "coref": coref,
        "not_coref": dataset.pairs.len() - coref,
        "w": pairing.w,
        "k": pairing.k_for(corpus.split),
        "k_train": dataset.k_train,
        "k_infer": dataset.k_infer,
        "scope": pairing.scope,
    });
    mb.write("pairs_meta.json", pretty(&meta))?;
    let text = format!(
        "{} pairs ({coref} coreferential) with w = {}, k = {}\n",
        dataset.pairs.len(),
        pairing.w,
        pairing.k_for(corpus.split)
    );
    Ok((dataset, Summary::new(meta, text)))
}

/// The configured LLM, plus the transcript client when recording is possible.
struct LlmBackend {
    llm: Llm,
    transcripts: Option<Arc<TranscriptClient>>,
}

impl LlmBackend {
    fn open(cfg: &RunConfig, mb: &mut ManifestBuilder) -> Result<Self, Failure> {
        let settings = LlmSettings {
            model: cfg.llm.model.clone(),
            temperature: cfg.llm.temperature,
            max_tokens: cfg.llm.max_tokens,
            concurrency: cfg.llm.concurrency,
            ..LlmSettings::default()
        };
        let fixtures = || -> Result<PathBuf, Failure> {
            let path = cfg
                .llm
                .fixtures
                .clone()
                .ok_or_else(|| Failure::config("the mock and transcripts providers need llm.fixtures or --fixtures"))?;
            require(&path)?;
            Ok(path)
        };
        let mut transcripts = None;
        let client: Box<dyn ecr_cad::llm::ChatClient> = match cfg.llm.provider {
            LlmProvider::Mock => {
                let path = fixtures()?;
                mb.input(&path);
                Box::new(MockClient::from_file(&path).map_err(Failure::config)?)
            }
            LlmProvider::Transcripts => {
                let path = fixtures()?;
                mb.input(&path);
                let client = Arc::new(TranscriptClient::from_file(&path).map_err(Failure::config)?);
                transcripts = Some(client.clone());
                Box::new(client)
            }
            LlmProvider::Http => {
                let config = HttpClientConfig {
                    endpoint: cfg.llm.endpoint.clone(),
                    ..HttpClientConfig::default()
                }
                .with_key_from_env(&cfg.llm.api_key_env)
                .map_err(Failure::config)?;
                Box::new(HttpClient::new(config))
            }
        };
        let mut llm = Llm::new(client, settings);
        if let Some(dir) = &cfg.cache_dir {
            llm = llm.with_disk_cache(DiskCache::new(dir).map_err(Failure::config)?);
        }
        Ok(LlmBackend { llm, transcripts })
    }

    fn record(&self, path: &Path) -> Result<(), Failure> {
        let client = self.transcripts.as_ref().expect("recording checked against the provider");
        std::fs::write(path, client.recorded().to_pretty_json())
            .map_err(|e| Failure::data(format!("cannot write {}: {e}", path.display())))
    }
}

fn augment_stage(
    cfg: &RunConfig,
    dataset: &PairDataset,
    kind: AugmentKind,
    llm: &Llm,
    dump: bool,
    mb: &mut ManifestBuilder,
) -> Result<(PairDataset, Summary), Failure> {
    let plan = cfg.plan()?;
    let (generated, report): (Vec<AugmentedPair>, AugmentReport) = augment::augment_pairs(&dataset.pairs, kind, llm, &plan);
    let mixed = mix_dataset(dataset, &generated, &plan);
    let tag = kind.to_string().to_lowercase();
    mb.write(&format!("augmented_{tag}.jsonl"), jsonl(&generated))?;
    mb.write(&format!("mixed_{tag}.jsonl"), jsonl(&mixed.pairs))?;
    mb.write(&format!("augment_{tag}_report.json"), pretty(&report))?;
    if dump {
        let text: String = generated.iter().map(augment::dump).collect::<Vec<_>>().join("\n");
        mb.write(&format!("augmented_{tag}.txt"), text)?;
    }
    let text = format!(
        "{kind}: {} generated from {} eligible of {} pairs ({} dropped); mixed set has {} pairs\n",
        report.generated,
        report.sources_eligible,
        report.sources_total,
        report.dropped.total(),
        mixed.pairs.len()
    );
    let summary = Summary::new(
        json!({ "report": report, "mixed_pairs": mixed.pairs.len() }),
        text,
    );
    Ok((mixed, summary))
}

#[derive(Serialize)]
struct ScoreFailure<'a> {
    pair_id: &'a str,
    error: String,
}

fn score(cfg: &RunConfig, pairs: &[MentionPair], mb: &mut ManifestBuilder) -> Result<(Vec<ScoredEdge>, Summary), Failure> {
    let scorer = cfg.scorer.scorer.as_str();
    let edge = |p: &MentionPair, score: f64| ScoredEdge {
        pair_id: p.pair_id.clone(),
        first: p.first.mention_id.clone(),
        second: p.second.mention_id.clone(),
        score,
    };
    let mut edges = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    if scorer == "lemma" {
        edges.extend(pairs.iter().map(|p| edge(p, lemma_baseline_score(p).score)));
    } else if scorer.starts_with("http://") || scorer.starts_with("https://") {
        let requests: Vec<ScoreRequest> = pairs.iter().map(ScoreRequest::from_pair).collect();
        let outcomes = if requests.is_empty() {
            Vec::new()
        } else {
            ExternalScorer::new(scorer)
                .with_batch_size(cfg.scorer.batch_size)
                .score_batch(&requests)
                .map_err(Failure::data)?
        };
        for (pair, outcome) in pairs.iter().zip(outcomes) {
            match outcome {
                Ok(r) => edges.push(edge(pair, r.score)),
                Err(e) => failures.push(ScoreFailure {
                    pair_id: &pair.pair_id,
                    error: e.to_string(),
                }),
            }
        }
    } else {
        return Err(Failure::config(format!("unknown scorer `{scorer}` (expected lemma or an http(s) URL)")));
    }
    mb.write("scores.jsonl", jsonl(&edges))?;
    mb.write("score_errors.jsonl", jsonl(&failures))?;
    let positive = edges.iter().filter(|e| e.score >= cfg.cluster.threshold).count();
    let summary = Summary::new(
        json!({ "scored": edges.len(), "failed": failures.len(), "above_threshold": positive }),
        format!(
            "{} pairs scored with {scorer} ({} failed, {positive} at or above {})\n",
            edges.len(),
            failures.len(),
            cfg.cluster.threshold
        ),
    );
    Ok((edges, summary))
}

fn cluster(
    cfg: &RunConfig,
    corpus: &Corpus,
    edges: &[ScoredEdge],
    scope: RetrievalScope,
    mb: &mut ManifestBuilder,
) -> Result<(ClusterSet, ClusterSet, Summary), Failure> {
    let threshold = cfg.cluster.threshold;
    let response = match scope {
        RetrievalScope::WithinTopic => {
            let mut by_topic: BTreeMap<String, TopicEdges> = corpus
                .mentions_by_topic()
                .into_iter()
                .map(|(t, ms)| {
                    let topic = TopicEdges {
                        universe: ms.into_iter().collect(),
                        edges: Vec::new(),
                    };
                    (t, topic)
                })
                .collect();
            for e in edges {
                let m = corpus.mention(&e.first).map_err(Failure::data)?;
                let topic = corpus.topic_of(m).to_string();
                by_topic.get_mut(&topic).expect("every mention has a topic").edges.push(e.clone());
            }
            cluster_within_topics(&by_topic, threshold).map_err(Failure::data)?
        }
        RetrievalScope::CorpusWide => {
            let universe: BTreeSet<String> = corpus.mentions.keys().cloned().collect();
            greedy_merge(edges, threshold, &universe).map_err(Failure::data)?
        }
    };
    let key = gold_clustering(corpus, None).map_err(Failure::data)?;
    mb.write("response.json", pretty(&response))?;
    mb.write("key.json", pretty(&key))?;
    let summary = Summary::new(
        json!({ "response_clusters": response.len(), "key_clusters": key.len(), "mentions": key.universe().len() }),
        format!(
            "{} response clusters, {} gold clusters over {} mentions\n",
            response.len(),
            key.len(),
            key.universe().len()
        ),
    );
    Ok((response, key, summary))
}

/// `<id>.txt` files of a directory, sorted by id.
fn transcript_files(dir: &Path) -> Result<BTreeMap<String, String>, Failure> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::config(format!("{}: {e}", dir.display())))?;
    let mut out = BTreeMap::new();
    for entry in entries {
        let path = entry.map_err(Failure::data)?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("txt") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let text = std::fs::read_to_string(&path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        out.insert(id.to_string(), text);
    }
    Ok(out)
}

fn read_json_file<T: serde::de::DeserializeOwned>(path: &Path, mb: &mut ManifestBuilder) -> Result<T, Failure> {
    mb.input(path);
    let text = std::fs::read_to_string(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

fn eval_pairwise(dir: &Path, gold_path: &Path, mb: &mut ManifestBuilder) -> Result<Summary, Failure> {
    let gold: BTreeMap<String, bool> = read_json_file(gold_path, mb)?;
    let responses = transcript_files(dir)?;
    let mut parses = Vec::with_capacity(responses.len());
    let mut predictions = Vec::with_capacity(responses.len());
    for (id, raw) in &responses {
        let parsed = parse_pairwise_cot(raw);
        parses.push(json!({
            "pair_id": id,
            "complete": parsed.is_complete(),
            "label": parsed.label,
            "score": parsed.score,
        }));
        predictions.push(PairPrediction {
            pair_id: id.clone(),
            prediction: parsed.label.map(|l| l == ecr_cad::metrics::CotLabel::Coreferential),
        });
    }
    let report = pairwise_report(&gold, &predictions).map_err(Failure::data)?;
    mb.write("parses.jsonl", jsonl(&parses))?;
    mb.write("pairwise_report.json", pretty(&report))?;
    let text = format!(
        "R {:.1}  P {:.1}  F1 {:.1}  TComp {:.1}  ({} of {} complete)\n",
        report.recall * 100.0,
        report.precision * 100.0,
        report.f1 * 100.0,
        report.tcomp * 100.0,
        report.n_complete,
        report.n_total
    );
    Ok(Summary::new(to_value(&report), text))
}

fn eval_doc_template(
    cfg: &RunConfig,
    dir: &Path,
    gold_path: &Path,
    mb: &mut ManifestBuilder,
) -> Result<Summary, Failure> {
    let gold: BTreeMap<String, Vec<GoldDocMention>> = read_json_file(gold_path, mb)?;
    let responses = transcript_files(dir)?;
    if let Some(extra) = responses.keys().find(|id| !gold.contains_key(*id)) {
        return Err(Failure::data(format!("response `{extra}` has no gold document")));
    }
    let mut taxonomy = LlmErrorTaxonomy::default();
    let mut parses = Vec::with_capacity(gold.len());
    let mut response_clusters: Vec<Vec<String>> = Vec::new();
    let mut key_groups: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    let mut unreadable = 0usize;
    for (doc_id, mentions) in &gold {
        for m in mentions {
            key_groups.entry(m.gold_cluster_id.as_str()).or_default().push(m.mention_id.clone());
        }
        let raw = responses.get(doc_id).map(String::as_str).unwrap_or("");
        match parse_doc_template(mentions, raw) {
            Ok((ann, errors)) => {
                taxonomy.add(&errors);
                // Cluster ids are local to a response, so clusters never span documents.
                response_clusters.extend(ann.response.clusters().iter().cloned());
                parses.push(json!({ "doc_id": doc_id, "readable": true, "errors": errors, "annotation": ann }));
            }
            Err(e) => {
                // Nothing was tagged: every gold mention is an omitted (type-2) miss.
                unreadable += 1;
                taxonomy.missing_type2 += mentions.len();
                response_clusters.extend(mentions.iter().map(|m| vec![m.mention_id.clone()]));
                parses.push(json!({ "doc_id": doc_id, "readable": false, "error": e.to_string() }));
            }
        }
    }
    let key = ClusterSet::try_from_clusters(key_groups.into_values()).map_err(Failure::data)?;
    let response = ClusterSet::try_from_clusters(response_clusters).map_err(Failure::data)?;
    let metrics: MetricReport = conll_with(&key, &response, cfg.metrics.lea_singletons).map_err(Failure::data)?;
    mb.write("parses.jsonl", jsonl(&parses))?;
    mb.write("taxonomy.json", pretty(&taxonomy))?;
    let documents = gold.len();
    let tcomp = if documents == 0 {
        0.0
    } else {
        (documents - unreadable) as f64 / documents as f64
    };
    let report = json!({
        "documents": documents,
        "unreadable": unreadable,
        "tcomp": tcomp,
        "taxonomy": taxonomy,
        "metrics": metrics,
    });
    mb.write("report.json", pretty(&report))?;
    let text = format!(
        "{}{documents} documents, {unreadable} unreadable; misses {} (type 1) {} (type 2), {} redundant, {} wrong\n",
        metrics.to_table(),
        taxonomy.missing_type1,
        taxonomy.missing_type2,
        taxonomy.redundant,
        taxonomy.wrong_prediction
    );
    Ok(Summary::new(report, text))
}

fn pipeline(cfg: &RunConfig, corpus_args: &CorpusArgs, kinds: &[String], out: &Path) -> Result<Summary, Failure> {
    let kinds: Vec<AugmentKind> = kinds
        .iter()
        .map(|k| k.parse().map_err(Failure::config))
        .collect::<Result<_, _>>()?;
    let mut mb = ManifestBuilder::new("pipeline", out);
    let corpus = open_corpus(cfg, corpus_args, &mut mb)?;
    let mut text = ingest(&corpus, &mut mb)?.text;
    let (dataset, s) = build_pairs(cfg, &corpus, &mut mb)?;
    text.push_str(&s.text);
    if !dataset.pairs.is_empty() {
        let h = bias_histogram(&dataset.pairs, &HeadLemma, ecr_cad::triggersim::DEFAULT_THRESHOLD).map_err(Failure::data)?;
        mb.write("bias.csv", h.to_csv())?;
        mb.write("bias.json", pretty(&h))?;
        text.push_str(&bias_text(&h));
    }
    if !kinds.is_empty() {
        let backend = LlmBackend::open(cfg, &mut mb)?;
        for kind in kinds {
            let (_, s) = augment_stage(cfg, &dataset, kind, &backend.llm, false, &mut mb)?;
            text.push_str(&s.text);
        }
    }
    let (edges, s) = score(cfg, &dataset.pairs, &mut mb)?;
    text.push_str(&s.text);
    let (response, key, s) = cluster(cfg, &corpus, &edges, cfg.pairing.scope, &mut mb)?;
    text.push_str(&s.text);
    let report = conll_with(&key, &response, cfg.metrics.lea_singletons).map_err(Failure::data)?;
    mb.write("report.json", pretty(&report))?;
    text.push_str(&report.to_table());
    mb.finish(cfg)?;
    Ok(Summary::new(to_value(&report), text))
}
