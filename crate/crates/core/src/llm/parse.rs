//! Line-oriented parsing of operator responses.
//!
//! Anchors are `Expressions:` for synonyms, `N.` for numbered items and
//! `Prefix:`/`Suffix:` (or their plural forms) for paraphrase sections. A
//! numbered item runs until the next numbered line, header, ellipsis line or
//! blank line.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::LlmError;

/// Synonyms plus generated mention sentences.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationBundle {
    pub synonyms: Vec<String>,
    pub mention_sentences: Vec<String>,
}

fn numbered_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*(\d+)\s*[.)]\s*(.*?)\s*$").unwrap())
}

fn header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*([A-Za-z][A-Za-z ()]*?)\s*:\s*(.*?)\s*$").unwrap())
}

fn is_ellipsis(line: &str) -> bool {
    matches!(line.trim(), "..." | "…" | "......")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Prefix,
    Suffix,
    Other,
}

fn section_of(header: &str) -> Section {
    match header.to_ascii_lowercase().as_str() {
        "prefix" | "prefixes" | "prefix(es)" => Section::Prefix,
        "suffix" | "suffixes" | "suffix(es)" => Section::Suffix,
        _ => Section::Other,
    }
}

/// Removes a wrapping `` `…' `` or `"…"` pair.
fn unquote(item: &str) -> String {
    let t = item.trim();
    let stripped = if let Some(rest) = t.strip_prefix('`') {
        rest.strip_suffix('\'').unwrap_or(rest)
    } else if t.len() >= 2 && t.starts_with('"') && t.ends_with('"') {
        &t[1..t.len() - 1]
    } else {
        t
    };
    stripped.trim().to_string()
}

/// A numbered item tagged with the section it appeared under.
struct Item {
    section: Section,
    text: String,
}

/// Splits a response into numbered items and the `Expressions:` payload.
fn scan(raw: &str) -> (Option<String>, Vec<Item>, Vec<Section>) {
    let mut expressions = None;
    let mut items: Vec<Item> = Vec::new();
    let mut sections_seen = Vec::new();
    let mut section = Section::Other;
    let mut open = false;

    for line in raw.lines() {
        if line.trim().is_empty() || is_ellipsis(line) {
            open = false;
            continue;
        }
        if let Some(c) = numbered_re().captures(line) {
            items.push(Item {
                section,
                text: c[2].to_string(),
            });
            open = true;
            continue;
        }
        if let Some(c) = header_re().captures(line) {
            let name = c[1].to_string();
            let rest = c[2].to_string();
            if name.eq_ignore_ascii_case("expressions") {
                expressions = Some(rest);
                open = false;
                continue;
            }
            let s = section_of(&name);
            if s != Section::Other {
                section = s;
                sections_seen.push(s);
                open = false;
                // Tolerate an item on the header line itself, e.g. "Prefix: 1. ...".
                if let Some(c) = numbered_re().captures(&rest) {
                    items.push(Item {
                        section,
                        text: c[2].to_string(),
                    });
                    open = true;
                }
                continue;
            }
            if rest.is_empty() {
                // Any other bare header, e.g. "Event mentions:", closes the current item.
                open = false;
                continue;
            }
        }
        if open {
            let last = items.last_mut().expect("open implies an item");
            last.text.push(' ');
            last.text.push_str(line.trim());
        }
    }
    (expressions, items, sections_seen)
}

/// Parses an `Expressions:` line plus numbered mention sentences.
pub fn parse_generation(raw: &str) -> Result<GenerationBundle, LlmError> {
    let (expressions, items, _) = scan(raw);
    let expressions = expressions.ok_or_else(|| LlmError::parse("no `Expressions:` line", raw))?;
    let synonyms: Vec<String> = expressions
        .split(',')
        .map(|s| unquote(s.trim().trim_end_matches('.')))
        .filter(|s| !s.is_empty())
        .collect();
    if synonyms.is_empty() {
        return Err(LlmError::parse("`Expressions:` line lists nothing", raw));
    }
    let mention_sentences = numbered_texts(items.into_iter().map(|i| i.text));
    if mention_sentences.is_empty() {
        return Err(LlmError::parse("no numbered mention sentences", raw));
    }
    Ok(GenerationBundle {
        synonyms,
        mention_sentences,
    })
}

/// Parses numbered mention sentences only (responses without a synonym step).
pub fn parse_mentions(raw: &str) -> Result<Vec<String>, LlmError> {
    let (_, items, _) = scan(raw);
    let out = numbered_texts(items.into_iter().map(|i| i.text));
    if out.is_empty() {
        return Err(LlmError::parse("no numbered mention sentences", raw));
    }
    Ok(out)
}

fn numbered_texts(items: impl Iterator<Item = String>) -> Vec<String> {
    items.map(|t| unquote(&t)).filter(|t| !t.is_empty()).collect()
}

/// Parses numbered prefix and suffix variants, located by header name.
pub fn parse_paraphrases(raw: &str) -> Result<(Vec<String>, Vec<String>), LlmError> {
    let (_, items, seen) = scan(raw);
    if !seen.contains(&Section::Prefix) {
        return Err(LlmError::parse("missing `Prefix:` header", raw));
    }
    if !seen.contains(&Section::Suffix) {
        return Err(LlmError::parse("missing `Suffix:` header", raw));
    }
    let mut prefixes = Vec::new();
    let mut suffixes = Vec::new();
    for item in items {
        let text = unquote(&item.text);
        if text.is_empty() {
            continue;
        }
        match item.section {
            Section::Prefix => prefixes.push(text),
            Section::Suffix => suffixes.push(text),
            Section::Other => {}
        }
    }
    if prefixes.is_empty() {
        return Err(LlmError::parse("no numbered prefix variants", raw));
    }
    if suffixes.is_empty() {
        return Err(LlmError::parse("no numbered suffix variants", raw));
    }
    Ok((prefixes, suffixes))
}
