//! Seeded synthesis of (prompt, gold pairs) records from class and style
//! lexicons and slot templates. Every emitted record is checked against the
//! grammar before it is returned.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    check_phrase, grammar::parse_prompt, GrammarConfig, Prompt, PromptError, SegmentedPrompt,
};
use crate::hashing::SplitMix64;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("template {id:?}: {reason}")]
    BadTemplate { id: String, reason: String },
    #[error("lexicon entry {phrase:?}: {reason}")]
    BadLexicon { phrase: String, reason: String },
    #[error("generated prompt {prompt:?} does not parse back to its pairs: {detail}")]
    Unparseable { prompt: String, detail: String },
    #[error("{0}")]
    Prompt(#[from] PromptError),
    #[error("line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A prompt template. Slots are `{obj}` and `{sty}`; the i-th object slot
/// pairs with the i-th style slot. A slot may carry a pattern in which `_`
/// stands for the drawn phrase, e.g. `{obj:the _ on the left}`; the expanded
/// pattern is the gold phrase.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    id: String,
    pieces: Vec<Piece>,
    slots: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Piece {
    Literal(String),
    Object(String),
    Style(String),
}

fn parse_pieces(id: &str, text: &str) -> Result<Vec<Piece>, CorpusError> {
    let bad = |reason: String| CorpusError::BadTemplate {
        id: id.to_string(),
        reason,
    };
    let mut pieces = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let close = rest[open..]
            .find('}')
            .map(|c| open + c)
            .ok_or_else(|| bad("unclosed slot".into()))?;
        if open > 0 {
            pieces.push(Piece::Literal(rest[..open].to_string()));
        }
        let body = &rest[open + 1..close];
        let (kind, pattern) = match body.split_once(':') {
            Some((k, p)) => (k, p.to_string()),
            None => (body, "_".to_string()),
        };
        if pattern.matches('_').count() != 1 {
            return Err(bad(format!(
                "slot pattern {pattern:?} needs exactly one `_`"
            )));
        }
        pieces.push(match kind {
            "obj" => Piece::Object(pattern),
            "sty" => Piece::Style(pattern),
            other => return Err(bad(format!("unknown slot kind {other:?}"))),
        });
        rest = &rest[close + 1..];
    }
    if !rest.is_empty() {
        pieces.push(Piece::Literal(rest.to_string()));
    }
    Ok(pieces)
}

impl Template {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Result<Self, CorpusError> {
        let id = id.into();
        let pieces = parse_pieces(&id, &text.into())?;
        let objects = pieces
            .iter()
            .filter(|p| matches!(p, Piece::Object(_)))
            .count();
        let styles = pieces
            .iter()
            .filter(|p| matches!(p, Piece::Style(_)))
            .count();
        if objects == 0 {
            return Err(CorpusError::BadTemplate {
                id,
                reason: "no object slot".into(),
            });
        }
        if objects != styles {
            return Err(CorpusError::BadTemplate {
                id,
                reason: format!("{objects} object slots but {styles} style slots"),
            });
        }
        Ok(Template {
            id,
            pieces,
            slots: objects,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    /// Fills slots in order and returns the prompt text with the gold pairs.
    /// `pairs.len()` must equal `slots()`.
    pub fn expand(&self, pairs: &[(&str, &str)]) -> (String, Vec<(String, String)>) {
        assert_eq!(pairs.len(), self.slots);
        let mut text = String::new();
        let mut gold: Vec<(String, String)> = vec![Default::default(); self.slots];
        let (mut oi, mut si) = (0, 0);
        for piece in &self.pieces {
            match piece {
                Piece::Literal(l) => text.push_str(l),
                Piece::Object(pat) => {
                    let phrase = pat.replacen('_', pairs[oi].0, 1);
                    text.push_str(&phrase);
                    gold[oi].0 = phrase;
                    oi += 1;
                }
                Piece::Style(pat) => {
                    let phrase = pat.replacen('_', pairs[si].1, 1);
                    text.push_str(&phrase);
                    gold[si].1 = phrase;
                    si += 1;
                }
            }
        }
        (text, gold)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusRecord {
    pub prompt_text: String,
    pub gold: SegmentedPrompt,
    pub template_id: String,
    pub seed: u64,
}

#[derive(Serialize, Deserialize)]
struct CorpusLine {
    prompt: String,
    pairs: Vec<(String, String)>,
    template_id: String,
    seed: u64,
}

fn check_lexicon(entries: &[String], grammar: &GrammarConfig) -> Result<(), CorpusError> {
    for e in entries {
        check_phrase(e).map_err(|_| CorpusError::BadLexicon {
            phrase: e.clone(),
            reason: "empty, padded, or contains a control token".into(),
        })?;
        let has_connective = e.contains([',', ';'])
            || (grammar.split_on_and
                && e.split_whitespace().any(|w| w.eq_ignore_ascii_case("and")));
        if has_connective {
            return Err(CorpusError::BadLexicon {
                phrase: e.clone(),
                reason: "contains a clause connective".into(),
            });
        }
    }
    Ok(())
}

/// Generates `count` records. Record `i` draws its template and phrases from
/// a ChaCha8 stream seeded with the `i`-th SplitMix64 output of `seed`, so a
/// record can be regenerated from its own `seed` field.
pub fn generate_corpus(
    classes: &[String],
    styles: &[String],
    templates: &[Template],
    count: usize,
    seed: u64,
    grammar: &GrammarConfig,
) -> Result<Vec<CorpusRecord>, CorpusError> {
    if count == 0 {
        return Ok(Vec::new());
    }
    if classes.is_empty() || styles.is_empty() {
        return Err(CorpusError::BadLexicon {
            phrase: String::new(),
            reason: "lexicon is empty".into(),
        });
    }
    if templates.is_empty() {
        return Err(CorpusError::BadTemplate {
            id: String::new(),
            reason: "no templates".into(),
        });
    }
    check_lexicon(classes, grammar)?;
    check_lexicon(styles, grammar)?;

    let mut seeds = SplitMix64::new(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let record_seed = seeds.next_u64();
        let record = generate_record(classes, styles, templates, record_seed)?;
        let parsed = Prompt::new(record.prompt_text.clone())
            .and_then(|p| parse_prompt(&p, grammar))
            .map_err(|e| CorpusError::Unparseable {
                prompt: record.prompt_text.clone(),
                detail: e.to_string(),
            })?;
        if parsed != record.gold {
            return Err(CorpusError::Unparseable {
                prompt: record.prompt_text,
                detail: format!("parsed as {:?}", parsed.to_tuples()),
            });
        }
        out.push(record);
    }
    Ok(out)
}

fn generate_record(
    classes: &[String],
    styles: &[String],
    templates: &[Template],
    record_seed: u64,
) -> Result<CorpusRecord, CorpusError> {
    let mut rng = ChaCha8Rng::seed_from_u64(record_seed);
    let template = &templates[rng.random_range(0..templates.len())];
    let pairs: Vec<(&str, &str)> = (0..template.slots)
        .map(|_| {
            let c = classes[rng.random_range(0..classes.len())].as_str();
            let s = styles[rng.random_range(0..styles.len())].as_str();
            (c, s)
        })
        .collect();
    let (prompt_text, gold) = template.expand(&pairs);
    Ok(CorpusRecord {
        prompt_text,
        gold: SegmentedPrompt::new(gold)?,
        template_id: template.id.clone(),
        seed: record_seed,
    })
}

fn content_lines(reader: impl BufRead) -> impl Iterator<Item = std::io::Result<String>> {
    reader.lines().filter_map(|l| match l {
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok(t.to_string()))
        }
        Err(e) => Some(Err(e)),
    })
}

/// One phrase per line; blank lines and `#` comments skipped.
pub fn read_lexicon(reader: impl BufRead) -> Result<Vec<String>, CorpusError> {
    Ok(content_lines(reader).collect::<Result<_, _>>()?)
}

/// One `id: template text` per line; blank lines and `#` comments skipped.
pub fn read_templates(reader: impl BufRead) -> Result<Vec<Template>, CorpusError> {
    content_lines(reader)
        .map(|line| {
            let line = line?;
            let (id, text) = line
                .split_once(':')
                .ok_or_else(|| CorpusError::BadTemplate {
                    id: line.clone(),
                    reason: "expected `id: text`".into(),
                })?;
            Template::new(id.trim(), text.trim())
        })
        .collect()
}

/// JSON object per line: `prompt`, `pairs`, `template_id`, `seed`.
pub fn write_corpus(records: &[CorpusRecord], mut w: impl Write) -> Result<(), CorpusError> {
    for r in records {
        let line = CorpusLine {
            prompt: r.prompt_text.clone(),
            pairs: r.gold.to_tuples(),
            template_id: r.template_id.clone(),
            seed: r.seed,
        };
        serde_json::to_writer(&mut w, &line)
            .map_err(|source| CorpusError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_corpus(reader: impl BufRead) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let l: CorpusLine = serde_json::from_str(&line).map_err(|source| CorpusError::Json {
            line: i + 1,
            source,
        })?;
        out.push(CorpusRecord {
            prompt_text: l.prompt,
            gold: SegmentedPrompt::new(l.pairs)?,
            template_id: l.template_id,
            seed: l.seed,
        });
    }
    Ok(out)
}
