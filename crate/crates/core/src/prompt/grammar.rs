//! Clause grammar.
//!
//! A prompt is a sequence of clauses joined by connectives (`,`, `;`, `and`).
//! Each clause is `OBJECT <marker> STYLE` for one of four markers:
//!
//! | marker        | surface form                  |
//! |---------------|-------------------------------|
//! | `InStyle`     | `OBJECT in STYLE style`       |
//! | `StyleOf`     | `OBJECT in the style of STYLE`|
//! | `As`          | `OBJECT as STYLE`             |
//! | `StyledLike`  | `OBJECT styled like STYLE`    |
//!
//! Keywords match case-insensitively. When several marker keywords occur in
//! one clause the rightmost wins, so positional phrases ("bird in the sky in
//! oil style") stay on the object side. Two markers anchored at the same word
//! are reported as [`PromptError::AmbiguousClause`].
//!
//! A connective-delimited segment that carries no marker is glued onto the
//! following segment ("cat and dog in watercolor style"); a trailing one is
//! glued back onto the preceding clause ("sky styled like black and white").

use serde::{Deserialize, Serialize};

use super::{check_phrase, Prompt, PromptError, SegmentedPrompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleMarker {
    InStyle,
    StyleOf,
    As,
    StyledLike,
}

impl StyleMarker {
    pub const ALL: [StyleMarker; 4] = [
        StyleMarker::InStyle,
        StyleMarker::StyleOf,
        StyleMarker::As,
        StyleMarker::StyledLike,
    ];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrammarConfig {
    pub markers: Vec<StyleMarker>,
    /// Treat the word `and` as a clause connective.
    pub split_on_and: bool,
}

impl Default for GrammarConfig {
    fn default() -> Self {
        GrammarConfig {
            markers: StyleMarker::ALL.to_vec(),
            split_on_and: true,
        }
    }
}

/// One parsed clause with the byte offset of its object phrase in the prompt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedClause {
    pub object_phrase: String,
    pub style_phrase: String,
    pub marker: StyleMarker,
    pub object_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TokKind {
    Word,
    Connective,
}

#[derive(Debug, Clone, Copy)]
struct Tok {
    kind: TokKind,
    start: usize,
    end: usize,
}

fn tokenize(text: &str, grammar: &GrammarConfig) -> Vec<Tok> {
    let mut toks = Vec::new();
    let mut word_start: Option<usize> = None;
    let flush = |toks: &mut Vec<Tok>, start: Option<usize>, end: usize| {
        if let Some(s) = start {
            let kind = if grammar.split_on_and && text[s..end].eq_ignore_ascii_case("and") {
                TokKind::Connective
            } else {
                TokKind::Word
            };
            toks.push(Tok {
                kind,
                start: s,
                end,
            });
        }
    };
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            flush(&mut toks, word_start.take(), i);
        } else if c == ',' || c == ';' {
            flush(&mut toks, word_start.take(), i);
            toks.push(Tok {
                kind: TokKind::Connective,
                start: i,
                end: i + 1,
            });
        } else if word_start.is_none() {
            word_start = Some(i);
        }
    }
    flush(&mut toks, word_start, text.len());
    toks
}

#[derive(Debug, Clone)]
struct Reading {
    marker: StyleMarker,
    keyword: usize,
    object: (usize, usize),
    style: (usize, usize),
}

/// All marker readings of a clause. `toks` spans from the clause's first word
/// to its last and may contain interior connectives (glued segments).
fn readings(text: &str, toks: &[Tok], grammar: &GrammarConfig) -> Vec<Reading> {
    let words: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].kind == TokKind::Word)
        .collect();
    let w = |i: usize| &text[toks[words[i]].start..toks[words[i]].end];
    let is = |i: usize, kw: &str| w(i).eq_ignore_ascii_case(kw);
    let n = words.len();
    let span = |a: usize, b: usize| (toks[words[a]].start, toks[words[b]].end);

    let mut out = Vec::new();
    for &marker in &grammar.markers {
        match marker {
            StyleMarker::InStyle => {
                if n >= 4 && is(n - 1, "style") {
                    for k in 1..n - 2 {
                        if is(k, "in") {
                            out.push(Reading {
                                marker,
                                keyword: k,
                                object: span(0, k - 1),
                                style: span(k + 1, n - 2),
                            });
                        }
                    }
                }
            }
            StyleMarker::StyleOf => {
                for k in 1..n.saturating_sub(4) {
                    if is(k, "in") && is(k + 1, "the") && is(k + 2, "style") && is(k + 3, "of") {
                        out.push(Reading {
                            marker,
                            keyword: k,
                            object: span(0, k - 1),
                            style: span(k + 4, n - 1),
                        });
                    }
                }
            }
            StyleMarker::As => {
                for k in 1..n.saturating_sub(1) {
                    if is(k, "as") {
                        out.push(Reading {
                            marker,
                            keyword: k,
                            object: span(0, k - 1),
                            style: span(k + 1, n - 1),
                        });
                    }
                }
            }
            StyleMarker::StyledLike => {
                for k in 1..n.saturating_sub(2) {
                    if is(k, "styled") && is(k + 1, "like") {
                        out.push(Reading {
                            marker,
                            keyword: k,
                            object: span(0, k - 1),
                            style: span(k + 2, n - 1),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Outcome of matching one clause.
enum Match {
    None,
    One(ParsedClause),
}

fn match_clause(text: &str, toks: &[Tok], grammar: &GrammarConfig) -> Result<Match, PromptError> {
    let rs = readings(text, toks, grammar);
    let Some(best) = rs.iter().map(|r| r.keyword).max() else {
        return Ok(Match::None);
    };
    let top: Vec<&Reading> = rs.iter().filter(|r| r.keyword == best).collect();
    let slice = |(a, b): (usize, usize)| text[a..b].to_string();
    if top.len() > 1 {
        let clause = text[toks[0].start..toks[toks.len() - 1].end].to_string();
        return Err(PromptError::AmbiguousClause {
            clause,
            readings: top
                .iter()
                .map(|r| (slice(r.object), slice(r.style)))
                .collect(),
        });
    }
    let r = top[0];
    let clause = ParsedClause {
        object_phrase: slice(r.object),
        style_phrase: slice(r.style),
        marker: r.marker,
        object_start: r.object.0,
    };
    check_phrase(&clause.object_phrase)?;
    check_phrase(&clause.style_phrase)?;
    Ok(Match::One(clause))
}

/// Parses a prompt and reports where each object phrase begins.
pub fn parse_with_spans(
    prompt: &Prompt,
    grammar: &GrammarConfig,
) -> Result<Vec<ParsedClause>, PromptError> {
    let text = prompt.as_str();
    let toks = tokenize(text, grammar);

    // Segments are maximal runs of word tokens, as index ranges into `toks`.
    let mut segments: Vec<(usize, usize)> = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        if toks[i].kind == TokKind::Connective {
            i += 1;
            continue;
        }
        let start = i;
        while i < toks.len() && toks[i].kind == TokKind::Word {
            i += 1;
        }
        segments.push((start, i));
    }
    if segments.is_empty() {
        return Err(PromptError::EmptyPrompt);
    }

    // (clause token range, parsed clause)
    let mut clauses: Vec<((usize, usize), ParsedClause)> = Vec::new();
    let mut pending: Option<usize> = None;
    for &(s, e) in &segments {
        let from = pending.unwrap_or(s);
        match match_clause(text, &toks[from..e], grammar)? {
            Match::One(c) => {
                clauses.push(((from, e), c));
                pending = None;
            }
            Match::None => pending = Some(from),
        }
    }

    if let Some(from) = pending {
        let Some(((prev_from, _), _)) = clauses.pop() else {
            return Err(PromptError::NoPairsFound);
        };
        let end = segments.last().expect("non-empty").1;
        match match_clause(text, &toks[prev_from..end], grammar)? {
            Match::One(c) => clauses.push(((prev_from, end), c)),
            Match::None => {
                return Err(PromptError::UnstyledClause {
                    clause: text[toks[from].start..toks[end - 1].end].to_string(),
                })
            }
        }
    }

    Ok(clauses.into_iter().map(|(_, c)| c).collect())
}

pub fn parse_prompt(
    prompt: &Prompt,
    grammar: &GrammarConfig,
) -> Result<SegmentedPrompt, PromptError> {
    let clauses = parse_with_spans(prompt, grammar)?;
    SegmentedPrompt::new(
        clauses
            .into_iter()
            .map(|c| (c.object_phrase, c.style_phrase)),
    )
}
