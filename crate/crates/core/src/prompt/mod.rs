//! Prompt segmentation: a deterministic grammar that splits a free-form
//! prompt into ordered object/style pairs, the `<PAIR>`/`<SEP>` wire
//! serialization of those pairs, token-level cross-entropy scoring and a
//! seeded corpus generator.

mod corpus;
mod grammar;
mod loss;
mod serial;

pub use corpus::{
    generate_corpus, read_corpus, read_lexicon, read_templates, write_corpus, CorpusError,
    CorpusRecord, Template,
};
pub use grammar::{parse_prompt, parse_with_spans, GrammarConfig, ParsedClause, StyleMarker};
pub use loss::{token_cross_entropy, token_cross_entropy_or_inf, LossError, TokenDistribution};
pub use serial::{deserialize_pairs, serialize_pairs, TokenSeq, Vocabulary};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PAIR_TOKEN: &str = "<PAIR>";
pub const SEP_TOKEN: &str = "<SEP>";
pub const PAIR_TOKEN_ID: u32 = 0;
pub const SEP_TOKEN_ID: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("no clause carries a style marker")]
    NoPairsFound,
    #[error("clause {clause:?} has no style marker")]
    UnstyledClause { clause: String },
    #[error("clause {clause:?} is ambiguous: {readings:?}")]
    AmbiguousClause {
        clause: String,
        readings: Vec<(String, String)>,
    },
    #[error("phrase {phrase:?} is empty, padded, or contains a control token")]
    IllegalPhrase { phrase: String },
    #[error("malformed pair sequence: {0}")]
    MalformedSequence(String),
    #[error("token id {id} outside vocabulary of size {vocab_size}")]
    TokenOutOfRange { id: u32, vocab_size: u32 },
    #[error("word {0:?} not in vocabulary")]
    UnknownWord(String),
}

/// Raw user prompt, non-empty after trimming.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt(String);

impl Prompt {
    pub fn new(text: impl Into<String>) -> Result<Self, PromptError> {
        let text = text.into();
        if text.trim().is_empty() {
            return Err(PromptError::EmptyPrompt);
        }
        Ok(Prompt(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectStylePair {
    pub object_phrase: String,
    pub style_phrase: String,
    pub ordinal: usize,
}

/// Ordered object/style pairs. Construction validates every phrase, so a
/// value of this type always serializes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(String, String)>", into = "Vec<(String, String)>")]
pub struct SegmentedPrompt {
    pairs: Vec<ObjectStylePair>,
}

pub(crate) fn check_phrase(phrase: &str) -> Result<(), PromptError> {
    let bad = phrase.is_empty()
        || phrase.trim() != phrase
        || phrase.contains(PAIR_TOKEN)
        || phrase.contains(SEP_TOKEN);
    if bad {
        return Err(PromptError::IllegalPhrase {
            phrase: phrase.to_string(),
        });
    }
    Ok(())
}

impl SegmentedPrompt {
    pub fn new<O, S>(pairs: impl IntoIterator<Item = (O, S)>) -> Result<Self, PromptError>
    where
        O: Into<String>,
        S: Into<String>,
    {
        let mut out = Vec::new();
        for (ordinal, (o, s)) in pairs.into_iter().enumerate() {
            let (object_phrase, style_phrase) = (o.into(), s.into());
            check_phrase(&object_phrase)?;
            check_phrase(&style_phrase)?;
            out.push(ObjectStylePair {
                object_phrase,
                style_phrase,
                ordinal,
            });
        }
        if out.is_empty() {
            return Err(PromptError::MalformedSequence("no pairs".into()));
        }
        Ok(SegmentedPrompt { pairs: out })
    }

    pub fn pairs(&self) -> &[ObjectStylePair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// t_seg: object phrases in order.
    pub fn objects(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.object_phrase.as_str())
    }

    /// t_sty: style phrases in order, duplicates kept.
    pub fn styles(&self) -> impl Iterator<Item = &str> {
        self.pairs.iter().map(|p| p.style_phrase.as_str())
    }

    /// Style phrases in first-appearance order, each once.
    pub fn distinct_styles(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for s in self.styles() {
            if !seen.contains(&s) {
                seen.push(s);
            }
        }
        seen
    }

    pub fn to_tuples(&self) -> Vec<(String, String)> {
        self.pairs
            .iter()
            .map(|p| (p.object_phrase.clone(), p.style_phrase.clone()))
            .collect()
    }
}

impl TryFrom<Vec<(String, String)>> for SegmentedPrompt {
    type Error = PromptError;

    fn try_from(v: Vec<(String, String)>) -> Result<Self, Self::Error> {
        SegmentedPrompt::new(v)
    }
}

impl From<SegmentedPrompt> for Vec<(String, String)> {
    fn from(sp: SegmentedPrompt) -> Self {
        sp.to_tuples()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordinals_are_consecutive() {
        let sp = SegmentedPrompt::new([("a", "x"), ("b", "y"), ("a", "z")]).unwrap();
        let ords: Vec<_> = sp.pairs().iter().map(|p| p.ordinal).collect();
        assert_eq!(ords, vec![0, 1, 2]);
    }

    #[test]
    fn control_tokens_rejected() {
        assert!(matches!(
            SegmentedPrompt::new([("a <PAIR> b", "x")]),
            Err(PromptError::IllegalPhrase { .. })
        ));
        assert!(SegmentedPrompt::new([("a", "x<SEP>")]).is_err());
        assert!(SegmentedPrompt::new([("", "x")]).is_err());
        assert!(SegmentedPrompt::new([(" a", "x")]).is_err());
    }

    #[test]
    fn distinct_styles_keep_first_order() {
        let sp = SegmentedPrompt::new([("a", "x"), ("b", "y"), ("c", "x")]).unwrap();
        assert_eq!(sp.distinct_styles(), vec!["x", "y"]);
    }

    #[test]
    fn blank_prompt_rejected() {
        assert_eq!(Prompt::new("  \t"), Err(PromptError::EmptyPrompt));
    }
}
