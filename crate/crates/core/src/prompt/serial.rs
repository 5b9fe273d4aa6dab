use std::collections::HashMap;

use super::{PromptError, SegmentedPrompt, PAIR_TOKEN, PAIR_TOKEN_ID, SEP_TOKEN, SEP_TOKEN_ID};

/// `obj0 <PAIR> sty0 <SEP> obj1 <PAIR> sty1 ...`
pub fn serialize_pairs(sp: &SegmentedPrompt) -> String {
    sp.pairs()
        .iter()
        .map(|p| format!("{} {PAIR_TOKEN} {}", p.object_phrase, p.style_phrase))
        .collect::<Vec<_>>()
        .join(&format!(" {SEP_TOKEN} "))
}

pub fn deserialize_pairs(s: &str) -> Result<SegmentedPrompt, PromptError> {
    if s.trim().is_empty() {
        return Err(PromptError::MalformedSequence("empty sequence".into()));
    }
    let mut pairs = Vec::new();
    for (i, chunk) in s.split(SEP_TOKEN).enumerate() {
        let chunk = chunk.trim();
        if chunk.is_empty() {
            return Err(PromptError::MalformedSequence(format!(
                "empty pair at position {i} (dangling {SEP_TOKEN})"
            )));
        }
        let parts: Vec<&str> = chunk.split(PAIR_TOKEN).map(str::trim).collect();
        match parts.as_slice() {
            [o, st] if !o.is_empty() && !st.is_empty() => {
                pairs.push((o.to_string(), st.to_string()))
            }
            [_, _] => {
                return Err(PromptError::MalformedSequence(format!(
                    "empty phrase in pair {i}"
                )))
            }
            _ => {
                return Err(PromptError::MalformedSequence(format!(
                    "pair {i} has {} segments, expected 2",
                    parts.len()
                )))
            }
        }
    }
    SegmentedPrompt::new(pairs)
}

/// Token ids with the two control tokens pinned at 0 and 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenSeq {
    tokens: Vec<u32>,
    vocab_size: u32,
}

impl TokenSeq {
    pub fn new(tokens: Vec<u32>, vocab_size: u32) -> Result<Self, PromptError> {
        if let Some(&id) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(PromptError::TokenOutOfRange { id, vocab_size });
        }
        Ok(TokenSeq { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }
}

/// Whitespace word vocabulary. Ids 0 and 1 are `<PAIR>` and `<SEP>`; words
/// get ids from 2 upward in order of first appearance.
#[derive(Debug, Clone, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn build<'a>(prompts: impl IntoIterator<Item = &'a SegmentedPrompt>) -> Self {
        let mut v = Vocabulary::default();
        for sp in prompts {
            for p in sp.pairs() {
                for w in p
                    .object_phrase
                    .split_whitespace()
                    .chain(p.style_phrase.split_whitespace())
                {
                    if !v.index.contains_key(w) {
                        let id = v.words.len() as u32 + 2;
                        v.index.insert(w.to_string(), id);
                        v.words.push(w.to_string());
                    }
                }
            }
        }
        v
    }

    pub fn size(&self) -> u32 {
        self.words.len() as u32 + 2
    }

    pub fn encode(&self, sp: &SegmentedPrompt) -> Result<TokenSeq, PromptError> {
        let text = serialize_pairs(sp);
        let mut ids = Vec::new();
        for w in text.split_whitespace() {
            let id = match w {
                PAIR_TOKEN => PAIR_TOKEN_ID,
                SEP_TOKEN => SEP_TOKEN_ID,
                _ => *self
                    .index
                    .get(w)
                    .ok_or_else(|| PromptError::UnknownWord(w.to_string()))?,
            };
            ids.push(id);
        }
        TokenSeq::new(ids, self.size())
    }

    /// Phrases are rebuilt with single spaces between words.
    pub fn decode(&self, seq: &TokenSeq) -> Result<SegmentedPrompt, PromptError> {
        let mut words = Vec::with_capacity(seq.tokens().len());
        for &id in seq.tokens() {
            words.push(match id {
                PAIR_TOKEN_ID => PAIR_TOKEN,
                SEP_TOKEN_ID => SEP_TOKEN,
                _ => self
                    .words
                    .get(id as usize - 2)
                    .ok_or(PromptError::TokenOutOfRange {
                        id,
                        vocab_size: self.size(),
                    })?
                    .as_str(),
            });
        }
        deserialize_pairs(&words.join(" "))
    }
}
