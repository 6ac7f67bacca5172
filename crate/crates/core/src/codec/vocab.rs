use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Whitespace split plus lowercasing.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_lowercase).collect()
}

/// Token ↔ index bijection with the four reserved entries at 0..3.
#[derive(Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl fmt::Debug for Vocabulary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Vocabulary").field("size", &self.len()).finish()
    }
}

impl Vocabulary {
    /// Builds from word tokens in first-seen order. Duplicates are skipped;
    /// reserved spellings are rejected.
    pub fn new<I, S>(words: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut tokens: Vec<String> = RESERVED.iter().map(|s| s.to_string()).collect();
        let mut index: HashMap<String, usize> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        for w in words {
            let w = w.as_ref();
            if w.is_empty() || w.chars().any(char::is_whitespace) {
                return Err(Error::Vocabulary(format!("invalid token {w:?}")));
            }
            if RESERVED.contains(&w) {
                return Err(Error::Vocabulary(format!("{w:?} is reserved")));
            }
            if !index.contains_key(w) {
                index.insert(w.to_string(), tokens.len());
                tokens.push(w.to_string());
            }
        }
        if tokens.len() < 5 {
            return Err(Error::Vocabulary("vocabulary needs at least one word".into()));
        }
        Ok(Vocabulary { tokens, index })
    }

    /// Collects every token of the given sentences.
    pub fn from_sentences<S: AsRef<str>>(sentences: &[S]) -> Result<Self> {
        Self::new(sentences.iter().flat_map(|s| tokenize(s.as_ref())))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> Option<&str> {
        self.tokens.get(idx).map(String::as_str)
    }

    /// Word tokens (excluding the reserved entries) in index order.
    pub fn words(&self) -> &[String] {
        &self.tokens[RESERVED.len()..]
    }

    /// Maps text to indices; unknown words become `UNK`.
    pub fn encode(&self, text: &str) -> TokenSequence {
        TokenSequence::new(
            tokenize(text)
                .iter()
                .map(|t| self.index_of(t).unwrap_or(UNK))
                .collect(),
        )
    }

    /// Maps text to indices, failing on any unknown word.
    pub fn encode_strict(&self, text: &str) -> Result<TokenSequence> {
        let seq = self.encode(text);
        if seq.indices.contains(&UNK) {
            return Err(Error::Vocabulary(format!("unknown word in {text:?}")));
        }
        if seq.is_empty() {
            return Err(Error::Vocabulary("empty sentence".into()));
        }
        Ok(seq)
    }

    /// Words joined by single spaces; `EOS` ends the text, `PAD`/`BOS` are
    /// skipped.
    pub fn decode(&self, seq: &TokenSequence) -> String {
        seq.indices
            .iter()
            .take_while(|&&i| i != EOS)
            .filter(|&&i| i != PAD && i != BOS)
            .map(|&i| self.token(i).unwrap_or(RESERVED[UNK]))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// One word per line, in index order after the reserved entries.
    pub fn to_file_string(&self) -> String {
        let mut s = String::new();
        for w in self.words() {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::new(text.lines().map(str::trim_end).filter(|l| !l.is_empty()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Sentence as vocabulary indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TokenSequence {
    pub indices: Vec<usize>,
}

impl TokenSequence {
    pub fn new(indices: Vec<usize>) -> Self {
        TokenSequence { indices }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Every index `< vocab_size`, nonempty, at most one `EOS` and only in
    /// final position.
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::Vocabulary("empty token sequence".into()));
        }
        if let Some(&bad) = self.indices.iter().find(|&&i| i >= vocab_size) {
            return Err(Error::Vocabulary(format!(
                "index {bad} out of range for vocabulary of {vocab_size}"
            )));
        }
        if let Some(p) = self.indices.iter().position(|&i| i == EOS) {
            if p + 1 != self.indices.len() {
                return Err(Error::Vocabulary("EOS must be terminal".into()));
            }
        }
        Ok(())
    }
}
