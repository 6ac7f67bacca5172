use std::path::Path;

use crate::codec::vocab::{tokenize, TokenSequence, Vocabulary, UNK};
use crate::error::{Error, Result};

/// Phrase substitutions from one background knowledge to another.
///
/// Rules are kept longest-source-first, so no rule ever precedes a longer
/// rule that it prefixes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TranslationLexicon {
    rules: Vec<(Vec<String>, Vec<String>)>,
}

impl TranslationLexicon {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new<S: AsRef<str>>(pairs: &[(S, S)]) -> Result<Self> {
        let mut rules: Vec<(Vec<String>, Vec<String>)> = Vec::with_capacity(pairs.len());
        for (src, dst) in pairs {
            let (src, dst) = (tokenize(src.as_ref()), tokenize(dst.as_ref()));
            if src.is_empty() {
                return Err(Error::Config("lexicon rule with empty source phrase".into()));
            }
            if rules.iter().any(|(s, _)| *s == src) {
                return Err(Error::Config(format!(
                    "duplicate lexicon source phrase {:?}",
                    src.join(" ")
                )));
            }
            rules.push((src, dst));
        }
        rules.sort_by_key(|r| std::cmp::Reverse(r.0.len()));
        for (_, dst) in &rules {
            if let Some((src, _)) = rules.iter().find(|(s, _)| contains(dst, s)) {
                return Err(Error::Config(format!(
                    "target phrase {:?} contains source phrase {:?}",
                    dst.join(" "),
                    src.join(" ")
                )));
            }
        }
        Ok(TranslationLexicon { rules })
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn rules(&self) -> impl Iterator<Item = (String, String)> + '_ {
        self.rules.iter().map(|(s, d)| (s.join(" "), d.join(" ")))
    }

    pub fn contains_rule(&self, src: &str, dst: &str) -> bool {
        let (s, d) = (tokenize(src), tokenize(dst));
        self.rules.iter().any(|(a, b)| *a == s && *b == d)
    }

    /// Leftmost-longest substitution in one left-to-right pass.
    pub fn apply(&self, tokens: &[String]) -> Vec<String> {
        let mut out = Vec::with_capacity(tokens.len());
        let mut i = 0;
        while i < tokens.len() {
            match self.rules.iter().find(|(s, _)| tokens[i..].starts_with(s)) {
                Some((s, d)) => {
                    out.extend(d.iter().cloned());
                    i += s.len();
                }
                None => {
                    out.push(tokens[i].clone());
                    i += 1;
                }
            }
        }
        out
    }

    pub fn apply_text(&self, text: &str) -> String {
        self.apply(&tokenize(text)).join(" ")
    }

    /// Parses `source<TAB>target` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (src, dst) = line.split_once('\t').ok_or_else(|| {
                Error::Config(format!("lexicon line {}: expected source<TAB>target", n + 1))
            })?;
            pairs.push((src.trim().to_string(), dst.trim().to_string()));
        }
        Self::new(&pairs)
    }

    pub fn to_file_string(&self) -> String {
        let mut s = String::from("# source phrase<TAB>target phrase\n");
        for (src, dst) in self.rules() {
            s.push_str(&src);
            s.push('\t');
            s.push_str(&dst);
            s.push('\n');
        }
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_file_string())?;
        Ok(())
    }
}

fn contains(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle)
}

/// Translated sentence under the target vocabulary.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Translation {
    pub text: String,
    pub sequence: TokenSequence,
    /// Some surviving word is missing from the target vocabulary.
    pub has_unknown: bool,
}

/// Applies `lex` to `text` and re-tokenises under `target`; unknown
/// survivors map to `UNK`.
pub fn translate_bk(text: &str, lex: &TranslationLexicon, target: &Vocabulary) -> Translation {
    let text = lex.apply_text(text);
    let sequence = target.encode(&text);
    let has_unknown = sequence.indices.contains(&UNK);
    Translation {
        text,
        sequence,
        has_unknown,
    }
}
