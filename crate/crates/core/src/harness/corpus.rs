use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::codec::vocab::tokenize;
use crate::error::{Error, Result};
use crate::relay::{BackgroundKnowledge, TranslationLexicon};

/// One filler for a template slot. `alternative` is the surface form a
/// diverged background knowledge uses instead.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotValue {
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alternative: Option<String>,
}

impl SlotValue {
    fn new(source: &str, alternative: Option<&str>) -> Self {
        SlotValue {
            source: source.to_string(),
            alternative: alternative.map(str::to_string),
        }
    }
}

/// Sentence templates with `{slot}` placeholders and the values each slot
/// ranges over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateBank {
    pub templates: Vec<String>,
    pub slots: BTreeMap<String, Vec<SlotValue>>,
}

impl TemplateBank {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// Number of sentences the bank expands to.
    pub fn size(&self) -> Result<usize> {
        let mut total = 0;
        for t in &self.templates {
            total += parse_template(t)?
                .slot_names()
                .iter()
                .map(|s| self.values(s).map(<[SlotValue]>::len))
                .product::<Result<usize>>()?;
        }
        Ok(total)
    }

    fn values(&self, slot: &str) -> Result<&[SlotValue]> {
        match self.slots.get(slot) {
            Some(v) if !v.is_empty() => Ok(v),
            Some(_) => Err(Error::Template(format!("slot {{{slot}}} has no values"))),
            None => Err(Error::Template(format!("undefined slot {{{slot}}}"))),
        }
    }
}

impl Default for TemplateBank {
    /// Everyday chat sentences; abbreviations, nicknames and names diverge.
    fn default() -> Self {
        let v = SlotValue::new;
        let slots = BTreeMap::from([
            (
                "person".to_string(),
                vec![
                    v("my son", Some("bob")),
                    v("my daughter", Some("alice")),
                    v("my wife", Some("mary")),
                    v("my friend", None),
                ],
            ),
            (
                "subject".to_string(),
                vec![
                    v("cs", Some("computer science")),
                    v("math", Some("mathematics")),
                    v("pe", Some("physical education")),
                    v("history", None),
                ],
            ),
            (
                "place".to_string(),
                vec![
                    v("the lib", Some("the library")),
                    v("uni", Some("university")),
                    v("school", None),
                    v("the gym", None),
                ],
            ),
            (
                "day".to_string(),
                vec![
                    v("mon", Some("monday")),
                    v("fri", Some("friday")),
                    v("the weekend", None),
                ],
            ),
            (
                "pet".to_string(),
                vec![v("cat", None), v("dog", None), v("pup", Some("puppy"))],
            ),
            (
                "city".to_string(),
                vec![
                    v("nyc", Some("new york")),
                    v("la", Some("los angeles")),
                    v("paris", None),
                    v("london", None),
                ],
            ),
            (
                "weather".to_string(),
                vec![v("sunny", None), v("rainy", None), v("cold", None)],
            ),
            (
                "sport".to_string(),
                vec![v("soccer", Some("football")), v("tennis", None), v("chess", None)],
            ),
        ]);
        TemplateBank {
            templates: [
                "{person} is very good at {subject}",
                "{person} likes to study {subject} at {place}",
                "{person} will visit {place} on {day}",
                "{person} has a {pet} at home",
                "the weather in {city} is {weather} today",
                "{person} plays {sport} with friends on {day}",
            ]
            .into_iter()
            .map(str::to_string)
            .collect(),
            slots,
        }
    }
}

enum Piece {
    Text(String),
    Slot(String),
}

struct Template(Vec<Piece>);

impl Template {
    /// Distinct slot names in first-use order.
    fn slot_names(&self) -> Vec<&str> {
        let mut names: Vec<&str> = Vec::new();
        for p in &self.0 {
            if let Piece::Slot(s) = p {
                if !names.contains(&s.as_str()) {
                    names.push(s);
                }
            }
        }
        names
    }
}

fn parse_template(t: &str) -> Result<Template> {
    let mut pieces = Vec::new();
    let mut rest = t;
    while let Some(open) = rest.find('{') {
        if open > 0 {
            pieces.push(Piece::Text(rest[..open].to_string()));
        }
        let close = rest[open..]
            .find('}')
            .ok_or_else(|| Error::Template(format!("unclosed '{{' in {t:?}")))?;
        let name = &rest[open + 1..open + close];
        if name.is_empty() || name.contains('{') {
            return Err(Error::Template(format!("bad slot name in {t:?}")));
        }
        pieces.push(Piece::Slot(name.to_string()));
        rest = &rest[open + close + 1..];
    }
    if rest.contains('}') {
        return Err(Error::Template(format!("stray '}}' in {t:?}")));
    }
    if !rest.is_empty() {
        pieces.push(Piece::Text(rest.to_string()));
    }
    Ok(Template(pieces))
}

/// How far the destination's knowledge drifts from the source's.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BkSpec {
    /// Probability that a slot value with an alternative form diverges.
    pub divergence: f64,
    pub max_sentences: usize,
}

impl Default for BkSpec {
    fn default() -> Self {
        BkSpec {
            divergence: 1.0,
            max_sentences: 200,
        }
    }
}

/// Source and destination knowledge realised from one bank, with the
/// lexicon that maps the first onto the second.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCorpus {
    pub source: BackgroundKnowledge,
    pub destination: BackgroundKnowledge,
    pub lexicon: TranslationLexicon,
}

/// Expands every template over its slot values (sampling `max_sentences`
/// of them when the bank is larger), then realises the destination side by
/// swapping each diverged value for its alternative.
///
/// Sentence `i` of the destination corpus is the lexicon translation of
/// sentence `i` of the source corpus; this is checked before returning.
pub fn generate_corpus<R: Rng + ?Sized>(
    bank: &TemplateBank,
    spec: &BkSpec,
    rng: &mut R,
) -> Result<GeneratedCorpus> {
    if bank.templates.is_empty() {
        return Err(Error::Template("template bank is empty".into()));
    }
    if !(0.0..=1.0).contains(&spec.divergence) {
        return Err(Error::Config(format!("divergence {} outside [0, 1]", spec.divergence)));
    }
    if spec.max_sentences == 0 {
        return Err(Error::Config("max_sentences must be >= 1".into()));
    }
    let templates = bank
        .templates
        .iter()
        .map(|t| parse_template(t))
        .collect::<Result<Vec<_>>>()?;

    // One draw per alternative-bearing value, in bank order.
    let mut diverged: BTreeMap<(&str, usize), bool> = BTreeMap::new();
    for (slot, values) in &bank.slots {
        for (i, v) in values.iter().enumerate() {
            if v.alternative.is_some() {
                diverged.insert((slot, i), rng.random_bool(spec.divergence));
            }
        }
    }

    let mut pairs: Vec<(String, String)> = Vec::new();
    for t in &templates {
        let names = t.slot_names();
        let sizes = names
            .iter()
            .map(|n| bank.values(n).map(<[SlotValue]>::len))
            .collect::<Result<Vec<_>>>()?;
        let mut choice = vec![0usize; names.len()];
        loop {
            let (mut src, mut dst) = (String::new(), String::new());
            for p in &t.0 {
                match p {
                    Piece::Text(s) => {
                        src.push_str(s);
                        dst.push_str(s);
                    }
                    Piece::Slot(n) => {
                        let k = names.iter().position(|m| m == n).expect("collected above");
                        let v = &bank.slots[n][choice[k]];
                        src.push_str(&v.source);
                        let alt = v.alternative.as_ref().filter(|_| diverged[&(n.as_str(), choice[k])]);
                        dst.push_str(alt.unwrap_or(&v.source));
                    }
                }
            }
            pairs.push((tokenize(&src).join(" "), tokenize(&dst).join(" ")));
            // Odometer over the slot choices, last slot fastest.
            let mut k = names.len();
            loop {
                if k == 0 {
                    break;
                }
                k -= 1;
                choice[k] += 1;
                if choice[k] < sizes[k] {
                    break;
                }
                choice[k] = 0;
            }
            if choice.iter().all(|&c| c == 0) {
                break;
            }
        }
    }
    if pairs.len() > spec.max_sentences {
        let mut keep = sample(rng, pairs.len(), spec.max_sentences).into_vec();
        keep.sort_unstable();
        pairs = keep.into_iter().map(|i| pairs[i].clone()).collect();
    }

    let mut rules: Vec<(String, String)> = Vec::new();
    for (slot, values) in &bank.slots {
        for (i, v) in values.iter().enumerate() {
            if let Some(alt) = &v.alternative {
                if diverged[&(slot.as_str(), i)] {
                    let src = tokenize(&v.source).join(" ");
                    match rules.iter().find(|(s, _)| *s == src) {
                        Some((_, d)) if *d != tokenize(alt).join(" ") => {
                            return Err(Error::Template(format!(
                                "slot value {src:?} has conflicting alternatives"
                            )))
                        }
                        Some(_) => {}
                        None => rules.push((src, tokenize(alt).join(" "))),
                    }
                }
            }
        }
    }
    let lexicon = TranslationLexicon::new(&rules).map_err(|e| Error::Template(e.to_string()))?;

    let src_text: Vec<&str> = pairs.iter().map(|(s, _)| s.as_str()).collect();
    let dst_text: Vec<&str> = pairs.iter().map(|(_, d)| d.as_str()).collect();
    for (s, d) in &pairs {
        if lexicon.apply_text(s) != *d {
            return Err(Error::Template(format!(
                "lexicon maps {s:?} to {:?}, expected {d:?}",
                lexicon.apply_text(s)
            )));
        }
    }
    Ok(GeneratedCorpus {
        source: BackgroundKnowledge::from_sentences("source", &src_text)?,
        destination: BackgroundKnowledge::from_sentences("destination", &dst_text)?,
        lexicon,
    })
}
