//! Relay forwarding: amplify-and-forward, decode-and-forward at the
//! auto-encoder or semantic layer, and semantic forward with background
//! knowledge translation.

pub mod lexicon;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autoencoder::AutoEncoderModel;
use crate::channel::{equalize, normalize_power, ChannelRealization, SymbolBlock};
use crate::codec::{SemanticCodec, TokenSequence, Vocabulary};
use crate::error::{Error, Result};
use crate::nn::Mat;

pub use lexicon::{translate_bk, TranslationLexicon, Translation};

/// A node's corpus, vocabulary and (once trained) semantic codec.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundKnowledge {
    pub id: String,
    pub corpus: Vec<TokenSequence>,
    pub vocab: Vocabulary,
    pub codec: Option<SemanticCodec>,
}

impl BackgroundKnowledge {
    /// Builds the vocabulary from `sentences`, so every sentence encodes
    /// without `UNK`.
    pub fn from_sentences<S: AsRef<str>>(id: &str, sentences: &[S]) -> Result<Self> {
        let vocab = Vocabulary::from_sentences(sentences)?;
        let corpus = sentences
            .iter()
            .map(|s| vocab.encode_strict(s.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        Ok(BackgroundKnowledge {
            id: id.to_string(),
            corpus,
            vocab,
            codec: None,
        })
    }

    pub fn sentences(&self) -> Vec<String> {
        self.corpus.iter().map(|s| self.vocab.decode(s)).collect()
    }

    pub fn with_codec(mut self, codec: SemanticCodec) -> Result<Self> {
        if codec.vocab_size != self.vocab.len() {
            return Err(Error::dim("codec vocabulary", &[codec.vocab_size], &[self.vocab.len()]));
        }
        self.codec = Some(codec);
        Ok(self)
    }

    pub fn codec(&self) -> Result<&SemanticCodec> {
        self.codec
            .as_ref()
            .ok_or_else(|| Error::Config(format!("background knowledge {:?} has no trained codec", self.id)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    Af,
    Df,
    DfSemantic,
    Sf,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Af,
        StrategyKind::Df,
        StrategyKind::DfSemantic,
        StrategyKind::Sf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Af => "af",
            StrategyKind::Df => "df",
            StrategyKind::DfSemantic => "df-semantic",
            StrategyKind::Sf => "sf",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy {s:?} (af, df, df-semantic, sf)")))
    }
}

/// Layer at which a decode-and-forward relay regenerates the signal.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DfStage {
    AutoEncoder,
    Semantic,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RelayStrategy {
    Af { power: f64 },
    Df { power: f64, stage: DfStage },
    Sf { power: f64, lexicon: TranslationLexicon },
}

impl RelayStrategy {
    /// Builds the strategy for `kind`; `lexicon` is used only by SF.
    pub fn from_kind(kind: StrategyKind, power: f64, lexicon: &TranslationLexicon) -> Self {
        match kind {
            StrategyKind::Af => RelayStrategy::Af { power },
            StrategyKind::Df => RelayStrategy::Df {
                power,
                stage: DfStage::AutoEncoder,
            },
            StrategyKind::DfSemantic => RelayStrategy::Df {
                power,
                stage: DfStage::Semantic,
            },
            StrategyKind::Sf => RelayStrategy::Sf {
                power,
                lexicon: lexicon.clone(),
            },
        }
    }

    pub fn kind(&self) -> StrategyKind {
        match self {
            RelayStrategy::Af { .. } => StrategyKind::Af,
            RelayStrategy::Df {
                stage: DfStage::AutoEncoder,
                ..
            } => StrategyKind::Df,
            RelayStrategy::Df {
                stage: DfStage::Semantic,
                ..
            } => StrategyKind::DfSemantic,
            RelayStrategy::Sf { .. } => StrategyKind::Sf,
        }
    }

    pub fn power(&self) -> f64 {
        match self {
            RelayStrategy::Af { power }
            | RelayStrategy::Df { power, .. }
            | RelayStrategy::Sf { power, .. } => *power,
        }
    }
}

/// Models available at the relay.
#[derive(Clone, Copy, Debug)]
pub struct RelayModels<'a> {
    pub autoencoder: &'a AutoEncoderModel,
    /// Knowledge shared with the source.
    pub source_bk: &'a BackgroundKnowledge,
    /// Knowledge shared with the destination.
    pub destination_bk: &'a BackgroundKnowledge,
}

/// What the relay transmits on the second hop.
#[derive(Clone, Debug, PartialEq)]
pub struct RelayOutput {
    pub block: SymbolBlock,
    /// AF gain; `None` for regenerative strategies.
    pub gain: Option<f64>,
    /// Sentence recovered at the relay (semantic strategies).
    pub decoded: Option<String>,
    /// Sentence re-encoded by the relay (semantic strategies).
    pub reencoded: Option<TokenSequence>,
    /// Semantic vectors the relay re-encoded (regenerative strategies).
    pub x_relay: Option<Mat>,
    /// The translated sentence held a word outside the destination's
    /// vocabulary.
    pub semantic_failure: bool,
}

impl RelayOutput {
    fn plain(block: SymbolBlock, gain: Option<f64>, x_relay: Option<Mat>) -> Self {
        RelayOutput {
            block,
            gain,
            decoded: None,
            reencoded: None,
            x_relay,
            semantic_failure: false,
        }
    }
}

/// `α = sqrt(P_r / (|h₁|²·P_s + σ²))`.
pub fn af_gain(ch1: &ChannelRealization, p_s: f64, p_r: f64) -> Result<f64> {
    if !(p_r > 0.0) || !(p_s > 0.0) {
        return Err(Error::Contract(format!("powers must be > 0, got P_s={p_s}, P_r={p_r}")));
    }
    let denom = ch1.h.norm_sqr() * p_s + ch1.sigma2;
    if denom == 0.0 {
        return Err(Error::DeepFade { magnitude: 0.0 });
    }
    Ok((p_r / denom).sqrt())
}

/// `z = α·ŷ` on the raw (unequalised) received block.
pub fn forward_af(y_hat: &SymbolBlock, ch1: &ChannelRealization, p_s: f64, p_r: f64) -> Result<(SymbolBlock, f64)> {
    let alpha = af_gain(ch1, p_s, p_r)?;
    let z = SymbolBlock::new(y_hat.symbols.iter().map(|&s| s * alpha).collect());
    Ok((z, alpha))
}

/// Equalise, auto-decode, auto-encode, normalise to `p_r`.
pub fn forward_df(
    y_hat: &SymbolBlock,
    ch1: &ChannelRealization,
    autoencoder: &AutoEncoderModel,
    p_r: f64,
) -> Result<(SymbolBlock, Mat)> {
    let x_hat = autoencoder.decode(&equalize(y_hat, ch1)?)?;
    let z = normalize_power(&autoencoder.encode(&x_hat)?, p_r)?;
    Ok((z, x_hat))
}

/// Semantic decode under `from`, optional translation, re-encode under
/// `to`. Shared by DF at the semantic layer and SF.
fn semantic_regenerate(
    y_hat: &SymbolBlock,
    ch1: &ChannelRealization,
    autoencoder: &AutoEncoderModel,
    from: &BackgroundKnowledge,
    to: &BackgroundKnowledge,
    lexicon: &TranslationLexicon,
    p_r: f64,
) -> Result<RelayOutput> {
    let (src_codec, dst_codec) = (from.codec()?, to.codec()?);
    let x_hat = autoencoder.decode(&equalize(y_hat, ch1)?)?;
    let decoded = src_codec.greedy_decode(&x_hat, src_codec.config.max_len)?;
    let text = from.vocab.decode(&decoded.sequence);
    let tr = translate_bk(&text, lexicon, &to.vocab);
    let mut seq = tr.sequence;
    // Translation can lengthen a sentence; the codec's limit still applies.
    seq.indices.truncate(dst_codec.config.max_len);
    let x = dst_codec.encode(&seq)?;
    let z = normalize_power(&autoencoder.encode(&x)?, p_r)?;
    Ok(RelayOutput {
        block: z,
        gain: None,
        decoded: Some(text),
        reencoded: Some(seq),
        x_relay: Some(x),
        semantic_failure: tr.has_unknown,
    })
}

/// Semantic forward: decode under the source's knowledge, translate through
/// `lexicon`, re-encode under the destination's knowledge.
pub fn forward_sf(
    y_hat: &SymbolBlock,
    ch1: &ChannelRealization,
    autoencoder: &AutoEncoderModel,
    bk_sr: &BackgroundKnowledge,
    bk_rd: &BackgroundKnowledge,
    lexicon: &TranslationLexicon,
    p_r: f64,
) -> Result<RelayOutput> {
    semantic_regenerate(y_hat, ch1, autoencoder, bk_sr, bk_rd, lexicon, p_r)
}

/// Runs `strategy` on the block received over the first hop.
pub fn forward(
    strategy: &RelayStrategy,
    y_hat: &SymbolBlock,
    ch1: &ChannelRealization,
    models: RelayModels<'_>,
) -> Result<RelayOutput> {
    let ae = models.autoencoder;
    match strategy {
        RelayStrategy::Af { power } => {
            let (z, alpha) = forward_af(y_hat, ch1, ae.config.power, *power)?;
            Ok(RelayOutput::plain(z, Some(alpha), None))
        }
        RelayStrategy::Df {
            power,
            stage: DfStage::AutoEncoder,
        } => {
            let (z, x_hat) = forward_df(y_hat, ch1, ae, *power)?;
            Ok(RelayOutput::plain(z, None, Some(x_hat)))
        }
        RelayStrategy::Df {
            power,
            stage: DfStage::Semantic,
        } => semantic_regenerate(
            y_hat,
            ch1,
            ae,
            models.source_bk,
            models.source_bk,
            &TranslationLexicon::empty(),
            *power,
        ),
        RelayStrategy::Sf { power, lexicon } => forward_sf(
            y_hat,
            ch1,
            ae,
            models.source_bk,
            models.destination_bk,
            lexicon,
            *power,
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::AutoEncoderConfig;
    use crate::channel::{apply_channel, sample_realization};
    use crate::codec::CodecConfig;
    use crate::rng::stream;
    use num_complex::Complex64;

    fn block(n: usize, seed: u64) -> SymbolBlock {
        use rand::Rng;
        let mut rng = stream(seed, &[]);
        let s = SymbolBlock::new(
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        );
        normalize_power(&s, 1.0).unwrap()
    }

    #[test]
    fn af_gain_examples() {
        let unit = ChannelRealization::new(Complex64::new(1.0, 0.0), 0.0).unwrap();
        assert_eq!(af_gain(&unit, 1.0, 1.0).unwrap(), 1.0);
        let y = block(8, 0);
        assert_eq!(forward_af(&y, &unit, 1.0, 1.0).unwrap().0, y);
        let noisy = ChannelRealization::new(Complex64::new(0.0, 1.0), 1.0).unwrap();
        assert!((af_gain(&noisy, 1.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn af_output_power_matches_budget_on_average() {
        let y = block(64, 1);
        let mut rng = stream(2, &[]);
        let ch = sample_realization(&mut rng, 0.5).unwrap();
        let p_r = 2.0;
        let draws = 10_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let y_hat = apply_channel(&y, &ch, &mut rng);
            total += forward_af(&y_hat, &ch, 1.0, p_r).unwrap().0.mean_energy();
        }
        let mean = total / draws as f64;
        assert!((mean - p_r).abs() / p_r < 0.02, "{mean}");
    }

    #[test]
    fn af_is_a_pure_scaling() {
        let y = block(16, 3);
        let ch = sample_realization(&mut stream(4, &[]), 0.1).unwrap();
        let c = Complex64::new(-2.5, 0.0);
        let scaled = SymbolBlock::new(y.symbols.iter().map(|&s| s * c).collect());
        let (a, _) = forward_af(&y, &ch, 1.0, 1.0).unwrap();
        let (b, _) = forward_af(&scaled, &ch, 1.0, 1.0).unwrap();
        for (u, v) in a.symbols.iter().zip(&b.symbols) {
            assert!((u * c - v).norm() < 1e-12);
        }
    }

    #[test]
    fn df_output_is_normalised_and_ignores_af_settings() {
        let ae = AutoEncoderModel::new(AutoEncoderConfig::default(), &mut stream(5, &[])).unwrap();
        let y = block(16, 6);
        let ch = sample_realization(&mut stream(7, &[]), 0.1).unwrap();
        let (z, _) = forward_df(&y, &ch, &ae, 1.5).unwrap();
        assert!((z.mean_energy() - 1.5).abs() < 1e-9);
        let bk = BackgroundKnowledge::from_sentences("a", &["x y"]).unwrap();
        let models = RelayModels {
            autoencoder: &ae,
            source_bk: &bk,
            destination_bk: &bk,
        };
        let df = RelayStrategy::from_kind(StrategyKind::Df, 1.5, &TranslationLexicon::empty());
        assert_eq!(forward(&df, &y, &ch, models).unwrap().block, z);
    }

    #[test]
    fn deep_fade_is_an_error_not_a_panic() {
        let ae = AutoEncoderModel::new(AutoEncoderConfig::default(), &mut stream(5, &[])).unwrap();
        let ch = ChannelRealization::new(Complex64::new(1e-14, 0.0), 0.1).unwrap();
        assert!(matches!(
            forward_df(&block(16, 8), &ch, &ae, 1.0),
            Err(Error::DeepFade { .. })
        ));
    }

    #[test]
    fn sf_with_identical_knowledge_matches_semantic_df() {
        let ae = AutoEncoderModel::new(
            AutoEncoderConfig {
                d_in: 8,
                hidden: 6,
                n_symbols: 4,
                ..Default::default()
            },
            &mut stream(9, &[]),
        )
        .unwrap();
        let cfg = CodecConfig {
            d_model: 8,
            encoder_blocks: 1,
            decoder_blocks: 1,
            heads: 2,
            ff_width: 8,
            max_len: 6,
            batch: 2,
            positional: true,
        };
        let bk = BackgroundKnowledge::from_sentences("a", &["the cat sat", "a dog ran"]).unwrap();
        let codec = SemanticCodec::new(cfg, bk.vocab.len(), &mut stream(10, &[])).unwrap();
        let bk = bk.with_codec(codec).unwrap();
        let models = RelayModels {
            autoencoder: &ae,
            source_bk: &bk,
            destination_bk: &bk,
        };
        let x = bk.codec().unwrap().encode(&bk.corpus[0]).unwrap();
        let y = ae.encode(&x).unwrap();
        let ch = ChannelRealization::ideal();
        let empty = TranslationLexicon::empty();
        let sf = forward(&RelayStrategy::from_kind(StrategyKind::Sf, 1.0, &empty), &y, &ch, models).unwrap();
        let df = forward(
            &RelayStrategy::from_kind(StrategyKind::DfSemantic, 1.0, &empty),
            &y,
            &ch,
            models,
        )
        .unwrap();
        assert_eq!(sf.decoded, df.decoded);
        assert_eq!(sf.block, df.block);
        assert!((sf.block.mean_energy() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.name().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{}\"", k.name()));
        }
        assert!("xf".parse::<StrategyKind>().is_err());
    }
}
