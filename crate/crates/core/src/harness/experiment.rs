use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autoencoder::{train_autoencoder, AutoEncoderModel};
use crate::channel::{
    apply_channel, db_to_linear, equalize, noise_variance_for, sample_realization, ChannelRealization, Hop,
};
use crate::codec::{tokenize, train_semantic};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, HopSnr, KnowledgeSetup};
use crate::harness::corpus::{generate_corpus, BkSpec, GeneratedCorpus, TemplateBank};
use crate::harness::persist;
use crate::metrics::{bleu, cosine_similarity, BleuConfig};
use crate::relay::{forward, BackgroundKnowledge, RelayModels, RelayStrategy, StrategyKind, TranslationLexicon};
use crate::rng::stream;

// Stream path prefixes.
const AE_STREAM: u64 = 10;
const CORPUS_STREAM: u64 = 11;
const SOURCE_CODEC_STREAM: u64 = 12;
const DESTINATION_CODEC_STREAM: u64 = 13;
const TRIAL_STREAM: u64 = 14;

/// Trained networks and knowledge for all three nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub autoencoder: AutoEncoderModel,
    pub source: BackgroundKnowledge,
    pub destination: BackgroundKnowledge,
    /// Lexicon the relay applies under SF.
    pub lexicon: TranslationLexicon,
}

impl Models {
    pub fn relay_models(&self) -> RelayModels<'_> {
        RelayModels {
            autoencoder: &self.autoencoder,
            source_bk: &self.source,
            destination_bk: &self.destination,
        }
    }

    /// Hash over every parameter, for checking that evaluation leaves the
    /// models untouched.
    pub fn fingerprint(&self) -> Vec<u64> {
        let mut f = vec![
            self.autoencoder.encoder.fingerprint(),
            self.autoencoder.decoder.fingerprint(),
        ];
        for bk in [&self.source, &self.destination] {
            if let Some(c) = &bk.codec {
                f.push(c.encoder.fingerprint());
                f.push(c.decoder.fingerprint());
            }
        }
        f
    }
}

/// Generates the background knowledge pair for `config`.
pub fn build_knowledge(config: &ExperimentConfig) -> Result<GeneratedCorpus> {
    let bank = match &config.template_bank {
        Some(p) => TemplateBank::load(p)?,
        None => TemplateBank::default(),
    };
    let spec = BkSpec {
        divergence: config.knowledge.divergence(),
        max_sentences: config.max_sentences,
    };
    let mut corpus = generate_corpus(&bank, &spec, &mut stream(config.seed, &[CORPUS_STREAM]))?;
    if let KnowledgeSetup::Mismatched {
        lexicon: Some(path), ..
    } = &config.knowledge
    {
        corpus.lexicon = TranslationLexicon::load(path)?;
    }
    Ok(corpus)
}

/// Stage one: fits the auto-encoder pair on its own.
pub fn train_ae_stage(config: &ExperimentConfig) -> Result<AutoEncoderModel> {
    config.validate()?;
    let (model, _) = train_autoencoder(
        config.autoencoder,
        config.ae_train_snr_db,
        &config.ae_schedule,
        &mut stream(config.seed, &[AE_STREAM]),
    )?;
    Ok(model)
}

/// Stage two: fits semantic codecs for both knowledge bases through the
/// frozen auto-encoder. Under shared knowledge the destination reuses the
/// source codec.
pub fn train_semantic_stage(config: &ExperimentConfig, autoencoder: AutoEncoderModel) -> Result<Models> {
    config.validate()?;
    let corpus = build_knowledge(config)?;
    let fit = |bk: &BackgroundKnowledge, path: u64| {
        train_semantic(
            &bk.corpus,
            bk.vocab.len(),
            &autoencoder,
            config.sem_train_snr_db,
            config.codec,
            &config.sem_schedule,
            &mut stream(config.seed, &[path]),
        )
        .map(|(c, _)| c)
    };
    let source_codec = fit(&corpus.source, SOURCE_CODEC_STREAM)?;
    let source = corpus.source.with_codec(source_codec)?;
    let destination = if config.knowledge.is_mismatched() {
        let codec = fit(&corpus.destination, DESTINATION_CODEC_STREAM)?;
        corpus.destination.with_codec(codec)?
    } else {
        let mut d = source.clone();
        d.id = corpus.destination.id;
        d
    };
    Ok(Models {
        autoencoder,
        source,
        destination,
        lexicon: corpus.lexicon,
    })
}

pub fn train_models(config: &ExperimentConfig) -> Result<Models> {
    let ae = train_ae_stage(config)?;
    train_semantic_stage(config, ae)
}

const LEXICON_FILE: &str = "lexicon.tsv";

/// Writes model files, vocabularies and the lexicon under `dir`.
pub fn save_models(models: &Models, dir: &Path) -> Result<()> {
    persist::save_autoencoder(&models.autoencoder, dir)?;
    for (prefix, bk) in [("source", &models.source), ("destination", &models.destination)] {
        persist::save_codec(bk.codec()?, dir, prefix)?;
        bk.vocab.save(&dir.join(format!("{prefix}_vocab.txt")))?;
    }
    models.lexicon.save(&dir.join(LEXICON_FILE))
}

/// Loads what [`save_models`] wrote. Corpora are regenerated from the
/// config and must agree with the stored vocabularies.
pub fn load_models(config: &ExperimentConfig, dir: &Path) -> Result<Models> {
    config.validate()?;
    let autoencoder = persist::load_autoencoder(dir, config.autoencoder)?;
    let corpus = build_knowledge(config)?;
    let load = |prefix: &str, bk: BackgroundKnowledge| -> Result<BackgroundKnowledge> {
        let vocab = crate::codec::Vocabulary::load(&dir.join(format!("{prefix}_vocab.txt")))?;
        if vocab != bk.vocab {
            return Err(Error::Config(format!(
                "{prefix} vocabulary in {} does not match the configured corpus",
                dir.display()
            )));
        }
        let codec = persist::load_codec(dir, prefix, config.codec, vocab.len())?;
        bk.with_codec(codec)
    };
    let source = load("source", corpus.source)?;
    let destination = load("destination", corpus.destination)?;
    let lexicon = match &config.knowledge {
        KnowledgeSetup::Mismatched { lexicon: Some(_), .. } => corpus.lexicon,
        _ => TranslationLexicon::load(&dir.join(LEXICON_FILE))?,
    };
    Ok(Models {
        autoencoder,
        source,
        destination,
        lexicon,
    })
}

/// Per-hop noise variances for unit-power transmissions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopNoise {
    pub sigma2_hop1: f64,
    pub sigma2_hop2: f64,
}

impl HopNoise {
    pub fn from_snr(snr: HopSnr, power: f64) -> Self {
        HopNoise {
            sigma2_hop1: noise_variance_for(db_to_linear(snr.hop1_db), power),
            sigma2_hop2: noise_variance_for(db_to_linear(snr.hop2_db), power),
        }
    }

    pub fn noiseless() -> Self {
        HopNoise {
            sigma2_hop1: 0.0,
            sigma2_hop2: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub sentence_index: usize,
    pub input: String,
    /// What the destination should understand, in its own vocabulary.
    pub reference: String,
    pub output: Option<String>,
    /// Sentence re-encoded at the relay (semantic strategies).
    pub relay_text: Option<String>,
    pub bleu: Option<f64>,
    /// Cosine of the last transmitted semantic vectors and the
    /// destination's auto-decoder output.
    pub cosine: Option<f64>,
    /// Complex symbols sent over both hops.
    pub symbols: usize,
    pub deep_fade: bool,
    pub semantic_failure: bool,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.deep_fade || self.semantic_failure
    }
}

/// One end-to-end transmission of sentence `sentence` of the source
/// corpus. Fading and noise for each hop come from separate sub-streams
/// seeded from `rng`, so every strategy sees the same channel draws.
pub fn run_trial<R: RngCore + ?Sized>(
    strategy: &RelayStrategy,
    noise: HopNoise,
    models: &Models,
    sentence: usize,
    bleu_config: &BleuConfig,
    rng: &mut R,
) -> Result<TrialResult> {
    let hop_seeds = [rng.next_u64(), rng.next_u64()];
    let hop_rng = |hop: Hop| {
        let i = match hop {
            Hop::SourceToRelay => 0,
            Hop::RelayToDestination => 1,
        };
        stream(hop_seeds[i], &[])
    };
    let src = &models.source;
    let seq = src
        .corpus
        .get(sentence)
        .ok_or_else(|| Error::Config(format!("sentence index {sentence} out of range")))?;
    let ae = &models.autoencoder;
    let input = src.vocab.decode(seq);
    let reference = models
        .destination
        .corpus
        .get(sentence)
        .map(|s| models.destination.vocab.decode(s))
        .unwrap_or_else(|| models.lexicon.apply_text(&input));
    let mut result = TrialResult {
        sentence_index: sentence,
        input,
        reference,
        output: None,
        relay_text: None,
        bleu: None,
        cosine: None,
        symbols: 0,
        deep_fade: false,
        semantic_failure: false,
    };

    let x = src.codec()?.encode(seq)?;
    let y = ae.encode(&x)?;
    let mut r1 = hop_rng(Hop::SourceToRelay);
    let ch1 = sample_realization(&mut r1, noise.sigma2_hop1)?;
    let y_hat = apply_channel(&y, &ch1, &mut r1);
    let relayed = match forward(strategy, &y_hat, &ch1, models.relay_models()) {
        Err(Error::DeepFade { .. }) => {
            result.deep_fade = true;
            result.symbols = y.len();
            return Ok(result);
        }
        other => other?,
    };
    result.symbols = y.len() + relayed.block.len();
    result.semantic_failure = relayed.semantic_failure;
    result.relay_text = relayed.reencoded.as_ref().map(|s| models.destination.vocab.decode(s));

    let mut r2 = hop_rng(Hop::RelayToDestination);
    let ch2 = sample_realization(&mut r2, noise.sigma2_hop2)?;
    let z_hat = apply_channel(&relayed.block, &ch2, &mut r2);
    // An AF destination equalises the compound gain h2·α·h1.
    let eq = match relayed.gain {
        Some(alpha) => ChannelRealization::new(ch2.h * alpha * ch1.h, ch2.sigma2)?,
        None => ch2,
    };
    let z_eq = match equalize(&z_hat, &eq) {
        Err(Error::DeepFade { .. }) => {
            result.deep_fade = true;
            return Ok(result);
        }
        other => other?,
    };
    let x_hat = ae.decode(&z_eq)?;

    // The destination reads SF output with its own codec; everything else
    // arrives in the source's representation.
    let (bk, sent_x) = match strategy.kind() {
        StrategyKind::Sf => (&models.destination, relayed.x_relay.as_ref().unwrap_or(&x)),
        StrategyKind::DfSemantic => (&models.source, relayed.x_relay.as_ref().unwrap_or(&x)),
        StrategyKind::Af | StrategyKind::Df => (&models.source, &x),
    };
    let codec = bk.codec()?;
    let decoded = codec.greedy_decode(&x_hat, codec.config.max_len)?;
    let output = bk.vocab.decode(&decoded.sequence);
    result.bleu = Some(bleu(&tokenize(&output), &tokenize(&result.reference), bleu_config));
    result.cosine = match cosine_similarity(&sent_x.data, &x_hat.data) {
        Ok(c) => Some(c),
        Err(Error::UndefinedSimilarity) => None,
        Err(e) => return Err(e),
    };
    result.output = Some(output);
    Ok(result)
}

/// Aggregate of one `(axis value, strategy)` point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: f64,
    pub strategy: StrategyKind,
    pub trials: usize,
    pub bleu_mean: f64,
    pub bleu_std: f64,
    pub cosine_mean: f64,
    pub cosine_std: f64,
    pub fail_rate: f64,
    pub symbols_per_sentence_mean: f64,
}

impl SweepRow {
    /// Trials without metrics count as zero BLEU and zero similarity.
    pub fn from_trials(axis: f64, strategy: StrategyKind, trials: &[TrialResult]) -> Self {
        let n = trials.len();
        let b: Vec<f64> = trials.iter().map(|t| t.bleu.unwrap_or(0.0)).collect();
        let c: Vec<f64> = trials.iter().map(|t| t.cosine.unwrap_or(0.0)).collect();
        let (bleu_mean, bleu_std) = mean_std(&b);
        let (cosine_mean, cosine_std) = mean_std(&c);
        SweepRow {
            axis,
            strategy,
            trials: n,
            bleu_mean,
            bleu_std,
            cosine_mean,
            cosine_std,
            fail_rate: trials.iter().filter(|t| t.failed()).count() as f64 / n.max(1) as f64,
            symbols_per_sentence_mean: trials.iter().map(|t| t.symbols as f64).sum::<f64>() / n.max(1) as f64,
        }
    }
}

/// Mean and sample standard deviation, summed in index order.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() == 1 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_name: String,
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn row(&self, axis: f64, strategy: StrategyKind) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && (r.axis - axis).abs() < 1e-9)
    }

    /// Rows of one strategy in axis order.
    pub fn series(&self, strategy: StrategyKind) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.strategy == strategy).collect()
    }
}

/// Runs every configured strategy at one operating point. Trial `t` uses
/// sentence `t mod corpus size` and the stream `(seed, t)`, or
/// `(seed, point, t)` without common random numbers.
pub fn run_point(
    config: &ExperimentConfig,
    models: &Models,
    noise: HopNoise,
    point: usize,
) -> Result<Vec<(StrategyKind, Vec<TrialResult>)>> {
    let bleu_config = BleuConfig::uniform(config.bleu_order)?;
    let n_sent = models.source.corpus.len();
    let power = models.autoencoder.config.power;
    let mut out = Vec::with_capacity(config.strategies.len());
    for &kind in &config.strategies {
        let strategy = RelayStrategy::from_kind(kind, power, &models.lexicon);
        let one = |t: usize| {
            let mut rng = if config.common_random_numbers {
                stream(config.seed, &[TRIAL_STREAM, t as u64])
            } else {
                stream(config.seed, &[TRIAL_STREAM, point as u64, t as u64])
            };
            run_trial(&strategy, noise, models, t % n_sent, &bleu_config, &mut rng)
        };
        let trials: Result<Vec<TrialResult>> = if config.parallel {
            (0..config.trials).into_par_iter().map(one).collect()
        } else {
            (0..config.trials).map(one).collect()
        };
        out.push((kind, trials?));
    }
    Ok(out)
}

/// Which hops an SNR sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum SnrAxis {
    /// Both hops at the swept SNR.
    BothHops,
    /// Source→relay fixed, relay→destination swept.
    FixedHop1 { hop1_db: f64 },
}

pub fn run_snr_sweep(
    config: &ExperimentConfig,
    models: &Models,
    snr_db: &[f64],
    axis: SnrAxis,
) -> Result<SweepResult> {
    config.validate()?;
    if snr_db.is_empty() {
        return Err(Error::Config("empty SNR list".into()));
    }
    let mut rows = Vec::new();
    for (p, &db) in snr_db.iter().enumerate() {
        let snr = match axis {
            SnrAxis::BothHops => HopSnr::both(db),
            SnrAxis::FixedHop1 { hop1_db } => HopSnr {
                hop1_db,
                hop2_db: db,
            },
        };
        let noise = HopNoise::from_snr(snr, models.autoencoder.config.power);
        for (kind, trials) in run_point(config, models, noise, p)? {
            rows.push(SweepRow::from_trials(db, kind, &trials));
        }
    }
    Ok(SweepResult {
        axis_name: match axis {
            SnrAxis::BothHops => "snr_db".into(),
            SnrAxis::FixedHop1 { .. } => "hop2_snr_db".into(),
        },
        rows,
    })
}

/// Sweeps the relay position with per-hop SNRs from the configured link
/// budget. Every `d` is validated before any trial runs.
pub fn run_placement_sweep(config: &ExperimentConfig, models: &Models, ds: &[f64]) -> Result<SweepResult> {
    config.validate()?;
    let spec = config
        .link_budget
        .ok_or_else(|| Error::Config("placement sweep needs a link_budget".into()))?;
    if ds.is_empty() {
        return Err(Error::Config("empty relay position list".into()));
    }
    let budgets = ds
        .iter()
        .map(|&d| spec.budget()?.with_d(d))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for (p, (b, &d)) in budgets.iter().zip(ds).enumerate() {
        let noise = HopNoise::from_snr(HopSnr::from_budget(b), models.autoencoder.config.power);
        for (kind, trials) in run_point(config, models, noise, p)? {
            rows.push(SweepRow::from_trials(d, kind, &trials));
        }
    }
    Ok(SweepResult {
        axis_name: "d".into(),
        rows,
    })
}

/// Single operating point from the config's channel description.
pub fn evaluate(config: &ExperimentConfig, models: &Models) -> Result<SweepResult> {
    let snr = config.hop_snr()?;
    let noise = HopNoise::from_snr(snr, models.autoencoder.config.power);
    let axis = config.link_budget.map(|b| b.d).unwrap_or(snr.hop1_db);
    let rows = run_point(config, models, noise, 0)?
        .into_iter()
        .map(|(kind, trials)| SweepRow::from_trials(axis, kind, &trials))
        .collect();
    Ok(SweepResult {
        axis_name: if config.link_budget.is_some() { "d" } else { "snr_db" }.into(),
        rows,
    })
}
