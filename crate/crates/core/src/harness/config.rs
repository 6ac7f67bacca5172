use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::autoencoder::{AeSchedule, AutoEncoderConfig};
use crate::channel::{db_to_linear, snr_for_hop, Hop, LinkBudget};
use crate::codec::{CodecConfig, SemSchedule};
use crate::error::{Error, Result};
use crate::relay::StrategyKind;

/// Link budget with powers in dB.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkBudgetSpec {
    pub p1_db: f64,
    pub p2_db: f64,
    pub d: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

fn default_gamma() -> f64 {
    2.0
}

fn default_sigma2() -> f64 {
    1.0
}

impl LinkBudgetSpec {
    pub fn budget(&self) -> Result<LinkBudget> {
        LinkBudget::new(
            db_to_linear(self.p1_db),
            db_to_linear(self.p2_db),
            self.d,
            self.gamma,
            self.sigma2,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopSnr {
    pub hop1_db: f64,
    pub hop2_db: f64,
}

impl HopSnr {
    pub fn both(db: f64) -> Self {
        HopSnr {
            hop1_db: db,
            hop2_db: db,
        }
    }

    pub fn from_budget(b: &LinkBudget) -> Self {
        let db = |s: f64| 10.0 * s.log10();
        HopSnr {
            hop1_db: db(snr_for_hop(b, Hop::SourceToRelay)),
            hop2_db: db(snr_for_hop(b, Hop::RelayToDestination)),
        }
    }
}

/// Whether source and destination share background knowledge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KnowledgeSetup {
    Shared,
    Mismatched {
        #[serde(default = "default_divergence")]
        divergence: f64,
        /// Lexicon file used by the relay instead of the generated one.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lexicon: Option<PathBuf>,
    },
}

fn default_divergence() -> f64 {
    1.0
}

impl KnowledgeSetup {
    pub fn is_mismatched(&self) -> bool {
        matches!(self, KnowledgeSetup::Mismatched { .. })
    }

    pub fn divergence(&self) -> f64 {
        match self {
            KnowledgeSetup::Shared => 0.0,
            KnowledgeSetup::Mismatched { divergence, .. } => *divergence,
        }
    }
}

/// Everything needed to train the models and run one experiment.
///
/// Exactly one of `link_budget` and `snr_db` must be given.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_budget: Option<LinkBudgetSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<HopSnr>,
    pub strategies: Vec<StrategyKind>,
    pub knowledge: KnowledgeSetup,
    pub trials: usize,
    pub max_sentences: usize,
    /// JSON template bank; the built-in bank when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub template_bank: Option<PathBuf>,
    pub autoencoder: AutoEncoderConfig,
    pub codec: CodecConfig,
    pub ae_schedule: AeSchedule,
    pub sem_schedule: SemSchedule,
    pub ae_train_snr_db: f64,
    /// Training SNR for the semantic codec; noiseless when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sem_train_snr_db: Option<f64>,
    pub bleu_order: usize,
    /// Fan trials out over threads. Results are identical either way.
    pub parallel: bool,
    /// Reuse trial `t`'s random stream at every sweep point, so points are
    /// compared on the same fading and noise draws. When false the stream
    /// also depends on the point index.
    pub common_random_numbers: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 1,
            link_budget: None,
            snr_db: Some(HopSnr::both(12.0)),
            strategies: vec![StrategyKind::Af, StrategyKind::Df],
            knowledge: KnowledgeSetup::Shared,
            trials: 200,
            max_sentences: 200,
            template_bank: None,
            autoencoder: AutoEncoderConfig::default(),
            codec: CodecConfig::default(),
            ae_schedule: AeSchedule::default(),
            sem_schedule: SemSchedule::default(),
            ae_train_snr_db: 12.0,
            sem_train_snr_db: None,
            bleu_order: 2,
            parallel: false,
            common_random_numbers: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match (&self.link_budget, &self.snr_db) {
            (Some(b), None) => {
                b.budget()?;
            }
            (None, Some(_)) => {}
            _ => {
                return Err(Error::Config(
                    "set exactly one of link_budget and snr_db".into(),
                ))
            }
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("no strategies selected".into()));
        }
        if self.bleu_order == 0 {
            return Err(Error::Config("bleu_order must be >= 1".into()));
        }
        if let KnowledgeSetup::Mismatched { divergence, .. } = self.knowledge {
            if !(0.0..=1.0).contains(&divergence) {
                return Err(Error::Config(format!("divergence {divergence} outside [0, 1]")));
            }
        }
        self.autoencoder.validate()?;
        self.codec.validate()?;
        if self.codec.d_model != self.autoencoder.d_in {
            return Err(Error::Config(format!(
                "codec d_model {} must equal autoencoder d_in {}",
                self.codec.d_model, self.autoencoder.d_in
            )));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let c: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Per-hop SNRs of the configured operating point.
    pub fn hop_snr(&self) -> Result<HopSnr> {
        match (&self.link_budget, &self.snr_db) {
            (Some(b), None) => Ok(HopSnr::from_budget(&b.budget()?)),
            (None, Some(s)) => Ok(*s),
            _ => Err(Error::Config("set exactly one of link_budget and snr_db".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let c = ExperimentConfig::default();
        c.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn exactly_one_channel_description() {
        let mut c = ExperimentConfig {
            link_budget: Some(LinkBudgetSpec {
                p1_db: 5.0,
                p2_db: 5.0,
                d: 0.5,
                gamma: 2.0,
                sigma2: 1.0,
            }),
            ..Default::default()
        };
        assert!(c.validate().is_err());
        c.snr_db = None;
        c.validate().unwrap();
        let s = c.hop_snr().unwrap();
        assert!((s.hop1_db - s.hop2_db).abs() < 1e-12);
        c.link_budget = None;
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: ExperimentConfig = serde_json::from_str(
            r#"{"seed": 7, "strategies": ["sf"], "knowledge": {"mode": "mismatched"}}"#,
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.knowledge.divergence(), 1.0);
        assert_eq!(c.trials, 200);
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"sed": 7}"#).is_err());
    }

    #[test]
    fn trials_and_widths_checked() {
        let c = ExperimentConfig {
            trials: 0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let mut c = ExperimentConfig::default();
        c.codec.d_model = 16;
        assert!(c.validate().is_err());
    }
}
