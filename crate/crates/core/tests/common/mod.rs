#![allow(dead_code)]

use semrelay::harness::{ExperimentConfig, KnowledgeSetup, LinkBudgetSpec};
use semrelay::relay::StrategyKind;

/// Toy setup used by the end-to-end checks.
pub fn toy_config() -> ExperimentConfig {
    ExperimentConfig {
        seed: 2024,
        strategies: vec![StrategyKind::Af, StrategyKind::Df],
        trials: 200,
        ..Default::default()
    }
}

pub fn mismatched(mut c: ExperimentConfig) -> ExperimentConfig {
    c.knowledge = KnowledgeSetup::Mismatched {
        divergence: 1.0,
        lexicon: None,
    };
    c
}

pub fn with_budget(mut c: ExperimentConfig, p1_db: f64, p2_db: f64) -> ExperimentConfig {
    c.snr_db = None;
    c.link_budget = Some(LinkBudgetSpec {
        p1_db,
        p2_db,
        d: 0.5,
        gamma: 2.0,
        sigma2: 1.0,
    });
    c
}
