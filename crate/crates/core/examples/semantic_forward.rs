//! Source and destination speak different vocabularies. The relay decodes
//! each sentence, rewrites it with the translation lexicon and re-encodes
//! it for the destination; amplify-and-forward and decode-and-forward
//! deliver the source wording unchanged.
//!
//! cargo run --release --example semantic_forward -- [snr_db]

use semrelay::harness::{
    run_trial, train_models, ExperimentConfig, HopNoise, HopSnr, KnowledgeSetup,
};
use semrelay::metrics::BleuConfig;
use semrelay::relay::{RelayStrategy, StrategyKind};
use semrelay::rng::stream;

fn main() -> semrelay::Result<()> {
    let snr_db: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(12.0);
    let config = ExperimentConfig {
        seed: 2024,
        knowledge: KnowledgeSetup::Mismatched {
            divergence: 1.0,
            lexicon: None,
        },
        ..Default::default()
    };
    let models = train_models(&config)?;
    println!("lexicon:");
    for (src, dst) in models.lexicon.rules() {
        println!("  {src:>24} -> {dst}");
    }

    let sentences = models.source.sentences();
    let picks: Vec<usize> = sentences
        .iter()
        .position(|s| s == "my son is very good at cs")
        .into_iter()
        .chain([3, 50, 120])
        .collect();
    let power = config.autoencoder.power;
    for (label, noise) in [
        ("noiseless".to_string(), HopNoise::noiseless()),
        (
            format!("{snr_db} dB per hop"),
            HopNoise::from_snr(HopSnr::both(snr_db), power),
        ),
    ] {
        println!("\n{label}");
        for &i in &picks {
            println!("  source: {}", sentences[i]);
            for kind in [StrategyKind::Af, StrategyKind::Df, StrategyKind::Sf] {
                let strategy = RelayStrategy::from_kind(kind, power, &models.lexicon);
                let r = run_trial(
                    &strategy,
                    noise,
                    &models,
                    i,
                    &BleuConfig::default(),
                    &mut stream(i as u64, &[]),
                )?;
                println!(
                    "    {kind:>3}: {:<44} bleu {:.3}",
                    r.output.as_deref().unwrap_or("<deep fade>"),
                    r.bleu.unwrap_or(0.0)
                );
            }
        }
    }
    Ok(())
}
