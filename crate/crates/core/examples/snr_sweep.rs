//! Train the toy models and sweep per-hop SNR for every relay strategy,
//! printing the sweep CSV.
//!
//! cargo run --release --example snr_sweep -- [trials] [mismatched]

use semrelay::harness::{
    run_snr_sweep, to_csv, train_models, ExperimentConfig, KnowledgeSetup, SnrAxis,
};
use semrelay::relay::StrategyKind;

fn main() -> semrelay::Result<()> {
    let mut args = std::env::args().skip(1);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);
    let mismatched = args.next().is_some_and(|s| s == "mismatched");

    let mut config = ExperimentConfig {
        trials,
        strategies: StrategyKind::ALL.to_vec(),
        ..Default::default()
    };
    config.ae_schedule.steps = 3000;
    config.sem_schedule.steps = 600;
    if mismatched {
        config.knowledge = KnowledgeSetup::Mismatched {
            divergence: 1.0,
            lexicon: None,
        };
    }
    let t0 = std::time::Instant::now();
    let models = train_models(&config)?;
    eprintln!("trained in {:.1?}", t0.elapsed());
    let t0 = std::time::Instant::now();
    let sweep = run_snr_sweep(
        &config,
        &models,
        &[-10.0, -5.0, 0.0, 6.0, 12.0, 18.0],
        SnrAxis::BothHops,
    )?;
    eprintln!("swept in {:.1?}", t0.elapsed());
    print!("{}", to_csv(&sweep));
    Ok(())
}
