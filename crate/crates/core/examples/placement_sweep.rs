//! Sweep the relay position d under a fixed link budget and report where
//! each strategy peaks.
//!
//! cargo run --release --example placement_sweep -- [p1_db] [p2_db] [trials]

use semrelay::harness::{
    run_placement_sweep, to_csv, train_models, ExperimentConfig, LinkBudgetSpec,
};
use semrelay::relay::StrategyKind;

fn main() -> semrelay::Result<()> {
    let mut args = std::env::args().skip(1);
    let p1_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let p2_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let trials: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200);

    let config = ExperimentConfig {
        snr_db: None,
        link_budget: Some(LinkBudgetSpec {
            p1_db,
            p2_db,
            d: 0.5,
            gamma: 2.0,
            sigma2: 1.0,
        }),
        strategies: vec![StrategyKind::Af, StrategyKind::Df, StrategyKind::DfSemantic],
        trials,
        seed: std::env::var("SEED")
            .ok()
            .and_then(|s| s.parse().ok())
            .unwrap_or(2024),
        ..Default::default()
    };
    let models = train_models(&config)?;
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let sweep = run_placement_sweep(&config, &models, &grid)?;
    print!("{}", to_csv(&sweep));
    for k in &config.strategies {
        let best = sweep
            .series(*k)
            .into_iter()
            .max_by(|a, b| a.bleu_mean.total_cmp(&b.bleu_mean))
            .expect("nonempty grid");
        println!("# {k}: best d = {} (BLEU {:.3})", best.axis, best.bleu_mean);
    }
    Ok(())
}
