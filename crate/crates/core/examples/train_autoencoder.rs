//! Train the auto-encoder/decoder pair on random vectors through a Rayleigh
//! hop and report reconstruction MSE at several SNRs.
//!
//! cargo run --release --example train_autoencoder -- [steps] [snr_db]

use semrelay::autoencoder::{evaluate_mse, train_autoencoder, AeSchedule, AutoEncoderConfig};
use semrelay::rng::stream;

fn main() -> semrelay::Result<()> {
    let mut args = std::env::args().skip(1);
    let steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let snr_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(12.0);

    let config = AutoEncoderConfig::default();
    let schedule = AeSchedule {
        steps,
        ..Default::default()
    };
    let (model, trace) = train_autoencoder(config, snr_db, &schedule, &mut stream(1, &[]))?;
    let head: f64 = trace.iter().take(100).sum::<f64>() / trace.len().min(100) as f64;
    let tail: f64 = trace.iter().rev().take(100).sum::<f64>() / trace.len().min(100) as f64;
    println!("trained {steps} steps at {snr_db} dB: loss {head:.4} -> {tail:.4}");

    let mut rng = stream(2, &[]);
    println!(
        "noiseless MSE: {:.4}",
        evaluate_mse(&model, None, 200, 8, &mut rng)?
    );
    for db in [0.0, 6.0, 12.0, 20.0] {
        println!(
            "{db:>5} dB MSE: {:.4}",
            evaluate_mse(&model, Some(db), 200, 8, &mut rng)?
        );
    }
    Ok(())
}
