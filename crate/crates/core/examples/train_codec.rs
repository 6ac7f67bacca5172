//! Train the semantic codec on the generated toy corpus through a frozen,
//! pre-trained auto-encoder and report sentence recovery.
//!
//! cargo run --release --example train_codec -- [ae_steps] [sem_steps] [train_snr_db] [lr]

use semrelay::autoencoder::{train_autoencoder, AeSchedule, AutoEncoderConfig};
use semrelay::channel::{db_to_linear, noise_variance_for, sample_realization, transmit};
use semrelay::codec::{train_semantic, CodecConfig, SemSchedule};
use semrelay::harness::{generate_corpus, BkSpec, TemplateBank};
use semrelay::metrics::{bleu, BleuConfig};
use semrelay::rng::stream;

fn main() -> semrelay::Result<()> {
    let mut args = std::env::args().skip(1);
    let ae_steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let sem_steps: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(3000);
    let train_snr: Option<f64> = args.next().and_then(|s| s.parse().ok());
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(2e-3);

    let t0 = std::time::Instant::now();
    let (ae, _) = train_autoencoder(
        AutoEncoderConfig::default(),
        12.0,
        &AeSchedule {
            steps: ae_steps,
            ..Default::default()
        },
        &mut stream(1, &[]),
    )?;
    println!("auto-encoder: {:.1?}", t0.elapsed());

    let corpus = generate_corpus(
        &TemplateBank::default(),
        &BkSpec::default(),
        &mut stream(2, &[]),
    )?;
    let bk = &corpus.source;
    println!(
        "corpus: {} sentences, vocabulary {}",
        bk.corpus.len(),
        bk.vocab.len()
    );

    let t0 = std::time::Instant::now();
    let sched = SemSchedule {
        steps: sem_steps,
        optimizer: semrelay::nn::OptimizerConfig::Adam { lr },
    };
    let (codec, trace) = train_semantic(
        &bk.corpus,
        bk.vocab.len(),
        &ae,
        train_snr,
        CodecConfig::default(),
        &sched,
        &mut stream(3, &[]),
    )?;
    let tail = |n: usize| trace.iter().rev().take(n).sum::<f64>() / n.min(trace.len()) as f64;
    println!(
        "semantic codec: {:.1?}, final loss {:.4}",
        t0.elapsed(),
        tail(100)
    );

    let cfg = BleuConfig::default();
    for snr in [
        None,
        Some(20.0),
        Some(12.0),
        Some(6.0),
        Some(0.0),
        Some(-10.0),
    ] {
        let mut rng = stream(4, &[]);
        let (mut exact, mut total) = (0usize, 0.0);
        for s in &bk.corpus {
            let y = ae.encode(&codec.encode(s)?)?;
            let y_hat = match snr {
                None => y,
                Some(db) => {
                    let ch =
                        sample_realization(&mut rng, noise_variance_for(db_to_linear(db), 1.0))?;
                    transmit(&y, &ch, &mut rng)?
                }
            };
            let out = codec.greedy_decode(&ae.decode(&y_hat)?, codec.config.max_len)?;
            exact += (out.sequence == *s) as usize;
            total += bleu(&out.sequence.indices, &s.indices, &cfg);
        }
        let n = bk.corpus.len() as f64;
        println!(
            "{snr:?}: exact {:.3} bleu {:.3}",
            exact as f64 / n,
            total / n
        );
    }
    Ok(())
}
