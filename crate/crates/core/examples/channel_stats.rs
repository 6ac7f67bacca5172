//! Monte-Carlo statistics of one Rayleigh/AWGN hop and the per-hop SNRs
//! of the relay placement geometry.
//!
//! cargo run --release --example channel_stats -- [draws] [p1_db] [p2_db]

use num_complex::Complex64;
use semrelay::channel::{
    apply_channel, equalize, linear_to_db, sample_realization, snr_for_hop, Hop, LinkBudget,
    SymbolBlock,
};
use semrelay::rng::stream;

fn main() -> semrelay::Result<()> {
    let mut args = std::env::args().skip(1);
    let draws: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(200_000);
    let p1_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);
    let p2_db: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(5.0);

    let sigma2 = 0.1;
    let mut rng = stream(7, &[]);
    let unit = SymbolBlock::new(vec![Complex64::new(1.0, 0.0)]);
    let (mut gain, mut noise, mut eq_err, mut weak) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..draws {
        let ch = sample_realization(&mut rng, sigma2)?;
        gain += ch.h.norm_sqr();
        weak += (ch.h.norm_sqr() < 0.1) as usize;
        let rx = apply_channel(&unit, &ch, &mut rng);
        noise += (rx.symbols[0] - ch.h).norm_sqr();
        eq_err += (equalize(&rx, &ch)?.symbols[0] - 1.0).norm_sqr();
    }
    let n = draws as f64;
    println!("{draws} draws, sigma2 = {sigma2}");
    println!("  E|h|^2            = {:.4} (1)", gain / n);
    println!("  noise variance    = {:.4} ({sigma2})", noise / n);
    println!(
        "  P(|h|^2 < 0.1)    = {:.4} ({:.4})",
        weak as f64 / n,
        1.0 - (-0.1f64).exp()
    );
    println!("  post-ZF error     = {:.4} (heavy-tailed)", eq_err / n);

    println!("\nper-hop SNR for P1 = {p1_db} dB, P2 = {p2_db} dB, sigma2 = 1");
    println!("  d     hop1 dB  hop2 dB");
    for i in 1..10 {
        let b = LinkBudget::from_db(p1_db, p2_db, i as f64 / 10.0, 1.0)?;
        println!(
            "  {:.1}   {:7.2}  {:7.2}",
            b.d,
            linear_to_db(snr_for_hop(&b, Hop::SourceToRelay)),
            linear_to_db(snr_for_hop(&b, Hop::RelayToDestination))
        );
    }
    Ok(())
}
