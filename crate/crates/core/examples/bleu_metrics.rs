//! Sentence-level BLEU and cosine similarity on a few hand-picked pairs.
//!
//! cargo run --example bleu_metrics -- ["candidate" "reference"]

use semrelay::codec::tokenize;
use semrelay::metrics::{bleu_report, cosine_similarity, BleuConfig};

fn main() -> semrelay::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let pairs: Vec<(String, String)> = match args.as_slice() {
        [c, r] => vec![(c.clone(), r.clone())],
        _ => [
            ("it is a nice day today", "today is a nice day"),
            (
                "my son is very good at cs",
                "bob is very good at computer science",
            ),
            ("the the the", "the cat sat"),
            ("hello", "hello world"),
        ]
        .iter()
        .map(|&(c, r)| (c.to_string(), r.to_string()))
        .collect(),
    };

    for k in [2, 4] {
        let config = BleuConfig::uniform(k)?;
        println!("BLEU up to {k}-grams");
        for (c, r) in &pairs {
            let report = bleu_report(&tokenize(c), &tokenize(r), &config);
            let precisions: Vec<String> = report
                .precisions
                .iter()
                .map(|p| p.map_or("-".into(), |p| format!("{}/{}", p.matches, p.total)))
                .collect();
            println!(
                "  {c:?} vs {r:?}: p=[{}] BP={:.4} BLEU={:.4}",
                precisions.join(" "),
                report.brevity_penalty,
                report.bleu
            );
        }
    }

    let a = [1.0, 2.0, 3.0];
    for b in [[2.0, 4.0, 6.0], [-1.0, -2.0, -3.0], [3.0, -1.0, 0.0]] {
        println!("cos({a:?}, {b:?}) = {:.4}", cosine_similarity(&a, &b)?);
    }
    Ok(())
}
