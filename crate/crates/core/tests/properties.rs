use num_complex::Complex64;
use proptest::prelude::*;

use semrelay::channel::{
    apply_channel, db_to_linear, equalize, linear_to_db, normalize_power, snr_for_hop, ChannelRealization, Hop,
    LinkBudget, SymbolBlock,
};
use semrelay::harness::{generate_corpus, BkSpec, TemplateBank};
use semrelay::metrics::{bleu, brevity_penalty, cosine_similarity, kgram_precision, BleuConfig};
use semrelay::relay::{forward_af, TranslationLexicon};
use semrelay::rng::stream;

fn tokens(max_len: usize) -> impl Strategy<Value = Vec<u8>> {
    prop::collection::vec(0u8..6, 1..=max_len)
}

fn block(max_n: usize) -> impl Strategy<Value = SymbolBlock> {
    prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..=max_n)
        .prop_filter("non-zero", |v| v.iter().any(|&(a, b)| a.abs() + b.abs() > 1e-3))
        .prop_map(|v| SymbolBlock::new(v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect()))
}

proptest! {
    #[test]
    fn bleu_of_self_is_one(s in tokens(12)) {
        prop_assert!((bleu(&s, &s, &BleuConfig::default()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bleu_in_unit_interval(c in tokens(10), r in tokens(10), k in 1usize..4) {
        let b = bleu(&c, &r, &BleuConfig::uniform(k).unwrap());
        prop_assert!((0.0..=1.0).contains(&b), "{b}");
    }

    #[test]
    fn precision_bounded_and_symmetric_in_matches(c in tokens(8), r in tokens(8), k in 1usize..4) {
        if let Some(p) = kgram_precision(&c, &r, k) {
            prop_assert!(p.matches <= p.total);
            prop_assert_eq!(p.total, c.len() + 1 - k);
        } else {
            prop_assert!(c.len() < k);
        }
    }

    #[test]
    fn brevity_penalty_monotone_and_capped(c in 1usize..40, r in 1usize..40) {
        let bp = brevity_penalty(c, r);
        prop_assert!(bp > 0.0 && bp <= 1.0);
        prop_assert!(brevity_penalty(c + 1, r) >= bp);
        if c == r {
            prop_assert_eq!(bp, 1.0);
        }
    }

    #[test]
    fn cosine_invariant_under_scaling(
        a in prop::collection::vec(-3.0f64..3.0, 1..20),
        scale in prop_oneof![0.01f64..100.0, -100.0f64..-0.01],
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3));
        let b: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let c = cosine_similarity(&a, &b).unwrap();
        prop_assert!((c - scale.signum()).abs() < 1e-9, "{c}");
    }

    #[test]
    fn cosine_bounded(
        a in prop::collection::vec(-3.0f64..3.0, 8),
        b in prop::collection::vec(-3.0f64..3.0, 8),
    ) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let c = cosine_similarity(&a, &b).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&c));
    }

    #[test]
    fn normalized_block_meets_budget(b in block(16), p in 0.01f64..10.0) {
        let n = normalize_power(&b, p).unwrap();
        prop_assert!(n.mean_energy() <= p * (1.0 + 1e-6));
        prop_assert!((n.mean_energy() - p).abs() < 1e-9 * p.max(1.0));
    }

    #[test]
    fn noiseless_hop_is_identity_after_equalization(
        b in block(8),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
        seed in any::<u64>(),
    ) {
        let h = Complex64::new(re, im);
        prop_assume!(h.norm() > 1e-3);
        let ch = ChannelRealization::new(h, 0.0).unwrap();
        let out = equalize(&apply_channel(&b, &ch, &mut stream(seed, &[])), &ch).unwrap();
        for (u, v) in b.symbols.iter().zip(&out.symbols) {
            prop_assert!((u - v).norm() < 1e-9);
        }
    }

    #[test]
    fn af_output_is_colinear_and_scaled(
        b in block(8),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
        sigma2 in 0.0f64..2.0,
        p_r in 0.1f64..10.0,
    ) {
        let ch = ChannelRealization::new(Complex64::new(re, im), sigma2).unwrap();
        prop_assume!(ch.h.norm_sqr() + sigma2 > 1e-6);
        let (z, alpha) = forward_af(&b, &ch, 1.0, p_r).unwrap();
        prop_assert!((alpha - (p_r / (ch.h.norm_sqr() + sigma2)).sqrt()).abs() < 1e-12 * alpha.max(1.0));
        for (u, v) in b.symbols.iter().zip(&z.symbols) {
            prop_assert!((u * alpha - v).norm() < 1e-9 * alpha.max(1.0));
        }
    }

    #[test]
    fn hop_snrs_swap_under_mirrored_placement(p_db in -5.0f64..20.0, d in 0.01f64..0.99) {
        let a = LinkBudget::from_db(p_db, p_db, d, 1.0).unwrap();
        let b = LinkBudget::from_db(p_db, p_db, 1.0 - d, 1.0).unwrap();
        let (a1, a2) = (snr_for_hop(&a, Hop::SourceToRelay), snr_for_hop(&a, Hop::RelayToDestination));
        let (b1, b2) = (snr_for_hop(&b, Hop::SourceToRelay), snr_for_hop(&b, Hop::RelayToDestination));
        prop_assert!((a1 - b2).abs() < 1e-9 * a1 && (a2 - b1).abs() < 1e-9 * a2);
    }

    #[test]
    fn db_round_trip(x in -60.0f64..60.0) {
        prop_assert!((linear_to_db(db_to_linear(x)) - x).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn generated_lexicon_maps_source_to_destination(seed in any::<u64>(), divergence in 0.0f64..=1.0) {
        let spec = BkSpec { divergence, max_sentences: 60 };
        let g = generate_corpus(&TemplateBank::default(), &spec, &mut stream(seed, &[])).unwrap();
        let src = g.source.sentences();
        let dst = g.destination.sentences();
        prop_assert_eq!(src.len(), dst.len());
        for (s, d) in src.iter().zip(&dst) {
            let once = g.lexicon.apply_text(s);
            prop_assert_eq!(&once, d);
            prop_assert_eq!(g.lexicon.apply_text(s), once);
        }
        let back = TranslationLexicon::parse(&g.lexicon.to_file_string()).unwrap();
        prop_assert_eq!(back.len(), g.lexicon.len());
    }

    #[test]
    fn corpus_generation_is_deterministic(seed in any::<u64>()) {
        let spec = BkSpec { divergence: 0.5, max_sentences: 40 };
        let a = generate_corpus(&TemplateBank::default(), &spec, &mut stream(seed, &[])).unwrap();
        let b = generate_corpus(&TemplateBank::default(), &spec, &mut stream(seed, &[])).unwrap();
        prop_assert_eq!(a.source.sentences(), b.source.sentences());
        prop_assert_eq!(a.destination.sentences(), b.destination.sentences());
    }
}
