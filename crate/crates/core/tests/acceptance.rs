//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.
//!
//! cargo test --release --test acceptance

mod common;

use std::collections::HashMap;
use std::time::Instant;

use rand::Rng;
use semrelay::autoencoder::{block_loss, evaluate_mse, random_block, train_autoencoder, AeSchedule, AutoEncoderConfig, AutoEncoderModel};
use semrelay::channel::{complex_noise, sample_realization};
use semrelay::codec::{sentence_loss, tokenize, CodecConfig, SemanticCodec, TokenSequence};
use semrelay::harness::{
    run_placement_sweep, run_snr_sweep, run_trial, to_csv, train_ae_stage, train_models, train_semantic_stage,
    ExperimentConfig, HopNoise, Models, SnrAxis, SweepResult,
};
use semrelay::metrics::{bleu, bleu_text, brevity_penalty, kgram_precision, BleuConfig, Precision};
use semrelay::nn::{dense, grad_check, Activation, Graph, Mat, ParameterSet, Role, Tensor};
use semrelay::relay::{RelayStrategy, StrategyKind};
use semrelay::rng::stream;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Models trained once and shared by the Monte-Carlo criteria.
#[derive(Default)]
struct Cache {
    shared: Option<Models>,
    mismatched: Option<Models>,
}

impl Cache {
    fn shared(&mut self) -> &Models {
        self.shared
            .get_or_insert_with(|| train_models(&common::toy_config()).expect("training shared models"))
    }

    fn mismatched(&mut self) -> &Models {
        self.mismatched.get_or_insert_with(|| {
            train_models(&common::mismatched(common::toy_config())).expect("training mismatched models")
        })
    }
}

fn c1_bleu_example() -> Outcome {
    let c = tokenize("it is a nice day today");
    let r = tokenize("today is a nice day");
    let p1 = kgram_precision(&c, &r, 1);
    let p3 = kgram_precision(&c, &r, 3);
    let b = bleu(&c, &r, &BleuConfig::default());
    let pass = p1 == Some(Precision { matches: 5, total: 6 })
        && p3 == Some(Precision { matches: 2, total: 4 })
        && (b - 0.5f64.sqrt()).abs() <= 1e-9
        && (bleu_text("It is a nice day today", "Today is a nice day", &BleuConfig::default()) - b).abs() == 0.0;
    check(pass, format!("p1={p1:?} p3={p3:?} bleu={b:.12}"))
}

fn c2_brevity() -> Outcome {
    let long = brevity_penalty(6, 5);
    let short = brevity_penalty(5, 6);
    let equal_ok = (1..=64).all(|c| brevity_penalty(c, c) == 1.0);
    let pass = long == 1.0 && (short - (-0.2f64).exp()).abs() <= 1e-12 && equal_ok;
    check(pass, format!("BP(6,5)={long} BP(5,6)={short:.15} BP(c,c)=1: {equal_ok}"))
}

fn c3_channel_stats() -> Outcome {
    const N: usize = 1_000_000;
    let sigma2 = 0.25;
    let mut rng = stream(3, &[]);
    let mut mags = Vec::with_capacity(N);
    let mut h_power = 0.0;
    let mut n_power = 0.0;
    for _ in 0..N {
        let h = sample_realization(&mut rng, sigma2).expect("valid sigma2").h;
        h_power += h.norm_sqr();
        mags.push(h.norm());
        n_power += complex_noise(&mut rng, sigma2).norm_sqr();
    }
    h_power /= N as f64;
    n_power /= N as f64;
    // |h| is Rayleigh with E|h|^2 = 1: F(r) = 1 - exp(-r^2).
    mags.sort_by(f64::total_cmp);
    let ks = mags
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let f = 1.0 - (-r * r).exp();
            (f - i as f64 / N as f64).abs().max(((i + 1) as f64 / N as f64 - f).abs())
        })
        .fold(0.0, f64::max);
    let noise_rel = (n_power - sigma2).abs() / sigma2;
    let pass = (0.99..=1.01).contains(&h_power) && noise_rel < 0.01 && ks < 0.005;
    check(
        pass,
        format!("E|h|^2={h_power:.5} noise rel.err={noise_rel:.5} KS={ks:.5}"),
    )
}

fn c4_gradients() -> Outcome {
    // Single dense layer with an MSE head.
    let mut rng = stream(40, &[]);
    let mut ps = ParameterSet::new(Role::AutoEncoder);
    ps.insert("w", Tensor::uniform_init(&[6, 5], 6, &mut rng)).unwrap();
    ps.insert("b", Tensor::uniform_init(&[5], 6, &mut rng)).unwrap();
    let x = Mat::new(3, 6, (0..18).map(|i| (i as f64 * 0.7).sin()).collect());
    let target = Mat::new(3, 5, (0..15).map(|i| (i as f64 * 0.3).cos()).collect());
    let dense_err = grad_check(
        |p, with_grad| {
            let mut g = Graph::new();
            let b = g.bind(p, true);
            let xn = g.constant(x.clone());
            let y = dense(&mut g, xn, b[0], b[1], Activation::Tanh)?;
            let l = g.mse(y, &target)?;
            if with_grad {
                g.backward(l)?;
                g.accumulate_into(&b, p)?;
            }
            Ok(g.value(l).scalar())
        },
        &mut ps,
        11,
        &mut stream(41, &[]),
    )
    .expect("dense gradcheck");

    // Auto-encoder pair through a Rayleigh hop.
    let ae = AutoEncoderModel::new(AutoEncoderConfig::default(), &mut stream(42, &[])).unwrap();
    let block = random_block(4, 32, &mut stream(43, &[]));
    let mut ae_err: f64 = 0.0;
    for which in 0..2 {
        let mut target = if which == 0 { ae.encoder.clone() } else { ae.decoder.clone() };
        let err = grad_check(
            |p, with_grad| {
                let mut m = ae.clone();
                if which == 0 {
                    m.encoder = p.clone();
                } else {
                    m.decoder = p.clone();
                }
                let mut g = Graph::new();
                let pe = g.bind(&m.encoder, which == 0);
                let pd = g.bind(&m.decoder, which == 1);
                let l = block_loss(&m, &mut g, &pe, &pd, &block, 0.05, &mut stream(44, &[]))?;
                if with_grad {
                    g.backward(l)?;
                    g.accumulate_into(if which == 0 { &pe } else { &pd }, p)?;
                }
                Ok(g.value(l).scalar())
            },
            &mut target,
            40,
            &mut stream(45, &[]),
        )
        .expect("auto-encoder gradcheck");
        ae_err = ae_err.max(err);
    }

    // Full toy Transformer chain with the cross-entropy objective.
    let cfg = CodecConfig {
        d_model: 32,
        max_len: 8,
        ..Default::default()
    };
    let codec = SemanticCodec::new(cfg, 12, &mut stream(46, &[])).unwrap();
    let seq = TokenSequence::new(vec![4, 9, 5, 11]);
    let mut tf_err: f64 = 0.0;
    for which in 0..2 {
        let mut target = if which == 0 { codec.encoder.clone() } else { codec.decoder.clone() };
        let err = grad_check(
            |p, with_grad| {
                let mut c = codec.clone();
                if which == 0 {
                    c.encoder = p.clone();
                } else {
                    c.decoder = p.clone();
                }
                let mut g = Graph::new();
                let pe = g.bind(&c.encoder, which == 0);
                let pd = g.bind(&c.decoder, which == 1);
                let pae = g.bind(&ae.encoder, false);
                let pad = g.bind(&ae.decoder, false);
                let l = sentence_loss(&c, &ae, &mut g, &pe, &pd, &pae, &pad, &seq, Some(0.05), &mut stream(47, &[]))?;
                if with_grad {
                    g.backward(l)?;
                    g.accumulate_into(if which == 0 { &pe } else { &pd }, p)?;
                }
                Ok(g.value(l).scalar())
            },
            &mut target,
            60,
            &mut stream(48, &[]),
        )
        .expect("transformer gradcheck");
        tf_err = tf_err.max(err);
    }
    let pass = dense_err < 1e-4 && ae_err < 1e-4 && tf_err < 1e-3;
    check(
        pass,
        format!("dense={dense_err:.2e} autoencoder={ae_err:.2e} transformer={tf_err:.2e}"),
    )
}

fn c5_autoencoder_convergence() -> Outcome {
    let (model, _) = train_autoencoder(
        AutoEncoderConfig::default(),
        12.0,
        &AeSchedule {
            steps: 5000,
            ..Default::default()
        },
        &mut stream(5, &[]),
    )
    .expect("auto-encoder training");
    let held_out = |snr| evaluate_mse(&model, snr, 500, 8, &mut stream(55, &[])).expect("evaluation");
    let (clean, at12) = (held_out(None), held_out(Some(12.0)));
    check(
        clean < 0.02 && at12 < 0.05,
        format!("held-out MSE noiseless={clean:.4} (<0.02) at 12 dB={at12:.4} (<0.05)"),
    )
}

fn c6_semantic_convergence(cache: &mut Cache) -> Outcome {
    let config = common::toy_config();
    let ae = train_ae_stage(&config).expect("auto-encoder");
    let frozen = ae.clone();
    let models = train_semantic_stage(&config, ae).expect("semantic training");
    let unchanged = models.autoencoder == frozen
        && models.autoencoder.encoder.fingerprint() == frozen.encoder.fingerprint()
        && models.autoencoder.decoder.fingerprint() == frozen.decoder.fingerprint();
    let bk = &models.source;
    let codec = bk.codec().unwrap();
    let cfg = BleuConfig::default();
    let (mut exact, mut total) = (0usize, 0.0);
    for s in &bk.corpus {
        let y = models.autoencoder.encode(&codec.encode(s).unwrap()).unwrap();
        let x_hat = models.autoencoder.decode(&y).unwrap();
        let out = codec.greedy_decode(&x_hat, codec.config.max_len).unwrap().sequence;
        exact += (out == *s) as usize;
        total += bleu(&out.indices, &s.indices, &cfg);
    }
    let n = bk.corpus.len() as f64;
    let (em, mb) = (exact as f64 / n, total / n);
    let small = bk.corpus.len() <= 200 && bk.vocab.len() <= 60;
    let detail = format!(
        "{} sentences, V={}: exact={em:.3} bleu={mb:.4} auto-encoder unchanged={unchanged}",
        bk.corpus.len(),
        bk.vocab.len()
    );
    cache.shared = Some(models);
    check(em >= 0.9 && mb >= 0.95 && unchanged && small, detail)
}

fn bleu_at(s: &SweepResult, axis: f64, k: StrategyKind) -> f64 {
    s.row(axis, k).expect("row present").bleu_mean
}

fn c7_af_df_crossover(cache: &mut Cache) -> Outcome {
    let mut config = common::toy_config();
    config.trials = 2000;
    config.parallel = true;
    let points = [-10.0, -5.0, 0.0, 6.0, 12.0, 18.0];
    let sweep = run_snr_sweep(&config, cache.shared(), &points, SnrAxis::BothHops).expect("sweep");
    let (af, df) = (StrategyKind::Af, StrategyKind::Df);
    let low = bleu_at(&sweep, -10.0, df) > bleu_at(&sweep, -10.0, af);
    let high = [12.0, 18.0].iter().all(|&p| bleu_at(&sweep, p, af) >= bleu_at(&sweep, p, df));
    let curve: Vec<String> = points
        .iter()
        .map(|&p| format!("{p}:{:.3}/{:.3}", bleu_at(&sweep, p, af), bleu_at(&sweep, p, df)))
        .collect();
    check(low && high, format!("AF/DF bleu by dB {}", curve.join(" ")))
}

fn c8_sf_advantage(cache: &mut Cache) -> Outcome {
    let mut config = common::mismatched(common::toy_config());
    config.strategies = vec![StrategyKind::Af, StrategyKind::Df, StrategyKind::Sf];
    let points = [6.0, 12.0, 18.0];
    let sweep = run_snr_sweep(&config, cache.mismatched(), &points, SnrAxis::BothHops).expect("sweep");
    let mut pass = true;
    let mut parts = Vec::new();
    for &p in &points {
        let sf = bleu_at(&sweep, p, StrategyKind::Sf);
        let best = bleu_at(&sweep, p, StrategyKind::Af).max(bleu_at(&sweep, p, StrategyKind::Df));
        pass &= sf - best >= 0.1;
        parts.push(format!("{p}dB sf={sf:.3} best(af,df)={best:.3}"));
    }
    check(pass, parts.join("; "))
}

fn argmax_d(s: &SweepResult, k: StrategyKind) -> f64 {
    s.series(k)
        .into_iter()
        .fold((f64::NAN, f64::NEG_INFINITY), |(d, b), r| {
            if r.bleu_mean > b {
                (r.axis, r.bleu_mean)
            } else {
                (d, b)
            }
        })
        .0
}

// Near d = 0.5 the curve is flat to within a few thousandths, so the
// symmetric budget needs many trials to resolve the peak.
const PLACEMENT_TRIALS: [usize; 2] = [4000, 1000];

fn c9_placement(cache: &mut Cache) -> Outcome {
    let grid: Vec<f64> = (1..=9).map(|i| i as f64 / 10.0).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for ((p1, p2), trials) in [(5.0, 5.0), (5.0, 10.0)].into_iter().zip(PLACEMENT_TRIALS) {
        let mut shared = common::with_budget(common::toy_config(), p1, p2);
        shared.trials = trials;
        shared.parallel = true;
        let mut mism = common::mismatched(shared.clone());
        mism.strategies = vec![StrategyKind::Sf];
        let a = run_placement_sweep(&shared, cache.shared(), &grid).expect("sweep");
        let b = run_placement_sweep(&mism, cache.mismatched(), &grid).expect("sweep");
        for (sweep, k) in [(&a, StrategyKind::Af), (&a, StrategyKind::Df), (&b, StrategyKind::Sf)] {
            let d = argmax_d(sweep, k);
            let ok = if p1 == p2 {
                (d - 0.5).abs() <= 0.1 + 1e-9
            } else {
                d <= 0.5 + 1e-9
            };
            pass &= ok;
            parts.push(format!("P1={p1} P2={p2} {k}: argmax d={d}"));
        }
    }
    check(pass, parts.join("; "))
}

fn c10_sf_worked_example(cache: &mut Cache) -> Outcome {
    let models = cache.mismatched();
    let Some(idx) = models
        .source
        .sentences()
        .iter()
        .position(|s| s == "my son is very good at cs")
    else {
        return check(false, "sentence missing from the source corpus");
    };
    let strategy = RelayStrategy::from_kind(StrategyKind::Sf, 1.0, &models.lexicon);
    let r = run_trial(
        &strategy,
        HopNoise::noiseless(),
        models,
        idx,
        &BleuConfig::default(),
        &mut stream(10, &[]),
    )
    .expect("trial");
    let out = r.output.clone().unwrap_or_default();
    check(
        out == "bob is very good at computer science",
        format!("relay sent {:?}, destination decoded {out:?}", r.relay_text.unwrap_or_default()),
    )
}

fn c11_determinism() -> Outcome {
    let mut config = common::toy_config();
    config.trials = 60;
    config.strategies = StrategyKind::ALL.to_vec();
    let points = [-5.0, 5.0, 15.0];
    let run = |c: &ExperimentConfig| {
        let models = train_models(c).expect("training");
        let before = models.fingerprint();
        let csv = to_csv(&run_snr_sweep(c, &models, &points, SnrAxis::BothHops).expect("sweep"));
        (csv, before == models.fingerprint())
    };
    let (a, untouched) = run(&config);
    let (b, _) = run(&config);
    config.parallel = true;
    let (c, _) = run(&config);
    check(
        a == b && a == c && untouched,
        format!(
            "rerun identical={} parallel identical={} models untouched={untouched}",
            a == b,
            a == c
        ),
    )
}

fn oracle(c: &[u8], r: &[u8], k: usize) -> Option<Precision> {
    if c.len() < k {
        return None;
    }
    let rg: Vec<&[u8]> = r.windows(k).collect();
    let mut used = vec![false; rg.len()];
    let mut matches = 0;
    for g in c.windows(k) {
        if let Some(j) = (0..rg.len()).find(|&j| !used[j] && rg[j] == g) {
            used[j] = true;
            matches += 1;
        }
    }
    Some(Precision {
        matches,
        total: c.len() + 1 - k,
    })
}

/// Calls `f` on every restricted-growth string of length `n` over at most
/// `v` symbols: one representative per relabelling class.
fn canonical(buf: &mut Vec<u8>, n: usize, v: u8, f: &mut dyn FnMut(&[u8])) {
    if buf.len() == n {
        f(buf);
        return;
    }
    let top = buf.iter().copied().max().map_or(0, |m| m + 1).min(v - 1);
    for s in 0..=top {
        buf.push(s);
        canonical(buf, n, v, f);
        buf.pop();
    }
}

fn c12_oracle() -> Outcome {
    let mut checked = 0u64;
    let mut bad: Option<(Vec<u8>, Vec<u8>, usize)> = None;
    let mut cmp = |c: &[u8], r: &[u8]| {
        for k in 1..=8 {
            checked += 1;
            if kgram_precision(c, r, k) != oracle(c, r, k) && bad.is_none() {
                bad = Some((c.to_vec(), r.to_vec(), k));
            }
        }
    };
    // Every pair with both lengths <= 4.
    let mut short: Vec<Vec<u8>> = vec![vec![]];
    for len in 1..=4 {
        let mut next = Vec::new();
        for s in short.iter().filter(|s| s.len() == len - 1) {
            for t in 0..5u8 {
                let mut s = s.clone();
                s.push(t);
                next.push(s);
            }
        }
        short.extend(next);
    }
    for c in &short {
        for r in &short {
            cmp(c, r);
        }
    }
    // Precision depends only on token equality, so one representative per
    // relabelling covers every pair of total length <= 11 with L <= 8.
    for n in 0..=11 {
        canonical(&mut Vec::new(), n, 5, &mut |s| {
            for split in n.saturating_sub(8)..=n.min(8) {
                let (c, r) = s.split_at(split);
                cmp(c, r);
            }
        });
    }
    // Random pairs up to the full length bound.
    let mut rng = stream(12, &[]);
    for _ in 0..200_000 {
        let lc = rng.random_range(0..=8);
        let lr = rng.random_range(0..=8);
        let c: Vec<u8> = (0..lc).map(|_| rng.random_range(0..5)).collect();
        let r: Vec<u8> = (0..lr).map(|_| rng.random_range(0..5)).collect();
        cmp(&c, &r);
    }
    match bad {
        None => check(true, format!("{checked} (pair, k) evaluations agree")),
        Some((c, r, k)) => check(false, format!("mismatch at c={c:?} r={r:?} k={k}")),
    }
}

type Criterion = Box<dyn FnOnce(&mut Cache) -> Outcome>;

fn main() {
    let mut cache = Cache::default();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("BLEU worked example", Box::new(|_| c1_bleu_example())),
        ("brevity penalty branches", Box::new(|_| c2_brevity())),
        ("channel statistics", Box::new(|_| c3_channel_stats())),
        ("gradient suite", Box::new(|_| c4_gradients())),
        ("auto-encoder convergence", Box::new(|_| c5_autoencoder_convergence())),
        ("semantic codec convergence", Box::new(c6_semantic_convergence)),
        ("AF/DF crossover", Box::new(c7_af_df_crossover)),
        ("SF advantage with mismatched knowledge", Box::new(c8_sf_advantage)),
        ("relay placement", Box::new(c9_placement)),
        ("SF worked example", Box::new(c10_sf_worked_example)),
        ("determinism", Box::new(|_| c11_determinism())),
        ("k-gram precision oracle", Box::new(|_| c12_oracle())),
    ];
    let mut results: HashMap<usize, bool> = HashMap::new();
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let o = run(&mut cache);
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {verdict} {name}: {} [{:.1?}]",
            i + 1,
            o.detail,
            t.elapsed()
        );
        results.insert(i + 1, o.pass);
    }
    let mut failed: Vec<usize> = results.iter().filter(|(_, &p)| !p).map(|(&i, _)| i).collect();
    failed.sort_unstable();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", results.len());
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
