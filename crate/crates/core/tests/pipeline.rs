mod common;

use std::sync::OnceLock;

use semrelay::harness::{
    evaluate, load_models, run_placement_sweep, run_point, run_snr_sweep, run_trial, save_models, to_csv, train_models,
    ExperimentConfig, HopNoise, HopSnr, Models, SnrAxis, SweepRow,
};
use semrelay::metrics::BleuConfig;
use semrelay::relay::{RelayStrategy, StrategyKind};
use semrelay::rng::stream;
use semrelay::Error;

fn shared() -> &'static (ExperimentConfig, Models) {
    static CELL: OnceLock<(ExperimentConfig, Models)> = OnceLock::new();
    CELL.get_or_init(|| {
        let mut c = common::toy_config();
        c.strategies = StrategyKind::ALL.to_vec();
        c.trials = 40;
        let m = train_models(&c).expect("training");
        (c, m)
    })
}

#[test]
fn noiseless_relaying_reproduces_training_sentences() {
    let (c, m) = shared();
    for kind in [StrategyKind::Af, StrategyKind::Df, StrategyKind::DfSemantic, StrategyKind::Sf] {
        let strategy = RelayStrategy::from_kind(kind, c.autoencoder.power, &m.lexicon);
        for i in (0..m.source.corpus.len()).step_by(17) {
            let r = run_trial(&strategy, HopNoise::noiseless(), m, i, &BleuConfig::default(), &mut stream(3, &[]))
                .unwrap();
            assert_eq!(r.bleu, Some(1.0), "{kind} sentence {i}: {:?} vs {}", r.output, r.reference);
            assert!(!r.failed());
        }
    }
}

#[test]
fn trials_are_reproducible() {
    let (c, m) = shared();
    let noise = HopNoise::from_snr(HopSnr::both(3.0), c.autoencoder.power);
    let strategy = RelayStrategy::from_kind(StrategyKind::Df, c.autoencoder.power, &m.lexicon);
    let once = |seed| run_trial(&strategy, noise, m, 5, &BleuConfig::default(), &mut stream(seed, &[])).unwrap();
    assert_eq!(once(9), once(9));
}

#[test]
fn single_point_sweep_aggregates_trials() {
    let (c, m) = shared();
    let snr = c.hop_snr().unwrap();
    let noise = HopNoise::from_snr(snr, c.autoencoder.power);
    let expected: Vec<SweepRow> = run_point(c, m, noise, 0)
        .unwrap()
        .into_iter()
        .map(|(k, t)| SweepRow::from_trials(snr.hop1_db, k, &t))
        .collect();
    assert_eq!(evaluate(c, m).unwrap().rows, expected);
    let sweep = run_snr_sweep(c, m, &[snr.hop1_db], SnrAxis::BothHops).unwrap();
    assert_eq!(sweep.rows, expected);
}

#[test]
fn sweep_points_share_trial_streams() {
    let (c, m) = shared();
    let noise = HopNoise::from_snr(HopSnr::both(0.0), c.autoencoder.power);
    assert_eq!(run_point(c, m, noise, 0).unwrap(), run_point(c, m, noise, 3).unwrap());
    let c = ExperimentConfig {
        common_random_numbers: false,
        ..c.clone()
    };
    assert_ne!(run_point(&c, m, noise, 0).unwrap(), run_point(&c, m, noise, 3).unwrap());
}

#[test]
fn invalid_placement_rejected_before_running() {
    let (c, m) = shared();
    let c = common::with_budget(c.clone(), 5.0, 5.0);
    for bad in [[0.5, 1.0], [0.0, 0.5], [0.5, f64::NAN]] {
        assert!(matches!(run_placement_sweep(&c, m, &bad), Err(Error::Config(_))));
    }
    assert!(run_placement_sweep(&c, m, &[]).is_err());
}

#[test]
fn af_placement_curve_is_symmetric_for_equal_powers() {
    let (c, m) = shared();
    let mut c = common::with_budget(c.clone(), 5.0, 5.0);
    c.strategies = vec![StrategyKind::Af];
    c.trials = 400;
    c.parallel = true;
    let ds = [0.2, 0.3, 0.4, 0.6, 0.7, 0.8];
    let s = run_placement_sweep(&c, m, &ds).unwrap();
    let b: Vec<f64> = s.rows.iter().map(|r| r.bleu_mean).collect();
    let diffs: Vec<f64> = (0..3).map(|i| (b[i] - b[5 - i]).abs()).collect();
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    assert!(mean < 0.05, "{b:?}");
}

#[test]
fn sweeps_leave_models_untouched() {
    let (c, m) = shared();
    let before = m.fingerprint();
    run_snr_sweep(c, m, &[0.0, 10.0], SnrAxis::FixedHop1 { hop1_db: 10.0 }).unwrap();
    assert_eq!(before, m.fingerprint());
}

#[test]
fn saved_models_reload_and_evaluate_alike() {
    let (c, m) = shared();
    let dir = tempfile::tempdir().unwrap();
    save_models(m, dir.path()).unwrap();
    let back = load_models(c, dir.path()).unwrap();
    assert_eq!(back.source.sentences(), m.source.sentences());
    assert_eq!(back.lexicon.len(), m.lexicon.len());
    let mut c = c.clone();
    c.snr_db = Some(HopSnr::both(40.0));
    let a = evaluate(&c, m).unwrap();
    let b = evaluate(&c, &back).unwrap();
    for (x, y) in a.rows.iter().zip(&b.rows) {
        assert!((x.bleu_mean - y.bleu_mean).abs() < 0.02, "{x:?} {y:?}");
    }
    let mut wrong = c.clone();
    wrong.autoencoder.hidden += 1;
    assert!(load_models(&wrong, dir.path()).is_err());
}

#[test]
fn csv_is_stable_across_reruns() {
    let (c, m) = shared();
    let run = || to_csv(&run_snr_sweep(c, m, &[2.0], SnrAxis::BothHops).unwrap());
    assert_eq!(run(), run());
}
