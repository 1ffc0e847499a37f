use polarsk::channel::{sample_rayleigh_channel, MeasuredChannelSet};
use polarsk::sim::{
    estimate_diversity_order, measure_avg_flops, run_ber_sweep, BerCurve, ChannelConfig, ConstellationConfig,
    SimConfig, StopRule, BER_CSV_HEADER,
};
use polarsk::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn base(detector: &str) -> SimConfig {
    SimConfig {
        constellation: ConstellationConfig::Latitude {
            k: 2,
            m: 4,
            delta_eps: None,
        },
        n_r: 1,
        channel: ChannelConfig::Rayleigh { x_linear: 0.35 },
        snr_grid_db: vec![0.0, 10.0, 20.0],
        detector: detector.into(),
        master_seed: 2024,
        stop: StopRule::fixed(20_000),
        workers: 1,
        flop_costs: Default::default(),
    }
}

fn csv(curve: &BerCurve) -> String {
    let mut out = Vec::new();
    curve.write_csv(&mut out).unwrap();
    String::from_utf8(out).unwrap()
}

#[test]
fn output_is_independent_of_worker_count() {
    let mut cfg = base("sd");
    cfg.stop = StopRule {
        min_bit_errors: 300,
        max_symbols: 30_000,
    };
    let reference = csv(&run_ber_sweep(&cfg).unwrap());
    for w in [2, 8] {
        cfg.workers = w;
        assert_eq!(csv(&run_ber_sweep(&cfg).unwrap()), reference, "workers = {w}");
    }
    assert!(reference.starts_with(BER_CSV_HEADER));
}

#[test]
fn sd_and_ml_give_identical_error_counts() {
    let sd = run_ber_sweep(&base("sd")).unwrap();
    let ml = run_ber_sweep(&base("ml")).unwrap();
    for (a, b) in sd.points.iter().zip(&ml.points) {
        assert_eq!((a.symbols, a.bit_errors), (b.symbols, b.bit_errors));
    }
}

#[test]
fn noise_free_limit_is_error_free() {
    let mut cfg = base("sd");
    cfg.constellation = ConstellationConfig::Latitude {
        k: 1,
        m: 4,
        delta_eps: None,
    };
    cfg.n_r = 2;
    cfg.snr_grid_db = vec![60.0];
    cfg.stop = StopRule::fixed(100_000);
    let p = &run_ber_sweep(&cfg).unwrap().points[0];
    assert_eq!((p.symbols, p.bit_errors), (100_000, 0));
    assert_eq!(p.ci_lo, 0.0);
}

#[test]
fn stopping_rule_and_interval() {
    let mut cfg = base("sic");
    cfg.snr_grid_db = vec![0.0];
    cfg.stop = StopRule {
        min_bit_errors: 200,
        max_symbols: 1_000_000,
    };
    let p = &run_ber_sweep(&cfg).unwrap().points[0];
    // stops at the first block boundary after 200 errors
    assert!(p.bit_errors >= 200 && p.symbols < 10_000, "{p:?}");
    assert!(p.ci_lo < p.ber && p.ber < p.ci_hi);
    assert_eq!(p.avg_nodes, 2.0);
}

#[test]
fn diversity_needs_three_points() {
    let curve = run_ber_sweep(&base("ml")).unwrap();
    assert!(matches!(
        estimate_diversity_order(&curve),
        Err(Error::InsufficientPoints(_))
    ));
}

#[test]
fn configuration_errors() {
    let mut cfg = base("mrc");
    assert!(matches!(run_ber_sweep(&cfg), Err(Error::Config(_))));
    cfg.detector = "sic".into();
    cfg.constellation = ConstellationConfig::Dpsm { m: 8 };
    assert!(matches!(run_ber_sweep(&cfg), Err(Error::Config(_))));
    cfg.detector = "ml".into();
    assert!(run_ber_sweep(&cfg).is_ok());
    cfg.channel = ChannelConfig::Measured {
        csv: "missing.csv".into(),
        sidecar: None,
    };
    cfg.n_r = 2;
    assert!(matches!(run_ber_sweep(&cfg), Err(Error::Config(_))));
}

#[test]
fn measured_replay_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut raw = Vec::new();
    for _ in 0..(3 * 50) {
        let h = sample_rayleigh_channel(1, 0.3, &mut rng).unwrap();
        let r = h.rows();
        raw.push([r[0][0], r[0][1], r[1][0], r[1][1]]);
    }
    let set = MeasuredChannelSet::from_raw(
        (0..50).map(|t| 1e9 + t as f64 * 1e6).collect(),
        vec!["a".into(), "b".into(), "c".into()],
        raw,
    )
    .unwrap();
    let path = dir.path().join("sweep.csv");
    set.write_csv(std::fs::File::create(&path).unwrap(), false).unwrap();
    let mut cfg = base("sd");
    cfg.channel = ChannelConfig::Measured {
        csv: path,
        sidecar: None,
    };
    let a = run_ber_sweep(&cfg).unwrap();
    cfg.detector = "ml".into();
    let b = run_ber_sweep(&cfg).unwrap();
    assert_eq!(csv(&a).lines().count(), 4);
    for (p, q) in a.points.iter().zip(&b.points) {
        assert_eq!(p.bit_errors, q.bit_errors);
    }
}

#[test]
fn flop_statistics() {
    let mut cfg = base("sd");
    cfg.constellation = ConstellationConfig::Latitude {
        k: 2,
        m: 8,
        delta_eps: None,
    };
    let stats = measure_avg_flops(&cfg, &["sic", "sd", "qr_ml", "ml"], 20.0, 2000).unwrap();
    let means: Vec<f64> = stats.iter().map(|s| s.mean).collect();
    assert!(means.windows(2).all(|w| w[0] < w[1]), "{means:?}");
    for s in &stats {
        assert!(s.cdf.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 < w[1].1));
        assert_eq!(s.cdf.last().unwrap().1, 1.0);
        if s.detector != "sd" {
            assert_eq!(s.min, s.max);
        }
    }
}
