use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polarsk::channel::{sample_rayleigh_channel, MeasuredChannelSet};
use polarsk_cli::manifest::{sha256_hex, RunManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn polarsk(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polarsk"))
        .args(args)
        .env("POLARSK_OUT_DIR", dir)
        .output()
        .expect("spawn polarsk")
}

fn status(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let o = polarsk(dir, args);
    assert_eq!(status(&o), 0, "{args:?}\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn col(text: &str, name: &str) -> Vec<f64> {
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let i = header
        .iter()
        .position(|h| *h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    rows(text).iter().map(|r| r[i].parse().unwrap()).collect()
}

fn planted_sweep(dir: &Path, x: f64) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (points, tones) = (20, 201);
    let mut raw = Vec::new();
    for p in 0..points {
        let gain = 0.01 / (1.0 + p as f64);
        for _ in 0..tones {
            let r = sample_rayleigh_channel(1, x, &mut rng).unwrap();
            let r = r.rows();
            raw.push([r[0][0] * gain, r[0][1] * gain, r[1][0] * gain, r[1][1] * gain]);
        }
    }
    let set = MeasuredChannelSet::from_raw(
        (0..tones).map(|t| 5.0e9 + 1e6 * t as f64).collect(),
        (0..points).map(|p| format!("p{p}")).collect(),
        raw,
    )
    .unwrap();
    let path = dir.join("sweep.csv");
    let mut buf = Vec::new();
    set.write_csv(&mut buf, false).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

#[test]
fn constellation_export_and_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["constellation", "--k", "1", "--m", "4"]);
    let text = read(d, "constellation.csv");
    assert_eq!(text.lines().count(), 17);
    assert!(text.starts_with("index,bits,k,q_v,q_h,eps,"));

    ok(d, &["constellation", "--k", "2", "--m", "4", "--x", "-4.5665dB"]);
    assert_eq!(read(d, "constellation.csv").lines().count(), 33);

    ok(d, &["constellation", "--dpsm", "--m", "8"]);
    assert_eq!(read(d, "constellation.csv").lines().count(), 17);

    // K not a power of two, missing placement information, missing unit suffix
    assert_eq!(status(&polarsk(d, &["constellation", "--k", "3", "--m", "4"])), 2);
    assert_eq!(status(&polarsk(d, &["constellation", "--k", "2", "--m", "4"])), 2);
    assert_eq!(
        status(&polarsk(d, &["constellation", "--k", "2", "--m", "4", "--x", "0.3"])),
        2
    );
}

#[test]
fn config_file_and_flag_override() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = d.join("c.json");
    std::fs::write(
        &cfg,
        r#"{"constellation":{"kind":"latitude","k":2,"m":8,"delta_eps":0.2}}"#,
    )
    .unwrap();
    ok(d, &["constellation", "--config", cfg.to_str().unwrap()]);
    assert_eq!(read(d, "constellation.csv").lines().count(), 129);
    ok(d, &["constellation", "--config", cfg.to_str().unwrap(), "--m", "4"]);
    assert_eq!(read(d, "constellation.csv").lines().count(), 33);

    std::fs::write(&cfg, r#"{"constellation":{"kind":"latitude","k":2,"m":8,"bogus":1}}"#).unwrap();
    assert_eq!(
        status(&polarsk(d, &["constellation", "--config", cfg.to_str().unwrap()])),
        2
    );
    std::fs::write(&cfg, "not json").unwrap();
    assert_eq!(
        status(&polarsk(d, &["constellation", "--config", cfg.to_str().unwrap()])),
        2
    );
}

#[test]
fn analyze_columns_are_consistent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "analyze",
            "--k",
            "2",
            "--m",
            "4",
            "--x",
            "-4.5665dB",
            "--n-r",
            "2",
            "--snr",
            "0:5:60dB",
        ],
    );
    let text = read(d, "analyze.csv");
    let tight = col(&text, "bound_tightened");
    let full = col(&text, "bound_full");
    let asym = col(&text, "bound_asymptotic");
    assert_eq!(tight.len(), 13);
    for i in 0..tight.len() {
        assert!(tight[i] <= full[i]);
        if i > 0 {
            assert!(tight[i] <= tight[i - 1] && full[i] <= full[i - 1] && asym[i] <= asym[i - 1]);
        }
    }
    let last = tight.len() - 1;
    assert!((asym[last] / tight[last] - 1.0).abs() < 0.01);
    assert!(col(&text, "diversity_order").iter().all(|&d| d == 4.0));
}

#[test]
fn optimize_reports_and_verifies() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &["optimize", "--k", "2", "--m", "4", "--x", "-4.5665dB", "--grid-verify"],
    );
    let v: serde_json::Value = serde_json::from_str(&read(d, "optimize.json")).unwrap();
    let de = v["report"]["delta_eps"].as_f64().unwrap();
    assert!((de - 0.308616).abs() < 1e-6, "{de}");
    assert_eq!(v["grid"]["agrees"], serde_json::json!(true));

    assert_eq!(
        status(&polarsk(d, &["optimize", "--k", "1", "--m", "4", "--x", "0.3lin"])),
        2
    );
    assert_eq!(
        status(&polarsk(
            d,
            &["optimize", "--k", "2", "--m", "4", "--x", "0.3lin", "--iters", "1"]
        )),
        4
    );
}

#[test]
fn simulate_is_reproducible_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b, c) = (tmp.path().join("a"), tmp.path().join("b"), tmp.path().join("c"));
    let args = [
        "simulate",
        "--k",
        "2",
        "--m",
        "4",
        "--x",
        "-4.5665dB",
        "--snr",
        "0:10:20dB",
        "--detector",
        "sd",
        "--seed",
        "9",
        "--symbols",
        "20000",
    ];
    ok(&a, &args);
    ok(&b, &args);
    let ber = read(&a, "ber.csv");
    assert_eq!(ber, read(&b, "ber.csv"));
    assert_eq!(rows(&ber).len(), 3);

    // the same run with ML gives the same error counts
    let mut ml = args.to_vec();
    ml[10] = "ml";
    ok(&c, &ml);
    let ml_ber = read(&c, "ber.csv");
    assert_eq!(col(&ml_ber, "bit_errors"), col(&ber, "bit_errors"));

    let manifest = a.join("simulate.manifest.json");
    let m = RunManifest::load(&manifest).unwrap();
    assert_eq!(m.master_seed, Some(9));
    assert_eq!(m.outputs[0].sha256, sha256_hex(ber.as_bytes()));

    let r = tmp.path().join("r");
    let out = ok(&r, &["replay", manifest.to_str().unwrap()]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("reproduced"));
    assert_eq!(read(&r, "ber.csv"), ber);

    // a manifest is also accepted as a config file
    let r2 = tmp.path().join("r2");
    ok(&r2, &["simulate", "--config", manifest.to_str().unwrap()]);
    assert_eq!(read(&r2, "ber.csv"), ber);

    // tampering with a recorded hash makes replay fail
    let tampered = tmp.path().join("tampered.json");
    let text = std::fs::read_to_string(&manifest)
        .unwrap()
        .replace(&m.outputs[0].sha256, &"0".repeat(64));
    std::fs::write(&tampered, text).unwrap();
    assert_eq!(status(&polarsk(&r, &["replay", tampered.to_str().unwrap()])), 3);
}

#[test]
fn simulate_rejects_bad_configs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let base = ["simulate", "--m", "4", "--x", "0.3lin", "--snr", "10dB"];
    let with = |extra: &[&'static str]| [&base[..], extra].concat();
    assert_eq!(status(&polarsk(d, &with(&["--detector", "magic"]))), 2);
    assert_eq!(status(&polarsk(d, &with(&["--workers", "0"]))), 2);
    assert_eq!(status(&polarsk(d, &with(&["--max-symbols", "10"]))), 2);
    assert_eq!(
        status(&polarsk(
            d,
            &[
                "simulate",
                "--dpsm",
                "--m",
                "4",
                "--x",
                "0.3lin",
                "--snr",
                "10dB",
                "--detector",
                "sd"
            ]
        )),
        2
    );
}

#[test]
fn check_bound_passes_and_flags_violations() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let common = [
        "simulate",
        "--check-bound",
        "--k",
        "1",
        "--m",
        "4",
        "--x",
        "-4.5665dB",
        "--detector",
        "sd",
    ];
    ok(
        d,
        &[&common[..], &["--n-r", "2", "--snr", "5,10dB", "--symbols", "20000"]].concat(),
    );
    assert!(col(&read(d, "bound_check.csv"), "bound_tightened")
        .iter()
        .all(|b| *b > 0.0));

    // With one receive antenna the Gray-tightened sum sits below the simulated
    // BER at moderate SNR; a long run resolves the gap and the check fails.
    let o = polarsk(
        d,
        &[
            &common[..],
            &["--n-r", "1", "--snr", "20,22.5dB", "--symbols", "1000000"],
        ]
        .concat(),
    );
    assert_eq!(status(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let text = read(d, "bound_check.csv");
    assert!(text.lines().skip(1).any(|l| l.ends_with(",false")));
    assert!(d.join("simulate.manifest.json").exists());
}

#[test]
fn complexity_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "complexity",
            "--k",
            "2",
            "--m",
            "8",
            "--x",
            "-4.5665dB",
            "--n-r",
            "1,2,4",
            "--snr",
            "20dB",
            "--trials",
            "2000",
        ],
    );
    let text = read(d, "complexity.csv");
    let r = rows(&text);
    assert_eq!(r.len(), 12);
    for n_r in ["1", "2", "4"] {
        let mean = |det: &str| -> f64 {
            r.iter()
                .find(|x| x[0] == n_r && x[1] == det)
                .map(|x| x[3].parse().unwrap())
                .unwrap()
        };
        assert!(
            mean("sic") < mean("sd") && mean("sd") < mean("qr_ml") && mean("qr_ml") < mean("ml"),
            "N_R={n_r}"
        );
    }
    let cdf = read(d, "complexity_cdf.csv");
    let mut last: Option<(String, String, f64, f64)> = None;
    for row in rows(&cdf) {
        let (f, p): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
        assert!(p > 0.0 && p <= 1.0);
        if let Some((n, det, f0, p0)) = &last {
            if *n == row[0] && *det == row[1] {
                assert!(f > *f0 && p >= *p0);
            } else {
                assert_eq!(*p0, 1.0);
            }
        }
        last = Some((row[0].clone(), row[1].clone(), f, p));
    }
}

#[test]
fn ingest_recovers_planted_leakage_and_replays() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let sweep = planted_sweep(d, 0.3);
    let out = d.join("out");
    ok(&out, &["ingest", "--csv", sweep.to_str().unwrap()]);
    let v: serde_json::Value = serde_json::from_str(&read(&out, "xpi.json")).unwrap();
    let est = v["xpi_db"].as_f64().unwrap();
    assert!((est - 10.0 * 0.3f64.log10()).abs() < 0.2, "{est}");
    assert!((v["mean_copolar_power"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert_eq!(read(&out, "channel_normalized.csv").lines().count(), 20 * 201 + 1);

    let again = d.join("again");
    ok(&again, &["replay", out.join("ingest.manifest.json").to_str().unwrap()]);
    assert_eq!(read(&again, "xpi.json"), read(&out, "xpi.json"));

    // the measured set can drive a simulation
    ok(
        &out,
        &[
            "simulate",
            "--m",
            "4",
            "--measured",
            sweep.to_str().unwrap(),
            "--snr",
            "10dB",
            "--symbols",
            "5000",
        ],
    );

    let bad = d.join("bad.csv");
    std::fs::write(&bad, "point_id,freq_hz,re_vv\nx,1,2\n").unwrap();
    assert_eq!(status(&polarsk(&out, &["ingest", "--csv", bad.to_str().unwrap()])), 3);
    assert_eq!(
        status(&polarsk(
            &out,
            &["ingest", "--csv", d.join("missing.csv").to_str().unwrap()]
        )),
        3
    );
}

#[test]
fn compare_writes_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(
        d,
        &[
            "compare",
            "--k",
            "1",
            "--m",
            "4",
            "--x",
            "-4.5665dB",
            "--n-r",
            "2",
            "--snr",
            "0:4:16dB",
            "--detector",
            "sic",
            "--versus",
            "sd",
            "--target-ber",
            "1e-2",
            "--symbols",
            "20000",
        ],
    );
    let v: serde_json::Value = serde_json::from_str(&read(d, "gap.json")).unwrap();
    assert!(v["gap_db"].as_f64().unwrap() > 0.0);
    assert_eq!(rows(&read(d, "compare.csv")).len(), 10);
}
