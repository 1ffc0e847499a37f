use polarsk::analytic::{
    abep_asymptotic, abep_union_bound, bound_table, db_to_linear, pep_asymptotic, pep_closed_form, pep_numeric,
    union_terms, PepParams,
};
use polarsk::channel::sample_rayleigh_channel;
use polarsk::constellation::{jones_vector, Constellation};
use polarsk::sim::fit_log_slope;
use polarsk::special::{appell_f1, appell_f1_series, q_function};
use polarsk::Error;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 10f64.powf(lo.log10() + (hi.log10() - lo.log10()) * i as f64 / (n - 1) as f64))
        .collect()
}

#[test]
fn pep_closed_form_matches_quadrature_on_grid() {
    let mut worst: f64 = 0.0;
    for n_r in [1u32, 2, 4] {
        for &rho in &logspace(0.1, 1e4, 9) {
            for &lv in &logspace(0.01, 4.0, 7) {
                for &lh in &logspace(0.01, 4.0, 7) {
                    let p = PepParams::new(lv, lh, rho, n_r).unwrap();
                    let a = pep_closed_form(&p).unwrap();
                    let b = pep_numeric(&p).unwrap();
                    worst = worst.max((a - b).abs() / b);
                }
            }
        }
    }
    assert!(worst <= 1e-6, "worst relative error {worst:e}");
}

#[test]
fn pep_matches_direct_channel_average() {
    // E[Q(√(ρ‖HΔ‖²/2))] over sampled channels, no closed form involved.
    let x = 0.35;
    let a = jones_vector(0.6, 0.0, 1.0).unwrap();
    let b = jones_vector(0.9, 0.7, 2.0).unwrap();
    let dv = a.jones[0] - b.jones[0];
    let dh = a.jones[1] - b.jones[1];
    let lv = dv.norm_sqr() + x * dh.norm_sqr();
    let lh = x * dv.norm_sqr() + dh.norm_sqr();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for (n_r, rho) in [(1usize, 10.0), (2, 3.0)] {
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let h = sample_rayleigh_channel(n_r, x, &mut rng).unwrap();
            let e: f64 = h.rows().iter().map(|r| (r[0] * dv + r[1] * dh).norm_sqr()).sum();
            let q = q_function((rho * e / 2.0).sqrt());
            s += q;
            s2 += q * q;
        }
        let mean = s / n as f64;
        let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
        let exact = pep_closed_form(&PepParams::new(lv, lh, rho, n_r as u32).unwrap()).unwrap();
        assert!(
            (mean - exact).abs() < 4.0 * se,
            "N_R={n_r}: {mean} vs {exact} (se {se})"
        );
    }
}

#[test]
fn pep_edge_cases() {
    for n_r in [1, 2, 4] {
        let half = pep_closed_form(&PepParams::new(1.0, 2.0, 0.0, n_r).unwrap()).unwrap();
        assert!((half - 0.5).abs() <= 1e-9);
        // high SNR approaches the asymptote
        let p = PepParams::new(0.8, 0.3, 1e7, n_r).unwrap();
        assert!((pep_closed_form(&p).unwrap() / pep_asymptotic(&p) - 1.0).abs() < 1e-4);
    }
    assert!(PepParams::new(-0.1, 1.0, 1.0, 1).is_err());
    assert!(PepParams::new(0.1, 1.0, 1.0, 0).is_err());
}

#[test]
fn appell_integral_matches_series() {
    let grid = [-0.9, -0.5, -0.1, 0.0, 0.3, 0.6, 0.9];
    for &(a, b1, b2, c) in &[
        (0.5, 1.0, 1.0, 3.0),
        (0.5, 2.0, 2.0, 5.0),
        (0.5, 4.0, 4.0, 9.0),
        (1.5, 0.7, 2.2, 4.1),
    ] {
        for &z1 in &grid {
            for &z2 in &grid {
                let i = appell_f1(a, b1, b2, c, z1, z2).unwrap();
                let s = appell_f1_series(a, b1, b2, c, z1, z2).unwrap();
                assert!(
                    (i - s).abs() <= 1e-8 * s.abs().max(1.0),
                    "({a},{b1},{b2},{c};{z1},{z2}): {i} vs {s}"
                );
            }
        }
    }
    for n in [1.0, 2.0, 4.0] {
        assert!((appell_f1(0.5, n, n, 2.0 * n + 1.0, 0.0, 0.0).unwrap() - 1.0).abs() <= 1e-12);
    }
}

/// Independent reconstruction of the union bound: Λ values from raw Jones
/// differences, Hamming weights from label XOR, PEP by quadrature.
fn bound_oracle(c: &Constellation, x: f64, rho: f64, n_r: u32, tightened: bool) -> f64 {
    let m = c.m_psk();
    let keep = |q: usize| !tightened || q == 1 || q % 2 == 0;
    let mut total = 0.0;
    for k in 0..c.circles() {
        let from = (k * m + 1) * m + 1;
        for to in 0..c.len() {
            let q_v = (to / m) % m;
            let q_h = to % m;
            if to == from || !keep(q_v) || !keep(q_h) {
                continue;
            }
            let (a, b) = (c.state(from), c.state(to));
            let dv = (a.jones[0] - b.jones[0]).norm_sqr();
            let dh = (a.jones[1] - b.jones[1]).norm_sqr();
            let w = (c.label(from) ^ c.label(to)).count_ones() as f64;
            let p = PepParams::new(dv + x * dh, x * dv + dh, rho, n_r).unwrap();
            total += w * pep_numeric(&p).unwrap();
        }
    }
    total / (c.circles() as f64 * (c.len() as f64).log2())
}

#[test]
fn union_bound_matches_brute_force() {
    for (k, m, de) in [(1, 4, 0.0), (2, 4, 0.3), (2, 8, 0.25), (4, 4, 0.12)] {
        let c = Constellation::latitude(k, m, de).unwrap();
        for &rho_db in &[0.0, 15.0, 30.0] {
            for n_r in [1, 2] {
                for tightened in [true, false] {
                    let rho = db_to_linear(rho_db);
                    let got = abep_union_bound(&c, 0.35, rho, n_r, tightened).unwrap();
                    let want = bound_oracle(&c, 0.35, rho, n_r, tightened);
                    assert!(
                        (got / want - 1.0).abs() < 1e-7,
                        "K={k} M={m} {rho_db} dB: {got} vs {want}"
                    );
                }
            }
        }
    }
}

#[test]
fn m4_tightened_set_drops_exactly_the_odd_far_phase() {
    let c = Constellation::latitude(1, 4, 0.0).unwrap();
    let t = union_terms(&c, 0.3, true).unwrap();
    let f = union_terms(&c, 0.3, false).unwrap();
    assert_eq!(f.len(), 15);
    assert_eq!(t.len(), 8);
}

#[test]
fn bound_table_shape_and_asymptote() {
    let c = Constellation::latitude(2, 4, 0.3).unwrap();
    let grid: Vec<f64> = (0..=12).map(|i| 5.0 * i as f64).collect();
    for n_r in [1u32, 2, 4] {
        let rows = bound_table(&c, 0.35, n_r, &grid).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].bound_tightened <= w[0].bound_tightened);
            assert!(w[1].bound_full <= w[0].bound_full);
        }
        for r in &rows {
            assert!(r.bound_tightened <= r.bound_full);
            assert_eq!(r.diversity_order, 2 * n_r);
        }
        let last = rows.last().unwrap();
        assert!((last.bound_asymptotic.unwrap() / last.bound_tightened - 1.0).abs() < 1e-2);

        let samples: Vec<(f64, f64)> = rows.iter().map(|r| (r.rho_db, r.bound_asymptotic.unwrap())).collect();
        assert!((fit_log_slope(&samples).unwrap() - 2.0 * n_r as f64).abs() < 1e-6);
        // the closed-form slope over the last two decades of the grid
        let tail: Vec<(f64, f64)> = rows
            .iter()
            .rev()
            .take(5)
            .map(|r| (r.rho_db, r.bound_tightened))
            .collect();
        assert!((fit_log_slope(&tail).unwrap() - 2.0 * n_r as f64).abs() < 0.05);
    }
}

#[test]
fn coding_gain_reproduces_the_asymptote() {
    let c = Constellation::latitude(2, 8, 0.3).unwrap();
    for n_r in [1u32, 2] {
        let rho = 1e4;
        let a = abep_asymptotic(&c, 0.35, rho, n_r).unwrap();
        let from_gain = (a.coding_gain * rho).powf(-2.0 * n_r as f64);
        assert!((from_gain / a.bound - 1.0).abs() < 1e-12);
    }
    assert!(matches!(
        abep_asymptotic(&Constellation::latitude(1, 4, 0.0).unwrap(), 0.0, 10.0, 1),
        Err(Error::AsymptoteUndefined(_))
    ));
}

proptest! {
    #[test]
    fn pep_is_monotone_and_bounded(lv in 0.01f64..4.0, lh in 0.01f64..4.0, rho in 0.1f64..1e3, n_r in 1u32..4) {
        let p = pep_closed_form(&PepParams::new(lv, lh, rho, n_r).unwrap()).unwrap();
        let p2 = pep_closed_form(&PepParams::new(lv, lh, 2.0 * rho, n_r).unwrap()).unwrap();
        let pn = pep_closed_form(&PepParams::new(lv, lh, rho, n_r + 1).unwrap()).unwrap();
        prop_assert!(p > 0.0 && p < 0.5);
        prop_assert!(p2 < p);
        prop_assert!(pn < p);
    }
}
