//! Sample statistics of generated channels and of the analog stage.

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use hybrid_mimo::beamform::{design_analog_combiner, effective_channel};
use hybrid_mimo::stats::Summary;
use hybrid_mimo::stream::substream;
use hybrid_mimo::system::{generate_mmwave_channel, generate_rayleigh_channel, steering_vector, MmWaveParams, SystemConfig};

#[test]
fn rayleigh_entries_are_unit_variance_circular() {
    let cfg = SystemConfig::with_rf_per_user(64, 8, 1.0, 3).unwrap();
    let (mut re, mut im, mut power, mut modulus) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for t in 0..250 {
        let h = generate_rayleigh_channel(&cfg, &mut substream(3, t));
        for z in h.entries().iter() {
            re.push(z.re);
            im.push(z.im);
            power.push(z.norm_sqr());
            modulus.push(z.norm());
        }
    }
    assert!(power.len() >= 100_000);
    assert!(Summary::of(&re).mean.abs() < 0.01);
    assert!(Summary::of(&im).mean.abs() < 0.01);
    let p = Summary::of(&power).mean;
    assert!((0.99..=1.01).contains(&p), "E|h|^2 = {p}");
    let m = Summary::of(&modulus).mean;
    assert!((0.8842..=0.8884).contains(&m), "E|h| = {m}");
}

#[test]
fn mmwave_columns_carry_array_energy() {
    let cfg = SystemConfig::with_rf_per_user(64, 8, 1.0, 5).unwrap();
    let params = MmWaveParams::default();
    let mut energy = Vec::new();
    for t in 0..12_500 {
        let h = generate_mmwave_channel(&cfg, &params, &mut substream(5, t)).unwrap();
        for k in 0..8 {
            energy.push(h.entries().column(k).norm_squared());
        }
    }
    assert!(energy.len() >= 100_000);
    let mean = Summary::of(&energy).mean;
    assert!((mean / 64.0 - 1.0).abs() < 0.01, "E||h||^2 = {mean}");
}

#[test]
fn diagonal_gain_statistics() {
    let cfg = SystemConfig::with_rf_per_user(512, 8, 1.0, 9).unwrap();
    let mut diag = Vec::new();
    for t in 0..12_500 {
        let h = generate_rayleigh_channel(&cfg, &mut substream(9, t));
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        diag.extend((0..8).map(|k| g.entries()[(k, k)].re));
    }
    let s = Summary::of(&diag);
    assert!((7.05..=7.12).contains(&s.mean), "E[g_kk] = {}", s.mean);
    let target = 1.0 - PI / 4.0;
    assert!((s.variance / target - 1.0).abs() < 0.03, "Var[g_kk] = {}", s.variance);
}

#[test]
fn off_diagonal_gains_have_unit_power() {
    let cfg = SystemConfig::with_rf_per_user(120, 10, 1.0, 11).unwrap();
    let mut off = Vec::new();
    for t in 0..2_000 {
        let h = generate_rayleigh_channel(&cfg, &mut substream(11, t));
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let g = effective_channel(&a, &h).unwrap();
        for i in 0..10 {
            for k in (0..10).filter(|&k| k != i) {
                off.push(g.entries()[(i, k)].norm_sqr());
            }
        }
    }
    let mean = Summary::of(&off).mean;
    assert!((0.98..=1.02).contains(&mean), "E|g_ik|^2 = {mean}");
}

#[test]
fn generation_does_not_depend_on_draw_order() {
    let cfg = SystemConfig::with_rf_per_user(32, 4, 1.0, 21).unwrap();
    let forward: Vec<_> = (0..8).map(|t| generate_rayleigh_channel(&cfg, &mut substream(21, t))).collect();
    for t in (0..8).rev() {
        assert_eq!(generate_rayleigh_channel(&cfg, &mut substream(21, t)), forward[t as usize]);
    }
}

proptest! {
    #[test]
    fn steering_vectors_have_unit_norm(m in 1usize..256, spacing in 0.05f64..2.0, phi in 0.0f64..(2.0 * PI)) {
        let norm: f64 = steering_vector(m, spacing, phi).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        prop_assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn analog_combiner_is_block_sparse_constant_modulus(seed in any::<u64>(), k in 1usize..6, n in 1usize..9) {
        let cfg = SystemConfig::with_rf_per_user(n * k, k, 1.0, seed).unwrap();
        let h = generate_rayleigh_channel(&cfg, &mut substream(seed, 0));
        let a = design_analog_combiner(&h, &cfg).unwrap();
        let scale = 1.0 / (n as f64).sqrt();
        for r in 0..k {
            for c in 0..n * k {
                let v = a.entries()[(r, c)];
                if c / n == r {
                    assert_abs_diff_eq!(v.norm(), scale, epsilon = 1e-14);
                } else {
                    prop_assert_eq!(v.norm(), 0.0);
                }
            }
        }
        let g = effective_channel(&a, &h).unwrap();
        for i in 0..k {
            let gii = g.entries()[(i, i)];
            prop_assert!(gii.re >= 0.0 && gii.im.abs() < 1e-12);
        }
    }
}
