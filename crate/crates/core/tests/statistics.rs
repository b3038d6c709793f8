//! Monte Carlo checks of the distributional identities of the cascade.

use cascade_core::measures::build_mu_q;
use cascade_core::presets::canonical;
use cascade_core::rng::split_seed;
use cascade_core::{spectrum, CascadeRealization};

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn partition_sum_has_unit_mean() {
    let spec = canonical();
    let j = spectrum::interval_j(&spec).unwrap();
    for q in [0.0, 0.5, 1.0, 1.5].into_iter().filter(|&q| j.contains(q)) {
        let totals: Vec<f64> = (0..200)
            .map(|i| {
                let real = CascadeRealization::sample(&spec, split_seed(17, i), 10).unwrap();
                build_mu_q(&real, q, 10, 0).unwrap().total()
            })
            .collect();
        let (mean, se) = mean_and_se(&totals);
        assert!((mean - 1.0).abs() <= 3.0 * se + 1e-12, "q={q}: mean {mean} se {se}");
    }
}

/// Two-sample Kolmogorov–Smirnov statistic.
fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn subtree_increments_share_the_root_law() {
    // F_W(1) at the root and the normalized increment of F_W over a
    // level-2 cell are both distributed as the tail-6 sum Z.
    let spec = canonical();
    let n = 300;
    let root: Vec<f64> = (0..n)
        .map(|i| {
            let r = CascadeRealization::sample(&spec, split_seed(101, i), 8).unwrap();
            r.build_trace(0, 6).unwrap().fw()[1]
        })
        .collect();
    let sub: Vec<f64> = (0..n)
        .map(|i| {
            let r = CascadeRealization::sample(&spec, split_seed(202, i), 8).unwrap();
            let t = r.build_trace(2, 6).unwrap();
            let k = (i % 4) as usize;
            (t.fw()[k + 1] - t.fw()[k]) / t.w_prod(2)[k]
        })
        .collect();
    let d = ks_statistic(&root, &sub);
    let crit = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
    assert!(d < crit, "KS statistic {d} exceeds {crit}");
}

#[test]
fn ks_statistic_detects_shift() {
    let a: Vec<f64> = (0..100).map(|i| i as f64).collect();
    let b: Vec<f64> = (0..100).map(|i| i as f64 + 50.0).collect();
    assert!((ks_statistic(&a, &b) - 0.5).abs() < 1e-12);
    assert_eq!(ks_statistic(&a, &a), 0.0);
}

#[test]
fn trace_is_reproducible_across_rebuilds() {
    let spec = canonical();
    let a = CascadeRealization::sample(&spec, 7, 16).unwrap().build_trace(10, 6).unwrap();
    let b = CascadeRealization::sample(&spec, 7, 16).unwrap().build_trace(10, 6).unwrap();
    let (mut x, mut y) = (Vec::new(), Vec::new());
    a.write_csv(&mut x).unwrap();
    b.write_csv(&mut y).unwrap();
    assert_eq!(x, y);
}
