mod common;

use proptest::prelude::*;

use common::{illustration_cohort, short_illustration};
use rcrjoint::model::EventKind;
use rcrjoint::parametric::{fit_special_case, tally};
use rcrjoint::simulate::{derive_seed, simulate_cohort_with, Cohort, Generator, Scenario};

fn scaled(c: &Cohort, f: f64) -> Cohort {
    let mut c = c.clone();
    for u in &mut c.units {
        u.end_time *= f;
        for e in &mut u.events {
            e.time *= f;
        }
    }
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rates_scale_inversely_with_time(seed in 0u64..1000, f in 0.1f64..10.0) {
        let sp = short_illustration(3.0).spaces().clone();
        let c = illustration_cohort(seed, 12, 3.0);
        let a = fit_special_case(&c, &sp).unwrap();
        let b = fit_special_case(&scaled(&c, f), &sp).unwrap();
        let pairs = a.lambda.iter().chain(&a.eta_estimates).chain(&a.xi_estimates)
            .zip(b.lambda.iter().chain(&b.eta_estimates).chain(&b.xi_estimates));
        for (x, y) in pairs {
            prop_assert!((y.value - x.value / f).abs() <= 1e-12 * x.value.abs() / f, "{}: {} vs {}", x.name, y.value, x.value / f);
        }
    }

    #[test]
    fn exposures_partition_follow_up(seed in 0u64..1000) {
        let sc = short_illustration(3.0);
        let sp = sc.spaces();
        let c = illustration_cohort(seed, 15, 3.0);
        let t = tally(&c, sp).unwrap();
        let total: f64 = c.units.iter().map(|u| u.end_time).sum();
        prop_assert!((t.total_time - total).abs() <= 1e-10 * total.max(1.0));
        prop_assert!((t.lm_occupation.iter().sum::<f64>() - total).abs() <= 1e-10 * total.max(1.0));
        let hs: f64 = sp.transient().iter().map(|&v| t.hs_occupation[v]).sum();
        prop_assert!((hs - total).abs() <= 1e-10 * total.max(1.0));
        let n_lm = c.units.iter().flat_map(|u| &u.events).filter(|e| matches!(e.kind, EventKind::Lm { .. })).count() as u64;
        prop_assert_eq!(t.lm_counts.iter().flatten().sum::<u64>(), n_lm);
        for q in 0..3 {
            let n: usize = c.units.iter().map(|u| u.rcr_times(q).len()).sum();
            prop_assert_eq!(t.rcr_counts[q], n as u64);
        }
    }
}

#[test]
fn score_vanishes_at_the_estimates() {
    let sc = short_illustration(3.0);
    let c = illustration_cohort(8, 40, 3.0);
    let f = fit_special_case(&c, sc.spaces()).unwrap();
    for (q, e) in f.lambda.iter().enumerate() {
        let score = f.tally.rcr_counts[q] as f64 / e.value - f.tally.total_time;
        assert!(score.abs() < 1e-9 * f.tally.total_time);
    }
}

#[test]
fn special_case_intervals_cover_truth() {
    let sc = Scenario::special_case();
    let truth: Vec<f64> = {
        let p = sc.params();
        let mut v = vec![1.0];
        for (a, b) in sc.spaces().lm_pairs() {
            v.push(p.eta[(a, b)]);
        }
        for (a, b) in sc.spaces().hs_pairs() {
            v.push(p.xi[(a, b)]);
        }
        v
    };
    let reps = 100;
    let mut inside = vec![0usize; truth.len()];
    for r in 0..reps {
        let c = simulate_cohort_with(&sc, 500, derive_seed(5, r), Generator::ExactSpecial).unwrap();
        let f = fit_special_case(&c, sc.spaces()).unwrap();
        for (k, e) in f.lambda.iter().chain(&f.eta_estimates).chain(&f.xi_estimates).enumerate() {
            if (e.value - truth[k]).abs() <= 3.0 * e.se.unwrap() {
                inside[k] += 1;
            }
        }
    }
    for (k, n) in inside.iter().enumerate() {
        assert!(*n as f64 >= 0.95 * reps as f64, "parameter {k}: {n} of {reps}");
    }
}
