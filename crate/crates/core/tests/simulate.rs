use goldssr::design::{AllocationRatio, Arm};
use goldssr::estimators::{os_bias, Estimator, TrialData};
use goldssr::presets::power_design;
use goldssr::reestimate::ReestimationPolicy;
use goldssr::simulate::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, StudentsT};
use std::collections::BTreeMap;

fn reest(method: Estimator, n1: u64, mu_p: f64, alloc: &str, reps: u64) -> ScenarioConfig {
    let spec = power_design(mu_p, alloc.parse().unwrap());
    let p = ReestimationPolicy::new(method, n1, &spec.alloc);
    ScenarioConfig::power(spec, Sizing::Reestimate(p), reps, 20240611)
}

fn block_contents(d: &TrialData) -> BTreeMap<usize, [u64; 3]> {
    let mut m: BTreeMap<usize, [u64; 3]> = BTreeMap::new();
    for (b, a) in d.blocks().unwrap().iter().zip(d.labels().unwrap()) {
        m.entry(*b).or_default()[a.index()] += 1;
    }
    m
}

#[test]
fn balanced_blocks_hold_one_of_each() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let d = generate_trial([0.0; 3], 1.0, [10, 10, 10], [1, 1, 1], 0, &mut rng).unwrap();
    let blocks = block_contents(&d);
    assert_eq!(blocks.len(), 10);
    assert!(blocks.values().all(|c| *c == [1, 1, 1]));
}

#[test]
fn unbalanced_blocks_have_fixed_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let d = generate_trial([0.0; 3], 1.0, [30, 20, 10], [3, 2, 1], 5, &mut rng).unwrap();
    let blocks = block_contents(&d);
    assert_eq!(blocks.keys().copied().collect::<Vec<_>>(), (5..15).collect::<Vec<_>>());
    assert!(blocks.values().all(|c| *c == [3, 2, 1]));
    // Arm order varies between blocks.
    let labels = d.labels().unwrap();
    let first: Vec<Arm> = labels[..6].to_vec();
    assert!(labels.chunks(6).any(|c| c != first.as_slice()));
}

#[test]
fn incompatible_sizes_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert!(generate_trial([0.0; 3], 1.0, [10, 10, 11], [1, 1, 1], 0, &mut rng).is_err());
    assert!(generate_trial([0.0; 3], 1.0, [30, 20, 11], [3, 2, 1], 0, &mut rng).is_err());
    assert!(generate_trial([0.0; 3], 0.0, [3, 3, 3], [1, 1, 1], 0, &mut rng).is_err());
}

#[test]
fn generated_group_means_match_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let truth = [0.3, -1.2, 2.5];
    let sigma = 1.7;
    // 16 667 blocks of (3, 2, 1).
    let d = generate_trial(truth, sigma, [50_001, 33_334, 16_667], [3, 2, 1], 0, &mut rng).unwrap();
    for arm in Arm::ALL {
        let g = d.group(arm).unwrap();
        let n = g.len() as f64;
        let m = g.iter().sum::<f64>() / n;
        let sd = (g.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((m - truth[arm.index()]).abs() < 3.0 * sigma / n.sqrt(), "{arm}: {m}");
        assert!((sd / sigma - 1.0).abs() < 0.02);
    }
}

fn dataset(groups: [&[f64]; 3]) -> TrialData {
    let mut y = Vec::new();
    let mut l = Vec::new();
    for (arm, g) in Arm::ALL.into_iter().zip(groups) {
        y.extend_from_slice(g);
        l.extend(std::iter::repeat_n(arm, g.len()));
    }
    TrialData::new(y, Some(l), None).unwrap()
}

#[test]
fn iut_rejects_overwhelming_effects() {
    let spec = power_design(0.6, AllocationRatio::balanced());
    let d = dataset([&[0.0, 0.001, -0.001], &[0.0, 0.001, -0.001], &[100.0, 100.001, 99.999]]);
    let r = iut_test(&d, &spec).unwrap();
    assert!(r.reject_er && r.reject_ep && r.reject_rp && r.reject_global);
}

#[test]
fn iut_needs_every_local_rejection() {
    let spec = power_design(0.6, AllocationRatio::balanced());
    let d = dataset([
        &[50.0, 50.001, 49.999],
        &[0.0, 0.001, -0.001],
        &[100.0, 100.001, 99.999],
    ]);
    let r = iut_test(&d, &spec).unwrap();
    assert!(!r.reject_er && r.reject_ep && r.reject_rp);
    assert!(!r.reject_global);
}

#[test]
fn iut_rejects_undersized_groups() {
    let spec = power_design(0.6, AllocationRatio::balanced());
    let d = dataset([&[0.0], &[0.0, 1.0], &[1.0, 2.0]]);
    assert!(iut_test(&d, &spec).is_err());
    let blind = TrialData::from_outcomes(vec![0.0; 9]).unwrap();
    assert!(iut_test(&blind, &spec).is_err());
}

// Textbook pooled two-sample t test, one-sided lower tail.
fn t_oracle(a: &[f64], b: &[f64], shift: f64) -> f64 {
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    let ss = |x: &[f64], m: f64| x.iter().map(|v| (v - m) * (v - m)).sum::<f64>();
    let (ma, mb) = (mean(a), mean(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let sp2 = (ss(a, ma) + ss(b, mb)) / df;
    let t = (ma - mb + shift) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
    StudentsT::new(0.0, 1.0, df).unwrap().cdf(t)
}

#[test]
fn iut_p_values_match_textbook_t_tests() {
    let e = [0.12, -0.53, 0.87];
    let r = [0.41, 0.05, -0.22];
    let p = [0.95, 1.31, 0.38];
    let spec = goldssr::design::DesignSpec::builder()
        .margins(0.3, 0.1, 0.05)
        .means(0.0, 0.0, 0.6)
        .build()
        .unwrap();
    let res = iut_test(&dataset([&e, &r, &p]), &spec).unwrap();
    let oracle = [t_oracle(&e, &r, -0.3), t_oracle(&e, &p, 0.1), t_oracle(&r, &p, 0.05)];
    for (k, (got, want)) in res.p_values.iter().zip(oracle).enumerate() {
        assert!((got - want).abs() < 1e-10, "{k}: {got} vs {want}");
    }
}

#[test]
fn replication_is_deterministic() {
    let c = reest(Estimator::XingGanju, 30, 0.6, "1:1:1", 10);
    for i in [0, 7, 123_456] {
        assert_eq!(run_adaptive_trial(&c, i).unwrap(), run_adaptive_trial(&c, i).unwrap());
    }
    assert_ne!(run_adaptive_trial(&c, 0).unwrap(), run_adaptive_trial(&c, 1).unwrap());
}

#[test]
fn final_size_never_below_pilot() {
    let c = reest(Estimator::XingGanju, 30, 0.6, "1:1:1", 10);
    let sim = Simulator::new(c).unwrap();
    for i in 0..2000 {
        assert!(sim.run_trial(i).unwrap().n_final >= 30);
    }
}

#[test]
fn floored_adjusted_estimate_stops_at_the_pilot() {
    // The planning alternative implies a bias far above the true variance,
    // so the adjusted estimate is negative and floors.
    let spec = power_design(3.0, AllocationRatio::balanced());
    let p = ReestimationPolicy::new(Estimator::AdjustedOneSample, 60, &spec.alloc);
    let c = ScenarioConfig::power(spec, Sizing::Reestimate(p), 200, 1).with_truth([0.0; 3]);
    let sim = Simulator::new(c).unwrap();
    let mut floored = 0;
    for i in 0..200 {
        let o = sim.run_trial(i).unwrap();
        if o.estimate.unwrap() <= 0.0 {
            floored += 1;
            assert_eq!(o.n_reest, Some(6));
            assert_eq!(o.n_final, 60);
        }
    }
    assert!(floored > 150);
}

#[test]
fn blinded_estimates_match_analytic_means() {
    let reps = 4000;
    for (method, extra) in [
        (
            Estimator::OneSample,
            os_bias([0.0, 0.0, 0.9], [1.0 / 3.0; 3], 60).unwrap(),
        ),
        (Estimator::XingGanju, 0.0),
        (Estimator::Pooled, 0.0),
    ] {
        let sim = Simulator::new(reest(method, 60, 0.9, "1:1:1", reps)).unwrap();
        let xs: Vec<f64> = (0..reps).map(|i| sim.run_trial(i).unwrap().estimate.unwrap()).collect();
        let n = reps as f64;
        let m = xs.iter().sum::<f64>() / n;
        let se = (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt();
        assert!((m - 1.0 - extra).abs() < 3.0 * se, "{method}: {m}");
    }
}

#[test]
fn report_invariants() {
    let c = reest(Estimator::OneSample, 60, 0.9, "3:2:1", 1500);
    let r = simulate_power(&c, 0).unwrap();
    assert_eq!(r.reps, 1500);
    for k in 0..4 {
        assert!((0.0..=1.0).contains(&r.rates[k]));
        assert_eq!(r.rates[k], r.rejections[k] as f64 / 1500.0);
        let p = r.rates[k];
        assert!((r.mc_errors[k] - (p * (1.0 - p) / 1500.0).sqrt()).abs() < 1e-15);
    }
    assert!(r.n_final_q1 <= r.n_final_median && r.n_final_median <= r.n_final_q3);
    assert!(r.rates[3] <= r.rates[0].min(r.rates[1]).min(r.rates[2]));
}

#[test]
fn run_kind_is_checked() {
    let c = reest(Estimator::OneSample, 60, 0.9, "1:1:1", 1000);
    assert!(simulate_type1(&c, 1).is_err());
    let spec = c.spec;
    let t = ScenarioConfig::type1(spec, c.sizing, Null::ER, 1000, 1);
    assert!(simulate_power(&t, 1).is_err());
}

#[test]
fn far_null_is_almost_never_rejected() {
    let spec = power_design(0.6, AllocationRatio::balanced());
    let p = ReestimationPolicy::new(Estimator::OneSample, 60, &spec.alloc);
    let c = ScenarioConfig::type1(spec, Sizing::Reestimate(p), Null::ER, 3000, 8);
    let c = c.with_truth([spec.delta_er + 5.0, 0.0, 0.6]);
    let r = simulate_type1(&c, 0).unwrap();
    assert!(r.rate(Null::ER) < 0.001);
}

#[test]
fn size_distributions_follow_the_estimators() {
    let reps = 2000;
    let fixed = 525.0;
    let os: Vec<_> = [30, 150, 390]
        .iter()
        .map(|&n1| sample_size_distribution(&reest(Estimator::OneSample, n1, 0.6, "1:1:1", reps), 0).unwrap())
        .collect();
    let xg: Vec<_> = [30, 150, 390]
        .iter()
        .map(|&n1| sample_size_distribution(&reest(Estimator::XingGanju, n1, 0.6, "1:1:1", reps), 0).unwrap())
        .collect();
    for r in &os {
        assert!(r.n_final_median >= fixed, "{}", r.n_final_median);
    }
    let spread = os.iter().map(|r| r.n_final_median).fold(f64::MIN, f64::max)
        - os.iter().map(|r| r.n_final_median).fold(f64::MAX, f64::min);
    assert!(spread < 0.03 * fixed, "OS medians drift by {spread}");
    for w in xg.windows(2) {
        assert!(w[0].n_final_median <= w[1].n_final_median + 3.0);
    }
    assert!(xg.iter().all(|r| r.n_final_median <= fixed));
    assert!(fixed - xg[2].n_final_median < fixed - xg[0].n_final_median);
    for (a, b) in os.iter().zip(&xg) {
        assert!(b.n_final_q3 - b.n_final_q1 > a.n_final_q3 - a.n_final_q1);
    }
}

#[test]
fn fixed_runs_ignore_worker_count() {
    let spec = power_design(0.9, "3:2:1".parse().unwrap());
    let c = ScenarioConfig::power(spec, Sizing::Fixed(438), 3000, 77);
    let a = simulate_power(&c, 1).unwrap();
    let b = simulate_power(&c, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn csv_layout() {
    let mut buf = Vec::new();
    write_csv(&mut buf, &[]).unwrap();
    assert_eq!(String::from_utf8(buf).unwrap(), format!("{}\n", CSV_HEADER.join(",")));

    let spec = power_design(0.6, AllocationRatio::balanced());
    let p = ReestimationPolicy::new(Estimator::OneSample, 30, &spec.alloc);
    let power = simulate_power(&ScenarioConfig::power(spec, Sizing::Reestimate(p), 1000, 5), 0).unwrap();
    let t1e = simulate_type1(
        &ScenarioConfig::type1(spec, Sizing::Reestimate(p), Null::EP, 1000, 5),
        0,
    )
    .unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, &[power.clone(), t1e.clone()]).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), CSV_HEADER);
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(&rows[0][10], "");
    assert_eq!(&rows[1][10], "EP");
    assert_eq!(&rows[2][10], "RP");
    assert_eq!(rows[1][8].parse::<f64>().unwrap(), t1e.rate(Null::EP));
    assert_eq!(rows[2][8].parse::<f64>().unwrap(), t1e.rate(Null::RP));
    assert_eq!(&rows[0][1], "OS");
    assert_eq!(&rows[0][4], "30");
}

#[test]
fn csv_rows_are_enough_to_rerun() {
    let spec = power_design(0.9, "3:2:1".parse().unwrap());
    let mut p = ReestimationPolicy::new(Estimator::XingGanju, 60, &spec.alloc).with_zeta(1.137);
    p.allow_downsizing = false;
    p.planned_total = 200;
    let c = ScenarioConfig::type1(spec, Sizing::Reestimate(p), Null::ER, 1000, 99);
    let original = simulate_type1(&c, 0).unwrap();
    let mut buf = Vec::new();
    write_csv(&mut buf, std::slice::from_ref(&original)).unwrap();
    let mut rd = csv::Reader::from_reader(buf.as_slice());
    let row = rd.records().next().unwrap().unwrap();
    let rebuilt = ScenarioConfig::from_id(&row[0], row[6].parse().unwrap(), row[7].parse().unwrap()).unwrap();
    assert_eq!(rebuilt, c);
    assert_eq!(simulate_type1(&rebuilt, 2).unwrap(), original);
}

#[test]
fn scenario_ids_round_trip() {
    let spec = goldssr::design::DesignSpec::builder()
        .margins(0.25, 0.1, 0.05)
        .means(0.1, -0.05, 0.7)
        .sigma(1.3)
        .alpha(0.05)
        .target_power(0.9)
        .alloc("2:2:1".parse().unwrap())
        .critical(goldssr::design::Critical::StudentT)
        .grid(goldssr::design::SizeGrid::AnyTotal)
        .build()
        .unwrap();
    let mut p = ReestimationPolicy::new(Estimator::XingGanju, 50, &spec.alloc);
    p.block_size = 10;
    let configs = [
        ScenarioConfig::power(spec, Sizing::Fixed(400), 10, 1),
        ScenarioConfig::power(spec, Sizing::Reestimate(p), 10, 1).with_truth([0.0, 0.1, 0.2]),
        ScenarioConfig::type1(spec, Sizing::Reestimate(p.with_zeta(0.8)), Null::RP, 10, 1),
    ];
    for c in configs {
        assert_eq!(ScenarioConfig::from_id(&c.id, 10, 1).unwrap(), c);
    }
}

#[test]
fn malformed_ids_are_rejected() {
    let good = reest(Estimator::OneSample, 30, 0.6, "1:1:1", 10).id;
    assert!(ScenarioConfig::from_id(&good, 10, 1).is_ok());
    for bad in [
        good.replace("power", "nope"),
        format!("{good};extra=1"),
        good.replace("muP=0.6", "muP=abc"),
        good.replace(";alloc=1:1:1", ""),
        format!("{good};muE=0"),
    ] {
        assert!(ScenarioConfig::from_id(&bad, 10, 1).is_err(), "{bad}");
    }
}

#[test]
fn streams_differ_by_seed_id_and_index() {
    use rand::RngCore;
    let draw = |seed, id: &str, i| replication_rng(seed, id, i).next_u64();
    assert_eq!(draw(1, "a", 0), draw(1, "a", 0));
    assert_ne!(draw(1, "a", 0), draw(2, "a", 0));
    assert_ne!(draw(1, "a", 0), draw(1, "b", 0));
    assert_ne!(draw(1, "a", 0), draw(1, "a", 1));
}

#[test]
fn quantiles_interpolate_between_order_statistics() {
    let xs = [1.0, 2.0, 4.0, 8.0];
    assert_eq!(quantile_type7(&xs, 0.0), 1.0);
    assert_eq!(quantile_type7(&xs, 1.0), 8.0);
    assert_eq!(quantile_type7(&xs, 0.5), 3.0);
    assert_eq!(quantile_type7(&xs, 0.25), 1.75);
}
