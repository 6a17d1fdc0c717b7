use goldssr::design::{power_at_total, required_sample_size, AllocationRatio, DesignSpec, SizeCurve};
use goldssr::estimators::{density_xg, Estimator, EstimatorDensity, VarianceEstimate, VARIANCE_FLOOR};
use goldssr::presets::{power_design, MU_P};
use goldssr::reestimate::*;
use goldssr::Error;

fn base() -> DesignSpec {
    power_design(0.6, AllocationRatio::balanced())
}

fn xg(n1: u64, spec: &DesignSpec) -> ReestimationPolicy {
    ReestimationPolicy::new(Estimator::XingGanju, n1, &spec.alloc)
}

#[test]
fn reestimated_size_examples() {
    let spec = base();
    let est = |v| VarianceEstimate::given(v, Estimator::XingGanju);
    assert_eq!(reestimate_sample_size(&spec, &est(1.0)).unwrap(), 525);
    assert_eq!(reestimate_sample_size(&spec, &est(VARIANCE_FLOOR)).unwrap(), 6);
    let direct = required_sample_size(&spec.with_sigma(0.5)).unwrap().total;
    let n = reestimate_sample_size(&spec, &est(0.25)).unwrap();
    assert!(n.abs_diff(direct) <= 2, "{n} vs {direct}");
}

#[test]
fn reestimated_size_is_monotone_in_the_estimate() {
    let spec = power_design(0.9, "3:2:1".parse().unwrap());
    let mut prev = 0;
    for i in 1..200 {
        let n = reestimate_sample_size(&spec, &VarianceEstimate::given(i as f64 * 0.02, Estimator::OneSample)).unwrap();
        assert!(n >= prev);
        prev = n;
    }
}

#[test]
fn final_size_examples() {
    let spec = base();
    let p = ReestimationPolicy::new(Estimator::OneSample, 90, &spec.alloc);
    assert_eq!(final_sample_size(&p, 525), 525);
    assert_eq!(final_sample_size(&p, 60), 90);
    assert_eq!(final_sample_size(&p.with_zeta(1.06), 500), 530);
    assert_eq!(final_sample_size(&p.with_zeta(1.06), 501), 532);
    for n in [0, 1, 89, 90, 91, 1000] {
        for z in [0.3, 1.0, 1.7] {
            let f = final_sample_size(&p.with_zeta(z), n);
            assert!(f >= 90);
            if z == 1.0 && n >= 90 {
                assert_eq!(f, n);
            }
        }
    }
}

#[test]
fn planned_size_floor_disables_downsizing() {
    let spec = base();
    let mut p = ReestimationPolicy::new(Estimator::OneSample, 90, &spec.alloc);
    p.allow_downsizing = false;
    p.planned_total = 525;
    assert_eq!(final_sample_size(&p, 300), 525);
    assert_eq!(final_sample_size(&p, 700), 700);
}

#[test]
fn policy_validation() {
    let spec = base();
    assert!(xg(30, &spec).validate(&spec.alloc).is_ok());
    assert!(xg(31, &spec).validate(&spec.alloc).is_err());
    assert!(xg(3, &spec).validate(&spec.alloc).is_err());
    assert!(xg(30, &spec).with_zeta(0.0).validate(&spec.alloc).is_err());
    let unbalanced: AllocationRatio = "3:2:1".parse().unwrap();
    assert!(ReestimationPolicy::new(Estimator::XingGanju, 30, &unbalanced)
        .validate(&unbalanced)
        .is_ok());
    assert!(ReestimationPolicy::new(Estimator::XingGanju, 33, &unbalanced)
        .validate(&unbalanced)
        .is_err());
}

#[test]
fn expected_power_pinned_at_pilot_size() {
    let spec = base();
    let p = xg(900, &spec);
    let d = sampling_density(&spec, &p).unwrap();
    let e = expected_power(&spec, &p, &d).unwrap();
    assert!((e - power_at_total(&spec, 900.0).unwrap()).abs() < 1e-4);
}

#[test]
fn expected_power_underpowered_at_small_pilot() {
    let spec = base();
    let p = xg(30, &spec);
    let d = density_xg(1.0, 30, 3).unwrap();
    assert!(expected_power(&spec, &p, &d).unwrap() < 0.80);
}

#[test]
fn expected_power_with_narrow_density_approaches_fixed_design() {
    let spec = base();
    let p = xg(30, &spec);
    let df = 1e7;
    let narrow = EstimatorDensity::new(1.0 / df, df, 0.0).unwrap();
    let e = expected_power(&spec, &p, &narrow).unwrap();
    let fixed = power_at_total(&spec, 525.0).unwrap();
    assert!(fixed >= 0.8);
    assert!((e - fixed).abs() < 0.005, "{e} vs {fixed}");
}

// Expected power as a finite sum over the jumps of the size curve, with
// probabilities from the density's CDF: a quadrature-free oracle.
fn step_sum(spec: &DesignSpec, policy: &ReestimationPolicy, density: &EstimatorDensity) -> f64 {
    let curve = SizeCurve::new(spec).unwrap();
    let (lo, hi) = (density.quantile(1e-12).unwrap(), density.quantile(1.0 - 1e-12).unwrap());
    let mut edges = vec![lo];
    edges.extend(curve.jump_points(lo, hi).unwrap());
    edges.push(hi);
    edges
        .windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            let n = final_sample_size(policy, curve.size_at(mid).unwrap());
            (density.cdf(w[1]) - density.cdf(w[0])) * power_at_total(spec, n as f64).unwrap()
        })
        .sum()
}

#[test]
fn expected_power_matches_step_sum() {
    for mu in MU_P {
        for alloc in ["1:1:1", "3:2:1"] {
            let spec = power_design(mu, alloc.parse().unwrap());
            for (n1, zeta) in [(30, 1.0), (60, 1.2), (120, 0.9)] {
                let p = xg(n1, &spec).with_zeta(zeta);
                let d = sampling_density(&spec, &p).unwrap();
                let e = expected_power(&spec, &p, &d).unwrap();
                let oracle = step_sum(&spec, &p, &d);
                assert!((e - oracle).abs() < 1e-6, "{mu} {alloc} {n1}: {e} vs {oracle}");
            }
            let p = ReestimationPolicy::new(Estimator::OneSample, 60, &spec.alloc);
            let d = sampling_density(&spec, &p).unwrap();
            assert!((expected_power(&spec, &p, &d).unwrap() - step_sum(&spec, &p, &d)).abs() < 1e-6);
        }
    }
}

#[test]
fn expected_power_is_monotone_in_zeta() {
    let spec = base();
    let p = xg(60, &spec);
    let d = sampling_density(&spec, &p).unwrap();
    let mut prev = 0.0;
    for i in 0..40 {
        let e = expected_power(&spec, &p.with_zeta(0.6 + 0.03 * i as f64), &d).unwrap();
        assert!(e >= prev - 1e-9);
        prev = e;
    }
}

#[test]
fn no_density_for_unblinded_or_adjusted_methods() {
    let spec = base();
    for m in [Estimator::Pooled, Estimator::AdjustedOneSample] {
        let p = ReestimationPolicy::new(m, 30, &spec.alloc);
        assert!(sampling_density(&spec, &p).is_err());
    }
}

#[test]
fn inflation_factor_is_self_consistent() {
    let spec = base();
    let p = xg(30, &spec);
    let zeta = inflation_factor(&spec, &p).unwrap();
    let d = sampling_density(&spec, &p).unwrap();
    let e = expected_power(&spec, &p.with_zeta(zeta), &d).unwrap();
    assert!((e - 0.8).abs() < 1e-5, "ζ*={zeta}, power {e}");
    assert!(zeta > 1.0);
}

#[test]
fn inflation_factor_is_flat_in_sigma_for_small_pilots() {
    let spec = base();
    for n1 in [30, 60] {
        let scan = zeta_scan(&spec, &xg(n1, &spec), &[0.8, 1.0, 1.2]);
        let z: Vec<f64> = scan.into_iter().map(|(_, r)| r.unwrap()).collect();
        let spread = z.iter().cloned().fold(f64::MIN, f64::max) - z.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread / z[1] < 0.01, "n1={n1}: {z:?}");
    }
}

#[test]
fn inflation_factor_tends_to_one_with_the_pilot() {
    let spec = base();
    let z: Vec<f64> = [150, 270, 390]
        .iter()
        .map(|&n1| inflation_factor(&spec, &xg(n1, &spec)).unwrap())
        .collect();
    assert!(z[0] >= z[1] && z[1] >= z[2], "{z:?}");
    assert!((z[2] - 1.0).abs() < 0.02, "{z:?}");
}

#[test]
fn inflation_needed_for_every_small_pilot() {
    for mu in MU_P {
        for alloc in ["1:1:1", "3:2:1"] {
            let spec = power_design(mu, alloc.parse().unwrap());
            for n1 in [30, 60, 90, 120, 150] {
                let z = inflation_factor(&spec, &xg(n1, &spec)).unwrap();
                assert!(z >= 1.0, "{mu} {alloc} {n1}: {z}");
            }
        }
    }
}

#[test]
fn inflation_factor_undefined_past_fixed_design() {
    let spec = base();
    match inflation_factor(&spec, &xg(525, &spec)) {
        Err(Error::FactorUndefined { n1, n_fixed }) => assert_eq!((n1, n_fixed), (525, 525)),
        other => panic!("unexpected {other:?}"),
    }
    let os = ReestimationPolicy::new(Estimator::OneSample, 30, &spec.alloc);
    assert!(inflation_factor(&spec, &os).is_err());
}
