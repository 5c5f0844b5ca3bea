//! Statistical properties of the estimators and the detector on synthetic
//! streams with known second-order structure.

use covshift::statistic::{profile_curve, statistic_batch};
use covshift::{estimate_dep_order, estimate_trace_cross, fit_training, TrainingConfig, WeightPlan};
use covshift_sim::montecarlo::{cell_loading, replicate_rng, run_replicate};
use covshift_sim::{
    cholesky, gen_stream, monte_carlo_edd, stationarity_rejection_rate, Base, ChangeModel, DepOrderChoice, Factor,
    GeneratorSpec, McConfig, McResult, PostChange, Population, StreamGenerator, SummaryRecipe,
};

fn mean_se(v: &[f64]) -> (f64, f64) {
    let r = McResult::from_values(v.to_vec(), false);
    (r.mean, r.std_error)
}

#[test]
fn population_sd_matches_spread_of_windowed_statistic() {
    let spec = GeneratorSpec::null(200, 0, Base::Toeplitz { r: 0.6 });
    let plan = WeightPlan::<f64>::new(100, 0).unwrap();
    let zero = vec![0.0; 200];
    let stats: Vec<f64> = (0..500)
        .map(|s| statistic_batch(&gen_stream(&spec, 100, 1000 + s).unwrap(), &zero, &plan).unwrap())
        .collect();
    let (mean, se) = mean_se(&stats);
    let sd = se * (stats.len() as f64).sqrt();
    let ratio = sd / Population::of(&spec).null_sd(100).unwrap();
    assert!((0.8..=1.2).contains(&ratio), "empirical / population sd = {ratio}");
    // the null mean is zero
    assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
}

#[test]
fn null_mean_of_statistic_is_zero() {
    let spec = GeneratorSpec::null(30, 0, Base::Identity);
    let plan = WeightPlan::<f64>::new(40, 0).unwrap();
    let stats: Vec<f64> = (0..2000)
        .map(|s| {
            let x = gen_stream(&spec, 40, s).unwrap();
            statistic_batch(&x, &x.mean(), &plan).unwrap()
        })
        .collect();
    let (mean, se) = mean_se(&stats);
    assert!(mean.abs() < 4.0 * se, "mean {mean} se {se}");
}

#[test]
fn straddling_window_has_larger_statistic_than_null_window() {
    let p = 30;
    let plan = WeightPlan::<f64>::new(40, 0).unwrap();
    let null = GeneratorSpec::null(p, 0, Base::Identity);
    let changed = GeneratorSpec {
        post_change: Some(PostChange { model: ChangeModel::Bandable, rho: 0.6, change_at: 20 }),
        ..null
    };
    let zero = vec![0.0; p];
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for s in 0..1000 {
        a.push(statistic_batch(&gen_stream(&null, 40, s).unwrap(), &zero, &plan).unwrap());
        b.push(statistic_batch(&gen_stream(&changed, 40, s).unwrap(), &zero, &plan).unwrap());
    }
    let ((ma, sa), (mb, sb)) = (mean_se(&a), mean_se(&b));
    assert!(mb - ma > 4.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
}

#[test]
fn expected_profile_peaks_at_change() {
    let p = 30;
    let n = 40;
    let tau = 22;
    let spec = GeneratorSpec {
        post_change: Some(PostChange { model: ChangeModel::Bandable, rho: 0.7, change_at: tau }),
        ..GeneratorSpec::null(p, 0, Base::Identity)
    };
    let zero = vec![0.0; p];
    let mut avg = vec![0.0; n];
    let reps = 1000;
    for s in 0..reps {
        for (t, v) in profile_curve(&gen_stream(&spec, n, s).unwrap(), &zero, 0).unwrap() {
            avg[t] += v / reps as f64;
        }
    }
    let best = (2..=n - 2).max_by(|&i, &j| avg[i].total_cmp(&avg[j])).unwrap();
    assert!(best.abs_diff(tau) <= 1, "peak at {best}, change at {tau}");
}

#[test]
fn null_profile_fluctuates_around_zero() {
    let p = 20;
    let n = 30;
    let spec = GeneratorSpec::null(p, 0, Base::Identity);
    let reps = 1000;
    let curves: Vec<Vec<(usize, f64)>> = (0..reps)
        .map(|s| {
            let x = gen_stream(&spec, n, s).unwrap();
            profile_curve(&x, &vec![0.0; p], 0).unwrap()
        })
        .collect();
    for k in [0, 10, curves[0].len() - 1] {
        let vals: Vec<f64> = curves.iter().map(|c| c[k].1).collect();
        let (m, se) = mean_se(&vals);
        assert!(m.abs() < 4.0 * se, "t={} mean {m} se {se}", curves[0][k].0);
    }
}

#[test]
fn trace_estimates_are_unbiased() {
    let p = 50;
    let spec = GeneratorSpec::null(p, 0, Base::Identity);
    let zero = vec![0.0; p];
    let (mut t00, mut t1m1) = (Vec::new(), Vec::new());
    for s in 0..500 {
        let x = gen_stream(&spec, 200, s).unwrap();
        t00.push(estimate_trace_cross(&x, &zero, 0, 0, 0).unwrap());
        t1m1.push(estimate_trace_cross(&x, &zero, 1, -1, 1).unwrap());
    }
    let (m, se) = mean_se(&t00);
    assert!((m - p as f64).abs() < 3.0 * se, "tr(C0^2) {m} vs {p} (se {se})");
    let (m, se) = mean_se(&t1m1);
    assert!(m.abs() < 3.0 * se, "tr(C1 C-1) {m} (se {se})");
}

#[test]
fn lagged_trace_estimates_match_population() {
    let p = 20;
    let spec = GeneratorSpec::null(p, 1, Base::Toeplitz { r: 0.5 });
    let pop = Population::of(&spec);
    let zero = vec![0.0; p];
    for (h1, h2) in [(0, 0), (1, -1), (1, 1), (0, 1)] {
        let v: Vec<f64> = (0..500)
            .map(|s| estimate_trace_cross(&gen_stream(&spec, 200, s).unwrap(), &zero, h1, h2, 1).unwrap())
            .collect();
        let (m, se) = mean_se(&v);
        let want = pop.trace_cross(h1, h2);
        assert!((m - want).abs() < 3.0 * se, "({h1},{h2}) {m} vs {want} (se {se})");
    }
}

#[test]
fn fitted_sd_tracks_population_sd_with_dependence() {
    let spec = GeneratorSpec::null(200, 1, Base::Toeplitz { r: 0.6 });
    let want = Population::of(&spec).null_sd(100).unwrap();
    let cfg = TrainingConfig { m_override: Some(1), ..TrainingConfig::new(100) };
    let sds: Vec<f64> = (0..100)
        .map(|s| fit_training(&gen_stream(&spec, 400, s).unwrap(), &cfg).unwrap().null_sd)
        .collect();
    let (m, _) = mean_se(&sds);
    assert!((m / want - 1.0).abs() < 0.10, "mean fitted sd {m} vs population {want}");
}

#[test]
fn iid_training_selects_order_zero() {
    let spec = GeneratorSpec::null(200, 0, Base::Identity);
    let cfg = TrainingConfig::new(100);
    let hits = (0..100)
        .filter(|&s| fit_training(&gen_stream(&spec, 200, s).unwrap(), &cfg).unwrap().m_hat == 0)
        .count();
    assert!(hits >= 95, "{hits}/100");
}

#[test]
fn order_selection_is_scale_invariant() {
    let spec = GeneratorSpec::null(40, 1, Base::Toeplitz { r: 0.6 });
    let x = gen_stream(&spec, 200, 9).unwrap();
    let gram = covshift::TrainingGram::new(&x, &x.mean()).unwrap();
    let scaled = x.scaled(7.5);
    let gram_s = covshift::TrainingGram::new(&scaled, &scaled.mean()).unwrap();
    for h in 0..4 {
        let (a, b) = (gram.lag_ratio(h).unwrap(), gram_s.lag_ratio(h).unwrap());
        assert!((a - b).abs() < 1e-10, "lag {h}: {a} vs {b}");
    }
    assert_eq!(
        estimate_dep_order(&x, &x.mean(), 0.05, 10).unwrap(),
        estimate_dep_order(&scaled, &scaled.mean(), 0.05, 10).unwrap()
    );
}

#[test]
fn loose_cutoff_always_selects_zero() {
    let spec = GeneratorSpec::null(100, 2, Base::Toeplitz { r: 0.6 });
    let s = covshift_sim::m_selection_study(&spec, 100, 0.9, 10, 30, 4).unwrap();
    assert!(s.correct(0) >= 29, "{:?}", s.counts);
}

#[test]
fn stationarity_test_detects_change_inside_training() {
    let spec = GeneratorSpec {
        post_change: Some(PostChange { model: ChangeModel::Bandable, rho: 0.8, change_at: 100 }),
        ..GeneratorSpec::null(200, 0, Base::Identity)
    };
    let recipe = SummaryRecipe::new(200);
    let rate = stationarity_rejection_rate(&spec, &recipe, 200, 12).unwrap();
    assert!(rate >= 0.9, "power {rate}");
}

#[test]
fn estimated_order_reproduces_true_order_runs() {
    for m in [0, 1] {
        let base = McConfig {
            spec: GeneratorSpec::null(50, m, Base::Toeplitz { r: 0.6 }),
            recipe: SummaryRecipe::new(120),
            threshold: 2.6,
            window: 30,
            max_steps: 300,
            seed: 40 + m as u64,
        };
        let estimated = McConfig {
            recipe: SummaryRecipe {
                dep_order: DepOrderChoice::Estimated { epsilon: 0.05, max_lag: 10 },
                ..base.recipe
            },
            ..base
        };
        let mut agree = 0;
        for i in 0..200 {
            let t = run_replicate(&base, None, i, false).unwrap();
            let e = run_replicate(&estimated, None, i, false).unwrap();
            if e.m_hat == m {
                agree += 1;
                assert_eq!(t.stopping_time, e.stopping_time, "replicate {i}");
            }
        }
        assert!(agree >= 180, "M={m}: {agree}/200");
    }
}

fn immediate_change(change_at: usize, seed: u64) -> McConfig {
    McConfig {
        spec: GeneratorSpec {
            post_change: Some(PostChange { model: ChangeModel::Bandable, rho: 0.8, change_at }),
            ..GeneratorSpec::null(200, 0, Base::Identity)
        },
        recipe: SummaryRecipe::new(200),
        threshold: 3.58,
        window: 100,
        max_steps: 1000,
        seed,
    }
}

#[test]
fn immediate_change_is_the_slowest_to_detect() {
    let now = monte_carlo_edd(&immediate_change(200, 5), 200, false).unwrap().delays;
    let later = monte_carlo_edd(&immediate_change(250, 5), 200, false).unwrap().delays;
    let se = (now.std_error.powi(2) + later.std_error.powi(2)).sqrt();
    assert!(now.mean >= later.mean - 2.0 * se, "tau=n0: {} tau=n0+50: {}", now.mean, later.mean);
}

#[test]
fn delay_does_not_depend_on_choice_of_square_root() {
    let cfg = immediate_change(200, 6);
    let p = cfg.spec.p;
    // L J with J the reversal permutation is another square root of the same matrix
    let l = cholesky(&Factor::Ar1Cholesky { rho: 0.8 }.covariance(p), p).unwrap();
    let mut m = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..p {
            m[i * p + j] = l[i * p + (p - 1 - j)];
        }
    }
    let other = Factor::Dense { p, m };
    let run = |q: &Factor, seed: u64| -> Vec<f64> {
        let c = McConfig { seed, ..cfg };
        (0..200)
            .map(|i| run_replicate(&c, Some(q), i, false).unwrap().stopping_time.unwrap() as f64)
            .collect()
    };
    let (ma, sa) = mean_se(&run(&Factor::Ar1Cholesky { rho: 0.8 }, 70));
    let (mb, sb) = mean_se(&run(&other, 71));
    assert!((ma - mb).abs() < 3.0 * (sa * sa + sb * sb).sqrt(), "{ma} vs {mb}");
}

#[test]
fn delay_decreases_with_change_size() {
    let at = |rho: f64| McConfig {
        spec: GeneratorSpec {
            post_change: Some(PostChange { model: ChangeModel::Strong, rho, change_at: 200 }),
            ..GeneratorSpec::null(100, 0, Base::Identity)
        },
        ..immediate_change(200, 8)
    };
    let low = monte_carlo_edd(&at(0.2), 100, false).unwrap().delays.mean;
    let high = monte_carlo_edd(&at(0.4), 100, false).unwrap().delays.mean;
    assert!(high < low, "{high} vs {low}");
}

#[test]
fn generator_streams_are_continuous_across_training() {
    let spec = GeneratorSpec::null(10, 2, Base::Toeplitz { r: 0.6 });
    let mut g = StreamGenerator::new(&spec, None, replicate_rng(3, 0)).unwrap();
    let first = g.take(50);
    let next = g.take(5);
    let mut h = StreamGenerator::new(&spec, None, replicate_rng(3, 0)).unwrap();
    let all = h.take(55);
    assert_eq!(&all.as_flat()[..500], first.as_flat());
    assert_eq!(&all.as_flat()[500..], next.as_flat());
    assert!(cell_loading(&spec, 3).unwrap().is_none());
}

#[test]
#[ignore = "reference sparse-model delays are not reproducible from the three-of-p column construction"]
fn sparse_model_delay_near_reference_cell() {
    let cfg = McConfig {
        spec: GeneratorSpec {
            post_change: Some(PostChange { model: ChangeModel::Sparse, rho: 0.8, change_at: 200 }),
            ..GeneratorSpec::null(1000, 2, Base::Identity)
        },
        recipe: SummaryRecipe::new(200),
        threshold: 3.46,
        window: 150,
        max_steps: 1500,
        seed: 9,
    };
    let d = monte_carlo_edd(&cfg, 200, false).unwrap().delays;
    assert!((d.mean - 5.32).abs() <= 0.3 * 5.32 && d.mean <= 8.45, "mean delay {}", d.mean);
}
