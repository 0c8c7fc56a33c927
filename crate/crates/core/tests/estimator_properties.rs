use bayes_kalman::estimator::{bayes_kalman, estimate_series, forward_pass, SeriesMode};
use bayes_kalman::gaussian::{convolve_affine, AffineNoise};
use bayes_kalman::model::{ModelSpec, ObservationSeries, RandomModel, StepParams};
use bayes_kalman::oracle::{moments, GridChain, GridConfig};
use proptest::prelude::*;

fn observed_model(seed: u64) -> (ModelSpec<f64>, ObservationSeries<f64>) {
    let (spec, traj) = RandomModel::default().sample(seed);
    (spec, traj.observations)
}

/// Flips the sign of some gains so negative `a` and `c` are covered too.
fn with_signs(mut spec: ModelSpec<f64>, mask: u64) -> ModelSpec<f64> {
    if mask & 1 == 1 {
        spec.channel0.c = -spec.channel0.c;
    }
    for (k, step) in spec.steps.iter_mut().enumerate() {
        if mask >> (2 * k + 1) & 1 == 1 {
            step.transition.a = -step.transition.a;
        }
        if mask >> (2 * k + 2) & 1 == 1 {
            step.channel.c = -step.channel.c;
        }
    }
    spec
}

#[test]
fn matches_oracle_with_gaps_and_negative_gains() {
    let cfg = RandomModel {
        unobserved: 0.3,
        ..RandomModel::default()
    };
    for seed in 0..12 {
        let (spec, _) = cfg.sample(seed);
        let spec = with_signs(spec, seed.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let obs = bayes_kalman::model::sample_trajectory(&spec, seed)
            .unwrap()
            .observations;
        let chain = GridChain::build(&spec, &obs, &GridConfig::default()).unwrap();
        for s in 0..=spec.horizon {
            let g = bayes_kalman(&spec, &obs, s).unwrap();
            let (m, v) = moments(&chain.posterior(s).unwrap());
            assert!(
                (m - g.mean).abs() < 1e-6,
                "seed {seed} s {s}: mean {m} vs {}",
                g.mean
            );
            assert!(
                (v - g.variance).abs() < 1e-6,
                "seed {seed} s {s}: var {v} vs {}",
                g.variance
            );
        }
    }
}

#[test]
fn smoothing_never_increases_variance() {
    for seed in 0..200 {
        let (spec, obs) = observed_model(seed);
        let filt = estimate_series(&spec, &obs, SeriesMode::AllFilter).unwrap();
        let smooth = estimate_series(&spec, &obs, SeriesMode::AllSmooth).unwrap();
        for (f, s) in filt.rows.iter().zip(&smooth.rows) {
            assert!(
                s.variance <= f.variance * (1.0 + 1e-12),
                "seed {seed} t {}",
                f.t
            );
        }
    }
}

#[test]
fn smoothed_mean_depends_on_every_informative_observation() {
    for seed in 0..40 {
        let (spec, obs) = observed_model(seed);
        if spec.horizon == 0 {
            continue;
        }
        for s in 0..=spec.horizon {
            let base = bayes_kalman(&spec, &obs, s).unwrap().mean;
            for t in (0..=spec.horizon).filter(|&t| t != s) {
                let mut moved = obs.clone();
                moved.values[t].1 += 1.0;
                let shifted = bayes_kalman(&spec, &moved, s).unwrap().mean;
                assert!((shifted - base).abs() > 1e-12, "seed {seed} s {s} t {t}");

                let mut blind = spec.clone();
                if t == 0 {
                    blind.channel0.c = 0.0;
                } else {
                    blind.steps[t - 1].channel.c = 0.0;
                }
                assert_eq!(
                    bayes_kalman(&blind, &obs, s).unwrap(),
                    bayes_kalman(&blind, &moved, s).unwrap()
                );
            }
        }
    }
}

/// Duplicates time `k` through a near-identity unobserved step.
fn insert_idle_step(
    spec: &ModelSpec<f64>,
    obs: &ObservationSeries<f64>,
    k: usize,
) -> (ModelSpec<f64>, ObservationSeries<f64>) {
    let mut out = spec.clone();
    let idle = StepParams {
        transition: AffineNoise {
            a: 1.0,
            b: 0.0,
            r: 1e-9,
        },
        channel: spec.channel(k),
        observed: false,
    };
    out.steps.insert(k, idle);
    out.horizon += 1;
    let values = obs
        .values
        .iter()
        .map(|&(t, x)| (if t > k { t + 1 } else { t }, x))
        .collect();
    (out, ObservationSeries::new(values))
}

#[test]
fn idle_step_is_invisible() {
    for seed in 0..60 {
        let (spec, obs) = observed_model(seed);
        let k = (seed as usize) % (spec.horizon + 1);
        let (longer, shifted) = insert_idle_step(&spec, &obs, k);
        for t in 0..=spec.horizon {
            let t2 = if t > k { t + 1 } else { t };
            let a = bayes_kalman(&spec, &obs, t).unwrap();
            let b = bayes_kalman(&longer, &shifted, t2).unwrap();
            assert!((a.mean - b.mean).abs() < 1e-6, "seed {seed} k {k} t {t}");
            assert!(
                (a.variance - b.variance).abs() < 1e-6,
                "seed {seed} k {k} t {t}"
            );
        }
    }
}

#[test]
fn placeholder_for_unobserved_step_is_irrelevant() {
    for seed in 0..30 {
        let (mut spec, obs) = observed_model(seed);
        let m = spec.horizon / 2;
        spec.set_observed(m, false);
        let dropped = ObservationSeries::new(
            obs.values
                .iter()
                .copied()
                .filter(|&(t, _)| t != m)
                .collect(),
        );
        // the same model with step m observed through an uninformative channel
        let mut blind = spec.clone();
        blind.set_observed(m, true);
        if m == 0 {
            blind.channel0.c = 0.0;
        } else {
            blind.steps[m - 1].channel.c = 0.0;
        }
        let mut placeholder = obs.clone();
        placeholder.values[m].1 = 1234.5;
        for s in 0..=spec.horizon {
            assert_eq!(
                bayes_kalman(&spec, &dropped, s).unwrap(),
                bayes_kalman(&blind, &placeholder, s).unwrap()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn smoother_at_horizon_is_filter(seed in any::<u64>()) {
        let (spec, obs) = observed_model(seed);
        let n = spec.horizon;
        let smooth = bayes_kalman(&spec, &obs, n).unwrap();
        let filt = forward_pass(&spec, &obs).unwrap()[n].filtered();
        prop_assert!((smooth.mean - filt.mean).abs() < 1e-12);
        prop_assert!((smooth.variance - filt.variance).abs() < 1e-12);
    }

    #[test]
    fn prediction_is_forward_propagation(seed in any::<u64>(), cut in 0usize..6) {
        let (mut spec, obs) = observed_model(seed);
        let n0 = cut.min(spec.horizon);
        for t in n0 + 1..=spec.horizon {
            spec.set_observed(t, false);
        }
        let obs = ObservationSeries::new(obs.values.into_iter().filter(|&(t, _)| t <= n0).collect());
        let mut g = forward_pass(&spec, &obs).unwrap()[n0].filtered();
        for t in n0 + 1..=spec.horizon {
            g = convolve_affine(g, spec.transition(t)).unwrap();
        }
        let pred = bayes_kalman(&spec, &obs, spec.horizon).unwrap();
        prop_assert!((pred.mean - g.mean).abs() < 1e-12);
        prop_assert!((pred.variance - g.variance).abs() < 1e-12);
    }
}
