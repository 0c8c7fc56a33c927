//! Smoothing, filtering and prediction by forward/backward message passing.
//!
//! The posterior of `ω_s` given the whole record factors as
//!
//! ```text
//! p(ω_s | x_0..x_n) ∝ ρ_s(ω_s) · f̃_s(ω_s)
//! ```
//!
//! where `ρ_s` is the forward prediction of `ω_s` from `x_0..x_{s-1}` (a
//! normalized [`MomentGaussian`]) and `f̃_s` is the likelihood of
//! `x_s..x_n` as a function of `ω_s` (a [`RootMessage`]). The observation at
//! `s` itself enters through the backward message, never through `ρ_s`.

use thiserror::Error;

use crate::gaussian::{
    combine_moment_root, convolve_affine, posterior_product, root_absorb_observation,
    root_back_propagate, root_from_observation, KernelError, MomentGaussian, RootMessage,
};
use crate::model::{validate, ModelError, ModelSpec, ObservationSeries};
use crate::Scalar;

#[derive(Debug, Error)]
pub enum EstimateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("query index s={s} outside 0..={horizon}")]
    OutOfRange { s: usize, horizon: usize },
}

/// Forward-pass state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardState<T> {
    pub t: usize,
    /// `ρ_t`: prediction of `ω_t` from `x_0..x_{t-1}`.
    pub predicted: MomentGaussian<T>,
    /// `ρ̃_t`: `ρ_t` conditioned on `x_t`; absent when step `t` is unobserved.
    pub updated: Option<MomentGaussian<T>>,
}

impl<T: Scalar> ForwardState<T> {
    /// Posterior of `ω_t` given `x_0..x_t`.
    pub fn filtered(&self) -> MomentGaussian<T> {
        self.updated.unwrap_or(self.predicted)
    }
}

/// Backward-pass state at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardState<T> {
    pub t: usize,
    /// Likelihood of `x_{t+1}..x_n` as a function of `ω_t`.
    pub incoming: RootMessage<T>,
    /// Likelihood of `x_t..x_n`; equals `incoming` when step `t` is unobserved.
    pub absorbed: RootMessage<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModeTag {
    Smoothing,
    Filter,
    Prediction,
}

impl ModeTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModeTag::Smoothing => "smoothing",
            ModeTag::Filter => "filter",
            ModeTag::Prediction => "prediction",
        }
    }
}

impl std::fmt::Display for ModeTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QueryMode {
    pub tag: ModeTag,
    pub s: usize,
}

struct Prepared<'a, T> {
    spec: &'a ModelSpec<T>,
    xs: Vec<Option<T>>,
}

fn prepare<'a, T: Scalar>(
    spec: &'a ModelSpec<T>,
    obs: &ObservationSeries<T>,
) -> Result<Prepared<'a, T>, EstimateError> {
    validate(spec).map_err(ModelError::Invalid)?;
    let xs = obs.aligned(spec)?;
    Ok(Prepared { spec, xs })
}

fn check_index(s: usize, horizon: usize) -> Result<(), EstimateError> {
    if s > horizon {
        Err(EstimateError::OutOfRange { s, horizon })
    } else {
        Ok(())
    }
}

impl<T: Scalar> Prepared<'_, T> {
    /// Forward states for `t = 0..=upto`.
    fn forward(&self, upto: usize) -> Result<Vec<ForwardState<T>>, EstimateError> {
        let mut out: Vec<ForwardState<T>> = Vec::with_capacity(upto + 1);
        for t in 0..=upto {
            let predicted = match out.last() {
                None => self.spec.prior,
                Some(prev) => convolve_affine(prev.filtered(), self.spec.transition(t))?,
            };
            let updated = self.xs[t]
                .map(|x| posterior_product(predicted, self.spec.channel(t), x))
                .transpose()?;
            out.push(ForwardState {
                t,
                predicted,
                updated,
            });
        }
        Ok(out)
    }

    fn absorb(&self, t: usize, m: RootMessage<T>) -> Result<RootMessage<T>, KernelError> {
        match self.xs[t] {
            Some(x) => root_absorb_observation(m, self.spec.channel(t), x),
            None => Ok(m),
        }
    }

    /// Backward states for `t = from..=n`, indexed by `t - from`.
    fn backward(&self, from: usize) -> Result<Vec<BackwardState<T>>, EstimateError> {
        let n = self.spec.horizon;
        let mut rev = Vec::with_capacity(n + 1 - from);
        let last = match self.xs[n] {
            Some(x) => root_from_observation(self.spec.channel(n), x)?,
            None => RootMessage::constant(),
        };
        rev.push(BackwardState {
            t: n,
            incoming: RootMessage::constant(),
            absorbed: last,
        });
        for t in (from..n).rev() {
            let next = rev.last().expect("nonempty").absorbed;
            let incoming = root_back_propagate(next, self.spec.transition(t + 1))?;
            rev.push(BackwardState {
                t,
                incoming,
                absorbed: self.absorb(t, incoming)?,
            });
        }
        rev.reverse();
        Ok(rev)
    }
}

/// Forward states for every `t = 0..=n`.
pub fn forward_pass<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
) -> Result<Vec<ForwardState<T>>, EstimateError> {
    let p = prepare(spec, obs)?;
    p.forward(spec.horizon)
}

/// Backward states for every `t = 0..=n`.
pub fn backward_pass<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
) -> Result<Vec<BackwardState<T>>, EstimateError> {
    let p = prepare(spec, obs)?;
    p.backward(0)
}

/// `ρ_s`: the prediction of `ω_s` from `x_0..x_{s-1}`.
pub fn run_forward<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
    s: usize,
) -> Result<MomentGaussian<T>, EstimateError> {
    let p = prepare(spec, obs)?;
    check_index(s, spec.horizon)?;
    Ok(p.forward(s)?[s].predicted)
}

/// `f̃_s`: the likelihood of `x_s..x_n` as a function of `ω_s`.
pub fn run_backward<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
    s: usize,
) -> Result<RootMessage<T>, EstimateError> {
    let p = prepare(spec, obs)?;
    check_index(s, spec.horizon)?;
    Ok(p.backward(s)?[0].absorbed)
}

/// Posterior of `ω_s` given every observation in the record.
pub fn bayes_kalman<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
    s: usize,
) -> Result<MomentGaussian<T>, EstimateError> {
    let p = prepare(spec, obs)?;
    check_index(s, spec.horizon)?;
    let forward = p.forward(s)?[s].predicted;
    let backward = p.backward(s)?[0].absorbed;
    Ok(combine_moment_root(forward, backward)?)
}

/// Smoothing for `s < n`; at `s = n`, filter when every step is observed and
/// prediction otherwise.
pub fn classify_mode<T: Scalar>(spec: &ModelSpec<T>, s: usize) -> Result<QueryMode, EstimateError> {
    let n = spec.horizon;
    check_index(s, n)?;
    let tag = if s < n {
        ModeTag::Smoothing
    } else if spec.fully_observed() {
        ModeTag::Filter
    } else {
        ModeTag::Prediction
    };
    Ok(QueryMode { tag, s })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// Posterior of `ω_t` given `x_0..x_t`, for each `t`.
    AllFilter,
    /// Posterior of `ω_t` given the whole record, for each `t`.
    AllSmooth,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate<T> {
    pub t: usize,
    pub mean: T,
    pub variance: T,
    pub mode: ModeTag,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EstimateSeries<T> {
    pub rows: Vec<Estimate<T>>,
}

/// One forward pass and one backward sweep, `O(n)` for all `t`.
pub fn estimate_series<T: Scalar>(
    spec: &ModelSpec<T>,
    obs: &ObservationSeries<T>,
    mode: SeriesMode,
) -> Result<EstimateSeries<T>, EstimateError> {
    let p = prepare(spec, obs)?;
    let forward = p.forward(spec.horizon)?;
    let rows = match mode {
        SeriesMode::AllFilter => forward
            .iter()
            .map(|f| {
                let g = f.filtered();
                let mode = if f.updated.is_some() {
                    ModeTag::Filter
                } else {
                    ModeTag::Prediction
                };
                Estimate {
                    t: f.t,
                    mean: g.mean,
                    variance: g.variance,
                    mode,
                }
            })
            .collect(),
        SeriesMode::AllSmooth => {
            let backward = p.backward(0)?;
            forward
                .iter()
                .zip(&backward)
                .map(|(f, b)| {
                    let g = combine_moment_root(f.predicted, b.absorbed)?;
                    Ok(Estimate {
                        t: f.t,
                        mean: g.mean,
                        variance: g.variance,
                        mode: classify_mode(spec, f.t)?.tag,
                    })
                })
                .collect::<Result<_, EstimateError>>()?
        }
    };
    Ok(EstimateSeries { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{AffineNoise, ObsChannel};
    use approx::assert_abs_diff_eq;

    fn unit(n: usize) -> ModelSpec<f64> {
        ModelSpec::unit(n)
    }

    #[test]
    fn forward_examples() {
        let obs = ObservationSeries::dense(&[1.0]);
        let spec = unit(1);
        let obs1 = ObservationSeries::dense(&[1.0, 0.0]);
        let rho1 = run_forward(&spec, &obs1, 1).unwrap();
        assert_abs_diff_eq!(rho1.mean, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(rho1.variance, 1.5, epsilon = 1e-12);

        let spec2 = unit(2);
        let obs2 = ObservationSeries::dense(&[1.0, 1.0, 0.0]);
        let rho2 = run_forward(&spec2, &obs2, 2).unwrap();
        assert_abs_diff_eq!(rho2.mean, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(rho2.variance, 1.6, epsilon = 1e-12);

        assert_eq!(
            run_forward(&unit(0), &obs, 0).unwrap(),
            MomentGaussian {
                mean: 0.0,
                variance: 1.0
            }
        );
    }

    #[test]
    fn backward_examples() {
        let spec = unit(3);
        let obs = ObservationSeries::dense(&[0.3, -1.0, 0.0, 2.0]);
        let m = run_backward(&spec, &obs, 3).unwrap();
        assert_eq!((m.u(), m.v()), (1.0, 2.0));

        let m = run_backward(&spec, &obs, 2).unwrap();
        assert_abs_diff_eq!(m.u(), 1.5f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(m.v(), 1.0 / 1.5f64.sqrt(), epsilon = 1e-12);

        let mut hidden = unit(3);
        for t in 1..=3 {
            hidden.set_observed(t, false);
        }
        let obs = ObservationSeries::new(vec![(0, 0.3)]);
        for s in 1..=3 {
            assert_eq!(
                run_backward(&hidden, &obs, s).unwrap(),
                RootMessage::constant()
            );
        }
    }

    #[test]
    fn bayes_kalman_examples() {
        let g = bayes_kalman(&unit(0), &ObservationSeries::dense(&[1.0]), 0).unwrap();
        assert_abs_diff_eq!(g.mean, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(g.variance, 0.5, epsilon = 1e-12);

        let g = bayes_kalman(&unit(1), &ObservationSeries::dense(&[1.0, 1.0]), 1).unwrap();
        assert_abs_diff_eq!(g.mean, 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(g.variance, 0.6, epsilon = 1e-12);

        let mut spec = ModelSpec::constant(
            MomentGaussian {
                mean: 1.0,
                variance: 2.0,
            },
            AffineNoise {
                a: 0.7,
                b: 0.3,
                r: 0.5,
            },
            ObsChannel {
                c: 1.0,
                d: 0.0,
                q: 1.0,
            },
            4,
        );
        for t in 0..=4 {
            spec.set_observed(t, false);
        }
        let empty = ObservationSeries::default();
        let mut g = spec.prior;
        for s in 0..=4 {
            if s > 0 {
                g = convolve_affine(g, spec.transition(s)).unwrap();
            }
            assert_eq!(bayes_kalman(&spec, &empty, s).unwrap(), g);
        }
    }

    #[test]
    fn modes() {
        let mut spec = unit(5);
        assert_eq!(classify_mode(&spec, 2).unwrap().tag, ModeTag::Smoothing);
        assert_eq!(classify_mode(&spec, 5).unwrap().tag, ModeTag::Filter);
        for t in 3..=5 {
            spec.set_observed(t, false);
        }
        assert_eq!(classify_mode(&spec, 5).unwrap().tag, ModeTag::Prediction);
        assert_eq!(classify_mode(&spec, 2).unwrap().tag, ModeTag::Smoothing);
        assert!(matches!(
            classify_mode(&spec, 6),
            Err(EstimateError::OutOfRange { s: 6, horizon: 5 })
        ));
    }

    #[test]
    fn series_examples() {
        let spec = unit(1);
        let obs = ObservationSeries::dense(&[1.0, 1.0]);
        let filt = estimate_series(&spec, &obs, SeriesMode::AllFilter).unwrap();
        let got: Vec<_> = filt
            .rows
            .iter()
            .map(|r| (r.t, r.mean, r.variance))
            .collect();
        for ((t, m, v), (et, em, ev)) in got.into_iter().zip([(0, 0.5, 0.5), (1, 0.8, 0.6)]) {
            assert_eq!(t, et);
            assert_abs_diff_eq!(m, em, epsilon = 1e-12);
            assert_abs_diff_eq!(v, ev, epsilon = 1e-12);
        }
        let smooth = estimate_series(&spec, &obs, SeriesMode::AllSmooth).unwrap();
        let (a, b) = (smooth.rows[1], filt.rows[1]);
        assert_abs_diff_eq!(a.mean, b.mean, epsilon = 1e-12);
        assert_abs_diff_eq!(a.variance, b.variance, epsilon = 1e-12);
        assert_eq!(a.mode, ModeTag::Filter);
        assert!(smooth.rows[0].variance <= filt.rows[0].variance);
    }

    #[test]
    fn series_agrees_with_single_queries() {
        let spec = unit(4);
        let obs = ObservationSeries::dense(&[0.2, -0.5, 1.1, 0.4, 2.0]);
        let series = estimate_series(&spec, &obs, SeriesMode::AllSmooth).unwrap();
        for row in &series.rows {
            let g = bayes_kalman(&spec, &obs, row.t).unwrap();
            assert_eq!((row.mean, row.variance), (g.mean, g.variance));
        }
    }

    #[test]
    fn uninformative_channel_ignores_its_value() {
        let mut spec = unit(3);
        spec.steps[0].channel.c = 0.0;
        let a = ObservationSeries::dense(&[0.2, -0.5, 1.1, 0.4]);
        let b = ObservationSeries::dense(&[0.2, 7.5, 1.1, 0.4]);
        for s in 0..=3 {
            assert_eq!(
                bayes_kalman(&spec, &a, s).unwrap(),
                bayes_kalman(&spec, &b, s).unwrap()
            );
        }
        spec.steps[0].channel.c = 1.0;
        let changed =
            bayes_kalman(&spec, &b, 0).unwrap().mean - bayes_kalman(&spec, &a, 0).unwrap().mean;
        assert!(changed.abs() > 1e-3);
    }

    #[test]
    fn errors_propagate() {
        let spec = unit(2);
        let obs = ObservationSeries::dense(&[1.0, 1.0, 1.0]);
        assert!(matches!(
            bayes_kalman(&spec, &obs, 3),
            Err(EstimateError::OutOfRange { .. })
        ));
        let short = ObservationSeries::dense(&[1.0]);
        assert!(matches!(
            run_forward(&spec, &short, 0),
            Err(EstimateError::Model(ModelError::MissingObservation(1)))
        ));
        let mut bad = unit(2);
        bad.steps[1].transition.r = -1.0;
        assert!(matches!(
            run_backward(&bad, &obs, 0),
            Err(EstimateError::Model(ModelError::Invalid(_)))
        ));
    }

    #[test]
    fn works_in_f32() {
        let spec = ModelSpec::<f32>::unit(1);
        let obs = ObservationSeries::dense(&[1.0f32, 1.0]);
        let g = bayes_kalman(&spec, &obs, 0).unwrap();
        let g64 = bayes_kalman(&unit(1), &ObservationSeries::dense(&[1.0, 1.0]), 0).unwrap();
        assert!((g.mean as f64 - g64.mean).abs() < 1e-6);
        assert!((g.variance as f64 - g64.variance).abs() < 1e-6);
    }
}
