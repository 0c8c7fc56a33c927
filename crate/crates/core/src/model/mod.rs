//! The time-indexed state-space model on the chain `T = {0, 1, …, n}`.
//!
//! Step `t ≥ 1` carries the transition from `ω_{t-1}` to `ω_t`; every index
//! `t ∈ T` (including 0) carries an observation channel and a flag saying
//! whether `x_t` was measured. An unobserved step contributes the constant
//! likelihood 1.

mod io;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use thiserror::Error;

use crate::gaussian::{AffineNoise, KernelError, MomentGaussian, ObsChannel};
use crate::Scalar;

pub use io::{
    fmt_num, parse_model, parse_observations, render_model, render_observations, render_states,
};

/// Parameters of step `t ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams<T> {
    pub transition: AffineNoise<T>,
    pub channel: ObsChannel<T>,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec<T> {
    pub prior: MomentGaussian<T>,
    /// Observation channel at `t = 0`.
    pub channel0: ObsChannel<T>,
    pub observed0: bool,
    /// `steps[k]` holds the parameters of time `t = k + 1`.
    pub steps: Vec<StepParams<T>>,
    pub horizon: usize,
}

impl<T: Scalar> ModelSpec<T> {
    /// Constant-parameter model of horizon `n`, every step observed.
    pub fn constant(
        prior: MomentGaussian<T>,
        transition: AffineNoise<T>,
        channel: ObsChannel<T>,
        n: usize,
    ) -> Self {
        Self {
            prior,
            channel0: channel,
            observed0: true,
            steps: vec![
                StepParams {
                    transition,
                    channel,
                    observed: true,
                };
                n
            ],
            horizon: n,
        }
    }

    /// `μ₀ = 0, σ₀ = 1`, `a = c = 1`, `b = d = 0`, `r = q = 1`.
    pub fn unit(n: usize) -> Self {
        let (zero, one) = (T::zero(), T::one());
        Self::constant(
            MomentGaussian {
                mean: zero,
                variance: one,
            },
            AffineNoise {
                a: one,
                b: zero,
                r: one,
            },
            ObsChannel {
                c: one,
                d: zero,
                q: one,
            },
            n,
        )
    }

    pub fn channel(&self, t: usize) -> ObsChannel<T> {
        if t == 0 {
            self.channel0
        } else {
            self.steps[t - 1].channel
        }
    }

    pub fn is_observed(&self, t: usize) -> bool {
        if t == 0 {
            self.observed0
        } else {
            self.steps[t - 1].observed
        }
    }

    /// Transition into time `t`; `t` must be in `1..=n`.
    pub fn transition(&self, t: usize) -> AffineNoise<T> {
        self.steps[t - 1].transition
    }

    pub fn set_observed(&mut self, t: usize, observed: bool) {
        if t == 0 {
            self.observed0 = observed;
        } else {
            self.steps[t - 1].observed = observed;
        }
    }

    pub fn fully_observed(&self) -> bool {
        (0..=self.horizon).all(|t| self.is_observed(t))
    }

    /// Observed time indices in increasing order.
    pub fn observed_indices(&self) -> Vec<usize> {
        (0..=self.horizon)
            .filter(|&t| self.is_observed(t))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ViolationKind {
    NonPositivePriorVariance,
    NonPositiveObservationNoise,
    NonPositiveTransitionNoise,
    NonFinite(&'static str),
    HorizonMismatch { steps: usize, horizon: usize },
}

/// One invariant violation, located at a time index when it has one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub step: Option<usize>,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = self.step {
            write!(f, "t={t}: ")?;
        }
        match &self.kind {
            ViolationKind::NonPositivePriorVariance => write!(f, "nonpositive prior variance"),
            ViolationKind::NonPositiveObservationNoise => {
                write!(f, "nonpositive observation noise")
            }
            ViolationKind::NonPositiveTransitionNoise => write!(f, "nonpositive transition noise"),
            ViolationKind::NonFinite(name) => write!(f, "non-finite parameter {name}"),
            ViolationKind::HorizonMismatch { steps, horizon } => {
                write!(f, "{steps} steps given for horizon {horizon}")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("observation index {t} outside 0..={horizon}")]
    IndexOutOfRange { t: usize, horizon: usize },
    #[error("observation indices not strictly increasing at t={0}")]
    NotIncreasing(usize),
    #[error("observation given for unobserved step t={0}")]
    UnexpectedObservation(usize),
    #[error("missing observation for observed step t={0}")]
    MissingObservation(usize),
    #[error("non-finite observation at t={0}")]
    NonFiniteObservation(usize),
    #[error("model config: {0}")]
    Config(String),
    #[error("observation file: {0}")]
    Csv(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Lists every invariant violation of `spec`; `Ok` iff there are none.
pub fn validate<T: Scalar>(spec: &ModelSpec<T>) -> Result<(), Vec<Violation>> {
    let mut out = Vec::new();
    if spec.steps.len() != spec.horizon {
        out.push(Violation {
            step: None,
            kind: ViolationKind::HorizonMismatch {
                steps: spec.steps.len(),
                horizon: spec.horizon,
            },
        });
    }
    let prior = &spec.prior;
    if !prior.mean.is_finite() {
        out.push(at(0, ViolationKind::NonFinite("prior mean")));
    }
    if !prior.variance.is_finite() {
        out.push(at(0, ViolationKind::NonFinite("prior variance")));
    } else if prior.variance <= T::zero() {
        out.push(at(0, ViolationKind::NonPositivePriorVariance));
    }
    check_channel(0, &spec.channel0, &mut out);
    for (k, step) in spec.steps.iter().enumerate() {
        let t = k + 1;
        let tr = &step.transition;
        for (name, value) in [("a", tr.a), ("b", tr.b)] {
            if !value.is_finite() {
                out.push(at(t, ViolationKind::NonFinite(name)));
            }
        }
        if !tr.r.is_finite() {
            out.push(at(t, ViolationKind::NonFinite("r")));
        } else if tr.r <= T::zero() {
            out.push(at(t, ViolationKind::NonPositiveTransitionNoise));
        }
        check_channel(t, &step.channel, &mut out);
    }

    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}

fn at(t: usize, kind: ViolationKind) -> Violation {
    Violation {
        step: Some(t),
        kind,
    }
}

fn check_channel<T: Scalar>(t: usize, ch: &ObsChannel<T>, out: &mut Vec<Violation>) {
    for (name, value) in [("c", ch.c), ("d", ch.d)] {
        if !value.is_finite() {
            out.push(at(t, ViolationKind::NonFinite(name)));
        }
    }
    if !ch.q.is_finite() {
        out.push(at(t, ViolationKind::NonFinite("q")));
    } else if ch.q <= T::zero() {
        out.push(at(t, ViolationKind::NonPositiveObservationNoise));
    }
}

/// Measured values `(t, x_t)` for the observed steps, indices strictly increasing.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationSeries<T> {
    pub values: Vec<(usize, T)>,
}

impl<T: Scalar> ObservationSeries<T> {
    pub fn new(values: Vec<(usize, T)>) -> Self {
        Self { values }
    }

    /// One value per index `0..values.len()`.
    pub fn dense(xs: &[T]) -> Self {
        Self {
            values: xs.iter().copied().enumerate().collect(),
        }
    }

    /// Checks the series against `spec` and lays it out by time index.
    pub fn aligned(&self, spec: &ModelSpec<T>) -> Result<Vec<Option<T>>, ModelError> {
        let n = spec.horizon;
        let mut out = vec![None; n + 1];
        let mut last: Option<usize> = None;
        for &(t, x) in &self.values {
            if t > n {
                return Err(ModelError::IndexOutOfRange { t, horizon: n });
            }
            if last.is_some_and(|l| t <= l) {
                return Err(ModelError::NotIncreasing(t));
            }
            if !spec.is_observed(t) {
                return Err(ModelError::UnexpectedObservation(t));
            }
            if !x.is_finite() {
                return Err(ModelError::NonFiniteObservation(t));
            }
            out[t] = Some(x);
            last = Some(t);
        }
        if let Some(t) = (0..=n).find(|&t| spec.is_observed(t) && out[t].is_none()) {
            return Err(ModelError::MissingObservation(t));
        }
        Ok(out)
    }
}

/// A simulated state path together with the measurements it produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub states: Vec<T>,
    pub observations: ObservationSeries<T>,
}

/// Draws `ω_0..ω_n` and the observed `x_t` from the generative model.
///
/// Deterministic in `(spec, seed)`.
pub fn sample_trajectory<T: Scalar>(
    spec: &ModelSpec<T>,
    seed: u64,
) -> Result<Trajectory<T>, ModelError> {
    validate(spec).map_err(ModelError::Invalid)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || T::lit(StandardNormal.sample(&mut rng));

    let mut states = Vec::with_capacity(spec.horizon + 1);
    let mut values = Vec::new();
    let mut w = spec.prior.mean + spec.prior.std_dev() * normal();
    for t in 0..=spec.horizon {
        if t > 0 {
            let tr = spec.transition(t);
            w = tr.a * w + tr.b + tr.r * normal();
        }
        states.push(w);
        if spec.is_observed(t) {
            let ch = spec.channel(t);
            values.push((t, ch.c * w + ch.d + ch.q * normal()));
        }
    }
    Ok(Trajectory {
        states,
        observations: ObservationSeries { values },
    })
}

/// Sampling ranges for randomized test models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomModel {
    /// Horizon drawn uniformly from `0..=max_horizon`.
    pub max_horizon: usize,
    /// Range for `a, c, r, q` and the prior standard deviation.
    pub scale: (f64, f64),
    /// Range for `b, d` and the prior mean.
    pub offset: (f64, f64),
    /// Probability that a step is left unobserved.
    pub unobserved: f64,
}

impl Default for RandomModel {
    fn default() -> Self {
        Self {
            max_horizon: 6,
            scale: (0.2, 3.0),
            offset: (-2.0, 2.0),
            unobserved: 0.0,
        }
    }
}

impl RandomModel {
    /// Draws a model and a trajectory sampled from it.
    pub fn sample(&self, seed: u64) -> (ModelSpec<f64>, Trajectory<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = Uniform::new_inclusive(self.scale.0, self.scale.1).expect("scale range");
        let offset = Uniform::new_inclusive(self.offset.0, self.offset.1).expect("offset range");
        let unit = Uniform::new(0.0, 1.0).expect("unit range");
        let n = rng.random_range(0..=self.max_horizon);

        let sd = scale.sample(&mut rng);
        let prior = MomentGaussian {
            mean: offset.sample(&mut rng),
            variance: sd * sd,
        };
        let channel = |rng: &mut ChaCha8Rng| ObsChannel {
            c: scale.sample(rng),
            d: offset.sample(rng),
            q: scale.sample(rng),
        };
        let channel0 = channel(&mut rng);
        let observed0 = unit.sample(&mut rng) >= self.unobserved;
        let steps = (0..n)
            .map(|_| StepParams {
                transition: AffineNoise {
                    a: scale.sample(&mut rng),
                    b: offset.sample(&mut rng),
                    r: scale.sample(&mut rng),
                },
                channel: channel(&mut rng),
                observed: unit.sample(&mut rng) >= self.unobserved,
            })
            .collect();
        let spec = ModelSpec {
            prior,
            channel0,
            observed0,
            steps,
            horizon: n,
        };
        let traj = sample_trajectory(&spec, rng.random()).expect("random model is valid");
        (spec, traj)
    }
}
