//! Brute-force Bayesian conditioning on a discretized state space.
//!
//! Densities live on uniform grids and every integral is a trapezoid sum.
//! Nothing here uses the closed-form Gaussian algebra of
//! [`crate::gaussian`]: transitions are applied by quadrature against the
//! kernel `N(ω'; aω + b, r²)`, observations by pointwise multiplication with
//! the channel likelihood, so the results serve as an independent check of
//! the estimator.
//!
//! [`GridChain`] runs the whole model: a forward sweep of filtered densities
//! `p(ω_t | x_0..x_t)` followed by a backward sweep of likelihood functions
//! `β_t(ω_t) = p(x_{t+1}..x_n | ω_t)` evaluated on the same grids. The
//! smoothed marginal at `s` is the normalized product of the two.
//!
//! Grid windows are chosen automatically per time step: the pushforward of
//! the previous window through the transition, intersected with the region
//! where the likelihood of `x_t` is non-negligible, then trimmed to where the
//! filtered density exceeds `1e-30` of its peak and padded. The number of
//! points grows beyond [`GridConfig::n_points`] when the kernel or the
//! likelihood is narrow compared to the window, so that every integrand is
//! sampled at least four points per standard deviation.

use thiserror::Error;

use crate::gaussian::{AffineNoise, KernelError, ObsChannel};
use crate::model::{validate, ModelError, ModelSpec, ObservationSeries};

/// Half-width, in standard deviations, beyond which Gaussian factors are dropped.
const CUTOFF: f64 = 12.0;
/// Relative density below which grid points are trimmed away.
const TRIM: f64 = 1e-30;
/// Minimum samples per standard deviation of any integrand.
const SAMPLES_PER_SD: f64 = 4.0;
const MAX_POINTS: usize = 400_001;
const MIN_POINTS: usize = 16;
/// Largest tolerated loss of probability mass at grid boundaries.
pub const MASS_LEAK_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid likelihood value {value} at ω={at}")]
    InvalidLikelihood { at: f64, value: f64 },
    #[error("zero evidence: conditioning on the data leaves no probability mass")]
    ZeroEvidence,
    #[error("mass leak: {lost:e} of the pushed-forward mass falls outside the output grid")]
    MassLeak { lost: f64 },
    #[error("query index s={s} outside 0..={horizon}")]
    OutOfRange { s: usize, horizon: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// `n_points` equally spaced points from `lo` to `hi`, both included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    lo: f64,
    hi: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n_points: usize) -> Result<Self, OracleError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(OracleError::InvalidGrid(format!("bounds [{lo}, {hi}]")));
        }
        if n_points < MIN_POINTS {
            return Err(OracleError::InvalidGrid(format!(
                "{n_points} points, need at least {MIN_POINTS}"
            )));
        }
        Ok(Self { lo, hi, n_points })
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(|i| self.point(i))
    }

    /// Trapezoid weight of point `i`.
    fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n_points {
            0.5 * h
        } else {
            h
        }
    }

    /// Index range of the points inside `[lo, hi]`, if any.
    fn index_range(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let h = self.spacing();
        let last = (self.n_points - 1) as f64;
        let i0 = ((lo - self.lo) / h).ceil().max(0.0);
        let i1 = ((hi - self.lo) / h).floor().min(last);
        (i0 <= i1).then_some((i0 as usize, i1 as usize))
    }

    fn slice(&self, i0: usize, i1: usize) -> Grid {
        Grid {
            lo: self.point(i0),
            hi: self.point(i1),
            n_points: i1 - i0 + 1,
        }
    }
}

/// Pairwise summation; the result does not depend on anything but the input order.
fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 32 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn trapezoid(grid: &Grid, values: &[f64]) -> f64 {
    let terms: Vec<f64> = values
        .iter()
        .enumerate()
        .map(|(i, v)| grid.weight(i) * v)
        .collect();
    pairwise_sum(&terms)
}

fn normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    (-0.5 * z * z).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

/// `P(lo < Z < hi)` for a standard normal, accurate in both tails.
fn normal_interval(lo: f64, hi: f64) -> f64 {
    let upper = |z: f64| 0.5 * libm::erfc(z / std::f64::consts::SQRT_2);
    if lo > 0.0 {
        upper(lo) - upper(hi)
    } else if hi < 0.0 {
        upper(-hi) - upper(-lo)
    } else {
        1.0 - upper(hi) - upper(-lo)
    }
}

/// A nonnegative density on a [`Grid`] with unit trapezoid integral.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    grid: Grid,
    weights: Vec<f64>,
}

impl GridDensity {
    /// Normalizes nonnegative `weights` into a density.
    pub fn from_weights(grid: Grid, mut weights: Vec<f64>) -> Result<Self, OracleError> {
        if weights.len() != grid.n_points {
            return Err(OracleError::InvalidGrid(format!(
                "{} weights for {} points",
                weights.len(),
                grid.n_points
            )));
        }
        if let Some((i, &w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(OracleError::InvalidLikelihood {
                at: grid.point(i),
                value: w,
            });
        }
        let z = trapezoid(&grid, &weights);
        if !(z.is_finite() && z > 0.0) {
            return Err(OracleError::ZeroEvidence);
        }
        weights.iter_mut().for_each(|w| *w /= z);
        Ok(Self { grid, weights })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self, OracleError> {
        let weights = grid.points().map(f).collect();
        Self::from_weights(grid, weights)
    }

    /// Uniform density on the grid's interval.
    pub fn uniform(grid: Grid) -> Self {
        Self::from_weights(grid, vec![1.0; grid.n_points]).expect("uniform weights")
    }

    pub fn normal(grid: Grid, mean: f64, sd: f64) -> Result<Self, OracleError> {
        Self::from_fn(grid, |w| normal_pdf(w, mean, sd))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.weights)
    }

    /// Restricts to where the density exceeds `TRIM` of its peak, widened by
    /// `pad` times the kept width on each side.
    fn trimmed(&self, pad: f64) -> Result<Self, OracleError> {
        let peak = self.weights.iter().copied().fold(0.0, f64::max);
        let keep = |w: &f64| *w > peak * TRIM;
        let i0 = self.weights.iter().position(keep).unwrap_or(0);
        let i1 = self
            .weights
            .iter()
            .rposition(keep)
            .unwrap_or(self.grid.n_points - 1);
        let extra = ((i1 - i0) as f64 * pad).ceil() as usize + 2;
        let mut lo = i0.saturating_sub(extra);
        let mut hi = (i1 + extra).min(self.grid.n_points - 1);
        while hi - lo + 1 < MIN_POINTS {
            lo = lo.saturating_sub(1);
            hi = (hi + 1).min(self.grid.n_points - 1);
        }
        Self::from_weights(self.grid.slice(lo, hi), self.weights[lo..=hi].to_vec())
    }
}

/// Trapezoid mean and variance.
pub fn moments(rho: &GridDensity) -> (f64, f64) {
    let g = &rho.grid;
    let first: Vec<f64> = g.points().zip(&rho.weights).map(|(w, p)| w * p).collect();
    let mean = trapezoid(g, &first) / rho.integral();
    let second: Vec<f64> = g
        .points()
        .zip(&rho.weights)
        .map(|(w, p)| (w - mean) * (w - mean) * p)
        .collect();
    (mean, trapezoid(g, &second) / rho.integral())
}

fn sample_likelihood(
    grid: &Grid,
    likelihood: impl Fn(f64) -> f64,
    upper: f64,
) -> Result<Vec<f64>, OracleError> {
    grid.points()
        .map(|w| {
            let value = likelihood(w);
            if value.is_finite() && (0.0..=upper).contains(&value) {
                Ok(value)
            } else {
                Err(OracleError::InvalidLikelihood { at: w, value })
            }
        })
        .collect()
}

/// `∫ likelihood(ω) ρ(ω) dω` for a likelihood with values in `[0, 1]`.
pub fn grid_probability(
    rho: &GridDensity,
    likelihood: impl Fn(f64) -> f64,
) -> Result<f64, OracleError> {
    let lik = sample_likelihood(&rho.grid, likelihood, 1.0)?;
    let prod: Vec<f64> = lik.iter().zip(&rho.weights).map(|(l, p)| l * p).collect();
    Ok(trapezoid(&rho.grid, &prod))
}

/// Bayes update: `likelihood · ρ`, renormalized.
pub fn grid_bayes(
    rho: &GridDensity,
    likelihood: impl Fn(f64) -> f64,
) -> Result<GridDensity, OracleError> {
    let lik = sample_likelihood(&rho.grid, likelihood, f64::INFINITY)?;
    let prod = lik.iter().zip(&rho.weights).map(|(l, p)| l * p).collect();
    GridDensity::from_weights(rho.grid, prod)
}

/// Unnormalized `∫ N(ω'; aω + b, r²) ρ(ω) dω` at every point of `out`.
fn push_forward(rho: &GridDensity, t: &AffineNoise<f64>, out: &Grid) -> Vec<f64> {
    let g = &rho.grid;
    let reach = CUTOFF * t.r;
    let total = trapezoid(g, &rho.weights);
    out.points()
        .map(|w_out| {
            if t.a == 0.0 {
                return normal_pdf(w_out, t.b, t.r) * total;
            }
            let (x0, x1) = ((w_out - t.b - reach) / t.a, (w_out - t.b + reach) / t.a);
            let Some((i0, i1)) = g.index_range(x0.min(x1), x0.max(x1)) else {
                return 0.0;
            };
            (i0..=i1)
                .map(|i| {
                    g.weight(i) * rho.weights[i] * normal_pdf(w_out, t.a * g.point(i) + t.b, t.r)
                })
                .sum()
        })
        .collect()
}

/// Unnormalized `∫ N(ω'; aω + b, r²) f(ω') dω'` at every point of `out`, for
/// `f` sampled on `grid`.
fn pull_back(f: &[f64], grid: &Grid, t: &AffineNoise<f64>, out: &Grid) -> Vec<f64> {
    let reach = CUTOFF * t.r;
    out.points()
        .map(|w| {
            let centre = t.a * w + t.b;
            let Some((k0, k1)) = grid.index_range(centre - reach, centre + reach) else {
                return 0.0;
            };
            (k0..=k1)
                .map(|k| grid.weight(k) * f[k] * normal_pdf(grid.point(k), centre, t.r))
                .sum()
        })
        .collect()
}

/// Pushes `ρ` through the transition onto `out`.
///
/// Fails with [`OracleError::MassLeak`] when more than
/// [`MASS_LEAK_TOLERANCE`] of the pushed-forward mass lands outside `out`.
pub fn grid_causal(
    rho: &GridDensity,
    t: &AffineNoise<f64>,
    out: Grid,
) -> Result<GridDensity, OracleError> {
    t.check()?;
    let inside: Vec<f64> = rho
        .grid
        .points()
        .zip(&rho.weights)
        .map(|(w, p)| {
            let centre = t.a * w + t.b;
            p * normal_interval((out.lo - centre) / t.r, (out.hi - centre) / t.r)
        })
        .collect();
    let lost = 1.0 - trapezoid(&rho.grid, &inside) / rho.integral();
    if lost > MASS_LEAK_TOLERANCE {
        return Err(OracleError::MassLeak { lost });
    }
    GridDensity::from_weights(out, push_forward(rho, t, &out))
}

/// How an observation `x_t` conditions the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Conditioning {
    /// The channel density `N(x; cω + d, q²)` evaluated at the measured value.
    #[default]
    Point,
    /// The channel probability of `[x - half_width, x + half_width]`.
    Interval { half_width: f64 },
}

/// Likelihood of one measured value as a function of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelLikelihood {
    pub channel: ObsChannel<f64>,
    pub x: f64,
    pub conditioning: Conditioning,
}

impl ChannelLikelihood {
    pub fn point(channel: ObsChannel<f64>, x: f64) -> Self {
        Self {
            channel,
            x,
            conditioning: Conditioning::Point,
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let ObsChannel { c, d, q } = self.channel;
        match self.conditioning {
            Conditioning::Point => normal_pdf(self.x, c * w + d, q),
            Conditioning::Interval { half_width } => {
                let centre = c * w + d;
                normal_interval(
                    (self.x - half_width - centre) / q,
                    (self.x + half_width - centre) / q,
                )
            }
        }
    }

    /// States outside this interval have negligible likelihood; `None` when
    /// the likelihood does not depend on the state.
    fn window(&self) -> Option<(f64, f64)> {
        let ObsChannel { c, d, q } = self.channel;
        if c == 0.0 {
            return None;
        }
        let slack = match self.conditioning {
            Conditioning::Point => 0.0,
            Conditioning::Interval { half_width } => half_width,
        };
        let centre = (self.x - d) / c;
        let half = (CUTOFF * q + slack) / c.abs();
        Some((centre - half, centre + half))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    /// Minimum number of points per time step.
    pub n_points: usize,
    /// Padding added to each side of a trimmed window, as a fraction of its width.
    pub pad: f64,
    /// Fixed bounds for every time step instead of automatic windows.
    pub bounds: Option<(f64, f64)>,
    pub conditioning: Conditioning,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: 4097,
            pad: 0.2,
            bounds: None,
            conditioning: Conditioning::Point,
        }
    }
}

/// Forward and backward sweeps of the grid oracle over a whole model.
#[derive(Debug, Clone)]
pub struct GridChain {
    filtered: Vec<GridDensity>,
    backward: Vec<Vec<f64>>,
}

fn sup_normalized(mut v: Vec<f64>) -> Result<Vec<f64>, OracleError> {
    let sup = v.iter().copied().fold(0.0, f64::max);
    if !(sup.is_finite() && sup > 0.0) {
        return Err(OracleError::ZeroEvidence);
    }
    v.iter_mut().for_each(|x| *x /= sup);
    Ok(v)
}

impl GridChain {
    pub fn build(
        spec: &ModelSpec<f64>,
        obs: &ObservationSeries<f64>,
        cfg: &GridConfig,
    ) -> Result<Self, OracleError> {
        validate(spec).map_err(ModelError::Invalid)?;
        let xs = obs.aligned(spec)?;
        let n = spec.horizon;
        let likelihoods: Vec<Option<ChannelLikelihood>> = (0..=n)
            .map(|t| {
                xs[t].map(|x| ChannelLikelihood {
                    channel: spec.channel(t),
                    x,
                    conditioning: cfg.conditioning,
                })
            })
            .collect();
        let lik_at = |t: usize, grid: &Grid| -> Vec<f64> {
            match &likelihoods[t] {
                Some(l) => grid.points().map(|w| l.eval(w)).collect(),
                None => vec![1.0; grid.n_points],
            }
        };

        let mut filtered: Vec<GridDensity> = Vec::with_capacity(n + 1);
        for t in 0..=n {
            let grid = match cfg.bounds {
                Some((lo, hi)) => Grid::new(lo, hi, cfg.n_points)?,
                None => auto_grid(
                    spec,
                    t,
                    filtered.last(),
                    likelihoods[t].as_ref(),
                    cfg.n_points,
                )?,
            };
            let predicted = match filtered.last() {
                None => {
                    let sd = spec.prior.variance.sqrt();
                    grid.points()
                        .map(|w| normal_pdf(w, spec.prior.mean, sd))
                        .collect()
                }
                Some(prev) if cfg.bounds.is_some() => {
                    grid_causal(prev, &spec.transition(t), grid)?.weights
                }
                Some(prev) => push_forward(prev, &spec.transition(t), &grid),
            };
            let lik = lik_at(t, &grid);
            let post = predicted.iter().zip(&lik).map(|(p, l)| p * l).collect();
            let post = GridDensity::from_weights(grid, post)?;
            filtered.push(if cfg.bounds.is_some() {
                post
            } else {
                post.trimmed(cfg.pad)?
            });
        }

        let mut backward = vec![Vec::new(); n + 1];
        backward[n] = vec![1.0; filtered[n].grid.n_points];
        for t in (0..n).rev() {
            let next = &filtered[t + 1].grid;
            let absorbed: Vec<f64> = lik_at(t + 1, next)
                .iter()
                .zip(&backward[t + 1])
                .map(|(l, b)| l * b)
                .collect();
            let absorbed = sup_normalized(absorbed)?;
            let pulled = pull_back(&absorbed, next, &spec.transition(t + 1), &filtered[t].grid);
            backward[t] = sup_normalized(pulled)?;
        }
        Ok(Self { filtered, backward })
    }

    pub fn horizon(&self) -> usize {
        self.filtered.len() - 1
    }

    /// Density of `ω_t` given `x_0..x_t`.
    pub fn filtered(&self, t: usize) -> &GridDensity {
        &self.filtered[t]
    }

    /// Density of `ω_s` given the whole record.
    pub fn posterior(&self, s: usize) -> Result<GridDensity, OracleError> {
        let horizon = self.horizon();
        if s > horizon {
            return Err(OracleError::OutOfRange { s, horizon });
        }
        let f = &self.filtered[s];
        let w = f
            .weights
            .iter()
            .zip(&self.backward[s])
            .map(|(p, b)| p * b)
            .collect();
        GridDensity::from_weights(f.grid, w)
    }
}

/// Window and resolution for time `t`, from the previous filtered grid, the
/// transition and the likelihood of `x_t`.
fn auto_grid(
    spec: &ModelSpec<f64>,
    t: usize,
    prev: Option<&GridDensity>,
    lik: Option<&ChannelLikelihood>,
    min_points: usize,
) -> Result<Grid, OracleError> {
    let (mut lo, mut hi, mut finest) = match prev {
        None => {
            let sd = spec.prior.variance.sqrt();
            (
                spec.prior.mean - CUTOFF * sd,
                spec.prior.mean + CUTOFF * sd,
                sd,
            )
        }
        Some(prev) => {
            let tr = spec.transition(t);
            let (p, q) = (tr.a * prev.grid.lo + tr.b, tr.a * prev.grid.hi + tr.b);
            (p.min(q) - CUTOFF * tr.r, p.max(q) + CUTOFF * tr.r, tr.r)
        }
    };
    if let Some(l) = lik {
        if let Some((llo, lhi)) = l.window() {
            lo = lo.max(llo);
            hi = hi.min(lhi);
            if lo >= hi {
                return Err(OracleError::ZeroEvidence);
            }
            finest = finest.min(l.channel.q / l.channel.c.abs());
        }
    }
    if t < spec.horizon {
        let next = spec.transition(t + 1);
        if next.a != 0.0 {
            finest = finest.min(next.r / next.a.abs());
        }
    }
    let needed = ((hi - lo) * SAMPLES_PER_SD / finest).ceil() as usize + 1;
    Grid::new(lo, hi, needed.clamp(min_points, MAX_POINTS))
}

/// Density of `ω_s` given the whole record, by brute-force quadrature.
pub fn grid_posterior(
    spec: &ModelSpec<f64>,
    obs: &ObservationSeries<f64>,
    s: usize,
    cfg: &GridConfig,
) -> Result<GridDensity, OracleError> {
    if s > spec.horizon {
        return Err(OracleError::OutOfRange {
            s,
            horizon: spec.horizon,
        });
    }
    GridChain::build(spec, obs, cfg)?.posterior(s)
}
