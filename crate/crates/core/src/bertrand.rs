//! Bertrand's chord problem under two "uniform" parameterizations.
//!
//! A chord of the unit circle can be identified with
//!
//! - `First`: a point `(α, β)` of the rectangle `(0, 2π] × (0, π/2]`, where
//!   `α` is the direction of the chord's foot and `β` the half-angle between
//!   the chord and the radius, so the chord has length `2 cos β`;
//! - `Second`: its midpoint `(x, y)` in the open unit disk, with length
//!   `2 √(1 - x² - y²)`.
//!
//! Normalized Lebesgue measure on each domain gives a different probability
//! for "the chord is shorter than ℓ": `1 - (2/π) arccos(ℓ/2)` and `ℓ²/4`,
//! i.e. 2/3 and 3/4 at `ℓ = √3`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BertrandError {
    #[error("point outside the parameter domain: {0}")]
    OutOfDomain(String),
    #[error("chord length {0} outside (0, 2]")]
    LengthOutOfRange(f64),
    #[error("at least one sample is required")]
    NoSamples,
    #[error("unknown parameterization `{0}` (expected `first` or `second`)")]
    UnknownParameterization(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameterization {
    First,
    Second,
}

impl Parameterization {
    pub const ALL: [Parameterization; 2] = [Parameterization::First, Parameterization::Second];

    pub fn as_str(&self) -> &'static str {
        match self {
            Parameterization::First => "first",
            Parameterization::Second => "second",
        }
    }
}

impl FromStr for Parameterization {
    type Err = BertrandError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "first" => Ok(Parameterization::First),
            "second" => Ok(Parameterization::Second),
            other => Err(BertrandError::UnknownParameterization(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordParamFirst {
    pub alpha: f64,
    pub beta: f64,
}

impl ChordParamFirst {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, BertrandError> {
        if alpha > 0.0 && alpha <= 2.0 * PI && beta > 0.0 && beta <= FRAC_PI_2 {
            Ok(Self { alpha, beta })
        } else {
            Err(BertrandError::OutOfDomain(format!(
                "(α, β) = ({alpha}, {beta})"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChordParamSecond {
    pub x: f64,
    pub y: f64,
}

impl ChordParamSecond {
    pub fn new(x: f64, y: f64) -> Result<Self, BertrandError> {
        if x * x + y * y < 1.0 {
            Ok(Self { x, y })
        } else {
            Err(BertrandError::OutOfDomain(format!("(x, y) = ({x}, {y})")))
        }
    }
}

/// A point of one of the chord parameter domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChordPoint {
    First(ChordParamFirst),
    Second(ChordParamSecond),
}

impl From<ChordParamFirst> for ChordPoint {
    fn from(p: ChordParamFirst) -> Self {
        ChordPoint::First(p)
    }
}

impl From<ChordParamSecond> for ChordPoint {
    fn from(p: ChordParamSecond) -> Self {
        ChordPoint::Second(p)
    }
}

pub fn chord_length(p: impl Into<ChordPoint>) -> f64 {
    match p.into() {
        ChordPoint::First(p) => 2.0 * p.beta.cos(),
        ChordPoint::Second(p) => 2.0 * (1.0 - p.x * p.x - p.y * p.y).sqrt(),
    }
}

fn check_length(ell: f64) -> Result<(), BertrandError> {
    if ell > 0.0 && ell <= 2.0 {
        Ok(())
    } else {
        Err(BertrandError::LengthOutOfRange(ell))
    }
}

/// Probability that a chord drawn uniformly from the parameter domain is
/// shorter than `ell`.
pub fn exact_probability(param: Parameterization, ell: f64) -> Result<f64, BertrandError> {
    check_length(ell)?;
    Ok(match param {
        Parameterization::First => 1.0 - (ell / 2.0).acos() / FRAC_PI_2,
        Parameterization::Second => ell * ell / 4.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    /// Binomial standard error `√(p̂(1 - p̂)/n)`.
    pub stderr: f64,
    pub hits: u64,
    pub samples: u64,
}

const CHUNK: u64 = 1 << 16;

fn sample_point(param: Parameterization, rng: &mut ChaCha8Rng) -> ChordPoint {
    match param {
        Parameterization::First => {
            // 1 - U maps [0, 1) onto (0, 1]
            let alpha = 2.0 * PI * (1.0 - rng.random::<f64>());
            let beta = FRAC_PI_2 * (1.0 - rng.random::<f64>());
            ChordPoint::First(ChordParamFirst { alpha, beta })
        }
        Parameterization::Second => loop {
            let x = 2.0 * rng.random::<f64>() - 1.0;
            let y = 2.0 * rng.random::<f64>() - 1.0;
            if x * x + y * y < 1.0 {
                break ChordPoint::Second(ChordParamSecond { x, y });
            }
        },
    }
}

/// Monte Carlo estimate of [`exact_probability`].
///
/// The budget is split into fixed chunks, chunk `i` drawing from stream `i`
/// of a ChaCha generator seeded with `seed`, so the result does not depend
/// on how the chunks are scheduled across threads.
pub fn mc_probability(
    param: Parameterization,
    ell: f64,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate, BertrandError> {
    check_length(ell)?;
    if n_samples == 0 {
        return Err(BertrandError::NoSamples);
    }
    let chunks = n_samples.div_ceil(CHUNK);
    let hits: u64 = (0..chunks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let len = CHUNK.min(n_samples - i * CHUNK);
            (0..len)
                .filter(|_| chord_length(sample_point(param, &mut rng)) < ell)
                .count() as u64
        })
        .sum();
    let n = n_samples as f64;
    let p = hits as f64 / n;
    Ok(McEstimate {
        estimate: p,
        stderr: (p * (1.0 - p) / n).sqrt(),
        hits,
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQRT3: f64 = 1.732_050_807_568_877_2;

    /// Midpoint-rule measure of `{length < ell}` over each parameter domain.
    fn quadrature_probability(param: Parameterization, ell: f64, n: usize) -> f64 {
        match param {
            // length depends on β only; α integrates out
            Parameterization::First => {
                let h = FRAC_PI_2 / n as f64;
                let inside = (0..n)
                    .filter(|&j| {
                        let beta = (j as f64 + 0.5) * h;
                        chord_length(ChordParamFirst { alpha: 1.0, beta }) < ell
                    })
                    .count();
                inside as f64 * h * 2.0 * PI / (PI * PI)
            }
            Parameterization::Second => {
                let h = 2.0 / n as f64;
                let mut area = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        let (x, y) = (-1.0 + (i as f64 + 0.5) * h, -1.0 + (j as f64 + 0.5) * h);
                        if x * x + y * y < 1.0 && chord_length(ChordParamSecond { x, y }) < ell {
                            area += h * h;
                        }
                    }
                }
                area / PI
            }
        }
    }

    #[test]
    fn chord_length_examples() {
        assert_eq!(chord_length(ChordParamSecond::new(0.0, 0.0).unwrap()), 2.0);
        assert!((chord_length(ChordParamSecond::new(0.5, 0.0).unwrap()) - SQRT3).abs() < 1e-15);
        let p = ChordParamFirst::new(1.0, PI / 6.0).unwrap();
        assert!((chord_length(p) - SQRT3).abs() < 1e-15);
    }

    #[test]
    fn domains_enforced() {
        assert!(ChordParamFirst::new(0.0, 0.5).is_err());
        assert!(ChordParamFirst::new(1.0, 0.0).is_err());
        assert!(ChordParamFirst::new(2.0 * PI, FRAC_PI_2).is_ok());
        assert!(ChordParamSecond::new(1.0, 0.0).is_err());
        assert!(ChordParamSecond::new(0.6, 0.8).is_err());
        assert!(exact_probability(Parameterization::First, 0.0).is_err());
        assert!(exact_probability(Parameterization::Second, 2.1).is_err());
        assert!(mc_probability(Parameterization::Second, 1.0, 0, 1).is_err());
        assert_eq!(
            "first".parse::<Parameterization>().unwrap(),
            Parameterization::First
        );
        assert!("third".parse::<Parameterization>().is_err());
    }

    #[test]
    fn exact_values() {
        let first = exact_probability(Parameterization::First, SQRT3).unwrap();
        let second = exact_probability(Parameterization::Second, SQRT3).unwrap();
        assert!((first - 2.0 / 3.0).abs() < 1e-12);
        assert!((second - 0.75).abs() < 1e-12);
        assert!((first - second).abs() > 0.08);
        for p in Parameterization::ALL {
            assert_eq!(exact_probability(p, 2.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for p in Parameterization::ALL {
            for ell in [0.1, 0.5, 1.0, SQRT3, 1.9, 2.0] {
                let q = quadrature_probability(p, ell, 2000);
                let e = exact_probability(p, ell).unwrap();
                assert!((q - e).abs() < 2e-3, "{p:?} ℓ={ell}: {q} vs {e}");
            }
        }
    }

    #[test]
    fn exact_is_monotone() {
        for p in Parameterization::ALL {
            let mut last = 0.0;
            for k in 1..=200 {
                let v = exact_probability(p, k as f64 / 100.0).unwrap();
                assert!(v >= last);
                last = v;
            }
            assert!(exact_probability(p, 1e-9).unwrap() < 1e-8);
        }
    }

    #[test]
    fn strict_and_non_strict_agree() {
        // the boundary {length = ℓ} has measure zero
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for p in Parameterization::ALL {
            let (mut lt, mut le) = (0, 0);
            for _ in 0..100_000 {
                let len = chord_length(sample_point(p, &mut rng));
                lt += (len < SQRT3) as u32;
                le += (len <= SQRT3) as u32;
            }
            assert_eq!(lt, le);
        }
    }

    #[test]
    fn full_length_is_certain() {
        for n in [1, 10, 1000] {
            let est = mc_probability(Parameterization::Second, 2.0, n, 9).unwrap();
            assert_eq!(est.estimate, 1.0);
        }
    }

    #[test]
    fn mc_is_reproducible_and_converges() {
        for p in Parameterization::ALL {
            let exact = exact_probability(p, SQRT3).unwrap();
            let a = mc_probability(p, SQRT3, 200_000, 42).unwrap();
            assert_eq!(a, mc_probability(p, SQRT3, 200_000, 42).unwrap());
            let mut scaled = Vec::new();
            for n in [1_000u64, 10_000, 100_000, 1_000_000] {
                let est = mc_probability(p, SQRT3, n, 7).unwrap();
                assert!(
                    (est.estimate - exact).abs() < 4.0 * est.stderr,
                    "{p:?} n={n}: {est:?}"
                );
                scaled.push(est.stderr * (n as f64).sqrt());
            }
            let (lo, hi) = scaled
                .iter()
                .fold((f64::MAX, 0.0f64), |(l, h), s| (l.min(*s), h.max(*s)));
            assert!(hi / lo < 1.15, "stderr·√n spread {scaled:?}");
        }
    }
}
