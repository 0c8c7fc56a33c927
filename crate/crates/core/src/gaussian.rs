//! Closed-form Gaussian algebra on two message representations.
//!
//! A [`MomentGaussian`] is a normalized density in mean/variance form and
//! carries forward-pass states. A [`RootMessage`] is the unnormalized
//! function `exp[-½(uω - v)²]`, defined only up to a positive constant, and
//! carries backward-pass likelihood messages. Two identities do all the work:
//!
//! ```text
//! ∫ N(x; B y, A²) N(y; D, C²) dy = N(x; B D, A² + B² C²)               (convolution)
//! exp[-(Aω-B)²/2E²] exp[-(Cω-D)²/2F²] ∝ exp[-½ P (ω - M)²]            (product)
//!     P = (A²F² + C²E²) / (E²F²),   M = (ABF² + CDE²) / (A²F² + C²E²)
//! ```
//!
//! Every operation validates its inputs and returns [`KernelError`] on a
//! violated invariant.

use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("invalid parameter {name} = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn finite<T: Scalar>(name: &'static str, value: T) -> Result<(), KernelError> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter {
            name,
            value: value.as_f64(),
            reason: "must be finite",
        })
    }
}

fn positive<T: Scalar>(name: &'static str, value: T) -> Result<(), KernelError> {
    finite(name, value)?;
    if value > T::zero() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter {
            name,
            value: value.as_f64(),
            reason: "must be strictly positive",
        })
    }
}

/// Normalized Gaussian density `N(ω; mean, variance)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentGaussian<T> {
    pub mean: T,
    pub variance: T,
}

impl<T: Scalar> MomentGaussian<T> {
    pub fn new(mean: T, variance: T) -> Result<Self, KernelError> {
        let g = Self { mean, variance };
        g.check()?;
        Ok(g)
    }

    pub fn check(&self) -> Result<(), KernelError> {
        finite("mean", self.mean)?;
        positive("variance", self.variance)
    }

    pub fn std_dev(&self) -> T {
        self.variance.sqrt()
    }

    pub fn precision(&self) -> T {
        self.variance.recip()
    }
}

/// Unnormalized message `exp[-½(uω - v)²]`, stored in canonical form.
///
/// `(u, v)` and `(-u, -v)` describe the same function, so the canonical
/// representative has `u ≥ 0`, and `v ≥ 0` when `u = 0`. A message with
/// `u = 0` is constant in ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootMessage<T> {
    u: T,
    v: T,
}

impl<T: Scalar> RootMessage<T> {
    pub fn new(u: T, v: T) -> Result<Self, KernelError> {
        finite("u", u)?;
        finite("v", v)?;
        Ok(Self::canonical(u, v))
    }

    /// The uninformative message (identically 1).
    pub fn constant() -> Self {
        Self {
            u: T::zero(),
            v: T::zero(),
        }
    }

    fn canonical(u: T, v: T) -> Self {
        let zero = T::zero();
        let (mut u, mut v) = if u < zero || (u == zero && v < zero) {
            (-u, -v)
        } else {
            (u, v)
        };
        // fold -0.0 into +0.0 so that equality is exact
        if u == zero {
            u = zero;
        }
        if v == zero {
            v = zero;
        }
        Self { u, v }
    }

    pub fn u(&self) -> T {
        self.u
    }

    pub fn v(&self) -> T {
        self.v
    }

    pub fn is_constant(&self) -> bool {
        self.u == T::zero()
    }

    pub fn check(&self) -> Result<(), KernelError> {
        finite("u", self.u)?;
        finite("v", self.v)
    }
}

/// Affine transition with Gaussian noise, `ω' = a ω + b + r ε`.
///
/// `a = 0` is allowed: the next state is then `N(b, r²)` regardless of ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineNoise<T> {
    pub a: T,
    pub b: T,
    pub r: T,
}

impl<T: Scalar> AffineNoise<T> {
    pub fn new(a: T, b: T, r: T) -> Result<Self, KernelError> {
        let t = Self { a, b, r };
        t.check()?;
        Ok(t)
    }

    pub fn check(&self) -> Result<(), KernelError> {
        finite("a", self.a)?;
        finite("b", self.b)?;
        positive("r", self.r)
    }
}

/// Observation channel `x = c ω + d + q η`. `c = 0` makes the channel uninformative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObsChannel<T> {
    pub c: T,
    pub d: T,
    pub q: T,
}

impl<T: Scalar> ObsChannel<T> {
    pub fn new(c: T, d: T, q: T) -> Result<Self, KernelError> {
        let ch = Self { c, d, q };
        ch.check()?;
        Ok(ch)
    }

    pub fn check(&self) -> Result<(), KernelError> {
        finite("c", self.c)?;
        finite("d", self.d)?;
        positive("q", self.q)
    }
}

/// Pushes a density through an affine-noise transition.
pub fn convolve_affine<T: Scalar>(
    g: MomentGaussian<T>,
    t: AffineNoise<T>,
) -> Result<MomentGaussian<T>, KernelError> {
    g.check()?;
    t.check()?;
    Ok(MomentGaussian {
        mean: t.a * g.mean + t.b,
        variance: t.a * t.a * g.variance + t.r * t.r,
    })
}

/// Normalized product of `g` with the likelihood `exp[-(x - cω - d)²/2q²]`.
///
/// The gain is `σ̃² c / q²`; see the README for the derivation.
pub fn posterior_product<T: Scalar>(
    g: MomentGaussian<T>,
    ch: ObsChannel<T>,
    x: T,
) -> Result<MomentGaussian<T>, KernelError> {
    g.check()?;
    ch.check()?;
    finite("x", x)?;
    if ch.c == T::zero() {
        return Ok(g);
    }
    let q2 = ch.q * ch.q;
    let variance = q2 * g.variance / (q2 + ch.c * ch.c * g.variance);
    let mean = g.mean + variance * (ch.c / q2) * (x - ch.d - ch.c * g.mean);
    Ok(MomentGaussian { mean, variance })
}

/// Root form of the likelihood of a single observation: `(c/q, (x-d)/q)`.
pub fn root_from_observation<T: Scalar>(
    ch: ObsChannel<T>,
    x: T,
) -> Result<RootMessage<T>, KernelError> {
    ch.check()?;
    finite("x", x)?;
    Ok(RootMessage::canonical(ch.c / ch.q, (x - ch.d) / ch.q))
}

/// Pulls a message on the next state back through a transition:
/// `f(ω) = ∫ N(ω'; aω + b, r²) m(ω') dω'`.
pub fn root_back_propagate<T: Scalar>(
    m: RootMessage<T>,
    t: AffineNoise<T>,
) -> Result<RootMessage<T>, KernelError> {
    m.check()?;
    t.check()?;
    let scale = (T::one() + t.r * t.r * m.u * m.u).sqrt();
    Ok(RootMessage::canonical(
        t.a * m.u / scale,
        (m.v - t.b * m.u) / scale,
    ))
}

/// Multiplies a message by the likelihood of an observation and completes
/// the square back into root form.
pub fn root_absorb_observation<T: Scalar>(
    m: RootMessage<T>,
    ch: ObsChannel<T>,
    x: T,
) -> Result<RootMessage<T>, KernelError> {
    m.check()?;
    ch.check()?;
    finite("x", x)?;
    if ch.c == T::zero() {
        return Ok(m);
    }
    let q2 = ch.q * ch.q;
    let norm = (ch.c * ch.c + m.u * m.u * q2).sqrt();
    let u = norm / ch.q;
    let v = (ch.c * (x - ch.d) + m.u * m.v * q2) / (ch.q * norm);
    Ok(RootMessage::canonical(u, v))
}

/// Normalized product `m(ω) g(ω) / ∫ m g dω`.
pub fn combine_moment_root<T: Scalar>(
    g: MomentGaussian<T>,
    m: RootMessage<T>,
) -> Result<MomentGaussian<T>, KernelError> {
    g.check()?;
    m.check()?;
    if m.is_constant() {
        return Ok(g);
    }
    let precision = g.precision() + m.u * m.u;
    Ok(MomentGaussian {
        mean: (g.mean / g.variance + m.u * m.v) / precision,
        variance: precision.recip(),
    })
}

/// Value of the normalized density at `w`.
pub fn eval_density<T: Scalar>(g: MomentGaussian<T>, w: T) -> T {
    let z = w - g.mean;
    let two = T::lit(2.0);
    (-(z * z) / (two * g.variance)).exp() / (two * T::PI() * g.variance).sqrt()
}

/// Value of `exp[-½(uω - v)²]` at `w`; always in `(0, 1]` for finite input.
pub fn eval_root<T: Scalar>(m: RootMessage<T>, w: T) -> T {
    let z = m.u * w - m.v;
    (-(z * z) / T::lit(2.0)).exp()
}
