//! Model config and observation file formats.
//!
//! The model config is TOML:
//!
//! ```toml
//! horizon = 2            # optional when [[steps]] is given
//!
//! [prior]
//! mean = 0.0
//! variance = 1.0         # or: std = 1.0 (exactly one of the two)
//!
//! [defaults]             # optional; fills any field a step leaves out
//! a = 1.0
//! b = 0.0
//! r = 1.0
//! c = 1.0
//! d = 0.0
//! q = 1.0
//! observed = true
//!
//! [initial]              # channel at t = 0: c, d, q, observed
//! q = 0.5
//!
//! [[steps]]              # one table per t = 1..n, in order
//! a = 0.9
//! observed = false
//! ```
//!
//! Without `[[steps]]` the model has `horizon` copies of `[defaults]`.
//! `observed` defaults to `true` when given nowhere. [`render_model`] writes the
//! fully expanded form (no `[defaults]`), with every number in shortest
//! round-trip notation, so `parse_model(render_model(m)) == m`.
//!
//! Observations are CSV with header `t,x`, one row per observed index.

use serde::Deserialize;

use super::{ModelError, ModelSpec, ObservationSeries, StepParams};
use crate::gaussian::{AffineNoise, MomentGaussian, ObsChannel};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    horizon: Option<usize>,
    prior: RawPrior,
    #[serde(default)]
    defaults: RawStep,
    #[serde(default)]
    initial: RawStep,
    steps: Option<Vec<RawStep>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrior {
    mean: f64,
    variance: Option<f64>,
    std: Option<f64>,
}

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    a: Option<f64>,
    b: Option<f64>,
    r: Option<f64>,
    c: Option<f64>,
    d: Option<f64>,
    q: Option<f64>,
    observed: Option<bool>,
}

struct Fill<'a> {
    defaults: &'a RawStep,
    at: String,
}

impl Fill<'_> {
    fn get(
        &self,
        own: Option<f64>,
        pick: fn(&RawStep) -> Option<f64>,
        name: &str,
    ) -> Result<f64, ModelError> {
        own.or(pick(self.defaults)).ok_or_else(|| {
            ModelError::Config(format!("{}: missing `{name}` and no default", self.at))
        })
    }

    fn channel(&self, raw: &RawStep) -> Result<ObsChannel<f64>, ModelError> {
        Ok(ObsChannel {
            c: self.get(raw.c, |s| s.c, "c")?,
            d: self.get(raw.d, |s| s.d, "d")?,
            q: self.get(raw.q, |s| s.q, "q")?,
        })
    }

    fn observed(&self, raw: &RawStep) -> bool {
        raw.observed.or(self.defaults.observed).unwrap_or(true)
    }
}

/// Parses a model config. Field values are not validated here; use
/// [`super::validate`] on the result.
pub fn parse_model(text: &str) -> Result<ModelSpec<f64>, ModelError> {
    let raw: RawModel =
        toml::from_str(text).map_err(|e| ModelError::Config(e.message().to_string()))?;

    let variance = match (raw.prior.variance, raw.prior.std) {
        (Some(v), None) => v,
        (None, Some(s)) => s * s,
        _ => {
            return Err(ModelError::Config(
                "[prior] needs exactly one of `variance` or `std`".into(),
            ))
        }
    };
    let prior = MomentGaussian {
        mean: raw.prior.mean,
        variance,
    };

    let fill0 = Fill {
        defaults: &raw.defaults,
        at: "[initial]".into(),
    };
    let channel0 = fill0.channel(&raw.initial)?;
    let observed0 = fill0.observed(&raw.initial);

    let steps_raw = match (&raw.steps, raw.horizon) {
        (Some(steps), _) => steps.clone(),
        (None, Some(n)) => vec![RawStep::default(); n],
        (None, None) => Vec::new(),
    };
    let mut steps = Vec::with_capacity(steps_raw.len());
    for (k, s) in steps_raw.iter().enumerate() {
        let fill = Fill {
            defaults: &raw.defaults,
            at: format!("step t={}", k + 1),
        };
        steps.push(StepParams {
            transition: AffineNoise {
                a: fill.get(s.a, |s| s.a, "a")?,
                b: fill.get(s.b, |s| s.b, "b")?,
                r: fill.get(s.r, |s| s.r, "r")?,
            },
            channel: fill.channel(s)?,
            observed: fill.observed(s),
        });
    }
    let horizon = raw.horizon.unwrap_or(steps.len());
    Ok(ModelSpec {
        prior,
        channel0,
        observed0,
        steps,
        horizon,
    })
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:?}")
    }
}

/// Writes the fully expanded config for `spec`.
pub fn render_model(spec: &ModelSpec<f64>) -> String {
    let mut out = format!(
        "horizon = {}\n\n[prior]\nmean = {}\nvariance = {}\n\n[initial]\nc = {}\nd = {}\nq = {}\nobserved = {}\n",
        spec.horizon,
        fmt_num(spec.prior.mean),
        fmt_num(spec.prior.variance),
        fmt_num(spec.channel0.c),
        fmt_num(spec.channel0.d),
        fmt_num(spec.channel0.q),
        spec.observed0,
    );
    for s in &spec.steps {
        let (tr, ch) = (&s.transition, &s.channel);
        out.push_str(&format!(
            "\n[[steps]]\na = {}\nb = {}\nr = {}\nc = {}\nd = {}\nq = {}\nobserved = {}\n",
            fmt_num(tr.a),
            fmt_num(tr.b),
            fmt_num(tr.r),
            fmt_num(ch.c),
            fmt_num(ch.d),
            fmt_num(ch.q),
            s.observed,
        ));
    }
    out
}

#[derive(Debug, Deserialize)]
struct ObsRow {
    t: usize,
    x: f64,
}

/// Reads a `t,x` CSV. Ordering and consistency with a model are checked by
/// [`ObservationSeries::aligned`].
pub fn parse_observations(text: &str) -> Result<ObservationSeries<f64>, ModelError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| ModelError::Csv(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "x"] {
        return Err(ModelError::Csv(format!(
            "expected header `t,x`, found `{}`",
            headers.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut values = Vec::new();
    for row in reader.deserialize::<ObsRow>() {
        let row = row.map_err(|e| ModelError::Csv(e.to_string()))?;
        values.push((row.t, row.x));
    }
    Ok(ObservationSeries { values })
}

pub fn render_observations(obs: &ObservationSeries<f64>) -> String {
    let mut out = String::from("t,x\n");
    for &(t, x) in &obs.values {
        out.push_str(&format!("{t},{}\n", fmt_num(x)));
    }
    out
}

/// `t,state` CSV of a simulated path.
pub fn render_states(states: &[f64]) -> String {
    let mut out = String::from("t,state\n");
    for (t, w) in states.iter().enumerate() {
        out.push_str(&format!("{t},{}\n", fmt_num(*w)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{validate, RandomModel};
    use proptest::prelude::*;

    #[test]
    fn defaults_expand_to_horizon() {
        let text = "horizon = 3\n[prior]\nmean = 0.0\nstd = 2.0\n\
                    [defaults]\na = 1.0\nb = 0.0\nr = 1.0\nc = 1.0\nd = 0.0\nq = 1.0\n";
        let spec = parse_model(text).unwrap();
        assert_eq!(spec.prior.variance, 4.0);
        assert_eq!(spec.steps.len(), 3);
        let mut unit = ModelSpec::<f64>::unit(3);
        unit.prior.variance = 4.0;
        assert_eq!(spec, unit);
    }

    #[test]
    fn steps_override_defaults() {
        let text = r#"
[prior]
mean = 1.5
variance = 0.25

[defaults]
a = 1.0
b = 0.0
r = 1.0
c = 1.0
d = 0.0
q = 1.0

[initial]
q = 0.5

[[steps]]
a = 0.9

[[steps]]
observed = false
b = -2
"#;
        let spec = parse_model(text).unwrap();
        assert_eq!(spec.horizon, 2);
        assert_eq!(spec.channel0.q, 0.5);
        assert_eq!(spec.steps[0].transition.a, 0.9);
        assert!(spec.steps[0].observed);
        assert!(!spec.steps[1].observed);
        assert_eq!(spec.steps[1].transition.b, -2.0);
        assert_eq!(validate(&spec), Ok(()));
    }

    #[test]
    fn malformed_configs_rejected() {
        let missing = "horizon = 1\n[prior]\nmean = 0.0\nvariance = 1.0\n";
        assert!(
            matches!(parse_model(missing), Err(ModelError::Config(m)) if m.contains("missing `c`"))
        );
        let both =
            "[prior]\nmean = 0.0\nvariance = 1.0\nstd = 1.0\n[initial]\nc=1.0\nd=0.0\nq=1.0\n";
        assert!(matches!(parse_model(both), Err(ModelError::Config(_))));
        let unknown = "[prior]\nmean = 0.0\nvariance = 1.0\nsigma = 2.0\n";
        assert!(matches!(parse_model(unknown), Err(ModelError::Config(_))));
    }

    #[test]
    fn horizon_mismatch_survives_parse_for_validate() {
        let text = "horizon = 4\n[prior]\nmean = 0.0\nvariance = 1.0\n\
                    [defaults]\na = 1.0\nb = 0.0\nr = 1.0\nc = 1.0\nd = 0.0\nq = 1.0\n\
                    [[steps]]\n[[steps]]\n";
        let spec = parse_model(text).unwrap();
        assert_eq!(spec.steps.len(), 2);
        assert!(validate(&spec).is_err());
    }

    #[test]
    fn observation_csv() {
        let obs = parse_observations("t,x\n0, 1.5\n2,-3e-4\n").unwrap();
        assert_eq!(obs.values, vec![(0, 1.5), (2, -3e-4)]);
        assert_eq!(render_observations(&obs), "t,x\n0,1.5\n2,-0.0003\n");
        assert!(parse_observations("time,x\n0,1\n").is_err());
        assert!(parse_observations("t,x\n0,abc\n").is_err());
    }

    #[test]
    fn numbers_render_shortest() {
        assert_eq!(fmt_num(1.0), "1.0");
        assert_eq!(fmt_num(0.1), "0.1");
        assert_eq!(fmt_num(1e-9), "1e-9");
        assert_eq!(fmt_num(1.0 / 3.0), "0.3333333333333333");
    }

    proptest! {
        #[test]
        fn config_round_trip(seed in any::<u64>(), flip in any::<u64>()) {
            let (mut spec, _) = RandomModel::default().sample(seed);
            for t in 0..=spec.horizon {
                if flip >> (t % 64) & 1 == 1 {
                    spec.set_observed(t, false);
                }
            }
            let reparsed = parse_model(&render_model(&spec)).unwrap();
            prop_assert_eq!(reparsed, spec);
        }

        #[test]
        fn observation_round_trip(xs in prop::collection::vec(-1e6..1e6f64, 0..20)) {
            let obs = ObservationSeries::dense(&xs);
            prop_assert_eq!(parse_observations(&render_observations(&obs)).unwrap(), obs);
        }
    }
}
