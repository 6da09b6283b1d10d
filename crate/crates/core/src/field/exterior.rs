//! Analytic models that make a sampled function defined on all of space.

use serde::{Deserialize, Serialize};

/// A one-dimensional profile in the last coordinate with limits at ±∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `lo + (hi - lo) (1 + tanh((t - center) / width)) / 2`
    Tanh { center: f64, width: f64, lo: f64, hi: f64 },
    /// Linear from `lo` at `-a` to `hi` at `a`, constant outside.
    Ramp { lo: f64, hi: f64, a: f64 },
    /// `lo` below `at`, `hi` from `at` on.
    Step { at: f64, lo: f64, hi: f64 },
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            Profile::Tanh { center, width, lo, hi } => lo + (hi - lo) * 0.5 * (1.0 + ((t - center) / width).tanh()),
            Profile::Ramp { lo, hi, a } => {
                if t <= -a {
                    lo
                } else if t >= a {
                    hi
                } else {
                    lo + (hi - lo) * (t + a) / (2.0 * a)
                }
            }
            Profile::Step { at, lo, hi } => {
                if t < at {
                    lo
                } else {
                    hi
                }
            }
        }
    }

    /// Limits at `-∞` and `+∞`.
    pub fn limits(&self) -> (f64, f64) {
        match *self {
            Profile::Tanh { lo, hi, .. } | Profile::Ramp { lo, hi, .. } | Profile::Step { lo, hi, .. } => (lo, hi),
        }
    }

    /// Interval outside of which the profile equals its limits to double precision.
    pub fn window(&self) -> (f64, f64) {
        match *self {
            Profile::Tanh { center, width, .. } => (center - 20.0 * width, center + 20.0 * width),
            Profile::Ramp { a, .. } => (-a, a),
            Profile::Step { at, .. } => (at, at),
        }
    }

    /// Length scale of the transition, used to size quadrature panels.
    pub fn feature_scale(&self) -> f64 {
        match *self {
            Profile::Tanh { width, .. } => width,
            Profile::Ramp { a, .. } => a,
            Profile::Step { .. } => f64::INFINITY,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match *self {
            Profile::Tanh { width, lo, hi, center } => {
                if !(width > 0.0) || !lo.is_finite() || !hi.is_finite() || !center.is_finite() {
                    return Err("tanh profile needs positive width and finite limits".into());
                }
            }
            Profile::Ramp { a, lo, hi } => {
                if !(a > 0.0) || !lo.is_finite() || !hi.is_finite() {
                    return Err("ramp profile needs a > 0 and finite limits".into());
                }
            }
            Profile::Step { at, lo, hi } => {
                if !at.is_finite() || !lo.is_finite() || !hi.is_finite() {
                    return Err("step profile needs finite parameters".into());
                }
            }
        }
        Ok(())
    }
}

/// Closed-form functions of the full position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Analytic {
    /// `amplitude * cos(wave · x + phase)`
    Cosine { wave: Vec<f64>, phase: f64, amplitude: f64 },
    /// `amplitude * (1 - |x - center|^2 / radius^2)_+^exponent`
    PowerBump { center: Vec<f64>, radius: f64, exponent: f64, amplitude: f64 },
    /// `amplitude * exp(-|x - center|^2 / width^2)`
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64 },
    /// `amplitude * (1 + |x|^2)^(exponent / 2)`
    PowerGrowth { exponent: f64, amplitude: f64 },
    Sum { terms: Vec<Analytic> },
}

impl Analytic {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Analytic::Cosine { wave, phase, amplitude } => {
                let d: f64 = wave.iter().zip(x).map(|(k, v)| k * v).sum();
                amplitude * (d + phase).cos()
            }
            Analytic::PowerBump { center, radius, exponent, amplitude } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                let q = 1.0 - r2 / (radius * radius);
                if q <= 0.0 {
                    0.0
                } else {
                    amplitude * q.powf(*exponent)
                }
            }
            Analytic::Gaussian { center, width, amplitude } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                amplitude * (-r2 / (width * width)).exp()
            }
            Analytic::PowerGrowth { exponent, amplitude } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                amplitude * (1.0 + r2).powf(0.5 * exponent)
            }
            Analytic::Sum { terms } => terms.iter().map(|t| t.eval(x)).sum(),
        }
    }

    pub fn growth_class(&self) -> f64 {
        match self {
            Analytic::PowerGrowth { exponent, .. } => exponent.max(0.0),
            Analytic::Sum { terms } => terms.iter().map(|t| t.growth_class()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// Ball outside of which the function vanishes identically.
    pub fn support(&self) -> Option<(Vec<f64>, f64)> {
        match self {
            Analytic::PowerBump { center, radius, .. } => Some((center.clone(), *radius)),
            _ => None,
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            Analytic::Cosine { wave, .. } if wave.len() != n => Err(format!("cosine wave vector must have {n} components")),
            Analytic::PowerBump { center, radius, exponent, .. } => {
                if center.len() != n {
                    Err(format!("bump center must have {n} components"))
                } else if !(*radius > 0.0) || *exponent < 0.0 {
                    Err("bump needs positive radius and nonnegative exponent".into())
                } else {
                    Ok(())
                }
            }
            Analytic::Gaussian { center, width, .. } => {
                if center.len() != n {
                    Err(format!("gaussian center must have {n} components"))
                } else if !(*width > 0.0) {
                    Err("gaussian width must be positive".into())
                } else {
                    Ok(())
                }
            }
            Analytic::Sum { terms } => terms.iter().try_for_each(|t| t.validate(n)),
            _ => Ok(()),
        }
    }
}

/// How a function is continued outside the sampled hull.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExteriorModel {
    Zero,
    Constant { value: f64 },
    /// Function of the last coordinate only.
    VerticalProfile { profile: Profile },
    ClosedForm { form: Analytic },
    /// `inner(x + tau e_n)`
    Shifted { inner: Box<ExteriorModel>, tau: f64 },
    /// `Σ c_i m_i(x)`
    Combination { terms: Vec<(f64, ExteriorModel)> },
    /// `max(inner(x), 0)`
    PositivePart { inner: Box<ExteriorModel> },
}

/// Summary of a model that depends on the last coordinate only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalInfo {
    pub lower_limit: f64,
    pub upper_limit: f64,
    /// Outside `[window.0, window.1]` the model equals its limits.
    pub window: (f64, f64),
    pub feature_scale: f64,
}

impl ExteriorModel {
    pub fn constant(value: f64) -> Self {
        ExteriorModel::Constant { value }
    }

    pub fn profile(profile: Profile) -> Self {
        ExteriorModel::VerticalProfile { profile }
    }

    pub fn closed_form(form: Analytic) -> Self {
        ExteriorModel::ClosedForm { form }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExteriorModel::Zero => 0.0,
            ExteriorModel::Constant { value } => *value,
            ExteriorModel::VerticalProfile { profile } => profile.eval(x[x.len() - 1]),
            ExteriorModel::ClosedForm { form } => form.eval(x),
            ExteriorModel::Shifted { inner, tau } => {
                let n = x.len();
                if n <= 4 {
                    let mut buf = [0.0; 4];
                    buf[..n].copy_from_slice(x);
                    buf[n - 1] += tau;
                    inner.eval(&buf[..n])
                } else {
                    let mut y = x.to_vec();
                    y[n - 1] += tau;
                    inner.eval(&y)
                }
            }
            ExteriorModel::Combination { terms } => terms.iter().map(|(c, m)| c * m.eval(x)).sum(),
            ExteriorModel::PositivePart { inner } => inner.eval(x).max(0.0),
        }
    }

    /// `u(x', x_n + tau)`; nested shifts are merged.
    pub fn shifted(&self, tau: f64) -> ExteriorModel {
        match self {
            ExteriorModel::Zero | ExteriorModel::Constant { .. } => self.clone(),
            ExteriorModel::Shifted { inner, tau: t0 } => ExteriorModel::Shifted { inner: inner.clone(), tau: t0 + tau },
            _ if tau == 0.0 => self.clone(),
            _ => ExteriorModel::Shifted { inner: Box::new(self.clone()), tau },
        }
    }

    pub fn linear_combination(a: f64, u: &ExteriorModel, b: f64, v: &ExteriorModel) -> ExteriorModel {
        match (u, v) {
            (ExteriorModel::Zero, ExteriorModel::Zero) => ExteriorModel::Zero,
            (ExteriorModel::Constant { value: x }, ExteriorModel::Constant { value: y }) => {
                ExteriorModel::Constant { value: a * x + b * y }
            }
            _ => ExteriorModel::Combination { terms: vec![(a, u.clone()), (b, v.clone())] },
        }
    }

    pub fn positive_part(&self) -> ExteriorModel {
        match self {
            ExteriorModel::Zero => ExteriorModel::Zero,
            ExteriorModel::Constant { value } => ExteriorModel::Constant { value: value.max(0.0) },
            _ => ExteriorModel::PositivePart { inner: Box::new(self.clone()) },
        }
    }

    /// Declared growth exponent `α` with `|u(y)| <= C (1 + |y|)^α`.
    pub fn growth_class(&self) -> f64 {
        match self {
            ExteriorModel::ClosedForm { form } => form.growth_class(),
            ExteriorModel::Shifted { inner, .. } | ExteriorModel::PositivePart { inner } => inner.growth_class(),
            ExteriorModel::Combination { terms } => terms.iter().map(|(_, m)| m.growth_class()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }

    /// `Some` when the model depends on the last coordinate only.
    pub fn vertical_info(&self) -> Option<VerticalInfo> {
        match self {
            ExteriorModel::Zero => Some(VerticalInfo::flat(0.0)),
            ExteriorModel::Constant { value } => Some(VerticalInfo::flat(*value)),
            ExteriorModel::VerticalProfile { profile } => {
                let (lo, hi) = profile.limits();
                Some(VerticalInfo {
                    lower_limit: lo,
                    upper_limit: hi,
                    window: profile.window(),
                    feature_scale: profile.feature_scale(),
                })
            }
            ExteriorModel::ClosedForm { .. } => None,
            ExteriorModel::Shifted { inner, tau } => inner.vertical_info().map(|v| VerticalInfo {
                window: (v.window.0 - tau, v.window.1 - tau),
                ..v
            }),
            ExteriorModel::Combination { terms } => {
                let mut acc = VerticalInfo::flat(0.0);
                acc.window = (f64::INFINITY, f64::NEG_INFINITY);
                for (c, m) in terms {
                    let v = m.vertical_info()?;
                    acc.lower_limit += c * v.lower_limit;
                    acc.upper_limit += c * v.upper_limit;
                    acc.window = (acc.window.0.min(v.window.0), acc.window.1.max(v.window.1));
                    acc.feature_scale = acc.feature_scale.min(v.feature_scale);
                }
                Some(acc)
            }
            ExteriorModel::PositivePart { inner } => inner.vertical_info().map(|v| VerticalInfo {
                lower_limit: v.lower_limit.max(0.0),
                upper_limit: v.upper_limit.max(0.0),
                ..v
            }),
        }
    }

    /// Evaluate a vertical model at last coordinate `t`.
    pub fn eval_vertical(&self, t: f64) -> f64 {
        match self {
            ExteriorModel::Zero => 0.0,
            ExteriorModel::Constant { value } => *value,
            ExteriorModel::VerticalProfile { profile } => profile.eval(t),
            ExteriorModel::ClosedForm { form } => form.eval(&[t]),
            ExteriorModel::Shifted { inner, tau } => inner.eval_vertical(t + tau),
            ExteriorModel::Combination { terms } => terms.iter().map(|(c, m)| c * m.eval_vertical(t)).sum(),
            ExteriorModel::PositivePart { inner } => inner.eval_vertical(t).max(0.0),
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), String> {
        match self {
            ExteriorModel::Constant { value } if !value.is_finite() => Err("constant exterior must be finite".into()),
            ExteriorModel::VerticalProfile { profile } => profile.validate(),
            ExteriorModel::ClosedForm { form } => form.validate(n),
            ExteriorModel::Shifted { inner, tau } => {
                if !tau.is_finite() {
                    return Err("shift must be finite".into());
                }
                inner.validate(n)
            }
            ExteriorModel::Combination { terms } => terms.iter().try_for_each(|(_, m)| m.validate(n)),
            ExteriorModel::PositivePart { inner } => inner.validate(n),
            _ => Ok(()),
        }
    }
}

impl VerticalInfo {
    fn flat(v: f64) -> Self {
        Self { lower_limit: v, upper_limit: v, window: (f64::INFINITY, f64::NEG_INFINITY), feature_scale: f64::INFINITY }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_limits_and_window() {
        let p = Profile::Tanh { center: 0.0, width: 0.5, lo: -1.0, hi: 1.0 };
        let (a, b) = p.window();
        assert_eq!(p.eval(b + 1.0), 1.0);
        assert_eq!(p.eval(a - 1.0), -1.0);
        let r = Profile::Ramp { lo: -1.0, hi: 1.0, a: 2.0 };
        assert_eq!(r.eval(0.0), 0.0);
        assert_eq!(r.eval(5.0), 1.0);
    }

    #[test]
    fn shift_merges() {
        let m = ExteriorModel::profile(Profile::Ramp { lo: -1.0, hi: 1.0, a: 2.0 });
        let s = m.shifted(0.5).shifted(0.25);
        match &s {
            ExteriorModel::Shifted { tau, .. } => assert_eq!(*tau, 0.75),
            _ => panic!("expected shifted"),
        }
        assert_eq!(s.eval(&[0.0]), m.eval(&[0.75]));
        let info = s.vertical_info().unwrap();
        assert_eq!(info.window, (-2.75, 1.25));
    }

    #[test]
    fn combination_vertical_limits() {
        let m = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
        let d = ExteriorModel::linear_combination(1.0, &m.shifted(2.0), -1.0, &m);
        let v = d.vertical_info().unwrap();
        assert_eq!(v.lower_limit, 0.0);
        assert_eq!(v.upper_limit, 0.0);
        assert!(d.eval(&[0.3]) > 0.0);
    }

    #[test]
    fn growth_class() {
        let g = ExteriorModel::closed_form(Analytic::PowerGrowth { exponent: 0.4, amplitude: 1.0 });
        assert_eq!(g.growth_class(), 0.4);
        assert_eq!(ExteriorModel::Zero.growth_class(), 0.0);
    }

    #[test]
    fn serde_shape() {
        let m = ExteriorModel::profile(Profile::Tanh { center: 0.0, width: 1.0, lo: -1.0, hi: 1.0 });
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(
            s,
            r#"{"kind":"vertical_profile","profile":{"kind":"tanh","center":0.0,"width":1.0,"lo":-1.0,"hi":1.0}}"#
        );
        let back: ExteriorModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<ExteriorModel>(r#"{"kind":"constant","value":1.0,"extra":1}"#).is_err());
    }
}
