use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::impulse::ImpulseTimes;
use super::ModelError;
use crate::quad::{self, Side};

/// Closed-form expression in the time variable `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Expr {
    Const { value: f64 },
    Time,
    Add { args: Vec<Expr> },
    Mul { args: Vec<Expr> },
    Div { num: Box<Expr>, den: Box<Expr> },
    Pow { base: Box<Expr>, exponent: f64 },
    Exp { arg: Box<Expr> },
    Sin { arg: Box<Expr> },
    Cos { arg: Box<Expr> },
    Neg { arg: Box<Expr> },
}

impl Expr {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Expr::Const { value } => *value,
            Expr::Time => t,
            Expr::Add { args } => args.iter().map(|e| e.eval(t)).sum(),
            Expr::Mul { args } => args.iter().map(|e| e.eval(t)).product(),
            Expr::Div { num, den } => num.eval(t) / den.eval(t),
            Expr::Pow { base, exponent } => base.eval(t).powf(*exponent),
            Expr::Exp { arg } => arg.eval(t).exp(),
            Expr::Sin { arg } => arg.eval(t).sin(),
            Expr::Cos { arg } => arg.eval(t).cos(),
            Expr::Neg { arg } => -arg.eval(t),
        }
    }

    fn depends_on_time(&self) -> bool {
        match self {
            Expr::Const { .. } => false,
            Expr::Time => true,
            Expr::Add { args } | Expr::Mul { args } => args.iter().any(Expr::depends_on_time),
            Expr::Div { num, den } => num.depends_on_time() || den.depends_on_time(),
            Expr::Pow { base, .. } => base.depends_on_time(),
            Expr::Exp { arg } | Expr::Sin { arg } | Expr::Cos { arg } | Expr::Neg { arg } => arg.depends_on_time(),
        }
    }

    pub fn constant(value: f64) -> Self {
        Expr::Const { value }
    }

    /// `scale * (t + shift)^power`
    pub fn shifted_power(scale: f64, shift: f64, power: f64) -> Self {
        Expr::Mul {
            args: vec![
                Expr::Const { value: scale },
                Expr::Pow {
                    base: Box::new(Expr::Add {
                        args: vec![Expr::Time, Expr::Const { value: shift }],
                    }),
                    exponent: power,
                },
            ],
        }
    }
}

/// Piecewise-constant product of per-impulse factors:
/// `prod_{k : origin <= t_k < t - shift} factors[k]` (with `<=` on the right
/// for the right-hand limit).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseProduct {
    pub times: ImpulseTimes,
    pub factors: Vec<f64>,
    #[serde(default)]
    pub shift: f64,
    #[serde(default)]
    pub origin: f64,
}

impl ImpulseProduct {
    pub fn value(&self, t: f64, side: Side) -> f64 {
        let mut upper = t - self.shift;
        if self.times.is_empty() {
            return 1.0;
        }
        let tol = 1e-11 * (1.0 + t.abs());
        if let Some(&(_, tk)) = self.times.in_range(upper - tol, upper + tol, true, true).first() {
            upper = tk;
        }
        if upper < self.origin {
            return 1.0;
        }
        let closed_hi = side == Side::Right;
        self.times
            .in_range(self.origin, upper, true, closed_hi)
            .into_iter()
            .map(|(k, _)| self.factors[self.times.base_index(k)])
            .product()
    }

    /// Times in `[lo, hi]` where the product can jump.
    pub fn jumps(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.times
            .in_range(self.origin, hi - self.shift, true, true)
            .into_iter()
            .map(|(_, t)| t + self.shift)
            .filter(|&t| t >= lo && t <= hi)
            .collect()
    }
}

/// An opaque programmatic coefficient. Not serializable.
#[derive(Clone)]
pub struct CustomFn {
    pub name: String,
    pub period: Option<f64>,
    pub eval: Arc<dyn Fn(f64, Side) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomFn({})", self.name)
    }
}

/// A coefficient function of time.
///
/// `Trig` and `Tabulated` are periodic; a zero `period` in a configuration file
/// means "the scenario period" and is filled in when the scenario is built.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeFn {
    Constant {
        value: f64,
    },
    /// `mean + sum_j cos[j] cos(2 pi (j+1) t / period) + sin[j] sin(2 pi (j+1) t / period)`
    Trig {
        #[serde(default)]
        period: f64,
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Equally spaced samples over one period, linearly interpolated with wrap-around.
    Tabulated {
        #[serde(default)]
        period: f64,
        samples: Vec<f64>,
    },
    /// Polynomial ratio `sum num[j] t^j / sum den[j] t^j`.
    Rational {
        num: Vec<f64>,
        den: Vec<f64>,
    },
    Expr {
        expr: Expr,
    },
    /// `base(t) * factor(t)` with a piecewise-constant impulse product factor.
    Scaled {
        base: Box<TimeFn>,
        factor: ImpulseProduct,
    },
    #[serde(skip)]
    Custom(CustomFn),
}

impl TimeFn {
    pub fn constant(value: f64) -> Self {
        TimeFn::Constant { value }
    }

    pub fn trig(period: f64, mean: f64, cos: Vec<f64>, sin: Vec<f64>) -> Self {
        TimeFn::Trig {
            period,
            mean,
            cos,
            sin,
        }
    }

    pub fn custom(
        name: impl Into<String>,
        period: Option<f64>,
        f: impl Fn(f64, Side) -> f64 + Send + Sync + 'static,
    ) -> Self {
        TimeFn::Custom(CustomFn {
            name: name.into(),
            period,
            eval: Arc::new(f),
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_side(t, Side::Left)
    }

    pub fn eval_side(&self, t: f64, side: Side) -> f64 {
        match self {
            TimeFn::Constant { value } => *value,
            TimeFn::Trig {
                period,
                mean,
                cos,
                sin,
            } => {
                let phase = TAU * reduce(t, *period) / period;
                let mut v = *mean;
                for (j, c) in cos.iter().enumerate() {
                    v += c * ((j + 1) as f64 * phase).cos();
                }
                for (j, s) in sin.iter().enumerate() {
                    v += s * ((j + 1) as f64 * phase).sin();
                }
                v
            }
            TimeFn::Tabulated { period, samples } => {
                let n = samples.len();
                let x = reduce(t, *period) / period * n as f64;
                let j = (x.floor() as usize).min(n - 1);
                let frac = x - j as f64;
                let next = samples[(j + 1) % n];
                samples[j] + frac * (next - samples[j])
            }
            TimeFn::Rational { num, den } => horner(num, t) / horner(den, t),
            TimeFn::Expr { expr } => expr.eval(t),
            TimeFn::Scaled { base, factor } => base.eval_side(t, side) * factor.value(t, side),
            TimeFn::Custom(c) => (c.eval)(t, side),
        }
    }

    /// `Some(period)` for periodic representations; `None` for general
    /// closed forms. Constants report `Some(0.0)` (any period).
    pub fn period(&self) -> Option<f64> {
        match self {
            TimeFn::Constant { .. } => Some(0.0),
            TimeFn::Trig { period, .. } | TimeFn::Tabulated { period, .. } => Some(*period),
            TimeFn::Rational { num, den } => (num.len() <= 1 && den.len() <= 1).then_some(0.0),
            TimeFn::Expr { expr } => (!expr.depends_on_time()).then_some(0.0),
            TimeFn::Scaled { .. } => None,
            TimeFn::Custom(c) => c.period,
        }
    }

    /// True when the function repeats with period `omega` (or a divisor of it).
    pub fn is_periodic_with(&self, omega: f64) -> bool {
        match self.period() {
            Some(p) if p == 0.0 => true,
            Some(p) => {
                let ratio = omega / p;
                (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0
            }
            None => false,
        }
    }

    pub(crate) fn resolve_period(&mut self, omega: f64) {
        match self {
            TimeFn::Trig { period, .. } | TimeFn::Tabulated { period, .. } if *period == 0.0 => *period = omega,
            TimeFn::Scaled { base, .. } => base.resolve_period(omega),
            _ => {}
        }
    }

    pub(crate) fn validate(&self, field: &str) -> Result<(), ModelError> {
        match self {
            TimeFn::Trig { period, .. } | TimeFn::Tabulated { period, .. } if !(*period > 0.0) => {
                Err(ModelError::invalid(field, format!("period must be positive, got {period}")))
            }
            TimeFn::Tabulated { samples, .. } if samples.is_empty() => {
                Err(ModelError::invalid(field, "tabulated function needs at least one sample"))
            }
            TimeFn::Rational { den, .. } if den.is_empty() => {
                Err(ModelError::invalid(field, "rational denominator is empty"))
            }
            TimeFn::Scaled { base, factor } => {
                if factor.factors.len() != factor.times.per_period() {
                    return Err(ModelError::invalid(field, "one factor per impulse instant is required"));
                }
                base.validate(field)
            }
            _ => Ok(()),
        }
    }

    /// Points in `[lo, hi]` where the function or its derivative may be
    /// discontinuous.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            TimeFn::Tabulated { period, samples } => {
                let n = samples.len();
                let dt = period / n as f64;
                let first = (lo / dt).ceil() as i64;
                let last = (hi / dt).floor() as i64;
                (first..=last).map(|j| j as f64 * dt).collect()
            }
            TimeFn::Scaled { base, factor } => {
                let mut v = base.breakpoints(lo, hi);
                v.extend(factor.jumps(lo, hi));
                v
            }
            _ => Vec::new(),
        }
    }

    /// `int_lo^hi f(u) du`, exact for constant, trigonometric and tabulated
    /// representations and by Simpson quadrature otherwise.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if hi == lo {
            return 0.0;
        }
        match self {
            TimeFn::Constant { value } => value * (hi - lo),
            TimeFn::Trig { .. } | TimeFn::Tabulated { .. } => self.antiderivative(hi) - self.antiderivative(lo),
            _ => {
                let (a, b, sign) = if lo < hi { (lo, hi, 1.0) } else { (hi, lo, -1.0) };
                let breaks = self.breakpoints(a, b);
                let f = |t: f64, side: Side| self.eval_side(t, side);
                sign * quad::simpson_piecewise(&f, a, b, &breaks, 1e-13)
                    .expect("coefficient integral did not converge")
            }
        }
    }

    fn antiderivative(&self, t: f64) -> f64 {
        match self {
            TimeFn::Trig {
                period,
                mean,
                cos,
                sin,
            } => {
                // periodic part evaluated on the reduced time, secular part exact
                let phase = TAU * reduce(t, *period) / period;
                let mut v = mean * t;
                for (j, c) in cos.iter().enumerate() {
                    let w = (j + 1) as f64;
                    v += c * (w * phase).sin() * period / (TAU * w);
                }
                for (j, s) in sin.iter().enumerate() {
                    let w = (j + 1) as f64;
                    v -= s * (w * phase).cos() * period / (TAU * w);
                }
                v
            }
            TimeFn::Tabulated { period, samples } => {
                let n = samples.len();
                let dt = period / n as f64;
                let full: f64 = samples.iter().sum::<f64>() * dt;
                let q = (t / period).floor();
                let r = t - q * period;
                let x = r / dt;
                let j = (x.floor() as usize).min(n - 1);
                let mut acc = 0.0;
                for i in 0..j {
                    acc += 0.5 * (samples[i] + samples[(i + 1) % n]) * dt;
                }
                let frac = x - j as f64;
                let next = samples[(j + 1) % n];
                acc += dt * (samples[j] * frac + 0.5 * (next - samples[j]) * frac * frac);
                q * full + acc
            }
            _ => unreachable!("antiderivative only for periodic closed forms"),
        }
    }

    /// Minimum and maximum over a uniform grid on `[lo, hi]`.
    pub fn grid_extrema(&self, lo: f64, hi: f64, points: usize) -> (f64, f64) {
        let n = points.max(2);
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for j in 0..=n {
            let t = lo + (hi - lo) * j as f64 / n as f64;
            for side in [Side::Left, Side::Right] {
                let v = self.eval_side(t, side);
                mn = mn.min(v);
                mx = mx.max(v);
            }
        }
        (mn, mx)
    }
}

fn horner(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * t + a)
}

/// `t mod period` in `[0, period)`.
pub(crate) fn reduce(t: f64, period: f64) -> f64 {
    let r = t - period * (t / period).floor();
    if r >= period {
        r - period
    } else if r < 0.0 {
        r + period
    } else {
        r
    }
}
