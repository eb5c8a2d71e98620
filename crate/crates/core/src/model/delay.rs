use serde::{Deserialize, Serialize};

use super::timefn::TimeFn;
use super::ModelError;

/// A delay `tau(t)` with departure point `d(t) = t - tau(t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DelaySpec {
    Constant {
        tau: f64,
    },
    Periodic {
        tau: TimeFn,
    },
    /// `tau = m * omega`; `omega` is filled from the scenario period.
    Multiple {
        m: u32,
        #[serde(default)]
        omega: f64,
    },
}

impl DelaySpec {
    pub fn constant(tau: f64) -> Self {
        DelaySpec::Constant { tau }
    }

    pub fn multiple(m: u32, omega: f64) -> Self {
        DelaySpec::Multiple { m, omega }
    }

    pub fn tau(&self, t: f64) -> f64 {
        match self {
            DelaySpec::Constant { tau } => *tau,
            DelaySpec::Periodic { tau } => tau.eval(t),
            DelaySpec::Multiple { m, omega } => *m as f64 * omega,
        }
    }

    pub fn departure(&self, t: f64) -> f64 {
        t - self.tau(t)
    }

    /// The delay value when it does not depend on time.
    pub fn fixed(&self) -> Option<f64> {
        match self {
            DelaySpec::Constant { tau } => Some(*tau),
            DelaySpec::Multiple { m, omega } => Some(*m as f64 * omega),
            DelaySpec::Periodic { tau } => match tau {
                TimeFn::Constant { value } => Some(*value),
                _ => None,
            },
        }
    }

    /// Integer multiple of the period, if the delay has that form.
    pub fn period_multiple(&self, omega: f64) -> Option<u32> {
        match self {
            DelaySpec::Multiple { m, .. } => Some(*m),
            _ => {
                let tau = self.fixed()?;
                let r = tau / omega;
                let m = r.round();
                ((r - m).abs() < 1e-12 && m >= 1.0).then_some(m as u32)
            }
        }
    }

    /// `(min, max)` of `tau` over `[lo, hi]`: exact for fixed delays, sampled
    /// on `points` cells per period otherwise.
    pub fn range(&self, lo: f64, hi: f64, points: usize) -> (f64, f64) {
        if let Some(t) = self.fixed() {
            return (t, t);
        }
        let DelaySpec::Periodic { tau } = self else {
            unreachable!()
        };
        let period = tau.period().filter(|p| *p > 0.0).unwrap_or(hi - lo);
        let span = (hi - lo).min(period).max(0.0);
        if span == 0.0 {
            let v = tau.eval(lo);
            return (v, v);
        }
        tau.grid_extrema(lo, lo + span, points)
    }

    /// Smallest `t >= s` with `d(t) >= s`, found by bisection.
    pub fn preimage(&self, s: f64) -> f64 {
        if let Some(tau) = self.fixed() {
            return s + tau;
        }
        let (_, hi_tau) = self.range(s, s + 1.0, 4096);
        let mut lo = s;
        let mut hi = s + hi_tau * 1.001 + 1e-12;
        while self.departure(hi) < s {
            hi += hi - lo;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.departure(mid) >= s {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }

    pub(crate) fn resolve(&mut self, omega: f64) {
        match self {
            DelaySpec::Multiple { omega: w, .. } => *w = omega,
            DelaySpec::Periodic { tau } => tau.resolve_period(omega),
            DelaySpec::Constant { .. } => {}
        }
    }

    /// Checks `tau >= 0` and that `d(t)` is non-decreasing on a grid of
    /// `points` cells over one period of the delay.
    pub(crate) fn validate(&self, field: &str, omega: f64, points: usize) -> Result<(), ModelError> {
        match self {
            DelaySpec::Constant { tau } if !(*tau >= 0.0 && tau.is_finite()) => {
                Err(ModelError::invalid(field, format!("delay must be finite and >= 0, got {tau}")))
            }
            DelaySpec::Multiple { m, .. } if *m == 0 => {
                Err(ModelError::invalid(field, "period multiple m must be a positive integer"))
            }
            DelaySpec::Periodic { tau } => {
                tau.validate(field)?;
                let period = match tau.period() {
                    Some(p) if p > 0.0 => p,
                    Some(_) => omega,
                    None => {
                        return Err(ModelError::invalid(field, "time-varying delays must be periodic"));
                    }
                };
                let n = points.max(16);
                let mut prev = f64::NEG_INFINITY;
                for j in 0..=n {
                    let t = period * j as f64 / n as f64;
                    let v = tau.eval(t);
                    if !(v >= 0.0) {
                        return Err(ModelError::invalid(field, format!("delay is negative ({v}) at t = {t}")));
                    }
                    let d = t - v;
                    if d < prev - 1e-12 * (1.0 + d.abs()) {
                        return Err(ModelError::invalid(
                            field,
                            format!("t - tau(t) decreases near t = {t}; it must be non-decreasing"),
                        ));
                    }
                    prev = d;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
