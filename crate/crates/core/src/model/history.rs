use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::impulse::piecewise_linear;
use super::timefn::TimeFn;
use super::ModelError;
use crate::quad::Side;
use crate::trajectory::PeriodicProfile;

const FUNCTION_SUP_SAMPLES: usize = 4096;

/// Initial data `x(s)` for `s <= t0`, in absolute time.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum History {
    Constant {
        value: f64,
    },
    Function {
        f: TimeFn,
    },
    /// Linear interpolation through `(t, values)`.
    Tabulated {
        t: Vec<f64>,
        values: Vec<f64>,
    },
    /// `scale * profile(s)` for a periodic profile.
    #[serde(skip)]
    Profile {
        profile: Arc<PeriodicProfile>,
        scale: f64,
    },
    /// `base(s) + weight * profile(s)`.
    #[serde(skip)]
    Combined {
        base: Box<History>,
        profile: Arc<PeriodicProfile>,
        weight: f64,
    },
}

impl History {
    pub fn constant(value: f64) -> Self {
        History::Constant { value }
    }

    pub fn eval(&self, t: f64, side: Side) -> f64 {
        match self {
            History::Constant { value } => *value,
            History::Function { f } => f.eval_side(t, side),
            History::Tabulated { t: ts, values } => {
                if ts.len() == 1 {
                    values[0]
                } else {
                    piecewise_linear(ts, values, t)
                }
            }
            History::Profile { profile, scale } => scale * profile.eval(t, side),
            History::Combined { base, profile, weight } => base.eval(t, side) + weight * profile.eval(t, side),
        }
    }

    /// Unclipped sup of `sign * x` over `[lo, hi]`.
    pub fn sup(&self, lo: f64, hi: f64, sign: f64) -> f64 {
        match self {
            History::Constant { value } => sign * value,
            History::Tabulated { t, values } => {
                let mut best = (sign * self.eval(lo, Side::Left)).max(sign * self.eval(hi, Side::Left));
                for (tj, v) in t.iter().zip(values) {
                    if *tj > lo && *tj < hi {
                        best = best.max(sign * v);
                    }
                }
                best
            }
            History::Function { f } => {
                let mut best = (sign * f.eval_side(lo, Side::Right)).max(sign * f.eval(hi));
                for j in 1..FUNCTION_SUP_SAMPLES {
                    let t = lo + (hi - lo) * j as f64 / FUNCTION_SUP_SAMPLES as f64;
                    best = best.max(sign * f.eval(t));
                }
                for b in f.breakpoints(lo, hi) {
                    best = best.max(sign * f.eval_side(b, Side::Left)).max(sign * f.eval_side(b, Side::Right));
                }
                best
            }
            History::Profile { profile, scale } => {
                if *scale >= 0.0 {
                    scale * profile.sup(lo, hi, sign)
                } else {
                    -scale * profile.sup(lo, hi, -sign)
                }
            }
            History::Combined { .. } => {
                let mut pts: Vec<f64> = (0..=FUNCTION_SUP_SAMPLES)
                    .map(|j| lo + (hi - lo) * j as f64 / FUNCTION_SUP_SAMPLES as f64)
                    .collect();
                pts.extend(self.kinks(lo, hi));
                pts.iter()
                    .map(|&t| (sign * self.eval(t, Side::Left)).max(sign * self.eval(t, Side::Right)))
                    .fold(f64::NEG_INFINITY, f64::max)
            }
        }
    }

    /// Points in `[lo, hi]` where the history is not smooth; they seed the
    /// discontinuity propagation of the integrator.
    pub fn kinks(&self, lo: f64, hi: f64) -> Vec<f64> {
        match self {
            History::Tabulated { t, .. } => t.iter().copied().filter(|&s| s >= lo && s <= hi).collect(),
            History::Function { f } => f.breakpoints(lo, hi),
            History::Combined { base, profile, .. } => {
                let mut out = base.kinks(lo, hi);
                out.extend(profile_jumps(profile, lo, hi));
                out
            }
            History::Profile { profile, .. } => profile_jumps(profile, lo, hi),
            History::Constant { .. } => Vec::new(),
        }
    }

    pub(crate) fn resolve(&mut self, omega: f64) {
        if let History::Function { f } = self {
            f.resolve_period(omega);
        }
    }

    pub(crate) fn validate(&self, lo: f64, hi: f64) -> Result<(), ModelError> {
        match self {
            History::Constant { value } if !value.is_finite() => {
                Err(ModelError::invalid("history.value", "history value must be finite"))
            }
            History::Function { f } => f.validate("history.f"),
            History::Tabulated { t, values } => {
                if t.is_empty() || t.len() != values.len() {
                    return Err(ModelError::invalid("history", "t and values must be non-empty and of equal length"));
                }
                if t.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::invalid("history.t", "history times must be strictly increasing"));
                }
                if t.len() > 1 && (t[0] > lo + 1e-12 || t[t.len() - 1] < hi - 1e-12) {
                    return Err(ModelError::invalid(
                        "history.t",
                        format!(
                            "history covers [{}, {}] but the window [{lo}, {hi}] is required",
                            t[0],
                            t[t.len() - 1]
                        ),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

fn profile_jumps(profile: &PeriodicProfile, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let w = profile.omega;
    let mut q = (lo / w).floor();
    while q * w <= hi {
        for j in profile.jumps() {
            let t = q * w + j.t;
            if t >= lo && t <= hi {
                out.push(t);
            }
        }
        q += 1.0;
    }
    out
}
