use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::delay::DelaySpec;
use super::impulse::piecewise_linear;
use super::timefn::TimeFn;
use super::ModelError;
use crate::quad::Side;
use crate::trajectory::PeriodicProfile;

/// `b(t) exp(-beta(t) x(t - tau(t)))` with `tau = delays[delay]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WazewskaTerm {
    pub b: TimeFn,
    pub beta: TimeFn,
    #[serde(default)]
    pub delay: usize,
}

/// `b(t) exp(-beta_outer(t) N*(t - tau)) [exp(-beta_inner(t) x(t - tau)) - 1]`,
/// the deviation from a periodic solution `N*`.
#[derive(Debug, Clone)]
pub struct TranslatedTerm {
    pub b: TimeFn,
    pub beta_outer: TimeFn,
    pub beta_inner: TimeFn,
    pub delay: usize,
}

/// Yorke bounds `-l1 M(phi) <= f_i <= l2 M(-phi)` for one delayed term.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct YorkeTerm {
    pub lambda1: TimeFn,
    pub lambda2: TimeFn,
    #[serde(default)]
    pub delay: usize,
}

/// The delayed functional `f(t, x_t)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Rhs {
    Zero,
    Wazewska {
        terms: Vec<WazewskaTerm>,
    },
    /// `g(x(t - tau))` with `g` piecewise linear through `(x, y)`, extended
    /// linearly beyond the end knots.
    PiecewiseLinear {
        #[serde(default)]
        delay: usize,
        x: Vec<f64>,
        y: Vec<f64>,
    },
    #[serde(skip)]
    Translated {
        terms: Vec<TranslatedTerm>,
        profile: Arc<PeriodicProfile>,
    },
}

impl Rhs {
    /// `g(x) = -slope * x` for `x <= 0`, `0` for `x > 0`.
    pub fn negative_feedback(slope: f64, delay: usize) -> Self {
        Rhs::PiecewiseLinear {
            delay,
            x: vec![-1.0, 0.0, 1.0],
            y: vec![slope, 0.0, 0.0],
        }
    }

    /// `g(x) = -k x`.
    pub fn linear_feedback(k: f64, delay: usize) -> Self {
        Rhs::PiecewiseLinear {
            delay,
            x: vec![-1.0, 1.0],
            y: vec![k, -k],
        }
    }

    pub fn eval(&self, t: f64, side: Side, delays: &[DelaySpec], past: &dyn Fn(f64, Side) -> f64) -> f64 {
        match self {
            Rhs::Zero => 0.0,
            Rhs::Wazewska { terms } => terms
                .iter()
                .map(|term| {
                    let lag = delays[term.delay].departure(t);
                    term.b.eval_side(t, side) * (-term.beta.eval_side(t, side) * past(lag, side)).exp()
                })
                .sum(),
            Rhs::PiecewiseLinear { delay, x, y } => piecewise_linear(x, y, past(delays[*delay].departure(t), side)),
            Rhs::Translated { terms, profile } => terms
                .iter()
                .map(|term| {
                    let lag = delays[term.delay].departure(t);
                    let level = term.beta_outer.eval_side(t, side) * profile.eval(lag, side);
                    let dev = term.beta_inner.eval_side(t, side) * past(lag, side);
                    term.b.eval_side(t, side) * (-level).exp() * (-dev).exp_m1()
                })
                .sum(),
        }
    }

    pub fn used_delays(&self) -> Vec<usize> {
        let mut v: Vec<usize> = match self {
            Rhs::Zero => Vec::new(),
            Rhs::Wazewska { terms } => terms.iter().map(|t| t.delay).collect(),
            Rhs::PiecewiseLinear { delay, .. } => vec![*delay],
            Rhs::Translated { terms, .. } => terms.iter().map(|t| t.delay).collect(),
        };
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Points in `[lo, hi]` where a coefficient may jump or kink.
    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Rhs::Wazewska { terms } => {
                for t in terms {
                    out.extend(t.b.breakpoints(lo, hi));
                    out.extend(t.beta.breakpoints(lo, hi));
                }
            }
            Rhs::Translated { terms, .. } => {
                for t in terms {
                    out.extend(t.b.breakpoints(lo, hi));
                    out.extend(t.beta_outer.breakpoints(lo, hi));
                    out.extend(t.beta_inner.breakpoints(lo, hi));
                }
            }
            _ => {}
        }
        out
    }

    /// True when every coefficient repeats with period `omega`.
    pub fn is_periodic_with(&self, omega: f64) -> bool {
        match self {
            Rhs::Zero | Rhs::PiecewiseLinear { .. } => true,
            Rhs::Wazewska { terms } => terms
                .iter()
                .all(|t| t.b.is_periodic_with(omega) && t.beta.is_periodic_with(omega)),
            Rhs::Translated { terms, .. } => terms.iter().all(|t| {
                t.b.is_periodic_with(omega) && t.beta_outer.is_periodic_with(omega) && t.beta_inner.is_periodic_with(omega)
            }),
        }
    }

    /// Yorke bounds implied by the functional's form, when it has one about
    /// the zero solution.
    pub fn derived_yorke(&self, delays: &[DelaySpec]) -> Option<Vec<YorkeTerm>> {
        match self {
            Rhs::Zero => Some(Vec::new()),
            Rhs::Wazewska { .. } => None,
            Rhs::PiecewiseLinear { delay, x, y } => {
                let (l1, l2) = piecewise_yorke(x, y)?;
                Some(vec![YorkeTerm {
                    lambda1: TimeFn::constant(l1),
                    lambda2: TimeFn::constant(l2),
                    delay: *delay,
                }])
            }
            Rhs::Translated { terms, profile } => Some(
                terms
                    .iter()
                    .map(|term| {
                        let (b, bo, bi) = (term.b.clone(), term.beta_outer.clone(), term.beta_inner.clone());
                        let d = delays[term.delay].clone();
                        let prof = profile.clone();
                        let period = common_period(&[&term.b, &term.beta_outer, &term.beta_inner], profile.omega);
                        let lambda1 = TimeFn::custom("translated lambda1", period, move |t, side| {
                            let level = bo.eval_side(t, side) * prof.eval(d.departure(t), side);
                            b.eval_side(t, side) * bi.eval_side(t, side) * (-level).exp()
                        });
                        let (b2, bi2) = (term.b.clone(), term.beta_inner.clone());
                        let lambda2 = TimeFn::custom("translated lambda2", period, move |t, side| {
                            b2.eval_side(t, side) * bi2.eval_side(t, side)
                        });
                        YorkeTerm {
                            lambda1,
                            lambda2,
                            delay: term.delay,
                        }
                    })
                    .collect(),
            ),
        }
    }

    pub(crate) fn validate(&self, n_delays: usize) -> Result<(), ModelError> {
        let check = |d: usize, field: String| {
            if d >= n_delays {
                Err(ModelError::invalid(field, format!("delay index {d} but only {n_delays} delays are declared")))
            } else {
                Ok(())
            }
        };
        match self {
            Rhs::Wazewska { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    check(t.delay, format!("rhs.terms[{i}].delay"))?;
                    t.b.validate(&format!("rhs.terms[{i}].b"))?;
                    t.beta.validate(&format!("rhs.terms[{i}].beta"))?;
                }
                Ok(())
            }
            Rhs::PiecewiseLinear { delay, x, y } => {
                check(*delay, "rhs.delay".into())?;
                if x.len() < 2 || x.len() != y.len() {
                    return Err(ModelError::invalid("rhs.x", "need at least two knots with matching y values"));
                }
                if x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::invalid("rhs.x", "knots must be strictly increasing"));
                }
                Ok(())
            }
            Rhs::Translated { terms, .. } => {
                for (i, t) in terms.iter().enumerate() {
                    check(t.delay, format!("rhs.terms[{i}].delay"))?;
                }
                Ok(())
            }
            Rhs::Zero => Ok(()),
        }
    }

    pub(crate) fn resolve(&mut self, omega: f64) {
        if let Rhs::Wazewska { terms } = self {
            for t in terms {
                t.b.resolve_period(omega);
                t.beta.resolve_period(omega);
            }
        }
    }
}

fn common_period(fns: &[&TimeFn], omega: f64) -> Option<f64> {
    fns.iter().all(|f| f.is_periodic_with(omega)).then_some(omega)
}

/// Smallest `(l1, l2)` with `-l1 max(0, x) <= g(x) <= l2 max(0, -x)` for a
/// piecewise-linear `g`, or `None` if `g` has the wrong sign somewhere.
fn piecewise_yorke(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let g0 = piecewise_linear(x, y, 0.0);
    if g0.abs() > 1e-15 {
        return None;
    }
    let n = x.len();
    let slope = |j: usize| (y[j + 1] - y[j]) / (x[j + 1] - x[j]);
    let slope_at = |u: f64, right: bool| {
        let j = x.partition_point(|&v| if right { v <= u } else { v < u });
        slope(j.saturating_sub(1).min(n - 2))
    };
    let mut l1 = 0.0f64;
    let mut l2 = 0.0f64;
    for (&u, &v) in x.iter().zip(y) {
        if u > 0.0 {
            if v > 1e-15 {
                return None;
            }
            l1 = l1.max(-v / u);
        } else if u < 0.0 {
            if v < -1e-15 {
                return None;
            }
            l2 = l2.max(v / -u);
        }
    }
    // ratios of linear pieces are monotone: remaining candidates are the
    // limits at 0 and at infinity
    let right0 = slope_at(0.0, true);
    let left0 = slope_at(0.0, false);
    let last = slope(n - 2);
    let first = slope(0);
    if last > 0.0 || first > 0.0 {
        return None;
    }
    l1 = l1.max(-right0).max(-last);
    l2 = l2.max(-left0).max(-first);
    Some((l1, l2))
}
