//! Changes of variables that trade impulses for piecewise-continuous
//! coefficients.

use thiserror::Error;

use crate::model::{
    History, ImpulseMap, ImpulseProduct, ImpulseSchedule, ImpulseTimes, Rhs, Scenario, TimeFn,
    TranslatedTerm, WazewskaTerm,
};
use crate::quad::{simpson_piecewise, Side};
use crate::trajectory::{JumpRecord, Segment, Trajectory};
use crate::wazewska::{PeriodicSolution, WazewskaModel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("impulse {k} at t = {t} is singular: u + I(u) = 0 for u = {u}")]
    Singular { k: usize, t: f64, u: f64 },
    #[error("transformed function jumps by {gap:e} at t = {t}, above the tolerance {tol:e}")]
    Discontinuous { t: f64, gap: f64, tol: f64 },
    #[error("impulse {index} is not linear; this transform needs I(u) = b u")]
    NonLinear { index: usize },
    #[error("delay {index} is not an integer multiple of the period")]
    NotMultiple { index: usize },
    #[error("invalid input: {0}")]
    Invalid(String),
}

/// Continuity tolerance `abs + rel * |left|` for certified transforms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuity {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Continuity {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10 }
    }
}

impl Continuity {
    fn bound(&self, left: f64) -> f64 {
        self.abs + self.rel * left.abs()
    }
}

/// `u / (u + I(u))`.
pub fn j_factor(map: &ImpulseMap, u: f64) -> Result<f64, TransformError> {
    let after = u + map.apply(u);
    if u == 0.0 || after == 0.0 {
        return Err(TransformError::Singular { k: 0, t: f64::NAN, u });
    }
    Ok(u / after)
}

/// A continuous function `y = factor(t) x(t)` with the factor piecewise
/// constant between impulse instants.
#[derive(Debug, Clone)]
pub struct TransformedTrajectory {
    pub y: Trajectory,
    /// Impulse instants crossed, in order.
    pub instants: Vec<f64>,
    /// Per-impulse factors (`J_k(x(t_k))`, or `1/(1+b_k)` for linear impulses).
    pub step_factors: Vec<f64>,
    /// `interval_factors[i]` multiplies `x` after the `i`-th instant;
    /// `interval_factors[0] = 1` before the first one.
    pub interval_factors: Vec<f64>,
    /// `|y(t_k+) - y(t_k)|` at each instant.
    pub jump_gaps: Vec<f64>,
}

impl TransformedTrajectory {
    /// Product of the step factors for instants strictly before `t` (or up to
    /// and including `t` for the right limit).
    pub fn factor_at(&self, t: f64, side: Side) -> f64 {
        let tol = crate::trajectory::SNAP_REL * (1.0 + t.abs());
        let n = match side {
            Side::Left => self.instants.partition_point(|&s| s < t - tol),
            Side::Right => self.instants.partition_point(|&s| s <= t + tol),
        };
        self.interval_factors[n]
    }

    /// `x(t) = y(t) / factor(t)`.
    pub fn reconstruct(&self, t: f64, side: Side) -> f64 {
        self.y.eval_unchecked(t, side) / self.factor_at(t, side)
    }

    /// `x` as a trajectory with its jumps restored.
    pub fn reconstruct_trajectory(&self) -> Trajectory {
        let mut out = Trajectory::new(self.y.history.clone(), self.y.t0, self.y.window_start);
        out.breakpoints = self.y.breakpoints.clone();
        let mut next = 0usize;
        for seg in &self.y.dense.segments {
            let c = self.factor_at(seg.t0, Side::Right);
            out.dense.segments.push(Segment {
                x0: seg.x0 / c,
                x1: seg.x1 / c,
                d0: seg.d0 / c,
                d1: seg.d1 / c,
                ..*seg
            });
            if next < self.instants.len() && (self.instants[next] - seg.t1).abs() <= 1e-12 * (1.0 + seg.t1.abs()) {
                out.dense.jumps.push(JumpRecord {
                    k: next + 1,
                    t: seg.t1,
                    left: seg.x1 / self.interval_factors[next],
                    right: seg.x1 / self.interval_factors[next + 1],
                });
                next += 1;
            }
        }
        out
    }

    pub fn max_jump_gap(&self) -> f64 {
        self.jump_gaps.iter().fold(0.0, |m, &g| m.max(g))
    }
}

/// Fresh product of `steps[..n]`, one per interval.
fn interval_products(steps: &[f64]) -> Vec<f64> {
    (0..=steps.len()).map(|n| steps[..n].iter().product()).collect()
}

/// Rescales `x` on each inter-impulse interval so the jumps cancel.
fn rescale(x: &Trajectory, instants: Vec<f64>, steps: Vec<f64>, tol: Continuity) -> Result<TransformedTrajectory, TransformError> {
    let interval_factors = interval_products(&steps);
    let mut y = Trajectory::new(x.history.clone(), x.t0, x.window_start);
    y.breakpoints = x.breakpoints.clone();
    let mut n = 0usize;
    let mut jump_gaps = Vec::with_capacity(instants.len());
    for seg in &x.dense.segments {
        let c = interval_factors[n];
        y.dense.segments.push(Segment {
            x0: seg.x0 * c,
            x1: seg.x1 * c,
            d0: seg.d0 * c,
            d1: seg.d1 * c,
            ..*seg
        });
        if n < instants.len() && instants[n] == seg.t1 {
            let j = &x.dense.jumps[n];
            let left = j.left * interval_factors[n];
            let right = j.right * interval_factors[n + 1];
            let gap = (right - left).abs();
            let bound = tol.bound(left);
            if !(gap <= bound) {
                return Err(TransformError::Discontinuous { t: j.t, gap, tol: bound });
            }
            jump_gaps.push(gap);
            n += 1;
        }
    }
    Ok(TransformedTrajectory {
        y,
        instants,
        step_factors: steps,
        interval_factors,
        jump_gaps,
    })
}

/// `y(t) = prod_{t0 <= t_k < t} J_k(x(t_k)) x(t)`: a continuous function
/// carrying the same information as the impulsive solution `x`.
pub fn remove_impulses(x: &Trajectory, schedule: &ImpulseSchedule) -> Result<TransformedTrajectory, TransformError> {
    remove_impulses_with(x, schedule, Continuity::default())
}

pub fn remove_impulses_with(
    x: &Trajectory,
    schedule: &ImpulseSchedule,
    tol: Continuity,
) -> Result<TransformedTrajectory, TransformError> {
    let mut instants = Vec::new();
    let mut steps = Vec::new();
    for j in x.jumps() {
        let map = schedule.map(j.k);
        let factor = j_factor(map, j.left).map_err(|_| TransformError::Singular { k: j.k, t: j.t, u: j.left })?;
        instants.push(j.t);
        steps.push(factor);
    }
    rescale(x, instants, steps, tol)
}

/// Linear impulses as the products `prod (1 + b_k)^{-1}` rescaling `x`.
pub fn linear_factors(x: &Trajectory, schedule: &ImpulseSchedule) -> Result<TransformedTrajectory, TransformError> {
    let coeffs = linear_coefficients(schedule)?;
    let instants: Vec<f64> = x.jumps().iter().map(|j| j.t).collect();
    let steps = x
        .jumps()
        .iter()
        .map(|j| 1.0 / (1.0 + coeffs[schedule.times.base_index(j.k)]))
        .collect();
    rescale(x, instants, steps, Continuity::default())
}

fn linear_coefficients(schedule: &ImpulseSchedule) -> Result<Vec<f64>, TransformError> {
    schedule
        .maps
        .iter()
        .enumerate()
        .map(|(index, m)| match m.linear_coefficient() {
            Some(b) if b > -1.0 => Ok(b),
            Some(b) => Err(TransformError::Invalid(format!("impulse {index} has coefficient {b} <= -1"))),
            None => Err(TransformError::NonLinear { index }),
        })
        .collect()
}

/// Max over `grid` of the residual of the impulse-free equation for `y`:
/// `y' + a y - F(t) f(t, y_t / F)` with `F` the interval factor. Grid points
/// within `h` of a breakpoint are skipped.
pub fn transformed_residual(tr: &TransformedTrajectory, scenario: &Scenario, grid: &[f64], h: f64) -> f64 {
    let delta = h / 4.0;
    let y = |u: f64| tr.y.eval_unchecked(u, Side::Left);
    let mut fences = tr.y.breakpoints.clone();
    fences.extend([tr.y.t0, tr.y.end()]);
    fences.sort_by(f64::total_cmp);
    let mut worst = 0.0f64;
    for &t in grid {
        let j = fences.partition_point(|&b| b < t);
        let near = [j.checked_sub(1), Some(j)]
            .into_iter()
            .flatten()
            .filter_map(|i| fences.get(i))
            .any(|&b| (t - b).abs() <= h);
        if near {
            continue;
        }
        let deriv = (y(t - 2.0 * delta) - 8.0 * y(t - delta) + 8.0 * y(t + delta) - y(t + 2.0 * delta)) / (12.0 * delta);
        let past = |u: f64, sd: Side| tr.reconstruct(u, sd);
        let f = scenario.rhs.eval(t, Side::Left, &scenario.delays, &past);
        let r = deriv + scenario.damping.eval(t) * y(t) - tr.factor_at(t, Side::Left) * f;
        worst = worst.max(r.abs());
    }
    worst
}

fn reduction_checks(model: &WazewskaModel) -> Result<(Vec<f64>, Vec<u32>), TransformError> {
    let coeffs = linear_coefficients(model.impulses())?;
    let mut ms = Vec::new();
    for (i, t) in model.terms().iter().enumerate() {
        match model.scenario.delays[t.delay].period_multiple(model.omega()) {
            Some(m) => ms.push(m),
            None => return Err(TransformError::NotMultiple { index: i }),
        }
    }
    Ok((coeffs, ms))
}

fn product(times: &ImpulseTimes, factors: Vec<f64>, shift: f64, origin: f64) -> ImpulseProduct {
    ImpulseProduct {
        times: times.clone(),
        factors,
        shift,
        origin,
    }
}

/// Impulse-free scenario for `y = prod_{t0 <= t_k < t} (1 + b_k)^{-1} N(t)`:
/// coefficients `b_i prod (1+b_k)^{-1}` and `beta_i prod_{t_k < t - m_i omega} (1+b_k)`.
/// The history is unchanged because the product is empty before `t0`.
pub fn linear_impulse_reduction(model: &WazewskaModel) -> Result<Scenario, TransformError> {
    let (coeffs, ms) = reduction_checks(model)?;
    let s = &model.scenario;
    let times = &s.impulses.times;
    let inv: Vec<f64> = coeffs.iter().map(|b| 1.0 / (1.0 + b)).collect();
    let fwd: Vec<f64> = coeffs.iter().map(|b| 1.0 + b).collect();
    let terms = model
        .terms()
        .iter()
        .zip(&ms)
        .map(|(term, &m)| WazewskaTerm {
            b: TimeFn::Scaled {
                base: Box::new(term.b.clone()),
                factor: product(times, inv.clone(), 0.0, s.t0),
            },
            beta: TimeFn::Scaled {
                base: Box::new(term.beta.clone()),
                factor: product(times, fwd.clone(), m as f64 * s.omega, s.t0),
            },
            delay: term.delay,
        })
        .collect();
    let mut out = s.clone();
    out.rhs = Rhs::Wazewska { terms };
    out.impulses = ImpulseSchedule::none(s.omega);
    Ok(out)
}

/// The reduction applied to the deviation `x = N - N*`: the translated
/// functional with `b~`, outer rate `beta` and inner rate `beta~`.
pub fn translated_linear_reduction(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    base_history: History,
) -> Result<Scenario, TransformError> {
    let reduced = linear_impulse_reduction(model)?;
    let Rhs::Wazewska { terms } = &reduced.rhs else { unreachable!() };
    let terms = terms
        .iter()
        .zip(model.terms())
        .map(|(r, orig)| TranslatedTerm {
            b: r.b.clone(),
            beta_outer: orig.beta.clone(),
            beta_inner: r.beta.clone(),
            delay: r.delay,
        })
        .collect();
    let mut out = reduced;
    out.rhs = Rhs::Translated {
        terms,
        profile: n_star.profile.clone(),
    };
    out.history = History::Combined {
        base: Box::new(base_history),
        profile: n_star.profile.clone(),
        weight: -1.0,
    };
    out.yorke = None;
    Ok(out)
}

/// `N = prod (1 + b_k) y` for a solution `y` of the reduced equation.
pub fn expand_reduction(y: &Trajectory, schedule: &ImpulseSchedule) -> Result<Trajectory, TransformError> {
    let coeffs = linear_coefficients(schedule)?;
    let instants: Vec<f64> = schedule
        .times
        .in_range(y.t0, y.end(), true, false)
        .into_iter()
        .map(|(_, t)| t)
        .collect();
    let ks: Vec<usize> = schedule
        .times
        .in_range(y.t0, y.end(), true, false)
        .into_iter()
        .map(|(k, _)| k)
        .collect();
    let steps: Vec<f64> = ks.iter().map(|&k| 1.0 / (1.0 + coeffs[schedule.times.base_index(k)])).collect();
    // y is continuous; split segments are not needed because the integrator
    // already stops on every coefficient jump.
    let interval_factors = interval_products(&steps);
    let mut jump_gaps = Vec::new();
    let mut aligned = 0usize;
    for seg in &y.dense.segments {
        if aligned < instants.len() && (instants[aligned] - seg.t1).abs() <= 1e-12 * (1.0 + seg.t1.abs()) {
            jump_gaps.push(0.0);
            aligned += 1;
        }
    }
    if aligned != instants.len() {
        return Err(TransformError::Invalid("impulse instants are not integration nodes of y".into()));
    }
    let tr = TransformedTrajectory {
        y: y.clone(),
        instants,
        step_factors: steps,
        interval_factors,
        jump_gaps,
    };
    Ok(tr.reconstruct_trajectory())
}

/// `r(t) = (1/N*(t)) sum_i b_i(t) exp(-beta_i(t) N*(t - tau_i(t)))`.
pub fn ratio_rate(model: &WazewskaModel, n_star: &PeriodicSolution) -> TimeFn {
    let terms = model.terms().to_vec();
    let delays = model.scenario.delays.clone();
    let profile = n_star.profile.clone();
    TimeFn::custom("ratio rate", Some(model.omega()), move |t, side| {
        let sum: f64 = terms
            .iter()
            .map(|term| {
                let lag = delays[term.delay].departure(t);
                term.b.eval_side(t, side) * (-term.beta.eval_side(t, side) * profile.eval(lag, side)).exp()
            })
            .sum();
        sum / profile.eval(t, side)
    })
}

/// `y = N / N* - 1`, defined only when every impulse is linear so that `N`
/// and `N*` jump by the same ratio. Nonlinear impulses leave `y` impulsive
/// with jump maps that never meet the contraction hypothesis on the jumps,
/// so the transform is refused for them.
pub fn ratio_transform(
    n: &Trajectory,
    n_star: &PeriodicSolution,
    schedule: &ImpulseSchedule,
) -> Result<Trajectory, TransformError> {
    linear_coefficients(schedule)?;
    let profile = n_star.profile.clone();
    let (lo, _) = profile.extrema();
    if !(lo > 0.0) {
        return Err(TransformError::Invalid(format!("N* must be positive; minimum {lo}")));
    }
    let tol = Continuity::default();
    for j in n.jumps() {
        let (sl, sr) = (profile.eval(j.t, Side::Left), profile.eval(j.t, Side::Right));
        let (yl, yr) = (j.left / sl - 1.0, j.right / sr - 1.0);
        if (yr - yl).abs() > tol.bound(yl) {
            return Err(TransformError::Discontinuous {
                t: j.t,
                gap: (yr - yl).abs(),
                tol: tol.bound(yl),
            });
        }
    }
    let hist = n.history.clone();
    let hp = profile.clone();
    let history = History::Function {
        f: TimeFn::custom("ratio history", None, move |t, side| hist.eval(t, side) / hp.eval(t, side) - 1.0),
    };
    let mut y = Trajectory::new(history, n.t0, n.window_start);
    y.breakpoints = n.breakpoints.clone();
    for seg in &n.dense.segments {
        let point = |t: f64, side: Side, x: f64, dx: f64| {
            let (p, dp) = (profile.eval(t, side), profile.derivative(t, side));
            (x / p - 1.0, (dx * p - x * dp) / (p * p))
        };
        let (x0, d0) = point(seg.t0, Side::Right, seg.x0, seg.d0);
        let (x1, d1) = point(seg.t1, Side::Left, seg.x1, seg.d1);
        if !(x0 > -1.0 && x1 > -1.0) {
            return Err(TransformError::Invalid(format!("N is not positive near t = {}", seg.t1)));
        }
        y.dense.segments.push(Segment { x0, x1, d0, d1, ..*seg });
    }
    Ok(y)
}

/// Largest relative gap in
/// `exp(-int_s^t r) = exp(-int_s^t a) (N*(s)/N*(t)) prod_{s <= t_k < t} (1 + b_k)`
/// over the given pairs `s < t`.
pub fn ratio_identity_gap(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    pairs: &[(f64, f64)],
) -> Result<f64, TransformError> {
    let coeffs = linear_coefficients(model.impulses())?;
    let r = ratio_rate(model, n_star);
    let times = &model.impulses().times;
    let mut worst = 0.0f64;
    for &(s, t) in pairs {
        let crossed = times.in_range(s, t, true, false);
        let mut breaks: Vec<f64> = crossed.iter().map(|&(_, tk)| tk).collect();
        breaks.extend(model.scenario.damping.breakpoints(s, t));
        breaks.sort_by(f64::total_cmp);
        let int_r = simpson_piecewise(&|u: f64, side: Side| r.eval_side(u, side), s, t, &breaks, 1e-12)
            .map_err(|e| TransformError::Invalid(e.to_string()))?;
        let prod: f64 = crossed
            .iter()
            .map(|&(k, _)| 1.0 + coeffs[times.base_index(k)])
            .product();
        let rhs = (-model.scenario.damping.integral(s, t)).exp() * n_star.eval(s, Side::Right) / n_star.eval(t, Side::Left) * prod;
        let lhs = (-int_r).exp();
        worst = worst.max((lhs - rhs).abs() / rhs.abs());
    }
    Ok(worst)
}
