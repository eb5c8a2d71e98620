//! Slow, independent oracles for cross-checking the main numerical paths.
//!
//! Nothing here calls the integrator, the quadrature module or the criteria
//! evaluators; coefficient functions are only evaluated pointwise.

use serde::{Deserialize, Serialize};

use crate::criteria::AlphaVariant;
use crate::integrator::IntegrationError;
use crate::model::{ImpulseSchedule, Scenario, YorkeTerm};
use crate::quad::Side;
use crate::trajectory::{JumpRecord, Segment, Trajectory, SNAP_REL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub euler_step: f64,
    pub riemann_panels: usize,
    /// Most impulse instants a brute-force window may contain.
    pub enumeration_cap: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            euler_step: 1e-4,
            riemann_panels: 1_000_000,
            enumeration_cap: 10_000,
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.euler_step > 0.0) || self.riemann_panels == 0 || self.enumeration_cap == 0 {
            return Err(format!("oracle settings must be positive: {self:?}"));
        }
        Ok(())
    }
}

/// Nodes of a piecewise-linear solution; a jump appears as two nodes with the
/// same time, left value first.
struct Polyline {
    ts: Vec<f64>,
    xs: Vec<f64>,
}

impl Polyline {
    fn at(&self, s: f64, side: Side) -> f64 {
        let lo = self.ts.partition_point(|&t| t < s);
        let hi = self.ts.partition_point(|&t| t <= s);
        if lo < hi {
            return match side {
                Side::Left => self.xs[lo],
                Side::Right => self.xs[hi - 1],
            };
        }
        let (i, j) = (lo - 1, lo);
        let w = (s - self.ts[i]) / (self.ts[j] - self.ts[i]);
        self.xs[i] + w * (self.xs[j] - self.xs[i])
    }
}

/// Impulse instants in `[lo, hi]` listed by scanning periods, each with its
/// index within the period.
fn instants_between(schedule: &ImpulseSchedule, lo: f64, hi: f64) -> Vec<(f64, usize)> {
    let times = &schedule.times;
    let mut out = Vec::new();
    if times.base.is_empty() {
        return out;
    }
    // instants start in the first period; none exist before it
    let first = ((lo / times.period).floor() as i64 - 1).max(0);
    let last = (hi / times.period).ceil() as i64 + 1;
    for n in first..=last {
        for (j, &b) in times.base.iter().enumerate() {
            let t = b + n as f64 * times.period;
            if t >= lo && t <= hi {
                out.push((t, j));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Explicit Euler with linear interpolation for delayed values. Steps land
/// on every impulse instant; the jump rule is the same left-continuous one.
pub fn euler_integrate(scenario: &Scenario, h: f64, t_end: f64) -> Result<Trajectory, IntegrationError> {
    if !(h > 0.0) || !(t_end > scenario.t0) {
        return Err(IntegrationError::Config(format!("need h > 0 and t_end > t0, got h = {h}, t_end = {t_end}")));
    }
    let s = scenario;
    let t0 = s.t0;
    let x0 = s.history.eval(t0, Side::Left);
    let mut line = Polyline {
        ts: vec![t0],
        xs: vec![x0],
    };
    let kicks: Vec<(f64, usize)> = instants_between(&s.impulses, t0, t_end)
        .into_iter()
        .filter(|&(t, _)| t > t0)
        .collect();
    let mut stops: Vec<f64> = kicks.iter().map(|k| k.0).collect();
    stops.push(t_end);
    stops.dedup();
    let mut traj = Trajectory::new(s.history.clone(), t0, t0 - s.max_delay());
    let (mut t, mut x) = (t0, x0);
    let mut kick = 0;
    let mut count = 0usize;
    for &stop in &stops {
        while t < stop {
            let mut tn = t + h;
            if tn > stop - 1e-9 * h {
                tn = stop;
            }
            let past = |u: f64, side: Side| {
                if u < t0 || (u == t0 && side == Side::Left) {
                    s.history.eval(u, side)
                } else {
                    line.at(u, side)
                }
            };
            let slope = -s.damping.eval_side(t, Side::Right) * x + s.rhs.eval(t, Side::Right, &s.delays, &past);
            let xn = x + (tn - t) * slope;
            if !xn.is_finite() {
                return Err(IntegrationError::Divergence { t: tn, value: xn });
            }
            let d = (xn - x) / (tn - t);
            traj.dense.segments.push(Segment {
                t0: t,
                t1: tn,
                x0: x,
                x1: xn,
                d0: d,
                d1: d,
            });
            line.ts.push(tn);
            line.xs.push(xn);
            t = tn;
            x = xn;
        }
        while kick < kicks.len() && kicks[kick].0 == stop {
            count += 1;
            let (tk, j) = kicks[kick];
            let right = x + s.impulses.maps[j].apply(x);
            traj.dense.jumps.push(JumpRecord {
                k: count,
                t: tk,
                left: x,
                right,
            });
            traj.breakpoints.push(tk);
            line.ts.push(tk);
            line.xs.push(right);
            x = right;
            kick += 1;
        }
    }
    Ok(traj)
}

/// `max over theta in [-tau, 0]` of the product of `1 / lower_k` over
/// instants in `[t + theta, t)`, by listing every window start. An instant
/// within rounding distance of an end of `[t - tau, t)` counts as on it.
pub fn brute_force_b(schedule: &ImpulseSchedule, lower: &[f64], tau: f64, t: f64) -> f64 {
    let eps = SNAP_REL * (1.0 + t.abs());
    let inside: Vec<(f64, usize)> = instants_between(schedule, t - tau - eps, t)
        .into_iter()
        .filter(|&(s, _)| s < t - eps)
        .collect();
    let mut best = 1.0f64;
    for start in 0..inside.len() {
        let mut prod = 1.0;
        for &(_, j) in &inside[start..] {
            prod *= 1.0 / lower[j];
        }
        best = best.max(prod);
    }
    best
}

/// `(alpha_1(t), alpha_2(t))` at a single `t` by a left Riemann sum with
/// `panels` cells; `int_s^t a` is accumulated from the same cells.
/// `lower` holds the factors `b_k` of the products `B` (empty: `B = 1`).
pub fn riemann_alpha(
    scenario: &Scenario,
    bounds: &[YorkeTerm],
    lower: &[f64],
    variant: AlphaVariant,
    t: f64,
    panels: usize,
) -> (f64, f64) {
    let taus = |s: f64| -> f64 { bounds.iter().map(|b| scenario.delays[b.delay].tau(s)).fold(0.0, f64::max) };
    let start = bounds
        .iter()
        .map(|b| t - scenario.delays[b.delay].tau(t))
        .fold(t, f64::min);
    let h = (t - start) / panels as f64;
    let big_b = |term: &YorkeTerm, s: f64| -> f64 {
        if lower.is_empty() {
            return 1.0;
        }
        let tau = match variant {
            AlphaVariant::MultiDelay => scenario.delays[term.delay].tau(s),
            _ => taus(s),
        };
        brute_force_b(&scenario.impulses, lower, tau, s)
    };
    // B is piecewise constant; cache it between the instants where it can change
    let mut changes: Vec<f64> = Vec::new();
    if !lower.is_empty() {
        for (tk, _) in instants_between(&scenario.impulses, start - 2.0 * taus(t) - 1.0, t) {
            changes.push(tk);
            for b in bounds {
                // s with s - tau(s) = tk, by scanning for the crossing
                let d = &scenario.delays[b.delay];
                let mut lo = tk;
                let mut hi = tk + d.tau(tk) * 2.0 + 1.0;
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if mid - d.tau(mid) < tk {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                changes.push(hi);
            }
        }
        changes.sort_by(f64::total_cmp);
    }

    let n = panels;
    let mut a_vals = vec![0.0; n];
    let mut weights = vec![(0.0, 0.0); n];
    let mut cache: Vec<(usize, f64)> = Vec::new();
    let mut segment = usize::MAX;
    for i in 0..n {
        let s = start + i as f64 * h;
        a_vals[i] = scenario.damping.eval(s);
        // B is read at the cell midpoint: a cell starting on a change belongs
        // to the segment after it
        let mid = s + 0.5 * h;
        let seg = changes.partition_point(|&c| c <= mid);
        if seg != segment {
            segment = seg;
            cache = bounds.iter().enumerate().map(|(j, b)| (j, big_b(b, mid))).collect();
        }
        let (mut w1, mut w2) = (0.0, 0.0);
        for &(j, bb) in &cache {
            let term = &bounds[j];
            let (l1, l2) = (term.lambda1.eval(s), term.lambda2.eval(s));
            match variant {
                AlphaVariant::Yan => {
                    let l = l1.max(l2);
                    w1 += l * bb;
                    w2 += l * bb;
                }
                _ => {
                    w1 += l1 * bb;
                    w2 += l2 * bb;
                }
            }
        }
        weights[i] = (w1, w2);
    }
    let (mut sum1, mut sum2) = (0.0, 0.0);
    match variant {
        AlphaVariant::Yan => {
            // exp(int_{start}^s a), accumulated forward
            let mut acc = 0.0f64;
            for i in 0..n {
                let e = acc.exp();
                sum1 += weights[i].0 * e;
                sum2 += weights[i].1 * e;
                acc += a_vals[i] * h;
            }
        }
        _ => {
            // exp(-int_s^t a), accumulated backward
            let mut acc = 0.0f64;
            for i in (0..n).rev() {
                acc += a_vals[i] * h;
                let e = (-acc).exp();
                sum1 += weights[i].0 * e;
                sum2 += weights[i].1 * e;
            }
        }
    }
    (sum1 * h, sum2 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelaySpec, History, ImpulseMap, Rhs, TimeFn};

    fn linear(a: f64, k: f64, imp: ImpulseSchedule) -> Scenario {
        Scenario {
            omega: 1.0,
            damping: TimeFn::constant(a),
            delays: vec![DelaySpec::constant(1.0)],
            rhs: Rhs::linear_feedback(k, 0),
            impulses: imp,
            history: History::constant(1.0),
            t0: 0.0,
            yorke: None,
            require_zero_equilibrium: false,
        }
    }

    fn unit() -> Vec<YorkeTerm> {
        vec![YorkeTerm {
            lambda1: TimeFn::constant(1.0),
            lambda2: TimeFn::constant(1.0),
            delay: 0,
        }]
    }

    #[test]
    fn brute_force_ignores_times_before_the_first_period() {
        let imp = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b: 1.0 })]).unwrap();
        assert_eq!(brute_force_b(&imp, &[0.5], 3.0, 1.0), 2.0);
    }

    #[test]
    fn euler_exponential_decay() {
        let s = linear(1.0, 0.0, ImpulseSchedule::none(1.0));
        let x = euler_integrate(&s, 1e-4, 1.0).unwrap();
        assert!((x.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 5e-4);
    }

    #[test]
    fn euler_impulses_on_constant_solution() {
        let imp = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b: 1.0 })]).unwrap();
        let s = linear(0.0, 0.0, imp);
        let x = euler_integrate(&s, 0.1, 2.0).unwrap();
        assert_eq!(x.eval(0.5).unwrap(), 1.0);
        assert_eq!(x.eval_right_limit(0.5).unwrap(), 2.0);
        assert_eq!(x.eval(2.0).unwrap(), 4.0);
    }

    #[test]
    fn riemann_examples() {
        let s = linear(1.0, 1.0, ImpulseSchedule::none(1.0));
        let (a1, a2) = riemann_alpha(&s, &unit(), &[], AlphaVariant::Single, 2.0, 1_000_000);
        let expect = 1.0 - (-1.0f64).exp();
        assert!((a1 - expect).abs() < 1e-5 && (a2 - expect).abs() < 1e-5);
        let s = linear(0.0, 1.0, ImpulseSchedule::none(1.0));
        let (a1, _) = riemann_alpha(&s, &unit(), &[], AlphaVariant::Single, 2.0, 1_000_000);
        assert!((a1 - 1.0).abs() < 1e-6);
        let imp = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b: -0.5 })]).unwrap();
        let s = linear(0.0, 1.0, imp);
        let (a1, _) = riemann_alpha(&s, &unit(), &[0.5], AlphaVariant::Single, 2.3, 1_000_000);
        assert!((a1 - 2.0).abs() < 1e-5);
    }

    #[test]
    fn brute_force_examples() {
        let none = ImpulseSchedule::none(1.0);
        assert_eq!(brute_force_b(&none, &[], 1.0, 0.7), 1.0);
        let one = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b: -0.5 })]).unwrap();
        assert_eq!(brute_force_b(&one, &[0.5], 1.0, 0.75), 2.0);
        let two = ImpulseSchedule::new(
            1.0,
            vec![(0.2, ImpulseMap::Linear { b: -0.5 }), (0.6, ImpulseMap::Linear { b: 1.0 })],
        )
        .unwrap();
        assert_eq!(brute_force_b(&two, &[0.5, 2.0], 0.9, 0.7), 1.0);
    }
}
