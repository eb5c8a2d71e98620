//! Sup-over-time weighted integrals of the Yorke coefficients.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    classify_products, ratio_bounds, CheckOptions, CriterionId, CriterionResult, Lambda2Choice, Verdict,
};
use crate::model::{DelaySpec, ImpulseTimes, Scenario, TimeFn, YorkeTerm};
use crate::quad::{simpson_piecewise, Side};
use crate::trajectory::SNAP_REL;
use crate::wazewska::{PeriodicSolution, WazewskaModel};

/// `A(x) = int_origin^x a`, cached on cells when `a` has no closed-form integral.
#[derive(Debug, Clone)]
pub struct Primitive {
    a: TimeFn,
    origin: f64,
    cell: f64,
    cum: Vec<f64>,
}

impl Primitive {
    pub fn new(a: &TimeFn, lo: f64, hi: f64, cells: usize) -> Self {
        let exact = matches!(a, TimeFn::Constant { .. } | TimeFn::Trig { .. } | TimeFn::Tabulated { .. });
        let n = if exact { 0 } else { cells.max(1) };
        let cell = if n > 0 { (hi - lo) / n as f64 } else { 0.0 };
        let mut cum = Vec::with_capacity(n + 1);
        if n > 0 {
            cum.push(0.0);
            for j in 0..n {
                let x = lo + j as f64 * cell;
                let next = cum[j] + a.integral(x, x + cell);
                cum.push(next);
            }
        }
        Self {
            a: a.clone(),
            origin: lo,
            cell,
            cum,
        }
    }

    pub fn at(&self, x: f64) -> f64 {
        if self.cum.is_empty() {
            return self.a.integral(self.origin, x);
        }
        let j = ((x - self.origin) / self.cell).floor().clamp(0.0, (self.cum.len() - 1) as f64) as usize;
        let start = self.origin + j as f64 * self.cell;
        self.cum[j] + self.a.integral(start, x)
    }

    /// `int_s^t a`.
    pub fn between(&self, s: f64, t: f64) -> f64 {
        self.at(t) - self.at(s)
    }
}

/// The range of `t` over which a sup is taken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupWindow {
    pub lo: f64,
    pub hi: f64,
    /// True when the data repeat with the period, so the sup over one period
    /// is the sup over all later times.
    pub periodic: bool,
}

impl SupWindow {
    /// Starts at the first period multiple past twice the largest delay, so
    /// every integration window and every product window inside it is complete.
    pub fn new(omega: f64, tau_bar: f64, periodic: bool, horizon: f64) -> Self {
        let lo = ((2.0 * tau_bar / omega).ceil()).max(1.0) * omega;
        let hi = if periodic { lo + omega } else { lo + horizon };
        Self { lo, hi, periodic }
    }

    pub fn note(&self) -> Option<String> {
        (!self.periodic).then(|| {
            format!(
                "coefficients are not periodic: sup taken over t in [{}, {}] only, inconclusive beyond that horizon",
                self.lo, self.hi
            )
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaVariant {
    /// One window `tau(t) = max_i tau_i(t)` for the product `B`.
    Single,
    /// A product `B_i` per delay.
    MultiDelay,
    /// Growth kernel `exp(int_{t - tau(t)}^s a)` with `lambda = max(lambda1, lambda2)`.
    Yan,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaValues {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Where the sups are attained on the sample grid.
    pub t_alpha1: f64,
    pub t_alpha2: f64,
    pub window: SupWindow,
}

impl AlphaValues {
    pub fn product(&self) -> f64 {
        self.alpha1 * self.alpha2
    }
}

/// Evaluation context shared by the integrals of one criterion.
pub(crate) struct Kernel<'a> {
    prim: Primitive,
    /// Sorted points where integrands may jump.
    events: Vec<f64>,
    /// Jump points of the integrand's coefficients, refined in the sup search.
    jumps: Vec<f64>,
    delays: &'a [DelaySpec],
    /// Delay indices spanning the integration window.
    window_delays: Vec<usize>,
    /// End of the tabulated range.
    hi: f64,
    /// Spacing of the uniform nodes of cumulative tables.
    table_step: f64,
    rtol: f64,
}

/// Running decayed integral of one integrand, see [`Kernel::decayed`].
pub(crate) struct Decayed<'k, 'a> {
    kernel: &'k Kernel<'a>,
    g: &'k (dyn Fn(f64, Side) -> f64 + Sync),
    nodes: Vec<f64>,
    vals: Vec<f64>,
}

impl Decayed<'_, '_> {
    fn at(&self, x: f64) -> f64 {
        let j = self.nodes.partition_point(|&n| n <= x).saturating_sub(1);
        let n = self.nodes[j];
        let k = self.kernel;
        self.vals[j] * (k.prim.at(n) - k.prim.at(x)).exp() + k.piece(self.g, n, x)
    }

    /// `int_lo^t g(s) e^{A(s) - A(t)} ds`.
    fn window(&self, lo: f64, t: f64) -> f64 {
        let k = self.kernel;
        self.at(t) - self.at(lo) * (k.prim.at(lo) - k.prim.at(t)).exp()
    }
}

impl<'a> Kernel<'a> {
    fn new(
        damping: &TimeFn,
        delays: &'a [DelaySpec],
        window_delays: Vec<usize>,
        times: &ImpulseTimes,
        extra: &[&TimeFn],
        knots: &[f64],
        omega: f64,
        window: &SupWindow,
        tau_bar: f64,
        opts: &CheckOptions,
    ) -> Self {
        let lo = (window.lo - 2.0 * tau_bar).max(0.0);
        let hi = window.hi + 1.0;
        let cells = (((hi - lo) / 1.0).ceil() as usize * 64).max(64);
        let prim = Primitive::new(damping, lo, hi, cells);
        let mut events = Vec::new();
        let instants: Vec<f64> = times.in_range(lo, hi, true, true).into_iter().map(|(_, t)| t).collect();
        events.extend(&instants);
        // an instant up to one delay before `lo` still moves B inside the table
        let earlier = times.in_range((lo - tau_bar).max(0.0), hi, true, true);
        for d in delays {
            for &(_, tk) in &earlier {
                let s = d.preimage(tk);
                if s > lo && s <= hi {
                    events.push(s);
                }
            }
        }
        events.extend(damping.breakpoints(lo, hi));
        for f in extra {
            events.extend(f.breakpoints(lo, hi));
        }
        let mut jumps = events.clone();
        jumps.sort_by(f64::total_cmp);
        jumps.dedup();
        if !knots.is_empty() {
            // knots of a periodic profile, and where the delayed argument hits them
            let from = lo - tau_bar;
            let first = (from / omega).floor() as i64;
            let last = (hi / omega).ceil() as i64;
            let mut shifted = Vec::new();
            for p in first..=last {
                for &x in knots {
                    let y = x + p as f64 * omega;
                    if y >= from && y <= hi {
                        shifted.push(y);
                    }
                }
            }
            for d in delays {
                if d.period_multiple(omega).is_some() {
                    continue;
                }
                for &y in &shifted {
                    let s = d.preimage(y);
                    if s > lo && s <= hi {
                        events.push(s);
                    }
                }
            }
            events.extend(shifted.into_iter().filter(|&y| y >= lo));
        }
        events.sort_by(f64::total_cmp);
        events.dedup_by(|a, b| (*a - *b).abs() <= 1e-13 * (1.0 + a.abs()));
        Self {
            prim,
            events,
            jumps,
            delays,
            window_delays,
            hi,
            table_step: omega / opts.grid.sup_points.max(1) as f64,
            rtol: opts.rtol,
        }
    }

    fn window_start(&self, t: f64) -> f64 {
        self.window_delays
            .iter()
            .map(|&i| self.delays[i].departure(t))
            .fold(t, f64::min)
    }

    fn max_tau(&self, s: f64) -> f64 {
        self.window_delays.iter().map(|&i| self.delays[i].tau(s)).fold(0.0, f64::max)
    }

    /// Tabulates `D(x) = int_{origin}^x g(s) e^{A(s) - A(x)} ds` at every
    /// event, so that windowed integrals cost one short quadrature per end.
    fn decayed<'k>(&'k self, g: &'k (dyn Fn(f64, Side) -> f64 + Sync)) -> Decayed<'k, 'a> {
        let origin = self.prim.origin;
        // uniform nodes keep every lookup to a short quadrature
        let cells = ((self.hi - origin) / self.table_step).ceil() as usize;
        let mut nodes: Vec<f64> = (0..cells).map(|j| origin + j as f64 * self.table_step).collect();
        nodes.extend(self.events.iter().copied().filter(|&e| e > origin && e < self.hi));
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| *a - *b <= SNAP_REL * (1.0 + a.abs()));
        nodes.push(self.hi);
        let mut vals = Vec::with_capacity(nodes.len());
        vals.push(0.0);
        for w in nodes.windows(2) {
            let prev = *vals.last().unwrap();
            let step = self.piece(g, w[0], w[1]);
            vals.push(prev * (self.prim.at(w[0]) - self.prim.at(w[1])).exp() + step);
        }
        Decayed { kernel: self, g, nodes, vals }
    }

    /// `int_lo^x g(s) e^{A(s) - A(x)} ds` over a span without events.
    fn piece(&self, g: &(dyn Fn(f64, Side) -> f64 + Sync), lo: f64, x: f64) -> f64 {
        // spans below rounding distance sit on a snapped jump and carry no mass
        if x - lo <= SNAP_REL * (1.0 + x.abs()) {
            return 0.0;
        }
        let px = self.prim.at(x);
        let h = |s: f64, side: Side| g(s, side) * (self.prim.at(s) - px).exp();
        simpson_piecewise(&h, lo, x, &[], self.rtol).unwrap_or(f64::NAN)
    }

    /// Sample points for the sup over `window`: a uniform grid plus every
    /// event inside it and its neighbours one cell away.
    fn sup_points(&self, window: &SupWindow, per_period: usize, omega: f64) -> Vec<f64> {
        let periods = ((window.hi - window.lo) / omega).max(1.0);
        let n = ((per_period as f64 * periods) as usize).clamp(per_period, 8192);
        let cell = (window.hi - window.lo) / n as f64;
        let mut pts: Vec<f64> = (0..=n).map(|j| window.lo + j as f64 * cell).collect();
        for &e in &self.jumps {
            for x in [e - cell, e, e + cell] {
                if x >= window.lo && x <= window.hi {
                    pts.push(x);
                }
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }
}

/// `B(t)` with one-sided semantics: the left value uses the window
/// `[t - tau, t)`, the right limit `(t - tau, t]`.
pub fn big_b_profile(times: &ImpulseTimes, lower: &[f64], tau: f64, t: f64, side: Side) -> f64 {
    if lower.is_empty() || times.is_empty() {
        return 1.0;
    }
    // instants within rounding distance of either end count as on it
    let eps = SNAP_REL * (1.0 + t.abs());
    let inst = match side {
        Side::Left => times.in_range(t - tau - eps, t - eps, true, false),
        Side::Right => times.in_range(t - tau + eps, t + eps, false, true),
    };
    let mut best = 1.0f64;
    let mut prod = 1.0f64;
    for (k, _) in inst.into_iter().rev() {
        prod /= lower[times.base_index(k)];
        best = best.max(prod);
    }
    best
}

/// Largest value of each component over `points`, first maximiser kept.
fn sup_pair(points: &[f64], f: impl Fn(f64) -> (f64, f64) + Sync) -> ((f64, f64), (f64, f64)) {
    let vals: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|&t| {
            let (a, b) = f(t);
            (t, a, b)
        })
        .collect();
    let mut m1 = (f64::NEG_INFINITY, f64::NAN);
    let mut m2 = (f64::NEG_INFINITY, f64::NAN);
    for (t, a, b) in vals {
        if a > m1.0 || a.is_nan() {
            m1 = (a, t);
        }
        if b > m2.0 || b.is_nan() {
            m2 = (b, t);
        }
    }
    (m1, m2)
}

/// Sup of the weighted integrals for the given Yorke terms. `lower` holds the
/// factors whose inverses build the products `B`; `knots` (one period) are
/// extra integration breaks.
#[allow(clippy::too_many_arguments)]
pub(crate) fn generic_alphas(
    damping: &TimeFn,
    delays: &[DelaySpec],
    terms: &[YorkeTerm],
    times: &ImpulseTimes,
    lower: &[f64],
    variant: AlphaVariant,
    window: SupWindow,
    omega: f64,
    knots: &[f64],
    opts: &CheckOptions,
) -> AlphaValues {
    let used: Vec<usize> = {
        let mut v: Vec<usize> = terms.iter().map(|t| t.delay).collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    if terms.is_empty() {
        return AlphaValues {
            alpha1: 0.0,
            alpha2: 0.0,
            t_alpha1: window.lo,
            t_alpha2: window.lo,
            window,
        };
    }
    let tau_bar = used
        .iter()
        .map(|&i| delays[i].range(0.0, omega, opts.grid.validation_points).1)
        .fold(0.0, f64::max);
    let extra: Vec<&TimeFn> = terms.iter().flat_map(|t| [&t.lambda1, &t.lambda2]).collect();
    let k = Kernel::new(damping, delays, used, times, &extra, knots, omega, &window, tau_bar, opts);
    let b_of = |term: &YorkeTerm, s: f64, side: Side| -> f64 {
        let tau = match variant {
            AlphaVariant::MultiDelay => delays[term.delay].tau(s),
            _ => k.max_tau(s),
        };
        big_b_profile(times, lower, tau, s, side)
    };
    let points = k.sup_points(&window, opts.grid.sup_points, omega);
    let weighted = |pick: fn(&YorkeTerm, f64, Side) -> f64| {
        move |s: f64, side: Side| -> f64 {
            terms.iter().map(|term| pick(term, s, side) * b_of(term, s, side)).sum::<f64>()
        }
    };
    let ((a1, t1), (a2, t2)) = match variant {
        AlphaVariant::Yan => {
            let g = weighted(|term, s, side| term.lambda1.eval_side(s, side).max(term.lambda2.eval_side(s, side)));
            let d = k.decayed(&g);
            // the growth kernel is the decaying one rescaled by e^{A(t) - A(lo)}
            sup_pair(&points, |t| {
                let lo = k.window_start(t);
                let v = d.window(lo, t) * k.prim.between(lo, t).exp();
                (v, v)
            })
        }
        _ => {
            let g1 = weighted(|term, s, side| term.lambda1.eval_side(s, side));
            let g2 = weighted(|term, s, side| term.lambda2.eval_side(s, side));
            let (d1, d2) = (k.decayed(&g1), k.decayed(&g2));
            sup_pair(&points, |t| {
                let lo = k.window_start(t);
                (d1.window(lo, t), d2.window(lo, t))
            })
        }
    };
    AlphaValues {
        alpha1: a1,
        alpha2: a2,
        t_alpha1: t1,
        t_alpha2: t2,
        window,
    }
}

fn scenario_window(scenario: &Scenario, terms_periodic: bool, opts: &CheckOptions) -> SupWindow {
    let periodic = scenario.is_periodic() && terms_periodic;
    SupWindow::new(scenario.omega, scenario.max_delay(), periodic, opts.horizon)
}

fn yorke_periodic(bounds: &[YorkeTerm], omega: f64) -> bool {
    bounds
        .iter()
        .all(|b| b.lambda1.is_periodic_with(omega) && b.lambda2.is_periodic_with(omega))
}

/// `alpha_1, alpha_2` for the zero solution of `scenario` with the given
/// Yorke bounds and impulse lower ratio bounds `b_k` (for the products `B`).
pub fn alpha_integrals(
    scenario: &Scenario,
    bounds: &[YorkeTerm],
    lower: &[f64],
    variant: AlphaVariant,
    opts: &CheckOptions,
) -> AlphaValues {
    let window = scenario_window(scenario, yorke_periodic(bounds, scenario.omega), opts);
    generic_alphas(
        &scenario.damping,
        &scenario.delays,
        bounds,
        &scenario.impulses.times,
        lower,
        variant,
        window,
        scenario.omega,
        &[],
        opts,
    )
}

/// Segment boundaries of the periodic solution on `[0, omega]`.
pub(crate) fn profile_knots(n_star: &PeriodicSolution) -> Vec<f64> {
    let mut v: Vec<f64> = n_star.profile.dense.segments.iter().map(|s| s.t0).collect();
    v.push(n_star.omega());
    v
}

/// `max_t max_i beta_i(t) N*(t)` and `max N*` over one period, both jump sides.
pub(crate) fn overline_values(model: &WazewskaModel, n_star: &PeriodicSolution, points: usize) -> (f64, f64, f64) {
    let w = model.omega();
    let mut ts: Vec<f64> = (0..=points).map(|j| w * j as f64 / points as f64).collect();
    ts.extend(model.impulses().times.base.iter().copied());
    let mut beta_n = 0.0f64;
    let mut beta_max = 0.0f64;
    let mut n_max = 0.0f64;
    for &t in &ts {
        for side in [Side::Left, Side::Right] {
            let n = n_star.eval(t, side);
            n_max = n_max.max(n);
            for term in model.terms() {
                let b = term.beta.eval_side(t, side);
                beta_max = beta_max.max(b);
                beta_n = beta_n.max(b * n);
            }
        }
    }
    (beta_n, beta_max, n_max)
}

/// Yorke coefficients of the translated system about `N*`: the lower one
/// `beta_i b_i exp(-beta_i N*(t - tau_i))`, the upper one per `choice`.
pub(crate) fn translated_lambdas(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    choice: Lambda2Choice,
    points: usize,
) -> Vec<YorkeTerm> {
    let (beta_n, _, n_max) = overline_values(model, n_star, points);
    let scale = beta_n.exp_m1() / n_max;
    let w = model.omega();
    model
        .terms()
        .iter()
        .map(|term| {
            let (b, beta, d, prof) = (
                term.b.clone(),
                term.beta.clone(),
                model.scenario.delays[term.delay].clone(),
                n_star.profile.clone(),
            );
            let lambda1 = TimeFn::custom("lower Yorke coefficient", Some(w), move |t, side| {
                let level = beta.eval_side(t, side) * prof.eval(d.departure(t), side);
                b.eval_side(t, side) * beta.eval_side(t, side) * (-level).exp()
            });
            let lambda2 = match choice {
                Lambda2Choice::Direct => {
                    let (b, beta) = (term.b.clone(), term.beta.clone());
                    TimeFn::custom("upper Yorke coefficient", Some(w), move |t, side| {
                        b.eval_side(t, side) * beta.eval_side(t, side)
                    })
                }
                Lambda2Choice::Exponential => {
                    let (b, beta, d, prof) = (
                        term.b.clone(),
                        term.beta.clone(),
                        model.scenario.delays[term.delay].clone(),
                        n_star.profile.clone(),
                    );
                    TimeFn::custom("upper Yorke coefficient", Some(w), move |t, side| {
                        let level = beta.eval_side(t, side) * prof.eval(d.departure(t), side);
                        scale * b.eval_side(t, side) * (-level).exp()
                    })
                }
            };
            YorkeTerm {
                lambda1,
                lambda2,
                delay: term.delay,
            }
        })
        .collect()
}

/// The integrals for the deviation from `N*` with products `B_i` built from
/// `(1 + b_k)^{-1}`, `b_k` the lower difference-quotient bounds.
pub fn translated_alphas(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    slope_lower: &[f64],
    choice: Lambda2Choice,
    opts: &CheckOptions,
) -> AlphaValues {
    let terms = translated_lambdas(model, n_star, choice, opts.grid.extrema_points);
    let lower: Vec<f64> = slope_lower.iter().map(|b| 1.0 + b).collect();
    let s = &model.scenario;
    let window = SupWindow::new(s.omega, s.max_delay(), true, opts.horizon);
    generic_alphas(
        &s.damping,
        &s.delays,
        &terms,
        &s.impulses.times,
        &lower,
        AlphaVariant::MultiDelay,
        window,
        s.omega,
        &profile_knots(n_star),
        opts,
    )
}

/// The integrals of the ratio-transformed equation for linear impulses:
/// `(1/N*(t)) int_{t - m omega}^t sum_i b_i beta_i N*(s) [exp(-beta_i N*(s - tau_i))]
/// exp(-int_s^t a) prod_{s <= t_k < t} (1 + b_k) ds`.
pub fn ratio_alphas(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    coeffs: &[f64],
    opts: &CheckOptions,
) -> AlphaValues {
    let s = &model.scenario;
    let used: Vec<usize> = model.terms().iter().map(|t| t.delay).collect();
    let window = SupWindow::new(s.omega, s.max_delay(), true, opts.horizon);
    let times = &s.impulses.times;
    let extra: Vec<&TimeFn> = model.terms().iter().flat_map(|t| [&t.b, &t.beta]).collect();
    let knots = profile_knots(n_star);
    let k = Kernel::new(&s.damping, &s.delays, used, times, &extra, &knots, s.omega, &window, s.max_delay(), opts);
    let points = k.sup_points(&window, opts.grid.sup_points, s.omega);
    // prod_{x <= t_k < t} (1 + b_k) = P(t-) / P(x) with P the running product
    // from the start of the table; the right limit at x excludes t_k = x
    let origin = k.prim.origin;
    let running = |x: f64, side: Side| -> f64 {
        let eps = SNAP_REL * (1.0 + x.abs());
        let end = if side == Side::Right { x + eps } else { x - eps };
        times
            .in_range(origin, end, true, side == Side::Right)
            .into_iter()
            .map(|(kk, _)| 1.0 + coeffs[times.base_index(kk)])
            .product()
    };
    let g = |x: f64, side: Side, damped: bool| -> f64 {
        let n = n_star.eval(x, side);
        let sum: f64 = model
            .terms()
            .iter()
            .map(|term| {
                let v = term.b.eval_side(x, side) * term.beta.eval_side(x, side) * n;
                if damped {
                    let lag = s.delays[term.delay].departure(x);
                    v * (-term.beta.eval_side(x, side) * n_star.eval(lag, side)).exp()
                } else {
                    v
                }
            })
            .sum();
        sum / running(x, side)
    };
    let g1 = |x: f64, side: Side| g(x, side, true);
    let g2 = |x: f64, side: Side| g(x, side, false);
    let (d1, d2) = (k.decayed(&g1), k.decayed(&g2));
    let ((a1, t1), (a2, t2)) = sup_pair(&points, |t| {
        let lo = k.window_start(t);
        let scale = running(t, Side::Left) / n_star.eval(t, Side::Left);
        (scale * d1.window(lo, t), scale * d2.window(lo, t))
    });
    AlphaValues {
        alpha1: a1,
        alpha2: a2,
        t_alpha1: t1,
        t_alpha2: t2,
        window,
    }
}

/// `c_j = sup_t sum_i lambda_{j,i}(t) B_i(t) / a(t)` and
/// `A = sup_t int_{t - tau(t)}^t a`.
fn cor2_2_constants(scenario: &Scenario, bounds: &[YorkeTerm], lower: &[f64], window: &SupWindow, opts: &CheckOptions) -> (f64, f64, f64) {
    let used: Vec<usize> = bounds.iter().map(|b| b.delay).collect();
    let extra: Vec<&TimeFn> = bounds.iter().flat_map(|b| [&b.lambda1, &b.lambda2]).collect();
    let k = Kernel::new(
        &scenario.damping,
        &scenario.delays,
        used,
        &scenario.impulses.times,
        &extra,
        &[],
        scenario.omega,
        window,
        scenario.max_delay(),
        opts,
    );
    let points = k.sup_points(window, opts.grid.sup_points, scenario.omega);
    let times = &scenario.impulses.times;
    let vals: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|&t| {
            let mut c = (0.0f64, 0.0f64);
            for side in [Side::Left, Side::Right] {
                let a = scenario.damping.eval_side(t, side);
                let (mut s1, mut s2) = (0.0, 0.0);
                for b in bounds {
                    let bb = big_b_profile(times, lower, scenario.delays[b.delay].tau(t), t, side);
                    s1 += b.lambda1.eval_side(t, side) * bb;
                    s2 += b.lambda2.eval_side(t, side) * bb;
                }
                let ratio = |s: f64| if s == 0.0 { 0.0 } else if a > 0.0 { s / a } else { f64::INFINITY };
                c.0 = c.0.max(ratio(s1));
                c.1 = c.1.max(ratio(s2));
            }
            let big_a = k.prim.between(k.window_start(t), t);
            (c.0, c.1, big_a)
        })
        .collect();
    vals.into_iter()
        .fold((0.0f64, 0.0f64, 0.0f64), |acc, v| (acc.0.max(v.0), acc.1.max(v.1), acc.2.max(v.2)))
}

/// Hypotheses and integral criteria for the zero solution of a general scenario.
pub fn check_scenario(scenario: &Scenario, opts: &CheckOptions) -> Vec<CriterionResult> {
    let band = opts.band;
    let mut out = Vec::new();
    let imp = &scenario.impulses;
    let (rb, sampled) = ratio_bounds(imp);
    let lower: Vec<f64> = rb.iter().map(|r| r.0).collect();
    let upper: Vec<f64> = rb.iter().map(|r| r.1).collect();

    let mut h1 = CriterionResult::new(CriterionId::H1, 0.0);
    for (j, (lo, hi)) in rb.iter().enumerate() {
        h1 = h1.value(&format!("b[{j}]"), *lo).value(&format!("a[{j}]"), *hi);
    }
    if sampled {
        h1 = h1.note("some ratio bounds were sampled on a finite grid and are estimates");
    }
    let h1_ok = lower.iter().all(|&b| b > 0.0);
    out.push(h1.with_verdict(if h1_ok { Verdict::Pass } else { Verdict::Fail }));

    let products = classify_products(&upper, band);
    let periodic_a = scenario.damping.is_periodic_with(scenario.omega);
    let mut h2 = CriterionResult::new(CriterionId::H2, 1.0)
        .value("period_product", products.period_product)
        .note(format!("product sequence: {:?}", products.class).to_lowercase());
    let (ii_verdict, h2_note) = if periodic_a {
        let per = scenario.damping.integral(0.0, scenario.omega);
        h2 = h2.value("damping_period_integral", per);
        if per > 0.0 {
            (Verdict::Pass, "damping integral diverges (positive mean over a period)".to_string())
        } else {
            (Verdict::Fail, "damping integrates to zero over a period".to_string())
        }
    } else {
        let h = opts.horizon;
        let a1 = scenario.damping.integral(0.0, h);
        let a2 = scenario.damping.integral(0.0, 2.0 * h);
        h2 = h2.value("damping_integral_h", a1).value("damping_integral_2h", a2);
        (
            Verdict::Inconclusive,
            format!("damping is not periodic; A({h}) = {a1:.6}, A({}) = {a2:.6}", 2.0 * h),
        )
    };
    h2 = h2.note(h2_note);
    let i_verdict = if products.bounded() { Verdict::Pass } else { Verdict::Fail };
    let h2_verdict = match (i_verdict, ii_verdict) {
        (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
        (Verdict::Pass, Verdict::Pass) => Verdict::Pass,
        _ => Verdict::Inconclusive,
    };
    out.push(h2.with_verdict(h2_verdict));

    let h3 = CriterionResult::new(CriterionId::H3i, 1.0)
        .value("period_product", products.period_product)
        .note("the test-function condition (ii) is not checked");
    let h3_verdict = match products.convergent() {
        Some(true) => Verdict::Pass,
        Some(false) => Verdict::Fail,
        None => Verdict::Inconclusive,
    };
    out.push(h3.with_verdict(h3_verdict));

    let Some(bounds) = scenario.yorke_bounds() else {
        for id in [CriterionId::H5, CriterionId::Thm2_3, CriterionId::SigmaYan, CriterionId::Cor2_2] {
            out.push(CriterionResult::new(id, 1.0).note("no Yorke bounds declared or derivable"));
        }
        return out;
    };
    if !h1_ok {
        for id in [CriterionId::H5, CriterionId::Thm2_3, CriterionId::SigmaYan, CriterionId::Cor2_2] {
            out.push(CriterionResult::new(id, 1.0).note("products B need positive lower ratio bounds"));
        }
        return out;
    }

    for (id, variant) in [(CriterionId::H5, AlphaVariant::Single), (CriterionId::Thm2_3, AlphaVariant::MultiDelay)] {
        let v = alpha_integrals(scenario, &bounds, &lower, variant, opts);
        let p = v.product();
        let mut r = alpha_result(id, &v).below(p, band);
        r = r.note(format!(
            "alpha1*alpha2 = {p:.9} against 2.25: {} (informational)",
            if p < 2.25 { "below" } else { "not below" }
        ));
        if let Some(n) = v.window.note() {
            r = r.note(n);
        }
        out.push(r);
    }

    let yan = alpha_integrals(scenario, &bounds, &lower, AlphaVariant::Yan, opts);
    let mut r = CriterionResult::new(CriterionId::SigmaYan, 1.5)
        .value("sigma", yan.alpha1)
        .value("t_sigma", yan.t_alpha1)
        .value("T", yan.window.lo)
        .below(yan.alpha1, band)
        .note("informational: lambda = max(lambda1, lambda2); not a sufficient condition established here");
    if let Some(n) = yan.window.note() {
        r = r.note(n);
    }
    out.push(r);

    let window = scenario_window(scenario, yorke_periodic(&bounds, scenario.omega), opts);
    let (c1, c2, big_a) = cor2_2_constants(scenario, &bounds, &lower, &window, opts);
    let value = (c1 * c2).sqrt() * (1.0 - (-big_a).exp());
    let mut r = CriterionResult::new(CriterionId::Cor2_2, 1.0)
        .value("c1", c1)
        .value("c2", c2)
        .value("A_limsup", big_a)
        .value("value", value)
        .below(value, band);
    if let Some(n) = window.note() {
        r = r.note(n);
    }
    out.push(r);
    out
}

pub(crate) fn alpha_result(id: CriterionId, v: &AlphaValues) -> CriterionResult {
    CriterionResult::new(id, 1.0)
        .value("alpha1", v.alpha1)
        .value("alpha2", v.alpha2)
        .value("alpha1_alpha2", v.product())
        .value("t_alpha1", v.t_alpha1)
        .value("t_alpha2", v.t_alpha2)
        .value("T", v.window.lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::criteria::strictly_below;
    use crate::grid::GridSettings;
    use crate::model::{History, ImpulseMap, ImpulseSchedule, Rhs};

    fn opts() -> CheckOptions {
        CheckOptions {
            grid: GridSettings::default(),
            ..CheckOptions::default()
        }
    }

    fn scenario(a: f64, impulses: ImpulseSchedule) -> Scenario {
        Scenario {
            omega: 1.0,
            damping: TimeFn::constant(a),
            delays: vec![DelaySpec::constant(1.0)],
            rhs: Rhs::linear_feedback(1.0, 0),
            impulses,
            history: History::constant(1.0),
            t0: 0.0,
            yorke: None,
            require_zero_equilibrium: false,
        }
    }

    fn unit_bounds() -> Vec<YorkeTerm> {
        vec![YorkeTerm {
            lambda1: TimeFn::constant(1.0),
            lambda2: TimeFn::constant(1.0),
            delay: 0,
        }]
    }

    #[test]
    fn constant_case_closed_form() {
        let s = scenario(1.0, ImpulseSchedule::none(1.0));
        let v = alpha_integrals(&s, &unit_bounds(), &[], AlphaVariant::Single, &opts());
        let expect = 1.0 - (-1.0f64).exp();
        assert!((v.alpha1 - expect).abs() < 1e-12);
        assert!((v.alpha2 - expect).abs() < 1e-12);
        assert!((v.product() - 0.399_576_400_893_728_4).abs() < 1e-12);
    }

    #[test]
    fn zero_damping_is_boundary() {
        let s = scenario(0.0, ImpulseSchedule::none(1.0));
        let v = alpha_integrals(&s, &unit_bounds(), &[], AlphaVariant::Single, &opts());
        assert!((v.alpha1 - 1.0).abs() < 1e-13);
        assert_eq!(strictly_below(v.product(), 1.0, 1e-9), Verdict::Inconclusive);
    }

    #[test]
    fn impulsive_product_doubles_alpha() {
        let imp = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b: -0.5 })]).unwrap();
        let s = scenario(0.0, imp);
        let v = alpha_integrals(&s, &unit_bounds(), &[0.5], AlphaVariant::Single, &opts());
        assert!((v.alpha1 - 2.0).abs() < 1e-12, "{}", v.alpha1);
        assert_eq!(strictly_below(v.product(), 1.0, 1e-9), Verdict::Fail);
    }

    #[test]
    fn yan_sigma_exceeds_alpha() {
        let s = scenario(1.0, ImpulseSchedule::none(1.0));
        let v = alpha_integrals(&s, &unit_bounds(), &[], AlphaVariant::Yan, &opts());
        // int_0^1 e^{u} du
        assert!((v.alpha1 - (1f64.exp() - 1.0)).abs() < 1e-11);
    }

    #[test]
    fn b_profile_sides() {
        let times = ImpulseTimes::new(vec![0.5], 1.0).unwrap();
        assert_eq!(big_b_profile(&times, &[0.5], 1.0, 1.5, Side::Left), 2.0);
        assert_eq!(big_b_profile(&times, &[0.5], 1.0, 1.5, Side::Right), 2.0);
        assert_eq!(big_b_profile(&times, &[0.5], 0.5, 1.0, Side::Left), 2.0);
        assert_eq!(big_b_profile(&times, &[0.5], 0.5, 1.0, Side::Right), 1.0);
        assert_eq!(big_b_profile(&times, &[0.5], 0.3, 0.5, Side::Right), 2.0);
    }

    #[test]
    fn b_window_edge_survives_rounding() {
        // 1.3 - 1.0 rounds above 0.3, which must still open the window
        let times = ImpulseTimes::new(vec![0.3], 1.0).unwrap();
        assert!(1.3 - 1.0 > 0.3);
        assert_eq!(big_b_profile(&times, &[0.5], 1.0, 1.3, Side::Left), 2.0);
        assert_eq!(big_b_profile(&times, &[0.5], 1.0, 1.3, Side::Right), 2.0);
    }

    #[test]
    fn instant_before_the_table_still_breaks_it() {
        // lo = 3 - 2.5 = 0.5 lies past the instant 0.4, whose window edge
        // 0.4 + 1.25 falls inside the table
        let imp = ImpulseSchedule::new(1.0, vec![(0.4, ImpulseMap::Linear { b: -0.5 })]).unwrap();
        let mut s = scenario(0.3, imp);
        s.delays = vec![DelaySpec::constant(1.25)];
        let v = alpha_integrals(&s, &unit_bounds(), &[0.5], AlphaVariant::Single, &opts());
        let slow = crate::reference::riemann_alpha(&s, &unit_bounds(), &[0.5], AlphaVariant::Single, v.t_alpha1, 200_000);
        assert!((v.alpha1 - slow.0).abs() < 1e-4, "{} vs {}", v.alpha1, slow.0);
    }

    #[test]
    fn primitive_cached_matches_direct() {
        let a = TimeFn::Rational {
            num: vec![1.0],
            den: vec![1.0, 2.0, 1.0],
        };
        let p = Primitive::new(&a, 0.0, 10.0, 100);
        for x in [0.0, 0.37, 3.3, 9.99] {
            let exact = 1.0 - 1.0 / (1.0 + x);
            assert!((p.at(x) - exact).abs() < 1e-12, "{x}");
        }
    }
}
