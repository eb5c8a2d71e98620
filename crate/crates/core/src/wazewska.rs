//! The periodic Lasota-Wazewska model with impulses
//! `N' + a(t) N = sum_i b_i(t) exp(-beta_i(t) N(t - tau_i(t)))`: periodic
//! solutions by forward period-map iteration and attractivity experiments.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSettings;
use crate::integrator::{IntegrationError, Solver, StepControl};
use crate::model::{
    DelaySpec, History, ImpulseMap, ImpulseSchedule, ModelError, Rhs, Scenario, TimeFn, TranslatedTerm, WazewskaTerm,
};
use crate::quad::Side;
use crate::trajectory::{PeriodicProfile, Trajectory, SNAP_REL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WazewskaError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(
        "periodic iteration did not converge after {periods} periods; last period gaps {tail:?}. \
         Existence is unresolved unless an existence condition holds"
    )]
    NotConverged { periods: usize, tail: Vec<f64> },
    #[error("periodic solution does not match the model: {0}")]
    Mismatch(String),
}

/// A Lasota-Wazewska scenario with its (f0)/(i0) structure checked.
#[derive(Debug, Clone)]
pub struct WazewskaModel {
    pub scenario: Scenario,
}

impl WazewskaModel {
    /// Checks periodic positive coefficients and `u + I_k(u) > 0` for `u > 0`
    /// on a geometric grid.
    pub fn from_scenario(scenario: Scenario, grid: &GridSettings) -> Result<Self, ModelError> {
        let Rhs::Wazewska { terms } = &scenario.rhs else {
            return Err(ModelError::invalid("rhs", "a Lasota-Wazewska model needs rhs kind `wazewska`"));
        };
        if terms.is_empty() {
            return Err(ModelError::invalid("rhs.terms", "at least one term is required"));
        }
        let w = scenario.omega;
        let n = grid.validation_points;
        let positive = |f: &TimeFn, field: String| -> Result<(), ModelError> {
            if !f.is_periodic_with(w) {
                return Err(ModelError::invalid(field, format!("must be periodic with period {w}")));
            }
            let (m, _) = f.grid_extrema(0.0, w, n);
            if !(m > 0.0) {
                return Err(ModelError::invalid(field, format!("must be positive; sampled minimum {m}")));
            }
            Ok(())
        };
        positive(&scenario.damping, "damping".into())?;
        for (i, t) in terms.iter().enumerate() {
            positive(&t.b, format!("rhs.terms[{i}].b"))?;
            positive(&t.beta, format!("rhs.terms[{i}].beta"))?;
            if let DelaySpec::Periodic { tau } = &scenario.delays[t.delay] {
                positive(tau, format!("delays[{}]", t.delay))?;
            }
        }
        for (j, m) in scenario.impulses.maps.iter().enumerate() {
            for e in -6..=12 {
                let u = 10f64.powf(e as f64 * 0.5);
                if !(u + m.apply(u) > 0.0) {
                    return Err(ModelError::invalid(
                        format!("impulses[{j}]"),
                        format!("u + I(u) must stay positive for u > 0; fails at u = {u}"),
                    ));
                }
            }
        }
        Ok(Self { scenario })
    }

    pub fn omega(&self) -> f64 {
        self.scenario.omega
    }

    pub fn terms(&self) -> &[WazewskaTerm] {
        match &self.scenario.rhs {
            Rhs::Wazewska { terms } => terms,
            _ => unreachable!("checked at construction"),
        }
    }

    pub fn impulses(&self) -> &ImpulseSchedule {
        &self.scenario.impulses
    }

    /// `m_i` with `tau_i = m_i omega` for every term, if all delays have that form.
    pub fn multiples(&self) -> Option<Vec<u32>> {
        self.terms()
            .iter()
            .map(|t| self.scenario.delays[t.delay].period_multiple(self.omega()))
            .collect()
    }

    /// The scenario started from another history at `t0 = 0`.
    pub fn with_history(&self, history: History) -> Scenario {
        let mut s = self.scenario.clone();
        s.history = history;
        s.t0 = 0.0;
        s
    }

    /// The deviation system for `x = N - N*`: translated functional and
    /// impulses `I_k(N*(t_k) + u) - I_k(N*(t_k))`.
    pub fn translated(&self, n_star: &PeriodicSolution, base_history: History) -> Scenario {
        let profile = n_star.profile.clone();
        let terms = self
            .terms()
            .iter()
            .map(|t| TranslatedTerm {
                b: t.b.clone(),
                beta_outer: t.beta.clone(),
                beta_inner: t.beta.clone(),
                delay: t.delay,
            })
            .collect();
        let imp = &self.scenario.impulses;
        let maps = (0..imp.per_period())
            .map(|j| ImpulseMap::Shifted {
                inner: Box::new(imp.maps[j].clone()),
                anchor: profile.eval(imp.times.base[j], Side::Left),
            })
            .collect();
        let mut s = self.scenario.clone();
        s.rhs = Rhs::Translated { terms, profile: profile.clone() };
        s.impulses = ImpulseSchedule {
            times: imp.times.clone(),
            maps,
            bounds: imp.bounds.clone(),
        };
        s.history = History::Combined {
            base: Box::new(base_history),
            profile,
            weight: -1.0,
        };
        s.t0 = 0.0;
        s.yorke = None;
        s.require_zero_equilibrium = true;
        s
    }

    /// `sum_i b_i(t) exp(-beta_i(t) N(t - tau_i(t)))`.
    pub fn rhs_value(&self, t: f64, past: &dyn Fn(f64, Side) -> f64) -> f64 {
        self.scenario.rhs.eval(t, Side::Left, &self.scenario.delays, past)
    }

    /// Default starting level `sum_i max b_i / min a`.
    pub fn default_level(&self, grid: &GridSettings) -> f64 {
        let w = self.omega();
        let bsum: f64 = self
            .terms()
            .iter()
            .map(|t| t.b.grid_extrema(0.0, w, grid.extrema_points).1)
            .sum();
        bsum / self.scenario.damping.grid_extrema(0.0, w, grid.extrema_points).0
    }
}

/// One period of a positive periodic solution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PeriodicSolution {
    pub profile: Arc<PeriodicProfile>,
    /// Final period gap `sup |N(t) - N(t - omega)|`.
    pub residual: f64,
    pub iterations: usize,
    pub gaps: Vec<f64>,
    pub step: f64,
    pub start_level: f64,
}

impl PeriodicSolution {
    pub fn eval(&self, t: f64, side: Side) -> f64 {
        self.profile.eval(t, side)
    }

    pub fn omega(&self) -> f64 {
        self.profile.omega
    }

    /// `(min, max)` over one period, both jump sides.
    pub fn extrema(&self) -> (f64, f64) {
        self.profile.extrema()
    }

    /// Checks positivity and that jumps follow the model's impulse maps.
    pub fn check_against(&self, model: &WazewskaModel) -> Result<(), WazewskaError> {
        if (self.omega() - model.omega()).abs() > 1e-12 * model.omega() {
            return Err(WazewskaError::Mismatch(format!(
                "period {} differs from the model period {}",
                self.omega(),
                model.omega()
            )));
        }
        let (lo, _) = self.extrema();
        if !(lo > 0.0) {
            return Err(WazewskaError::Mismatch(format!("N* is not positive (minimum {lo})")));
        }
        let imp = model.impulses();
        if self.profile.jumps().len() != imp.per_period() {
            return Err(WazewskaError::Mismatch(format!(
                "{} jumps per period but the model has {} impulses",
                self.profile.jumps().len(),
                imp.per_period()
            )));
        }
        for (j, jr) in self.profile.jumps().iter().enumerate() {
            let expect = jr.left + imp.maps[j].apply(jr.left);
            if (jr.t - imp.times.base[j]).abs() > 1e-9 * model.omega()
                || (expect - jr.right).abs() > 1e-12 * expect.abs().max(1e-300)
            {
                return Err(WazewskaError::Mismatch(format!("jump {j} at {} is inconsistent", jr.t)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinderOptions {
    pub step: f64,
    pub start_level: Option<f64>,
}

impl FinderOptions {
    pub fn for_period(omega: f64) -> Self {
        Self {
            step: omega / 1000.0,
            start_level: None,
        }
    }
}

/// Trajectory lookup that snaps computed times onto nearby breakpoints.
fn snapped(traj: &Trajectory, t: f64, side: Side) -> f64 {
    let tol = SNAP_REL * (1.0 + t.abs());
    let j = traj.breakpoints.partition_point(|&b| b < t);
    let t = [j.wrapping_sub(1), j]
        .into_iter()
        .filter_map(|i| traj.breakpoints.get(i).copied())
        .find(|b| (b - t).abs() <= tol)
        .unwrap_or(t);
    traj.eval_unchecked(t, side)
}

/// Sample points `(t, side)` of the dense output in `[lo, hi]`: segment ends,
/// right limits at segment starts and interior quarter points.
fn dense_samples(traj: &Trajectory, lo: f64, hi: f64) -> Vec<(f64, Side)> {
    let segs = &traj.dense.segments;
    let eps = SNAP_REL * (1.0 + hi.abs());
    let first = segs.partition_point(|s| s.t1 < lo + eps);
    let mut out = Vec::new();
    for s in &segs[first..] {
        if s.t0 >= hi - eps {
            break;
        }
        let h = s.t1 - s.t0;
        out.push((s.t0, Side::Right));
        for q in [0.25, 0.5, 0.75] {
            out.push((s.t0 + q * h, Side::Left));
        }
        out.push((s.t1, Side::Left));
    }
    out
}

/// `sup_{t in [lo, hi]} |N(t) - N(t - omega)|`.
fn period_gap(traj: &Trajectory, lo: f64, hi: f64, omega: f64) -> f64 {
    dense_samples(traj, lo, hi)
        .into_iter()
        .map(|(t, side)| (traj.eval_unchecked(t, side) - snapped(traj, t - omega, side)).abs())
        .fold(0.0, f64::max)
}

/// Iterates the period map from a constant history until consecutive
/// periods agree within `tol`.
pub fn find_periodic(
    model: &WazewskaModel,
    tol: f64,
    max_periods: usize,
    opts: FinderOptions,
) -> Result<PeriodicSolution, WazewskaError> {
    let w = model.omega();
    let level = opts
        .start_level
        .unwrap_or_else(|| model.default_level(&GridSettings::default()));
    let scenario = model.with_history(History::constant(level));
    let mut solver = Solver::new(&scenario, StepControl::new(opts.step))?;
    let mut gaps = Vec::new();
    for m in 1..=max_periods {
        let end = m as f64 * w;
        solver.advance_to(end)?;
        let start = (m - 1) as f64 * w;
        let gap = period_gap(solver.trajectory(), start, end, w);
        gaps.push(gap);
        if gap < tol {
            let profile = PeriodicProfile::from_trajectory(solver.trajectory(), start, w, &model.impulses().times.base);
            let sol = PeriodicSolution {
                profile: Arc::new(profile),
                residual: gap,
                iterations: m,
                gaps,
                step: opts.step,
                start_level: level,
            };
            sol.check_against(model)?;
            return Ok(sol);
        }
    }
    let tail = gaps[gaps.len().saturating_sub(10)..].to_vec();
    Err(WazewskaError::NotConverged {
        periods: max_periods,
        tail,
    })
}

/// Sign behaviour of `N - N*` over the final periods of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Oscillation {
    Oscillatory,
    NonOscillatory,
    /// The deviation is at rounding level and carries no sign information.
    Negligible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractivityRun {
    pub scale: f64,
    /// `e_m`, the sup deviation over period `m`.
    pub deviations: Vec<f64>,
    pub first_below: Option<usize>,
    pub oscillation: Oscillation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractivityReport {
    pub tol: f64,
    pub horizon_periods: usize,
    pub runs: Vec<AttractivityRun>,
    pub attracting: bool,
}

/// Counts sign changes of `dev` over `samples`, ignoring entries smaller than
/// a thousandth of the largest one.
fn classify(devs: &[f64], floor: f64) -> Oscillation {
    let peak = devs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if peak <= floor {
        return Oscillation::Negligible;
    }
    let cut = 1e-3 * peak;
    let mut last = 0.0f64;
    let mut changes = 0;
    for &d in devs {
        if d.abs() <= cut {
            continue;
        }
        if last != 0.0 && d.signum() != last.signum() {
            changes += 1;
        }
        last = d;
    }
    if changes > 0 {
        Oscillation::Oscillatory
    } else {
        Oscillation::NonOscillatory
    }
}

fn attractivity_run(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    scale: f64,
    horizon: usize,
    tol: f64,
    step: f64,
) -> Result<AttractivityRun, WazewskaError> {
    let w = model.omega();
    let (_, top) = n_star.extrema();
    let scenario = model.with_history(History::constant(scale * top));
    let mut solver = Solver::new(&scenario, StepControl::new(step))?;
    let mut deviations = Vec::with_capacity(horizon);
    let mut tail = Vec::new();
    for m in 0..horizon {
        let (lo, hi) = (m as f64 * w, (m + 1) as f64 * w);
        solver.advance_to(hi)?;
        let traj = solver.trajectory();
        let mut e = 0.0f64;
        for (t, side) in dense_samples(traj, lo, hi) {
            let dev = traj.eval_unchecked(t, side) - n_star.eval(t, side);
            e = e.max(dev.abs());
            if m + 10 >= horizon {
                tail.push(dev);
            }
        }
        deviations.push(e);
    }
    let first_below = deviations.iter().position(|&e| e < tol);
    Ok(AttractivityRun {
        scale,
        deviations,
        first_below,
        oscillation: classify(&tail, 1e-12 * top),
    })
}

/// Integrates from histories `s * max N*` for each scale and records the
/// per-period deviation from `N*`. Runs execute in parallel and are reported
/// in the order of `scales`.
pub fn verify_attractivity(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    scales: &[f64],
    horizon_periods: usize,
    tol: f64,
) -> Result<AttractivityReport, WazewskaError> {
    n_star.check_against(model)?;
    let runs = scales
        .par_iter()
        .map(|&s| attractivity_run(model, n_star, s, horizon_periods, tol, n_star.step))
        .collect::<Result<Vec<_>, _>>()?;
    let attracting = runs.iter().all(|r| r.first_below.is_some());
    Ok(AttractivityReport {
        tol,
        horizon_periods,
        runs,
        attracting,
    })
}

/// Outcome of a long run of a general scenario measured against zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroAttractivity {
    pub horizon: f64,
    pub final_value: f64,
    /// `sup |x|` over the final tenth of the horizon.
    pub tail_sup: f64,
    pub attracted: bool,
}

/// Integrates to `horizon` and reports whether `x` has come within `tol` of 0.
pub fn zero_attractivity(scenario: &Scenario, step: f64, horizon: f64, tol: f64) -> Result<ZeroAttractivity, IntegrationError> {
    let traj = crate::integrator::integrate(scenario, StepControl::new(step), horizon)?;
    let lo = horizon - 0.1 * (horizon - scenario.t0);
    let tail_sup = traj.dense.sup(lo, horizon, 1.0).max(traj.dense.sup(lo, horizon, -1.0));
    Ok(ZeroAttractivity {
        horizon,
        final_value: traj.eval_unchecked(horizon, Side::Left),
        tail_sup,
        attracted: tail_sup < tol,
    })
}
