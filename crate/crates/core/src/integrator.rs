//! Method of steps: classical RK4 between breakpoints, exact impulses at the
//! instants `t_k`, delayed values from the cubic Hermite dense output.

use std::cell::Cell;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSettings;
use crate::model::Scenario;
use crate::quad::Side;
use crate::trajectory::{JumpRecord, Segment, Trajectory};

/// Magnitude beyond which a solution is declared divergent.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepControl {
    /// Base step.
    pub h: f64,
    /// A step is stretched onto the next breakpoint when it would otherwise
    /// leave less than `snap_fraction * h` before it.
    pub snap_fraction: f64,
    /// Refuse integration beyond this time.
    pub max_horizon: f64,
    /// Breakpoints closer than this (relative to `1 + |t|`) are merged.
    pub merge_tol: f64,
}

impl StepControl {
    pub fn new(h: f64) -> Self {
        Self {
            h,
            snap_fraction: 0.05,
            max_horizon: 1e7,
            merge_tol: 1e-12,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("delayed lookup at t = {t} precedes the history window starting at {window_start}")]
    Lookup { t: f64, window_start: f64 },
    #[error("solution diverged at t = {t} (value {value})")]
    Divergence { t: f64, value: f64 },
    #[error("residual grid point t = {t} lies within {h} of the breakpoint {breakpoint}")]
    NearBreakpoint { t: f64, breakpoint: f64, h: f64 },
}

/// Resumable integrator; `advance_to` may be called repeatedly with
/// increasing targets.
pub struct Solver<'a> {
    scenario: &'a Scenario,
    control: StepControl,
    traj: Trajectory,
    cached_slope: Option<f64>,
    tau_bar: f64,
}

impl<'a> Solver<'a> {
    pub fn new(scenario: &'a Scenario, control: StepControl) -> Result<Self, IntegrationError> {
        if !(control.h > 0.0 && control.h.is_finite()) {
            return Err(IntegrationError::Config(format!("step must be positive, got {}", control.h)));
        }
        let grid = GridSettings::default();
        let longest = control.h * (1.0 + control.snap_fraction);
        for i in scenario.rhs.used_delays() {
            let (tmin, _) = scenario.delays[i].range(0.0, scenario.omega, grid.validation_points);
            if tmin < longest {
                return Err(IntegrationError::Config(format!(
                    "delays[{i}] reaches tau = {tmin}, below the longest step {longest}; \
                     vanishing delays would need implicit stepping"
                )));
            }
        }
        let tau_bar = scenario.max_delay();
        let traj = Trajectory::new(scenario.history.clone(), scenario.t0, scenario.t0 - tau_bar);
        Ok(Self {
            scenario,
            control,
            traj,
            cached_slope: None,
            tau_bar,
        })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(self) -> Trajectory {
        self.traj
    }

    pub fn time(&self) -> f64 {
        self.traj.end()
    }

    /// Grid nodes in `(from, to]`: impulse instants, coefficient breakpoints and
    /// their images under up to two delay preimages, plus `to` itself.
    fn breakpoints(&self, from: f64, to: f64) -> Vec<f64> {
        let s = self.scenario;
        // (time, priority): impulse instants win when merging near-duplicates
        let mut pts: Vec<(f64, u8)> = Vec::new();
        let src_lo = (from - 2.0 * self.tau_bar - self.control.h).max(s.t0);
        let mut sources: Vec<f64> = vec![s.t0];
        sources.extend(s.history.kinks(self.traj.window_start, s.t0));
        for (_, t) in s.impulses.times.in_range(src_lo, to, false, true) {
            if t > s.t0 {
                sources.push(t);
                pts.push((t, 2));
            }
        }
        for t in s.damping.breakpoints(src_lo, to).into_iter().chain(s.rhs.breakpoints(src_lo, to)) {
            if t > s.t0 {
                sources.push(t);
                pts.push((t, 1));
            }
        }
        let used = s.rhs.used_delays();
        let mut generation = sources;
        for _ in 0..2 {
            let mut next = Vec::new();
            for &src in &generation {
                for &i in &used {
                    let t = s.delays[i].preimage(src);
                    if t > s.t0 && t <= to && t > src {
                        next.push(t);
                        pts.push((t, 0));
                    }
                }
            }
            generation = next;
        }
        pts.push((to, 1));
        pts.retain(|p| p.0 > from && p.0 <= to);
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, u8)> = Vec::with_capacity(pts.len());
        for p in pts {
            match merged.last_mut() {
                Some(last) if (p.0 - last.0).abs() <= self.control.merge_tol * (1.0 + p.0.abs()) => {
                    if p.1 > last.1 {
                        *last = p;
                    }
                }
                _ => merged.push(p),
            }
        }
        merged.into_iter().map(|p| p.0).collect()
    }

    /// `x' = -a(t) x + f(t, x_t)`; lookup failures are reported through `fault`.
    fn slope(&self, t: f64, x: f64, side: Side, fault: &Cell<Option<IntegrationError>>) -> f64 {
        let s = self.scenario;
        let start = self.traj.window_start;
        let lookup = |u: f64, sd: Side| -> f64 {
            if u < start - 1e-12 * (1.0 + u.abs()) {
                fault.set(Some(IntegrationError::Lookup { t: u, window_start: start }));
                return f64::NAN;
            }
            self.traj.eval_unchecked(u.max(start), sd)
        };
        -s.damping.eval_side(t, side) * x + s.rhs.eval(t, side, &s.delays, &lookup)
    }

    pub fn advance_to(&mut self, to: f64) -> Result<(), IntegrationError> {
        let s = self.scenario;
        let mut t = self.time();
        if to <= t {
            return Ok(());
        }
        if to > self.control.max_horizon {
            return Err(IntegrationError::Config(format!(
                "horizon {to} exceeds the maximum {}",
                self.control.max_horizon
            )));
        }
        let bps = self.breakpoints(t, to);
        let impulses = s.impulses.times.in_range(t, to, false, true);
        let mut next_impulse = 0;
        let mut x = self.traj.eval_unchecked(t, Side::Right);
        let h = self.control.h;
        let fault = Cell::new(None);
        for &bp in &bps {
            while t < bp {
                let mut tn = t + h;
                if tn >= bp - self.control.snap_fraction * h {
                    tn = bp;
                }
                let dt = tn - t;
                let k1 = match self.cached_slope {
                    Some(v) => v,
                    None => self.slope(t, x, Side::Right, &fault),
                };
                let th = t + 0.5 * dt;
                let k2 = self.slope(th, x + 0.5 * dt * k1, Side::Left, &fault);
                let k3 = self.slope(th, x + 0.5 * dt * k2, Side::Left, &fault);
                let k4 = self.slope(tn, x + dt * k3, Side::Left, &fault);
                let xn = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                let dn = self.slope(tn, xn, Side::Left, &fault);
                if let Some(e) = fault.take() {
                    return Err(e);
                }
                if !xn.is_finite() || xn.abs() > DIVERGENCE_LIMIT {
                    return Err(IntegrationError::Divergence { t: tn, value: xn });
                }
                self.traj.dense.segments.push(Segment {
                    t0: t,
                    t1: tn,
                    x0: x,
                    x1: xn,
                    d0: k1,
                    d1: dn,
                });
                t = tn;
                x = xn;
                self.cached_slope = Some(dn);
            }
            self.traj.breakpoints.push(bp);
            self.cached_slope = None;
            if next_impulse < impulses.len() && impulses[next_impulse].1 == bp {
                let k = impulses[next_impulse].0;
                let right = x + s.impulses.apply(k, x);
                if !right.is_finite() || right.abs() > DIVERGENCE_LIMIT {
                    return Err(IntegrationError::Divergence { t: bp, value: right });
                }
                self.traj.dense.jumps.push(JumpRecord {
                    k,
                    t: bp,
                    left: x,
                    right,
                });
                x = right;
                next_impulse += 1;
            }
        }
        Ok(())
    }
}

/// Integrates `scenario` from its start time to `t_end`.
pub fn integrate(scenario: &Scenario, control: StepControl, t_end: f64) -> Result<Trajectory, IntegrationError> {
    if !(t_end > scenario.t0) {
        return Err(IntegrationError::Config(format!(
            "t_end = {t_end} must exceed t0 = {}",
            scenario.t0
        )));
    }
    let mut solver = Solver::new(scenario, control)?;
    solver.advance_to(t_end)?;
    Ok(solver.into_trajectory())
}

/// Max over `grid` of `|x'(t) + a(t) x(t) - f(t, x_t)|`, with `x'` from a
/// centered fourth-order difference of the dense output (spacing `h / 4`).
pub fn residual_check(traj: &Trajectory, scenario: &Scenario, grid: &[f64], h: f64) -> Result<f64, IntegrationError> {
    let delta = h / 4.0;
    let mut fences: Vec<f64> = traj.breakpoints.clone();
    fences.push(traj.t0);
    fences.push(traj.end());
    fences.sort_by(f64::total_cmp);
    let mut worst = 0.0f64;
    for &t in grid {
        let j = fences.partition_point(|&b| b < t);
        for b in [j.checked_sub(1).map(|i| fences[i]), fences.get(j).copied()].into_iter().flatten() {
            if (t - b).abs() <= h {
                return Err(IntegrationError::NearBreakpoint { t, breakpoint: b, h });
            }
        }
        let x = |u: f64| traj.eval_unchecked(u, Side::Left);
        let deriv = (x(t - 2.0 * delta) - 8.0 * x(t - delta) + 8.0 * x(t + delta) - x(t + 2.0 * delta)) / (12.0 * delta);
        let lookup = |u: f64, sd: Side| traj.eval_unchecked(u, sd);
        let f = scenario.rhs.eval(t, Side::Left, &scenario.delays, &lookup);
        let r = (deriv + scenario.damping.eval(t) * x(t) - f).abs();
        worst = worst.max(r);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSettings;
    use crate::model::{build_scenario_with, DelaySpec, History, ImpulseMap, ImpulseSchedule, Rhs, TimeFn};

    fn decay() -> Scenario {
        Scenario {
            omega: 1.0,
            damping: TimeFn::constant(1.0),
            delays: vec![],
            rhs: Rhs::Zero,
            impulses: ImpulseSchedule::none(1.0),
            history: History::constant(1.0),
            t0: 0.0,
            yorke: None,
            require_zero_equilibrium: false,
        }
    }

    #[test]
    fn exponential_decay() {
        let s = decay();
        let tr = integrate(&s, StepControl::new(1e-3), 1.0).unwrap();
        assert!((tr.eval(1.0).unwrap() - (-1.0f64).exp()).abs() < 1e-9);
        let grid: Vec<f64> = (1..20).map(|j| j as f64 * 0.05 + 0.0013).collect();
        assert!(residual_check(&tr, &s, &grid, 1e-3).unwrap() < 1e-6);
    }

    #[test]
    fn piecewise_constant_with_impulse() {
        let mut s = decay();
        s.damping = TimeFn::constant(0.0);
        s.omega = 2.0;
        s.impulses = ImpulseSchedule::new(2.0, vec![(1.0, ImpulseMap::Linear { b: -0.5 })]).unwrap();
        let tr = integrate(&s, StepControl::new(1e-3), 1.9).unwrap();
        assert_eq!(tr.eval(1.0).unwrap(), 1.0);
        assert_eq!(tr.eval(0.7).unwrap(), 1.0);
        assert_eq!(tr.eval(1.0001).unwrap(), 0.5);
        assert_eq!(tr.eval(1.9).unwrap(), 0.5);
        assert_eq!(tr.jumps().len(), 1);
        let grid = [0.5, 1.5];
        assert_eq!(residual_check(&tr, &s, &grid, 1e-3).unwrap(), 0.0);
        assert!(matches!(
            residual_check(&tr, &s, &[1.0005], 1e-3),
            Err(IntegrationError::NearBreakpoint { .. })
        ));
    }

    #[test]
    fn inverse_square_example() {
        let s = build_scenario_with(
            r#"{"omega": 1,
                "damping": {"kind": "rational", "num": [1], "den": [1, 2, 1]},
                "delays": [{"kind": "constant", "tau": 0.5}],
                "rhs": {"kind": "piecewise_linear", "x": [-1, 0, 1], "y": [1, 0, 0]},
                "history": {"kind": "function", "f": {"kind": "expr", "expr":
                    {"op": "exp", "arg": {"op": "pow", "exponent": -1,
                     "base": {"op": "add", "args": [{"op": "time"}, {"op": "const", "value": 1}]}}}}}}"#,
            &GridSettings::default(),
        )
        .unwrap();
        let tr = integrate(&s, StepControl::new(1e-3), 1.0).unwrap();
        assert!((tr.eval(1.0).unwrap() - 0.5f64.exp()).abs() < 1e-6);
    }

    #[test]
    fn vanishing_delay_refused() {
        let mut s = decay();
        s.delays = vec![DelaySpec::constant(1e-3)];
        s.rhs = Rhs::linear_feedback(1.0, 0);
        assert!(matches!(
            Solver::new(&s, StepControl::new(1e-2)),
            Err(IntegrationError::Config(_))
        ));
    }

    #[test]
    fn divergence_reported() {
        let mut s = decay();
        s.damping = TimeFn::constant(-30.0);
        let e = integrate(&s, StepControl::new(1e-2), 10.0).unwrap_err();
        match e {
            IntegrationError::Divergence { t, .. } => assert!(t > 0.8 && t < 1.0),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn breakpoints_propagate_two_generations() {
        let mut s = decay();
        s.omega = 10.0;
        s.delays = vec![DelaySpec::constant(0.7)];
        s.rhs = Rhs::linear_feedback(0.5, 0);
        s.history = History::constant(1.0);
        s.impulses = ImpulseSchedule::new(10.0, vec![(1.0, ImpulseMap::Linear { b: 0.2 })]).unwrap();
        let tr = integrate(&s, StepControl::new(0.01), 3.0).unwrap();
        for b in [0.7, 1.0, 1.4, 1.7, 2.4, 3.0] {
            assert!(tr.breakpoints.iter().any(|x| (x - b).abs() < 1e-12), "missing {b}");
        }
        assert!(!tr.breakpoints.iter().any(|x| (x - 2.1).abs() < 1e-12));
        let nodes = tr.nodes();
        for b in &tr.breakpoints {
            assert!(nodes.contains(b));
        }
    }
}
