//! Piecewise-smooth solutions with recorded jumps.
//!
//! Values are left-continuous: at an impulse instant `eval` returns the value
//! before the jump and `eval_right_limit` the value after it.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::history::History;
use crate::model::timefn::reduce;
use crate::quad::Side;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("t = {t} is outside the trajectory domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
}

/// Relative distance within which an evaluation point is identified with a
/// jump instant.
pub const SNAP_REL: f64 = 1e-11;

/// One integration step with cubic Hermite data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub t0: f64,
    pub t1: f64,
    pub x0: f64,
    pub x1: f64,
    pub d0: f64,
    pub d1: f64,
}

impl Segment {
    fn coefficients(&self) -> [f64; 4] {
        let h = self.t1 - self.t0;
        let (x0, x1, m0, m1) = (self.x0, self.x1, h * self.d0, h * self.d1);
        [x0, m0, -3.0 * x0 - 2.0 * m0 + 3.0 * x1 - m1, 2.0 * x0 + m0 - 2.0 * x1 + m1]
    }

    pub fn eval(&self, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let u = 1.0 - s;
        let h00 = (1.0 + 2.0 * s) * u * u;
        let h10 = s * u * u;
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = -s * s * u;
        h00 * self.x0 + h01 * self.x1 + h * (h10 * self.d0 + h11 * self.d1)
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let c = self.coefficients();
        (c[1] + 2.0 * c[2] * s + 3.0 * c[3] * s * s) / h
    }

    /// Sup of `sign * x` over `[a, b]`, a subinterval of the segment, using the
    /// endpoints and the interior critical points of the cubic.
    fn sup(&self, a: f64, b: f64, sign: f64) -> f64 {
        let mut best = (sign * self.eval(a)).max(sign * self.eval(b));
        let h = self.t1 - self.t0;
        let c = self.coefficients();
        for s in quadratic_roots(3.0 * c[3], 2.0 * c[2], c[1]) {
            let t = self.t0 + s * h;
            if t > a && t < b {
                best = best.max(sign * self.eval(t));
            }
        }
        best
    }
}

/// Real roots of `a s^2 + b s + c`.
fn quadratic_roots(a: f64, b: f64, c: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    if a.abs() <= 1e-14 * scale {
        return if b != 0.0 { vec![-c / b] } else { Vec::new() };
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        return vec![0.0];
    }
    vec![q / a, c / q]
}

/// A recorded jump `right = left + I_k(left)` at instant `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JumpRecord {
    pub k: usize,
    pub t: f64,
    pub left: f64,
    pub right: f64,
}

/// Consecutive Hermite segments plus the jumps between them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub segments: Vec<Segment>,
    pub jumps: Vec<JumpRecord>,
}

impl Dense {
    pub fn start(&self) -> Option<f64> {
        self.segments.first().map(|s| s.t0)
    }

    pub fn end(&self) -> Option<f64> {
        self.segments.last().map(|s| s.t1)
    }

    /// Moves `t` onto a recorded jump instant lying within rounding distance,
    /// so that computed lags such as `(t_k + tau) - tau` see the intended side.
    pub fn snap(&self, t: f64) -> f64 {
        let tol = SNAP_REL * (1.0 + t.abs());
        let j = self.jumps.partition_point(|jr| jr.t < t);
        for i in [j.wrapping_sub(1), j] {
            if let Some(jr) = self.jumps.get(i) {
                if (jr.t - t).abs() <= tol {
                    return jr.t;
                }
            }
        }
        t
    }

    /// Left value for `start < t <= end`.
    pub fn eval_left(&self, t: f64) -> f64 {
        let t = self.snap(t);
        let j = self.segments.partition_point(|s| s.t1 < t).min(self.segments.len() - 1);
        self.segments[j].eval(t)
    }

    /// Right limit for `start <= t <= end`; at `end` a jump recorded there is
    /// honored.
    pub fn eval_right(&self, t: f64) -> f64 {
        let t = self.snap(t);
        let j = self.segments.partition_point(|s| s.t1 <= t);
        if j < self.segments.len() {
            return self.segments[j].eval(t);
        }
        match self.jumps.last() {
            Some(jr) if jr.t == t => jr.right,
            _ => self.segments[self.segments.len() - 1].x1,
        }
    }

    pub fn segment_at(&self, t: f64) -> Option<&Segment> {
        let j = self.segments.partition_point(|s| s.t1 < t);
        self.segments.get(j).filter(|s| s.t0 <= t)
    }

    /// Sup of `sign * x` over `[lo, hi]` including both sides of interior
    /// jumps; `-inf` if the window misses the stored range.
    pub fn sup(&self, lo: f64, hi: f64, sign: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let first = self.segments.partition_point(|s| s.t1 < lo);
        for seg in &self.segments[first..] {
            if seg.t0 >= hi {
                break;
            }
            let a = lo.max(seg.t0);
            let b = hi.min(seg.t1);
            if a <= b {
                best = best.max(seg.sup(a, b, sign));
            }
        }
        best
    }
}

/// A solution on `[window_start, end]`: the initial history up to `t0`, then
/// integrated segments.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub history: History,
    pub t0: f64,
    pub window_start: f64,
    pub dense: Dense,
    /// Impulse instants and propagated discontinuity points used as grid nodes.
    pub breakpoints: Vec<f64>,
}

impl Trajectory {
    pub fn new(history: History, t0: f64, window_start: f64) -> Self {
        Self {
            history,
            t0,
            window_start,
            dense: Dense::default(),
            breakpoints: Vec::new(),
        }
    }

    pub fn end(&self) -> f64 {
        self.dense.end().unwrap_or(self.t0)
    }

    fn check(&self, t: f64) -> Result<(), TrajectoryError> {
        if t >= self.window_start && t <= self.end() {
            Ok(())
        } else {
            Err(TrajectoryError::Domain {
                t,
                lo: self.window_start,
                hi: self.end(),
            })
        }
    }

    /// Left-continuous value `x(t)`.
    pub fn eval(&self, t: f64) -> Result<f64, TrajectoryError> {
        self.check(t)?;
        Ok(self.eval_unchecked(t, Side::Left))
    }

    /// `x(t+)`.
    pub fn eval_right_limit(&self, t: f64) -> Result<f64, TrajectoryError> {
        self.check(t)?;
        Ok(self.eval_unchecked(t, Side::Right))
    }

    pub fn value(&self, t: f64, side: Side) -> Result<f64, TrajectoryError> {
        self.check(t)?;
        Ok(self.eval_unchecked(t, side))
    }

    pub(crate) fn eval_unchecked(&self, t: f64, side: Side) -> f64 {
        if self.dense.segments.is_empty() {
            return self.history.eval(t, side);
        }
        match side {
            Side::Left if t <= self.t0 => self.history.eval(t, side),
            Side::Left => self.dense.eval_left(t),
            Side::Right if t < self.t0 => self.history.eval(t, side),
            Side::Right => self.dense.eval_right(t),
        }
    }

    /// `max(0, sup_{s in [t - tau, t]} sign * x(s))`, exact within the
    /// Hermite model.
    pub fn yorke_sup(&self, t: f64, tau: f64, sign: f64) -> Result<f64, TrajectoryError> {
        let lo = t - tau;
        self.check(lo)?;
        self.check(t)?;
        let mut best = 0.0f64;
        if lo <= self.t0 {
            best = best.max(self.history.sup(lo, t.min(self.t0), sign));
        }
        if t > self.t0 {
            best = best.max(self.dense.sup(lo.max(self.t0), t, sign));
        }
        Ok(best)
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.dense.jumps
    }

    /// Integration nodes from `t0` on.
    pub fn nodes(&self) -> Vec<f64> {
        let mut v = vec![self.t0];
        v.extend(self.dense.segments.iter().map(|s| s.t1));
        v
    }

    /// Writes `t,value,side` rows from `t0`; jumps emit a left and a right row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,value,side")?;
        writeln!(w, "{},{},interior", self.t0, self.eval_unchecked(self.t0, Side::Left))?;
        write_dense_rows(&mut w, &self.dense)
    }
}

fn write_dense_rows<W: Write>(w: &mut W, dense: &Dense) -> io::Result<()> {
    let mut jumps = dense.jumps.iter().peekable();
    for seg in &dense.segments {
        match jumps.peek() {
            Some(j) if j.t == seg.t1 => {
                writeln!(w, "{},{},left", seg.t1, j.left)?;
                writeln!(w, "{},{},right", seg.t1, j.right)?;
                jumps.next();
            }
            _ => writeln!(w, "{},{},interior", seg.t1, seg.x1)?,
        }
    }
    Ok(())
}

/// One period `[0, omega]` of a periodic solution, evaluated periodically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicProfile {
    pub omega: f64,
    pub dense: Dense,
}

impl PeriodicProfile {
    /// Cuts `[start, start + omega]` out of `traj` and shifts it to `[0, omega]`.
    /// Shifted times within `1e-9 * omega` of a value in `snap` (and of 0 and
    /// omega) are snapped onto it.
    pub fn from_trajectory(traj: &Trajectory, start: f64, omega: f64, snap: &[f64]) -> Self {
        let eps = 1e-9 * omega;
        let fix = |t: f64| -> f64 {
            let r = t - start;
            if r.abs() < eps {
                return 0.0;
            }
            if (r - omega).abs() < eps {
                return omega;
            }
            snap.iter().copied().find(|s| (r - s).abs() < eps).unwrap_or(r)
        };
        let end = start + omega;
        let segments = traj
            .dense
            .segments
            .iter()
            .filter(|s| s.t0 >= start - eps && s.t1 <= end + eps)
            .map(|s| Segment {
                t0: fix(s.t0),
                t1: fix(s.t1),
                ..*s
            })
            .collect();
        let jumps = traj
            .dense
            .jumps
            .iter()
            .filter(|j| j.t > start + eps && j.t <= end + eps)
            .map(|j| JumpRecord { t: fix(j.t), ..*j })
            .collect();
        Self {
            omega,
            dense: Dense { segments, jumps },
        }
    }

    pub fn eval(&self, t: f64, side: Side) -> f64 {
        let r = self.phase(t);
        match side {
            Side::Left => self.dense.eval_left(if r == 0.0 { self.omega } else { r }),
            Side::Right => self.dense.eval_right(r),
        }
    }

    /// `t` reduced into `[0, omega)`, snapped onto jump instants and onto 0
    /// within rounding distance.
    fn phase(&self, t: f64) -> f64 {
        let tol = SNAP_REL * (1.0 + t.abs());
        let r = reduce(t, self.omega);
        if r < tol || self.omega - r < tol {
            return 0.0;
        }
        self.jumps()
            .iter()
            .map(|j| j.t)
            .find(|&tj| (tj - r).abs() <= tol)
            .unwrap_or(r)
    }

    /// One-sided derivative of the dense model.
    pub fn derivative(&self, t: f64, side: Side) -> f64 {
        let r = self.phase(t);
        let segs = &self.dense.segments;
        let j = match side {
            Side::Left => segs.partition_point(|s| s.t1 < if r == 0.0 { self.omega } else { r }),
            Side::Right => segs.partition_point(|s| s.t1 <= r),
        };
        let seg = &segs[j.min(segs.len() - 1)];
        seg.derivative(if side == Side::Left && r == 0.0 { self.omega } else { r })
    }

    /// Sup of `sign * x` over `[lo, hi]`, unrolled over periods.
    pub fn sup(&self, lo: f64, hi: f64, sign: f64) -> f64 {
        let mut best = f64::NEG_INFINITY;
        let mut q = (lo / self.omega).floor();
        loop {
            let base = q * self.omega;
            if base > hi {
                break;
            }
            let a = (lo - base).max(0.0);
            let b = (hi - base).min(self.omega);
            if a <= b {
                best = best.max(self.dense.sup(a, b, sign));
            }
            q += 1.0;
        }
        best
    }

    /// `(min, max)` over one period, both jump sides included.
    pub fn extrema(&self) -> (f64, f64) {
        (-self.dense.sup(0.0, self.omega, -1.0), self.dense.sup(0.0, self.omega, 1.0))
    }

    pub fn jumps(&self) -> &[JumpRecord] {
        &self.dense.jumps
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,value,side")?;
        writeln!(w, "0,{},interior", self.dense.eval_right(0.0))?;
        write_dense_rows(&mut w, &self.dense)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_segments(h: f64, n: usize) -> Dense {
        let segments = (0..n)
            .map(|j| {
                let t0 = j as f64 * h;
                let t1 = (j + 1) as f64 * h;
                Segment {
                    t0,
                    t1,
                    x0: (-t0).exp(),
                    x1: (-t1).exp(),
                    d0: -(-t0).exp(),
                    d1: -(-t1).exp(),
                }
            })
            .collect();
        Dense {
            segments,
            jumps: Vec::new(),
        }
    }

    fn step_trajectory() -> Trajectory {
        let mut tr = Trajectory::new(History::Constant { value: 1.0 }, 0.0, -1.0);
        let seg = |t0: f64, t1: f64, x: f64| Segment {
            t0,
            t1,
            x0: x,
            x1: x,
            d0: 0.0,
            d1: 0.0,
        };
        tr.dense.segments = vec![seg(0.0, 1.0, 1.0), seg(1.0, 2.0, 0.5)];
        tr.dense.jumps = vec![JumpRecord {
            k: 1,
            t: 1.0,
            left: 1.0,
            right: 0.5,
        }];
        tr
    }

    #[test]
    fn left_continuity() {
        let tr = step_trajectory();
        assert_eq!(tr.eval(1.0).unwrap(), 1.0);
        assert_eq!(tr.eval_right_limit(1.0).unwrap(), 0.5);
        assert_eq!(tr.eval(1.5).unwrap(), 0.5);
        assert_eq!(tr.eval(-0.5).unwrap(), 1.0);
        let e = tr.eval(2.5).unwrap_err();
        assert_eq!(
            e,
            TrajectoryError::Domain {
                t: 2.5,
                lo: -1.0,
                hi: 2.0
            }
        );
    }

    #[test]
    fn hermite_exponential() {
        let d = exp_segments(1e-3, 1000);
        assert!((d.eval_left(0.5) - (-0.5f64).exp()).abs() < 1e-9);
        assert!((d.eval_left(0.5004) - (-0.5004f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn yorke_sup_constant_windows() {
        let mut tr = Trajectory::new(History::Constant { value: -1.0 }, 0.0, -5.0);
        assert_eq!(tr.yorke_sup(0.0, 2.0, 1.0).unwrap(), 0.0);
        assert_eq!(tr.yorke_sup(0.0, 2.0, -1.0).unwrap(), 1.0);
        tr.history = History::Constant { value: 2.0 };
        assert_eq!(tr.yorke_sup(0.0, 2.0, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn yorke_sup_sees_both_jump_sides() {
        let tr = step_trajectory();
        assert_eq!(tr.yorke_sup(2.0, 0.5, 1.0).unwrap(), 0.5);
        assert_eq!(tr.yorke_sup(2.0, 1.0, 1.0).unwrap(), 1.0);
        // window ending at the jump: only the left value belongs to it
        assert_eq!(tr.yorke_sup(1.0, 0.5, -1.0).unwrap(), 0.0);
        assert_eq!(tr.yorke_sup(1.0, 0.5, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn sine_sup_from_critical_points() {
        // coarse Hermite sine: the interior maximum is located analytically
        let h = 0.3;
        let n = 12;
        let start = -std::f64::consts::PI / 2.0;
        let segments = (0..n)
            .map(|j| {
                let t0 = start + j as f64 * h;
                let t1 = t0 + h;
                Segment {
                    t0,
                    t1,
                    x0: t0.sin(),
                    x1: t1.sin(),
                    d0: t0.cos(),
                    d1: t1.cos(),
                }
            })
            .collect::<Vec<_>>();
        let d = Dense {
            segments: segments.clone(),
            jumps: Vec::new(),
        };
        let mut oracle = f64::NEG_INFINITY;
        for seg in &segments {
            for i in 0..=20000 {
                oracle = oracle.max(seg.eval(seg.t0 + h * i as f64 / 20000.0));
            }
        }
        let got = d.sup(start, start + n as f64 * h, 1.0);
        assert!(got >= oracle && got - oracle < 1e-9);
    }

    #[test]
    fn csv_rows() {
        let tr = step_trajectory();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,value,side\n0,1,interior\n1,1,left\n1,0.5,right\n2,0.5,interior\n");
    }

    #[test]
    fn profile_periodic_evaluation() {
        let tr = step_trajectory();
        let p = PeriodicProfile::from_trajectory(&tr, 0.0, 2.0, &[1.0]);
        assert_eq!(p.eval(3.0, Side::Left), 1.0);
        assert_eq!(p.eval(3.0, Side::Right), 0.5);
        assert_eq!(p.eval(4.0, Side::Left), 0.5);
        assert_eq!(p.eval(4.0, Side::Right), 1.0);
        assert_eq!(p.extrema(), (0.5, 1.0));
    }
}
