use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ModelError;

/// Periodically extended impulse instants: `t_{k+p} = t_k + omega`.
///
/// Instants are indexed from 1. The `q`-th repetition is `base + q * omega`,
/// computed in one rounding, so instants never drift with `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpulseTimes {
    pub base: Vec<f64>,
    pub period: f64,
}

impl ImpulseTimes {
    pub fn new(base: Vec<f64>, period: f64) -> Result<Self, ModelError> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(ModelError::invalid("omega", format!("period must be positive, got {period}")));
        }
        for (j, &t) in base.iter().enumerate() {
            if !(t > 0.0 && t < period) {
                return Err(ModelError::invalid(
                    format!("impulses[{j}].t"),
                    format!("base instant {t} must lie in (0, {period})"),
                ));
            }
            if j > 0 && base[j - 1] >= t {
                return Err(ModelError::invalid(
                    format!("impulses[{j}].t"),
                    "base instants must be strictly increasing",
                ));
            }
        }
        Ok(Self { base, period })
    }

    pub fn empty(period: f64) -> Self {
        Self {
            base: Vec::new(),
            period,
        }
    }

    pub fn per_period(&self) -> usize {
        self.base.len()
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    /// Index into the base arrays for the 1-based instant `k`.
    pub fn base_index(&self, k: usize) -> usize {
        (k - 1) % self.base.len()
    }

    /// The `k`-th instant, `k >= 1`.
    pub fn instant(&self, k: usize) -> f64 {
        assert!(k >= 1 && !self.base.is_empty());
        let p = self.base.len();
        let q = (k - 1) / p;
        self.base[(k - 1) % p] + q as f64 * self.period
    }

    /// All `(k, t_k)` with `t_k` in the given interval. `closed_lo`/`closed_hi`
    /// select whether the endpoints are included.
    pub fn in_range(&self, lo: f64, hi: f64, closed_lo: bool, closed_hi: bool) -> Vec<(usize, f64)> {
        let mut out = Vec::new();
        if self.base.is_empty() || hi < lo {
            return out;
        }
        let p = self.base.len();
        let mut period_start = self.base.clone();
        let mut q = 0usize;
        loop {
            if period_start[0] > hi {
                break;
            }
            for (j, &t) in period_start.iter().enumerate() {
                let above = if closed_lo { t >= lo } else { t > lo };
                let below = if closed_hi { t <= hi } else { t < hi };
                if above && below {
                    out.push((q * p + j + 1, t));
                }
            }
            q += 1;
            for (t, b) in period_start.iter_mut().zip(&self.base) {
                *t = b + q as f64 * self.period;
            }
        }
        out
    }
}

/// A user-supplied impulse map for programmatic scenarios.
#[derive(Clone)]
pub struct CustomMap {
    pub name: String,
    pub map: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomMap({})", self.name)
    }
}

/// The jump size `I_k(u)` applied at an impulse instant.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ImpulseMap {
    /// `I(u) = b u`.
    Linear { b: f64 },
    /// `I(u) = slope u + intercept`.
    Affine { slope: f64, intercept: f64 },
    /// Linear interpolation through `(u, values)` with linear extrapolation
    /// from the end segments.
    Tabulated { u: Vec<f64>, values: Vec<f64> },
    /// `I(anchor + u) - I(anchor)`: the impulse seen by a translated variable.
    Shifted { inner: Box<ImpulseMap>, anchor: f64 },
    #[serde(skip)]
    Custom(CustomMap),
}

impl ImpulseMap {
    pub fn custom(name: impl Into<String>, map: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ImpulseMap::Custom(CustomMap {
            name: name.into(),
            map: Arc::new(map),
        })
    }

    pub fn apply(&self, u: f64) -> f64 {
        match self {
            ImpulseMap::Linear { b } => b * u,
            ImpulseMap::Affine { slope, intercept } => slope * u + intercept,
            ImpulseMap::Tabulated { u: xs, values } => piecewise_linear(xs, values, u),
            ImpulseMap::Shifted { inner, anchor } => inner.apply(anchor + u) - inner.apply(*anchor),
            ImpulseMap::Custom(c) => (c.map)(u),
        }
    }

    /// `Some(b)` when the map is exactly `u -> b u`.
    pub fn linear_coefficient(&self) -> Option<f64> {
        match self {
            ImpulseMap::Linear { b } => Some(*b),
            ImpulseMap::Affine { slope, intercept } if *intercept == 0.0 => Some(*slope),
            ImpulseMap::Shifted { inner, .. } => inner.linear_coefficient(),
            _ => None,
        }
    }

    pub(crate) fn validate(&self, field: &str) -> Result<(), ModelError> {
        match self {
            ImpulseMap::Linear { b } if !b.is_finite() => Err(ModelError::invalid(field, "b must be finite")),
            ImpulseMap::Affine { slope, intercept } if !(slope.is_finite() && intercept.is_finite()) => {
                Err(ModelError::invalid(field, "slope and intercept must be finite"))
            }
            ImpulseMap::Tabulated { u, values } => {
                if u.len() < 2 || u.len() != values.len() {
                    return Err(ModelError::invalid(
                        field,
                        "tabulated impulse needs at least two (u, value) pairs of equal length",
                    ));
                }
                if u.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(ModelError::invalid(field, "tabulated u must be strictly increasing"));
                }
                Ok(())
            }
            ImpulseMap::Shifted { inner, .. } => inner.validate(field),
            _ => Ok(()),
        }
    }
}

pub(crate) fn piecewise_linear(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    let j = match xs.partition_point(|&v| v <= x) {
        0 => 0,
        j if j >= n => n - 2,
        j => j - 1,
    };
    let slope = (ys[j + 1] - ys[j]) / (xs[j + 1] - xs[j]);
    ys[j] + slope * (x - xs[j])
}

/// Declared bounds on one impulse map.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImpulseBounds {
    /// `(a_k, b_k)` with `b_k x^2 <= x (x + I_k(x)) <= a_k x^2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio_bounds: Option<(f64, f64)>,
    /// `(lower, upper)` bounds on difference quotients of `I_k` over `u >= 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_bounds: Option<(f64, f64)>,
}

/// Impulse instants, maps and optional declared bounds, extended periodically.
#[derive(Debug, Clone)]
pub struct ImpulseSchedule {
    pub times: ImpulseTimes,
    pub maps: Vec<ImpulseMap>,
    pub bounds: Vec<ImpulseBounds>,
}

impl ImpulseSchedule {
    pub fn none(period: f64) -> Self {
        Self {
            times: ImpulseTimes::empty(period),
            maps: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn new(period: f64, entries: Vec<(f64, ImpulseMap)>) -> Result<Self, ModelError> {
        Self::with_bounds(
            period,
            entries.into_iter().map(|(t, m)| (t, m, ImpulseBounds::default())).collect(),
        )
    }

    pub fn with_bounds(period: f64, entries: Vec<(f64, ImpulseMap, ImpulseBounds)>) -> Result<Self, ModelError> {
        let base = entries.iter().map(|e| e.0).collect();
        let times = ImpulseTimes::new(base, period)?;
        let mut maps = Vec::with_capacity(entries.len());
        let mut bounds = Vec::with_capacity(entries.len());
        for (j, (_, map, b)) in entries.into_iter().enumerate() {
            let field = format!("impulses[{j}]");
            map.validate(&field)?;
            if let Some((hi, lo)) = b.ratio_bounds {
                if !(lo > 0.0) {
                    return Err(ModelError::invalid(
                        format!("{field}.ratio_bounds"),
                        format!("lower ratio bound b_k must be > 0, got {lo}"),
                    ));
                }
                if hi < lo {
                    return Err(ModelError::invalid(
                        format!("{field}.ratio_bounds"),
                        format!("upper ratio bound a_k = {hi} is below b_k = {lo}"),
                    ));
                }
            }
            if let Some((lo, hi)) = b.slope_bounds {
                if !(lo > -1.0) {
                    return Err(ModelError::invalid(
                        format!("{field}.slope_bounds"),
                        format!("difference-quotient lower bound must be > -1, got {lo}"),
                    ));
                }
                if hi < lo {
                    return Err(ModelError::invalid(
                        format!("{field}.slope_bounds"),
                        format!("upper bound {hi} is below lower bound {lo}"),
                    ));
                }
            }
            maps.push(map);
            bounds.push(b);
        }
        Ok(Self { times, maps, bounds })
    }

    pub fn period(&self) -> f64 {
        self.times.period
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn per_period(&self) -> usize {
        self.times.per_period()
    }

    pub fn instant(&self, k: usize) -> f64 {
        self.times.instant(k)
    }

    /// `I_k`, extended by `I_{k+p} = I_k`.
    pub fn map(&self, k: usize) -> &ImpulseMap {
        &self.maps[self.times.base_index(k)]
    }

    pub fn apply(&self, k: usize, u: f64) -> f64 {
        self.map(k).apply(u)
    }

    /// Linear coefficients `b_k` when every map is linear.
    pub fn linear_coefficients(&self) -> Option<Vec<f64>> {
        self.maps.iter().map(ImpulseMap::linear_coefficient).collect()
    }

    /// Declared H1 lower ratio bounds `b_k`, or the exact ratio for linear maps.
    pub fn lower_ratio_bounds(&self) -> Option<Vec<f64>> {
        self.maps
            .iter()
            .zip(&self.bounds)
            .map(|(m, b)| b.ratio_bounds.map(|r| r.1).or_else(|| m.linear_coefficient().map(|c| 1.0 + c)))
            .collect()
    }

    /// Declared H1 upper ratio bounds `a_k`, or the exact ratio for linear maps.
    pub fn upper_ratio_bounds(&self) -> Option<Vec<f64>> {
        self.maps
            .iter()
            .zip(&self.bounds)
            .map(|(m, b)| b.ratio_bounds.map(|r| r.0).or_else(|| m.linear_coefficient().map(|c| 1.0 + c)))
            .collect()
    }

    /// Declared difference-quotient bounds `(b_k, a_k)` of the positive-axis
    /// condition, or the exact slope for linear maps.
    pub fn slope_bounds(&self) -> Option<Vec<(f64, f64)>> {
        self.maps
            .iter()
            .zip(&self.bounds)
            .map(|(m, b)| b.slope_bounds.or_else(|| m.linear_coefficient().map(|c| (c, c))))
            .collect()
    }

    /// Fails unless every `I_k(0)` vanishes within `1e-12`.
    pub fn check_zero_fixed(&self) -> Result<(), ModelError> {
        for (j, m) in self.maps.iter().enumerate() {
            let v = m.apply(0.0);
            if v.abs() > 1e-12 {
                return Err(ModelError::invalid(
                    format!("impulses[{j}]"),
                    format!("I_k(0) = {v} but the zero equilibrium is required"),
                ));
            }
        }
        Ok(())
    }
}
