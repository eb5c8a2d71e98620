//! Problem vocabulary: coefficient functions, delays, impulses, histories and
//! complete scenarios.

pub mod delay;
pub mod history;
pub mod impulse;
pub mod rhs;
pub mod timefn;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::GridSettings;
pub use delay::DelaySpec;
pub use history::History;
pub use impulse::{ImpulseBounds, ImpulseMap, ImpulseSchedule, ImpulseTimes};
pub use rhs::{Rhs, TranslatedTerm, WazewskaTerm, YorkeTerm};
pub use timefn::{Expr, ImpulseProduct, TimeFn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
    #[error("scenario does not match the schema: {0}")]
    Schema(String),
}

impl ModelError {
    pub fn invalid(field: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Invalid {
            field: field.into(),
            message: message.into(),
        }
    }
}

/// One entry of the `impulses` array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImpulseEntry {
    pub t: f64,
    #[serde(flatten)]
    pub map: ImpulseMap,
    #[serde(flatten)]
    pub bounds: ImpulseBounds,
}

/// The JSON form of a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub omega: f64,
    pub damping: TimeFn,
    #[serde(default)]
    pub delays: Vec<DelaySpec>,
    pub rhs: Rhs,
    #[serde(default)]
    pub impulses: Vec<ImpulseEntry>,
    pub history: History,
    #[serde(default)]
    pub t0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yorke: Option<Vec<YorkeTerm>>,
    #[serde(default)]
    pub require_zero_equilibrium: bool,
}

/// A validated impulsive delay problem
/// `x' + a(t) x = f(t, x_t)`, `x(t_k+) = x(t_k) + I_k(x(t_k))`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub omega: f64,
    pub damping: TimeFn,
    pub delays: Vec<DelaySpec>,
    pub rhs: Rhs,
    pub impulses: ImpulseSchedule,
    pub history: History,
    pub t0: f64,
    pub yorke: Option<Vec<YorkeTerm>>,
    pub require_zero_equilibrium: bool,
}

/// Parses and validates a JSON scenario.
pub fn build_scenario(text: &str) -> Result<Scenario, ModelError> {
    build_scenario_with(text, &GridSettings::from_env())
}

pub fn build_scenario_with(text: &str, grid: &GridSettings) -> Result<Scenario, ModelError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ModelError::Schema(e.to_string()))?;
    Scenario::from_config(cfg, grid)
}

/// Sup of all delays over `[lo, hi]`.
pub fn max_delay(scenario: &Scenario, lo: f64, hi: f64, grid: &GridSettings) -> f64 {
    scenario
        .delays
        .iter()
        .map(|d| d.range(lo, hi, grid.validation_points).1)
        .fold(0.0, f64::max)
}

impl Scenario {
    pub fn from_config(cfg: ScenarioConfig, grid: &GridSettings) -> Result<Self, ModelError> {
        let ScenarioConfig {
            omega,
            damping,
            delays,
            rhs,
            impulses,
            history,
            t0,
            yorke,
            require_zero_equilibrium,
        } = cfg;
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(ModelError::invalid("omega", format!("must be positive, got {omega}")));
        }
        let entries = impulses.into_iter().map(|e| (e.t, e.map, e.bounds)).collect();
        let impulses = ImpulseSchedule::with_bounds(omega, entries)?;
        let s = Scenario {
            omega,
            damping,
            delays,
            rhs,
            impulses,
            history,
            t0,
            yorke,
            require_zero_equilibrium,
        };
        s.validated(grid)
    }

    /// Fills period placeholders and checks every invariant.
    pub fn validated(mut self, grid: &GridSettings) -> Result<Self, ModelError> {
        let omega = self.omega;
        self.damping.resolve_period(omega);
        for d in &mut self.delays {
            d.resolve(omega);
        }
        self.rhs.resolve(omega);
        self.history.resolve(omega);
        if let Some(y) = &mut self.yorke {
            for term in y {
                term.lambda1.resolve_period(omega);
                term.lambda2.resolve_period(omega);
            }
        }
        self.validate(grid)?;
        Ok(self)
    }

    pub fn validate(&self, grid: &GridSettings) -> Result<(), ModelError> {
        if !self.t0.is_finite() {
            return Err(ModelError::invalid("t0", "must be finite"));
        }
        self.damping.validate("damping")?;
        let (lo, hi) = self.validation_window();
        let (amin, _) = self.damping.grid_extrema(lo, hi, self.validation_cells(grid));
        if amin < 0.0 {
            return Err(ModelError::invalid("damping", format!("a(t) must be >= 0; sampled minimum {amin}")));
        }
        for (i, d) in self.delays.iter().enumerate() {
            d.validate(&format!("delays[{i}]"), self.omega, grid.validation_points)?;
        }
        self.rhs.validate(self.delays.len())?;
        if let Some(terms) = &self.yorke {
            for (i, term) in terms.iter().enumerate() {
                if term.delay >= self.delays.len() {
                    return Err(ModelError::invalid(format!("yorke[{i}].delay"), "delay index out of range"));
                }
                for (name, f) in [("lambda1", &term.lambda1), ("lambda2", &term.lambda2)] {
                    let field = format!("yorke[{i}].{name}");
                    f.validate(&field)?;
                    let (m, _) = f.grid_extrema(lo, hi, self.validation_cells(grid));
                    if m < 0.0 {
                        return Err(ModelError::invalid(field, format!("must be >= 0; sampled minimum {m}")));
                    }
                }
            }
        }
        if self.require_zero_equilibrium {
            self.impulses.check_zero_fixed()?;
        }
        let tau = self.max_delay();
        self.history.validate(self.t0 - tau, self.t0)?;
        Ok(())
    }

    /// Window used for grid validation of coefficients: one period for
    /// periodic data, eight periods otherwise.
    fn validation_window(&self) -> (f64, f64) {
        let span = if self.damping.is_periodic_with(self.omega) {
            self.omega
        } else {
            8.0 * self.omega
        };
        (self.t0, self.t0 + span)
    }

    fn validation_cells(&self, grid: &GridSettings) -> usize {
        let (lo, hi) = self.validation_window();
        (grid.validation_points as f64 * ((hi - lo) / self.omega).ceil()) as usize
    }

    /// `tau_bar`, the largest delay over all times.
    pub fn max_delay(&self) -> f64 {
        max_delay(self, 0.0, self.omega, &GridSettings::default())
    }

    pub fn window_start(&self) -> f64 {
        self.t0 - self.max_delay()
    }

    /// Declared Yorke bounds, else those implied by the functional.
    pub fn yorke_bounds(&self) -> Option<Vec<YorkeTerm>> {
        self.yorke.clone().or_else(|| self.rhs.derived_yorke(&self.delays))
    }

    /// True when damping, delays and functional all repeat with period omega.
    pub fn is_periodic(&self) -> bool {
        self.damping.is_periodic_with(self.omega)
            && self.rhs.is_periodic_with(self.omega)
            && self.delays.iter().all(|d| match d {
                DelaySpec::Periodic { tau } => tau.is_periodic_with(self.omega),
                _ => true,
            })
    }

    pub fn to_config(&self) -> ScenarioConfig {
        let times = &self.impulses.times;
        ScenarioConfig {
            omega: self.omega,
            damping: self.damping.clone(),
            delays: self.delays.clone(),
            rhs: self.rhs.clone(),
            impulses: (0..times.per_period())
                .map(|j| ImpulseEntry {
                    t: times.base[j],
                    map: self.impulses.maps[j].clone(),
                    bounds: self.impulses.bounds[j],
                })
                .collect(),
            history: self.history.clone(),
            t0: self.t0,
            yorke: self.yorke.clone(),
            require_zero_equilibrium: self.require_zero_equilibrium,
        }
    }

    /// JSON text of the scenario; fails for programmatic-only parts.
    pub fn to_json(&self) -> Result<String, ModelError> {
        serde_json::to_string_pretty(&self.to_config()).map_err(|e| ModelError::Schema(e.to_string()))
    }
}
