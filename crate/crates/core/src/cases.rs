//! Bundled scenarios and the end-to-end runs behind `reproduce`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::criteria::{check_scenario, check_wazewska, CheckOptions, CriterionId, CriterionResult, Verdict};
use crate::grid::GridSettings;
use crate::integrator::{integrate, IntegrationError, StepControl};
use crate::model::{build_scenario_with, ModelError, Scenario};
use crate::output::{attractivity_csv, json_bytes, profile_csv, report_json, trajectory_csv};
use crate::quad::Side;
use crate::wazewska::{
    find_periodic, verify_attractivity, zero_attractivity, AttractivityReport, FinderOptions, PeriodicSolution,
    WazewskaError, WazewskaModel, ZeroAttractivity,
};

#[derive(Debug, Error)]
pub enum CaseError {
    #[error("unknown case `{0}`")]
    Unknown(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Wazewska(#[from] WazewskaError),
}

impl CaseError {
    /// Configuration problems as opposed to numerical failures.
    pub fn is_config(&self) -> bool {
        matches!(self, CaseError::Unknown(_) | CaseError::Model(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    /// Stability of the zero solution.
    Generic,
    /// Attraction to the positive periodic solution.
    Wazewska,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub id: String,
    pub summary: String,
    pub kind: CaseKind,
    /// Scenario JSON.
    pub config: String,
}

impl Case {
    fn new(id: &str, summary: &str, kind: CaseKind, config: String) -> Self {
        Self {
            id: id.into(),
            summary: summary.into(),
            kind,
            config,
        }
    }

    pub fn scenario(&self, grid: &GridSettings) -> Result<Scenario, ModelError> {
        build_scenario_with(&self.config, grid)
    }
}

/// Ids accepted by `reproduce`.
pub const REPRODUCIBLE: [&str; 4] = ["example-2-22", "liu-takeuchi", "graef-compare", "boundary-alpha"];

/// `lambda (1 - e^{-1})` for the constant test problem `x' + x = -lambda x(t - 1)`.
fn boundary_gain(product_root: f64) -> f64 {
    product_root / (1.0 - (-1.0f64).exp())
}

fn linear_feedback_config(gain: f64) -> String {
    format!(
        r#"{{
  "omega": 1.0,
  "damping": {{"kind": "constant", "value": 1.0}},
  "delays": [{{"kind": "constant", "tau": 1.0}}],
  "rhs": {{"kind": "piecewise_linear", "delay": 0, "x": [-1.0, 1.0], "y": [{gain:?}, {neg:?}]}},
  "history": {{"kind": "constant", "value": 1.0}}
}}"#,
        neg = -gain
    )
}

fn wazewska_config(damping: &str, b: &str, beta: &str, delay: &str, impulses: &str, start: f64) -> String {
    format!(
        r#"{{
  "omega": 1.0,
  "damping": {damping},
  "delays": [{delay}],
  "rhs": {{"kind": "wazewska", "terms": [{{"b": {b}, "beta": {beta}, "delay": 0}}]}},
  "impulses": [{impulses}],
  "history": {{"kind": "constant", "value": {start:?}}}
}}"#
    )
}

/// Every bundled scenario, in a fixed order.
pub fn bundled() -> Vec<Case> {
    let multiple = r#"{"kind": "multiple", "m": 1}"#;
    let unit_beta = r#"{"kind": "constant", "value": 1.0}"#;
    vec![
        Case::new(
            "example-2-22",
            "x' + x/(t+1)^2 = g(x(t - 1/2)), g(x) = -x for x <= 0 and 0 otherwise; c exp(1/(t+1)) solves it for every c > 0",
            CaseKind::Generic,
            r#"{
  "omega": 1.0,
  "damping": {"kind": "rational", "num": [1.0], "den": [1.0, 2.0, 1.0]},
  "delays": [{"kind": "constant", "tau": 0.5}],
  "rhs": {"kind": "piecewise_linear", "delay": 0, "x": [-1.0, 0.0, 1.0], "y": [1.0, 0.0, 0.0]},
  "history": {"kind": "function", "f": {"kind": "expr", "expr": {"op": "exp", "arg":
    {"op": "div", "num": {"op": "const", "value": 1.0}, "den": {"op": "add", "args": [{"op": "time"}, {"op": "const", "value": 1.0}]}}}}}
}"#
            .to_string(),
        ),
        Case::new(
            "boundary-alpha-below",
            "x' + x = -k x(t - 1) with alpha1 alpha2 = 0.9801",
            CaseKind::Generic,
            linear_feedback_config(boundary_gain(0.99)),
        ),
        Case::new(
            "boundary-alpha-above",
            "x' + x = -k x(t - 1) with alpha1 alpha2 = 1.0201",
            CaseKind::Generic,
            linear_feedback_config(boundary_gain(1.01)),
        ),
        Case::new(
            "impulsive-linear",
            "periodic damping, linear feedback and two impulses per period",
            CaseKind::Generic,
            r#"{
  "omega": 1.0,
  "damping": {"kind": "trig", "mean": 1.0, "cos": [0.5]},
  "delays": [{"kind": "constant", "tau": 1.0}],
  "rhs": {"kind": "piecewise_linear", "delay": 0, "x": [-1.0, 1.0], "y": [0.5, -0.5]},
  "impulses": [
    {"t": 0.25, "kind": "linear", "params": {"b": -0.3}},
    {"t": 0.6, "kind": "linear", "params": {"b": 0.2}}
  ],
  "history": {"kind": "constant", "value": 1.0}
}"#
            .to_string(),
        ),
        Case::new(
            "liu-takeuchi",
            "one-term model with identity impulses, where the pointwise product condition reads beta b <= a",
            CaseKind::Wazewska,
            wazewska_config(
                r#"{"kind": "trig", "mean": 1.0, "cos": [0.2]}"#,
                r#"{"kind": "trig", "mean": 0.5, "sin": [0.2]}"#,
                unit_beta,
                multiple,
                r#"{"t": 0.3, "kind": "linear", "params": {"b": 0.0}}, {"t": 0.7, "kind": "linear", "params": {"b": 0.0}}"#,
                0.5,
            ),
        ),
        Case::new(
            "liu-takeuchi-impulsive",
            "linear impulses with period product 0.88",
            CaseKind::Wazewska,
            wazewska_config(
                r#"{"kind": "trig", "mean": 1.0, "cos": [0.2]}"#,
                r#"{"kind": "trig", "mean": 0.45, "sin": [0.15]}"#,
                unit_beta,
                multiple,
                r#"{"t": 0.3, "kind": "linear", "params": {"b": -0.2}}, {"t": 0.7, "kind": "linear", "params": {"b": 0.1}}"#,
                0.5,
            ),
        ),
        Case::new(
            "graef-compare",
            "impulse-free model with unit exponent, for comparison with the iterative criterion",
            CaseKind::Wazewska,
            wazewska_config(
                r#"{"kind": "trig", "mean": 1.0, "cos": [0.5]}"#,
                r#"{"kind": "trig", "mean": 1.0, "sin": [0.4]}"#,
                unit_beta,
                multiple,
                "",
                0.5,
            ),
        ),
        Case::new(
            "wazewska-nonlinear",
            "piecewise-linear harvesting impulse and a small linear boost",
            CaseKind::Wazewska,
            wazewska_config(
                r#"{"kind": "trig", "mean": 1.0, "cos": [0.3]}"#,
                r#"{"kind": "trig", "mean": 0.8, "sin": [0.2]}"#,
                r#"{"kind": "trig", "mean": 0.8, "cos": [0.1]}"#,
                multiple,
                r#"{"t": 0.4, "kind": "tabulated", "params": {"u": [0.0, 1.0, 3.0], "values": [0.0, -0.2, -0.3]}}, {"t": 0.8, "kind": "linear", "params": {"b": 0.02}}"#,
                0.5,
            ),
        ),
        Case::new(
            "wazewska-varying-delay",
            "periodic delay 1 + 0.1 cos(2 pi t) and one linear impulse",
            CaseKind::Wazewska,
            wazewska_config(
                r#"{"kind": "trig", "mean": 1.0, "cos": [0.2]}"#,
                r#"{"kind": "trig", "mean": 0.5, "sin": [0.1]}"#,
                unit_beta,
                r#"{"kind": "periodic", "tau": {"kind": "trig", "mean": 1.0, "cos": [0.1]}}"#,
                r#"{"t": 0.5, "kind": "linear", "params": {"b": -0.1}}"#,
                0.5,
            ),
        ),
    ]
}

pub fn find_case(id: &str) -> Option<Case> {
    bundled().into_iter().find(|c| c.id == id)
}

/// Numeric settings for case runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    /// Integration step as a fraction of the period.
    pub step: f64,
    pub finder_tol: f64,
    pub max_periods: usize,
    pub scales: Vec<f64>,
    pub horizon_periods: usize,
    pub attract_tol: f64,
    pub check: CheckOptions,
}

impl Default for RunSettings {
    fn default() -> Self {
        Self {
            step: 1e-3,
            finder_tol: 1e-10,
            max_periods: 10_000,
            scales: vec![0.1, 0.5, 2.0, 10.0],
            horizon_periods: 200,
            attract_tol: 1e-6,
            check: CheckOptions::default(),
        }
    }
}

/// Criteria and long-run behaviour of one bundled scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseAnalysis {
    pub id: String,
    pub kind: CaseKind,
    pub results: Vec<CriterionResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub periodic: Option<PeriodicSolution>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub attractivity: Option<AttractivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub zero: Option<ZeroAttractivity>,
}

impl CaseAnalysis {
    pub fn result(&self, id: CriterionId) -> Option<&CriterionResult> {
        self.results.iter().find(|r| r.id == id)
    }

    pub fn passes(&self, id: CriterionId) -> bool {
        self.result(id).is_some_and(|r| r.verdict == Verdict::Pass)
    }

    /// True when some sufficient condition for attraction holds.
    pub fn guaranteed_attracting(&self) -> bool {
        let ids: &[CriterionId] = match self.kind {
            CaseKind::Wazewska => &[
                CriterionId::Thm3_1,
                CriterionId::Thm3_2,
                CriterionId::Thm3_3,
                CriterionId::Thm3_4,
                CriterionId::Thm3_5,
                CriterionId::Thm3_6,
                CriterionId::Cor3_2,
            ],
            CaseKind::Generic => &[CriterionId::H5, CriterionId::Thm2_3, CriterionId::Cor2_2],
        };
        let hypotheses = match self.kind {
            CaseKind::Wazewska => true,
            CaseKind::Generic => [CriterionId::H1, CriterionId::H2, CriterionId::H3i]
                .iter()
                .all(|&h| self.passes(h)),
        };
        hypotheses && ids.iter().any(|&id| self.passes(id))
    }

    pub fn observed_attracting(&self) -> Option<bool> {
        match self.kind {
            CaseKind::Wazewska => self.attractivity.as_ref().map(|a| a.attracting),
            CaseKind::Generic => self.zero.as_ref().map(|z| z.attracted),
        }
    }
}

/// Evaluates the criteria and simulates long runs. Generic scenarios are
/// integrated from their own history; Wazewska scenarios from each scale.
pub fn analyse(case: &Case, settings: &RunSettings) -> Result<CaseAnalysis, CaseError> {
    let grid = settings.check.grid;
    let scenario = case.scenario(&grid)?;
    let h = settings.step * scenario.omega;
    match case.kind {
        CaseKind::Generic => {
            let results = check_scenario(&scenario, &settings.check);
            let horizon = scenario.t0 + settings.horizon_periods as f64 * scenario.omega;
            let zero = zero_attractivity(&scenario, h, horizon, settings.attract_tol)?;
            Ok(CaseAnalysis {
                id: case.id.clone(),
                kind: case.kind,
                results,
                periodic: None,
                attractivity: None,
                zero: Some(zero),
            })
        }
        CaseKind::Wazewska => {
            let model = WazewskaModel::from_scenario(scenario, &grid)?;
            let n_star = find_periodic(
                &model,
                settings.finder_tol,
                settings.max_periods,
                FinderOptions {
                    step: h,
                    start_level: None,
                },
            )?;
            let results = check_wazewska(&model, Some(&n_star), &settings.check);
            let report = verify_attractivity(
                &model,
                &n_star,
                &settings.scales,
                settings.horizon_periods,
                settings.attract_tol,
            )?;
            Ok(CaseAnalysis {
                id: case.id.clone(),
                kind: case.kind,
                results,
                periodic: Some(n_star),
                attractivity: Some(report),
                zero: None,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            detail,
        }
    }
}

/// Output files (relative path to bytes) and the acceptance checks of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Reproduction {
    pub files: BTreeMap<String, Vec<u8>>,
    pub checks: Vec<Check>,
}

impl Reproduction {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn add_analysis(&mut self, case: &Case, a: &CaseAnalysis) {
        let dir = &case.id;
        self.files.insert(format!("{dir}/scenario.json"), case.config.clone().into_bytes());
        self.files.insert(format!("{dir}/report.json"), report_json(&a.results));
        if let Some(n) = &a.periodic {
            self.files.insert(format!("{dir}/nstar.csv"), profile_csv(&n.profile));
            self.files.insert(format!("{dir}/nstar.json"), json_bytes(n));
        }
        if let Some(r) = &a.attractivity {
            self.files.insert(format!("{dir}/attractivity.csv"), attractivity_csv(r));
            self.files.insert(format!("{dir}/attractivity.json"), json_bytes(r));
        }
        if let Some(z) = &a.zero {
            self.files.insert(format!("{dir}/zero.json"), json_bytes(z));
        }
    }

    fn finish(mut self) -> Self {
        self.files.insert("summary.json".into(), json_bytes(&self.checks));
        self
    }
}

fn verdict_of(a: &CaseAnalysis, id: CriterionId) -> String {
    a.result(id)
        .map(|r| format!("{:?}", r.verdict).to_lowercase())
        .unwrap_or_else(|| "missing".into())
}

/// Runs a bundled case end to end and checks it against its targets.
pub fn reproduce(id: &str, settings: &RunSettings) -> Result<Reproduction, CaseError> {
    let mut rep = Reproduction::default();
    match id {
        "example-2-22" => {
            let case = find_case(id).expect("bundled");
            let scenario = case.scenario(&settings.check.grid)?;
            let traj = integrate(&scenario, StepControl::new(settings.step), 50.0)?;
            let mut worst = 0.0f64;
            for seg in &traj.dense.segments {
                for t in [seg.t0, 0.5 * (seg.t0 + seg.t1), seg.t1] {
                    let exact = (1.0 / (t + 1.0)).exp();
                    let x = traj.value(t, Side::Left).expect("inside the run");
                    worst = worst.max((x - exact).abs() / exact);
                }
            }
            let end = traj.value(50.0, Side::Left).expect("inside the run");
            let mut analysis = analyse(&case, settings)?;
            analysis.results.sort_by_key(|r| r.id);
            rep.files.insert(format!("{id}/trajectory.csv"), trajectory_csv(&traj));
            rep.add_analysis(&case, &analysis);
            rep.checks.push(Check::new(
                "exact solution",
                worst < 1e-6,
                format!("max relative error against c exp(1/(t+1)) on [0, 50]: {worst:e}"),
            ));
            rep.checks.push(Check::new(
                "no decay to zero",
                end >= 0.99,
                format!("x(50) = {end} with c = 1"),
            ));
            let zero = analysis.zero.as_ref().expect("generic analysis");
            rep.checks.push(Check::new(
                "zero not attracting",
                !zero.attracted,
                format!("sup |x| over the final tenth of the run: {}", zero.tail_sup),
            ));
        }
        "liu-takeuchi" => {
            let case = find_case(id).expect("bundled");
            let a = analyse(&case, settings)?;
            rep.add_analysis(&case, &a);
            rep.checks.push(Check::new(
                "pointwise product condition",
                a.passes(CriterionId::Thm3_4),
                format!("verdict {}", verdict_of(&a, CriterionId::Thm3_4)),
            ));
            rep.checks.push(Check::new(
                "attracting",
                a.observed_attracting() == Some(true),
                format!("all scales {:?} within {} periods", settings.scales, settings.horizon_periods),
            ));
        }
        "graef-compare" => {
            let case = find_case(id).expect("bundled");
            let a = analyse(&case, settings)?;
            rep.add_analysis(&case, &a);
            let r = a.result(CriterionId::Cor3_2).cloned();
            let (value, graef, alpha1) = r
                .as_ref()
                .map(|r| {
                    (
                        r.get("alpha1_alpha2").unwrap_or(f64::NAN),
                        r.get("sigma_graef").unwrap_or(f64::NAN),
                        r.get("alpha1").unwrap_or(f64::NAN),
                    )
                })
                .unwrap_or((f64::NAN, f64::NAN, f64::NAN));
            let smaller = if value < graef { "alpha1 alpha2" } else { "comparison integral" };
            rep.files.insert(
                format!("{id}/comparison.json"),
                json_bytes(&serde_json::json!({
                    "alpha1_alpha2": value,
                    "sigma_graef": graef,
                    "smaller": smaller,
                })),
            );
            rep.checks.push(Check::new(
                "both quantities computed",
                value.is_finite() && graef.is_finite(),
                format!("alpha1 alpha2 = {value}, comparison integral = {graef}; smaller: {smaller}"),
            ));
            rep.checks.push(Check::new(
                "alpha1 below comparison integral",
                alpha1 < graef,
                format!("alpha1 = {alpha1}, comparison integral = {graef}"),
            ));
        }
        "boundary-alpha" => {
            for (variant, expect) in [("boundary-alpha-below", Verdict::Pass), ("boundary-alpha-above", Verdict::Fail)] {
                let case = find_case(variant).expect("bundled");
                let a = analyse(&case, settings)?;
                rep.add_analysis(&case, &a);
                let r = a.result(CriterionId::H5);
                let product = r.and_then(|r| r.get("alpha1_alpha2")).unwrap_or(f64::NAN);
                rep.checks.push(Check::new(
                    &format!("{variant} verdict"),
                    r.map(|r| r.verdict) == Some(expect),
                    format!("alpha1 alpha2 = {product}, verdict {}", verdict_of(&a, CriterionId::H5)),
                ));
                if expect == Verdict::Pass {
                    rep.checks.push(Check::new(
                        &format!("{variant} attracting"),
                        a.observed_attracting() == Some(true),
                        format!("{:?}", a.zero),
                    ));
                }
            }
        }
        other => return Err(CaseError::Unknown(other.to_string())),
    }
    Ok(rep.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_case_builds() {
        let grid = GridSettings::default();
        for case in bundled() {
            let s = case.scenario(&grid).unwrap_or_else(|e| panic!("{}: {e}", case.id));
            if case.kind == CaseKind::Wazewska {
                WazewskaModel::from_scenario(s, &grid).unwrap();
            }
        }
        for id in REPRODUCIBLE {
            assert!(id == "boundary-alpha" || find_case(id).is_some());
        }
    }

    #[test]
    fn boundary_gains() {
        let g = boundary_gain(0.99);
        let alpha = g * (1.0 - (-1.0f64).exp());
        assert!((alpha * alpha - 0.9801).abs() < 1e-14);
    }
}
