//! Hypotheses and quantitative stability criteria, evaluated numerically.
//!
//! Every result carries the computed quantities by name, a threshold and a
//! three-way verdict. Strict inequalities within [`CheckOptions::band`] of
//! their threshold are reported as inconclusive.

mod alpha;
mod closed;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::grid::GridSettings;
use crate::model::{ImpulseMap, ImpulseSchedule, ImpulseTimes};
use crate::quad::Side;

pub use alpha::{
    alpha_integrals, big_b_profile, check_scenario, ratio_alphas, translated_alphas, AlphaValues, AlphaVariant,
    Primitive, SupWindow,
};
pub use closed::{
    check_wazewska, closed_form_conditions, cor3_2_values, infinity_ratio, lemma3_1, ratio_sigma, ClosedForms,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum CriterionId {
    H1,
    H2,
    H3i,
    H5,
    #[serde(rename = "THM2_3")]
    Thm2_3,
    #[serde(rename = "SIGMA_YAN")]
    SigmaYan,
    #[serde(rename = "COR2_2")]
    Cor2_2,
    #[serde(rename = "LEMMA3_1")]
    Lemma3_1,
    #[serde(rename = "THM3_1")]
    Thm3_1,
    #[serde(rename = "THM3_2")]
    Thm3_2,
    #[serde(rename = "THM3_3")]
    Thm3_3,
    #[serde(rename = "THM3_4")]
    Thm3_4,
    #[serde(rename = "THM3_5")]
    Thm3_5,
    #[serde(rename = "THM3_6")]
    Thm3_6,
    #[serde(rename = "COR3_2")]
    Cor3_2,
}

impl CriterionId {
    pub fn as_str(self) -> &'static str {
        match self {
            CriterionId::H1 => "H1",
            CriterionId::H2 => "H2",
            CriterionId::H3i => "H3i",
            CriterionId::H5 => "H5",
            CriterionId::Thm2_3 => "THM2_3",
            CriterionId::SigmaYan => "SIGMA_YAN",
            CriterionId::Cor2_2 => "COR2_2",
            CriterionId::Lemma3_1 => "LEMMA3_1",
            CriterionId::Thm3_1 => "THM3_1",
            CriterionId::Thm3_2 => "THM3_2",
            CriterionId::Thm3_3 => "THM3_3",
            CriterionId::Thm3_4 => "THM3_4",
            CriterionId::Thm3_5 => "THM3_5",
            CriterionId::Thm3_6 => "THM3_6",
            CriterionId::Cor3_2 => "COR3_2",
        }
    }

    /// Criteria whose pass guarantees attraction to the periodic solution.
    pub fn implies_attractivity(self) -> bool {
        matches!(
            self,
            CriterionId::Thm3_1
                | CriterionId::Thm3_2
                | CriterionId::Thm3_3
                | CriterionId::Thm3_4
                | CriterionId::Thm3_5
                | CriterionId::Thm3_6
                | CriterionId::Cor3_2
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: CriterionId,
    pub values: BTreeMap<String, f64>,
    pub threshold: f64,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl CriterionResult {
    pub fn new(id: CriterionId, threshold: f64) -> Self {
        Self {
            id,
            values: BTreeMap::new(),
            threshold,
            verdict: Verdict::Inconclusive,
            notes: Vec::new(),
        }
    }

    pub fn value(mut self, name: &str, v: f64) -> Self {
        self.values.insert(name.to_string(), v);
        self
    }

    pub fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    /// Verdict for `value < threshold` with the inconclusive band.
    pub fn below(mut self, value: f64, band: f64) -> Self {
        self.verdict = strictly_below(value, self.threshold, band);
        self
    }

    pub fn with_verdict(mut self, v: Verdict) -> Self {
        self.verdict = v;
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.get(name).copied()
    }
}

/// `value < threshold` decided with a band of width `band` around the threshold.
pub fn strictly_below(value: f64, threshold: f64, band: f64) -> Verdict {
    if value.is_nan() {
        // a failed quadrature decides nothing
        Verdict::Inconclusive
    } else if !value.is_finite() {
        if value == f64::NEG_INFINITY {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    } else if value < threshold - band {
        Verdict::Pass
    } else if value > threshold + band {
        Verdict::Fail
    } else {
        Verdict::Inconclusive
    }
}

/// Which upper Yorke coefficient to use for the Lasota-Wazewska criteria.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Choice {
    /// `beta_i b_i`.
    #[default]
    Direct,
    /// `(e^{max beta N*} - 1) / max N* * b_i exp(-beta_i N*(t - tau_i))`.
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    /// Width of the inconclusive band around strict thresholds.
    pub band: f64,
    pub grid: GridSettings,
    /// Sup horizon for non-periodic scenarios.
    pub horizon: f64,
    pub lambda2: Lambda2Choice,
    /// Relative tolerance of the inner Simpson integrals.
    pub rtol: f64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            band: 1e-9,
            grid: GridSettings::from_env(),
            horizon: 50.0,
            lambda2: Lambda2Choice::Direct,
            rtol: 1e-11,
        }
    }
}

/// Largest suffix product of `1/b_k` over instants in `[t - tau, t)`,
/// including the empty product.
pub fn big_b(times: &ImpulseTimes, lower: &[f64], tau: f64, t: f64) -> f64 {
    big_b_profile(times, lower, tau, t, Side::Left)
}

/// `u` values for sampling impulse maps: geometric on both sides of zero.
pub fn default_u_grid(positive_only: bool) -> Vec<f64> {
    let pos: Vec<f64> = (0..=240).map(|j| 10f64.powf(-6.0 + j as f64 * 0.05)).collect();
    if positive_only {
        pos
    } else {
        let mut v: Vec<f64> = pos.iter().rev().map(|u| -u).collect();
        v.extend(pos);
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum H1Mode {
    /// `b_k u^2 <= u (u + I_k(u)) <= a_k u^2` on the whole line.
    Ratio,
    /// `b_k <= (I_k(x) - I_k(y)) / (x - y) <= a_k` on the positive axis.
    Slope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct H1Estimate {
    pub mode: H1Mode,
    /// Per impulse of one period: `(lower, upper)` sampled extremes.
    pub bounds: Vec<(f64, f64)>,
    pub result: CriterionResult,
}

/// Sampled extremes of `(u + I_k(u)) / u` (ratio mode) or of the difference
/// quotients of `I_k` between consecutive grid points (slope mode). The
/// extremes are grid estimates, not proofs of the bounds.
pub fn check_h1(schedule: &ImpulseSchedule, u_grid: &[f64], mode: H1Mode) -> Result<H1Estimate, String> {
    let grid: Vec<f64> = match mode {
        H1Mode::Ratio => u_grid.iter().copied().filter(|&u| u != 0.0).collect(),
        H1Mode::Slope => u_grid.iter().copied().filter(|&u| u >= 0.0).collect(),
    };
    if grid.len() < 2 {
        return Err("the u grid needs at least two usable points".into());
    }
    let bounds: Vec<(f64, f64)> = schedule
        .maps
        .iter()
        .map(|m| sampled_bounds(m, &grid, mode))
        .collect();
    let mut r = CriterionResult::new(CriterionId::H1, 0.0);
    let mut ok = true;
    for (j, &(lo, hi)) in bounds.iter().enumerate() {
        r = r.value(&format!("lower[{j}]"), lo).value(&format!("upper[{j}]"), hi);
        ok &= match mode {
            H1Mode::Ratio => lo > 0.0,
            H1Mode::Slope => lo > -1.0,
        };
    }
    if mode == H1Mode::Slope {
        r.threshold = -1.0;
    }
    r = r.note("bounds are sampled on a finite grid and are estimates");
    let verdict = if ok { Verdict::Pass } else { Verdict::Fail };
    Ok(H1Estimate {
        mode,
        bounds,
        result: r.with_verdict(verdict),
    })
}

fn sampled_bounds(map: &ImpulseMap, grid: &[f64], mode: H1Mode) -> (f64, f64) {
    if let Some(c) = map.linear_coefficient() {
        return match mode {
            H1Mode::Ratio => (1.0 + c, 1.0 + c),
            H1Mode::Slope => (c, c),
        };
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    match mode {
        H1Mode::Ratio => {
            for &u in grid {
                let r = (u + map.apply(u)) / u;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        H1Mode::Slope => {
            let mut sorted = grid.to_vec();
            sorted.sort_by(f64::total_cmp);
            for w in sorted.windows(2) {
                let q = (map.apply(w[1]) - map.apply(w[0])) / (w[1] - w[0]);
                lo = lo.min(q);
                hi = hi.max(q);
            }
        }
    }
    (lo, hi)
}

/// Ratio-mode lower and upper bounds per impulse: declared where available,
/// otherwise sampled. The flag reports whether any bound was sampled.
pub fn ratio_bounds(schedule: &ImpulseSchedule) -> (Vec<(f64, f64)>, bool) {
    let grid = default_u_grid(false);
    let mut sampled = false;
    let v = schedule
        .maps
        .iter()
        .zip(&schedule.bounds)
        .map(|(m, b)| match (b.ratio_bounds, m.linear_coefficient()) {
            (Some((upper, lower)), _) => (lower, upper),
            (None, Some(c)) => (1.0 + c, 1.0 + c),
            (None, None) => {
                sampled = true;
                sampled_bounds(m, &grid, H1Mode::Ratio)
            }
        })
        .collect();
    (v, sampled)
}

/// Slope-mode bounds `(b_k, a_k)` per impulse: declared, exact for linear
/// maps, otherwise sampled on the positive axis.
pub fn slope_bounds(schedule: &ImpulseSchedule) -> (Vec<(f64, f64)>, bool) {
    let grid = default_u_grid(true);
    let mut sampled = false;
    let v = schedule
        .maps
        .iter()
        .zip(&schedule.bounds)
        .map(|(m, b)| match (b.slope_bounds, m.linear_coefficient()) {
            (Some(s), _) => s,
            (None, Some(c)) => (c, c),
            (None, None) => {
                sampled = true;
                sampled_bounds(m, &grid, H1Mode::Slope)
            }
        })
        .collect();
    (v, sampled)
}

/// Behaviour of `P_n = prod_{k <= n} a_k` for a `p`-periodic sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductClass {
    /// Period product below one: `P_n -> 0`.
    ConvergentToZero,
    /// Period product one and all partial products equal: constant sequence.
    Constant,
    /// Period product one with varying partial products: bounded and periodic.
    BoundedPeriodic,
    /// Period product above one.
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductClassification {
    pub period_product: f64,
    pub partial_products: Vec<f64>,
    pub class: ProductClass,
}

impl ProductClassification {
    pub fn bounded(&self) -> bool {
        self.class != ProductClass::Unbounded
    }

    /// `Some(true)` if convergent, `Some(false)` if not, `None` if the
    /// period product sits within the band of one with varying partials.
    pub fn convergent(&self) -> Option<bool> {
        match self.class {
            ProductClass::ConvergentToZero | ProductClass::Constant => Some(true),
            ProductClass::Unbounded => Some(false),
            ProductClass::BoundedPeriodic => None,
        }
    }
}

/// Classifies `P_n` using `P_{np} = (prod_{k=1}^p a_k)^n`.
pub fn classify_products(upper: &[f64], band: f64) -> ProductClassification {
    let mut partial = Vec::with_capacity(upper.len());
    let mut acc = 1.0;
    for a in upper {
        acc *= a;
        partial.push(acc);
    }
    let period_product = acc;
    let class = if period_product < 1.0 - band {
        ProductClass::ConvergentToZero
    } else if period_product > 1.0 + band {
        ProductClass::Unbounded
    } else if partial.iter().all(|&p| (p - 1.0).abs() <= band) {
        ProductClass::Constant
    } else {
        ProductClass::BoundedPeriodic
    };
    ProductClassification {
        period_product,
        partial_products: partial,
        class,
    }
}

/// Sorts results by id for deterministic output.
pub fn sort_results(results: &mut [CriterionResult]) {
    results.sort_by_key(|r| r.id);
}
