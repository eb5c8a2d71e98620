//! Closed-form and pointwise conditions for the Lasota-Wazewska model.

use serde::{Deserialize, Serialize};

use super::alpha::{alpha_result, generic_alphas, overline_values, profile_knots, ratio_alphas, translated_alphas};
use super::{
    default_u_grid, slope_bounds, sort_results, AlphaVariant, CheckOptions, CriterionId,
    CriterionResult, SupWindow, Verdict,
};
use crate::model::{ImpulseSchedule, TimeFn, YorkeTerm};
use crate::quad::{simpson_piecewise, Side};
use crate::wazewska::{PeriodicSolution, WazewskaModel};

/// `max_u sum_k I_k(u) / u` over a geometric grid on `[1e2, 1e6]`: an
/// estimate of the limsup at infinity, not a certified value.
pub fn infinity_ratio(schedule: &ImpulseSchedule) -> f64 {
    if schedule.is_empty() {
        return 0.0;
    }
    (0..=160)
        .map(|j| 10f64.powf(2.0 + j as f64 * 0.025))
        .map(|u| schedule.maps.iter().map(|m| m.apply(u)).sum::<f64>() / u)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Existence of a positive periodic solution from `C I_inf < 1`, where
/// `C = e^A / (e^A - 1)` and `A` integrates the damping over one period.
pub fn lemma3_1(model: &WazewskaModel, opts: &CheckOptions) -> CriterionResult {
    let s = &model.scenario;
    let int_a = s.damping.integral(0.0, s.omega);
    let c = int_a.exp() / int_a.exp_m1();
    let i_inf = infinity_ratio(&s.impulses);
    let value = c * i_inf;
    let r = CriterionResult::new(CriterionId::Lemma3_1, 1.0)
        .value("C", c)
        .value("I_inf", i_inf)
        .value("C_I_inf", value)
        .value("damping_period_integral", int_a)
        .note("ESTIMATE: I_inf is the maximum over u in [1e2, 1e6], an estimate of a limsup");
    let negative = default_u_grid(true)
        .iter()
        .any(|&u| s.impulses.maps.iter().any(|m| m.apply(u) < 0.0));
    if negative {
        return r.note("impulses take negative values, outside the sign condition of this existence result: existence unresolved");
    }
    r.below(value, opts.band)
}

/// Shared quantities for the closed-form bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosedForms {
    /// `int_0^omega a`.
    pub int_a: f64,
    pub beta_bar: f64,
    pub n_bar: f64,
    /// `max_t max_i beta_i(t) N*(t)`.
    pub beta_n_bar: f64,
    /// Largest delay multiple, when every delay is a multiple of the period.
    pub m_bar: Option<u32>,
    /// Lower slope bounds `b_k` of the impulses over one period.
    pub lower: Vec<f64>,
    /// Upper slope bounds `a_k`.
    pub upper: Vec<f64>,
}

impl ClosedForms {
    pub fn new(model: &WazewskaModel, n_star: &PeriodicSolution, opts: &CheckOptions) -> Self {
        let (beta_n_bar, beta_bar, n_bar) = overline_values(model, n_star, opts.grid.extrema_points);
        let (bounds, _) = slope_bounds(model.impulses());
        let s = &model.scenario;
        Self {
            int_a: s.damping.integral(0.0, s.omega),
            beta_bar,
            n_bar,
            beta_n_bar,
            m_bar: model.multiples().map(|m| m.into_iter().max().unwrap_or(1)),
            lower: bounds.iter().map(|b| b.0).collect(),
            upper: bounds.iter().map(|b| b.1).collect(),
        }
    }

    /// `max over l, j in 1..=p of prod_{k=1}^j (1 + b_{l+k})^{-1}`, indices mod `p`.
    pub fn big_b_bar(&self) -> f64 {
        let p = self.lower.len();
        let mut best = f64::NEG_INFINITY;
        for l in 0..p {
            let mut prod = 1.0;
            for j in 1..=p {
                prod /= 1.0 + self.lower[(l + j) % p];
                best = best.max(prod);
            }
        }
        if p == 0 {
            1.0
        } else {
            best
        }
    }

    pub fn min_sum(&self) -> f64 {
        self.lower.iter().map(|b| b.min(0.0)).sum()
    }

    /// `prod_k (1 + b_k)` over one period.
    pub fn lower_product(&self) -> f64 {
        self.lower.iter().map(|b| 1.0 + b).product()
    }

    pub fn upper_product(&self) -> f64 {
        self.upper.iter().map(|a| 1.0 + a).product()
    }

    /// `(sigma_1, sigma_2)`, whose product's square root is the left side of
    /// the period-multiple closed form.
    pub fn sigmas(&self, m_bar: u32) -> (f64, f64) {
        let bm = self.big_b_bar().powi(m_bar as i32);
        let decay = 1.0 - (-(m_bar as f64) * self.int_a).exp();
        let bracket = 1.0 - self.min_sum() / (-(-self.int_a).exp_m1());
        (
            bm * self.beta_bar * self.n_bar * decay * bracket,
            bm * self.beta_n_bar.exp_m1() * decay * bracket,
        )
    }
}

/// `sqrt(x (e^x - 1)) [1 - (e^{-A} P)^m]`, `x = max beta N*`, `P = prod (1 + b_k)`.
pub fn ratio_sigma(beta_n_bar: f64, int_a: f64, period_product: f64, m_bar: u32) -> f64 {
    (beta_n_bar * beta_n_bar.exp_m1()).sqrt() * (1.0 - ((-int_a).exp() * period_product).powi(m_bar as i32))
}

/// Sample times on `[lo, lo + omega]`: a uniform grid plus impulse instants
/// and the times whose delayed arguments hit them.
fn pointwise_grid(model: &WazewskaModel, lo: f64, points: usize) -> Vec<f64> {
    let s = &model.scenario;
    let w = s.omega;
    let mut ts: Vec<f64> = (0..=points).map(|j| lo + w * j as f64 / points as f64).collect();
    let instants = s.impulses.times.in_range(lo - s.max_delay() - w, lo + w, true, true);
    for (_, tk) in instants {
        for d in &s.delays {
            let x = d.preimage(tk);
            if x >= lo && x <= lo + w {
                ts.push(x);
            }
        }
        if tk >= lo && tk <= lo + w {
            ts.push(tk);
        }
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// `max_t lhs(t) / a(t)` over both sides of every sample time.
fn pointwise_ratio(model: &WazewskaModel, ts: &[f64], lhs: impl Fn(f64, Side) -> f64) -> (f64, f64) {
    let a = &model.scenario.damping;
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &t in ts {
        for side in [Side::Left, Side::Right] {
            let r = lhs(t, side) / a.eval_side(t, side);
            if r > best.0 {
                best = (r, t);
            }
        }
    }
    best
}

fn window_for(model: &WazewskaModel, opts: &CheckOptions) -> SupWindow {
    let s = &model.scenario;
    SupWindow::new(s.omega, s.max_delay(), true, opts.horizon)
}

/// Values for a single-term, unit-exponent, impulse-free model with delay
/// `m omega`: `alpha_1 = max N* (1 - e^{-mA})`, `alpha_2` the sup of
/// `int_{t - m omega}^t b(s) e^{-int_s^t a} ds`, and the comparison integral
/// `int_0^{m omega} b e^{-N*}`. `None` when the model is not of that form.
pub fn cor3_2_values(model: &WazewskaModel, n_star: &PeriodicSolution, opts: &CheckOptions) -> Option<CriterionResult> {
    let s = &model.scenario;
    let [term] = model.terms() else {
        return None;
    };
    let unit_beta = matches!(term.beta, TimeFn::Constant { value } if value == 1.0);
    let m = model.multiples()?[0];
    if !unit_beta || !s.impulses.is_empty() {
        return None;
    }
    let forms = ClosedForms::new(model, n_star, opts);
    let alpha1 = forms.n_bar * (1.0 - (-(m as f64) * forms.int_a).exp());
    let b = term.b.clone();
    let bounds = vec![YorkeTerm {
        lambda1: {
            let (b, prof) = (b.clone(), n_star.profile.clone());
            TimeFn::custom("damped coefficient", Some(s.omega), move |t, side| {
                b.eval_side(t, side) * (-prof.eval(t, side)).exp()
            })
        },
        lambda2: b.clone(),
        delay: term.delay,
    }];
    let knots = profile_knots(n_star);
    let v = generic_alphas(
        &s.damping,
        &s.delays,
        &bounds,
        &s.impulses.times,
        &[],
        AlphaVariant::Single,
        window_for(model, opts),
        s.omega,
        &knots,
        opts,
    );
    let span = m as f64 * s.omega;
    let breaks: Vec<f64> = (0..=m as i64)
        .flat_map(|p| knots.iter().map(move |x| x + p as f64 * s.omega))
        .collect();
    let graef = simpson_piecewise(
        &|x: f64, side: Side| b.eval_side(x, side) * (-n_star.eval(x, side)).exp(),
        0.0,
        span,
        &breaks,
        opts.rtol,
    )
    .unwrap_or(f64::NAN);
    let value = alpha1 * v.alpha2;
    Some(
        CriterionResult::new(CriterionId::Cor3_2, 1.0)
            .value("alpha1", alpha1)
            .value("alpha1_integral", v.alpha1)
            .value("alpha2", v.alpha2)
            .value("t_alpha1", v.t_alpha1)
            .value("t_alpha2", v.t_alpha2)
            .value("alpha1_alpha2", value)
            .value("sigma_graef", graef)
            .value("m", m as f64)
            .note(format!(
                "comparison integral int b e^(-N*) over one delay = {graef:.9} (attractive if <= 1 by an iterative argument); informational"
            ))
            .below(value, opts.band),
    )
}

/// Pointwise and closed-form conditions that need the periodic solution.
pub fn closed_form_conditions(
    model: &WazewskaModel,
    n_star: &PeriodicSolution,
    opts: &CheckOptions,
) -> Vec<CriterionResult> {
    let s = &model.scenario;
    let band = opts.band;
    let forms = ClosedForms::new(model, n_star, opts);
    let i1 = forms.lower.iter().all(|&b| b > -1.0);
    let i2 = forms.upper_product() <= 1.0 + band;
    let unmet = |id| {
        let mut r = CriterionResult::new(id, 1.0);
        if !i1 {
            r = r.note("impulse slope lower bounds must exceed -1");
        }
        if !i2 {
            r = r.note(format!("prod (1 + a_k) = {} exceeds 1", forms.upper_product()));
        }
        r
    };
    let mut out = vec![lemma3_1(model, opts)];
    let window = window_for(model, opts);
    let ts = pointwise_grid(model, window.lo, opts.grid.extrema_points);
    let times = &s.impulses.times;
    let factors: Vec<f64> = forms.lower.iter().map(|b| 1.0 + b).collect();

    if i1 && i2 {
        let (v, t) = pointwise_ratio(model, &ts, |t, side| {
            model
                .terms()
                .iter()
                .map(|term| {
                    let tau = s.delays[term.delay].tau(t);
                    term.beta.eval_side(t, side)
                        * term.b.eval_side(t, side)
                        * super::big_b_profile(times, &factors, tau, t, side)
                })
                .sum()
        });
        out.push(
            CriterionResult::new(CriterionId::Thm3_2, 1.0)
                .value("max_lhs_over_a", v)
                .value("t_max", t)
                .below(v, band),
        );
    } else {
        out.push(unmet(CriterionId::Thm3_2));
    }

    let zero_fixed = s.impulses.check_zero_fixed().is_ok();
    match (forms.m_bar, i1 && i2, zero_fixed) {
        (Some(m), true, true) => {
            let (s1, s2) = forms.sigmas(m);
            let value = (s1 * s2).sqrt();
            out.push(
                CriterionResult::new(CriterionId::Thm3_3, 1.0)
                    .value("B_bar", forms.big_b_bar())
                    .value("m_bar", m as f64)
                    .value("beta_bar", forms.beta_bar)
                    .value("N_bar", forms.n_bar)
                    .value("beta_N_bar", forms.beta_n_bar)
                    .value("sum_min_b", forms.min_sum())
                    .value("damping_period_integral", forms.int_a)
                    .value("sigma1", s1)
                    .value("sigma2", s2)
                    .value("value", value)
                    .below(value, band),
            );
        }
        (None, _, _) => out.push(
            CriterionResult::new(CriterionId::Thm3_3, 1.0).note("delays are not constant multiples of the period"),
        ),
        (_, false, _) => out.push(unmet(CriterionId::Thm3_3)),
        (_, _, false) => out.push(CriterionResult::new(CriterionId::Thm3_3, 1.0).note("impulses must fix zero")),
    }

    let linear = s.impulses.linear_coefficients();
    let multiples = model.multiples();
    match (&linear, &multiples) {
        (Some(c), Some(ms)) if c.iter().all(|&b| b > -1.0) => {
            let product: f64 = c.iter().map(|b| 1.0 + b).product();
            let ok = product <= 1.0 + band;
            let (v, t) = pointwise_ratio(model, &ts, |t, side| {
                model
                    .terms()
                    .iter()
                    .zip(ms)
                    .map(|(term, &m)| product.powi(-(m as i32)) * term.b.eval_side(t, side) * term.beta.eval_side(t, side))
                    .sum()
            });
            let mut r = CriterionResult::new(CriterionId::Thm3_4, 1.0)
                .value("max_lhs_over_a", v)
                .value("t_max", t)
                .value("impulse_product", product);
            r = if ok {
                r.below(v, band)
            } else {
                r.note(format!("prod (1 + b_k) = {product} exceeds 1"))
            };
            out.push(r);

            let m_bar = ms.iter().copied().max().unwrap_or(1);
            let sigma = ratio_sigma(forms.beta_n_bar, forms.int_a, product, m_bar);
            let mut r = CriterionResult::new(CriterionId::Thm3_6, 1.0)
                .value("sigma", sigma)
                .value("beta_N_bar", forms.beta_n_bar)
                .value("m_bar", m_bar as f64)
                .value("impulse_product", product)
                .value("damping_period_integral", forms.int_a);
            r = if ok {
                r.below(sigma, band)
            } else {
                r.note(format!("prod (1 + b_k) = {product} exceeds 1"))
            };
            out.push(r);
        }
        _ => {
            let why = if linear.is_none() {
                "impulses are not linear"
            } else if multiples.is_none() {
                "delays are not constant multiples of the period"
            } else {
                "impulse coefficients must exceed -1"
            };
            out.push(CriterionResult::new(CriterionId::Thm3_4, 1.0).note(why));
            out.push(CriterionResult::new(CriterionId::Thm3_6, 1.0).note(why));
        }
    }

    out.push(cor3_2_values(model, n_star, opts).unwrap_or_else(|| {
        CriterionResult::new(CriterionId::Cor3_2, 1.0)
            .note("needs one term with unit exponent, a delay multiple of the period and no impulses")
    }));
    out
}

/// Every Lasota-Wazewska criterion: the slope form of (H1) with the
/// product condition on the upper bounds, existence, the integral criteria
/// and the closed forms. Criteria needing `N*` are inconclusive without it.
pub fn check_wazewska(
    model: &WazewskaModel,
    n_star: Option<&PeriodicSolution>,
    opts: &CheckOptions,
) -> Vec<CriterionResult> {
    let s = &model.scenario;
    let (bounds, sampled) = slope_bounds(model.impulses());
    let upper_product: f64 = bounds.iter().map(|b| 1.0 + b.1).product();
    let mut h1 = CriterionResult::new(CriterionId::H1, -1.0).value("upper_product", upper_product);
    for (j, (lo, hi)) in bounds.iter().enumerate() {
        h1 = h1.value(&format!("lower[{j}]"), *lo).value(&format!("upper[{j}]"), *hi);
    }
    if sampled {
        h1 = h1.note("slope bounds were sampled on a finite grid and are estimates");
    }
    let i2 = upper_product <= 1.0 + opts.band;
    h1 = h1.note(format!(
        "prod (1 + a_k) = {upper_product:.12}: {}",
        if i2 { "at most 1" } else { "exceeds 1, the periodic-solution criteria do not apply" }
    ));
    let i1 = bounds.iter().all(|b| b.0 > -1.0);
    let mut out = vec![h1.with_verdict(if i1 && i2 { Verdict::Pass } else { Verdict::Fail })];

    let Some(n_star) = n_star else {
        out.push(lemma3_1(model, opts));
        for id in [
            CriterionId::Thm3_1,
            CriterionId::Thm3_2,
            CriterionId::Thm3_3,
            CriterionId::Thm3_4,
            CriterionId::Thm3_5,
            CriterionId::Thm3_6,
            CriterionId::Cor3_2,
        ] {
            out.push(CriterionResult::new(id, 1.0).note("requires a periodic solution"));
        }
        sort_results(&mut out);
        return out;
    };

    out.extend(closed_form_conditions(model, n_star, opts));

    if i1 && i2 {
        let lower: Vec<f64> = bounds.iter().map(|b| b.0).collect();
        let v = translated_alphas(model, n_star, &lower, opts.lambda2, opts);
        out.push(
            alpha_result(CriterionId::Thm3_1, &v)
                .note(format!("upper coefficient choice: {:?}", opts.lambda2).to_lowercase())
                .below(v.product(), opts.band),
        );
    } else {
        out.push(CriterionResult::new(CriterionId::Thm3_1, 1.0).note("slope or product conditions on the impulses fail"));
    }

    match (s.impulses.linear_coefficients(), model.multiples()) {
        (Some(c), Some(_)) if c.iter().all(|&b| b > -1.0) => {
            let product: f64 = c.iter().map(|b| 1.0 + b).product();
            let v = ratio_alphas(model, n_star, &c, opts);
            let mut r = alpha_result(CriterionId::Thm3_5, &v).value("impulse_product", product);
            r = if product <= 1.0 + opts.band {
                r.below(v.product(), opts.band)
            } else {
                r.note(format!("prod (1 + b_k) = {product} exceeds 1"))
            };
            out.push(r);
        }
        _ => out.push(
            CriterionResult::new(CriterionId::Thm3_5, 1.0)
                .note("needs linear impulses with coefficients above -1 and delays that are multiples of the period"),
        ),
    }
    sort_results(&mut out);
    out
}
