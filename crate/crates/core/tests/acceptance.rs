//! End-to-end acceptance checks. Each item prints one PASS/FAIL line; the
//! process exits non-zero when any item fails.

use std::process::ExitCode;
use std::time::Instant;

use idde_core::cases::{self, CaseAnalysis, CaseKind, RunSettings, REPRODUCIBLE};
use idde_core::criteria::{
    alpha_integrals, big_b, ratio_bounds, slope_bounds, AlphaVariant, CheckOptions, CriterionId, Verdict,
};
use idde_core::grid::GridSettings;
use idde_core::integrator::{integrate, StepControl};
use idde_core::model::{build_scenario_with, ImpulseMap, ImpulseSchedule, Scenario, TimeFn, YorkeTerm};
use idde_core::quad::Side;
use idde_core::reference::{brute_force_b, riemann_alpha};
use idde_core::transforms::{expand_reduction, linear_impulse_reduction, remove_impulses, transformed_residual};
use idde_core::wazewska::{find_periodic, FinderOptions, PeriodicSolution, WazewskaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const PANELS: usize = 1_000_000;

fn grid() -> GridSettings {
    GridSettings::default()
}

fn relative_gap(value: f64, reference: f64) -> f64 {
    if value == reference {
        0.0
    } else {
        (value - reference).abs() / reference.abs().max(1e-300)
    }
}

fn decay_error(h: f64) -> Result<f64, String> {
    let text = r#"{
      "omega": 1.0,
      "damping": {"kind": "constant", "value": 1.0},
      "delays": [{"kind": "constant", "tau": 1.0}],
      "rhs": {"kind": "piecewise_linear", "delay": 0, "x": [-1.0, 1.0], "y": [0.0, 0.0]},
      "history": {"kind": "constant", "value": 1.0}
    }"#;
    let s = build_scenario_with(text, &grid()).map_err(|e| e.to_string())?;
    let x = integrate(&s, StepControl::new(h), 5.0).map_err(|e| e.to_string())?;
    Ok((x.value(5.0, Side::Left).unwrap() - (-5.0f64).exp()).abs())
}

fn integrator_order() -> Outcome {
    let mut ratios = Vec::new();
    for h in [1e-2, 5e-3] {
        ratios.push(decay_error(h)? / decay_error(h / 2.0)?);
    }
    let ok = ratios.iter().all(|r| (12.0..=20.0).contains(r));
    let msg = format!("error ratios {ratios:?}");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn example_fidelity() -> Outcome {
    let rep = cases::reproduce("example-2-22", &RunSettings::default()).map_err(|e| e.to_string())?;
    let msg: Vec<String> = rep.checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect();
    if rep.passed() {
        Ok(msg.join("; "))
    } else {
        Err(msg.join("; "))
    }
}

fn random_impulse_map(rng: &mut ChaCha8Rng, nonlinear: bool) -> String {
    if nonlinear {
        let s1 = rng.gen_range(-0.4..0.3);
        let s2 = rng.gen_range(-0.4..0.3);
        format!(
            r#""kind": "tabulated", "params": {{"u": [0.0, 1.0, 3.0], "values": [0.0, {s1}, {}]}}"#,
            s1 + 2.0 * s2
        )
    } else {
        format!(r#""kind": "linear", "params": {{"b": {}}}"#, rng.gen_range(-0.5..0.5))
    }
}

/// A random population model or linear-feedback scenario with two impulses
/// per unit period.
fn random_impulsive(rng: &mut ChaCha8Rng, population: bool, nonlinear: bool) -> String {
    let t1 = rng.gen_range(0.1..0.45);
    let t2 = rng.gen_range(0.55..0.95);
    let amp = rng.gen_range(0.0..0.5);
    let impulses = format!(
        r#"[{{"t": {t1}, {}}}, {{"t": {t2}, {}}}]"#,
        random_impulse_map(rng, nonlinear),
        random_impulse_map(rng, nonlinear)
    );
    if population {
        let m = rng.gen_range(1..=2);
        format!(
            r#"{{
          "omega": 1.0,
          "damping": {{"kind": "trig", "mean": 1.0, "cos": [{amp}]}},
          "delays": [{{"kind": "multiple", "m": {m}}}],
          "rhs": {{"kind": "wazewska", "terms": [{{"b": {{"kind": "trig", "mean": {}, "sin": [0.2]}},
                   "beta": {{"kind": "constant", "value": {}}}, "delay": 0}}]}},
          "impulses": {impulses},
          "history": {{"kind": "constant", "value": {}}}
        }}"#,
            rng.gen_range(0.6..1.2),
            rng.gen_range(0.5..1.0),
            rng.gen_range(0.3..1.5)
        )
    } else {
        let k = rng.gen_range(0.1..0.8);
        format!(
            r#"{{
          "omega": 1.0,
          "damping": {{"kind": "trig", "mean": 1.0, "cos": [{amp}]}},
          "delays": [{{"kind": "constant", "tau": {}}}],
          "rhs": {{"kind": "piecewise_linear", "delay": 0, "x": [-1.0, 1.0], "y": [{k}, {}]}},
          "impulses": {impulses},
          "history": {{"kind": "constant", "value": {}}}
        }}"#,
            rng.gen_range(0.3..1.5),
            -k,
            rng.gen_range(0.5..2.0)
        )
    }
}

fn impulse_removal() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-3;
    let (mut worst_jump, mut worst_res) = (0.0f64, 0.0f64);
    for j in 0..20 {
        let text = random_impulsive(&mut rng, j % 2 == 0, j % 4 < 2);
        let s = build_scenario_with(&text, &grid()).map_err(|e| format!("scenario {j}: {e}"))?;
        let x = integrate(&s, StepControl::new(h), 6.0).map_err(|e| format!("scenario {j}: {e}"))?;
        let tr = remove_impulses(&x, &s.impulses).map_err(|e| format!("scenario {j}: {e}"))?;
        let pts: Vec<f64> = (0..300).map(|i| 5.9 * (i as f64 + 0.37) / 300.0).collect();
        worst_jump = worst_jump.max(tr.max_jump_gap());
        worst_res = worst_res.max(transformed_residual(&tr, &s, &pts, h));
    }
    let msg = format!("max jump of y {worst_jump:e}, max residual {worst_res:e}");
    if worst_jump < 1e-8 && worst_res < 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn reduction_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut worst = 0.0f64;
    for j in 0..5 {
        let text = random_impulsive(&mut rng, true, false);
        let s = build_scenario_with(&text, &grid()).map_err(|e| e.to_string())?;
        let model = WazewskaModel::from_scenario(s, &grid()).map_err(|e| e.to_string())?;
        let control = StepControl::new(1e-3);
        let direct = integrate(&model.scenario, control, 5.0).map_err(|e| e.to_string())?;
        let reduced = linear_impulse_reduction(&model).map_err(|e| e.to_string())?;
        let y = integrate(&reduced, control, 5.0).map_err(|e| e.to_string())?;
        let back = expand_reduction(&y, model.impulses()).map_err(|e| e.to_string())?;
        for i in 0..=5000 {
            let t = 5.0 * i as f64 / 5000.0;
            for side in [Side::Left, Side::Right] {
                let gap = (direct.value(t, side).unwrap() - back.value(t, side).unwrap()).abs();
                if !(gap < 1e-6) {
                    return Err(format!("model {j}: gap {gap:e} at t = {t}"));
                }
                worst = worst.max(gap);
            }
        }
    }
    Ok(format!("sup difference {worst:e}"))
}

struct Comparison {
    label: String,
    value: f64,
    oracle: f64,
}

fn compare(out: &mut Vec<Comparison>, label: String, value: f64, oracle: f64) {
    out.push(Comparison { label, value, oracle });
}

fn generic_oracle(case: &str, s: &Scenario, out: &mut Vec<Comparison>) {
    let opts = CheckOptions {
        grid: grid(),
        ..CheckOptions::default()
    };
    let bounds = s.yorke_bounds().expect("bundled scenarios have Yorke bounds");
    let lower: Vec<f64> = ratio_bounds(&s.impulses).0.iter().map(|r| r.0).collect();
    for (name, variant) in [
        ("single", AlphaVariant::Single),
        ("multi", AlphaVariant::MultiDelay),
        ("yan", AlphaVariant::Yan),
    ] {
        let v = alpha_integrals(s, &bounds, &lower, variant, &opts);
        let r1 = riemann_alpha(s, &bounds, &lower, variant, v.t_alpha1, PANELS);
        compare(out, format!("{case} {name} alpha1"), v.alpha1, r1.0);
        if variant != AlphaVariant::Yan {
            let r2 = riemann_alpha(s, &bounds, &lower, variant, v.t_alpha2, PANELS);
            compare(out, format!("{case} {name} alpha2"), v.alpha2, r2.1);
        }
    }
}

/// Instants `t_k` with `lo <= t_k < hi`, with their index within a period.
fn instants(base: &[f64], omega: f64, lo: f64, hi: f64) -> Vec<(f64, usize)> {
    let mut v = Vec::new();
    let first = (lo / omega).floor() as i64 - 1;
    let last = (hi / omega).ceil() as i64 + 1;
    for p in first..=last {
        for (j, b) in base.iter().enumerate() {
            let t = b + p as f64 * omega;
            if t >= lo && t < hi && t > 0.0 {
                v.push((t, j));
            }
        }
    }
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    v
}

/// Left Riemann sums of the ratio-transformed integrals at `t`.
fn riemann_ratio(model: &WazewskaModel, n_star: &PeriodicSolution, coeffs: &[f64], t: f64) -> (f64, f64) {
    let s = &model.scenario;
    let span = model
        .terms()
        .iter()
        .map(|term| s.delays[term.delay].tau(t))
        .fold(0.0, f64::max);
    let lo = t - span;
    let h = span / PANELS as f64;
    let crossings = instants(&s.impulses.times.base, s.omega, lo, t);
    let mut next = crossings.len();
    let (mut damp, mut product) = (0.0f64, 1.0f64);
    let (mut sum1, mut sum2) = (0.0, 0.0);
    for i in (0..PANELS).rev() {
        let x = lo + i as f64 * h;
        damp += s.damping.eval(x) * h;
        while next > 0 && crossings[next - 1].0 >= x {
            next -= 1;
            product *= 1.0 + coeffs[crossings[next].1];
        }
        let n = n_star.eval(x, Side::Left);
        let weight = (-damp).exp() * product;
        for term in model.terms() {
            let bb = term.b.eval(x) * term.beta.eval(x) * n;
            let lag = x - s.delays[term.delay].tau(x);
            sum1 += bb * (-term.beta.eval(x) * n_star.eval(lag, Side::Left)).exp() * weight;
            sum2 += bb * weight;
        }
    }
    let scale = h / n_star.eval(t, Side::Left);
    (sum1 * scale, sum2 * scale)
}

fn population_oracle(case: &str, a: &CaseAnalysis, model: &WazewskaModel, out: &mut Vec<Comparison>) {
    let n_star = a.periodic.as_ref().expect("population analyses carry N*");
    let s = &model.scenario;
    if let Some(r) = a.result(CriterionId::Thm3_1).filter(|r| r.get("alpha1").is_some()) {
        let bounds: Vec<YorkeTerm> = model
            .terms()
            .iter()
            .map(|term| {
                let (b, beta, d, prof) = (term.b.clone(), term.beta.clone(), s.delays[term.delay].clone(), n_star.profile.clone());
                let (b2, beta2) = (term.b.clone(), term.beta.clone());
                YorkeTerm {
                    lambda1: TimeFn::custom("oracle lower", Some(s.omega), move |x, side| {
                        let lag = x - d.tau(x);
                        b.eval_side(x, side) * beta.eval_side(x, side) * (-beta.eval_side(x, side) * prof.eval(lag, side)).exp()
                    }),
                    lambda2: TimeFn::custom("oracle upper", Some(s.omega), move |x, side| {
                        b2.eval_side(x, side) * beta2.eval_side(x, side)
                    }),
                    delay: term.delay,
                }
            })
            .collect();
        let lower: Vec<f64> = slope_bounds(model.impulses()).0.iter().map(|b| 1.0 + b.0).collect();
        let (t1, t2) = (r.get("t_alpha1").unwrap(), r.get("t_alpha2").unwrap());
        let r1 = riemann_alpha(s, &bounds, &lower, AlphaVariant::MultiDelay, t1, PANELS);
        let r2 = riemann_alpha(s, &bounds, &lower, AlphaVariant::MultiDelay, t2, PANELS);
        compare(out, format!("{case} translated alpha1"), r.get("alpha1").unwrap(), r1.0);
        compare(out, format!("{case} translated alpha2"), r.get("alpha2").unwrap(), r2.1);
    }
    if let (Some(r), Some(c)) = (
        a.result(CriterionId::Thm3_5).filter(|r| r.get("alpha1").is_some()),
        s.impulses.linear_coefficients(),
    ) {
        let (t1, t2) = (r.get("t_alpha1").unwrap(), r.get("t_alpha2").unwrap());
        compare(out, format!("{case} ratio alpha1"), r.get("alpha1").unwrap(), riemann_ratio(model, n_star, &c, t1).0);
        compare(out, format!("{case} ratio alpha2"), r.get("alpha2").unwrap(), riemann_ratio(model, n_star, &c, t2).1);
    }
    if let Some(r) = a.result(CriterionId::Cor3_2).filter(|r| r.get("alpha2").is_some()) {
        let term = &model.terms()[0];
        let (b, prof) = (term.b.clone(), n_star.profile.clone());
        let bounds = vec![YorkeTerm {
            lambda1: TimeFn::custom("oracle damped", Some(s.omega), move |x, side| {
                b.eval_side(x, side) * (-prof.eval(x, side)).exp()
            }),
            lambda2: term.b.clone(),
            delay: term.delay,
        }];
        let (t1, t2) = (r.get("t_alpha1").unwrap(), r.get("t_alpha2").unwrap());
        let r1 = riemann_alpha(s, &bounds, &[], AlphaVariant::Single, t1, PANELS);
        let r2 = riemann_alpha(s, &bounds, &[], AlphaVariant::Single, t2, PANELS);
        compare(out, format!("{case} unit-exponent alpha1 integral"), r.get("alpha1_integral").unwrap(), r1.0);
        compare(out, format!("{case} unit-exponent alpha2"), r.get("alpha2").unwrap(), r2.1);
        let span = s.delays[term.delay].tau(0.0);
        let h = span / PANELS as f64;
        let graef: f64 = (0..PANELS)
            .map(|i| {
                let x = i as f64 * h;
                term.b.eval(x) * (-n_star.eval(x, Side::Right)).exp()
            })
            .sum::<f64>()
            * h;
        compare(out, format!("{case} comparison integral"), r.get("sigma_graef").unwrap(), graef);
    }
}

fn quadrature_oracle(analyses: &[(cases::Case, CaseAnalysis)]) -> Outcome {
    let mut out = Vec::new();
    for (case, a) in analyses {
        let s = case.scenario(&grid()).map_err(|e| e.to_string())?;
        match case.kind {
            CaseKind::Generic => generic_oracle(&case.id, &s, &mut out),
            CaseKind::Wazewska => {
                let model = WazewskaModel::from_scenario(s, &grid()).map_err(|e| e.to_string())?;
                population_oracle(&case.id, a, &model, &mut out);
            }
        }
    }
    let mut worst = (0.0f64, String::new());
    let mut failures = Vec::new();
    for c in &out {
        let gap = relative_gap(c.value, c.oracle);
        if !(gap <= 1e-6) {
            failures.push(format!("{}: {} vs {} (rel {gap:e})", c.label, c.value, c.oracle));
        }
        if gap > worst.0 {
            worst = (gap, c.label.clone());
        }
    }
    if failures.is_empty() {
        Ok(format!("{} values, worst relative gap {:e} ({})", out.len(), worst.0, worst.1))
    } else {
        Err(failures.join("; "))
    }
}

fn b_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let omega = rng.gen_range(0.5..2.0);
        let count = rng.gen_range(1..=4);
        let mut base: Vec<f64> = (0..count).map(|_| rng.gen_range(0.0..omega)).collect();
        base.sort_by(f64::total_cmp);
        base.dedup_by(|a, b| (*a - *b).abs() < 1e-6);
        if base[0] == 0.0 {
            base[0] = 1e-3;
        }
        let maps: Vec<(f64, ImpulseMap)> = base.iter().map(|&t| (t, ImpulseMap::Linear { b: 0.0 })).collect();
        let schedule = ImpulseSchedule::new(omega, maps).map_err(|e| e.to_string())?;
        let lower: Vec<f64> = base.iter().map(|_| rng.gen_range(0.3..2.0)).collect();
        let tau = rng.gen_range(0.05..5.0) * omega;
        let t = if rng.gen_bool(0.2) {
            // exactly on an instant or a window edge
            let k = rng.gen_range(0..base.len());
            base[k] + omega * rng.gen_range(1..8) as f64 + if rng.gen_bool(0.5) { tau } else { 0.0 }
        } else {
            rng.gen_range(0.0..20.0)
        };
        let fast = big_b(&schedule.times, &lower, tau, t);
        let slow = brute_force_b(&schedule, &lower, tau, t);
        let gap = relative_gap(fast, slow);
        if !(gap <= 1e-12) {
            return Err(format!("instance {i}: {fast} vs {slow} at t = {t}, tau = {tau}, omega = {omega}, base = {base:?}, lower = {lower:?}, times = {:?}", schedule.times));
        }
        worst = worst.max(gap);
    }
    Ok(format!("1000 instances, worst relative gap {worst:e}"))
}

/// Root of `a N = b exp(-beta N)` by bisection.
fn equilibrium(a: f64, b: f64, beta: f64) -> f64 {
    let g = |n: f64| a * n - b * (-beta * n).exp();
    let (mut lo, mut hi) = (0.0, b / a);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn periodic_quality() -> Outcome {
    let (a, b, beta) = (1.3, 2.0, 0.7);
    let text = format!(
        r#"{{
      "omega": 1.0,
      "damping": {{"kind": "constant", "value": {a}}},
      "delays": [{{"kind": "multiple", "m": 2}}],
      "rhs": {{"kind": "wazewska", "terms": [{{"b": {{"kind": "constant", "value": {b}}},
               "beta": {{"kind": "constant", "value": {beta}}}, "delay": 0}}]}},
      "history": {{"kind": "constant", "value": 0.5}}
    }}"#
    );
    let s = build_scenario_with(&text, &grid()).map_err(|e| e.to_string())?;
    let model = WazewskaModel::from_scenario(s, &grid()).map_err(|e| e.to_string())?;
    let sol = find_periodic(
        &model,
        1e-11,
        10_000,
        FinderOptions {
            step: 1e-3,
            start_level: Some(0.5),
        },
    )
    .map_err(|e| e.to_string())?;
    let root = equilibrium(a, b, beta);
    let (lo, hi) = sol.extrema();
    let gap = (lo - root).abs().max((hi - root).abs());
    let msg = format!("N* within {gap:e} of the scalar root {root}, residual {:e}", sol.residual);
    if gap < 1e-8 && sol.residual < 1e-8 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn theorem_consistency(analyses: &[(cases::Case, CaseAnalysis)]) -> Outcome {
    let mut covered = Vec::new();
    let mut failures = Vec::new();
    for (case, a) in analyses {
        if !a.guaranteed_attracting() {
            continue;
        }
        covered.push(case.id.clone());
        if a.observed_attracting() != Some(true) {
            let passing: Vec<&str> = a
                .results
                .iter()
                .filter(|r| r.verdict == Verdict::Pass && r.id.implies_attractivity())
                .map(|r| r.id.as_str())
                .collect();
            failures.push(format!("{} not attracting although {passing:?} pass", case.id));
        }
    }
    if covered.is_empty() {
        return Err("no bundled scenario satisfies a sufficient condition".into());
    }
    if failures.is_empty() {
        Ok(format!("attracting where guaranteed: {}", covered.join(", ")))
    } else {
        Err(failures.join("; "))
    }
}

fn criteria_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let opts = CheckOptions {
        grid: GridSettings::with_density(1024),
        ..CheckOptions::default()
    };
    let (mut worst_scale, mut worst_equal, mut min_margin) = (0.0f64, 0.0f64, f64::INFINITY);
    for _ in 0..6 {
        let text = random_impulsive(&mut rng, false, false);
        let s = build_scenario_with(&text, &grid()).map_err(|e| e.to_string())?;
        let lower: Vec<f64> = ratio_bounds(&s.impulses).0.iter().map(|r| r.0).collect();
        let lam = rng.gen_range(0.2..1.0);
        let amp = rng.gen_range(0.0..0.5);
        let shape = TimeFn::trig(1.0, lam, vec![amp], vec![]);
        let same = vec![YorkeTerm {
            lambda1: shape.clone(),
            lambda2: shape.clone(),
            delay: 0,
        }];
        let c = rng.gen_range(0.1..5.0);
        let scaled = vec![YorkeTerm {
            lambda1: shape.clone(),
            lambda2: TimeFn::trig(1.0, c * lam, vec![c * amp], vec![]),
            delay: 0,
        }];
        let base = alpha_integrals(&s, &same, &lower, AlphaVariant::Single, &opts);
        let grown = alpha_integrals(&s, &scaled, &lower, AlphaVariant::Single, &opts);
        worst_scale = worst_scale.max(relative_gap(grown.alpha2, c * base.alpha2));
        worst_equal = worst_equal.max(relative_gap(base.alpha1, base.alpha2));
        let yan = alpha_integrals(&s, &same, &lower, AlphaVariant::Yan, &opts);
        min_margin = min_margin.min(yan.alpha1 - base.alpha1);
    }
    let msg = format!(
        "alpha2 scaling gap {worst_scale:e}, alpha1/alpha2 gap {worst_equal:e}, min sigma - alpha {min_margin:e}"
    );
    if worst_scale <= 1e-12 && worst_equal <= 1e-12 && min_margin > 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn determinism() -> Outcome {
    let settings = RunSettings::default();
    let mut files = 0;
    for id in REPRODUCIBLE {
        let first = cases::reproduce(id, &settings).map_err(|e| e.to_string())?;
        let second = cases::reproduce(id, &settings).map_err(|e| e.to_string())?;
        if first.files != second.files {
            let differing: Vec<&String> = first
                .files
                .iter()
                .filter(|(k, v)| second.files.get(*k) != Some(v))
                .map(|(k, _)| k)
                .collect();
            return Err(format!("{id}: outputs differ in {differing:?}"));
        }
        files += first.files.len();
    }
    Ok(format!("{files} files byte-identical across two runs"))
}

fn main() -> ExitCode {
    let settings = RunSettings {
        check: CheckOptions {
            grid: grid(),
            ..CheckOptions::default()
        },
        ..RunSettings::default()
    };
    let started = Instant::now();
    let analyses: Result<Vec<_>, String> = cases::bundled()
        .into_iter()
        .map(|c| cases::analyse(&c, &settings).map(|a| (c, a)).map_err(|e| e.to_string()))
        .collect();
    println!("analysed bundled scenarios in {:.1} s", started.elapsed().as_secs_f64());

    let items: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("1 integrator order", Box::new(integrator_order)),
        ("2 exact solution example", Box::new(example_fidelity)),
        ("3 impulse removal", Box::new(impulse_removal)),
        ("4 linear-impulse reduction", Box::new(reduction_equivalence)),
        (
            "5 quadrature oracle",
            Box::new(|| analyses.as_ref().map_err(Clone::clone).and_then(|a| quadrature_oracle(a))),
        ),
        ("6 impulse product exactness", Box::new(b_exactness)),
        ("7 periodic solution quality", Box::new(periodic_quality)),
        (
            "8 theorem consistency",
            Box::new(|| analyses.as_ref().map_err(Clone::clone).and_then(|a| theorem_consistency(a))),
        ),
        ("9 criteria homogeneity and ordering", Box::new(criteria_properties)),
        ("10 determinism", Box::new(determinism)),
    ];
    let mut failed = 0;
    for (name, item) in items {
        let t = Instant::now();
        let outcome = item();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} ({secs:.1} s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name} ({secs:.1} s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance item(s) failed");
        ExitCode::FAILURE
    }
}
