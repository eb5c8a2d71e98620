use idde_core::grid::GridSettings;
use idde_core::integrator::{integrate, StepControl};
use idde_core::model::{build_scenario_with, History};
use idde_core::quad::Side;
use idde_core::transforms::{
    expand_reduction, linear_factors, linear_impulse_reduction, ratio_identity_gap, ratio_transform, remove_impulses,
    transformed_residual,
};
use idde_core::wazewska::{find_periodic, FinderOptions, WazewskaModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn wazewska(b1: f64, b2: f64, amp: f64, m: u32, nonlinear: bool) -> WazewskaModel {
    let second = if nonlinear {
        format!(r#"{{"t": 0.7, "kind": "tabulated", "params": {{"u": [0, 1, 3], "values": [0, {b2}, {}]}}}}"#, 2.0 * b2)
    } else {
        format!(r#"{{"t": 0.7, "kind": "linear", "params": {{"b": {b2}}}}}"#)
    };
    let text = format!(
        r#"{{
        "omega": 1.0,
        "damping": {{"kind": "trig", "mean": 1.0, "cos": [{amp}]}},
        "delays": [{{"kind": "multiple", "m": {m}}}],
        "rhs": {{"kind": "wazewska", "terms": [{{
            "b": {{"kind": "trig", "mean": 1.0, "sin": [0.3]}},
            "beta": {{"kind": "constant", "value": 0.8}},
            "delay": 0}}]}},
        "impulses": [
            {{"t": 0.3, "kind": "linear", "params": {{"b": {b1}}}}},
            {second}
        ],
        "history": {{"kind": "constant", "value": 0.7}}
    }}"#
    );
    let grid = GridSettings::default();
    let s = build_scenario_with(&text, &grid).unwrap();
    WazewskaModel::from_scenario(s, &grid).unwrap()
}

fn interior_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|j| lo + (hi - lo) * (j as f64 + 0.37) / n as f64).collect()
}

#[test]
fn removed_impulses_leave_a_continuous_solution() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..4 {
        let b1 = rng.gen_range(-0.5..0.5);
        let b2 = rng.gen_range(-0.5..0.5);
        let amp = rng.gen_range(0.0..0.5);
        let nonlinear = rng.gen_bool(0.5);
        let model = wazewska(b1, b2, amp, 1, nonlinear);
        let h = 1e-3;
        let x = integrate(&model.scenario, StepControl::new(h), 6.0).unwrap();
        let tr = remove_impulses(&x, model.impulses()).unwrap();
        assert!(tr.max_jump_gap() < 1e-8);
        let grid = interior_grid(0.0, 5.9, 300);
        let res = transformed_residual(&tr, &model.scenario, &grid, h);
        assert!(res < 1e-4, "residual {res}");
        for &t in &grid {
            let x_t = x.eval(t).unwrap();
            assert!((tr.reconstruct(t, Side::Left) - x_t).abs() <= 1e-12 * x_t.abs());
        }
    }
}

#[test]
fn linear_factors_match_the_general_transform() {
    let model = wazewska(-0.3, 0.2, 0.2, 1, false);
    let x = integrate(&model.scenario, StepControl::new(1e-3), 5.0).unwrap();
    let general = remove_impulses(&x, model.impulses()).unwrap();
    let linear = linear_factors(&x, model.impulses()).unwrap();
    assert_eq!(general.interval_factors.len(), linear.interval_factors.len());
    for (g, l) in general.interval_factors.iter().zip(&linear.interval_factors) {
        assert!((g - l).abs() <= 1e-15 * l.abs());
    }
}

#[test]
fn reduction_reproduces_the_impulsive_solution() {
    for m in [1, 2] {
        let model = wazewska(-0.4, 0.25, 0.3, m, false);
        let direct = integrate(&model.scenario, StepControl::new(1e-3), 5.0).unwrap();
        let reduced = linear_impulse_reduction(&model).unwrap();
        assert!(reduced.impulses.is_empty());
        let y = integrate(&reduced, StepControl::new(1e-3), 5.0).unwrap();
        let back = expand_reduction(&y, model.impulses()).unwrap();
        let mut worst = 0.0f64;
        for j in 0..=2000 {
            let t = 5.0 * j as f64 / 2000.0;
            for side in [Side::Left, Side::Right] {
                let a = direct.value(t, side).unwrap();
                let b = back.value(t, side).unwrap();
                worst = worst.max((a - b).abs());
            }
        }
        assert!(worst < 1e-6, "m = {m}: {worst}");
    }
}

#[test]
fn ratio_transform_identity_and_scaling() {
    let model = wazewska(-0.3, 0.2, 0.2, 1, false);
    let sol = find_periodic(&model, 1e-11, 4000, FinderOptions::for_period(1.0)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let pairs: Vec<(f64, f64)> = (0..40)
        .map(|_| {
            let t = rng.gen_range(1.0..4.0);
            (t - rng.gen_range(0.0..1.0), t)
        })
        .collect();
    let gap = ratio_identity_gap(&model, &sol, &pairs).unwrap();
    assert!(gap < 1e-8, "identity gap {gap}");

    let doubled = model.with_history(History::Profile {
        profile: sol.profile.clone(),
        scale: 2.0,
    });
    let n = integrate(&doubled, StepControl::new(1e-3), 0.5).unwrap();
    let y = ratio_transform(&n, &sol, model.impulses()).unwrap();
    for t in [-0.9, -0.5, -0.1, 0.0] {
        assert!((y.eval(t).unwrap() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn ratio_transform_refuses_nonlinear_impulses() {
    let model = wazewska(-0.3, 0.2, 0.2, 1, true);
    let linear = wazewska(-0.3, 0.2, 0.2, 1, false);
    let sol = find_periodic(&linear, 1e-10, 4000, FinderOptions::for_period(1.0)).unwrap();
    let n = integrate(&model.scenario, StepControl::new(1e-3), 2.0).unwrap();
    assert!(ratio_transform(&n, &sol, model.impulses()).is_err());
}
