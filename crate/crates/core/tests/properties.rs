use idde_core::criteria::{alpha_integrals, big_b, AlphaVariant, CheckOptions};
use idde_core::grid::GridSettings;
use idde_core::integrator::{integrate, StepControl};
use idde_core::model::{DelaySpec, History, ImpulseMap, ImpulseSchedule, Rhs, Scenario, TimeFn, YorkeTerm};
use idde_core::quad::Side;
use idde_core::reference::{brute_force_b, euler_integrate};
use proptest::prelude::*;

fn schedule(omega: f64, base: &[f64]) -> ImpulseSchedule {
    let mut times: Vec<f64> = base.iter().map(|b| b * omega).collect();
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() < 1e-3 * omega);
    let maps = times.into_iter().map(|t| (t, ImpulseMap::Linear { b: 0.0 })).collect();
    ImpulseSchedule::new(omega, maps).unwrap()
}

fn feedback(a: f64, amp: f64, tau: f64, k: f64, impulses: ImpulseSchedule) -> Scenario {
    Scenario {
        omega: 1.0,
        damping: TimeFn::trig(1.0, a, vec![amp], vec![]),
        delays: vec![DelaySpec::constant(tau)],
        rhs: Rhs::linear_feedback(k, 0),
        impulses,
        history: History::constant(1.0),
        t0: 0.0,
        yorke: None,
        require_zero_equilibrium: false,
    }
}

fn quick() -> CheckOptions {
    CheckOptions {
        grid: GridSettings::with_density(256),
        ..CheckOptions::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn suffix_product_matches_enumeration(
        omega in 0.5f64..2.0,
        base in prop::collection::vec(0.01f64..1.0, 1..4),
        factors in prop::collection::vec(0.3f64..2.0, 4),
        tau in 0.05f64..5.0,
        t in 0.0f64..20.0,
    ) {
        let s = schedule(omega, &base);
        let lower = &factors[..s.times.base.len()];
        let fast = big_b(&s.times, lower, tau * omega, t);
        let slow = brute_force_b(&s, lower, tau * omega, t);
        prop_assert!((fast - slow).abs() <= 1e-12 * slow, "{} vs {}", fast, slow);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn upper_integral_is_linear_in_its_coefficient(
        a in 0.3f64..2.0,
        amp in 0.0f64..0.25,
        tau in 0.3f64..1.5,
        lam in 0.1f64..1.0,
        c in 0.1f64..10.0,
        b in -0.5f64..0.5,
    ) {
        let imp = ImpulseSchedule::new(1.0, vec![(0.4, ImpulseMap::Linear { b })]).unwrap();
        let s = feedback(a, amp * a, tau, 0.5, imp);
        let lower = [1.0 + b];
        let one = vec![YorkeTerm { lambda1: TimeFn::constant(lam), lambda2: TimeFn::constant(lam), delay: 0 }];
        let scaled = vec![YorkeTerm { lambda1: TimeFn::constant(lam), lambda2: TimeFn::constant(c * lam), delay: 0 }];
        let v = alpha_integrals(&s, &one, &lower, AlphaVariant::Single, &quick());
        let w = alpha_integrals(&s, &scaled, &lower, AlphaVariant::Single, &quick());
        prop_assert!((w.alpha2 - c * v.alpha2).abs() <= 1e-12 * c * v.alpha2);
        prop_assert!((w.alpha1 - v.alpha1).abs() <= 1e-12 * v.alpha1);
    }

    #[test]
    fn equal_coefficients_give_equal_integrals_below_growth_form(
        a in 0.3f64..2.0,
        amp in 0.0f64..0.25,
        tau in 0.3f64..1.5,
        lam in 0.1f64..1.0,
    ) {
        let s = feedback(a, amp * a, tau, lam, ImpulseSchedule::none(1.0));
        let bounds = s.yorke_bounds().unwrap();
        let v = alpha_integrals(&s, &bounds, &[], AlphaVariant::Single, &quick());
        let y = alpha_integrals(&s, &bounds, &[], AlphaVariant::Yan, &quick());
        prop_assert_eq!(v.alpha1, v.alpha2);
        prop_assert!(v.alpha1 < y.alpha1);
    }

    #[test]
    fn runge_kutta_agrees_with_fine_euler(
        a in 0.2f64..1.5,
        tau in 0.4f64..1.5,
        k in -0.8f64..0.8,
        b in -0.5f64..0.5,
    ) {
        let imp = ImpulseSchedule::new(1.0, vec![(0.5, ImpulseMap::Linear { b })]).unwrap();
        let s = feedback(a, 0.0, tau, k, imp);
        let rk = integrate(&s, StepControl::new(1e-2), 3.0).unwrap();
        let eu = euler_integrate(&s, 1e-5, 3.0).unwrap();
        for j in 0..=30 {
            let t = 0.1 * j as f64;
            for side in [Side::Left, Side::Right] {
                let (x, y) = (rk.value(t, side).unwrap(), eu.value(t, side).unwrap());
                prop_assert!((x - y).abs() < 1e-3, "t = {}: {} vs {}", t, x, y);
            }
        }
    }
}
