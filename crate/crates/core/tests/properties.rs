use std::f64::consts::PI;

use lifespan_core::kernel::{free_propagate, neumann_green, KernelQuery};
use lifespan_core::numeric::geometry::half_ball_measure;
use lifespan_core::numeric::integrate::{gauss_kronrod_breaks, Tolerance};
use lifespan_core::profiles::{half_ball_mass, phi_inverse, phi_orlicz, psi_inverse, psi_power_log, rho, PowerLogSpec};
use lifespan_core::{InitialProfile, Param};
use proptest::prelude::*;

fn g1(x: f64, y: f64, t: f64) -> f64 {
    neumann_green(&KernelQuery::new(vec![x], vec![y], t).unwrap()).unwrap()
}

fn tight() -> Tolerance {
    Tolerance::new(1e-13, 1e-11)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn green_is_nonnegative_and_symmetric(
        n in 1usize..4,
        x in prop::collection::vec(0.0f64..3.0, 3),
        y in prop::collection::vec(0.0f64..3.0, 3),
        t in 1e-3f64..10.0,
    ) {
        let a = KernelQuery::new(x[..n].to_vec(), y[..n].to_vec(), t).unwrap();
        let b = KernelQuery::new(y[..n].to_vec(), x[..n].to_vec(), t).unwrap();
        let (ga, gb) = (neumann_green(&a).unwrap(), neumann_green(&b).unwrap());
        prop_assert!(ga >= 0.0);
        prop_assert!((ga - gb).abs() <= 4.0 * f64::EPSILON * ga.abs(), "{} vs {}", ga, gb);
    }

    #[test]
    fn green_conserves_mass(x in 0.0f64..5.0, t in 1e-3f64..10.0) {
        let w = 12.0 * t.sqrt();
        let q = gauss_kronrod_breaks(|y| g1(x, y, t), &[0.0, x, x + w], tight()).unwrap();
        prop_assert!((q.value - 1.0).abs() < 1e-6, "mass {}", q.value);
    }

    #[test]
    fn green_semigroup(x in 0.0f64..2.0, y in 0.0f64..2.0, t in 0.01f64..2.0, s in 0.01f64..2.0) {
        let hi = x.max(y) + 12.0 * t.max(s).sqrt();
        let q = gauss_kronrod_breaks(|z| g1(x, z, t) * g1(z, y, s), &[0.0, x.min(y), x.max(y), hi], tight()).unwrap();
        let expect = g1(x, y, t + s);
        prop_assert!((q.value - expect).abs() < 1e-5, "{} vs {}", q.value, expect);
    }

    #[test]
    fn phi_inverse_round_trips(log_s in -8.0f64..8.0, n in 1usize..4) {
        let s = 10f64.powf(log_s);
        let back = phi_inverse(phi_orlicz(s, n), n);
        prop_assert!((back / s - 1.0).abs() < 1e-10, "{} vs {}", back, s);
    }

    #[test]
    fn phi_and_rho_are_monotone(log_s in -8.0f64..8.0, n in 1usize..4) {
        let s = 10f64.powf(log_s);
        let s2 = s * 1.01;
        prop_assert!(phi_orlicz(s2, n) > phi_orlicz(s, n));
        prop_assert!(rho(s2, n).unwrap() < rho(s, n).unwrap());
    }

    #[test]
    fn psi_round_trips(a1 in 0.2f64..3.0, a2 in -2.0f64..2.0, frac in 0.0f64..1.0) {
        let spec = PowerLogSpec::new(a1, a2).unwrap();
        let range = spec.monotone_range();
        let tau = (range.tau_max.min(1e6).ln() - 20.0 * frac).exp();
        let v = psi_power_log(tau, &spec);
        let back = psi_inverse(v, &spec).unwrap();
        prop_assert!((back / tau - 1.0).abs() < 1e-12, "{} vs {}", back, tau);
    }

    #[test]
    fn half_ball_mass_is_nondecreasing(a in 0.1f64..0.9, b in -1.0f64..1.0, log_s in -6.0f64..0.5) {
        let p = InitialProfile::singular_log(a, b);
        let s = 10f64.powf(log_s);
        prop_assert!(half_ball_mass(&p, s * 1.1, 1).unwrap() >= half_ball_mass(&p, s, 1).unwrap());
    }

    #[test]
    fn free_evolution_is_monotone_in_data(a1 in 0.5f64..3.0, da in 0.0f64..2.0, x in 0.0f64..2.0, t in 0.01f64..1.0) {
        let tol = Tolerance::default();
        let big = free_propagate(&InitialProfile::power_decay(a1), &[x], t, tol).unwrap();
        let small = free_propagate(&InitialProfile::power_decay(a1 + da), &[x], t, tol).unwrap();
        prop_assert!(small <= big * (1.0 + 1e-5));
    }

    #[test]
    fn power_decay_is_radially_nonincreasing(a in 0.1f64..5.0, r in 0.0f64..100.0) {
        let p = InitialProfile::power_decay(a);
        prop_assert!(p.eval_radial(r * 1.01 + 1e-9) <= p.eval_radial(r));
    }
}

#[test]
fn half_ball_mass_closed_forms() {
    let cases: Vec<(InitialProfile, usize, f64, f64)> = vec![
        (InitialProfile::singular_log(0.5, 0.0), 1, 1.0, 2.0),
        (InitialProfile::singular_log(0.5, 0.0), 1, 0.25, 1.0),
        (InitialProfile::singular_log(0.5, 0.0), 1, 4.0, 2.0),
        (InitialProfile::singular_log(1.0, 0.0), 2, 0.5, PI * 0.5),
        (InitialProfile::singular_log(1.5, 0.0), 3, 1.0, 2.0 * PI / 1.5),
        (InitialProfile::Constant { c: 3.0 }, 1, 0.5, 1.5),
        (InitialProfile::Constant { c: 1.0 }, 3, 2.0, 2.0 / 3.0 * PI * 8.0),
        (InitialProfile::power_decay(2.0), 1, 3.0, 0.75),
        (InitialProfile::power_decay(3.0), 2, 1.0, PI * 1.0 / 8.0),
    ];
    for (p, n, sigma, expect) in cases {
        let got = half_ball_mass(&p, sigma, n).unwrap();
        assert!((got - expect).abs() <= 1e-10 * expect.max(1.0), "{p:?} N={n} σ={sigma}: {got} vs {expect}");
    }
    assert!((half_ball_measure(1, 0.0, 0.5) - 0.5).abs() < 1e-12);
    let divergent = InitialProfile::SingularLog {
        a: Param::integer(2),
        b: Param::ratio(1, 2),
    };
    for sigma in [1e-3, 0.5, 2.0] {
        assert_eq!(half_ball_mass(&divergent, sigma, 2).unwrap(), f64::INFINITY);
    }
}

#[test]
fn singular_log_mass_scales_like_power_times_log() {
    for (a, b) in [(0.5, 0.0), (0.5, 1.0), (0.3, -1.0)] {
        let p = InitialProfile::singular_log(a, b);
        for k in 1..=6 {
            let s = 10f64.powi(-k);
            let scale = s.powf(1.0 - a) * (std::f64::consts::E + 1.0 / s).ln().powf(-b);
            let ratio = half_ball_mass(&p, s, 1).unwrap() / scale;
            assert!((0.25..=4.0).contains(&ratio), "A={a} B={b} σ={s}: {ratio}");
        }
    }
}

#[test]
fn gaussian_free_evolution_has_unit_mass_kernel() {
    // ∫ G(0,y,t) e^{λy²} dy against the closed form.
    let (lambda, t) = (0.25, 0.5);
    // The product decays like e^{-y²/4} here; y = 40 is far in the tail.
    let q = gauss_kronrod_breaks(|y| g1(0.0, y, t) * (lambda * y * y).exp(), &[0.0, 5.0, 40.0], tight()).unwrap();
    let closed = free_propagate(&InitialProfile::GaussianGrowth { lambda }, &[0.0], t, Tolerance::default()).unwrap();
    assert!((q.value / closed - 1.0).abs() < 1e-8);
}
