use num_complex::Complex64;
use proptest::prelude::*;
use purcell_core::analytics;
use purcell_core::dynamics::{population, Observable};
use purcell_core::experiments::figures;
use purcell_core::experiments::validate::{lambda_root_residual, ulps, ulps_real};
use purcell_core::floquet;
use purcell_core::{parse_config, Model, Params, Scenario};

fn cavity(gamma: f64, gamma_prime: f64, g: f64, kappa: f64, delta: f64, eta: f64, scenario: Scenario) -> Model {
    let p = Params {
        gamma,
        gamma_prime,
        g,
        kappa,
        delta_a: delta,
        delta_c: delta,
        eta,
        omega_rec: 0.5,
        ..Params::default()
    };
    Model::new(p, scenario).unwrap()
}

fn scaled(p: &Params, s: f64) -> Params {
    Params {
        gamma: p.gamma * s,
        gamma_prime: p.gamma_prime * s,
        g: p.g * s,
        kappa: p.kappa * s,
        delta_a: p.delta_a * s,
        delta_c: p.delta_c * s,
        eta: p.eta * s,
        omega: p.omega * s,
        omega_rec: p.omega_rec * s,
        ..*p
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn toeplitz_root_in_disk(re in 1e-3..1e3f64, im in -1e3..1e3f64, c in 1e-4..1e3f64) {
        let a = Complex64::new(re, im) + 2.0 * c;
        let l = floquet::toeplitz_root(a, c).unwrap();
        prop_assert!(l.norm() < 1.0);
        prop_assert!(lambda_root_residual(a, c, l) < 1e-13);
    }

    #[test]
    fn velocity_parity(
        gamma in 0.1..2.0f64, g in 0.0..200.0f64, kappa in 1.0..2000.0f64,
        delta in -300.0..300.0f64, kv in -50.0..50.0f64, kv2 in -50.0..50.0f64,
    ) {
        let m = cavity(gamma, 0.0, g, kappa, delta, 10.0, Scenario::CavityClosed);
        let a = floquet::floquet_cavity_2x2(&m, kv).unwrap();
        let b = floquet::floquet_cavity_2x2(&m, -kv).unwrap();
        prop_assert!(ulps(a.b_plus, b.b_minus) <= 4.0 && ulps(a.b_minus, b.b_plus) <= 4.0);
        let a = floquet::floquet_many_sherman_morrison(&m, &[kv, kv2]).unwrap();
        let b = floquet::floquet_many_sherman_morrison(&m, &[-kv, -kv2]).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(ulps(x.b_plus, y.b_minus) <= 4.0 && ulps(x.b_minus, y.b_plus) <= 4.0);
        }
    }

    #[test]
    fn rates_are_homogeneous(
        gamma in 0.2..1.0f64, g in 1.0..100.0f64, kappa in 10.0..2000.0f64,
        delta in 0.5..300.0f64, eta in 1.0..100.0f64, s in 0.01..100.0f64,
    ) {
        let m = cavity(gamma, 1.0 - gamma, g, kappa, delta, eta, Scenario::CavityNonClosed);
        let ms = m.with_params(scaled(m.params(), s)).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        prop_assert!(close(analytics::xi_cavity_single(&ms), s * analytics::xi_cavity_single(&m)));
        prop_assert!(close(analytics::mu_free_space(&ms), s * analytics::mu_free_space(&m)));
        let (fs, fss) = (m.free_space_twin(), ms.free_space_twin());
        prop_assert!(close(analytics::xi_free_space(&fss), s * analytics::xi_free_space(&fs)));
        prop_assert!(close(ms.cooperativity(), m.cooperativity()));
    }

    #[test]
    fn limit_chains(
        gamma in 0.2..1.0f64, g in 0.1..100.0f64, kappa in 10.0..2000.0f64,
        delta in -300.0..300.0f64, n_g in 1e-3..1.0f64,
    ) {
        let m = cavity(gamma, 1.0 - gamma, g, kappa, delta, 10.0, Scenario::CavityNonClosed);
        prop_assert_eq!(analytics::xi_cavity_many(&m), analytics::xi_cavity_single(&m));
        prop_assert_eq!(population::ng_ode_many(&m, n_g), population::ng_ode_single(&m, n_g));
        let fs = m.free_space_twin();
        prop_assert!(ulps_real(analytics::xi_cavity_at_population(&fs, 1.0, 1), analytics::xi_free_space(&fs)) <= 4.0);
        prop_assert!(ulps_real(population::ng_ode_single(&fs, n_g), -analytics::mu_free_space(&fs) * n_g) <= 4.0);
    }

    #[test]
    fn loss_is_negative(g in 0.1..200.0f64, delta in -50.0..50.0f64, n_g in 1e-4..1.0f64) {
        let m = cavity(0.85, 0.15, g, 1000.0, delta, 10.0, Scenario::CavityNonClosed);
        prop_assert!(population::ng_ode_infinite_order(&m, n_g).unwrap() < 0.0);
        prop_assert!(population::ng_ode_single(&m, n_g) < 0.0);
    }

    #[test]
    fn free_space_velocity_monotone(delta in 0.5..50.0f64, omega in 0.1..5.0f64, t in 0.0..1e4f64, dt in 0.0..1e3f64) {
        let p = Params { gamma: 0.85, gamma_prime: 0.15, omega, delta_a: delta, omega_rec: 0.1, ..Params::default() };
        let m = Model::new(p, Scenario::FreeSpaceNonClosed).unwrap();
        prop_assert!(analytics::v_of_t_nonclosed_fs(&m, 1.0, t + dt) <= analytics::v_of_t_nonclosed_fs(&m, 1.0, t));
    }

    #[test]
    fn config_round_trip(
        gamma in 0.1..1.0f64, g in 0.1..200.0f64, kappa in 1.0..2000.0f64,
        delta in -300.0..300.0f64, eta in 0.1..200.0f64, kv0 in -40.0..40.0f64, t_end in 1.0..1e4f64,
    ) {
        let m = cavity(gamma, 1.0 - gamma, g, kappa, delta, eta, Scenario::CavityNonClosed);
        let cfg = figures::single_config(&m, kv0, t_end, t_end / 7.0, Observable::defaults(m.scenario(), 1));
        let back = parse_config(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

#[test]
fn exponent_monotone_in_cooperativity() {
    let mut last = 0.0;
    for i in 0..=20 {
        let c = i as f64 / 20.0;
        let m = Model::new(figures::fig5_params(c.max(1e-12)), Scenario::CavityNonClosed).unwrap();
        let e = analytics::final_velocity_exponent_integral(&m, 1).unwrap().quadrature;
        assert!(e >= 0.0);
        assert!(e >= last, "C = {c}: {e} < {last}");
        last = e;
    }
}

#[test]
fn exponent_gap_richardson() {
    // |quadrature − closed form| = a C² + O(C³): successive halvings give
    // ratios approaching 4.
    let gap = |c: f64| {
        let m = Model::new(figures::fig5_params(c), Scenario::CavityNonClosed).unwrap();
        let e = analytics::final_velocity_exponent_integral(&m, 1).unwrap();
        (e.quadrature - e.closed_form).abs()
    };
    let ratios: Vec<f64> = [0.4, 0.2, 0.1].iter().map(|&c| gap(c) / gap(c / 2.0)).collect();
    for w in ratios.windows(2) {
        assert!((w[1] - 4.0).abs() < (w[0] - 4.0).abs(), "{ratios:?}");
    }
    assert!((ratios[2] - 4.0).abs() < 0.1, "{ratios:?}");
}

#[test]
fn exponent_independent_of_emitter_number() {
    let m = Model::new(figures::fig7_params(), Scenario::CavityNonClosedMany).unwrap();
    let one = analytics::final_velocity_exponent_integral(&m, 1).unwrap().quadrature;
    for n in [2, 40, 400, 4000] {
        let q = analytics::final_velocity_exponent_integral(&m, n).unwrap().quadrature;
        assert!((q - one).abs() <= 1e-10 * one.abs(), "N = {n}");
    }
}
