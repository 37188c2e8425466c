//! Closed-form cooling rates, population-loss rates and velocity predictions.
//!
//! All formulas use |Ω|² and the total linewidth γ_tot (which equals γ for
//! closed transitions). A negative Δ_a yields a negative friction rate,
//! i.e. heating, rather than an error.

use serde::Serialize;

use crate::dynamics::population;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::quadrature;

/// Doppler shift, as a fraction of |Δ_a|, below which the linear friction
/// expansion is considered valid.
pub const SMALL_DOPPLER_FRACTION: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegimeFlags {
    /// k v ≪ Δ_a (only meaningful when a Doppler shift was supplied).
    pub small_doppler_ok: bool,
    /// γ_tot C/(4Δ_a) < 1, where the two-sideband truncation holds.
    pub regime_i_ok: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePrediction {
    /// Friction rate ξ.
    pub xi: f64,
    /// Population-loss rate μ (zero for closed transitions).
    pub mu: f64,
    pub regime: RegimeFlags,
}

/// γ_tot C / (4 |Δ_a|); infinite at Δ_a = 0 with C > 0.
pub fn regime_parameter(model: &Model) -> f64 {
    let c = model.cooperativity();
    if c == 0.0 {
        return 0.0;
    }
    model.gamma_tot() * c / (4.0 * model.params().delta_a.abs())
}

/// Free-space friction ξ_fs = 4|Ω|²ω_rec Δ_a γ_tot / (γ_tot² + Δ_a²)².
pub fn xi_free_space(model: &Model) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let lorentz = gamma * gamma + p.delta_a * p.delta_a;
    4.0 * model.drive_sq() * p.omega_rec * p.delta_a * gamma / (lorentz * lorentz)
}

/// Cavity friction for ground-state population `n_g` with `n_emitters`
/// emitters sharing the mode. Both widths and the drive scale with n_g; at
/// n_g = 1 this is the closed-transition rate.
pub fn xi_cavity_at_population(model: &Model, n_g: f64, n_emitters: usize) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let c = model.cooperativity() * n_g;
    let collective = (2 * n_emitters + 1) as f64;
    let single_width = gamma * (1.0 + c / 4.0);
    let collective_width = gamma * (1.0 + c * collective / 4.0);
    let numer = 4.0 * model.drive_sq() * n_g * p.omega_rec * p.delta_a * gamma * (1.0 + c / 2.0);
    let denom = (p.delta_a * p.delta_a + single_width * single_width)
        * (p.delta_a * p.delta_a + collective_width * collective_width);
    numer / denom
}

/// Purcell-modified single-emitter friction (two-sideband truncation,
/// resonant cavity).
pub fn xi_cavity_single(model: &Model) -> f64 {
    xi_cavity_at_population(model, 1.0, 1)
}

/// Per-emitter friction with `model.n_emitters()` emitters in the mode.
pub fn xi_cavity_many(model: &Model) -> f64 {
    xi_cavity_at_population(model, 1.0, model.n_emitters())
}

/// μ_fs = γ′|Ω|² / (Δ_a² + γ_tot²).
pub fn mu_free_space(model: &Model) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    p.gamma_prime * model.drive_sq() / (p.delta_a * p.delta_a + gamma * gamma)
}

/// Analytic rates matching the model's scenario, with validity flags.
/// `kv` is the Doppler shift to check the small-Doppler condition against.
pub fn predict(model: &Model, kv: Option<f64>) -> RatePrediction {
    let s = model.scenario();
    let xi = if !s.is_cavity() {
        xi_free_space(model)
    } else if s.is_many() {
        xi_cavity_many(model)
    } else {
        xi_cavity_single(model)
    };
    let mu = if s.is_closed() {
        0.0
    } else {
        mu_free_space(model)
    };
    let delta = model.params().delta_a.abs();
    RatePrediction {
        xi,
        mu,
        regime: RegimeFlags {
            small_doppler_ok: kv.map_or(true, |kv| kv.abs() < SMALL_DOPPLER_FRACTION * delta),
            regime_i_ok: regime_parameter(model) < 1.0,
        },
    }
}

/// Free-space non-closed velocity v₀ exp[(ξ/μ)(e^{−μt} − 1)]; plain
/// exponential decay when μ = 0.
pub fn v_of_t_nonclosed_fs(model: &Model, v0: f64, t: f64) -> f64 {
    let xi = xi_free_space(model);
    let mu = mu_free_space(model);
    if mu == 0.0 {
        return v0 * (-xi * t).exp();
    }
    v0 * ((xi / mu) * (-mu * t).exp_m1()).exp()
}

/// v₀ exp[−4ω_rec γ_tot Δ_a / (γ′(Δ_a² + γ_tot²))]. Returns 0 for γ′ = 0,
/// where the cycle never stops (see [`is_degenerate_final_velocity`]).
pub fn final_velocity_fs(model: &Model, v0: f64) -> f64 {
    let p = model.params();
    if is_degenerate_final_velocity(model) {
        return 0.0;
    }
    let gamma = model.gamma_tot();
    let exponent = 4.0 * p.omega_rec * gamma * p.delta_a
        / (p.gamma_prime * (p.delta_a * p.delta_a + gamma * gamma));
    v0 * (-exponent).exp()
}

pub fn is_degenerate_final_velocity(model: &Model) -> bool {
    model.params().gamma_prime == 0.0
}

/// Regime-i cavity velocity
/// v₀ exp{(ξ_fs/μ_fs)[(e^{−μt} − 1) + (C/4)(e^{−2μt} − 1)]}.
pub fn v_of_t_nonclosed_cavity_regime_i(model: &Model, v0: f64, t: f64) -> f64 {
    let xi = xi_free_space(model);
    let mu = mu_free_space(model);
    let c = model.cooperativity();
    if mu == 0.0 {
        return v0 * (-xi * (1.0 + c / 2.0) * t).exp();
    }
    v0 * ((xi / mu) * ((-mu * t).exp_m1() + c / 4.0 * (-2.0 * mu * t).exp_m1())).exp()
}

/// v_c,final / v_fs,final = exp[−(ξ_fs/μ_fs) C/4] in regime i.
pub fn final_velocity_ratio_cavity(model: &Model) -> f64 {
    let mu = mu_free_space(model);
    if mu == 0.0 {
        return 0.0;
    }
    (-(xi_free_space(model) / mu) * model.cooperativity() / 4.0).exp()
}

/// Leading-order (in C) prediction of ln(v_c,final / v_fs,final):
/// −(ξ_fs/μ_fs)(C/4) Δ_a²/(Δ_a² + γ_tot²).
pub fn ln_final_velocity_ratio_leading(model: &Model) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let d2 = p.delta_a * p.delta_a;
    -(xi_free_space(model) / mu_free_space(model)) * model.cooperativity() / 4.0 * d2
        / (d2 + gamma * gamma)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentIntegral {
    /// ∫₀^∞ ξ_c(n_g(t)) dt by quadrature over n_g ∈ [0, 1].
    pub quadrature: f64,
    pub quadrature_error: f64,
    /// (ξ_fs/μ_fs)[1 + CΔ_a²/(4(Δ_a² + γ_tot²))].
    pub closed_form: f64,
}

pub const EXPONENT_QUADRATURE_TOL: f64 = 1e-10;

/// Final-velocity exponent ∫₀^∞ ξ_c(n_g(t)) dt, so that
/// v_final = v₀ exp(−exponent).
///
/// The quadrature changes variables to the ground-state population,
/// integrating ξ_c(n_g)/|ṅ_g(n_g)| with the full collective factors of
/// `n_emitters` emitters in both numerator and denominator.
pub fn final_velocity_exponent_integral(
    model: &Model,
    n_emitters: usize,
) -> Result<ExponentIntegral> {
    let p = model.params();
    if !(p.gamma_prime > 0.0) {
        return Err(Error::InvalidParams(
            "final-velocity exponent needs gamma_prime > 0".into(),
        ));
    }
    if n_emitters == 0 {
        return Err(Error::InvalidParams("n_emitters must be >= 1".into()));
    }
    let integrand = |n_g: f64| {
        let xi = xi_cavity_at_population(model, n_g, n_emitters);
        let loss = -population::ng_rate_collective(model, n_g, n_emitters);
        xi / loss
    };
    let q = quadrature::integrate(integrand, 0.0, 1.0, EXPONENT_QUADRATURE_TOL, 4096)?;

    let gamma = model.gamma_tot();
    let d2 = p.delta_a * p.delta_a;
    let closed_form = xi_free_space(model) / mu_free_space(model)
        * (1.0 + model.cooperativity() * d2 / (4.0 * (d2 + gamma * gamma)));
    Ok(ExponentIntegral {
        quadrature: q.value,
        quadrature_error: q.error,
        closed_form,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Params, Scenario};

    fn fig2() -> Model {
        let p = Params {
            omega: 1.0,
            delta_a: 10.0,
            omega_rec: 0.5,
            ..Params::default()
        };
        Model::new(p, Scenario::FreeSpaceClosed).unwrap()
    }

    fn cavity(scenario: Scenario, g: f64, kappa: f64, delta: f64, eta: f64) -> Model {
        let p = Params {
            g,
            kappa,
            delta_a: delta,
            delta_c: delta,
            eta,
            omega_rec: 1.0,
            ..Params::default()
        };
        Model::new(p, scenario).unwrap()
    }

    fn fig5(c: f64, delta: f64) -> Model {
        let kappa = 1000.0;
        let g = (c * kappa).sqrt();
        let omega_sq = 0.01 * (delta * delta + 1.0);
        let p = Params {
            gamma: 0.85,
            gamma_prime: 0.15,
            g,
            kappa,
            delta_a: delta,
            delta_c: delta,
            eta: (omega_sq * (kappa * kappa + delta * delta) / (g * g)).sqrt(),
            omega_rec: 0.04,
            ..Params::default()
        };
        Model::new(p, Scenario::CavityNonClosed).unwrap()
    }

    #[test]
    fn fig2_friction_rate() {
        // 4·1·0.5·10·1 / 101² = 20/10201
        let xi = xi_free_space(&fig2());
        assert!((xi - 20.0 / 10201.0).abs() < 1e-18);
        assert!((xi - 1.9606e-3).abs() < 1e-7);
    }

    #[test]
    fn friction_is_odd_in_detuning() {
        let m = fig2();
        let mut p = *m.params();
        p.delta_a = -p.delta_a;
        let flipped = m.with_params(p).unwrap();
        assert_eq!(xi_free_space(&flipped), -xi_free_space(&m));

        p.omega = 0.0;
        assert_eq!(xi_free_space(&m.with_params(p).unwrap()), 0.0);
    }

    #[test]
    fn zero_cooperativity_reduces_to_free_space() {
        let m = cavity(Scenario::CavityClosed, 0.0, 10.0, 3.0, 2.0);
        // g = 0 kills the drive too; compare against a twin with the same |Ω|.
        assert_eq!(xi_cavity_single(&m), xi_free_space(&m));
        let m = fig2();
        assert_eq!(xi_cavity_at_population(&m, 1.0, 1), xi_free_space(&m));
    }

    #[test]
    fn fig3a_enhancement_close_to_one_plus_half_c() {
        let m = cavity(Scenario::CavityClosed, 155.0, 1000.0, 200.0, 132.0);
        let ratio = xi_cavity_single(&m) / xi_free_space(&m);
        assert!((ratio - 13.0).abs() / 13.0 < 0.01, "ratio {ratio}");
    }

    #[test]
    fn fig3b_cavity_slower() {
        let m = cavity(Scenario::CavityClosed, 5f64.sqrt(), 10.0, 1.0, 0.6);
        assert!(xi_cavity_single(&m) < xi_free_space(&m));
    }

    #[test]
    fn many_emitters_one_is_single() {
        let m = cavity(Scenario::CavityClosedMany, 155.0, 1000.0, 200.0, 132.0);
        assert_eq!(xi_cavity_many(&m), xi_cavity_single(&m));
    }

    #[test]
    fn collective_cooperativity_slows_cooling() {
        let base = cavity(Scenario::CavityClosedMany, 7.5, 375.0, 10.0, 50.0);
        let mut last = f64::INFINITY;
        for n in [1, 2, 5, 10, 50, 400] {
            let mut p = *base.params();
            p.n_emitters = n;
            let xi = xi_cavity_many(&base.with_params(p).unwrap());
            assert!(xi < last);
            last = xi;
        }
        // C N fixed while N grows: g² ∝ 1/N.
        let mut last = f64::INFINITY;
        for n in [1usize, 4, 16, 64, 256] {
            let mut p = *base.params();
            p.n_emitters = n;
            p.g = (60.0 * 375.0 / n as f64).sqrt();
            let xi = xi_cavity_many(&base.with_params(p).unwrap());
            assert!(xi < last, "N = {n}");
            last = xi;
        }
    }

    #[test]
    fn fig7_many_slower_than_free_space() {
        let p = Params {
            gamma: 0.7,
            gamma_prime: 0.3,
            g: 7.5,
            kappa: 375.0,
            delta_a: 10.0,
            delta_c: 10.0,
            eta: 50.0,
            omega_rec: 0.5,
            n_emitters: 400,
            ..Params::default()
        };
        let m = Model::new(p, Scenario::CavityNonClosedMany).unwrap();
        assert!(xi_cavity_many(&m) < xi_free_space(&m));
    }

    #[test]
    fn population_loss_rate() {
        let p = Params {
            gamma: 0.85,
            gamma_prime: 0.15,
            g: 155.0,
            kappa: 1000.0,
            delta_a: 200.0,
            delta_c: 200.0,
            eta: 132.0,
            omega_rec: 2.5,
            ..Params::default()
        };
        let m = Model::new(p, Scenario::CavityNonClosed).unwrap();
        let oracle = 0.15 * m.drive_sq() / (200.0f64.powi(2) + 1.0);
        assert_eq!(mu_free_space(&m), oracle);
        assert!((mu_free_space(&m) - 1.51e-3).abs() < 5e-6);

        let mut q = *m.params();
        q.eta *= 2.0;
        let doubled = m.with_params(q).unwrap();
        assert!((mu_free_space(&doubled) / mu_free_space(&m) - 4.0).abs() < 1e-12);

        assert_eq!(mu_free_space(&fig2()), 0.0);
    }

    #[test]
    fn velocity_curves_limits() {
        let m = fig5(0.5, 1.0);
        let v0 = 0.2;
        assert_eq!(v_of_t_nonclosed_fs(&m, v0, 0.0), v0);
        assert_eq!(v_of_t_nonclosed_cavity_regime_i(&m, v0, 0.0), v0);
        let late = v_of_t_nonclosed_fs(&m, v0, 1e7);
        assert!((late - final_velocity_fs(&m, v0)).abs() < 1e-14);

        let xi = xi_free_space(&m);
        let mu = mu_free_space(&m);
        let c = m.cooperativity();
        let late = v_of_t_nonclosed_cavity_regime_i(&m, v0, 1e7);
        assert!((late - v0 * (-(xi / mu) * (1.0 + c / 4.0)).exp()).abs() < 1e-14);

        // monotone for red detuning
        let mut last = v0;
        for i in 1..200 {
            let v = v_of_t_nonclosed_cavity_regime_i(&m, v0, i as f64 * 50.0);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn cavity_curve_without_cooperativity_is_free_space() {
        let p = Params {
            gamma: 0.85,
            gamma_prime: 0.15,
            delta_a: 2.0,
            omega: 0.3,
            omega_rec: 0.04,
            ..Params::default()
        };
        let m = Model::new(p, Scenario::FreeSpaceNonClosed).unwrap();
        for t in [0.0, 10.0, 1e3, 1e4] {
            assert_eq!(
                v_of_t_nonclosed_cavity_regime_i(&m, 1.0, t),
                v_of_t_nonclosed_fs(&m, 1.0, t)
            );
        }
        assert_eq!(final_velocity_ratio_cavity(&m), 1.0);
    }

    #[test]
    fn closed_system_decays_exponentially() {
        let m = fig2();
        let xi = xi_free_space(&m);
        assert!((v_of_t_nonclosed_fs(&m, 3.0, 100.0) - 3.0 * (-xi * 100.0).exp()).abs() < 1e-15);
        assert_eq!(final_velocity_fs(&m, 3.0), 0.0);
        assert!(is_degenerate_final_velocity(&m));
    }

    #[test]
    fn fig5_final_velocity_exponent() {
        let m = fig5(0.1, 1.0);
        // 4·0.04·1·1 / (0.15·2) = 0.5333…
        let v = final_velocity_fs(&m, 1.0);
        assert!((v.ln() + 0.16 / 0.3).abs() < 1e-12);
        assert!((v - 0.5866).abs() < 1e-4);
        assert!((xi_free_space(&m) / mu_free_space(&m) - 0.16 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn optimal_detuning_is_linewidth() {
        let best = |delta: f64| final_velocity_fs(&fig5(0.1, delta), 1.0);
        let at_opt = best(1.0);
        for d in [0.5, 0.8, 0.95, 0.999, 1.001, 1.05, 1.5, 3.0] {
            assert!(best(d) > at_opt, "Δ = {d}");
        }
    }

    #[test]
    fn recoil_free_limit() {
        let mut p = *fig5(0.1, 1.0).params();
        p.omega_rec = 1e-300;
        let m = Model::new(p, Scenario::CavityNonClosed).unwrap();
        assert_eq!(final_velocity_fs(&m, 0.7), 0.7);
    }

    #[test]
    fn ratio_monotone_in_cooperativity() {
        let mut last = 1.0;
        for c in [0.0, 0.1, 0.5, 1.0, 5.0, 24.0] {
            let r = if c == 0.0 {
                1.0
            } else {
                final_velocity_ratio_cavity(&fig5(c, 1.0))
            };
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn exponent_integral_small_c_limit() {
        let m = fig5(1e-9, 1.0);
        let e = final_velocity_exponent_integral(&m, 1).unwrap();
        let base = xi_free_space(&m) / mu_free_space(&m);
        assert!((e.quadrature - base).abs() < 1e-8);
        assert!((e.closed_form - base).abs() < 1e-8);
    }

    #[test]
    fn exponent_integral_independent_of_emitter_count() {
        for c in [0.05, 0.15, 1.0] {
            let m = fig5(c, 1.0);
            let one = final_velocity_exponent_integral(&m, 1).unwrap();
            let many = final_velocity_exponent_integral(&m, 400).unwrap();
            assert!((one.quadrature - many.quadrature).abs() < 1e-10);
            assert!(one.quadrature_error < EXPONENT_QUADRATURE_TOL);
        }
    }

    #[test]
    fn exponent_integral_requires_loss_channel() {
        let m = cavity(Scenario::CavityClosed, 155.0, 1000.0, 200.0, 132.0);
        assert!(final_velocity_exponent_integral(&m, 1).is_err());
    }

    #[test]
    fn regime_flags() {
        let m = cavity(Scenario::CavityClosed, 155.0, 1000.0, 200.0, 132.0);
        let r = predict(&m, Some(30.0));
        assert!(r.regime.regime_i_ok && r.regime.small_doppler_ok);
        let m = cavity(Scenario::CavityClosed, 155.0, 1000.0, 1.0, 0.9);
        let r = predict(&m, Some(0.9));
        assert!(!r.regime.regime_i_ok && !r.regime.small_doppler_ok);
        assert!(r.xi >= 0.0 && r.mu == 0.0);
    }
}
