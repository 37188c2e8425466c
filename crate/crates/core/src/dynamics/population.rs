//! Semi-analytic ground-state population equations.
//!
//! With the excited state eliminated (ṅ_e = 0) the ground-state population
//! obeys a scalar ODE ṅ_g = f(n_g). The two-sideband forms follow from the
//! n_g-scaled Floquet solution; the infinite-order form sums all harmonics
//! through the Toeplitz root λ(n_g).

use num_complex::Complex64;

use super::integrator::{integrate, Controls, Step};
use super::rhs::OdeSystem;
use crate::error::Result;
use crate::floquet;
use crate::model::Model;

/// −γ′|Ω|² n_g / [γ_tot²(1 + (2N+1)C n_g/4)² + Δ_a²] with N emitters in the
/// mode. C is zero in free space, giving −μ_fs n_g.
pub fn ng_rate_collective(model: &Model, n_g: f64, n_emitters: usize) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let width = gamma * (1.0 + (2 * n_emitters + 1) as f64 * model.cooperativity() * n_g / 4.0);
    -p.gamma_prime * model.drive_sq() * n_g / (width * width + p.delta_a * p.delta_a)
}

pub fn ng_ode_single(model: &Model, n_g: f64) -> f64 {
    ng_rate_collective(model, n_g, 1)
}

pub fn ng_ode_many(model: &Model, n_g: f64) -> f64 {
    ng_rate_collective(model, n_g, model.n_emitters())
}

/// Infinite-order population loss
/// (γ′/γ_tot)(2κ|Ω|²/g²)[|λ|²(4 + λ + λ*) + λ + λ*] / (|λ − 1|²(1 − |λ|²)),
/// with λ the in-disk root of c n_g λ² + (γ_tot + iΔ_a + 2c n_g)λ + c n_g = 0.
///
/// The expression is negative as it stands (λ has negative real part for
/// the physical root). n_g = 0 returns the analytic limit 0; without
/// coupling the free-space rate −μ_fs n_g is returned.
pub fn ng_ode_infinite_order(model: &Model, n_g: f64) -> Result<f64> {
    let p = model.params();
    let c = floquet::coupling(model) * n_g;
    if n_g <= 0.0 {
        return Ok(0.0);
    }
    if c == 0.0 {
        return Ok(ng_rate_collective(model, n_g, 1));
    }
    let a = Complex64::new(model.gamma_tot(), p.delta_a) + 2.0 * c;
    let lambda = floquet::toeplitz_root(a, c)?;
    let l2 = lambda.norm_sqr();
    let two_re = 2.0 * lambda.re;
    let numer = l2 * (4.0 + two_re) + two_re;
    let denom = (lambda - 1.0).norm_sqr() * (1.0 - l2);
    let rate = p.gamma_prime / model.gamma_tot() * 2.0 * p.kappa * model.drive_sq() / (p.g * p.g) * numer
        / denom;
    debug_assert!(rate <= 0.0, "population must not grow: {rate}");
    Ok(rate)
}

/// Exact kv = 0 steady-state loss −γ′|Ω|² n_g ⟨2cos²θ / |γ_tot + iΔ_a +
/// (g²n_g/κ)cos²θ|²⟩_θ by quadrature; an independent check of
/// [`ng_ode_infinite_order`].
pub fn ng_rate_pointwise(model: &Model, n_g: f64) -> Result<f64> {
    let p = model.params();
    let z = Complex64::new(model.gamma_tot(), p.delta_a);
    let shift = if model.scenario().is_cavity() {
        p.g * p.g * n_g / p.kappa
    } else {
        0.0
    };
    let f = |theta: f64| {
        let c2 = theta.cos().powi(2);
        2.0 * c2 / (z + shift * c2).norm_sqr()
    };
    // The integrand has period π and is even, so average over [0, π/2].
    let half_pi = std::f64::consts::FRAC_PI_2;
    let scale = (z.norm_sqr()).recip();
    let q = crate::quadrature::integrate(f, 0.0, half_pi, 1e-14 * scale, 4096)?;
    Ok(-p.gamma_prime * model.drive_sq() * n_g * q.value / half_pi)
}

/// Which scalar population equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PopulationModel {
    Single,
    Many,
    InfiniteOrder,
}

struct Scalar<'a> {
    model: &'a Model,
    kind: PopulationModel,
}

impl OdeSystem for Scalar<'_> {
    fn dim(&self) -> usize {
        1
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        let n = y[0].max(0.0);
        dy[0] = match self.kind {
            PopulationModel::Single => ng_ode_single(self.model, n),
            PopulationModel::Many => ng_ode_many(self.model, n),
            PopulationModel::InfiniteOrder => {
                ng_ode_infinite_order(self.model, n).expect("root exists for g > 0")
            }
        };
    }

    fn component_name(&self, _: usize) -> String {
        "ng".into()
    }
}

/// n_g(t) from n_g(0) = 1 sampled at `times` (ascending, starting ≥ 0).
pub fn integrate_population(model: &Model, kind: PopulationModel, times: &[f64]) -> Result<Vec<f64>> {
    let Some(&t_end) = times.last() else {
        return Ok(Vec::new());
    };
    if kind == PopulationModel::InfiniteOrder {
        // Surface a missing root before entering the integrator.
        ng_ode_infinite_order(model, 1.0)?;
    }
    let sys = Scalar { model, kind };
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    while next < times.len() && times[next] <= 0.0 {
        out.push(1.0);
        next += 1;
    }
    if next == times.len() {
        return Ok(out);
    }
    let mut controls = Controls::new(t_end);
    controls.rel_tol = 1e-10;
    controls.abs_tol = 1e-13;
    let mut obs = |s: &Step<'_>| {
        while next < times.len() && times[next] <= s.t1 {
            out.push(s.eval_component(times[next], 0));
            next += 1;
        }
        std::ops::ControlFlow::Continue(())
    };
    integrate(&sys, 0.0, &[1.0], &controls, &mut obs)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytics;
    use crate::model::{Params, Scenario};

    fn cavity(g: f64, delta: f64, eta: f64) -> Model {
        let p = Params {
            gamma: 0.85,
            gamma_prime: 0.15,
            g,
            kappa: 1000.0,
            delta_a: delta,
            delta_c: delta,
            eta,
            omega_rec: 0.04,
            ..Params::default()
        };
        Model::new(p, Scenario::CavityNonClosed).unwrap()
    }

    #[test]
    fn zero_cooperativity_is_free_space_loss() {
        let m = cavity(155.0, 1.0, 0.9).free_space_twin();
        let mu = analytics::mu_free_space(&m);
        for n in [1.0, 0.3, 0.0] {
            assert_eq!(ng_ode_single(&m, n), -mu * n);
        }
    }

    #[test]
    fn single_is_many_with_one() {
        let m = cavity(155.0, 1.0, 0.9);
        assert_eq!(ng_ode_single(&m, 0.4), ng_ode_many(&m, 0.4));
    }

    #[test]
    fn many_emitter_rate_falls_like_inverse_square() {
        let m = cavity(7.5, 10.0, 50.0);
        // Asymptotic once the collective width dominates Δ_a.
        let r = |n: usize| ng_rate_collective(&m, 0.5, n);
        let ratio = r(100_000) / r(200_000);
        assert!((ratio - 4.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn infinite_order_matches_pointwise_oracle() {
        for (g, delta, eta) in [(155.0, 1.0, 0.9), (155.0, 200.0, 132.0), (7.5, 10.0, 50.0)] {
            let m = cavity(g, delta, eta);
            for n in [1.0, 0.5, 0.1, 1e-3] {
                let a = ng_ode_infinite_order(&m, n).unwrap();
                let b = ng_rate_pointwise(&m, n).unwrap();
                assert!(a < 0.0);
                assert!((a / b - 1.0).abs() < 1e-9, "g={g} Δ={delta} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn infinite_order_small_cooperativity() {
        // C = 1e-3
        let g = (1e-3f64 * 1000.0).sqrt();
        let m = cavity(g, 1.0, 1.0);
        for n in [1.0, 0.5, 0.1] {
            let a = ng_ode_infinite_order(&m, n).unwrap();
            let b = ng_ode_single(&m, n);
            assert!((a / b - 1.0).abs() < 1e-4, "{a} vs {b}");
        }
    }

    #[test]
    fn infinite_order_vanishes_at_empty_ground_state() {
        let m = cavity(155.0, 1.0, 0.9);
        assert_eq!(ng_ode_infinite_order(&m, 0.0).unwrap(), 0.0);
        let tiny = ng_ode_infinite_order(&m, 1e-12).unwrap();
        assert!(tiny < 0.0 && tiny > -1e-12);
    }

    #[test]
    fn population_curve_free_space_is_exponential() {
        let m = cavity(155.0, 200.0, 132.0).free_space_twin();
        let mu = analytics::mu_free_space(&m);
        let times: Vec<f64> = (0..=50).map(|i| i as f64 * 60.0).collect();
        let n = integrate_population(&m, PopulationModel::Single, &times).unwrap();
        for (t, n) in times.iter().zip(&n) {
            assert!((n - (-mu * t).exp()).abs() < 1e-8);
        }
    }

    #[test]
    fn cavity_population_decays_more_slowly() {
        let m = cavity(155.0, 1.0, 0.9);
        let times: Vec<f64> = (0..=20).map(|i| i as f64 * 500.0).collect();
        let fs = integrate_population(&m.free_space_twin(), PopulationModel::Single, &times).unwrap();
        let single = integrate_population(&m, PopulationModel::Single, &times).unwrap();
        let inf = integrate_population(&m, PopulationModel::InfiniteOrder, &times).unwrap();
        for i in 1..times.len() {
            assert!(single[i] > fs[i] && inf[i] > fs[i]);
        }
    }
}
