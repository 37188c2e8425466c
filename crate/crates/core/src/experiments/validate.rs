//! Oracle suite: structured solvers against dense solves, closed forms
//! against quadrature, limit reductions and conservation laws.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::figures;
use super::output::{Cell, Table};
use super::Artifacts;
use crate::analytics;
use crate::config::{initial_state, InitialConditions, ThetaInit};
use crate::dynamics::{self, population, Controls, Observable, Recording};
use crate::error::Result;
use crate::floquet::{self, oracle};
use crate::model::{Model, Params, Scenario};

pub const LAMBDA_RESIDUAL_TOL: f64 = 1e-13;
pub const DENSE_TOL: f64 = 1e-10;
pub const LIMIT_ULPS: f64 = 4.0;
pub const PARITY_DRAWS: usize = 10_000;
pub const N_INDEPENDENCE_TOL: f64 = 1e-10;
pub const DRIFT_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    /// Passes when `measured ≤ threshold` (NaN fails).
    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold,
            passed: measured <= threshold,
        }
    }

    fn within(name: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            threshold: hi,
            passed: measured >= lo && measured <= hi,
        }
    }

    fn failed(name: impl Into<String>, error: &crate::Error) -> Self {
        Check {
            name: format!("{} ({error})", name.into()),
            measured: f64::NAN,
            threshold: f64::NAN,
            passed: false,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, check: Result<Check>, name: &str) {
        self.checks.push(check.unwrap_or_else(|e| Check::failed(name, &e)));
    }

    pub fn to_artifacts(&self) -> Artifacts {
        let mut t = Table::new("validate.csv", &["check", "measured", "threshold", "passed"]);
        for c in &self.checks {
            t.push(vec![
                c.name.clone().into(),
                c.measured.into(),
                c.threshold.into(),
                Cell::Text(if c.passed { "true" } else { "false" }.into()),
            ]);
        }
        let mut out = Artifacts::new("validate", "validate");
        out.set("checks", self.checks.len() as f64);
        out.set("failures", self.failures().count() as f64);
        out.tables.push(t);
        out
    }
}

/// |cλ² + aλ + c| relative to the size of its terms.
pub fn lambda_root_residual(a: Complex64, c: f64, lambda: Complex64) -> f64 {
    let r = c * lambda * lambda + a * lambda + c;
    r.norm() / (c * lambda.norm_sqr() + a.norm() * lambda.norm() + c)
}

/// Spacing of doubles at |x|.
fn ulp(x: f64) -> f64 {
    let x = x.abs();
    if x == 0.0 {
        return f64::from_bits(1);
    }
    f64::from_bits(x.to_bits() + 1) - x
}

/// |a − b| in units of the ulp of the larger magnitude.
pub fn ulps(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if a == b {
        return 0.0;
    }
    (a - b).norm() / ulp(scale)
}

pub fn ulps_real(a: f64, b: f64) -> f64 {
    ulps(Complex64::new(a, 0.0), Complex64::new(b, 0.0))
}

/// Resonant cavity models covering regime i, regime ii and strong coupling.
pub fn oracle_models() -> Vec<(&'static str, Model)> {
    let mk = |p: Params| Model::new(p, Scenario::CavityNonClosed).expect("valid preset");
    let strong = Params {
        gamma: 1.0,
        gamma_prime: 0.0,
        g: 20.0,
        kappa: 4.0,
        delta_a: 0.5,
        delta_c: 0.5,
        eta: 1.0,
        omega_rec: 0.1,
        ..Params::default()
    };
    vec![
        ("fig3a", Model::new(figures::fig3a_params(), Scenario::CavityClosed).expect("valid preset")),
        ("fig3b", Model::new(figures::fig3b_params(), Scenario::CavityClosed).expect("valid preset")),
        ("fig4cd", mk(figures::fig4cd_params())),
        ("fig5_c1", mk(figures::fig5_params(1.0))),
        ("fig7_single", mk(Params { n_emitters: 1, ..figures::fig7_params() })),
        ("strong", Model::new(strong, Scenario::CavityClosed).expect("valid preset")),
    ]
}

fn lambda_checks(report: &mut ValidationReport) {
    for (name, m) in oracle_models() {
        let c = floquet::coupling(&m);
        let a = Complex64::new(m.gamma_tot(), m.params().delta_a) + 2.0 * c;
        let check = floquet::toeplitz_lambda(&m).map(|l| {
            Check::at_most(format!("lambda_root_residual[{name}]"), lambda_root_residual(a, c, l), LAMBDA_RESIDUAL_TOL)
        });
        report.push(check, &format!("lambda_root_residual[{name}]"));
        let check = floquet::toeplitz_lambda(&m).map(|l| Check::at_most(format!("lambda_in_disk[{name}]"), l.norm(), 1.0 - f64::EPSILON));
        report.push(check, &format!("lambda_in_disk[{name}]"));
    }
}

fn dense_checks(report: &mut ValidationReport) {
    for (name, m) in oracle_models() {
        let label = format!("toeplitz_vs_dense[{name}]");
        let check = floquet::floquet_cavity_infinite(&m, None)
            .and_then(|s| oracle::infinite_vs_dense(&m, &s))
            .map(|d| Check::at_most(label.clone(), d, DENSE_TOL));
        report.push(check, &label);

        let mut worst: f64 = 0.0;
        for kv in [0.0, 0.3, -1.7, 12.0] {
            match floquet::floquet_cavity_2x2(&m, kv) {
                Ok(s) => worst = worst.max(oracle::two_by_two_residual(&m, kv, &s)),
                Err(_) => worst = f64::NAN,
            }
        }
        report.checks.push(Check::at_most(format!("two_by_two_residual[{name}]"), worst, 1e-13));
    }

    let m = oracle_models()[0].1;
    let mut rng = ChaCha8Rng::seed_from_u64(64);
    for n in [1usize, 2, 8, 64] {
        let label = format!("sherman_morrison_vs_dense[N={n}]");
        let kv: Vec<f64> = (0..n).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let check = (|| {
            let sm = floquet::floquet_many_sherman_morrison(&m, &kv)?;
            let dense = oracle::dense_many(&m, &kv)?;
            let scale = dense.iter().map(|(a, b)| a.norm().max(b.norm())).fold(0.0, f64::max);
            let worst = sm
                .iter()
                .zip(&dense)
                .map(|(s, (dm, dp))| (s.b_minus - dm).norm().max((s.b_plus - dp).norm()))
                .fold(0.0, f64::max);
            Ok(Check::at_most(label.clone(), worst / scale, DENSE_TOL))
        })();
        report.push(check, &label);
    }
}

fn limit_checks(report: &mut ValidationReport) {
    let fig5 = Model::new(figures::fig5_params(1.0), Scenario::CavityNonClosed).expect("valid preset");
    let fs = fig5.free_space_twin();

    // C → 0: the cavity formulas evaluated without coupling.
    let mut worst: f64 = 0.0;
    worst = worst.max(ulps_real(analytics::xi_cavity_at_population(&fs, 1.0, 1), analytics::xi_free_space(&fs)));
    for n in [1.0, 0.37, 1e-3] {
        worst = worst.max(ulps_real(
            population::ng_ode_single(&fs, n),
            -analytics::mu_free_space(&fs) * n,
        ));
    }
    report.checks.push(Check::at_most("limit_c_to_zero_ulps", worst, LIMIT_ULPS));

    // N = 1: many-emitter forms against single-emitter forms.
    let mut worst: f64 = 0.0;
    let single = oracle_models();
    for (_, m) in &single {
        worst = worst.max(ulps_real(analytics::xi_cavity_many(m), analytics::xi_cavity_single(m)));
        worst = worst.max(ulps_real(population::ng_ode_many(m, 0.4), population::ng_ode_single(m, 0.4)));
        for kv in [0.0, 0.7, -3.0] {
            let (Ok(sm), Ok(two)) = (floquet::floquet_many_sherman_morrison(m, &[kv]), floquet::floquet_cavity_2x2(m, kv)) else {
                worst = f64::NAN;
                continue;
            };
            worst = worst.max(ulps(sm[0].b_minus, two.b_minus));
            worst = worst.max(ulps(sm[0].b_plus, two.b_plus));
            worst = worst.max(ulps(sm[0].b0, two.b0));
            worst = worst.max(ulps(sm[0].b1, two.b1));
        }
    }
    report.checks.push(Check::at_most("limit_single_emitter_ulps", worst, LIMIT_ULPS));

    // g → 0 at fixed |Ω|: coupling corrections fall below one ulp.
    let mut worst: f64 = 0.0;
    for (_, m) in &single {
        let p = *m.params();
        let g = 1e-9;
        let weak = Params {
            g,
            eta: p.eta * p.g / g,
            ..p
        };
        let Ok(weak) = m.with_params(weak) else {
            worst = f64::NAN;
            continue;
        };
        let twin = weak.free_space_twin();
        let phase = weak.drive() / weak.drive().norm();
        for kv in [0.0, 0.7, -3.0] {
            let Ok(cav) = floquet::floquet_cavity_2x2(&weak, kv) else {
                worst = f64::NAN;
                continue;
            };
            let free = floquet::floquet_free_space(&twin, kv);
            worst = worst.max(ulps(cav.b_minus / phase, free.b_minus));
            worst = worst.max(ulps(cav.b_plus / phase, free.b_plus));
        }
        worst = worst.max(ulps_real(analytics::xi_cavity_single(&weak), analytics::xi_free_space(&twin)));
    }
    report.checks.push(Check::at_most("limit_weak_coupling_ulps", worst, LIMIT_ULPS));
}

/// Largest relative mismatch of b₊(kv) against b₋(−kv) over random draws.
pub fn parity_defect(draws: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let gamma = rng.gen_range(0.1..2.0);
        let kappa = rng.gen_range(1.0..2000.0);
        let delta = rng.gen_range(-300.0..300.0);
        let p = Params {
            gamma,
            gamma_prime: 0.0,
            g: rng.gen_range(0.0..200.0),
            kappa,
            delta_a: delta,
            delta_c: delta,
            eta: rng.gen_range(0.0..200.0),
            omega_rec: 1.0,
            ..Params::default()
        };
        let kv = rng.gen_range(-50.0..50.0);
        let Ok(m) = Model::new(p, Scenario::CavityClosed) else {
            return f64::NAN;
        };
        let (Ok(a), Ok(b)) = (floquet::floquet_cavity_2x2(&m, kv), floquet::floquet_cavity_2x2(&m, -kv)) else {
            return f64::NAN;
        };
        worst = worst.max(ulps(a.b_plus, b.b_minus)).max(ulps(a.b_minus, b.b_plus));
        let twin = m.free_space_twin();
        let (a, b) = (floquet::floquet_free_space(&twin, kv), floquet::floquet_free_space(&twin, -kv));
        worst = worst.max(ulps(a.b_plus, b.b_minus)).max(ulps(a.b_minus, b.b_plus));
        let kvs = [kv, rng.gen_range(-50.0..50.0)];
        let neg = [-kvs[0], -kvs[1]];
        let (Ok(a), Ok(b)) = (
            floquet::floquet_many_sherman_morrison(&m, &kvs),
            floquet::floquet_many_sherman_morrison(&m, &neg),
        ) else {
            return f64::NAN;
        };
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max(ulps(x.b_plus, y.b_minus)).max(ulps(x.b_minus, y.b_plus));
        }
    }
    worst
}

/// Relative gap between the exponent quadrature and its leading closed
/// form at cooperativity `c` (fig5 parameters).
pub fn exponent_gap(c: f64) -> Result<f64> {
    let m = Model::new(figures::fig5_params(c), Scenario::CavityNonClosed)?;
    let e = analytics::final_velocity_exponent_integral(&m, 1)?;
    Ok((e.quadrature - e.closed_form).abs() / e.closed_form)
}

fn quadrature_checks(report: &mut ValidationReport) {
    let ratio = (|| Ok(exponent_gap(0.2)? / exponent_gap(0.1)?))();
    report.push(
        ratio.map(|r| Check::within("exponent_gap_c_halving_ratio", r, 3.5, 4.5)),
        "exponent_gap_c_halving_ratio",
    );

    let m = Model::new(figures::fig7_params(), Scenario::CavityNonClosedMany).expect("valid preset");
    let spread = (|| {
        let one = analytics::final_velocity_exponent_integral(&m, 1)?.quadrature;
        let mut worst: f64 = 0.0;
        for n in [2, 10, 400, 10_000] {
            let q = analytics::final_velocity_exponent_integral(&m, n)?.quadrature;
            worst = worst.max((q - one).abs() / one.abs());
        }
        Ok(worst)
    })();
    report.push(
        spread.map(|s| Check::at_most("exponent_n_independence", s, N_INDEPENDENCE_TOL)),
        "exponent_n_independence",
    );

    let pointwise = (|| {
        let mut worst: f64 = 0.0;
        for (_, m) in oracle_models() {
            if m.scenario().is_closed() {
                continue;
            }
            for n in [1.0, 0.3, 1e-2] {
                let a = population::ng_ode_infinite_order(&m, n)?;
                let b = population::ng_rate_pointwise(&m, n)?;
                worst = worst.max((a / b - 1.0).abs());
            }
        }
        Ok(worst)
    })();
    report.push(
        pointwise.map(|w| Check::at_most("infinite_order_loss_vs_pointwise", w, 1e-9)),
        "infinite_order_loss_vs_pointwise",
    );
}

fn conservation_checks(report: &mut ValidationReport) {
    let cases: Vec<(&str, Model, usize, f64)> = vec![
        ("fig4cd_cavity", Model::new(figures::fig4cd_params(), Scenario::CavityNonClosed).expect("valid"), 1, 200.0),
        (
            "fig7_n16",
            Model::new(Params { n_emitters: 16, ..figures::fig7_params() }, Scenario::CavityNonClosedMany).expect("valid"),
            16,
            100.0,
        ),
    ];
    for (name, m, n, t_end) in cases {
        let label = format!("population_drift[{name}]");
        let init = InitialConditions {
            kv_mean: 1.5,
            kv_std: 0.1,
            theta: if n == 1 { ThetaInit::Fixed(0.0) } else { ThetaInit::Uniform },
            seed: 1,
        };
        let mut controls = Controls::new(t_end);
        controls.max_step = crate::config::default_max_step(&m);
        let rec = Recording {
            stride: t_end,
            observables: vec![Observable::MeanW],
        };
        let check = dynamics::simulate(&m, &initial_state(n, &init), &controls, &rec, None).map(|tr| {
            Check::at_most(label.clone(), tr.max_population_drift.unwrap_or(f64::NAN), DRIFT_FACTOR * controls.abs_tol)
        });
        report.push(check, &label);
    }
}

/// Runs every oracle check.
pub fn run_validate() -> ValidationReport {
    let mut report = ValidationReport::default();
    lambda_checks(&mut report);
    dense_checks(&mut report);
    limit_checks(&mut report);
    report.checks.push(Check::at_most("velocity_parity_ulps", parity_defect(PARITY_DRAWS, 17), LIMIT_ULPS));
    quadrature_checks(&mut report);
    conservation_checks(&mut report);
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_check_detects_perturbed_lambda() {
        for (_, m) in oracle_models() {
            let c = floquet::coupling(&m);
            let a = Complex64::new(m.gamma_tot(), m.params().delta_a) + 2.0 * c;
            let l = floquet::toeplitz_lambda(&m).unwrap();
            assert!(lambda_root_residual(a, c, l) < LAMBDA_RESIDUAL_TOL);
            assert!(lambda_root_residual(a, c, l * (1.0 + 1e-6)) > LAMBDA_RESIDUAL_TOL);
        }
    }

    #[test]
    fn ulp_distance() {
        assert_eq!(ulps_real(1.0, 1.0), 0.0);
        assert_eq!(ulps_real(1.0, 1.0 + f64::EPSILON), 1.0);
        let x = Complex64::new(3.0, 4.0);
        assert!(ulps(x, x * (1.0 + 4.0 * f64::EPSILON)) <= 20.0 + 1e-9);
    }

    #[test]
    fn exponent_gap_is_quadratic() {
        let r = exponent_gap(0.2).unwrap() / exponent_gap(0.1).unwrap();
        assert!((r - 4.0).abs() < 0.5, "{r}");
    }

    #[test]
    fn full_suite_passes() {
        let report = run_validate();
        for c in &report.checks {
            assert!(c.passed, "{} measured {} threshold {}", c.name, c.measured, c.threshold);
        }
        assert!(report.checks.len() > 20);
    }
}
