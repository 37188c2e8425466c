//! Built-in figure reproductions. Parameter sets are in units of γ_tot and
//! are echoed to every manifest.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::output::{Cell, Table};
use super::sweep::{self, Axis, SweepSpec};
use super::{fit_trajectory, fit_window, linf_relative, run, trajectory_table, Artifacts, FINAL_NG_THRESHOLD};
use crate::analytics;
use crate::config::{InitialConditions, IntegratorSettings, RunConfig, ThetaInit};
use crate::dynamics::{first_zero_crossing, integrate_population, FitReport, Observable, PopulationModel, Recording, Trajectory};
use crate::error::{Error, Result};
use crate::model::{Model, Params, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FigureName {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4ab,
    Fig4cd,
    Fig5,
    Fig7,
}

impl FigureName {
    pub const ALL: [FigureName; 7] = [
        FigureName::Fig2,
        FigureName::Fig3a,
        FigureName::Fig3b,
        FigureName::Fig4ab,
        FigureName::Fig4cd,
        FigureName::Fig5,
        FigureName::Fig7,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FigureName::Fig2 => "fig2",
            FigureName::Fig3a => "fig3a",
            FigureName::Fig3b => "fig3b",
            FigureName::Fig4ab => "fig4ab",
            FigureName::Fig4cd => "fig4cd",
            FigureName::Fig5 => "fig5",
            FigureName::Fig7 => "fig7",
        }
    }
}

impl fmt::Display for FigureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FigureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FigureName::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFigure(s.to_string()))
    }
}

pub fn run_figure(name: FigureName) -> Result<Artifacts> {
    match name {
        FigureName::Fig2 => fig2(),
        FigureName::Fig3a => closed_pair("fig3a", fig3a_params(), 30.0),
        FigureName::Fig3b => closed_pair("fig3b", fig3b_params(), 0.2),
        FigureName::Fig4ab => nonclosed_pair("fig4ab", fig4ab_params(), 30.0),
        FigureName::Fig4cd => nonclosed_pair("fig4cd", fig4cd_params(), 0.2),
        FigureName::Fig5 => fig5(),
        FigureName::Fig7 => fig7(),
    }
}

pub fn fig2_params() -> Params {
    Params {
        omega: 1.0,
        delta_a: 10.0,
        omega_rec: 0.5,
        ..Params::default()
    }
}

pub const FIG2_KV0: f64 = 18.0;
pub const FIG2_T_END: f64 = 4000.0;

fn cavity(gamma: f64, g: f64, kappa: f64, delta: f64, eta: f64, omega_rec: f64) -> Params {
    Params {
        gamma,
        gamma_prime: 1.0 - gamma,
        g,
        kappa,
        delta_a: delta,
        delta_c: delta,
        eta,
        omega_rec,
        ..Params::default()
    }
}

/// η ≈ 132 in the caption; used as given.
pub fn fig3a_params() -> Params {
    cavity(1.0, 155.0, 1000.0, 200.0, 132.0, 1.0)
}

pub fn fig3b_params() -> Params {
    cavity(1.0, 5f64.sqrt(), 10.0, 1.0, 0.6, 0.02)
}

pub fn fig4ab_params() -> Params {
    cavity(0.85, 155.0, 1000.0, 200.0, 132.0, 2.5)
}

pub fn fig4cd_params() -> Params {
    cavity(0.85, 155.0, 1000.0, 1.0, 0.9, 0.04)
}

/// Atomic detuning of the cooperativity scan. The caption leaves Δ_a free;
/// 5 γ_tot sits in regime i for C ≲ 1 and leaves room for large C.
pub const FIG5_DELTA: f64 = 5.0;
pub const FIG5_COOPERATIVITIES: [f64; 8] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0];

/// Drive amplitude that fixes |Ω|² = 0.01(Δ_a² + γ_tot²).
pub fn fig5_eta(g: f64, kappa: f64, delta_a: f64, delta_c: f64, gamma_tot: f64) -> f64 {
    (0.01 * (delta_a * delta_a + gamma_tot * gamma_tot) * (kappa * kappa + delta_c * delta_c) / (g * g)).sqrt()
}

pub fn fig5_params(c: f64) -> Params {
    let kappa = 1000.0;
    let g = (c * kappa).sqrt();
    cavity(0.85, g, kappa, FIG5_DELTA, fig5_eta(g, kappa, FIG5_DELTA, FIG5_DELTA, 1.0), 0.04)
}

pub fn fig7_params() -> Params {
    Params {
        n_emitters: 400,
        ..cavity(0.7, 7.5, 375.0, 10.0, 50.0, 0.5)
    }
}

pub const FIG7_KV_MEAN: f64 = 1.5;
/// Standard deviation of the initial Doppler shifts (variance 0.01).
pub const FIG7_KV_STD: f64 = 0.1;
pub const FIG7_SEED: u64 = 7;

/// Configuration for a single emitter starting at rest internally at θ = 0.
pub fn single_config(model: &Model, kv0: f64, t_end: f64, stride: f64, observables: Vec<Observable>) -> RunConfig {
    RunConfig {
        params: *model.params(),
        scenario: model.scenario(),
        initial: InitialConditions {
            kv_mean: kv0,
            kv_std: 0.0,
            theta: ThetaInit::Fixed(0.0),
            seed: 0,
        },
        integrator: IntegratorSettings::defaults(model, t_end),
        recording: Recording { stride, observables },
    }
}

fn observables(model: &Model) -> Vec<Observable> {
    let mut v = vec![Observable::W, Observable::Theta];
    if !model.scenario().is_closed() {
        v.push(Observable::Ng);
    }
    if model.scenario().is_cavity() {
        v.push(Observable::AbsAlpha);
    }
    v
}

/// Time for the two-sideband population equation with `n` emitters to
/// bring n_g from 1 down to `n_end`.
pub fn population_time(model: &Model, n: usize, n_end: f64) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let a = (2 * n + 1) as f64 * model.cooperativity() / 4.0;
    let d2 = p.delta_a * p.delta_a;
    let integral = (gamma * gamma + d2) * (1.0 / n_end).ln()
        + 2.0 * gamma * gamma * a * (1.0 - n_end)
        + gamma * gamma * a * a * (1.0 - n_end * n_end) / 2.0;
    integral / (p.gamma_prime * model.drive_sq())
}

fn w_line(t: &[f64], fit: &FitReport, xi: f64) -> Vec<f64> {
    t.iter().map(|&t| fit.w_start * (-xi * (t - fit.t_start)).exp()).collect()
}

fn fit_row(run: &str, fit: &FitReport, xi_analytic: f64) -> Vec<Cell> {
    vec![
        run.into(),
        fit.rate.into(),
        xi_analytic.into(),
        fit.t_start.into(),
        fit.t_end.into(),
        fit.w_start.into(),
        fit.w_end.into(),
        Cell::Int(fit.points as u64),
        fit.rms_residual.into(),
    ]
}

const FIT_COLUMNS: [&str; 9] = [
    "run",
    "xi_fit",
    "xi_analytic",
    "t_start",
    "t_end",
    "w_start",
    "w_end",
    "points",
    "rms_residual",
];

/// Potential minimum nearest to `theta`: antinodes (θ = mπ) for Δ_a > 0,
/// nodes for Δ_a < 0.
fn nearest_minimum(theta: f64, delta_a: f64) -> f64 {
    let offset = if delta_a >= 0.0 { 0.0 } else { PI / 2.0 };
    ((theta - offset) / PI).round() * PI + offset
}

fn fig2() -> Result<Artifacts> {
    let model = Model::new(fig2_params(), Scenario::FreeSpaceClosed)?;
    // ≥ 20 samples per Doppler period at the initial speed.
    let stride = PI / (20.0 * FIG2_KV0);
    let cfg = single_config(&model, FIG2_KV0, FIG2_T_END, stride, vec![Observable::W, Observable::Theta]);
    let tr = run(&cfg)?;
    let fit = fit_trajectory(&model, &tr)?;
    let xi = analytics::xi_free_space(&model);

    let w = tr.column("w_0").expect("recorded");
    let theta = tr.column("theta_0").expect("recorded");
    let mut out = Artifacts::new("figure", "fig2");
    out.set("xi_fit", fit.rate);
    out.set("xi_analytic", xi);
    out.set("xi_relative_error", fit.rate / xi - 1.0);
    out.set("fit_w_min", fit_window(&model).w_min);
    out.set("fit_w_max", fit_window(&model).w_max);
    out.set("fit_t_start", fit.t_start);
    out.set("fit_t_end", fit.t_end);
    match first_zero_crossing(&tr.times, w) {
        Some(t0) => {
            let after: Vec<f64> = tr
                .times
                .iter()
                .zip(theta)
                .filter(|(t, _)| **t >= t0)
                .map(|(_, th)| *th)
                .collect();
            let mean = after.iter().sum::<f64>() / after.len() as f64;
            let centre = nearest_minimum(mean, model.params().delta_a);
            let excursion = after.iter().map(|th| (th - centre).abs()).fold(0.0, f64::max);
            out.set("trap_onset", t0);
            out.set("trap_cell_centre", centre);
            out.set("trap_max_excursion", excursion);
        }
        None => out.notes.push("w never crossed zero; no trapping observed".into()),
    }

    let line = w_line(&tr.times, &fit, xi);
    let fitted: Vec<f64> = tr.times.iter().map(|t| (fit.intercept - fit.rate * t).exp()).collect();
    out.tables.push(trajectory_table(
        "fig2_trajectory.csv",
        &tr,
        vec![("w_analytic".into(), line), ("w_fit".into(), fitted)],
    ));
    let mut rates = Table::new("fig2_rates.csv", &FIT_COLUMNS);
    rates.push(fit_row("free_space", &fit, xi));
    out.tables.push(rates);
    out.runs.push(("free_space".into(), cfg));
    Ok(out)
}

/// Cavity closed-transition run and its free-space twin with friction fits.
fn closed_pair(name: &str, params: Params, kv0: f64) -> Result<Artifacts> {
    let model = Model::new(params, Scenario::CavityClosed)?;
    let twin = model.free_space_twin();
    let stride = PI / (20.0 * kv0);
    let config_for = |m: &Model, xi: f64| -> Result<RunConfig> {
        let w_min = fit_window(m).w_min;
        if !(w_min < kv0) {
            return Err(Error::InvalidParams(format!(
                "{name}: fit window lower edge {w_min} is above kv0 = {kv0}"
            )));
        }
        let t_end = 1.5 * (kv0 / w_min).ln() / xi;
        Ok(single_config(m, kv0, t_end, stride, observables(m)))
    };
    let xi_c = analytics::xi_cavity_single(&model);
    let xi_fs = analytics::xi_free_space(&twin);
    let cav_cfg = config_for(&model, xi_c)?;
    let fs_cfg = config_for(&twin, xi_fs)?;
    let (cav, fs) = rayon::join(|| run(&cav_cfg), || run(&fs_cfg));
    let (cav, fs) = (cav?, fs?);
    let cav_fit = fit_trajectory(&model, &cav)?;
    let fs_fit = fit_trajectory(&twin, &fs)?;

    let c = model.cooperativity();
    let mut out = Artifacts::new("figure", name);
    out.set("cooperativity", c);
    out.set("regime_parameter", analytics::regime_parameter(&model));
    out.set("xi_fit_cavity", cav_fit.rate);
    out.set("xi_fit_free_space", fs_fit.rate);
    out.set("xi_analytic_cavity", xi_c);
    out.set("xi_analytic_free_space", xi_fs);
    out.set("ratio_fit", cav_fit.rate / fs_fit.rate);
    out.set("ratio_analytic", xi_c / xi_fs);
    out.set("one_plus_c_half", 1.0 + c / 2.0);
    if name == "fig3a" {
        out.notes.push("eta = 132 transcribes the caption's approximate value".into());
    }

    let cav_line = w_line(&cav.times, &cav_fit, xi_c);
    let fs_line = w_line(&fs.times, &fs_fit, xi_fs);
    out.tables.push(trajectory_table(
        &format!("{name}_cavity.csv"),
        &cav,
        vec![("w_analytic".into(), cav_line)],
    ));
    out.tables.push(trajectory_table(
        &format!("{name}_free_space.csv"),
        &fs,
        vec![("w_analytic".into(), fs_line)],
    ));
    let mut rates = Table::new(format!("{name}_rates.csv"), &FIT_COLUMNS);
    rates.push(fit_row("cavity", &cav_fit, xi_c));
    rates.push(fit_row("free_space", &fs_fit, xi_fs));
    out.tables.push(rates);
    out.runs.push(("cavity".into(), cav_cfg));
    out.runs.push(("free_space".into(), fs_cfg));
    Ok(out)
}

/// Index one past the last sample with n_g ≥ `level` before it first drops
/// below.
fn span_until(ng: &[f64], level: f64) -> usize {
    ng.iter().position(|&n| n < level).unwrap_or(ng.len())
}

fn final_w(tr: &Trajectory) -> f64 {
    let s = &tr.final_state.emitters;
    s.iter().map(|e| e.w).sum::<f64>() / s.len() as f64
}

fn require_stop(label: &str, tr: &Trajectory) -> Result<f64> {
    tr.stop_time.ok_or_else(|| {
        Error::InvalidParams(format!(
            "{label}: ground-state population did not reach {FINAL_NG_THRESHOLD} by t_end"
        ))
    })
}

/// Non-closed cavity run and free-space twin, both to n_g < 1e−4, with
/// population and velocity overlays.
fn nonclosed_pair(name: &str, params: Params, kv0: f64) -> Result<Artifacts> {
    let model = Model::new(params, Scenario::CavityNonClosed)?;
    let twin = model.free_space_twin();
    let t_cav = population_time(&model, 1, FINAL_NG_THRESHOLD);
    let t_fs = population_time(&twin, 1, FINAL_NG_THRESHOLD);
    let stride = t_fs / 4000.0;
    let make = |m: &Model, t: f64| {
        let mut cfg = single_config(m, kv0, 2.0 * t, stride, observables(m));
        cfg.integrator.stop_ng = Some(FINAL_NG_THRESHOLD);
        cfg
    };
    let cav_cfg = make(&model, t_cav);
    let fs_cfg = make(&twin, t_fs);
    let (cav, fs) = rayon::join(|| run(&cav_cfg), || run(&fs_cfg));
    let (cav, fs) = (cav?, fs?);
    let cav_stop = require_stop("cavity", &cav)?;
    let fs_stop = require_stop("free space", &fs)?;

    let mu = analytics::mu_free_space(&twin);
    let xi = analytics::xi_free_space(&twin);
    let c = model.cooperativity();
    let exp_ng = |t: &[f64]| t.iter().map(|t| (-mu * t).exp()).collect::<Vec<f64>>();
    let eq_cav: Vec<f64> = cav
        .times
        .iter()
        .map(|&t| analytics::v_of_t_nonclosed_cavity_regime_i(&model, kv0, t))
        .collect();
    let eq_fs: Vec<f64> = fs
        .times
        .iter()
        .map(|&t| analytics::v_of_t_nonclosed_fs(&twin, kv0, t))
        .collect();
    let ng_single = integrate_population(&model, PopulationModel::Single, &cav.times)?;
    let ng_infinite = integrate_population(&model, PopulationModel::InfiniteOrder, &cav.times)?;
    let cav_exp = exp_ng(&cav.times);
    let fs_exp = exp_ng(&fs.times);
    let cav_ng = cav.column("ng_0").expect("recorded");
    let cav_w = cav.column("w_0").expect("recorded");
    let fs_ng = fs.column("ng_0").expect("recorded");
    let fs_w = fs.column("w_0").expect("recorded");

    let mut out = Artifacts::new("figure", name);
    out.set("cooperativity", c);
    out.set("regime_parameter", analytics::regime_parameter(&model));
    out.set("mu_free_space", mu);
    out.set("xi_free_space", xi);
    out.set("xi_analytic_cavity", analytics::xi_cavity_single(&model));

    // Span up to n_g = 0.01 for the regime-i comparisons.
    let k = span_until(cav_ng, 0.01);
    out.set("span_end_cavity", cav.times[k.saturating_sub(1)]);
    out.set("ng_linf_cavity_vs_exponential", linf_relative(&cav_ng[..k], &cav_exp[..k]));
    out.set("w_linf_cavity_vs_regime_i", linf_relative(&cav_w[..k], &eq_cav[..k]));
    let kf = span_until(fs_ng, 0.01);
    out.set("span_end_free_space", fs.times[kf.saturating_sub(1)]);
    out.set("ng_linf_free_space_vs_exponential", linf_relative(&fs_ng[..kf], &fs_exp[..kf]));
    out.set("w_linf_free_space_vs_analytic", linf_relative(&fs_w[..kf], &eq_fs[..kf]));
    out.set("ng_linf_cavity_vs_single_ode", linf_relative(cav_ng, &ng_single));
    out.set("ng_linf_cavity_vs_infinite_order_ode", linf_relative(cav_ng, &ng_infinite));

    // Pointwise population comparison on the shared recording grid.
    let shared = cav
        .times
        .iter()
        .zip(&fs.times)
        .take_while(|(a, b)| a == b)
        .count();
    let gap = (1..shared)
        .map(|i| cav_ng[i] - fs_ng[i])
        .fold(f64::INFINITY, f64::min);
    out.set("ng_cavity_minus_free_space_min", gap);

    let v_cav = final_w(&cav);
    let v_fs = final_w(&fs);
    out.set("stop_time_cavity", cav_stop);
    out.set("stop_time_free_space", fs_stop);
    out.set("v_final_cavity", v_cav);
    out.set("v_final_free_space", v_fs);
    out.set("v_final_free_space_analytic", analytics::final_velocity_fs(&twin, kv0));
    out.set(
        "v_final_cavity_regime_i_analytic",
        analytics::final_velocity_fs(&twin, kv0) * analytics::final_velocity_ratio_cavity(&model),
    );
    out.set("ln_final_ratio", (v_cav / v_fs).ln());
    out.set("ln_final_ratio_leading", analytics::ln_final_velocity_ratio_leading(&model));
    out.set(
        "max_population_drift",
        cav.max_population_drift.unwrap_or(0.0).max(fs.max_population_drift.unwrap_or(0.0)),
    );
    out.notes.push(format!(
        "final velocity = w at the first time n_g < {FINAL_NG_THRESHOLD}"
    ));

    out.tables.push(trajectory_table(
        &format!("{name}_cavity.csv"),
        &cav,
        vec![
            ("w_regime_i".into(), eq_cav),
            ("ng_exponential".into(), cav_exp),
            ("ng_single_ode".into(), ng_single),
            ("ng_infinite_order_ode".into(), ng_infinite),
        ],
    ));
    out.tables.push(trajectory_table(
        &format!("{name}_free_space.csv"),
        &fs,
        vec![("w_analytic".into(), eq_fs), ("ng_exponential".into(), fs_exp)],
    ));
    out.runs.push(("cavity".into(), cav_cfg));
    out.runs.push(("free_space".into(), fs_cfg));
    Ok(out)
}

/// Base configuration of the cooperativity scan (C = 1).
pub fn fig5_spec(values: Vec<f64>) -> Result<SweepSpec> {
    let model = Model::new(fig5_params(1.0), Scenario::CavityNonClosed)?;
    let kv0 = 0.2 * FIG5_DELTA;
    let t_end = 2.0 * population_time(&model.with_params(fig5_params(values_max(&values)))?, 1, FINAL_NG_THRESHOLD);
    let mut base = single_config(&model, kv0, t_end, t_end / 2000.0, vec![Observable::W, Observable::Ng]);
    base.integrator.stop_ng = Some(FINAL_NG_THRESHOLD);
    Ok(SweepSpec {
        name: "fig5".into(),
        base,
        axis: Axis::Cooperativity,
        values,
        paired: true,
    })
}

fn values_max(v: &[f64]) -> f64 {
    v.iter().copied().fold(1.0, f64::max)
}

fn fig5() -> Result<Artifacts> {
    let spec = fig5_spec(FIG5_COOPERATIVITIES.to_vec())?;
    let mut out = sweep::run_sweep(&spec)?;
    out.kind = "figure".into();
    out.notes.push(format!(
        "delta_a = delta_c = {FIG5_DELTA}; eta follows the caption formula so |Omega|^2 = 0.01(delta_a^2 + gamma_tot^2) at every C"
    ));

    // Dense analytic overlay on a log-spaced C grid.
    let mut line = Table::new(
        "fig5_analytic.csv",
        &["cooperativity", "ln_ratio_leading", "ln_ratio_quadrature", "regime_parameter"],
    );
    for i in 0..=60 {
        let c = 10f64.powf(-2.0 + 3.5 * i as f64 / 60.0);
        let m = Model::new(fig5_params(c), Scenario::CavityNonClosed)?;
        let (lead, quad) = sweep::ln_ratio_predictions(&m)?;
        line.push(vec![c.into(), lead.into(), quad.into(), analytics::regime_parameter(&m).into()]);
    }
    out.tables.push(line);
    Ok(out)
}

fn fig7() -> Result<Artifacts> {
    let params = fig7_params();
    let model = Model::new(params, Scenario::CavityNonClosedMany)?;
    let n = params.n_emitters;
    let single = model.single_emitter();
    let twin = model.free_space_twin();
    let t_cav = population_time(&model, n, FINAL_NG_THRESHOLD);
    let t_fs = population_time(&twin, 1, FINAL_NG_THRESHOLD);
    let stride = t_fs / 2000.0;
    let initial = InitialConditions {
        kv_mean: FIG7_KV_MEAN,
        kv_std: FIG7_KV_STD,
        theta: ThetaInit::Uniform,
        seed: FIG7_SEED,
    };
    let mut integrator = IntegratorSettings::defaults(&model, 2.0 * t_cav);
    integrator.stop_ng = Some(FINAL_NG_THRESHOLD);
    let cav_cfg = RunConfig {
        params,
        scenario: model.scenario(),
        initial,
        integrator,
        recording: Recording {
            stride,
            observables: vec![Observable::MeanW, Observable::StdW, Observable::MeanNg, Observable::AbsAlpha],
        },
    };
    let start = cav_cfg.initial_state();
    let fs_cfgs: Vec<RunConfig> = start
        .emitters
        .iter()
        .map(|e| {
            let mut cfg = single_config(&twin, e.w, 2.0 * t_fs, stride, vec![Observable::W, Observable::Ng]);
            cfg.initial.theta = ThetaInit::Fixed(e.theta);
            cfg.integrator.stop_ng = Some(FINAL_NG_THRESHOLD);
            cfg
        })
        .collect();

    let (cav, fs) = rayon::join(
        || run(&cav_cfg),
        || fs_cfgs.par_iter().map(run).collect::<Result<Vec<_>>>(),
    );
    let (cav, fs) = (cav?, fs?);
    let cav_stop = require_stop("cavity ensemble", &cav)?;
    for (j, tr) in fs.iter().enumerate() {
        require_stop(&format!("free-space emitter {j}"), tr)?;
    }

    let v_cav = final_w(&cav);
    let v_fs = fs.iter().map(final_w).sum::<f64>() / n as f64;
    let semi = integrate_population(&model, PopulationModel::Many, &cav.times)?;
    let mean_ng = cav.column("mean_ng").expect("recorded");
    let mu = analytics::mu_free_space(&twin);

    let mut out = Artifacts::new("figure", "fig7");
    out.set("n_emitters", n as f64);
    out.set("cooperativity", model.cooperativity());
    out.set("collective_cooperativity", model.cooperativity() * n as f64);
    out.set("mu_free_space", mu);
    out.set("xi_free_space", analytics::xi_free_space(&twin));
    out.set("xi_analytic_cavity_per_emitter", analytics::xi_cavity_many(&model));
    out.set("xi_analytic_cavity_single", analytics::xi_cavity_single(&single));
    out.set("stop_time_cavity", cav_stop);
    out.set(
        "stop_time_free_space_max",
        fs.iter().filter_map(|t| t.stop_time).fold(0.0, f64::max),
    );
    out.set("v_final_cavity", v_cav);
    out.set("v_final_free_space", v_fs);
    out.set("v_final_relative_difference", (v_cav - v_fs).abs() / v_fs.abs());
    out.set("ng_linf_vs_semi_analytic", linf_relative(mean_ng, &semi));
    out.set(
        "max_population_drift",
        fs.iter()
            .chain(std::iter::once(&cav))
            .filter_map(|t| t.max_population_drift)
            .fold(0.0, f64::max),
    );
    out.notes.push(format!(
        "free-space ensemble: each of the {n} emitters integrated separately from the cavity ensemble's initial state"
    ));

    let fs_exp: Vec<f64> = cav.times.iter().map(|t| (-mu * t).exp()).collect();
    out.tables.push(trajectory_table(
        "fig7_cavity.csv",
        &cav,
        vec![("ng_semi_analytic".into(), semi), ("ng_free_space_exponential".into(), fs_exp)],
    ));

    // Free-space ensemble averages over the grid samples all runs share.
    let shared = fs
        .iter()
        .map(|tr| tr.times.iter().enumerate().take_while(|(k, t)| **t == *k as f64 * stride).count())
        .min()
        .unwrap_or(0);
    let mut times = Vec::with_capacity(shared);
    let mut mean_w = Vec::with_capacity(shared);
    let mut std_w = Vec::with_capacity(shared);
    let mut mean_ng_fs = Vec::with_capacity(shared);
    for k in 0..shared {
        let ws: Vec<f64> = fs.iter().map(|tr| tr.data[0][k]).collect();
        let m = ws.iter().sum::<f64>() / n as f64;
        let var = ws.iter().map(|w| (w - m).powi(2)).sum::<f64>() / n as f64;
        times.push(fs[0].times[k]);
        mean_w.push(m);
        std_w.push(var.sqrt());
        mean_ng_fs.push(fs.iter().map(|tr| tr.data[1][k]).sum::<f64>() / n as f64);
    }
    let idx = super::decimate_indices(times.len(), super::MAX_CSV_ROWS);
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let exp_fs: Vec<f64> = times.iter().map(|t| (-mu * t).exp()).collect();
    out.tables.push(Table::from_columns(
        "fig7_free_space.csv",
        vec![
            ("t".into(), pick(&times)),
            ("mean_w".into(), pick(&mean_w)),
            ("std_w".into(), pick(&std_w)),
            ("mean_ng".into(), pick(&mean_ng_fs)),
            ("ng_exponential".into(), pick(&exp_fs)),
        ],
    ));
    let mut finals = Table::new("fig7_final_velocities.csv", &["emitter", "kv0", "theta0", "w_final_free_space", "w_final_cavity"]);
    for (j, (tr, e)) in fs.iter().zip(&start.emitters).enumerate() {
        finals.push(vec![
            Cell::Int(j as u64),
            e.w.into(),
            e.theta.into(),
            final_w(tr).into(),
            cav.final_state.emitters[j].w.into(),
        ]);
    }
    out.tables.push(finals);
    out.runs.push(("cavity".into(), cav_cfg));
    out.runs.push(("free_space_emitter_0".into(), fs_cfgs[0].clone()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for f in FigureName::ALL {
            assert_eq!(f.name().parse::<FigureName>().unwrap(), f);
        }
        assert!(matches!("fig6".parse::<FigureName>(), Err(Error::UnknownFigure(_))));
    }

    #[test]
    fn caption_cooperativities() {
        let c = |p: Params| Model::new(p, Scenario::CavityNonClosed).unwrap().cooperativity();
        assert!((c(fig3a_params()) - 24.025).abs() < 1e-12);
        assert!((c(fig3b_params()) - 0.5).abs() < 1e-12);
        assert!((c(fig4cd_params()) - 24.025).abs() < 1e-12);
        let m = Model::new(fig7_params(), Scenario::CavityNonClosedMany).unwrap();
        assert!((m.cooperativity() - 0.15).abs() < 1e-12);
        assert!((m.cooperativity() * 400.0 - 60.0).abs() < 1e-9);
    }

    #[test]
    fn fig5_drive_is_fixed() {
        for c in FIG5_COOPERATIVITIES {
            let m = Model::new(fig5_params(c), Scenario::CavityNonClosed).unwrap();
            assert!((m.cooperativity() - c).abs() < 1e-12 * c.max(1.0));
            let target = 0.01 * (FIG5_DELTA * FIG5_DELTA + 1.0);
            assert!((m.drive_sq() / target - 1.0).abs() < 1e-12);
            assert!((analytics::mu_free_space(&m) - 1.5e-3).abs() < 1e-15);
        }
    }

    #[test]
    fn population_time_matches_free_space_exponential() {
        let m = Model::new(fig4ab_params(), Scenario::CavityNonClosed).unwrap().free_space_twin();
        let mu = analytics::mu_free_space(&m);
        let t = population_time(&m, 1, 1e-4);
        assert!((t * mu / (1e4f64).ln() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn potential_minima() {
        assert_eq!(nearest_minimum(3.0, 10.0), PI);
        assert_eq!(nearest_minimum(1.0, -10.0), PI / 2.0);
    }
}
