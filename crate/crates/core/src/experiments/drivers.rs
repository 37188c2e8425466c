//! Single-configuration drivers: one simulation, or the analytic rates of a
//! configuration.

use serde::Serialize;

use super::sweep::ln_ratio_predictions;
use super::{fit_trajectory, run, separatrix_velocity, trajectory_table, Artifacts};
use crate::analytics::{self, RatePrediction};
use crate::config::RunConfig;
use crate::dynamics::FitReport;
use crate::error::Result;

/// Integrates `config` and packages the trajectory, the friction fit (when
/// the run has a single emitter and the window admits one) and the analytic
/// predictions.
pub fn simulate_artifacts(config: &RunConfig, name: &str) -> Result<Artifacts> {
    let model = config.model();
    let tr = run(config)?;
    let mut out = Artifacts::new("simulate", name);
    out.runs.push((name.to_string(), config.clone()));

    let prediction = analytics::predict(&model, Some(config.initial.kv_mean));
    let e = &tr.final_state.emitters;
    out.set("t_final", *tr.times.last().unwrap_or(&0.0));
    out.set("v_final", e.iter().map(|e| e.w).sum::<f64>() / e.len() as f64);
    out.set("steps_accepted", tr.stats.accepted as f64);
    out.set("steps_rejected", tr.stats.rejected as f64);
    out.set("xi_analytic", prediction.xi);
    out.set("mu_analytic", prediction.mu);
    if let Some(t) = tr.stop_time {
        out.set("t_stop", t);
    }
    if let Some(d) = tr.max_population_drift {
        out.set("max_population_drift", d);
    }
    if model.n_emitters() == 1 {
        match fit_trajectory(&model, &tr) {
            Ok(fit) => {
                out.set("xi_fit", fit.rate);
                out.set("xi_fit_over_analytic", fit.rate / prediction.xi);
                out.set("fit_t_start", fit.t_start);
                out.set("fit_t_end", fit.t_end);
                out.set("fit_rms_residual", fit.rms_residual);
            }
            Err(e) => out.notes.push(format!("no friction fit: {e}")),
        }
    }
    out.tables.push(trajectory_table(&format!("{name}_trajectory.csv"), &tr, Vec::new()));
    Ok(out)
}

/// Analytic rates of a configuration and of its free-space twin.
#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub scenario: String,
    pub cooperativity: f64,
    pub regime_parameter: f64,
    pub drive_sq: f64,
    pub separatrix_velocity: f64,
    pub rates: RatePrediction,
    pub free_space: RatePrediction,
    pub xi_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_velocity: Option<FinalVelocity>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitSummary {
    pub rate: f64,
    pub ratio_to_analytic: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub rms_residual: f64,
}

impl FitSummary {
    fn new(fit: &FitReport, xi: f64) -> Self {
        FitSummary {
            rate: fit.rate,
            ratio_to_analytic: fit.rate / xi,
            t_start: fit.t_start,
            t_end: fit.t_end,
            points: fit.points,
            rms_residual: fit.rms_residual,
        }
    }
}

/// Non-closed predictions for v_final / v₀.
#[derive(Debug, Clone, Serialize)]
pub struct FinalVelocity {
    pub free_space_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cavity_ratio: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ln_cavity_over_free_space_leading: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ln_cavity_over_free_space_quadrature: Option<f64>,
}

/// Builds the report; with `fit = true` the configuration is also simulated
/// and the fitted friction rate included.
pub fn rate_report(config: &RunConfig, fit: bool) -> Result<RateReport> {
    let model = config.model();
    let twin = model.free_space_twin();
    let rates = analytics::predict(&model, Some(config.initial.kv_mean));
    let free_space = analytics::predict(&twin, Some(config.initial.kv_mean));
    let final_velocity = if model.scenario().is_closed() {
        None
    } else if model.scenario().is_cavity() {
        let (lead, quad) = ln_ratio_predictions(&model)?;
        Some(FinalVelocity {
            free_space_ratio: analytics::final_velocity_fs(&twin, 1.0),
            cavity_ratio: Some(analytics::final_velocity_ratio_cavity(&model)),
            ln_cavity_over_free_space_leading: Some(lead),
            ln_cavity_over_free_space_quadrature: Some(quad),
        })
    } else {
        Some(FinalVelocity {
            free_space_ratio: analytics::final_velocity_fs(&model, 1.0),
            cavity_ratio: None,
            ln_cavity_over_free_space_leading: None,
            ln_cavity_over_free_space_quadrature: None,
        })
    };
    let fit = if fit && model.n_emitters() == 1 {
        let tr = run(config)?;
        Some(FitSummary::new(&fit_trajectory(&model, &tr)?, rates.xi))
    } else {
        None
    };
    Ok(RateReport {
        scenario: model.scenario().name().to_string(),
        cooperativity: model.cooperativity(),
        regime_parameter: analytics::regime_parameter(&model),
        drive_sq: model.drive_sq(),
        separatrix_velocity: separatrix_velocity(&model),
        rates,
        free_space,
        xi_ratio: rates.xi / free_space.xi,
        fit,
        final_velocity,
    })
}

impl RateReport {
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}
