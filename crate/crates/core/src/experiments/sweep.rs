//! One-dimensional parameter sweeps with optional free-space twins.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use super::output::{Cell, Table};
use super::{fit_trajectory, run, Artifacts, FINAL_NG_THRESHOLD};
use crate::analytics;
use crate::config::{default_max_step, RunConfig};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::model::{Model, Params};

/// The swept quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// A `[params]` key.
    Param(ParamKey),
    /// Single-emitter cooperativity, realized through g at fixed κ and
    /// γ_tot; η is rescaled with 1/g so the effective drive |Ω| stays fixed.
    Cooperativity,
    /// Initial Doppler shift (mean for ensembles).
    InitialKv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKey {
    Gamma,
    GammaPrime,
    Kappa,
    G,
    DeltaA,
    DeltaC,
    Eta,
    Omega,
    OmegaRec,
    NEmitters,
}

impl ParamKey {
    pub const ALL: [ParamKey; 10] = [
        ParamKey::Gamma,
        ParamKey::GammaPrime,
        ParamKey::Kappa,
        ParamKey::G,
        ParamKey::DeltaA,
        ParamKey::DeltaC,
        ParamKey::Eta,
        ParamKey::Omega,
        ParamKey::OmegaRec,
        ParamKey::NEmitters,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ParamKey::Gamma => "gamma",
            ParamKey::GammaPrime => "gamma_prime",
            ParamKey::Kappa => "kappa",
            ParamKey::G => "g",
            ParamKey::DeltaA => "delta_a",
            ParamKey::DeltaC => "delta_c",
            ParamKey::Eta => "eta",
            ParamKey::Omega => "omega",
            ParamKey::OmegaRec => "omega_rec",
            ParamKey::NEmitters => "n_emitters",
        }
    }

    fn set(self, p: &mut Params, value: f64) -> Result<()> {
        let slot = match self {
            ParamKey::Gamma => &mut p.gamma,
            ParamKey::GammaPrime => &mut p.gamma_prime,
            ParamKey::Kappa => &mut p.kappa,
            ParamKey::G => &mut p.g,
            ParamKey::DeltaA => &mut p.delta_a,
            ParamKey::DeltaC => &mut p.delta_c,
            ParamKey::Eta => &mut p.eta,
            ParamKey::Omega => &mut p.omega,
            ParamKey::OmegaRec => &mut p.omega_rec,
            ParamKey::NEmitters => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(Error::config("sweep.values", format!("n_emitters needs a positive integer, got {value}")));
                }
                p.n_emitters = value as usize;
                return Ok(());
            }
        };
        *slot = value;
        Ok(())
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::Param(k) => write!(f, "params.{}", k.name()),
            Axis::Cooperativity => f.write_str("cooperativity"),
            Axis::InitialKv => f.write_str("initial.kv0"),
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    /// Accepts `cooperativity`, `initial.kv0` and `params.<key>` (or the
    /// bare key).
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cooperativity" | "C" => return Ok(Axis::Cooperativity),
            "initial.kv0" | "initial.kv_mean" | "kv0" => return Ok(Axis::InitialKv),
            _ => {}
        }
        let key = s.strip_prefix("params.").unwrap_or(s);
        ParamKey::ALL
            .into_iter()
            .find(|k| k.name() == key)
            .map(Axis::Param)
            .ok_or_else(|| {
                Error::config(
                    "sweep.axis",
                    format!("unknown axis `{s}`, expected cooperativity, initial.kv0 or params.<key>"),
                )
            })
    }
}

impl Axis {
    /// Configuration of one sweep point.
    pub fn apply(self, base: &RunConfig, value: f64) -> Result<RunConfig> {
        if !value.is_finite() {
            return Err(Error::config("sweep.values", format!("must be finite, got {value}")));
        }
        let mut cfg = base.clone();
        match self {
            Axis::InitialKv => cfg.initial.kv_mean = value,
            Axis::Param(key) => key.set(&mut cfg.params, value)?,
            Axis::Cooperativity => {
                let p = &mut cfg.params;
                if !base.scenario.is_cavity() {
                    return Err(Error::config("sweep.axis", "cooperativity needs a cavity scenario"));
                }
                if !(p.g > 0.0) {
                    return Err(Error::config("params.g", "cooperativity axis needs g > 0 in the base"));
                }
                if !(value > 0.0) {
                    return Err(Error::config("sweep.values", format!("cooperativity must be > 0, got {value}")));
                }
                let g = (value * p.kappa * p.gamma_tot()).sqrt();
                p.eta *= p.g / g;
                p.g = g;
            }
        }
        let base_model = base.model();
        let model = Model::new(cfg.params, cfg.scenario)?;
        // Keep the stiffness guard tied to κ when the base used the default.
        if base.integrator.max_step == default_max_step(&base_model) {
            cfg.integrator.max_step = default_max_step(&model);
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: RunConfig,
    pub axis: Axis,
    pub values: Vec<f64>,
    /// Also run each point's free-space twin.
    pub paired: bool,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::config("sweep.values", "axis has no values"));
        }
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values", format!("must be finite, got {v}")));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(Error::config("sweep.values", "must be strictly monotone"));
        }
        Ok(())
    }
}

/// Free-space twin of a run: same level scheme, |Ω|, initial condition and
/// tolerances; ensembles map to a single emitter at the mean Doppler shift.
pub fn twin_config(cfg: &RunConfig) -> RunConfig {
    let twin = cfg.model().free_space_twin();
    let mut out = cfg.clone();
    out.params = *twin.params();
    out.scenario = twin.scenario();
    out.initial.kv_std = 0.0;
    if cfg.params.n_emitters > 1 {
        out.initial.theta = crate::config::ThetaInit::Fixed(0.0);
    }
    out.integrator.max_step = default_max_step(&twin);
    out.recording.observables = crate::dynamics::Observable::defaults(out.scenario, 1);
    out
}

/// (leading-order, quadrature) predictions of ln(v_c,final / v_fs,final).
pub fn ln_ratio_predictions(model: &Model) -> Result<(f64, f64)> {
    let lead = analytics::ln_final_velocity_ratio_leading(model);
    let q = analytics::final_velocity_exponent_integral(model, model.n_emitters())?;
    let twin = model.free_space_twin();
    let fs = analytics::xi_free_space(&twin) / analytics::mu_free_space(&twin);
    Ok((lead, -(q.quadrature - fs)))
}

#[derive(Debug, Clone, Default)]
struct Outcome {
    t_stop: Option<f64>,
    v_final: Option<f64>,
    xi_fit: Option<f64>,
    drift: Option<f64>,
}

fn mean_final_w(tr: &Trajectory) -> f64 {
    let e = &tr.final_state.emitters;
    e.iter().map(|e| e.w).sum::<f64>() / e.len() as f64
}

fn evaluate(cfg: &RunConfig) -> Result<Outcome> {
    let tr = run(cfg)?;
    let model = cfg.model();
    let mut out = Outcome {
        drift: tr.max_population_drift,
        ..Outcome::default()
    };
    if cfg.scenario.is_closed() {
        out.v_final = Some(mean_final_w(&tr));
        if tr.column("w_0").is_some() && tr.column("theta_0").is_some() && cfg.params.n_emitters == 1 {
            out.xi_fit = fit_trajectory(&model, &tr).ok().map(|f| f.rate);
        }
    } else {
        let t = tr.stop_time.ok_or_else(|| {
            Error::InvalidParams(format!(
                "ground-state population did not fall below {} by t_end = {}",
                cfg.integrator.stop_ng.unwrap_or(FINAL_NG_THRESHOLD),
                cfg.integrator.t_end
            ))
        })?;
        out.t_stop = Some(t);
        out.v_final = Some(mean_final_w(&tr));
    }
    Ok(out)
}

const COLUMNS: [&str; 17] = [
    "value",
    "cooperativity",
    "regime_parameter",
    "status",
    "t_stop",
    "v_final",
    "t_stop_free_space",
    "v_final_free_space",
    "ln_ratio",
    "ln_ratio_leading",
    "ln_ratio_quadrature",
    "xi_fit",
    "xi_fit_free_space",
    "xi_analytic",
    "xi_analytic_free_space",
    "mu_free_space",
    "max_population_drift",
];

/// Runs every point (and twin) on the worker pool. Per-point failures are
/// recorded in the `status` column and do not stop the sweep.
pub fn run_sweep(spec: &SweepSpec) -> Result<Artifacts> {
    spec.validate()?;
    let mut base = spec.base.clone();
    if !base.scenario.is_closed() && base.integrator.stop_ng.is_none() {
        base.integrator.stop_ng = Some(FINAL_NG_THRESHOLD);
    }
    let configs: Vec<Result<RunConfig>> = spec.values.iter().map(|&v| spec.axis.apply(&base, v)).collect();

    // Distinct twins only; a fixed-drive cooperativity scan shares one.
    let mut twins: Vec<RunConfig> = Vec::new();
    let twin_index: Vec<Option<usize>> = configs
        .iter()
        .map(|c| {
            let c = c.as_ref().ok().filter(|_| spec.paired)?;
            let t = twin_config(c);
            Some(match twins.iter().position(|x| *x == t) {
                Some(i) => i,
                None => {
                    twins.push(t);
                    twins.len() - 1
                }
            })
        })
        .collect();

    let (points, twin_results) = rayon::join(
        || {
            configs
                .par_iter()
                .map(|c| match c {
                    Ok(c) => evaluate(c),
                    Err(e) => Err(Error::InvalidParams(e.to_string())),
                })
                .collect::<Vec<_>>()
        },
        || twins.par_iter().map(evaluate).collect::<Vec<_>>(),
    );

    let mut table = Table::new(format!("{}.csv", spec.name), &COLUMNS);
    let mut failures = 0usize;
    for (i, &value) in spec.values.iter().enumerate() {
        let mut status = String::from("ok");
        let mut row: Vec<Cell> = vec![value.into()];
        let model = configs[i].as_ref().ok().map(RunConfig::model);
        let fs_model = model.as_ref().map(Model::free_space_twin);
        row.push(model.as_ref().map(|m| m.cooperativity()).into());
        row.push(model.as_ref().map(analytics::regime_parameter).into());

        let point = match &points[i] {
            Ok(p) => p.clone(),
            Err(e) => {
                status = e.to_string();
                Outcome::default()
            }
        };
        let twin = match twin_index[i] {
            Some(k) => match &twin_results[k] {
                Ok(t) => t.clone(),
                Err(e) => {
                    if status == "ok" {
                        status = format!("free-space twin: {e}");
                    }
                    Outcome::default()
                }
            },
            None => Outcome::default(),
        };
        if status != "ok" {
            failures += 1;
        }
        let ln_ratio = match (point.v_final, twin.v_final) {
            (Some(a), Some(b)) if spec.paired && model.as_ref().is_some_and(|m| !m.scenario().is_closed()) => {
                Some((a / b).ln())
            }
            _ => None,
        };
        let predictions = model
            .as_ref()
            .filter(|m| m.scenario().is_cavity() && !m.scenario().is_closed())
            .and_then(|m| ln_ratio_predictions(m).ok());
        row.push(status.into());
        row.push(point.t_stop.into());
        row.push(point.v_final.into());
        row.push(twin.t_stop.into());
        row.push(twin.v_final.into());
        row.push(ln_ratio.into());
        row.push(predictions.map(|p| p.0).into());
        row.push(predictions.map(|p| p.1).into());
        row.push(point.xi_fit.into());
        row.push(twin.xi_fit.into());
        row.push(model.as_ref().map(|m| analytics::predict(m, None).xi).into());
        row.push(fs_model.as_ref().map(analytics::xi_free_space).into());
        row.push(fs_model.as_ref().map(analytics::mu_free_space).into());
        let drift = match (point.drift, twin.drift) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        row.push(drift.into());
        table.push(row);
    }

    let mut out = Artifacts::new("sweep", &spec.name);
    out.set("points", spec.values.len() as f64);
    out.set("failures", failures as f64);
    out.notes.push(format!("axis = {}", spec.axis));
    if spec.axis == Axis::Cooperativity {
        out.notes
            .push("cooperativity realized through g at fixed kappa and gamma_tot; eta scaled by 1/g to hold |Omega|".into());
    }
    out.tables.push(table);
    out.runs.push(("base".into(), base));
    if let Some(t) = twins.first().filter(|_| twins.len() == 1) {
        out.runs.push(("free_space".into(), t.clone()));
    }
    Ok(out)
}
