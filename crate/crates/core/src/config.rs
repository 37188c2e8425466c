//! Run configuration documents (TOML).
//!
//! ```toml
//! [params]
//! omega = 1.0
//! delta_a = 10.0
//! omega_rec = 0.5
//!
//! [scenario]
//! kind = "FreeSpaceClosed"
//!
//! [initial]
//! kv0 = 18.0
//!
//! [integrator]
//! t_end = 6000.0
//! ```
//!
//! Every error names the offending key. [`RunConfig::to_toml`] writes the
//! fully resolved document, which parses back to identical values; a
//! `[manifest]` table, if present, is ignored by the parser so manifests are
//! themselves valid configs.

use std::f64::consts::PI;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{Controls, Observable, Recording, StopRule};
use crate::error::{Error, Result};
use crate::model::{Model, Params, Scenario};
use crate::state::{EmitterState, SystemState};

pub const DEFAULT_REL_TOL: f64 = 1e-8;
pub const DEFAULT_ABS_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_STEPS: u64 = 500_000_000;
/// Default number of recorded samples when no stride is given.
pub const DEFAULT_SAMPLES: f64 = 1000.0;

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma_prime: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_rec: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_emitters: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum RawTheta {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    #[serde(skip_serializing_if = "Option::is_none")]
    kv0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kv_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    kv_std: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    theta0: Option<RawTheta>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    abs_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_step: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stop_ng: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecording {
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    observables: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    params: RawParams,
    scenario: RawScenario,
    #[serde(default)]
    initial: RawInitial,
    integrator: RawIntegrator,
    #[serde(default)]
    recording: RawRecording,
    /// Provenance written by the experiment drivers; not interpreted.
    #[serde(default, skip_serializing)]
    #[allow(dead_code)]
    manifest: Option<toml::Table>,
}

/// Initial position of each emitter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ThetaInit {
    Fixed(f64),
    /// θ_j = 2πj/N.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitialConditions {
    /// Mean initial Doppler shift (the exact value for single emitters).
    pub kv_mean: f64,
    pub kv_std: f64,
    pub theta: ThetaInit,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegratorSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_step: f64,
    pub max_steps: u64,
    /// Stop once the mean ground-state population drops below this value.
    pub stop_ng: Option<f64>,
}

impl IntegratorSettings {
    /// Defaults for a run of length `t_end`; cavity runs cap the step at
    /// 0.5/κ.
    pub fn defaults(model: &Model, t_end: f64) -> Self {
        IntegratorSettings {
            rel_tol: DEFAULT_REL_TOL,
            abs_tol: DEFAULT_ABS_TOL,
            t_end,
            max_step: default_max_step(model),
            max_steps: DEFAULT_MAX_STEPS,
            stop_ng: None,
        }
    }

    pub fn controls(&self) -> Controls {
        Controls {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            t_end: self.t_end,
            max_step: self.max_step,
            first_step: None,
            max_steps: self.max_steps,
        }
    }

    pub fn stop_rule(&self) -> Option<StopRule> {
        self.stop_ng.map(StopRule::GroundBelow)
    }
}

pub fn default_max_step(model: &Model) -> f64 {
    if model.scenario().is_cavity() {
        0.5 / model.params().kappa
    } else {
        f64::INFINITY
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub params: Params,
    pub scenario: Scenario,
    pub initial: InitialConditions,
    pub integrator: IntegratorSettings,
    pub recording: Recording,
}

fn parse_raw(source: &str) -> Result<RawConfig> {
    let de = toml::Deserializer::new(source);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        let mut reason = inner.message().to_string();
        if let Some(span) = inner.span() {
            let line = source[..span.start].matches('\n').count() + 1;
            reason = format!("{reason} (line {line})");
        }
        Error::config(if path == "." { String::new() } else { path }, reason)
    })
}

fn require<T>(value: Option<T>, path: &str, why: &str) -> Result<T> {
    value.ok_or_else(|| Error::config(path, format!("missing required key ({why})")))
}

fn forbid<T>(value: &Option<T>, path: &str, why: &str) -> Result<()> {
    match value {
        Some(_) => Err(Error::config(path, format!("key not allowed here ({why})"))),
        None => Ok(()),
    }
}

fn positive(value: f64, path: &str) -> Result<f64> {
    if value > 0.0 && !value.is_nan() {
        Ok(value)
    } else {
        Err(Error::config(path, format!("must be > 0, got {value}")))
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    let raw = parse_raw(source)?;
    let scenario: Scenario = raw.scenario.kind.parse()?;
    let rp = &raw.params;

    let delta_a = require(rp.delta_a, "params.delta_a", "every scenario")?;
    let omega_rec = require(rp.omega_rec, "params.omega_rec", "every scenario")?;
    let mut params = Params {
        gamma: rp.gamma.unwrap_or(1.0),
        gamma_prime: rp.gamma_prime.unwrap_or(0.0),
        delta_a,
        omega_rec,
        ..Params::default()
    };
    if scenario.is_cavity() {
        let why = "cavity scenarios";
        params.kappa = require(rp.kappa, "params.kappa", why)?;
        params.g = require(rp.g, "params.g", why)?;
        params.eta = require(rp.eta, "params.eta", why)?;
        params.delta_c = require(rp.delta_c, "params.delta_c", why)?;
        forbid(&rp.omega, "params.omega", "the cavity drive follows from eta, g, kappa and delta_c")?;
    } else {
        let why = "free-space scenarios have no cavity";
        params.omega = require(rp.omega, "params.omega", "free-space scenarios")?;
        forbid(&rp.kappa, "params.kappa", why)?;
        forbid(&rp.g, "params.g", why)?;
        forbid(&rp.eta, "params.eta", why)?;
        forbid(&rp.delta_c, "params.delta_c", why)?;
    }
    if scenario.is_many() {
        let n = require(rp.n_emitters, "params.n_emitters", "many-emitter scenarios")?;
        params.n_emitters = usize::try_from(n).map_err(|_| Error::config("params.n_emitters", "too large"))?;
    } else if let Some(n) = rp.n_emitters {
        if n != 1 {
            return Err(Error::config(
                "params.n_emitters",
                format!("single-emitter scenario {scenario} requires 1, got {n}"),
            ));
        }
    }
    let model = Model::new(params, scenario)?;

    let ri = &raw.initial;
    let initial = if params.n_emitters == 1 && !scenario.is_many() {
        forbid(&ri.kv_mean, "initial.kv_mean", "single emitters use kv0")?;
        forbid(&ri.kv_std, "initial.kv_std", "single emitters use kv0")?;
        InitialConditions {
            kv_mean: require(ri.kv0, "initial.kv0", "single-emitter scenarios")?,
            kv_std: 0.0,
            theta: parse_theta(ri.theta0.clone(), ThetaInit::Fixed(0.0))?,
            seed: ri.seed.unwrap_or(0),
        }
    } else {
        forbid(&ri.kv0, "initial.kv0", "ensembles use kv_mean and kv_std")?;
        let kv_std = ri.kv_std.unwrap_or(0.0);
        if !(kv_std >= 0.0 && kv_std.is_finite()) {
            return Err(Error::config("initial.kv_std", format!("must be >= 0, got {kv_std}")));
        }
        InitialConditions {
            kv_mean: require(ri.kv_mean, "initial.kv_mean", "many-emitter scenarios")?,
            kv_std,
            theta: parse_theta(ri.theta0.clone(), ThetaInit::Uniform)?,
            seed: ri.seed.unwrap_or(0),
        }
    };
    if !initial.kv_mean.is_finite() {
        return Err(Error::config("initial.kv0", "must be finite"));
    }

    let rg = &raw.integrator;
    let t_end = positive(require(rg.t_end, "integrator.t_end", "every run")?, "integrator.t_end")?;
    if !t_end.is_finite() {
        return Err(Error::config("integrator.t_end", "must be finite"));
    }
    let mut integrator = IntegratorSettings::defaults(&model, t_end);
    if let Some(v) = rg.rel_tol {
        integrator.rel_tol = positive(v, "integrator.rel_tol")?;
    }
    if let Some(v) = rg.abs_tol {
        integrator.abs_tol = positive(v, "integrator.abs_tol")?;
    }
    if let Some(v) = rg.max_step {
        integrator.max_step = positive(v, "integrator.max_step")?;
    }
    if let Some(v) = rg.max_steps {
        if v == 0 {
            return Err(Error::config("integrator.max_steps", "must be >= 1"));
        }
        integrator.max_steps = v;
    }
    if let Some(v) = rg.stop_ng {
        if scenario.is_closed() {
            return Err(Error::config(
                "integrator.stop_ng",
                format!("closed scenario {scenario} has no population loss"),
            ));
        }
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::config("integrator.stop_ng", format!("must be in (0, 1), got {v}")));
        }
        integrator.stop_ng = Some(v);
    }

    let rr = &raw.recording;
    let stride = positive(rr.stride.unwrap_or(t_end / DEFAULT_SAMPLES), "recording.stride")?;
    let observables = match &rr.observables {
        Some(names) => {
            if names.is_empty() {
                return Err(Error::config("recording.observables", "must not be empty"));
            }
            names.iter().map(|s| s.parse()).collect::<Result<Vec<Observable>>>()?
        }
        None => Observable::defaults(scenario, params.n_emitters),
    };
    for o in &observables {
        let bad = match o {
            Observable::Ng | Observable::Ne | Observable::Ni | Observable::MeanNg => scenario.is_closed(),
            Observable::AbsAlpha | Observable::ArgAlpha => !scenario.is_cavity(),
            _ => false,
        };
        if bad {
            return Err(Error::config(
                "recording.observables",
                format!("`{o}` is not available for {scenario}"),
            ));
        }
    }

    Ok(RunConfig {
        params,
        scenario,
        initial,
        integrator,
        recording: Recording { stride, observables },
    })
}

fn parse_theta(raw: Option<RawTheta>, default: ThetaInit) -> Result<ThetaInit> {
    match raw {
        None => Ok(default),
        Some(RawTheta::Value(v)) if v.is_finite() => Ok(ThetaInit::Fixed(v)),
        Some(RawTheta::Value(v)) => Err(Error::config("initial.theta0", format!("must be finite, got {v}"))),
        Some(RawTheta::Keyword(s)) if s == "uniform" => Ok(ThetaInit::Uniform),
        Some(RawTheta::Keyword(s)) => Err(Error::config(
            "initial.theta0",
            format!("expected a number or \"uniform\", got \"{s}\""),
        )),
    }
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let source = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&source)
}

impl RunConfig {
    pub fn model(&self) -> Model {
        Model::new(self.params, self.scenario).expect("validated at parse time")
    }

    pub fn controls(&self) -> Controls {
        self.integrator.controls()
    }

    /// Ground-state emitters at rest internally, positions per `theta0`,
    /// Doppler shifts drawn from N(kv_mean, kv_std²) with a seeded ChaCha8
    /// stream (exactly kv_mean when kv_std = 0).
    pub fn initial_state(&self) -> SystemState {
        initial_state(self.params.n_emitters, &self.initial)
    }

    /// Fully resolved configuration document.
    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_raw())?)
    }

    pub(crate) fn to_table(&self) -> Result<toml::Table> {
        Ok(toml::Table::try_from(self.to_raw())?)
    }

    fn to_raw(&self) -> RawConfig {
        let p = &self.params;
        let cavity = self.scenario.is_cavity();
        let many = self.scenario.is_many();
        let theta0 = match self.initial.theta {
            ThetaInit::Fixed(v) => RawTheta::Value(v),
            ThetaInit::Uniform => RawTheta::Keyword("uniform".into()),
        };
        let ensemble = many || p.n_emitters > 1;
        RawConfig {
            params: RawParams {
                gamma: Some(p.gamma),
                gamma_prime: Some(p.gamma_prime),
                kappa: cavity.then_some(p.kappa),
                g: cavity.then_some(p.g),
                delta_a: Some(p.delta_a),
                delta_c: cavity.then_some(p.delta_c),
                eta: cavity.then_some(p.eta),
                omega: (!cavity).then_some(p.omega),
                omega_rec: Some(p.omega_rec),
                n_emitters: Some(p.n_emitters as u64),
            },
            scenario: RawScenario {
                kind: self.scenario.name().to_string(),
            },
            initial: RawInitial {
                kv0: (!ensemble).then_some(self.initial.kv_mean),
                kv_mean: ensemble.then_some(self.initial.kv_mean),
                kv_std: ensemble.then_some(self.initial.kv_std),
                theta0: Some(theta0),
                seed: Some(self.initial.seed),
            },
            integrator: RawIntegrator {
                rel_tol: Some(self.integrator.rel_tol),
                abs_tol: Some(self.integrator.abs_tol),
                t_end: Some(self.integrator.t_end),
                max_step: Some(self.integrator.max_step),
                max_steps: Some(self.integrator.max_steps),
                stop_ng: self.integrator.stop_ng,
            },
            recording: RawRecording {
                stride: Some(self.recording.stride),
                observables: Some(self.recording.observables.iter().map(|o| o.name().to_string()).collect()),
            },
            manifest: None,
        }
    }
}

pub fn initial_state(n: usize, init: &InitialConditions) -> SystemState {
    let mut rng = ChaCha8Rng::seed_from_u64(init.seed);
    let normal = Normal::new(init.kv_mean, init.kv_std).expect("validated std");
    let emitters = (0..n)
        .map(|j| {
            let theta = match init.theta {
                ThetaInit::Fixed(v) => v,
                ThetaInit::Uniform => 2.0 * PI * j as f64 / n as f64,
            };
            let w = if init.kv_std == 0.0 {
                init.kv_mean
            } else {
                normal.sample(&mut rng)
            };
            EmitterState::at_rest(theta, w)
        })
        .collect();
    SystemState::new(emitters)
}
