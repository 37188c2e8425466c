//! Full mean-field runs with recording and stop rules.

use std::fmt;
use std::ops::ControlFlow;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::integrator::{bisect_event, integrate, Controls, Stats, Step};
use super::rhs::MeanField;
use crate::error::{Error, Result};
use crate::model::{Model, Params, Scenario};
use crate::state::{Layout, SystemState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Per-emitter Doppler shift.
    W,
    Theta,
    Ng,
    Ne,
    Ni,
    AbsBeta,
    AbsAlpha,
    ArgAlpha,
    MeanW,
    StdW,
    MeanNg,
}

impl Observable {
    pub const ALL: [Observable; 11] = [
        Observable::W,
        Observable::Theta,
        Observable::Ng,
        Observable::Ne,
        Observable::Ni,
        Observable::AbsBeta,
        Observable::AbsAlpha,
        Observable::ArgAlpha,
        Observable::MeanW,
        Observable::StdW,
        Observable::MeanNg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::W => "w",
            Observable::Theta => "theta",
            Observable::Ng => "ng",
            Observable::Ne => "ne",
            Observable::Ni => "ni",
            Observable::AbsBeta => "abs_beta",
            Observable::AbsAlpha => "abs_alpha",
            Observable::ArgAlpha => "arg_alpha",
            Observable::MeanW => "mean_w",
            Observable::StdW => "std_w",
            Observable::MeanNg => "mean_ng",
        }
    }

    fn per_emitter(self) -> bool {
        matches!(
            self,
            Observable::W
                | Observable::Theta
                | Observable::Ng
                | Observable::Ne
                | Observable::Ni
                | Observable::AbsBeta
        )
    }

    fn needs_populations(self) -> bool {
        matches!(
            self,
            Observable::Ng | Observable::Ne | Observable::Ni | Observable::MeanNg
        )
    }

    fn needs_cavity(self) -> bool {
        matches!(self, Observable::AbsAlpha | Observable::ArgAlpha)
    }

    /// Observables recorded when none are configured.
    pub fn defaults(scenario: Scenario, n_emitters: usize) -> Vec<Observable> {
        let mut v = if n_emitters == 1 {
            vec![Observable::W, Observable::Theta]
        } else {
            vec![Observable::MeanW, Observable::StdW]
        };
        if !scenario.is_closed() {
            v.push(if n_emitters == 1 {
                Observable::Ng
            } else {
                Observable::MeanNg
            });
        }
        if scenario.is_cavity() {
            v.extend([Observable::AbsAlpha, Observable::ArgAlpha]);
        }
        v
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "recording.observables",
                    format!(
                        "unknown observable `{s}`, expected one of {}",
                        Observable::ALL.map(Observable::name).join(", ")
                    ),
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recording {
    /// Sampling interval of the dense output.
    pub stride: f64,
    pub observables: Vec<Observable>,
}

/// Early termination rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StopRule {
    /// Stop the first time the emitter-averaged n_g drops below the value.
    GroundBelow(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub params: Params,
    pub scenario: Scenario,
    pub times: Vec<f64>,
    pub columns: Vec<String>,
    /// One vector per column, aligned with `times`.
    pub data: Vec<Vec<f64>>,
    pub stats: Stats,
    pub final_state: SystemState,
    /// Time at which the stop rule fired.
    pub stop_time: Option<f64>,
    /// max over accepted steps and emitters of |n_g + n_e + n_i − 1|.
    pub max_population_drift: Option<f64>,
}

impl Trajectory {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .position(|c| c == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn column_names(observables: &[Observable], n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for o in observables {
        if o.per_emitter() {
            out.extend((0..n).map(|j| format!("{}_{j}", o.name())));
        } else {
            out.push(o.name().to_string());
        }
    }
    out
}

fn mean_ground(layout: &Layout, y: &[f64]) -> f64 {
    let mut s = 0.0;
    for j in 0..layout.n_emitters {
        s += y[layout.n_g(j).expect("non-closed layout")];
    }
    s / layout.n_emitters as f64
}

fn sample(layout: &Layout, observables: &[Observable], y: &[f64], row: &mut Vec<f64>) {
    row.clear();
    let n = layout.n_emitters;
    for o in observables {
        match o {
            Observable::W => row.extend((0..n).map(|j| y[layout.w(j)])),
            Observable::Theta => row.extend((0..n).map(|j| y[layout.theta(j)])),
            Observable::Ng => row.extend((0..n).map(|j| y[layout.emitter(j) + 2])),
            Observable::Ne => row.extend((0..n).map(|j| y[layout.emitter(j) + 3])),
            Observable::Ni => row.extend((0..n).map(|j| y[layout.emitter(j) + 4])),
            Observable::AbsBeta => row.extend((0..n).map(|j| layout.beta(y, j).norm())),
            Observable::AbsAlpha => row.push(layout.alpha(y).norm()),
            Observable::ArgAlpha => row.push(layout.alpha(y).arg()),
            Observable::MeanW => {
                row.push((0..n).map(|j| y[layout.w(j)]).sum::<f64>() / n as f64)
            }
            Observable::StdW => {
                let mean = (0..n).map(|j| y[layout.w(j)]).sum::<f64>() / n as f64;
                let var = (0..n).map(|j| (y[layout.w(j)] - mean).powi(2)).sum::<f64>() / n as f64;
                row.push(var.sqrt())
            }
            Observable::MeanNg => row.push(mean_ground(layout, y)),
        }
    }
}

/// Integrates the model's mean-field equations from `initial`.
pub fn simulate(
    model: &Model,
    initial: &SystemState,
    controls: &Controls,
    recording: &Recording,
    stop: Option<StopRule>,
) -> Result<Trajectory> {
    let sys = MeanField::new(model);
    let layout = sys.layout;
    let y0 = layout.pack(initial)?;
    let scenario = model.scenario();
    for o in &recording.observables {
        if o.needs_populations() && scenario.is_closed() {
            return Err(Error::config(
                "recording.observables",
                format!("`{o}` needs a non-closed scenario, got {scenario}"),
            ));
        }
        if o.needs_cavity() && !scenario.is_cavity() {
            return Err(Error::config(
                "recording.observables",
                format!("`{o}` needs a cavity scenario, got {scenario}"),
            ));
        }
    }
    if matches!(stop, Some(StopRule::GroundBelow(_))) && scenario.is_closed() {
        return Err(Error::InvalidParams(
            "ground-state stop rule needs a non-closed scenario".into(),
        ));
    }
    if !(recording.stride > 0.0) {
        return Err(Error::config("recording.stride", "must be > 0"));
    }

    let columns = column_names(&recording.observables, layout.n_emitters);
    let mut data: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    let mut times = Vec::new();
    let mut row = Vec::with_capacity(columns.len());
    let mut push = |t: f64, y: &[f64], times: &mut Vec<f64>, data: &mut Vec<Vec<f64>>| {
        sample(&layout, &recording.observables, y, &mut row);
        times.push(t);
        for (c, v) in data.iter_mut().zip(&row) {
            c.push(*v);
        }
    };

    let t0 = initial.t;
    push(t0, &y0, &mut times, &mut data);
    let mut k_next: u64 = 1;
    let mut drift: f64 = 0.0;
    let mut scratch = vec![0.0; layout.dim()];
    let mut stop_time = None;

    let mut observer = |s: &Step<'_>| {
        if !layout.closed {
            for j in 0..layout.n_emitters {
                let o = layout.emitter(j);
                let sum = s.y1[o + 2] + s.y1[o + 3] + s.y1[o + 4];
                drift = drift.max((sum - 1.0).abs());
            }
        }
        let mut t_stop = None;
        if let Some(StopRule::GroundBelow(threshold)) = stop {
            if mean_ground(&layout, s.y1) < threshold {
                t_stop = Some(bisect_event(s, |y| mean_ground(&layout, y) - threshold, &mut scratch));
            }
        }
        let limit = t_stop.unwrap_or(s.t1);
        loop {
            let t = t0 + k_next as f64 * recording.stride;
            if t > limit {
                break;
            }
            s.eval(t, &mut scratch);
            push(t, &scratch, &mut times, &mut data);
            k_next += 1;
        }
        match t_stop {
            Some(t) => {
                stop_time = Some(t);
                ControlFlow::Break(t)
            }
            None => ControlFlow::Continue(()),
        }
    };
    let outcome = integrate(&sys, t0, &y0, controls, &mut observer)?;
    if times.last().is_some_and(|&t| outcome.t > t) {
        push(outcome.t, &outcome.y, &mut times, &mut data);
    }
    Ok(Trajectory {
        params: *model.params(),
        scenario,
        times,
        columns,
        data,
        stats: outcome.stats,
        final_state: layout.unpack(&outcome.y, outcome.t),
        stop_time,
        max_population_drift: (!layout.closed).then_some(drift),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn free_space() -> Model {
        let p = Params {
            omega: 1.0,
            delta_a: 10.0,
            omega_rec: 0.5,
            ..Params::default()
        };
        Model::new(p, Scenario::FreeSpaceClosed).unwrap()
    }

    #[test]
    fn stationary_emitter_relaxes_to_fixed_point() {
        // w = 0 with negligible recoil keeps θ = 0 (antinode).
        let mut p = *free_space().params();
        p.omega_rec = 1e-12;
        let m = Model::new(p, Scenario::FreeSpaceClosed).unwrap();
        let rec = Recording {
            stride: 1.0,
            observables: vec![Observable::W],
        };
        let tr = simulate(&m, &SystemState::single(0.0, 0.0), &Controls::new(40.0), &rec, None).unwrap();
        let beta = tr.final_state.emitters[0].beta;
        let fixed = -Complex64::new(0.0, 1.0) / Complex64::new(1.0, 10.0);
        assert!((beta - fixed).norm() < 1e-7 * fixed.norm(), "{beta} vs {fixed}");
    }

    #[test]
    fn recording_grid_and_columns() {
        let rec = Recording {
            stride: 0.25,
            observables: vec![Observable::W, Observable::Theta],
        };
        let tr = simulate(&free_space(), &SystemState::single(0.0, 3.0), &Controls::new(10.0), &rec, None).unwrap();
        assert_eq!(tr.columns, ["w_0", "theta_0"]);
        assert_eq!(tr.len(), 41);
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(*tr.times.last().unwrap(), 10.0);
        assert!(tr.max_population_drift.is_none());
        // θ advances by roughly w·t; the dipole potential modulates w by a
        // few percent.
        let theta = tr.column("theta_0").unwrap();
        assert!((theta[40] / 30.0 - 1.0).abs() < 0.05, "{}", theta[40]);
        let w = tr.column("w_0").unwrap();
        assert!(w.iter().all(|w| (w - 3.0).abs() < 0.3));
    }

    #[test]
    fn incompatible_observables_rejected() {
        let rec = Recording {
            stride: 1.0,
            observables: vec![Observable::MeanNg],
        };
        let err = simulate(&free_space(), &SystemState::single(0.0, 3.0), &Controls::new(1.0), &rec, None)
            .unwrap_err();
        assert!(err.to_string().contains("recording.observables"));
    }

    #[test]
    fn stop_rule_fires() {
        let p = Params {
            gamma: 0.85,
            gamma_prime: 0.15,
            omega: 2.0,
            delta_a: 1.0,
            omega_rec: 0.04,
            ..Params::default()
        };
        let m = Model::new(p, Scenario::FreeSpaceNonClosed).unwrap();
        let rec = Recording {
            stride: 1.0,
            observables: vec![Observable::Ng],
        };
        let tr = simulate(
            &m,
            &SystemState::single(0.0, 0.2),
            &Controls::new(1e5),
            &rec,
            Some(StopRule::GroundBelow(0.5)),
        )
        .unwrap();
        let t = tr.stop_time.unwrap();
        assert!((tr.final_state.emitters[0].n_g - 0.5).abs() < 1e-8);
        assert_eq!(*tr.times.last().unwrap(), t);
        assert!(tr.max_population_drift.unwrap() < 1e-9);
    }
}
