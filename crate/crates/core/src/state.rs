//! Structured system state and its flat ODE layout.
//!
//! Complex amplitudes are stored as (re, im) pairs. Cavity scenarios start
//! with α; every emitter then occupies a fixed-size block:
//! closed `[β.re, β.im, θ, w]`, non-closed `[β.re, β.im, n_g, n_e, n_i, θ, w]`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmitterState {
    pub beta: Complex64,
    pub n_g: f64,
    pub n_e: f64,
    pub n_i: f64,
    pub theta: f64,
    pub w: f64,
}

impl EmitterState {
    /// Emitter in the ground state with no coherence.
    pub fn at_rest(theta: f64, w: f64) -> Self {
        EmitterState {
            beta: Complex64::new(0.0, 0.0),
            n_g: 1.0,
            n_e: 0.0,
            n_i: 0.0,
            theta,
            w,
        }
    }

    pub fn population_sum(&self) -> f64 {
        self.n_g + self.n_e + self.n_i
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemState {
    pub alpha: Complex64,
    pub emitters: Vec<EmitterState>,
    pub t: f64,
}

impl SystemState {
    pub fn new(emitters: Vec<EmitterState>) -> Self {
        SystemState {
            alpha: Complex64::new(0.0, 0.0),
            emitters,
            t: 0.0,
        }
    }

    pub fn single(theta: f64, w: f64) -> Self {
        SystemState::new(vec![EmitterState::at_rest(theta, w)])
    }
}

/// Offsets of the flat vector for a scenario and emitter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub cavity: bool,
    pub closed: bool,
    pub n_emitters: usize,
}

impl Layout {
    pub fn new(scenario: Scenario, n_emitters: usize) -> Self {
        Layout {
            cavity: scenario.is_cavity(),
            closed: scenario.is_closed(),
            n_emitters,
        }
    }

    pub fn header(&self) -> usize {
        if self.cavity {
            2
        } else {
            0
        }
    }

    pub fn block(&self) -> usize {
        if self.closed {
            4
        } else {
            7
        }
    }

    pub fn dim(&self) -> usize {
        self.header() + self.block() * self.n_emitters
    }

    pub fn emitter(&self, j: usize) -> usize {
        self.header() + self.block() * j
    }

    pub fn theta(&self, j: usize) -> usize {
        self.emitter(j) + self.block() - 2
    }

    pub fn w(&self, j: usize) -> usize {
        self.emitter(j) + self.block() - 1
    }

    /// Index of n_g for emitter j; `None` for closed layouts.
    pub fn n_g(&self, j: usize) -> Option<usize> {
        (!self.closed).then(|| self.emitter(j) + 2)
    }

    pub fn alpha(&self, y: &[f64]) -> Complex64 {
        if self.cavity {
            Complex64::new(y[0], y[1])
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    pub fn beta(&self, y: &[f64], j: usize) -> Complex64 {
        let o = self.emitter(j);
        Complex64::new(y[o], y[o + 1])
    }

    /// Name of flat component `i`, for diagnostics.
    pub fn component_name(&self, i: usize) -> String {
        if self.cavity && i < 2 {
            return if i == 0 { "re_alpha" } else { "im_alpha" }.to_string();
        }
        let k = i - self.header();
        let (j, r) = (k / self.block(), k % self.block());
        let names: &[&str] = if self.closed {
            &["re_beta", "im_beta", "theta", "w"]
        } else {
            &["re_beta", "im_beta", "ng", "ne", "ni", "theta", "w"]
        };
        format!("{}_{j}", names[r])
    }

    pub fn pack(&self, state: &SystemState) -> Result<Vec<f64>> {
        if state.emitters.len() != self.n_emitters {
            return Err(Error::InvalidParams(format!(
                "state has {} emitters, layout expects {}",
                state.emitters.len(),
                self.n_emitters
            )));
        }
        let mut y = Vec::with_capacity(self.dim());
        if self.cavity {
            y.extend([state.alpha.re, state.alpha.im]);
        }
        for e in &state.emitters {
            y.extend([e.beta.re, e.beta.im]);
            if !self.closed {
                y.extend([e.n_g, e.n_e, e.n_i]);
            }
            y.extend([e.theta, e.w]);
        }
        Ok(y)
    }

    /// Inverse of [`Layout::pack`]. Closed layouts report the fixed
    /// ground-state populations.
    pub fn unpack(&self, y: &[f64], t: f64) -> SystemState {
        let emitters = (0..self.n_emitters)
            .map(|j| {
                let o = self.emitter(j);
                let (n_g, n_e, n_i) = if self.closed {
                    (1.0, 0.0, 0.0)
                } else {
                    (y[o + 2], y[o + 3], y[o + 4])
                };
                EmitterState {
                    beta: Complex64::new(y[o], y[o + 1]),
                    n_g,
                    n_e,
                    n_i,
                    theta: y[self.theta(j)],
                    w: y[self.w(j)],
                }
            })
            .collect();
        SystemState {
            alpha: self.alpha(y),
            emitters,
            t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_round_trip() {
        for scenario in Scenario::ALL {
            let n = if scenario.is_many() { 3 } else { 1 };
            let layout = Layout::new(scenario, n);
            let mut state = SystemState::new(
                (0..n)
                    .map(|j| EmitterState {
                        beta: Complex64::new(0.1 * j as f64, -0.2),
                        n_g: 0.7,
                        n_e: 0.1,
                        n_i: 0.2,
                        theta: j as f64,
                        w: 1.5 + j as f64,
                    })
                    .collect(),
            );
            if scenario.is_cavity() {
                state.alpha = Complex64::new(0.3, 0.4);
            }
            if scenario.is_closed() {
                for e in &mut state.emitters {
                    (e.n_g, e.n_e, e.n_i) = (1.0, 0.0, 0.0);
                }
            }
            let y = layout.pack(&state).unwrap();
            assert_eq!(y.len(), layout.dim());
            assert_eq!(layout.unpack(&y, 0.0), state);
            assert_eq!(y[layout.w(n - 1)], state.emitters[n - 1].w);
        }
    }

    #[test]
    fn component_names() {
        let l = Layout::new(Scenario::CavityNonClosedMany, 2);
        assert_eq!(l.component_name(0), "re_alpha");
        assert_eq!(l.component_name(2 + 7 + 2), "ng_1");
        let l = Layout::new(Scenario::FreeSpaceClosed, 1);
        assert_eq!(l.component_name(3), "w_0");
    }

    #[test]
    fn wrong_emitter_count_rejected() {
        let l = Layout::new(Scenario::CavityClosedMany, 2);
        assert!(l.pack(&SystemState::single(0.0, 1.0)).is_err());
    }
}
