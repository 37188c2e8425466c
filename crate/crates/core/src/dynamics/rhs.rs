//! Mean-field right-hand sides on the flat layout of [`crate::state::Layout`].
//!
//! Free space:
//!   β̇ = −(γ_tot + iΔ_a)β − iΩ cos θ·s,   ẇ = 4ω_rec Ω sin θ Re β,   θ̇ = w
//! Cavity:
//!   α̇ = −(κ + iΔ_c)α − ig Σ_j cos θ_j β_j − η
//!   β̇_j = −(γ_tot + iΔ_a)β_j − ig cos θ_j α·s_j
//!   ẇ_j = 4ω_rec g sin θ_j Re(β_j α*)
//! with inversion factor s = 1 for closed transitions and s = n_g − n_e
//! otherwise. Non-closed emitters also carry
//!   ṅ_g = 2γ n_e − R,  ṅ_e = −2γ_tot n_e + R,  ṅ_i = 2γ′ n_e
//! where R is the excitation rate (−2Ω cos θ Im β in free space,
//! −2g cos θ Im(βα*) in the cavity).

use num_complex::Complex64;

use crate::model::Model;
use crate::state::{Layout, SystemState};

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]);
    fn component_name(&self, i: usize) -> String {
        format!("y[{i}]")
    }
}

/// Coefficients of one mean-field system, copied out of a [`Model`] so the
/// hot loop touches only plain fields.
#[derive(Debug, Clone, Copy)]
pub struct MeanField {
    pub layout: Layout,
    gamma: f64,
    gamma_prime: f64,
    gamma_tot: f64,
    delta_a: f64,
    delta_c: f64,
    kappa: f64,
    g: f64,
    eta: f64,
    omega: f64,
    omega_rec: f64,
}

impl MeanField {
    pub fn new(model: &Model) -> Self {
        let p = model.params();
        MeanField {
            layout: Layout::new(model.scenario(), model.n_emitters()),
            gamma: p.gamma,
            gamma_prime: p.gamma_prime,
            gamma_tot: p.gamma_tot(),
            delta_a: p.delta_a,
            delta_c: p.delta_c,
            kappa: p.kappa,
            g: p.g,
            eta: p.eta,
            omega: p.omega,
            omega_rec: p.omega_rec,
        }
    }

    /// Free-space emitters are independent; one kernel serves both level
    /// schemes.
    fn free_space<const CLOSED: bool>(&self, y: &[f64], dy: &mut [f64]) {
        let b = self.layout.block();
        let decay = Complex64::new(self.gamma_tot, self.delta_a);
        for (e, d) in y.chunks_exact(b).zip(dy.chunks_exact_mut(b)) {
            let beta = Complex64::new(e[0], e[1]);
            let (theta, w) = (e[b - 2], e[b - 1]);
            let (sin, cos) = theta.sin_cos();
            let drive = self.omega * cos;
            let inversion = if CLOSED { 1.0 } else { e[2] - e[3] };
            let d_beta = -decay * beta - Complex64::new(0.0, drive * inversion);
            d[0] = d_beta.re;
            d[1] = d_beta.im;
            if !CLOSED {
                let n_e = e[3];
                let excitation = -2.0 * drive * beta.im;
                d[2] = 2.0 * self.gamma * n_e - excitation;
                d[3] = -2.0 * self.gamma_tot * n_e + excitation;
                d[4] = 2.0 * self.gamma_prime * n_e;
            }
            d[b - 2] = w;
            d[b - 1] = 4.0 * self.omega_rec * self.omega * sin * beta.re;
        }
    }

    fn cavity<const CLOSED: bool>(&self, y: &[f64], dy: &mut [f64]) {
        let b = self.layout.block();
        let alpha = Complex64::new(y[0], y[1]);
        let decay = Complex64::new(self.gamma_tot, self.delta_a);
        let (head, emitters) = dy.split_at_mut(2);
        // Fixed emitter order keeps the field sum deterministic.
        let mut source = Complex64::new(0.0, 0.0);
        for (e, d) in y[2..].chunks_exact(b).zip(emitters.chunks_exact_mut(b)) {
            let beta = Complex64::new(e[0], e[1]);
            let (theta, w) = (e[b - 2], e[b - 1]);
            let (sin, cos) = theta.sin_cos();
            let gc = self.g * cos;
            let inversion = if CLOSED { 1.0 } else { e[2] - e[3] };
            let d_beta = -decay * beta - Complex64::new(0.0, gc * inversion) * alpha;
            d[0] = d_beta.re;
            d[1] = d_beta.im;
            let beta_alpha = beta * alpha.conj();
            if !CLOSED {
                let n_e = e[3];
                let excitation = -2.0 * gc * beta_alpha.im;
                d[2] = 2.0 * self.gamma * n_e - excitation;
                d[3] = -2.0 * self.gamma_tot * n_e + excitation;
                d[4] = 2.0 * self.gamma_prime * n_e;
            }
            d[b - 2] = w;
            d[b - 1] = 4.0 * self.omega_rec * self.g * sin * beta_alpha.re;
            source += gc * beta;
        }
        let d_alpha = -Complex64::new(self.kappa, self.delta_c) * alpha
            - Complex64::new(0.0, 1.0) * source
            - self.eta;
        head[0] = d_alpha.re;
        head[1] = d_alpha.im;
    }
}

impl OdeSystem for MeanField {
    fn dim(&self) -> usize {
        self.layout.dim()
    }

    fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
        match (self.layout.cavity, self.layout.closed) {
            (true, true) => self.cavity::<true>(y, dy),
            (true, false) => self.cavity::<false>(y, dy),
            (false, true) => self.free_space::<true>(y, dy),
            (false, false) => self.free_space::<false>(y, dy),
        }
    }

    fn component_name(&self, i: usize) -> String {
        self.layout.component_name(i)
    }
}

fn derivative(model: &Model, state: &SystemState) -> SystemState {
    let sys = MeanField::new(model);
    let y = sys
        .layout
        .pack(state)
        .expect("state matches the model's emitter count");
    let mut dy = vec![0.0; y.len()];
    sys.rhs(state.t, &y, &mut dy);
    let mut d = sys.layout.unpack(&dy, state.t);
    if sys.layout.closed {
        for e in &mut d.emitters {
            (e.n_g, e.n_e, e.n_i) = (0.0, 0.0, 0.0);
        }
    }
    d
}

macro_rules! structured_rhs {
    ($(#[$doc:meta])* $name:ident, $scenario:ident) => {
        $(#[$doc])*
        ///
        /// Returns the time derivative with the same shape as `state`.
        /// Panics if `model` is not of the matching scenario or the emitter
        /// count disagrees.
        pub fn $name(state: &SystemState, model: &Model) -> SystemState {
            assert_eq!(model.scenario(), crate::model::Scenario::$scenario);
            derivative(model, state)
        }
    };
}

structured_rhs!(
    /// Closed two-level emitter in a free-space standing wave.
    rhs_free_space_closed,
    FreeSpaceClosed
);
structured_rhs!(
    /// Closed emitter coupled to a driven lossy cavity mode.
    rhs_cavity_closed,
    CavityClosed
);
structured_rhs!(
    /// Free-space emitter leaking to a dark level.
    rhs_free_space_nonclosed,
    FreeSpaceNonClosed
);
structured_rhs!(
    /// Cavity-coupled emitter leaking to a dark level.
    rhs_cavity_nonclosed,
    CavityNonClosed
);
structured_rhs!(
    /// N closed emitters sharing one cavity mode.
    rhs_cavity_closed_many,
    CavityClosedMany
);
structured_rhs!(
    /// N non-closed emitters sharing one cavity mode.
    rhs_cavity_nonclosed_many,
    CavityNonClosedMany
);

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Params, Scenario};
    use crate::state::EmitterState;

    fn emitter(beta: (f64, f64), theta: f64, w: f64) -> EmitterState {
        EmitterState {
            beta: Complex64::new(beta.0, beta.1),
            n_g: 0.8,
            n_e: 0.15,
            n_i: 0.05,
            theta,
            w,
        }
    }

    fn cavity_params(n: usize) -> Params {
        Params {
            gamma: 0.7,
            gamma_prime: 0.3,
            g: 7.5,
            kappa: 375.0,
            delta_a: 10.0,
            delta_c: 10.0,
            eta: 50.0,
            omega_rec: 0.5,
            n_emitters: n,
            ..Params::default()
        }
    }

    #[test]
    fn node_has_no_drive() {
        let p = Params {
            omega: 1.0,
            delta_a: 10.0,
            omega_rec: 0.5,
            ..Params::default()
        };
        let m = Model::new(p, Scenario::FreeSpaceClosed).unwrap();
        let d = rhs_free_space_closed(&SystemState::single(std::f64::consts::FRAC_PI_2, 3.0), &m);
        assert!(d.emitters[0].beta.norm() < 1e-16);
        assert_eq!(d.emitters[0].theta, 3.0);
        assert_eq!(d.emitters[0].w, 0.0);
    }

    #[test]
    fn populations_conserved() {
        let mut p = cavity_params(1);
        let m = Model::new(p, Scenario::CavityNonClosed).unwrap();
        let mut s = SystemState::new(vec![emitter((0.1, -0.3), 0.4, 1.0)]);
        s.alpha = Complex64::new(-0.1, 0.05);
        let d = rhs_cavity_nonclosed(&s, &m);
        assert!(d.emitters[0].population_sum().abs() < 1e-15);

        p.omega = 0.9;
        let m = Model::new(p, Scenario::FreeSpaceNonClosed).unwrap();
        let d = rhs_free_space_nonclosed(&SystemState::new(vec![emitter((0.2, 0.1), 1.0, 0.5)]), &m);
        assert!(d.emitters[0].population_sum().abs() < 1e-15);

        p.n_emitters = 3;
        let m = Model::new(p, Scenario::CavityNonClosedMany).unwrap();
        let s = SystemState::new(vec![
            emitter((0.1, 0.2), 0.3, 1.0),
            emitter((-0.1, 0.0), 2.0, 1.4),
            emitter((0.0, 0.3), 4.0, 1.6),
        ]);
        for e in rhs_cavity_nonclosed_many(&s, &m).emitters {
            assert!(e.population_sum().abs() < 1e-15);
        }
    }

    #[test]
    fn no_drive_no_motion_change() {
        let mut p = cavity_params(1);
        p.gamma_prime = 0.0;
        p.eta = 0.0;
        let m = Model::new(p, Scenario::CavityClosed).unwrap();
        let d = rhs_cavity_closed(&SystemState::single(0.3, 2.0), &m);
        assert_eq!(d.alpha, Complex64::new(0.0, 0.0));
        assert_eq!(d.emitters[0].beta, Complex64::new(0.0, 0.0));
        assert_eq!(d.emitters[0].w, 0.0);

        // Empty cavity field exerts no force on an uncoupled emitter.
        p.eta = 50.0;
        p.g = 0.0;
        let m = Model::new(p, Scenario::CavityClosed).unwrap();
        let mut s = SystemState::single(0.3, 2.0);
        s.alpha = Complex64::new(0.1, -0.13);
        s.emitters[0].beta = Complex64::new(0.2, 0.1);
        assert_eq!(rhs_cavity_closed(&s, &m).emitters[0].w, 0.0);
    }

    #[test]
    fn cavity_with_frozen_field_is_free_space() {
        // A real field α = Ω/g acts exactly like the free-space drive Ω.
        let omega = 0.8;
        let mut p = cavity_params(1);
        p.gamma_prime = 0.0;
        let cav = Model::new(p, Scenario::CavityClosed).unwrap();
        let fs = Model::new(
            Params {
                omega,
                ..*cav.free_space_twin().params()
            },
            Scenario::FreeSpaceClosed,
        )
        .unwrap();
        let mut s = SystemState::single(0.9, 1.3);
        s.emitters[0].beta = Complex64::new(0.03, -0.2);
        let d_fs = rhs_free_space_closed(&s, &fs);
        s.alpha = Complex64::new(omega / p.g, 0.0);
        let d_cav = rhs_cavity_closed(&s, &cav);
        let (a, b) = (d_fs.emitters[0], d_cav.emitters[0]);
        assert!((a.beta - b.beta).norm() < 1e-15);
        assert!((a.w - b.w).abs() < 1e-15);
        assert_eq!(a.theta, b.theta);
    }

    #[test]
    fn single_and_many_agree_for_one_emitter() {
        let p = cavity_params(1);
        let mut s = SystemState::new(vec![emitter((0.1, -0.2), 0.7, 1.1)]);
        s.alpha = Complex64::new(0.02, 0.3);
        let one = rhs_cavity_nonclosed(&s, &Model::new(p, Scenario::CavityNonClosed).unwrap());
        let many = rhs_cavity_nonclosed_many(&s, &Model::new(p, Scenario::CavityNonClosedMany).unwrap());
        assert_eq!(one, many);

        let mut q = p;
        q.gamma_prime = 0.0;
        let one = rhs_cavity_closed(&s, &Model::new(q, Scenario::CavityClosed).unwrap());
        let many = rhs_cavity_closed_many(&s, &Model::new(q, Scenario::CavityClosedMany).unwrap());
        assert_eq!(one, many);
    }

    #[test]
    fn permuting_emitters_permutes_derivatives() {
        let p = cavity_params(3);
        let m = Model::new(p, Scenario::CavityNonClosedMany).unwrap();
        let es = [
            emitter((0.1, 0.2), 0.3, 1.0),
            emitter((-0.1, 0.0), 2.0, 1.4),
            emitter((0.0, 0.3), 4.0, 1.6),
        ];
        let mut s = SystemState::new(es.to_vec());
        s.alpha = Complex64::new(0.1, 0.1);
        let d = rhs_cavity_nonclosed_many(&s, &m);
        s.emitters = vec![es[2], es[0], es[1]];
        let dp = rhs_cavity_nonclosed_many(&s, &m);
        assert_eq!(dp.emitters[0], d.emitters[2]);
        assert_eq!(dp.emitters[1], d.emitters[0]);
        assert_eq!(dp.emitters[2], d.emitters[1]);
        assert!((dp.alpha - d.alpha).norm() < 1e-15);
    }
}
