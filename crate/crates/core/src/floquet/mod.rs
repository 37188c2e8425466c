//! Steady-state Floquet coefficients of the emitter coherence.
//!
//! β is expanded in spatial harmonics e^{inθ}; only odd harmonics are
//! driven. Velocity dependence is written b_{±1} ≈ b⁽⁰⁾ ± kv·b⁽¹⁾, and the
//! spatially averaged friction rate is ξ = 4ω_rec Im(b⁽¹⁾Ω*).
//!
//! The cavity solvers use the scaled coupling c = g²/(4κ) and require the
//! cavity to be resonant with the emitter (Δ_c = Δ_a).

pub mod oracle;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Model;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Largest harmonic index returned by the infinite-order solver.
pub const MAX_ORDER: usize = 401;
/// Truncation target |λ|^{(order+1)/2} for the default order.
pub const TRUNCATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FloquetSolution {
    pub b_minus: Complex64,
    pub b_plus: Complex64,
    pub b0: Complex64,
    pub b1: Complex64,
    /// b⁽⁰⁾_{2n+1} for n ≥ 1.
    pub higher: Vec<Complex64>,
    pub lambda: Option<Complex64>,
    /// False when γ_tot C/(4Δ_a) ≥ 1 and the two-sideband truncation is
    /// not trustworthy.
    pub truncation_ok: bool,
}

impl FloquetSolution {
    /// Friction rate implied by the linear-response coefficient.
    pub fn friction(&self, model: &Model) -> f64 {
        4.0 * model.params().omega_rec * (self.b1 * model.drive().conj()).im
    }
}

/// Scaled coupling c = g²/(4κ); zero in free space.
pub fn coupling(model: &Model) -> f64 {
    if model.scenario().is_cavity() {
        let p = model.params();
        p.g * p.g / (4.0 * p.kappa)
    } else {
        0.0
    }
}

/// γ_tot + iΔ_a.
fn bare_width(model: &Model) -> Complex64 {
    Complex64::new(model.gamma_tot(), model.params().delta_a)
}

fn require_resonant(model: &Model) -> Result<()> {
    let delta = model.params().cavity_emitter_detuning();
    if model.scenario().is_cavity() && delta != 0.0 {
        return Err(Error::Unsupported(format!(
            "cavity Floquet solvers need delta_c == delta_a, got delta_c - delta_a = {delta}"
        )));
    }
    Ok(())
}

fn truncation_ok(model: &Model) -> bool {
    crate::analytics::regime_parameter(model) < 1.0
}

/// Free-space coefficients b_{±1} = −iΩ/(2[γ_tot + i(Δ_a ± kv)]).
pub fn floquet_free_space(model: &Model, kv: f64) -> FloquetSolution {
    let half = -I * model.drive() / 2.0;
    let z = bare_width(model);
    FloquetSolution {
        b_minus: half / (z - I * kv),
        b_plus: half / (z + I * kv),
        b0: half / z,
        b1: -model.drive() / (2.0 * z * z),
        higher: Vec::new(),
        lambda: None,
        truncation_ok: true,
    }
}

/// Two-sideband cavity solution (b_{±3} and beyond dropped).
pub fn floquet_cavity_2x2(model: &Model, kv: f64) -> Result<FloquetSolution> {
    require_resonant(model)?;
    let c = coupling(model);
    let half = -I * model.drive() / 2.0;
    let z = bare_width(model);
    let d_plus = z + c + I * kv;
    let d_minus = z + c - I * kv;
    let det = d_plus * d_minus + c * (d_plus + d_minus);
    let d1 = z + c;
    let d3 = z + 3.0 * c;
    Ok(FloquetSolution {
        b_minus: half * d_plus / det,
        b_plus: half * d_minus / det,
        b0: half / d3,
        b1: -model.drive() / (2.0 * d1 * d3),
        higher: Vec::new(),
        lambda: None,
        truncation_ok: truncation_ok(model),
    })
}

/// In-disk root of cλ² + aλ + c = 0.
///
/// Both candidate denominators are formed with the principal square root;
/// the one of larger modulus gives the small root c/q without cancellation.
pub fn toeplitz_root(a: Complex64, c: f64) -> Result<Complex64> {
    if !(c > 0.0) {
        return Err(Error::InvalidParams(format!(
            "Toeplitz coupling must be > 0, got {c}"
        )));
    }
    let disc = (a * a - 4.0 * c * c).sqrt();
    let q1 = -(a + disc) / 2.0;
    let q2 = -(a - disc) / 2.0;
    let q = if q1.norm() >= q2.norm() { q1 } else { q2 };
    let lambda = c / q;
    if !(lambda.norm() < 1.0) {
        return Err(Error::Singular(format!(
            "Toeplitz roots lie on the unit circle (|lambda| = {})",
            lambda.norm()
        )));
    }
    Ok(lambda)
}

/// λ for the resonant cavity: root with |λ| < 1 of
/// cλ² + (γ_tot + iΔ_a + 2c)λ + c = 0.
pub fn toeplitz_lambda(model: &Model) -> Result<Complex64> {
    let c = coupling(model);
    toeplitz_root(bare_width(model) + 2.0 * c, c)
}

/// Smallest odd order with |λ|^{(order+1)/2} below [`TRUNCATION_TOL`],
/// capped at [`MAX_ORDER`].
pub fn default_order(lambda: Complex64) -> usize {
    let r = lambda.norm();
    if r == 0.0 {
        return 1;
    }
    let n = (TRUNCATION_TOL.ln() / r.ln()).ceil().max(1.0) as usize;
    (2 * n - 1).min(MAX_ORDER)
}

/// Closed-form solution of the untruncated recursion up to harmonic `order`
/// (odd). `None` picks [`default_order`].
pub fn floquet_cavity_infinite(model: &Model, order: Option<usize>) -> Result<FloquetSolution> {
    require_resonant(model)?;
    let c = coupling(model);
    let lambda = toeplitz_lambda(model)?;
    let order = order.unwrap_or_else(|| default_order(lambda));
    if order % 2 == 0 || order > MAX_ORDER {
        return Err(Error::InvalidParams(format!(
            "order must be odd and <= {MAX_ORDER}, got {order}"
        )));
    }
    let omega = model.drive();
    let scale = -I * omega / (2.0 * c) / (lambda - 1.0);
    let mut coeffs = Vec::with_capacity(order.div_ceil(2));
    let mut power = lambda;
    for _ in 0..order.div_ceil(2) {
        coeffs.push(scale * power);
        power *= lambda;
    }
    let l2 = lambda * lambda;
    let b1 = omega / (2.0 * c * c) * l2 * (l2 + 1.0) / (l2 - 1.0).powi(3);
    let b0 = coeffs[0];
    Ok(FloquetSolution {
        b_minus: b0,
        b_plus: b0,
        b0,
        b1,
        higher: coeffs[1..].to_vec(),
        lambda: Some(lambda),
        truncation_ok: true,
    })
}

/// N-emitter coefficients via Sherman–Morrison:
/// b_{j,±} = −iΩ/2 / d_{j,±} / (1 + c Σ_{i,s} 1/d_{i,s}),
/// d_{j,±} = γ_tot + c + i(Δ_a ± kv_j).
///
/// The expanded pieces use the collective width γ_tot + (2N+1)c.
pub fn floquet_many_sherman_morrison(model: &Model, kv: &[f64]) -> Result<Vec<FloquetSolution>> {
    require_resonant(model)?;
    if kv.is_empty() {
        return Err(Error::InvalidParams("need at least one emitter".into()));
    }
    let c = coupling(model);
    let half = -I * model.drive() / 2.0;
    let z = bare_width(model);
    let d1 = z + c;

    // Left-to-right reduction keeps the sum independent of scheduling; each
    // sideband pair is added as a unit so that v → −v is exact.
    let mut sum = Complex64::new(0.0, 0.0);
    for &v in kv {
        sum += (d1 - I * v).inv() + (d1 + I * v).inv();
    }
    let collective = 1.0 + c * sum;
    let dn = z + (2 * kv.len() + 1) as f64 * c;
    let b0 = half / dn;
    let b1 = -model.drive() / (2.0 * d1 * dn);
    let ok = truncation_ok(model);
    Ok(kv
        .iter()
        .map(|&v| FloquetSolution {
            b_minus: half / (d1 - I * v) / collective,
            b_plus: half / (d1 + I * v) / collective,
            b0,
            b1,
            higher: Vec::new(),
            lambda: None,
            truncation_ok: ok,
        })
        .collect())
}

/// Spatially averaged adiabatic cavity amplitude
/// α = −η/(κ + iΔ_c) − (ig/κ) Σ_j b⁽⁰⁾_j.
pub fn cavity_amplitude_adiabatic(model: &Model, solutions: &[FloquetSolution]) -> Result<Complex64> {
    require_resonant(model)?;
    let p = model.params();
    if !(p.kappa > 0.0) {
        return Err(Error::InvalidParams("kappa must be > 0".into()));
    }
    let empty = -p.eta / Complex64::new(p.kappa, p.delta_c);
    let mut sum = Complex64::new(0.0, 0.0);
    for s in solutions {
        sum += s.b0;
    }
    Ok(empty - I * p.g / p.kappa * sum)
}
