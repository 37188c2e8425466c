//! Physical parameters and scenario selection.
//!
//! Everything is nondimensional with ħ = 1. Rates are measured in units of a
//! reference rate (γ for closed transitions, γ_tot = γ + γ′ for non-closed
//! ones). Position is stored as the phase θ = kx and velocity as the Doppler
//! shift w = kv, so the mass only enters through the recoil frequency
//! ω_rec = ħk²/2m.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates and detunings of one run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    /// Decay e → g.
    pub gamma: f64,
    /// Decay e → i (zero for closed transitions).
    pub gamma_prime: f64,
    /// Cavity field loss.
    pub kappa: f64,
    /// Peak emitter–cavity coupling.
    pub g: f64,
    /// Δ_a = ω₀ − ω_ℓ.
    pub delta_a: f64,
    /// Δ_c = ω_c − ω_ℓ.
    pub delta_c: f64,
    /// Cavity pump amplitude.
    pub eta: f64,
    /// Free-space Rabi amplitude. Ignored by cavity scenarios, whose drive
    /// follows from η, g, κ and Δ_c.
    pub omega: f64,
    pub omega_rec: f64,
    pub n_emitters: usize,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gamma: 1.0,
            gamma_prime: 0.0,
            kappa: 0.0,
            g: 0.0,
            delta_a: 0.0,
            delta_c: 0.0,
            eta: 0.0,
            omega: 0.0,
            omega_rec: 0.0,
            n_emitters: 1,
        }
    }
}

impl Params {
    pub fn gamma_tot(&self) -> f64 {
        self.gamma + self.gamma_prime
    }

    /// Δ_c − Δ_a; the cavity Floquet solvers require this to vanish.
    pub fn cavity_emitter_detuning(&self) -> f64 {
        self.delta_c - self.delta_a
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    FreeSpaceClosed,
    CavityClosed,
    FreeSpaceNonClosed,
    CavityNonClosed,
    CavityClosedMany,
    CavityNonClosedMany,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::FreeSpaceClosed,
        Scenario::CavityClosed,
        Scenario::FreeSpaceNonClosed,
        Scenario::CavityNonClosed,
        Scenario::CavityClosedMany,
        Scenario::CavityNonClosedMany,
    ];

    pub fn is_cavity(self) -> bool {
        !matches!(
            self,
            Scenario::FreeSpaceClosed | Scenario::FreeSpaceNonClosed
        )
    }

    pub fn is_closed(self) -> bool {
        matches!(
            self,
            Scenario::FreeSpaceClosed | Scenario::CavityClosed | Scenario::CavityClosedMany
        )
    }

    pub fn is_many(self) -> bool {
        matches!(
            self,
            Scenario::CavityClosedMany | Scenario::CavityNonClosedMany
        )
    }

    /// The free-space scenario with the same level scheme.
    pub fn free_space_twin(self) -> Scenario {
        if self.is_closed() {
            Scenario::FreeSpaceClosed
        } else {
            Scenario::FreeSpaceNonClosed
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::FreeSpaceClosed => "FreeSpaceClosed",
            Scenario::CavityClosed => "CavityClosed",
            Scenario::FreeSpaceNonClosed => "FreeSpaceNonClosed",
            Scenario::CavityNonClosed => "CavityNonClosed",
            Scenario::CavityClosedMany => "CavityClosedMany",
            Scenario::CavityNonClosedMany => "CavityNonClosedMany",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::config(
                    "scenario.kind",
                    format!(
                        "unknown kind `{s}`, expected one of {}",
                        Scenario::ALL.map(Scenario::name).join(", ")
                    ),
                )
            })
    }
}

/// Ω = −gη/(κ + iΔ_c) for cavity scenarios, the configured real Ω otherwise.
pub fn effective_drive(params: &Params, scenario: Scenario) -> Result<Complex64> {
    if !scenario.is_cavity() {
        return Ok(Complex64::new(params.omega, 0.0));
    }
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "kappa must be > 0 in cavity scenarios, got {}",
            params.kappa
        )));
    }
    Ok(-params.g * params.eta / Complex64::new(params.kappa, params.delta_c))
}

/// C = g²/(κ γ_tot).
pub fn cooperativity(params: &Params) -> Result<f64> {
    let gamma_tot = params.gamma_tot();
    if !(params.kappa > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cooperativity needs kappa > 0, got {}",
            params.kappa
        )));
    }
    if !(gamma_tot > 0.0) {
        return Err(Error::InvalidParams(format!(
            "cooperativity needs gamma_tot > 0, got {gamma_tot}"
        )));
    }
    Ok(params.g * params.g / (params.kappa * gamma_tot))
}

/// A validated (parameters, scenario) pair.
///
/// Construction enforces every scenario invariant, so downstream code can
/// rely on e.g. γ′ = 0 for closed kinds and κ > 0 for cavity kinds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model {
    params: Params,
    scenario: Scenario,
    drive: Complex64,
}

impl Model {
    pub fn new(params: Params, scenario: Scenario) -> Result<Self> {
        validate(&params, scenario)?;
        let drive = effective_drive(&params, scenario)?;
        Ok(Model {
            params,
            scenario,
            drive,
        })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn n_emitters(&self) -> usize {
        self.params.n_emitters
    }

    pub fn gamma_tot(&self) -> f64 {
        self.params.gamma_tot()
    }

    /// Effective complex drive Ω seen by each emitter.
    pub fn drive(&self) -> Complex64 {
        self.drive
    }

    /// |Ω|².
    pub fn drive_sq(&self) -> f64 {
        self.drive.norm_sqr()
    }

    /// Single-emitter cooperativity; zero in free space.
    pub fn cooperativity(&self) -> f64 {
        if self.scenario.is_cavity() {
            cooperativity(&self.params).unwrap_or(0.0)
        } else {
            0.0
        }
    }

    /// Free-space model with the same level scheme, rates and |Ω|.
    pub fn free_space_twin(&self) -> Model {
        let params = Params {
            omega: self.drive.norm(),
            kappa: 0.0,
            g: 0.0,
            eta: 0.0,
            delta_c: 0.0,
            n_emitters: 1,
            ..self.params
        };
        Model::new(params, self.scenario.free_space_twin())
            .expect("twin of a valid model is valid")
    }

    /// Same model with a single emitter (many-emitter kinds map onto their
    /// single-emitter counterparts).
    pub fn single_emitter(&self) -> Model {
        let scenario = match self.scenario {
            Scenario::CavityClosedMany => Scenario::CavityClosed,
            Scenario::CavityNonClosedMany => Scenario::CavityNonClosed,
            s => s,
        };
        let params = Params {
            n_emitters: 1,
            ..self.params
        };
        Model::new(params, scenario).expect("single-emitter reduction is valid")
    }

    pub fn with_params(&self, params: Params) -> Result<Model> {
        Model::new(params, self.scenario)
    }
}

fn validate(p: &Params, scenario: Scenario) -> Result<()> {
    let bad = |path: &str, reason: String| Err(Error::config(format!("params.{path}"), reason));
    let finite = [
        ("gamma", p.gamma),
        ("gamma_prime", p.gamma_prime),
        ("kappa", p.kappa),
        ("g", p.g),
        ("delta_a", p.delta_a),
        ("delta_c", p.delta_c),
        ("eta", p.eta),
        ("omega", p.omega),
        ("omega_rec", p.omega_rec),
    ];
    for (name, value) in finite {
        if !value.is_finite() {
            return bad(name, format!("must be finite, got {value}"));
        }
    }
    if p.gamma < 0.0 {
        return bad("gamma", format!("must be >= 0, got {}", p.gamma));
    }
    if p.gamma_prime < 0.0 {
        return bad("gamma_prime", format!("must be >= 0, got {}", p.gamma_prime));
    }
    if p.g < 0.0 {
        return bad("g", format!("must be >= 0, got {}", p.g));
    }
    if p.eta < 0.0 {
        return bad("eta", format!("must be >= 0, got {}", p.eta));
    }
    if !(p.omega_rec > 0.0) {
        return bad("omega_rec", format!("must be > 0, got {}", p.omega_rec));
    }
    if !(p.gamma_tot() > 0.0) {
        return bad(
            "gamma",
            format!("gamma + gamma_prime must be > 0, got {}", p.gamma_tot()),
        );
    }
    if p.n_emitters < 1 {
        return bad("n_emitters", "must be >= 1".into());
    }
    if scenario.is_cavity() && !(p.kappa > 0.0) {
        return bad(
            "kappa",
            format!("must be > 0 for {scenario}, got {}", p.kappa),
        );
    }
    if scenario.is_closed() && p.gamma_prime != 0.0 {
        return bad(
            "gamma_prime",
            format!("must be 0 for closed scenario {scenario}, got {}", p.gamma_prime),
        );
    }
    if !scenario.is_many() && p.n_emitters != 1 {
        return bad(
            "n_emitters",
            format!("single-emitter scenario {scenario} requires 1, got {}", p.n_emitters),
        );
    }
    Ok(())
}
