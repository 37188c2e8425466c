//! Mean-field equations of motion, their integrator, the semi-analytic
//! population equations and rate extraction.

pub mod fit;
pub mod integrator;
pub mod population;
pub mod rhs;
pub mod simulate;

pub use fit::{envelope, first_zero_crossing, fit_cooling_rate, EnvelopePoint, FitReport, WindowPolicy};
pub use integrator::{integrate, Controls, Observer, Outcome, Stats, Step};
pub use population::{
    integrate_population, ng_ode_infinite_order, ng_ode_many, ng_ode_single, PopulationModel,
};
pub use rhs::{
    rhs_cavity_closed, rhs_cavity_closed_many, rhs_cavity_nonclosed, rhs_cavity_nonclosed_many,
    rhs_free_space_closed, rhs_free_space_nonclosed, MeanField, OdeSystem,
};
pub use simulate::{simulate, Observable, Recording, StopRule, Trajectory};
