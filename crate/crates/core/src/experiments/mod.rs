//! Drivers that turn the library into data artifacts: figure
//! reproductions, parameter sweeps and the oracle validation suite.

pub mod drivers;
pub mod figures;
pub mod output;
pub mod sweep;
pub mod validate;

use std::path::Path;

use crate::config::RunConfig;
use crate::dynamics::{fit_cooling_rate, simulate, FitReport, Trajectory, WindowPolicy};
use crate::error::Result;
use crate::model::Model;

pub use drivers::{rate_report, simulate_artifacts, RateReport};
pub use figures::{run_figure, FigureName};
pub use output::{ArtifactRecord, Cell, ManifestInfo, Metric, Table};
pub use sweep::{run_sweep, Axis, SweepSpec};
pub use validate::{run_validate, Check, ValidationReport};

/// Ground-state population at which a non-closed run counts as finished.
pub const FINAL_NG_THRESHOLD: f64 = 1e-4;
/// Lower edge of the friction-fit window in units of the separatrix
/// velocity: kinetic energy at least 9× the dipole-potential depth.
pub const FIT_WINDOW_SEPARATRIX_FACTOR: f64 = 3.0;
/// Maximum number of rows written for a recorded trajectory.
pub const MAX_CSV_ROWS: usize = 20_000;

/// Tables, run configurations and headline numbers of one driver call.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub name: String,
    pub kind: String,
    pub tables: Vec<Table>,
    pub runs: Vec<(String, RunConfig)>,
    pub summary: Vec<Metric>,
    pub notes: Vec<String>,
}

impl Artifacts {
    pub fn new(kind: &str, name: &str) -> Self {
        Artifacts {
            name: name.into(),
            kind: kind.into(),
            ..Artifacts::default()
        }
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.summary.iter().find(|m| m.key == key).map(|m| m.value)
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.file == file)
    }

    pub fn set(&mut self, key: &str, value: f64) {
        match self.summary.iter_mut().find(|m| m.key == key) {
            Some(m) => m.value = value,
            None => self.summary.push(Metric {
                key: key.into(),
                value,
            }),
        }
    }

    pub fn manifest_file(&self) -> String {
        format!("{}.manifest.toml", self.name)
    }

    /// Writes every table and then the manifest; returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf> {
        let artifacts = self
            .tables
            .iter()
            .map(|t| output::write_table(dir, t))
            .collect::<Result<Vec<_>>>()?;
        let info = ManifestInfo {
            kind: self.kind.clone(),
            name: self.name.clone(),
            artifacts,
            summary: self.summary.clone(),
            notes: self.notes.clone(),
        };
        let text = if self.runs.len() == 1 {
            output::run_manifest(&self.runs[0].1, &info)?
        } else {
            output::group_manifest(&self.runs, &info)?
        };
        let path = dir.join(self.manifest_file());
        output::write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Integrates a configuration from its initial state.
pub fn run(config: &RunConfig) -> Result<Trajectory> {
    simulate(
        &config.model(),
        &config.initial_state(),
        &config.controls(),
        &config.recording,
        config.integrator.stop_rule(),
    )
}

/// Velocity swing √(4ω_rec|Ω|²|Δ_a|/(γ_tot² + Δ_a²)) across the dipole
/// potential; below it an emitter is trapped in a single cell.
pub fn separatrix_velocity(model: &Model) -> f64 {
    let p = model.params();
    let gamma = model.gamma_tot();
    let depth = model.drive_sq() * p.delta_a.abs() / (gamma * gamma + p.delta_a * p.delta_a);
    (4.0 * p.omega_rec * depth).sqrt()
}

/// Fit window for the friction rate: small Doppler shift (|w| ≤ 0.3|Δ_a|)
/// and far above the trapping threshold.
pub fn fit_window(model: &Model) -> WindowPolicy {
    WindowPolicy {
        w_max: crate::analytics::SMALL_DOPPLER_FRACTION * model.params().delta_a.abs(),
        w_min: FIT_WINDOW_SEPARATRIX_FACTOR * separatrix_velocity(model),
        ..WindowPolicy::default()
    }
}

/// Friction fit of emitter 0 using [`fit_window`].
pub fn fit_trajectory(model: &Model, tr: &Trajectory) -> Result<FitReport> {
    let missing = |c: &str| crate::Error::Fit(format!("trajectory has no `{c}` column"));
    let w = tr.column("w_0").ok_or_else(|| missing("w_0"))?;
    let theta = tr.column("theta_0").ok_or_else(|| missing("theta_0"))?;
    fit_cooling_rate(&tr.times, theta, w, &fit_window(model))
}

/// Every k-th row (always including the last) so that at most `max_rows`
/// remain.
pub fn decimate_indices(len: usize, max_rows: usize) -> Vec<usize> {
    if len <= max_rows || max_rows < 2 {
        return (0..len).collect();
    }
    let k = (len - 1).div_ceil(max_rows - 1);
    let mut idx: Vec<usize> = (0..len).step_by(k).collect();
    if *idx.last().unwrap() != len - 1 {
        idx.push(len - 1);
    }
    idx
}

/// Trajectory as a table (`t` plus recorded columns) with extra series
/// evaluated on the same grid, decimated to [`MAX_CSV_ROWS`].
pub fn trajectory_table(file: &str, tr: &Trajectory, extra: Vec<(String, Vec<f64>)>) -> Table {
    let idx = decimate_indices(tr.len(), MAX_CSV_ROWS);
    let pick = |v: &[f64]| idx.iter().map(|&i| v[i]).collect::<Vec<f64>>();
    let mut series = vec![("t".to_string(), pick(&tr.times))];
    for (name, data) in tr.columns.iter().zip(&tr.data) {
        series.push((name.clone(), pick(data)));
    }
    for (name, data) in extra {
        series.push((name, pick(&data)));
    }
    Table::from_columns(file, series)
}

/// Normalized sup-norm error ‖a − b‖∞ / ‖b‖∞.
pub fn linf_relative(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut num: f64 = 0.0;
    let mut den: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        num = num.max((x - y).abs());
        den = den.max(y.abs());
    }
    num / den
}

/// Largest pointwise relative error max |a − b|/|b|.
pub fn max_pointwise_relative(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimation_keeps_ends() {
        assert_eq!(decimate_indices(5, 10), vec![0, 1, 2, 3, 4]);
        let idx = decimate_indices(10_001, 101);
        assert_eq!(idx.len(), 101);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 10_000);
        let idx = decimate_indices(1000, 7);
        assert!(idx.len() <= 8 && *idx.last().unwrap() == 999);
    }

    #[test]
    fn norms() {
        assert!((linf_relative(&[1.0, 2.1], &[1.0, 2.0]) - 0.05).abs() < 1e-12);
        assert!((max_pointwise_relative(&[1.1, 2.0], &[1.0, 2.0]) - 0.1).abs() < 1e-12);
    }
}
