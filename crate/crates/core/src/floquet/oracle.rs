//! Dense reference solves for the structured Floquet solvers.
//!
//! These build the defining linear systems explicitly and solve them with
//! partial-pivoted LU. They are slow and exist to cross-check the closed
//! forms (tests and the `validate` suite).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{bare_width, coupling, FloquetSolution, I};
use crate::error::{Error, Result};
use crate::model::Model;

fn solve(m: DMatrix<Complex64>, rhs: DVector<Complex64>) -> Result<DVector<Complex64>> {
    m.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("dense oracle matrix is singular".into()))
}

fn max_norm(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn relative_residual(m: &DMatrix<Complex64>, x: &DVector<Complex64>, rhs: &DVector<Complex64>) -> f64 {
    max_norm(&(m * x - rhs)) / max_norm(rhs)
}

/// Two-sideband matrix [[a₋, c], [c, a₊]] with a_± = γ_tot + iΔ_a + 2c ± ikv.
fn two_by_two(model: &Model, kv: f64) -> (DMatrix<Complex64>, DVector<Complex64>) {
    let c = Complex64::new(coupling(model), 0.0);
    let a = bare_width(model) + 2.0 * c;
    let m = DMatrix::from_row_slice(2, 2, &[a - I * kv, c, c, a + I * kv]);
    let s = -I * model.drive() / 2.0;
    (m, DVector::from_element(2, s))
}

/// Relative residual of a two-sideband solution in its defining system.
pub fn two_by_two_residual(model: &Model, kv: f64, sol: &FloquetSolution) -> f64 {
    let (m, rhs) = two_by_two(model, kv);
    let x = DVector::from_vec(vec![sol.b_minus, sol.b_plus]);
    relative_residual(&m, &x, &rhs)
}

/// Truncated odd-harmonic recursion on n ∈ {−order, …, order}:
/// (A + ikv·D) b = s(δ_{n,1} + δ_{n,−1}) with D = diag(n).
fn truncated_system(model: &Model, order: usize, kv: f64) -> (DMatrix<Complex64>, DVector<Complex64>, Vec<i64>) {
    let c = Complex64::new(coupling(model), 0.0);
    let a = bare_width(model) + 2.0 * c;
    let harmonics: Vec<i64> = (-(order as i64)..=order as i64).step_by(2).collect();
    let k = harmonics.len();
    let mut m = DMatrix::zeros(k, k);
    let mut rhs = DVector::zeros(k);
    let s = -I * model.drive() / 2.0;
    for (i, &n) in harmonics.iter().enumerate() {
        m[(i, i)] = a + I * kv * n as f64;
        if i > 0 {
            m[(i, i - 1)] = c;
        }
        if i + 1 < k {
            m[(i, i + 1)] = c;
        }
        if n.abs() == 1 {
            rhs[i] = s;
        }
    }
    (m, rhs, harmonics)
}

/// Dense solution of the truncated recursion: (b_n for n = 1, 3, …, order;
/// linear response of b_{+1}, in the b ≈ b⁽⁰⁾ + kv·b⁽¹⁾ convention).
pub fn dense_cavity(model: &Model, order: usize) -> Result<(Vec<Complex64>, Complex64)> {
    let (m, rhs, harmonics) = truncated_system(model, order, 0.0);
    let b = solve(m.clone(), rhs)?;
    // d b/d(kv) = −A⁻¹ (iD) b
    let db_rhs = DVector::from_iterator(
        harmonics.len(),
        harmonics.iter().zip(b.iter()).map(|(&n, &x)| -I * n as f64 * x),
    );
    let db = solve(m, db_rhs)?;
    let first = harmonics.len() / 2;
    let positive = b.iter().skip(first).copied().collect();
    Ok((positive, db[first]))
}

/// Largest relative deviation between the closed-form infinite-order
/// coefficients and a dense solve truncated at the same order.
pub fn infinite_vs_dense(model: &Model, sol: &FloquetSolution) -> Result<f64> {
    let order = 2 * sol.higher.len() + 1;
    let (dense, db1) = dense_cavity(model, order)?;
    let closed: Vec<Complex64> = std::iter::once(sol.b0).chain(sol.higher.iter().copied()).collect();
    let scale = sol.b0.norm();
    let mut worst: f64 = 0.0;
    // Truncation error grows towards the edge; compare the harmonics that
    // the order was chosen for.
    for (x, y) in closed.iter().zip(&dense) {
        worst = worst.max((x - y).norm() / scale);
    }
    worst = worst.max((sol.b1 - db1).norm() / sol.b1.norm());
    Ok(worst)
}

/// Full 2N×2N system with diagonal a_{j,±} = (γ_tot + i(Δ_a ± kv_j))/c + 2,
/// unit off-diagonal and right-hand side −iΩ/(2c). Unknown order is
/// (b_{0,−}, b_{0,+}, b_{1,−}, …).
fn many_system(model: &Model, kv: &[f64]) -> Result<(DMatrix<Complex64>, DVector<Complex64>)> {
    let c = coupling(model);
    if !(c > 0.0) {
        return Err(Error::InvalidParams("dense N-emitter system needs g > 0".into()));
    }
    let z = bare_width(model);
    let k = 2 * kv.len();
    let mut m = DMatrix::from_element(k, k, Complex64::new(1.0, 0.0));
    for (j, &v) in kv.iter().enumerate() {
        m[(2 * j, 2 * j)] = (z - I * v) / c + 2.0;
        m[(2 * j + 1, 2 * j + 1)] = (z + I * v) / c + 2.0;
    }
    let rhs = DVector::from_element(k, -I * model.drive() / (2.0 * c));
    Ok((m, rhs))
}

/// Dense solve of the N-emitter system: per emitter (b_−, b_+).
pub fn dense_many(model: &Model, kv: &[f64]) -> Result<Vec<(Complex64, Complex64)>> {
    let (m, rhs) = many_system(model, kv)?;
    let x = solve(m, rhs)?;
    Ok((0..kv.len()).map(|j| (x[2 * j], x[2 * j + 1])).collect())
}

/// Relative residual of N-emitter solutions in the full dense system.
pub fn many_residual(model: &Model, kv: &[f64], sols: &[FloquetSolution]) -> Result<f64> {
    let (m, rhs) = many_system(model, kv)?;
    let x = DVector::from_iterator(
        2 * sols.len(),
        sols.iter().flat_map(|s| [s.b_minus, s.b_plus]),
    );
    Ok(relative_residual(&m, &x, &rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::{floquet_cavity_infinite, floquet_many_sherman_morrison};
    use crate::model::{Params, Scenario};

    fn cavity(g: f64, kappa: f64, delta: f64, eta: f64, n: usize) -> Model {
        let p = Params {
            g,
            kappa,
            delta_a: delta,
            delta_c: delta,
            eta,
            omega_rec: 1.0,
            n_emitters: n,
            ..Params::default()
        };
        Model::new(p, Scenario::CavityClosedMany).unwrap()
    }

    #[test]
    fn infinite_closed_form_matches_dense() {
        for (g, delta) in [(155.0, 1.0), (155.0, 200.0), (10.0, 0.0), (30.0, -5.0)] {
            let m = cavity(g, 1000.0, delta, 1.0, 1);
            let sol = floquet_cavity_infinite(&m, None).unwrap();
            let delta = infinite_vs_dense(&m, &sol).unwrap();
            assert!(delta < 1e-10, "g={g}: {delta}");
        }
    }

    #[test]
    fn dense_truncation_converges_geometrically() {
        let m = cavity(155.0, 1000.0, 1.0, 1.0, 1);
        let sol = floquet_cavity_infinite(&m, Some(MAX_CHECK)).unwrap();
        let l = sol.lambda.unwrap().norm();
        for order in [1usize, 3, 5, 7, 9] {
            let (dense, _) = dense_cavity(&m, order).unwrap();
            let err = (dense[0] - sol.b0).norm() / sol.b0.norm();
            let bound = 10.0 * l.powi(order as i32 + 1);
            assert!(err < bound.max(1e-14), "order {order}: {err} vs {bound}");
        }
    }
    const MAX_CHECK: usize = 99;

    #[test]
    fn sherman_morrison_matches_dense() {
        let kv: Vec<f64> = (0..64).map(|j| 1.5 + 0.1 * ((j * 37 % 64) as f64 / 32.0 - 1.0)).collect();
        for n in [1usize, 2, 7, 64] {
            let m = cavity(7.5, 375.0, 10.0, 50.0, n);
            let sols = floquet_many_sherman_morrison(&m, &kv[..n]).unwrap();
            let dense = dense_many(&m, &kv[..n]).unwrap();
            for (s, (bm, bp)) in sols.iter().zip(&dense) {
                assert!((s.b_minus - bm).norm() / bm.norm() < 1e-10);
                assert!((s.b_plus - bp).norm() / bp.norm() < 1e-10);
            }
            assert!(many_residual(&m, &kv[..n], &sols).unwrap() < 1e-10);
        }
    }
}
