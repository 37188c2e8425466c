//! Dormand–Prince 5(4) with PI step-size control and 4th-order dense output.

use std::ops::ControlFlow;

use serde::Serialize;

use super::rhs::OdeSystem;
use crate::error::{Error, Result};

const C2: f64 = 0.2;
const C3: f64 = 0.3;
const C4: f64 = 0.8;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 0.2;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Controls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_end: f64,
    pub max_step: f64,
    /// Initial step; chosen automatically when `None`.
    pub first_step: Option<f64>,
    pub max_steps: u64,
}

impl Controls {
    pub fn new(t_end: f64) -> Self {
        Controls {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            t_end,
            max_step: f64::INFINITY,
            first_step: None,
            max_steps: 500_000_000,
        }
    }

    fn validate(&self, t0: f64) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParams(format!("integrator: {what}")));
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return bad("tolerances must be > 0");
        }
        if !(self.t_end.is_finite() && self.t_end > t0) {
            return bad("t_end must be finite and after the start time");
        }
        if !(self.max_step > 0.0) {
            return bad("max_step must be > 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct Stats {
    pub accepted: u64,
    pub rejected: u64,
    pub rhs_evals: u64,
}

/// One accepted step with its continuous extension.
pub struct Step<'a> {
    pub t0: f64,
    pub t1: f64,
    pub y0: &'a [f64],
    pub y1: &'a [f64],
    k: &'a [Vec<f64>; 7],
}

impl Step<'_> {
    fn fraction(&self, t: f64) -> (f64, f64, f64) {
        let h = self.t1 - self.t0;
        let s = if h == 0.0 { 1.0 } else { (t - self.t0) / h };
        (h, s, 1.0 - s)
    }

    #[inline]
    fn dense(&self, i: usize, h: f64, s: f64, s1: f64) -> f64 {
        let k = self.k;
        let dy = self.y1[i] - self.y0[i];
        let bspl = h * k[0][i] - dy;
        let c3 = dy - h * k[6][i] - bspl;
        let c4 = h * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        self.y0[i] + s * (dy + s1 * (bspl + s * (c3 + s1 * c4)))
    }

    /// Dense output at `t` ∈ [t0, t1].
    pub fn eval(&self, t: f64, out: &mut [f64]) {
        let (h, s, s1) = self.fraction(t);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.dense(i, h, s, s1);
        }
    }

    /// Single component of the dense output.
    pub fn eval_component(&self, t: f64, i: usize) -> f64 {
        let (h, s, s1) = self.fraction(t);
        self.dense(i, h, s, s1)
    }
}

/// out = y + h Σ a_j k_j in a single pass; slices are cut to a common
/// length so the loop carries no bounds checks.
macro_rules! combine {
    ($out:expr, $y:expr, $h:expr, $(($a:expr, $k:ident)),+) => {{
        let n = $out.len();
        let out = &mut $out[..n];
        let y = &$y[..n];
        $(let $k = &$k[..n];)+
        for i in 0..n {
            out[i] = y[i] + $h * (0.0 $(+ $a * $k[i])+);
        }
    }};
}

/// Receives every accepted step. Returning `Break(t)` with t in the step
/// interval stops the integration there.
pub trait Observer {
    fn on_step(&mut self, step: &Step<'_>) -> ControlFlow<f64>;
}

impl<F: FnMut(&Step<'_>) -> ControlFlow<f64>> Observer for F {
    fn on_step(&mut self, step: &Step<'_>) -> ControlFlow<f64> {
        self(step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub t: f64,
    pub y: Vec<f64>,
    pub stats: Stats,
    /// True when an observer stopped the run before `t_end`.
    pub stopped: bool,
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], c: &Controls) -> f64 {
    let sum: f64 = err
        .iter()
        .zip(y0.iter().zip(y1))
        .map(|(e, (a, b))| {
            let r = e / (c.abs_tol + c.rel_tol * a.abs().max(b.abs()));
            r * r
        })
        .sum();
    (sum / err.len() as f64).sqrt()
}

/// Component with the largest scaled error, for diagnostics.
fn worst_component(err: &[f64], y0: &[f64], y1: &[f64], c: &Controls) -> usize {
    let mut worst = (0.0, 0);
    for i in 0..err.len() {
        let r = (err[i] / (c.abs_tol + c.rel_tol * y0[i].abs().max(y1[i].abs()))).abs();
        if r > worst.0 {
            worst = (r, i);
        }
    }
    worst.1
}

fn initial_step<S: OdeSystem>(sys: &S, t0: f64, y0: &[f64], f0: &[f64], c: &Controls, stats: &mut Stats) -> f64 {
    let n = y0.len() as f64;
    let scale = |i: usize| c.abs_tol + c.rel_tol * y0[i].abs();
    let d0 = (y0.iter().enumerate().map(|(i, y)| (y / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let d1 = (f0.iter().enumerate().map(|(i, f)| (f / scale(i)).powi(2)).sum::<f64>() / n).sqrt();
    let h0 = if d0 < 1e-10 || d1 < 1e-10 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(c.max_step).min(c.t_end - t0);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let mut f1 = vec![0.0; y0.len()];
    sys.rhs(t0 + h0, &y1, &mut f1);
    stats.rhs_evals += 1;
    let d2 = (f1
        .iter()
        .zip(f0)
        .enumerate()
        .map(|(i, (a, b))| ((a - b) / scale(i)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(c.max_step).min(c.t_end - t0)
}

/// Integrates `sys` from (t0, y0) to `controls.t_end`, reporting every
/// accepted step to `observer`.
pub fn integrate<S: OdeSystem, O: Observer>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    controls: &Controls,
    observer: &mut O,
) -> Result<Outcome> {
    controls.validate(t0)?;
    let n = sys.dim();
    assert_eq!(y0.len(), n, "initial state has the wrong dimension");
    let mut stats = Stats::default();

    let mut y = y0.to_vec();
    let mut y_new = vec![0.0; n];
    let mut y_stage = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut k: [Vec<f64>; 7] = std::array::from_fn(|_| vec![0.0; n]);
    let zeros = vec![0.0; n];

    let mut t = t0;
    sys.rhs(t, &y, &mut k[0]);
    stats.rhs_evals += 1;
    let mut h = match controls.first_step {
        Some(h) => h.min(controls.max_step),
        None => initial_step(sys, t, &y, &k[0], controls, &mut stats),
    };
    let mut fac_old: f64 = 1e-4;
    let mut last_rejected = false;

    loop {
        if stats.accepted + stats.rejected >= controls.max_steps {
            return Err(Error::TooManySteps {
                t,
                max_steps: controls.max_steps,
            });
        }
        let remaining = controls.t_end - t;
        let last = h >= remaining;
        if last {
            h = remaining;
        }

        let t_new = if last { controls.t_end } else { t + h };
        {
            let [k0, k1, k2, k3, k4, k5, k6] = &mut k;
            combine!(y_stage, y, h, (A21, k0));
            sys.rhs(t + C2 * h, &y_stage, k1);
            combine!(y_stage, y, h, (A31, k0), (A32, k1));
            sys.rhs(t + C3 * h, &y_stage, k2);
            combine!(y_stage, y, h, (A41, k0), (A42, k1), (A43, k2));
            sys.rhs(t + C4 * h, &y_stage, k3);
            combine!(y_stage, y, h, (A51, k0), (A52, k1), (A53, k2), (A54, k3));
            sys.rhs(t + C5 * h, &y_stage, k4);
            combine!(y_stage, y, h, (A61, k0), (A62, k1), (A63, k2), (A64, k3), (A65, k4));
            sys.rhs(t_new, &y_stage, k5);
            combine!(y_new, y, h, (A71, k0), (A73, k2), (A74, k3), (A75, k4), (A76, k5));
            sys.rhs(t_new, &y_new, k6);
            combine!(err, zeros, h, (E1, k0), (E3, k2), (E4, k3), (E5, k4), (E6, k5), (E7, k6));
        }
        stats.rhs_evals += 6;
        let e = error_norm(&err, &y, &y_new, controls);

        let fac11 = e.powf(0.2 - BETA * 0.75);
        if e <= 1.0 && e.is_finite() {
            stats.accepted += 1;
            let step = Step {
                t0: t,
                t1: t_new,
                y0: &y,
                y1: &y_new,
                k: &k,
            };
            if let ControlFlow::Break(t_stop) = observer.on_step(&step) {
                let t_stop = t_stop.clamp(t, t_new);
                let mut y_stop = vec![0.0; n];
                step.eval(t_stop, &mut y_stop);
                return Ok(Outcome {
                    t: t_stop,
                    y: y_stop,
                    stats,
                    stopped: true,
                });
            }
            std::mem::swap(&mut y, &mut y_new);
            k.swap(0, 6);
            t = t_new;
            if last {
                return Ok(Outcome {
                    t,
                    y,
                    stats,
                    stopped: false,
                });
            }
            let mut fac = fac11 / fac_old.powf(BETA);
            fac = (fac / SAFETY).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
            let mut h_new = h / fac;
            if last_rejected {
                h_new = h_new.min(h);
            }
            fac_old = e.max(1e-4);
            h = h_new.min(controls.max_step);
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let shrink = if e.is_finite() {
                1.0 / (1.0 / FAC_MIN).min(fac11 / SAFETY)
            } else {
                0.1
            };
            h *= shrink;
            last_rejected = true;
            if h <= 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepUnderflow {
                    t,
                    step: h,
                    component: sys.component_name(worst_component(&err, &y, &y_new, controls)),
                });
            }
        }
    }
}

/// Observer that ignores every step.
pub fn no_observer(_: &Step<'_>) -> ControlFlow<f64> {
    ControlFlow::Continue(())
}

/// Locates the first root of `g` on a step by bisection on the dense
/// output, assuming g(t0) > 0 ≥ g(t1).
pub fn bisect_event<G: Fn(&[f64]) -> f64>(step: &Step<'_>, g: G, scratch: &mut [f64]) -> f64 {
    let (mut lo, mut hi) = (step.t0, step.t1);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        step.eval(mid, scratch);
        if g(scratch) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotation {
        delta: f64,
    }

    impl OdeSystem for Rotation {
        fn dim(&self) -> usize {
            2
        }
        // β̇ = −iΔβ
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = self.delta * y[1];
            dy[1] = -self.delta * y[0];
        }
    }

    struct Decay;

    impl OdeSystem for Decay {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -y[0];
        }
    }

    struct Stiff {
        rate: f64,
    }

    impl OdeSystem for Stiff {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) {
            dy[0] = -self.rate * (y[0] - t.cos());
        }
        fn component_name(&self, _: usize) -> String {
            "x".into()
        }
    }

    #[test]
    fn tableau_consistency() {
        let rows = [
            (C2, A21),
            (C3, A31 + A32),
            (C4, A41 + A42 + A43),
            (C5, A51 + A52 + A53 + A54),
            (1.0, A61 + A62 + A63 + A64 + A65),
            (1.0, A71 + A73 + A74 + A75 + A76),
        ];
        for (c, sum) in rows {
            assert!((c - sum).abs() < 1e-14);
        }
        assert!((E1 + E3 + E4 + E5 + E6 + E7).abs() < 1e-16);
        assert!((D1 + D3 + D4 + D5 + D6 + D7).abs() < 1e-12);
    }

    #[test]
    fn harmonic_amplitude_error_below_tolerance() {
        let delta = 10.0;
        let sys = Rotation { delta };
        let c = Controls::new(100.0 / delta);
        let out = integrate(&sys, 0.0, &[1.0, 0.0], &c, &mut no_observer).unwrap();
        let t = out.t;
        let exact = [(delta * t).cos(), -(delta * t).sin()];
        let err = ((out.y[0] - exact[0]).powi(2) + (out.y[1] - exact[1]).powi(2)).sqrt();
        // Global error accumulates over ~16 periods.
        assert!(err < 1e-6, "err {err}");
        let mut tight = c;
        tight.rel_tol = 1e-11;
        tight.abs_tol = 1e-13;
        let out = integrate(&sys, 0.0, &[1.0, 0.0], &tight, &mut no_observer).unwrap();
        let tight_err = ((out.y[0] - exact[0]).powi(2) + (out.y[1] - exact[1]).powi(2)).sqrt();
        assert!(tight_err < err / 50.0, "{tight_err} vs {err}");
    }

    #[test]
    fn dense_output_is_accurate() {
        let c = Controls::new(5.0);
        let mut worst: f64 = 0.0;
        let mut buf = [0.0];
        let mut obs = |s: &Step<'_>| {
            for k in 1..10 {
                let t = s.t0 + (s.t1 - s.t0) * k as f64 / 10.0;
                s.eval(t, &mut buf);
                worst = worst.max((buf[0] - (-t).exp()).abs());
                assert_eq!(s.eval_component(t, 0), buf[0]);
            }
            ControlFlow::Continue(())
        };
        integrate(&Decay, 0.0, &[1.0], &c, &mut obs).unwrap();
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn event_stops_at_root() {
        let c = Controls::new(10.0);
        let mut scratch = [0.0];
        let mut obs = |s: &Step<'_>| {
            if s.y1[0] < 0.5 {
                ControlFlow::Break(bisect_event(s, |y| y[0] - 0.5, &mut scratch))
            } else {
                ControlFlow::Continue(())
            }
        };
        let out = integrate(&Decay, 0.0, &[1.0], &c, &mut obs).unwrap();
        assert!(out.stopped);
        assert!((out.t - 2f64.ln()).abs() < 1e-8);
        assert!((out.y[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn stiff_problem_completes_with_max_step() {
        let sys = Stiff { rate: 1000.0 };
        let mut c = Controls::new(20.0);
        c.max_step = 0.5 / 1000.0;
        let out = integrate(&sys, 0.0, &[0.0], &c, &mut no_observer).unwrap();
        assert!((out.y[0] - 20f64.cos()).abs() < 1e-2);
        assert!(out.stats.accepted >= 40_000);
    }

    #[test]
    fn step_budget_reported() {
        let mut c = Controls::new(10.0);
        c.max_steps = 5;
        let err = integrate(&Decay, 0.0, &[1.0], &c, &mut no_observer).unwrap_err();
        assert!(matches!(err, Error::TooManySteps { .. }));
    }

    #[test]
    fn underflow_names_component() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                1
            }
            fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) {
                dy[0] = y[0] * y[0];
            }
            fn component_name(&self, _: usize) -> String {
                "x".into()
            }
        }
        let c = Controls::new(2.0);
        match integrate(&Blowup, 0.0, &[1.0], &c, &mut no_observer) {
            Err(Error::StepUnderflow { t, component, .. }) => {
                assert_eq!(component, "x");
                assert!((t - 1.0).abs() < 1e-3);
            }
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let sys = Rotation { delta: 3.0 };
        let c = Controls::new(50.0);
        let a = integrate(&sys, 0.0, &[1.0, 0.5], &c, &mut no_observer).unwrap();
        let b = integrate(&sys, 0.0, &[1.0, 0.5], &c, &mut no_observer).unwrap();
        assert_eq!(a, b);
    }
}
