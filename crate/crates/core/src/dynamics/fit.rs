//! Cooling-rate extraction from a simulated velocity trace.
//!
//! The raw w(t) carries a ripple at twice the spatial frequency (the force
//! depends on cos²θ). The envelope is taken as the time average of w over
//! each half-wavelength cell, i.e. between consecutive crossings of θ
//! through multiples of π, which is one instantaneous Doppler period π/w.
//! The rate is the least-squares slope of ln|w̄| against cell mid-times.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnvelopePoint {
    pub t: f64,
    pub w: f64,
    /// Cell duration (one Doppler period).
    pub period: f64,
}

/// Cell-averaged velocity between successive crossings θ = mπ.
///
/// Samples must be dense enough to resolve each cell; crossings are located
/// by linear interpolation and the average uses the trapezoid rule.
pub fn envelope(times: &[f64], theta: &[f64], w: &[f64]) -> Vec<EnvelopePoint> {
    assert!(times.len() == theta.len() && times.len() == w.len());
    if times.len() < 2 {
        return Vec::new();
    }
    // Cumulative ∫w dt at every sample.
    let mut integral = vec![0.0; times.len()];
    for i in 1..times.len() {
        integral[i] = integral[i - 1] + 0.5 * (w[i] + w[i - 1]) * (times[i] - times[i - 1]);
    }
    let cell = |x: f64| (x / PI).floor();
    let mut crossings: Vec<(f64, f64)> = Vec::new();
    for i in 1..times.len() {
        let (c0, c1) = (cell(theta[i - 1]), cell(theta[i]));
        if c0 == c1 {
            continue;
        }
        // Boundary between the two cells; with coarse sampling only the
        // first boundary crossed in the interval is used.
        let boundary = if c1 > c0 { (c0 + 1.0) * PI } else { c0 * PI };
        let f = (boundary - theta[i - 1]) / (theta[i] - theta[i - 1]);
        let t = times[i - 1] + f * (times[i] - times[i - 1]);
        let a = integral[i - 1] + f * (integral[i] - integral[i - 1]);
        crossings.push((t, a));
    }
    crossings
        .windows(2)
        .filter(|p| p[1].0 > p[0].0)
        .map(|p| {
            let period = p[1].0 - p[0].0;
            EnvelopePoint {
                t: 0.5 * (p[0].0 + p[1].0),
                w: (p[1].1 - p[0].1) / period,
                period,
            }
        })
        .collect()
}

/// Which part of the trace enters the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowPolicy {
    /// Only cells with |w̄| ≤ this value.
    pub w_max: f64,
    /// Only cells with |w̄| ≥ this value.
    pub w_min: f64,
    pub t_min: f64,
    pub t_max: f64,
    /// Minimum number of envelope points.
    pub min_points: usize,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            w_max: f64::INFINITY,
            w_min: 0.0,
            t_min: f64::NEG_INFINITY,
            t_max: f64::INFINITY,
            min_points: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitReport {
    /// Decay rate ξ with w̄ ∝ e^{−ξt}.
    pub rate: f64,
    pub intercept: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub w_start: f64,
    pub w_end: f64,
    pub points: usize,
    /// RMS residual of ln|w̄|.
    pub rms_residual: f64,
    pub max_residual: f64,
    /// First time w changed sign, if it did.
    pub first_zero_crossing: Option<f64>,
}

/// First time at which w changes sign, by linear interpolation.
pub fn first_zero_crossing(times: &[f64], w: &[f64]) -> Option<f64> {
    (1..w.len()).find_map(|i| {
        if w[i - 1] != 0.0 && (w[i] == 0.0 || (w[i] > 0.0) != (w[i - 1] > 0.0)) {
            let f = w[i - 1] / (w[i - 1] - w[i]);
            Some(times[i - 1] + f * (times[i] - times[i - 1]))
        } else {
            None
        }
    })
}

/// Exponential fit of the velocity envelope inside the window, restricted to
/// times before the first zero crossing of w.
pub fn fit_cooling_rate(times: &[f64], theta: &[f64], w: &[f64], policy: &WindowPolicy) -> Result<FitReport> {
    let zero = first_zero_crossing(times, w);
    let cutoff = zero.unwrap_or(f64::INFINITY).min(policy.t_max);
    let points: Vec<EnvelopePoint> = envelope(times, theta, w)
        .into_iter()
        .filter(|p| {
            let half = 0.5 * p.period;
            p.t - half >= policy.t_min
                && p.t + half <= cutoff
                && p.w.abs() <= policy.w_max
                && p.w.abs() >= policy.w_min
        })
        .collect();
    if points.len() < policy.min_points.max(2) {
        return Err(Error::Fit(format!(
            "only {} envelope points in the window (need {}){}",
            points.len(),
            policy.min_points.max(2),
            match zero {
                Some(t) => format!("; w crosses zero at t = {t}"),
                None => String::new(),
            }
        )));
    }
    if points.iter().any(|p| p.w.signum() != points[0].w.signum()) {
        return Err(Error::Fit("velocity envelope changes sign inside the window".into()));
    }
    let first = points[0];
    let last = points[points.len() - 1];
    if last.t - first.t < first.period.max(last.period) {
        return Err(Error::Fit(format!(
            "window {}..{} is shorter than one Doppler period",
            first.t, last.t
        )));
    }

    let n = points.len() as f64;
    let (mut st, mut sy) = (0.0, 0.0);
    for p in &points {
        st += p.t;
        sy += p.w.abs().ln();
    }
    let (tm, ym) = (st / n, sy / n);
    let (mut stt, mut sty) = (0.0, 0.0);
    for p in &points {
        let dt = p.t - tm;
        stt += dt * dt;
        sty += dt * (p.w.abs().ln() - ym);
    }
    let slope = sty / stt;
    let intercept = ym - slope * tm;
    let (mut ss, mut worst) = (0.0, 0.0f64);
    for p in &points {
        let r = p.w.abs().ln() - (intercept + slope * p.t);
        ss += r * r;
        worst = worst.max(r.abs());
    }
    Ok(FitReport {
        rate: -slope,
        intercept,
        t_start: first.t,
        t_end: last.t,
        w_start: first.w,
        w_end: last.w,
        points: points.len(),
        rms_residual: (ss / n).sqrt(),
        max_residual: worst,
        first_zero_crossing: zero,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(w0: f64, xi: f64, t_end: f64, dt: f64, ripple: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = (t_end / dt) as usize + 1;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let mut theta = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        for &t in &times {
            let th = w0 / xi * (1.0 - (-xi * t).exp());
            theta.push(th);
            w.push(w0 * (-xi * t).exp() * (1.0 + ripple * (2.0 * th).sin()));
        }
        (times, theta, w)
    }

    #[test]
    fn recovers_exact_exponential() {
        let (t, th, w) = synthetic(3.0, 2e-3, 800.0, 0.01, 0.0);
        let fit = fit_cooling_rate(&t, &th, &w, &WindowPolicy::default()).unwrap();
        assert!((fit.rate / 2e-3 - 1.0).abs() < 1e-3, "{}", fit.rate);
        assert!(fit.first_zero_crossing.is_none());
    }

    #[test]
    fn ripple_is_averaged_out() {
        let (t, th, w) = synthetic(3.0, 2e-3, 800.0, 0.01, 0.2);
        let fit = fit_cooling_rate(&t, &th, &w, &WindowPolicy::default()).unwrap();
        assert!((fit.rate / 2e-3 - 1.0).abs() < 1e-2, "{}", fit.rate);
    }

    #[test]
    fn window_limits_apply() {
        let (t, th, w) = synthetic(3.0, 2e-3, 800.0, 0.01, 0.0);
        let policy = WindowPolicy {
            w_max: 2.0,
            w_min: 1.0,
            ..WindowPolicy::default()
        };
        let fit = fit_cooling_rate(&t, &th, &w, &policy).unwrap();
        assert!(fit.w_start <= 2.0 && fit.w_end >= 1.0);
        assert!(fit.t_start > 200.0);
    }

    #[test]
    fn zero_crossing_stops_the_window() {
        let times: Vec<f64> = (0..2000).map(|i| i as f64 * 0.01).collect();
        let w: Vec<f64> = times.iter().map(|t| 1.0 - 0.1 * t).collect();
        let theta: Vec<f64> = times.iter().map(|t| t - 0.05 * t * t).collect();
        assert!((first_zero_crossing(&times, &w).unwrap() - 10.0).abs() < 1e-9);
        let err = fit_cooling_rate(&times, &theta, &w, &WindowPolicy::default()).unwrap_err();
        assert!(err.to_string().contains("crosses zero"), "{err}");
    }

    #[test]
    fn short_window_rejected() {
        let (t, th, w) = synthetic(3.0, 2e-3, 3.0, 0.01, 0.0);
        assert!(fit_cooling_rate(&t, &th, &w, &WindowPolicy::default()).is_err());
    }
}
