//! AR(p) mean with GARCH(1,1) Gaussian errors, fitted by quasi-maximum
//! likelihood.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::nelder_mead::{minimize, NelderMeadOptions};
use crate::density::{DensityEstimate, ResponseGrid};
use crate::error::{Error, Result};

/// Starting `(α, β)` pairs; `ω` starts at the residual variance times
/// `1 − α − β`.
const STARTS: [(f64, f64); 3] = [(0.05, 0.90), (0.10, 0.80), (0.20, 0.50)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchModel {
    /// `ar[i]` multiplies `y_{t−1−i}`.
    pub ar: Vec<f64>,
    pub intercept: f64,
    pub omega: f64,
    pub alpha: f64,
    pub beta: f64,
    /// `1 − α − β`, kept separately because it can be far below the
    /// rounding error of `α + β`.
    pub gap: f64,
    /// Variance used to start the recursion.
    pub init_variance: f64,
    pub log_likelihood: f64,
    /// Log-likelihood at each multi-start point.
    pub start_log_likelihoods: Vec<f64>,
    /// `Σ|ar| ≥ 1`: the mean may be nonstationary.
    pub ar_flag: bool,
}

/// Running variance recursion: `sigma2` is the predictive variance of the
/// next observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GarchState {
    pub sigma2: f64,
}

/// Unconstrained parameters `[c, ar.., log ω, a, b]` with
/// `α = e^a / (1 + e^a + e^b)`, `β = e^b / (1 + e^a + e^b)`.
fn unpack(theta: &[f64], p: usize) -> (f64, &[f64], f64, f64, f64) {
    let (c, ar, omega, alpha, beta, _) = unpack_with_gap(theta, p);
    (c, ar, omega, alpha, beta)
}

fn unpack_with_gap(theta: &[f64], p: usize) -> (f64, &[f64], f64, f64, f64, f64) {
    let (a, b) = (theta[p + 2], theta[p + 3]);
    let m = a.max(b).max(0.0);
    let (ea, eb, e0) = ((a - m).exp(), (b - m).exp(), (-m).exp());
    let denom = e0 + ea + eb;
    (theta[0], &theta[1..=p], theta[p + 1].exp(), ea / denom, eb / denom, e0 / denom)
}

fn pack(c: f64, ar: &[f64], omega: f64, alpha: f64, beta: f64) -> Vec<f64> {
    let rest = 1.0 - alpha - beta;
    let mut theta = vec![c];
    theta.extend_from_slice(ar);
    theta.extend([omega.ln(), (alpha / rest).ln(), (beta / rest).ln()]);
    theta
}

fn residuals(y: &[f64], c: f64, ar: &[f64]) -> Vec<f64> {
    let p = ar.len();
    (p..y.len()).map(|t| y[t] - c - ar.iter().enumerate().map(|(i, a)| a * y[t - 1 - i]).sum::<f64>()).collect()
}

fn sample_variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n
}

fn log_likelihood(eps: &[f64], omega: f64, alpha: f64, beta: f64, init: f64) -> f64 {
    let mut s2 = init;
    let mut ll = 0.0;
    for &e in eps {
        ll -= 0.5 * ((2.0 * PI).ln() + s2.ln() + e * e / s2);
        s2 = omega + alpha * e * e + beta * s2;
    }
    ll
}

/// Least-squares intercept and AR coefficients.
fn ols_ar(y: &[f64], p: usize) -> Result<(f64, Vec<f64>)> {
    let k = p + 1;
    let mut xtx = vec![vec![0.0; k]; k];
    let mut xty = vec![0.0; k];
    for t in p..y.len() {
        let row: Vec<f64> = std::iter::once(1.0).chain((0..p).map(|i| y[t - 1 - i])).collect();
        for a in 0..k {
            xty[a] += row[a] * y[t];
            for b in 0..k {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    // Gaussian elimination with partial pivoting.
    for col in 0..k {
        let piv = (col..k).max_by(|&a, &b| xtx[a][col].abs().total_cmp(&xtx[b][col].abs())).unwrap();
        if xtx[piv][col].abs() < 1e-12 {
            return Err(Error::NumericFailure("collinear AR design".into()));
        }
        xtx.swap(col, piv);
        xty.swap(col, piv);
        for r in col + 1..k {
            let f = xtx[r][col] / xtx[col][col];
            for c in col..k {
                xtx[r][c] -= f * xtx[col][c];
            }
            xty[r] -= f * xty[col];
        }
    }
    let mut sol = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| xtx[r][c] * sol[c]).sum();
        sol[r] = (xty[r] - s) / xtx[r][r];
    }
    Ok((sol[0], sol[1..].to_vec()))
}

/// Fits the model to `y` with AR order `p`.
pub fn garch_fit(y: &[f64], p: usize) -> Result<GarchModel> {
    let need = 20 * (p + 4);
    if y.len() < need {
        return Err(Error::InsufficientData(format!("GARCH with p = {p} needs {need} observations, got {}", y.len())));
    }
    if let Some(v) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("series value {v}")));
    }
    if sample_variance(y) <= 0.0 {
        return Err(Error::DegenerateRange { value: y[0] });
    }

    let neg_ll = |theta: &[f64]| {
        let (c, ar, omega, alpha, beta) = unpack(theta, p);
        let eps = residuals(y, c, ar);
        -log_likelihood(&eps, omega, alpha, beta, sample_variance(&eps))
    };

    let (c0, ar0) = ols_ar(y, p)?;
    let v0 = sample_variance(&residuals(y, c0, &ar0));
    if v0 <= 0.0 {
        return Err(Error::NumericFailure("AR fit leaves zero residual variance".into()));
    }
    let starts: Vec<Vec<f64>> = STARTS.iter().map(|&(a, b)| pack(c0, &ar0, v0 * (1.0 - a - b), a, b)).collect();
    let start_log_likelihoods: Vec<f64> = starts.iter().map(|s| -neg_ll(s)).collect();
    if start_log_likelihoods.iter().all(|l| !l.is_finite()) {
        return Err(Error::NumericFailure("GARCH likelihood is non-finite at every start".into()));
    }

    let opts = NelderMeadOptions::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in &starts {
        // A restart from the first solution refreshes a collapsed simplex.
        let first = minimize(neg_ll, start, &opts);
        let second = minimize(neg_ll, &first.x, &opts);
        let r = if second.value <= first.value { second } else { first };
        if best.as_ref().is_none_or(|(v, _)| r.value < *v) {
            best = Some((r.value, r.x));
        }
    }
    let (value, theta) = best.expect("three starts");
    if !value.is_finite() {
        return Err(Error::NumericFailure("GARCH likelihood is non-finite at every start".into()));
    }
    let (intercept, ar, omega, alpha, beta, gap) = unpack_with_gap(&theta, p);
    let ar = ar.to_vec();
    Ok(GarchModel {
        ar_flag: ar.iter().map(|a| a.abs()).sum::<f64>() >= 1.0,
        init_variance: sample_variance(&residuals(y, intercept, &ar)),
        ar,
        intercept,
        omega,
        alpha,
        beta,
        gap,
        log_likelihood: -value,
        start_log_likelihoods,
    })
}

impl GarchModel {
    pub fn order(&self) -> usize {
        self.ar.len()
    }

    /// `ω / (1 − α − β)`.
    pub fn unconditional_variance(&self) -> f64 {
        self.omega / self.gap
    }

    /// Conditional mean given `recent`, most recent value first.
    pub fn mean(&self, recent: &[f64]) -> f64 {
        self.intercept + self.ar.iter().zip(recent).map(|(a, y)| a * y).sum::<f64>()
    }

    pub fn initial_state(&self) -> GarchState {
        GarchState { sigma2: self.init_variance }
    }

    /// Advances the recursion past an observation with residual `eps`.
    pub fn update(&self, state: GarchState, eps: f64) -> GarchState {
        GarchState { sigma2: self.omega + self.alpha * eps * eps + self.beta * state.sigma2 }
    }

    /// Predictive variances of `y_t` for `t = p..=y.len()`; the last entry
    /// is the forecast beyond the end of `y`.
    pub fn filter(&self, y: &[f64]) -> Vec<f64> {
        let p = self.order();
        let mut state = self.initial_state();
        let mut out = Vec::with_capacity(y.len().saturating_sub(p) + 1);
        out.push(state.sigma2);
        for t in p..y.len() {
            let recent: Vec<f64> = (0..p).map(|i| y[t - 1 - i]).collect();
            state = self.update(state, y[t] - self.mean(&recent));
            out.push(state.sigma2);
        }
        out
    }

    /// One-step Gaussian predictive density on `grid`, renormalized there.
    pub fn predict_density(&self, recent: &[f64], state: &GarchState, grid: &ResponseGrid) -> Result<DensityEstimate> {
        if recent.len() < self.order() {
            return Err(Error::DimensionMismatch { expected: self.order(), got: recent.len() });
        }
        let mu = self.mean(recent);
        let sd = state.sigma2.sqrt();
        let points = grid.points();
        let raw = points
            .iter()
            .map(|y| {
                let r = (y - mu) / sd;
                (-0.5 * r * r).exp() / (sd * (2.0 * PI).sqrt())
            })
            .collect();
        Ok(DensityEstimate::from_raw(points, raw))
    }

    /// Predictive densities of `y_t` for each `t` in `origins` (each
    /// `≥ p`), filtering the variance through the whole series.
    pub fn predict_series(&self, y: &[f64], origins: &[usize], grid: &ResponseGrid) -> Result<Vec<DensityEstimate>> {
        let p = self.order();
        let variances = self.filter(y);
        origins
            .iter()
            .map(|&t| {
                if t < p || t > y.len() {
                    return Err(Error::InvalidParameter(format!("origin {t} outside [{p}, {}]", y.len())));
                }
                let recent: Vec<f64> = (0..p).map(|i| y[t - 1 - i]).collect();
                self.predict_density(&recent, &GarchState { sigma2: variances[t - p] }, grid)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn degenerate(ar: Vec<f64>, intercept: f64, omega: f64) -> GarchModel {
        GarchModel {
            ar,
            intercept,
            omega,
            alpha: 0.0,
            beta: 0.0,
            gap: 1.0,
            init_variance: 2.0,
            log_likelihood: 0.0,
            start_log_likelihoods: Vec::new(),
            ar_flag: false,
        }
    }

    #[test]
    fn packing_round_trips() {
        let theta = pack(0.3, &[0.5, -0.2], 0.7, 0.1, 0.85);
        let (c, ar, omega, alpha, beta) = unpack(&theta, 2);
        assert!((c - 0.3).abs() < 1e-14 && (ar[0] - 0.5).abs() < 1e-14 && (ar[1] + 0.2).abs() < 1e-14);
        assert!((omega - 0.7).abs() < 1e-12 && (alpha - 0.1).abs() < 1e-12 && (beta - 0.85).abs() < 1e-12);
    }

    #[test]
    fn constraints_hold_for_extreme_parameters() {
        for (a, b) in [(800.0, -800.0), (800.0, 800.0), (-800.0, -800.0), (30.0, 29.0)] {
            let (_, _, _, alpha, beta) = unpack(&[0.0, 0.0, a, b], 0);
            assert!(alpha >= 0.0 && beta >= 0.0 && alpha + beta <= 1.0, "{alpha} {beta}");
        }
    }

    #[test]
    fn degenerate_variance_is_omega() {
        let m = degenerate(vec![], 0.0, 1.7);
        let v = m.filter(&[0.3, -2.0, 5.0, 1.0]);
        assert_eq!(v[0], 2.0);
        assert!(v[1..].iter().all(|&s| s == 1.7));
    }

    #[test]
    fn zero_mean_model_predicts_zero() {
        let m = degenerate(vec![], 0.0, 1.0);
        assert_eq!(m.mean(&[]), 0.0);
        let g = ResponseGrid::new(-8.0, 8.0, 2001).unwrap();
        let d = m.predict_density(&[], &GarchState { sigma2: 1.0 }, &g).unwrap();
        assert!(d.quantile(0.5).unwrap().abs() < 1e-3);
    }

    #[test]
    fn ar_mean_uses_most_recent_first() {
        let m = degenerate(vec![0.5, 0.25], 1.0, 1.0);
        assert_eq!(m.mean(&[2.0, 4.0]), 3.0);
        assert!(m.predict_density(&[2.0], &m.initial_state(), &ResponseGrid::new(0.0, 1.0, 11).unwrap()).is_err());
    }

    #[test]
    fn constant_series_is_rejected() {
        assert!(matches!(garch_fit(&[2.0; 500], 1), Err(Error::DegenerateRange { .. })));
        assert!(matches!(garch_fit(&[0.0; 50], 1), Err(Error::InsufficientData(_))));
    }
}
