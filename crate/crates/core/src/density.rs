//! Grid-evaluated conditional densities and their post-processing.

use serde::{Deserialize, Serialize};

use crate::basis::{BasisKind, Scaler};
use crate::error::{Error, Result};
use crate::quadrature::{cumulative_trapezoid, interp_uniform, linspace, trapezoid};

/// Default number of density grid points.
pub const DEFAULT_GRID_SIZE: usize = 1001;

/// A density on a uniform response grid.
///
/// `density` is nonnegative with unit trapezoid mass; `raw_density` keeps
/// the values before clipping and renormalization.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub grid_y: Vec<f64>,
    pub density: Vec<f64>,
    pub raw_density: Vec<f64>,
    /// The positive part had no mass and the density was replaced by the
    /// uniform density on the grid.
    pub fallback_uniform: bool,
}

impl DensityEstimate {
    /// Clips `raw` at zero and renormalizes to unit mass on `grid_y`, which
    /// must be uniform with at least two points.
    pub fn from_raw(grid_y: Vec<f64>, raw_density: Vec<f64>) -> Self {
        debug_assert_eq!(grid_y.len(), raw_density.len());
        debug_assert!(grid_y.len() >= 2);
        let n = grid_y.len();
        let dx = (grid_y[n - 1] - grid_y[0]) / (n - 1) as f64;
        let positive: Vec<f64> = raw_density.iter().map(|&v| if v > 0.0 && v.is_finite() { v } else { 0.0 }).collect();
        let mass = trapezoid(&positive, dx);
        let (density, fallback_uniform) = if mass > 0.0 && mass.is_finite() {
            (positive.iter().map(|v| v / mass).collect(), false)
        } else {
            (vec![1.0 / (grid_y[n - 1] - grid_y[0]); n], true)
        };
        Self { grid_y, density, raw_density, fallback_uniform }
    }

    pub fn lo(&self) -> f64 {
        self.grid_y[0]
    }

    pub fn hi(&self) -> f64 {
        self.grid_y[self.grid_y.len() - 1]
    }

    pub fn dx(&self) -> f64 {
        (self.hi() - self.lo()) / (self.grid_y.len() - 1) as f64
    }

    /// Linear interpolation of the post-processed density; zero off-grid.
    pub fn value_at(&self, y: f64) -> f64 {
        interp_uniform(&self.density, self.lo(), self.hi(), y).unwrap_or(0.0)
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.density, self.dx())
    }

    /// `∫ f̂²` by the trapezoid rule.
    pub fn squared_integral(&self) -> f64 {
        let sq: Vec<f64> = self.density.iter().map(|v| v * v).collect();
        trapezoid(&sq, self.dx())
    }

    pub fn cdf(&self) -> Vec<f64> {
        cumulative_trapezoid(&self.density, self.dx())
    }

    /// Inverts the cumulative trapezoid CDF by linear interpolation.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        Ok(self.quantiles(&[tau])?[0])
    }

    /// Quantiles for several levels from a single CDF pass; monotone in `tau`.
    pub fn quantiles(&self, taus: &[f64]) -> Result<Vec<f64>> {
        check_taus(taus)?;
        let cdf = self.cdf();
        let total = cdf[cdf.len() - 1];
        let dx = self.dx();
        Ok(taus
            .iter()
            .map(|&tau| {
                let target = tau * total;
                let i = cdf.partition_point(|&c| c < target);
                if i == 0 {
                    self.lo()
                } else if i >= cdf.len() {
                    self.hi()
                } else {
                    let (c0, c1) = (cdf[i - 1], cdf[i]);
                    let frac = if c1 > c0 { (target - c0) / (c1 - c0) } else { 0.0 };
                    self.grid_y[i - 1] + frac * dx
                }
            })
            .collect())
    }
}

/// Uniform response grid shared by estimators that are compared.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseGrid {
    pub lo: f64,
    pub hi: f64,
    pub size: usize,
}

impl ResponseGrid {
    pub fn new(lo: f64, hi: f64, size: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) || size < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid needs finite lo < hi and >= 2 points, got [{lo}, {hi}] x {size}"
            )));
        }
        Ok(Self { lo, hi, size })
    }

    pub fn from_scaler(scaler: &Scaler, size: usize) -> Self {
        Self { lo: scaler.lo, hi: scaler.hi, size }
    }

    pub fn points(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.size)
    }

    pub fn dx(&self) -> f64 {
        (self.hi - self.lo) / (self.size - 1) as f64
    }
}

pub(crate) fn check_taus(taus: &[f64]) -> Result<()> {
    match taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        Some(t) => Err(Error::InvalidParameter(format!("quantile level {t} must lie in (0, 1)"))),
        None => Ok(()),
    }
}

/// Basis functions tabulated on the response grid of a scaler, reused
/// across many coefficient vectors.
#[derive(Debug, Clone)]
pub struct BasisGrid {
    pub scaler: Scaler,
    pub basis: BasisKind,
    pub grid_y: Vec<f64>,
    /// `table[k][i] = φ_i(z_k)`.
    table: Vec<Vec<f64>>,
}

impl BasisGrid {
    pub fn new(scaler: Scaler, basis: BasisKind, n_terms: usize, grid_size: usize) -> Self {
        let grid_y = linspace(scaler.lo, scaler.hi, grid_size);
        let table = grid_y
            .iter()
            .map(|&y| {
                let z = scaler.transform(y).clamp(0.0, 1.0);
                (0..n_terms).map(|i| basis.eval_unchecked(i, z)).collect()
            })
            .collect();
        Self { scaler, basis, grid_y, table }
    }

    pub fn n_terms(&self) -> usize {
        self.table.first().map_or(0, Vec::len)
    }

    /// `Σ_i c_i φ_i(transform(y)) / (hi − lo)` on the grid.
    pub fn raw_density(&self, coeffs: &[f64]) -> Vec<f64> {
        let jac = self.scaler.jacobian();
        self.table
            .iter()
            .map(|row| {
                let mut acc = 0.0;
                for (c, phi) in coeffs.iter().zip(row) {
                    acc += c * phi;
                }
                acc * jac
            })
            .collect()
    }

    pub fn density(&self, coeffs: &[f64]) -> DensityEstimate {
        DensityEstimate::from_raw(self.grid_y.clone(), self.raw_density(coeffs))
    }
}

/// Density of a coefficient vector without a fitted model.
pub fn density_from_coeffs(scaler: &Scaler, basis: BasisKind, coeffs: &[f64], grid_size: usize) -> DensityEstimate {
    BasisGrid::new(*scaler, basis, coeffs.len(), grid_size).density(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(lo: f64, hi: f64) -> DensityEstimate {
        let g = linspace(lo, hi, 1001);
        let v = vec![1.0 / (hi - lo); 1001];
        DensityEstimate::from_raw(g, v)
    }

    #[test]
    fn constant_term_gives_uniform_density() {
        let s = Scaler::new(-1.0, 3.0, 0.0).unwrap();
        let d = density_from_coeffs(&s, BasisKind::Cosine, &[1.0, 0.0, 0.0], 1001);
        assert!(d.density.iter().all(|v| (v - 0.25).abs() < 1e-12));
        assert!(!d.fallback_uniform);
    }

    #[test]
    fn negative_dip_is_clipped_and_renormalized() {
        let s = Scaler::new(0.0, 1.0, 0.0).unwrap();
        // 1 + c√2 cos(πz) dips below zero near z = 1 once c√2 > 1.
        let c = 0.9;
        let raw_min = 1.0 - c * std::f64::consts::SQRT_2;
        assert!(raw_min < 0.0);
        let d = density_from_coeffs(&s, BasisKind::Cosine, &[1.0, c], 1001);
        assert!(d.raw_density.iter().any(|&v| v < 0.0));
        assert!(d.density.iter().all(|&v| v >= 0.0));
        assert!((d.mass() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn zero_positive_mass_falls_back_to_uniform() {
        let s = Scaler::new(0.0, 2.0, 0.0).unwrap();
        let d = density_from_coeffs(&s, BasisKind::Cosine, &[-1.0], 101);
        assert!(d.fallback_uniform);
        assert!(d.density.iter().all(|&v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn uniform_quantiles() {
        let d = uniform(0.0, 2.0);
        assert!((d.quantile(0.5).unwrap() - 1.0).abs() < 1e-12);
        let q = d.quantiles(&[0.25, 0.75]).unwrap();
        assert!((q[0] - 0.5).abs() < 1e-12 && (q[1] - 1.5).abs() < 1e-12);
        assert!(d.quantile(0.0).is_err());
        assert!(d.quantile(1.0).is_err());
    }

    #[test]
    fn appending_zero_terms_is_bitwise_neutral() {
        let s = Scaler::new(-2.0, 5.0, 0.0).unwrap();
        let a = density_from_coeffs(&s, BasisKind::Cosine, &[1.0, 0.3, -0.2], 1001);
        let b = density_from_coeffs(&s, BasisKind::Cosine, &[1.0, 0.3, -0.2, 0.0, 0.0, 0.0], 1001);
        assert_eq!(a.raw_density, b.raw_density);
    }

    #[test]
    fn value_at_is_zero_off_grid() {
        let d = uniform(0.0, 2.0);
        assert_eq!(d.value_at(-0.1), 0.0);
        assert!((d.value_at(1.3) - 0.5).abs() < 1e-15);
    }
}
