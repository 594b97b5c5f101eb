//! Loss functionals: the empirical CDE loss (known up to the additive
//! constant `∫∫ f²`), the pinball loss, and an exact quadrature loss for
//! simulations with a known conditional density.

use ndarray::ArrayView2;

use crate::basis::BasisKind;
use crate::density::{check_taus, DensityEstimate};
use crate::error::{Error, Result};
use crate::quadrature::{linspace, trapezoid};

/// Quadrature points used by [`oracle_cde_loss`].
pub const ORACLE_GRID_SIZE: usize = 2001;

/// Empirical CDE loss with its standard error. `loss` omits the constant
/// `∫∫ f² dy dP(u)` and is usually negative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdeLossReport {
    pub loss: f64,
    /// Sample standard deviation of per-row contributions over `√n_eval`;
    /// ignores serial dependence.
    pub std_error: f64,
    pub n_eval: usize,
    /// Responses outside the estimate's support; they contribute `f̂ = 0`.
    pub outside_count: usize,
}

impl CdeLossReport {
    pub fn from_contributions(contributions: &[f64], outside_count: usize) -> Result<Self> {
        let n = contributions.len();
        if n == 0 {
            return Err(Error::EmptySplit("loss needs at least one evaluation row".into()));
        }
        let mean = contributions.iter().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = contributions.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        if !mean.is_finite() {
            return Err(Error::NumericFailure("non-finite CDE loss".into()));
        }
        Ok(Self { loss: mean, std_error, n_eval: n, outside_count })
    }
}

/// Coefficient form: with an orthonormal basis `∫ f̂² = Σ_{i≤I} β̂_i²`, so
/// row `t` contributes `Σ_{i≤I} β̂_i(U_t)² − 2 Σ_{i≤I} β̂_i(U_t) φ_i(z_t)`.
/// Units are those of the scaled response `z`.
pub fn cde_loss_from_coeffs(
    b_hat: ArrayView2<f64>,
    eval_z: &[f64],
    basis: BasisKind,
    cutoff: usize,
) -> Result<CdeLossReport> {
    if cutoff >= b_hat.ncols() {
        return Err(Error::InvalidParameter(format!(
            "cutoff {cutoff} needs at least {} coefficient columns, got {}",
            cutoff + 1,
            b_hat.ncols()
        )));
    }
    if b_hat.nrows() != eval_z.len() {
        return Err(Error::DimensionMismatch { expected: b_hat.nrows(), got: eval_z.len() });
    }
    let mut outside = 0;
    let mut phi = vec![0.0; cutoff + 1];
    let contributions: Vec<f64> = b_hat
        .rows()
        .into_iter()
        .zip(eval_z)
        .map(|(row, &z)| {
            let norm: f64 = row.iter().take(cutoff + 1).map(|b| b * b).sum();
            let at_obs = if basis.eval_all(z, &mut phi).is_ok() {
                row.iter().zip(&phi).map(|(b, p)| b * p).sum::<f64>()
            } else {
                outside += 1;
                0.0
            };
            norm - 2.0 * at_obs
        })
        .collect();
    CdeLossReport::from_contributions(&contributions, outside)
}

/// Loss for every cutoff `0..b_hat.ncols()` at once. `eval_phi[t][i]` holds
/// `φ_i(z_t)`, with an all-zero row for responses outside `[0, 1]`.
pub fn cde_loss_curve(b_hat: ArrayView2<f64>, eval_phi: ArrayView2<f64>) -> Result<Vec<f64>> {
    if b_hat.dim() != eval_phi.dim() {
        return Err(Error::DimensionMismatch { expected: b_hat.nrows(), got: eval_phi.nrows() });
    }
    let (n, m) = b_hat.dim();
    if n == 0 {
        return Err(Error::EmptySplit("loss needs at least one evaluation row".into()));
    }
    let mut totals = vec![0.0; m];
    for (brow, prow) in b_hat.rows().into_iter().zip(eval_phi.rows()) {
        let mut acc = 0.0;
        for i in 0..m {
            acc += brow[i] * brow[i] - 2.0 * brow[i] * prow[i];
            totals[i] += acc;
        }
    }
    Ok(totals.into_iter().map(|t| t / n as f64).collect())
}

/// Grid form for estimates without a coefficient representation: `∫ f̂²`
/// by trapezoid, `f̂(Y_t)` by linear interpolation. Response units.
pub fn cde_loss_grid(densities: &[DensityEstimate], y_eval: &[f64]) -> Result<CdeLossReport> {
    if densities.len() != y_eval.len() {
        return Err(Error::DimensionMismatch { expected: densities.len(), got: y_eval.len() });
    }
    let mut outside = 0;
    let contributions: Vec<f64> = densities
        .iter()
        .zip(y_eval)
        .map(|(d, &y)| {
            if y < d.lo() || y > d.hi() {
                outside += 1;
            }
            d.squared_integral() - 2.0 * d.value_at(y)
        })
        .collect();
    CdeLossReport::from_contributions(&contributions, outside)
}

/// Mean of `τ (y − q)⁺ + (1 − τ)(q − y)⁺`.
pub fn pinball_loss(q_pred: &[f64], y: &[f64], tau: f64) -> Result<f64> {
    check_taus(&[tau])?;
    if q_pred.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: y.len(), got: q_pred.len() });
    }
    if y.is_empty() {
        return Err(Error::EmptySplit("pinball loss needs at least one response".into()));
    }
    let total: f64 = q_pred
        .iter()
        .zip(y)
        .map(|(&q, &v)| {
            let r = v - q;
            if r >= 0.0 {
                tau * r
            } else {
                (tau - 1.0) * r
            }
        })
        .sum();
    Ok(total / y.len() as f64)
}

/// `mean_t ∫_lo^hi (f̂(y|u_t) − f(y|u_t))² dy` by trapezoid quadrature on
/// [`ORACLE_GRID_SIZE`] points. Both callbacks take `(row, y)`.
pub fn oracle_cde_loss<T, E>(truth: T, estimate: E, lo: f64, hi: f64, n_rows: usize) -> f64
where
    T: Fn(usize, f64) -> f64,
    E: Fn(usize, f64) -> f64,
{
    if n_rows == 0 {
        return 0.0;
    }
    let grid = linspace(lo, hi, ORACLE_GRID_SIZE);
    let dx = (hi - lo) / (ORACLE_GRID_SIZE - 1) as f64;
    let mut sq = vec![0.0; grid.len()];
    let total: f64 = (0..n_rows)
        .map(|t| {
            for (s, &y) in sq.iter_mut().zip(&grid) {
                let diff = estimate(t, y) - truth(t, y);
                *s = diff * diff;
            }
            trapezoid(&sq, dx)
        })
        .sum();
    total / n_rows as f64
}

/// [`oracle_cde_loss`] for grid densities, each integrated over its own
/// support.
pub fn oracle_cde_loss_densities<T>(truth: T, densities: &[DensityEstimate]) -> f64
where
    T: Fn(usize, f64) -> f64,
{
    if densities.is_empty() {
        return 0.0;
    }
    let total: f64 = densities
        .iter()
        .enumerate()
        .map(|(t, d)| oracle_cde_loss(|_, y| truth(t, y), |_, y| d.value_at(y), d.lo(), d.hi(), 1))
        .sum();
    total / densities.len() as f64
}
