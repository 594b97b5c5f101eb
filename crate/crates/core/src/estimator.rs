//! Series-expansion conditional density estimator.
//!
//! `f̂_I(y|u) = Σ_{i≤I} β̂_i(u) φ_i(y)` where each `β̂_i` is a regression of
//! `φ_i(z)` onto the covariates. Backend hyperparameters and the cutoff `I`
//! are chosen jointly by minimizing the empirical CDE loss on a contiguous
//! validation block that follows the training block.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::basis::{BasisKind, Scaler, DEFAULT_PAD};
use crate::density::{check_taus, BasisGrid, DensityEstimate, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::evaluation::{cde_loss_curve, cde_loss_from_coeffs};
use crate::features::{temporal_split, DesignMatrix, SplitSpec};
use crate::quadrature::linspace;
use crate::regression::{
    default_knn_ks, default_lasso_lambdas, default_nw_radii, knn_predict, knn_predict_multi, lasso_path, nw_predict,
    nw_predict_multi, BackendKind, BackendSpec, CoefficientPredictions, LinearModel, DEFAULT_LASSO_MAX_ITER,
    DEFAULT_LASSO_TOL,
};

pub const DEFAULT_MAX_TERMS: usize = 30;
pub const MIN_TRAIN_ROWS: usize = 30;
pub const PERMUTATION_REPEATS: usize = 5;

/// Candidate backends searched during fitting.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendGrid {
    /// Explicit candidates, searched in the given order.
    Fixed(Vec<BackendSpec>),
    /// The data-driven default grid of each listed kind.
    Auto(Vec<BackendKind>),
}

impl BackendGrid {
    pub fn auto(kind: BackendKind) -> Self {
        BackendGrid::Auto(vec![kind])
    }
}

/// Which loss drives cutoff selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionLoss {
    /// Coefficient form of the raw truncated expansion.
    #[default]
    Raw,
    /// Grid form of the clipped-and-renormalized densities (z units).
    PostProcessed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub basis: BasisKind,
    /// Largest cutoff considered (`I_max`).
    pub max_terms: usize,
    pub backend: BackendGrid,
    pub grid_size: usize,
    pub pad: f64,
    pub selection: SelectionLoss,
    /// Refit the selected backend on train + validation rows.
    pub refit_final: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            basis: BasisKind::Cosine,
            max_terms: DEFAULT_MAX_TERMS,
            backend: BackendGrid::auto(BackendKind::NadarayaWatson),
            grid_size: DEFAULT_GRID_SIZE,
            pad: DEFAULT_PAD,
            selection: SelectionLoss::Raw,
            refit_final: false,
        }
    }
}

impl FitConfig {
    pub fn with_backend(backend: BackendGrid) -> Self {
        Self { backend, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_terms < 1 {
            return Err(Error::InvalidParameter("max_terms must be >= 1".into()));
        }
        if self.grid_size < 101 || self.grid_size.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("grid_size must be odd and >= 101, got {}", self.grid_size)));
        }
        if !(self.pad >= 0.0 && self.pad.is_finite()) {
            return Err(Error::InvalidParameter(format!("pad must be >= 0, got {}", self.pad)));
        }
        Ok(())
    }
}

/// Fitted regression state for the coefficient functions.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedBackend {
    /// NW or kNN: the retained training covariates and scaled responses.
    Memory {
        spec: BackendSpec,
        train_u: Array2<f64>,
        train_z: Vec<f64>,
        /// `φ_i(train_z)` for `i ≤ cutoff`; derived from `train_z`.
        train_phi: Array2<f64>,
    },
    Linear(LinearModel),
}

impl FittedBackend {
    /// Rebuilds a memory backend; `n_terms` basis targets are derived from
    /// `train_z`.
    pub fn memory(
        spec: BackendSpec,
        basis: BasisKind,
        train_u: Array2<f64>,
        train_z: Vec<f64>,
        n_terms: usize,
    ) -> Result<Self> {
        let train_phi = target_matrix(basis, &train_z, n_terms)?;
        Ok(FittedBackend::Memory { spec, train_u, train_z, train_phi })
    }

    pub fn spec(&self) -> BackendSpec {
        match self {
            FittedBackend::Memory { spec, .. } => *spec,
            FittedBackend::Linear(m) => {
                BackendSpec::Lasso { lambda: m.lambda, max_iter: DEFAULT_LASSO_MAX_ITER, tol: DEFAULT_LASSO_TOL }
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FittedBackend::Memory { train_u, .. } => train_u.ncols(),
            FittedBackend::Linear(m) => m.dim(),
        }
    }

    pub fn predict(&self, eval_u: ArrayView2<f64>) -> Result<CoefficientPredictions> {
        match self {
            FittedBackend::Memory { spec: BackendSpec::NadarayaWatson { radius }, train_u, train_phi, .. } => {
                nw_predict(train_u.view(), train_phi.view(), eval_u, *radius)
            }
            FittedBackend::Memory { spec: BackendSpec::Knn { k }, train_u, train_phi, .. } => {
                knn_predict(train_u.view(), train_phi.view(), eval_u, *k)
            }
            FittedBackend::Memory { spec, .. } => {
                Err(Error::InvalidParameter(format!("{} is not a memory-based backend", spec.describe())))
            }
            FittedBackend::Linear(m) => m.predict(eval_u),
        }
    }
}

/// Validation summary of one backend candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSummary {
    pub spec: BackendSpec,
    pub best_cutoff: usize,
    pub best_loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FitDiagnostics {
    /// The selected cutoff equals `max_terms`; a larger value may help.
    pub cutoff_at_max: bool,
    /// Validation rows that hit the NW zero-neighbor fallback for the
    /// selected candidate.
    pub validation_fallbacks: usize,
    /// Validation responses outside the training-based support.
    pub validation_outside: usize,
    /// Every LASSO fit met its tolerance (always true for other backends).
    pub lasso_converged: bool,
}

/// A fitted estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientModel {
    pub scaler: Scaler,
    pub basis: BasisKind,
    pub backend: FittedBackend,
    /// Selected cutoff `I`.
    pub cutoff: usize,
    pub max_terms: usize,
    /// Validation loss for `I = 0..=max_terms` at the selected hyperparameters.
    pub val_loss_curve: Vec<f64>,
    pub candidates: Vec<CandidateSummary>,
    pub grid_size: usize,
    pub feature_names: Vec<String>,
    pub diagnostics: FitDiagnostics,
}

/// `n × n_terms` matrix of `φ_i(z_t)`.
pub fn target_matrix(basis: BasisKind, z: &[f64], n_terms: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((z.len(), n_terms));
    for (mut row, &zt) in out.rows_mut().into_iter().zip(z) {
        basis.eval_all(zt, row.as_slice_mut().expect("row-major"))?;
    }
    Ok(out)
}

/// Like [`target_matrix`] but zero rows for `z` outside `[0, 1]`.
fn eval_matrix(basis: BasisKind, z: &[f64], n_terms: usize) -> (Array2<f64>, usize) {
    let mut out = Array2::zeros((z.len(), n_terms));
    let mut outside = 0;
    for (mut row, &zt) in out.rows_mut().into_iter().zip(z) {
        if basis.eval_all(zt, row.as_slice_mut().expect("row-major")).is_err() {
            row.fill(0.0);
            outside += 1;
        }
    }
    (out, outside)
}

fn expand_candidates(
    grid: &BackendGrid,
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
) -> Result<Vec<BackendSpec>> {
    let specs = match grid {
        BackendGrid::Fixed(specs) => specs.clone(),
        BackendGrid::Auto(kinds) => {
            let mut specs = Vec::new();
            for kind in kinds {
                match kind {
                    BackendKind::NadarayaWatson => specs.extend(
                        default_nw_radii(train_u).into_iter().map(|radius| BackendSpec::NadarayaWatson { radius }),
                    ),
                    BackendKind::Knn => {
                        specs.extend(default_knn_ks(train_u.nrows()).into_iter().map(|k| BackendSpec::Knn { k }))
                    }
                    BackendKind::Lasso => {
                        specs.extend(default_lasso_lambdas(train_u, train_phi)?.into_iter().map(BackendSpec::lasso))
                    }
                }
            }
            specs
        }
    };
    if specs.is_empty() {
        return Err(Error::InvalidParameter("empty backend grid".into()));
    }
    for s in &specs {
        s.validate()?;
        if let BackendSpec::Knn { k } = s {
            if *k > train_u.nrows() {
                return Err(Error::InvalidParameter(format!("kNN k = {k} exceeds {} training rows", train_u.nrows())));
            }
        }
    }
    Ok(specs)
}

/// Validation predictions for every candidate, grouped by kind so that
/// neighborhoods and LASSO paths are shared. Returned in candidate order.
fn candidate_predictions(
    specs: &[BackendSpec],
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    val_u: ArrayView2<f64>,
) -> Result<(Vec<CoefficientPredictions>, Vec<Option<LinearModel>>)> {
    let mut preds: Vec<Option<CoefficientPredictions>> = vec![None; specs.len()];
    let mut linear: Vec<Option<LinearModel>> = vec![None; specs.len()];

    let idx_nw: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].kind() == BackendKind::NadarayaWatson).collect();
    if !idx_nw.is_empty() {
        let radii: Vec<f64> = idx_nw
            .iter()
            .map(|&i| match specs[i] {
                BackendSpec::NadarayaWatson { radius } => radius,
                _ => unreachable!(),
            })
            .collect();
        for (i, p) in idx_nw.iter().zip(nw_predict_multi(train_u, train_phi, val_u, &radii)?) {
            preds[*i] = Some(p);
        }
    }

    let idx_knn: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].kind() == BackendKind::Knn).collect();
    if !idx_knn.is_empty() {
        let ks: Vec<usize> = idx_knn
            .iter()
            .map(|&i| match specs[i] {
                BackendSpec::Knn { k } => k,
                _ => unreachable!(),
            })
            .collect();
        for (i, p) in idx_knn.iter().zip(knn_predict_multi(train_u, train_phi, val_u, &ks)?) {
            preds[*i] = Some(p);
        }
    }

    // LASSO candidates sharing (max_iter, tol) form one warm-started path,
    // fitted from the largest penalty down.
    let mut idx_lasso: Vec<usize> = (0..specs.len()).filter(|&i| specs[i].kind() == BackendKind::Lasso).collect();
    while !idx_lasso.is_empty() {
        let (mi, tl) = match specs[idx_lasso[0]] {
            BackendSpec::Lasso { max_iter, tol, .. } => (max_iter, tol),
            _ => unreachable!(),
        };
        let (mut group, rest): (Vec<usize>, Vec<usize>) = idx_lasso.iter().partition(
            |&&i| matches!(specs[i], BackendSpec::Lasso { max_iter, tol, .. } if max_iter == mi && tol == tl),
        );
        idx_lasso = rest;
        let lambda_of = |i: usize| match specs[i] {
            BackendSpec::Lasso { lambda, .. } => lambda,
            _ => unreachable!(),
        };
        group.sort_by(|&a, &b| lambda_of(b).total_cmp(&lambda_of(a)).then(a.cmp(&b)));
        let lambdas: Vec<f64> = group.iter().map(|&i| lambda_of(i)).collect();
        let path = lasso_path(train_u, train_phi, &lambdas, mi, tl)?;
        for (&i, model) in group.iter().zip(path) {
            preds[i] = Some(model.predict(val_u)?);
            linear[i] = Some(model);
        }
    }

    Ok((preds.into_iter().map(|p| p.expect("every candidate predicted")).collect(), linear))
}

/// Validation loss for every cutoff of one candidate.
fn loss_curve(
    selection: SelectionLoss,
    b_hat: ArrayView2<f64>,
    val_phi: ArrayView2<f64>,
    val_z: &[f64],
    basis_grid: &BasisGrid,
) -> Result<Vec<f64>> {
    match selection {
        SelectionLoss::Raw => cde_loss_curve(b_hat, val_phi),
        SelectionLoss::PostProcessed => {
            Ok(post_processed_curve(b_hat, val_z, basis_grid.basis, basis_grid.grid_y.len()))
        }
    }
}

/// Grid-form loss in z units of the clipped and renormalized density at
/// every cutoff, growing the raw density one term at a time.
fn post_processed_curve(b_hat: ArrayView2<f64>, val_z: &[f64], basis: BasisKind, grid_size: usize) -> Vec<f64> {
    let n_terms = b_hat.ncols();
    let zs = linspace(0.0, 1.0, grid_size);
    let dz = 1.0 / (grid_size - 1) as f64;
    let table: Vec<Vec<f64>> = (0..n_terms).map(|i| zs.iter().map(|&z| basis.eval_unchecked(i, z)).collect()).collect();
    let per_row: Vec<Vec<f64>> = b_hat
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(val_z.par_iter())
        .map(|(b, &z)| {
            let mut raw = vec![0.0; grid_size];
            let mut out = Vec::with_capacity(n_terms);
            for (i, phi) in table.iter().enumerate() {
                raw.iter_mut().zip(phi).for_each(|(r, p)| *r += b[i] * p);
                let clip = |v: f64| if v > 0.0 && v.is_finite() { v } else { 0.0 };
                let (mut mass, mut sq) = (0.0, 0.0);
                for (k, &v) in raw.iter().enumerate() {
                    let w = if k == 0 || k == grid_size - 1 { 0.5 } else { 1.0 };
                    let c = clip(v);
                    mass += w * c;
                    sq += w * c * c;
                }
                let (mass, sq) = (mass * dz, sq * dz);
                let contrib = if mass > 0.0 && mass.is_finite() {
                    let at = if (0.0..=1.0).contains(&z) {
                        let pos = z * (grid_size - 1) as f64;
                        let left = (pos.floor() as usize).min(grid_size - 2);
                        let frac = pos - left as f64;
                        clip(raw[left]) + frac * (clip(raw[left + 1]) - clip(raw[left]))
                    } else {
                        0.0
                    };
                    sq / (mass * mass) - 2.0 * at / mass
                } else {
                    1.0 - if (0.0..=1.0).contains(&z) { 2.0 } else { 0.0 }
                };
                out.push(contrib);
            }
            out
        })
        .collect();
    (0..n_terms).map(|i| per_row.iter().map(|r| r[i]).sum::<f64>() / per_row.len() as f64).collect()
}

/// Fits on the training block and tunes on the validation block of a
/// temporal split of `design`.
pub fn fit(design: &DesignMatrix, split: &SplitSpec, cfg: &FitConfig) -> Result<CoefficientModel> {
    let s = temporal_split(design.n_rows(), split)?;
    fit_blocks(&design.slice(s.train), &design.slice(s.val), cfg)
}

/// Fits with explicit training and validation blocks.
pub fn fit_blocks(train: &DesignMatrix, val: &DesignMatrix, cfg: &FitConfig) -> Result<CoefficientModel> {
    cfg.validate()?;
    if train.n_rows() < MIN_TRAIN_ROWS {
        return Err(Error::InsufficientData(format!(
            "training block needs >= {MIN_TRAIN_ROWS} rows, got {}",
            train.n_rows()
        )));
    }
    if val.n_rows() == 0 {
        return Err(Error::EmptySplit("validation block is empty".into()));
    }
    if train.dim() != val.dim() {
        return Err(Error::DimensionMismatch { expected: train.dim(), got: val.dim() });
    }
    if train.u.iter().chain(val.u.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariates must be finite".into()));
    }

    let n_terms = cfg.max_terms + 1;
    let scaler = Scaler::fit(&train.y, cfg.pad)?;
    let train_z: Vec<f64> = train.y.iter().map(|&y| scaler.transform(y)).collect();
    let train_phi = target_matrix(cfg.basis, &train_z, n_terms)?;
    let val_z: Vec<f64> = val.y.iter().map(|&y| scaler.transform(y)).collect();
    let (val_phi, val_outside) = eval_matrix(cfg.basis, &val_z, n_terms);

    let specs = expand_candidates(&cfg.backend, train.u.view(), train_phi.view())?;
    let (preds, linear) = candidate_predictions(&specs, train.u.view(), train_phi.view(), val.u.view())?;
    let basis_grid = BasisGrid::new(scaler, cfg.basis, 1, cfg.grid_size);

    let curves: Vec<Vec<f64>> = preds
        .iter()
        .map(|p| loss_curve(cfg.selection, p.values.view(), val_phi.view(), &val_z, &basis_grid))
        .collect::<Result<_>>()?;

    let mut best: Option<(f64, usize, usize)> = None;
    let mut candidates = Vec::with_capacity(specs.len());
    for (g, curve) in curves.iter().enumerate() {
        if let Some(cutoff) = curve.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteLoss { cutoff });
        }
        let mut local = (f64::INFINITY, 0usize);
        for (i, &l) in curve.iter().enumerate() {
            if l < local.0 {
                local = (l, i);
            }
            let better = match best {
                None => true,
                Some(current) => (l, i, g) < current,
            };
            if better {
                best = Some((l, i, g));
            }
        }
        candidates.push(CandidateSummary { spec: specs[g], best_cutoff: local.1, best_loss: local.0 });
    }
    let (_, cutoff, g) = best.expect("nonempty grid");
    let spec = specs[g];

    let (fit_u, fit_z) = if cfg.refit_final {
        let all = train.concat(val)?;
        let z: Vec<f64> = all.y.iter().map(|&y| scaler.transform(y).clamp(0.0, 1.0)).collect();
        (all.u, z)
    } else {
        (train.u.clone(), train_z)
    };

    let mut lasso_converged = true;
    let backend = match spec {
        BackendSpec::Lasso { lambda, max_iter, tol } => {
            let model = if cfg.refit_final {
                let phi = target_matrix(cfg.basis, &fit_z, cutoff + 1)?;
                lasso_path(fit_u.view(), phi.view(), &[lambda], max_iter, tol)?.remove(0)
            } else {
                truncate_linear(linear[g].clone().expect("lasso candidate keeps its model"), cutoff + 1)
            };
            lasso_converged = model.converged;
            FittedBackend::Linear(model)
        }
        _ => FittedBackend::memory(spec, cfg.basis, fit_u, fit_z, cutoff + 1)?,
    };

    Ok(CoefficientModel {
        scaler,
        basis: cfg.basis,
        backend,
        cutoff,
        max_terms: cfg.max_terms,
        val_loss_curve: curves[g].clone(),
        candidates,
        grid_size: cfg.grid_size,
        feature_names: train.feature_names.clone(),
        diagnostics: FitDiagnostics {
            cutoff_at_max: cutoff == cfg.max_terms,
            validation_fallbacks: preds[g].fallback_count,
            validation_outside: val_outside,
            lasso_converged,
        },
    })
}

fn truncate_linear(mut m: LinearModel, n_terms: usize) -> LinearModel {
    m.intercepts.truncate(n_terms);
    m.slopes = m.slopes.slice(ndarray::s![..n_terms, ..]).to_owned();
    m.std_slopes = m.std_slopes.slice(ndarray::s![..n_terms, ..]).to_owned();
    m
}

impl CoefficientModel {
    pub fn dim(&self) -> usize {
        self.backend.dim()
    }

    pub fn selected_backend(&self) -> BackendSpec {
        self.backend.spec()
    }

    /// `β̂_0..β̂_I` at each row of `u`.
    pub fn predict_coefficients(&self, u: ArrayView2<f64>) -> Result<CoefficientPredictions> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.ncols() });
        }
        let mut p = self.backend.predict(u)?;
        if p.values.ncols() > self.cutoff + 1 {
            p.values = p.values.slice(ndarray::s![.., ..=self.cutoff]).to_owned();
        }
        Ok(p)
    }

    pub fn basis_grid(&self) -> BasisGrid {
        BasisGrid::new(self.scaler, self.basis, self.cutoff + 1, self.grid_size)
    }

    pub fn predict_density(&self, u: &[f64]) -> Result<DensityEstimate> {
        let row = ArrayView2::from_shape((1, u.len()), u).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        Ok(self.predict_densities(row)?.remove(0))
    }

    /// Densities for every row of `u`, sharing one basis table.
    pub fn predict_densities(&self, u: ArrayView2<f64>) -> Result<Vec<DensityEstimate>> {
        let coeffs = self.predict_coefficients(u)?;
        let grid = self.basis_grid();
        Ok(coeffs
            .values
            .axis_iter(Axis(0))
            .into_par_iter()
            .map(|row| grid.density(row.as_slice().expect("row-major")))
            .collect())
    }

    pub fn predict_quantiles(&self, u: &[f64], taus: &[f64]) -> Result<Vec<f64>> {
        check_taus(taus)?;
        self.predict_density(u)?.quantiles(taus)
    }

    /// Empirical CDE loss (z units) of the raw expansion on `rows`.
    pub fn coefficient_loss(&self, rows: &DesignMatrix) -> Result<crate::evaluation::CdeLossReport> {
        let b = self.predict_coefficients(rows.u.view())?;
        let z: Vec<f64> = rows.y.iter().map(|&y| self.scaler.transform(y)).collect();
        cde_loss_from_coeffs(b.values.view(), &z, self.basis, self.cutoff)
    }

    /// Per-feature nonnegative importance scores.
    ///
    /// LASSO: mean over `i ≤ I` of the absolute standardized slope.
    /// NW/kNN: mean increase in validation loss over
    /// [`PERMUTATION_REPEATS`] seeded permutations of the feature column,
    /// floored at zero.
    pub fn importance(&self, val: &DesignMatrix, seed: u64) -> Result<Vec<f64>> {
        if val.n_rows() == 0 {
            return Err(Error::EmptySplit("importance needs validation rows".into()));
        }
        if val.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: val.dim() });
        }
        match &self.backend {
            FittedBackend::Linear(m) => {
                let rows = (self.cutoff + 1).min(m.std_slopes.nrows());
                Ok((0..m.dim())
                    .map(|j| {
                        let s: f64 = (0..rows).map(|i| m.std_slopes[[i, j]].abs()).sum();
                        s / rows as f64
                    })
                    .collect())
            }
            FittedBackend::Memory { .. } => {
                let base = self.coefficient_loss(val)?.loss;
                (0..self.dim())
                    .into_par_iter()
                    .map(|j| {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
                        let mut shuffled = val.clone();
                        let mut col: Vec<f64> = val.u.column(j).to_vec();
                        let mut total = 0.0;
                        for _ in 0..PERMUTATION_REPEATS {
                            col.shuffle(&mut rng);
                            shuffled.u.column_mut(j).iter_mut().zip(&col).for_each(|(d, s)| *d = *s);
                            total += self.coefficient_loss(&shuffled)?.loss - base;
                        }
                        Ok((total / PERMUTATION_REPEATS as f64).max(0.0))
                    })
                    .collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{lag_embed, EmbedOptions, SeriesTable};
    use crate::scenarios::{ScenarioName, ScenarioSpec};
    use rand::Rng;

    fn iid_uniform_design(n: usize, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(2.0..5.0)).collect();
        lag_embed(&SeriesTable::univariate(y).unwrap(), &EmbedOptions::lags(2)).unwrap()
    }

    #[test]
    fn uniform_noise_selects_a_small_cutoff() {
        let mut cutoffs = Vec::new();
        let mut sup_errs = Vec::new();
        for seed in 0..10 {
            let d = iid_uniform_design(2000, seed);
            // Unpadded, so the uniform truth has beta_i = 0 for i >= 1.
            let cfg = FitConfig { pad: 0.0, ..FitConfig::default() };
            let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
            cutoffs.push(m.cutoff);
            let dens = m.predict_density(&[3.0, 4.0]).unwrap();
            let n = dens.grid_y.len();
            // Central 90% of the true support [2, 5].
            let err = dens
                .grid_y
                .iter()
                .zip(&dens.density)
                .take(n)
                .filter(|(y, _)| **y >= 2.15 && **y <= 4.85)
                .map(|(_, v)| (v - 1.0 / 3.0).abs())
                .fold(0.0, f64::max);
            sup_errs.push(err);
        }
        cutoffs.sort_unstable();
        sup_errs.sort_by(f64::total_cmp);
        assert!(cutoffs[5] <= 3, "{cutoffs:?}");
        assert!(sup_errs[5] < 0.1, "{sup_errs:?}");
    }

    #[test]
    fn ar_validation_curve_improves_on_the_constant() {
        let y = ScenarioSpec::new(ScenarioName::Ar, 5000, 3).generate().unwrap().y;
        let d = lag_embed(&SeriesTable::univariate(y).unwrap(), &EmbedOptions::lags(3)).unwrap();
        let m = fit(&d, &SplitSpec::default(), &FitConfig::default()).unwrap();
        assert!(m.cutoff >= 1);
        let c = &m.val_loss_curve;
        assert!(c[m.cutoff] < c[0]);
        // Optimality with ties toward smaller I.
        assert!(c.iter().all(|&v| v >= c[m.cutoff]));
        assert!(c[..m.cutoff].iter().all(|&v| v > c[m.cutoff]));
    }

    #[test]
    fn empty_validation_is_an_error() {
        let d = iid_uniform_design(200, 1);
        let train = d.slice(0..150);
        let val = d.slice(150..150);
        assert!(matches!(fit_blocks(&train, &val, &FitConfig::default()), Err(Error::EmptySplit(_))));
        assert!(fit_blocks(&d.slice(0..20), &d.slice(20..40), &FitConfig::default()).is_err());
    }

    #[test]
    fn wrong_covariate_length() {
        let d = iid_uniform_design(300, 2);
        let m = fit(&d, &SplitSpec::default(), &FitConfig::default()).unwrap();
        assert!(matches!(m.predict_density(&[1.0]), Err(Error::DimensionMismatch { .. })));
        assert!(m.predict_quantiles(&[3.0, 3.0], &[0.0]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::default();
        cfg.grid_size = 1000;
        assert!(cfg.validate().is_err());
        cfg.grid_size = 99;
        assert!(cfg.validate().is_err());
        cfg = FitConfig { max_terms: 0, ..FitConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let d = iid_uniform_design(800, 4);
        let cfg = FitConfig::with_backend(BackendGrid::Auto(vec![BackendKind::NadarayaWatson, BackendKind::Knn]));
        let a = fit(&d, &SplitSpec::default(), &cfg).unwrap();
        let b = fit(&d, &SplitSpec::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.importance(&d.slice(560..640), 9).unwrap(), b.importance(&d.slice(560..640), 9).unwrap());
    }

    #[test]
    fn lasso_importance_of_a_zero_feature_is_zero() {
        let base = iid_uniform_design(600, 5);
        let mut u = Array2::zeros((base.n_rows(), 3));
        u.slice_mut(ndarray::s![.., ..2]).assign(&base.u);
        let d = DesignMatrix {
            u,
            y: base.y.clone(),
            feature_names: vec!["lag1".into(), "lag2".into(), "zero".into()],
            origin_index: base.origin_index.clone(),
        };
        let m =
            fit(&d, &SplitSpec::default(), &FitConfig::with_backend(BackendGrid::auto(BackendKind::Lasso))).unwrap();
        let s = m.importance(&d.slice(420..480), 0).unwrap();
        assert_eq!(s[2], 0.0);
        assert!(s.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn permutation_importance_of_an_ignored_feature_is_zero() {
        let d = iid_uniform_design(400, 6);
        let s = temporal_split(d.n_rows(), &SplitSpec::default()).unwrap();
        let all = s.train.len();
        let cfg = FitConfig::with_backend(BackendGrid::Fixed(vec![BackendSpec::Knn { k: all }]));
        let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
        let scores = m.importance(&d.slice(s.val), 1).unwrap();
        assert!(scores.iter().all(|&v| v.abs() < 1e-12), "{scores:?}");
    }

    #[test]
    fn post_processed_selection_runs_and_differs_only_in_curve() {
        let y = ScenarioSpec::new(ScenarioName::NonlinearVariance, 1500, 8).generate().unwrap().y;
        let d = lag_embed(&SeriesTable::univariate(y).unwrap(), &EmbedOptions::lags(3)).unwrap();
        let cfg = FitConfig { selection: SelectionLoss::PostProcessed, max_terms: 15, ..FitConfig::default() };
        let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
        assert_eq!(m.val_loss_curve.len(), 16);
        assert!(m.val_loss_curve.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn incremental_post_processed_curve_matches_direct_densities() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let b = Array2::from_shape_fn((40, 12), |(_, i)| if i == 0 { 1.0 } else { rng.random_range(-0.6..0.6) });
        let z: Vec<f64> = (0..40).map(|t| if t == 3 { 1.2 } else { rng.random_range(0.0..1.0) }).collect();
        let curve = post_processed_curve(b.view(), &z, BasisKind::Cosine, 201);
        let unit = Scaler::new(0.0, 1.0, 0.0).unwrap();
        let grid = BasisGrid::new(unit, BasisKind::Cosine, 12, 201);
        for (cutoff, &value) in curve.iter().enumerate() {
            let dens: Vec<DensityEstimate> =
                b.rows().into_iter().map(|r| grid.density(&r.as_slice().unwrap()[..=cutoff])).collect();
            let direct = crate::evaluation::cde_loss_grid(&dens, &z).unwrap().loss;
            assert!((value - direct).abs() < 1e-12, "cutoff {cutoff}: {value} vs {direct}");
        }
    }

    #[test]
    fn refit_final_uses_validation_rows() {
        let d = iid_uniform_design(500, 7);
        let cfg = FitConfig { refit_final: true, ..FitConfig::default() };
        let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
        match &m.backend {
            FittedBackend::Memory { train_u, .. } => {
                let s = temporal_split(d.n_rows(), &SplitSpec::default()).unwrap();
                assert_eq!(train_u.nrows(), s.train.len() + s.val.len());
            }
            _ => panic!("expected NW backend"),
        }
    }
}
