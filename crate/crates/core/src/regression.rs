//! Multi-target regression backends for the coefficient functions.
//!
//! Every backend maps training pairs `(u_j, Φ_j)` with
//! `Φ_j = (φ_0(z_j), …, φ_I(z_j))` to predicted coefficient rows at
//! arbitrary evaluation points. Neighborhoods (NW, kNN) and the LASSO
//! standardization are computed once and shared across target columns.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LASSO_MAX_ITER: usize = 10_000;
pub const DEFAULT_LASSO_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    NadarayaWatson,
    Knn,
    Lasso,
}

impl BackendKind {
    pub fn name(self) -> &'static str {
        match self {
            BackendKind::NadarayaWatson => "nw",
            BackendKind::Knn => "knn",
            BackendKind::Lasso => "lasso",
        }
    }
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nw" | "nadaraya_watson" | "nadaraya-watson" => Ok(BackendKind::NadarayaWatson),
            "knn" => Ok(BackendKind::Knn),
            "lasso" => Ok(BackendKind::Lasso),
            other => Err(Error::InvalidParameter(format!("unknown backend '{other}'"))),
        }
    }
}

/// One backend with concrete hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendSpec {
    /// Uniform-kernel local average over the ball of the given radius.
    NadarayaWatson {
        radius: f64,
    },
    Knn {
        k: usize,
    },
    Lasso {
        lambda: f64,
        max_iter: usize,
        tol: f64,
    },
}

impl BackendSpec {
    pub fn lasso(lambda: f64) -> Self {
        BackendSpec::Lasso { lambda, max_iter: DEFAULT_LASSO_MAX_ITER, tol: DEFAULT_LASSO_TOL }
    }

    pub fn kind(&self) -> BackendKind {
        match self {
            BackendSpec::NadarayaWatson { .. } => BackendKind::NadarayaWatson,
            BackendSpec::Knn { .. } => BackendKind::Knn,
            BackendSpec::Lasso { .. } => BackendKind::Lasso,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BackendSpec::NadarayaWatson { radius } if !(radius > 0.0 && radius.is_finite()) => {
                Err(Error::InvalidParameter(format!("NW radius must be > 0, got {radius}")))
            }
            BackendSpec::Knn { k: 0 } => Err(Error::InvalidParameter("kNN needs k >= 1".into())),
            BackendSpec::Lasso { lambda, max_iter, tol } => {
                if !(lambda >= 0.0 && lambda.is_finite()) {
                    Err(Error::InvalidParameter(format!("LASSO penalty must be >= 0, got {lambda}")))
                } else if max_iter == 0 || tol.is_nan() || tol <= 0.0 {
                    Err(Error::InvalidParameter("LASSO needs max_iter >= 1 and tol > 0".into()))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// Short human-readable hyperparameter description.
    pub fn describe(&self) -> String {
        match self {
            BackendSpec::NadarayaWatson { radius } => format!("nw(radius={radius:.6})"),
            BackendSpec::Knn { k } => format!("knn(k={k})"),
            BackendSpec::Lasso { lambda, .. } => format!("lasso(lambda={lambda:.6e})"),
        }
    }
}

/// Predicted coefficient rows, `n_eval × n_targets`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientPredictions {
    pub values: Array2<f64>,
    /// Evaluation rows that had no training point within the NW radius and
    /// fell back to the global mean.
    pub fallback_count: usize,
}

fn check_inputs(train_u: ArrayView2<f64>, train_phi: ArrayView2<f64>, eval_u: ArrayView2<f64>) -> Result<()> {
    if train_u.nrows() == 0 {
        return Err(Error::InsufficientData("empty training design".into()));
    }
    if train_u.nrows() != train_phi.nrows() {
        return Err(Error::DimensionMismatch { expected: train_u.nrows(), got: train_phi.nrows() });
    }
    if train_u.ncols() != eval_u.ncols() {
        return Err(Error::DimensionMismatch { expected: train_u.ncols(), got: eval_u.ncols() });
    }
    Ok(())
}

fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn column_means(m: ArrayView2<f64>) -> Array1<f64> {
    let mut acc = Array1::zeros(m.ncols());
    for row in m.rows() {
        acc += &row;
    }
    acc / m.nrows() as f64
}

/// Nadaraya–Watson with the uniform kernel `1(‖U_j − u‖₂ ≤ δ)`.
pub fn nw_predict(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    eval_u: ArrayView2<f64>,
    radius: f64,
) -> Result<CoefficientPredictions> {
    Ok(nw_predict_multi(train_u, train_phi, eval_u, &[radius])?.remove(0))
}

/// NW predictions for several radii from a single pass over the distances.
///
/// Each output is bitwise identical to a separate [`nw_predict`] call.
pub fn nw_predict_multi(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    eval_u: ArrayView2<f64>,
    radii: &[f64],
) -> Result<Vec<CoefficientPredictions>> {
    check_inputs(train_u, train_phi, eval_u)?;
    for &r in radii {
        BackendSpec::NadarayaWatson { radius: r }.validate()?;
    }
    let mut order: Vec<usize> = (0..radii.len()).collect();
    order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]));
    let sorted_sq: Vec<f64> = order.iter().map(|&i| radii[i] * radii[i]).collect();
    let n_targets = train_phi.ncols();
    let global = column_means(train_phi);

    let rows: Vec<(Vec<Array1<f64>>, Vec<bool>)> = eval_u
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|q| {
            let mut sums = vec![Array1::<f64>::zeros(n_targets); radii.len()];
            let mut counts = vec![0usize; radii.len()];
            for (j, tu) in train_u.axis_iter(Axis(0)).enumerate() {
                let d2 = sq_dist(tu, q);
                let first = sorted_sq.partition_point(|&r2| r2 < d2);
                if first == sorted_sq.len() {
                    continue;
                }
                let phi = train_phi.row(j);
                for b in first..sorted_sq.len() {
                    sums[b] += &phi;
                    counts[b] += 1;
                }
            }
            let mut fell_back = vec![false; radii.len()];
            for b in 0..radii.len() {
                if counts[b] == 0 {
                    sums[b].assign(&global);
                    fell_back[b] = true;
                } else {
                    sums[b] /= counts[b] as f64;
                }
            }
            (sums, fell_back)
        })
        .collect();

    let mut out = Vec::with_capacity(radii.len());
    for orig in 0..radii.len() {
        let b = order.iter().position(|&o| o == orig).unwrap();
        let mut values = Array2::zeros((eval_u.nrows(), n_targets));
        let mut fallback_count = 0;
        for (r, (sums, fb)) in rows.iter().enumerate() {
            values.row_mut(r).assign(&sums[b]);
            fallback_count += fb[b] as usize;
        }
        out.push(CoefficientPredictions { values, fallback_count });
    }
    Ok(out)
}

/// Training indices ordered by distance to `q`, ties by lower index,
/// truncated to the first `k`.
pub(crate) fn nearest(train_u: ArrayView2<f64>, q: ArrayView1<f64>, k: usize) -> Vec<usize> {
    let mut keyed: Vec<(f64, usize)> =
        train_u.axis_iter(Axis(0)).enumerate().map(|(j, tu)| (sq_dist(tu, q), j)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < keyed.len() {
        keyed.select_nth_unstable_by(k - 1, cmp);
        keyed.truncate(k);
    }
    keyed.sort_unstable_by(cmp);
    keyed.into_iter().map(|(_, j)| j).collect()
}

pub fn knn_predict(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    eval_u: ArrayView2<f64>,
    k: usize,
) -> Result<CoefficientPredictions> {
    Ok(knn_predict_multi(train_u, train_phi, eval_u, &[k])?.remove(0))
}

/// kNN means for several `k`; each equals a separate [`knn_predict`] call.
pub fn knn_predict_multi(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    eval_u: ArrayView2<f64>,
    ks: &[usize],
) -> Result<Vec<CoefficientPredictions>> {
    check_inputs(train_u, train_phi, eval_u)?;
    let n_train = train_u.nrows();
    for &k in ks {
        if k == 0 || k > n_train {
            return Err(Error::InvalidParameter(format!("kNN needs 1 <= k <= {n_train}, got {k}")));
        }
    }
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let n_targets = train_phi.ncols();

    let rows: Vec<Vec<Array1<f64>>> = eval_u
        .axis_iter(Axis(0))
        .into_par_iter()
        .map(|q| {
            let idx = nearest(train_u, q, k_max);
            let mut acc = Array1::<f64>::zeros(n_targets);
            let mut prefix = Vec::with_capacity(k_max);
            for &j in &idx {
                acc += &train_phi.row(j);
                prefix.push(acc.clone());
            }
            ks.iter().map(|&k| &prefix[k - 1] / k as f64).collect()
        })
        .collect();

    Ok((0..ks.len())
        .map(|c| {
            let mut values = Array2::zeros((eval_u.nrows(), n_targets));
            for (r, preds) in rows.iter().enumerate() {
                values.row_mut(r).assign(&preds[c]);
            }
            CoefficientPredictions { values, fallback_count: 0 }
        })
        .collect())
}

/// Per-target affine models from coordinate-descent LASSO.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub lambda: f64,
    /// One intercept per target, original units.
    pub intercepts: Vec<f64>,
    /// `n_targets × d`, original covariate units.
    pub slopes: Array2<f64>,
    /// `n_targets × d`, slopes on the standardized covariates.
    pub std_slopes: Array2<f64>,
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
    /// Coordinate sweeps used by the slowest target.
    pub iterations: usize,
    pub converged: bool,
}

impl LinearModel {
    pub fn n_targets(&self) -> usize {
        self.intercepts.len()
    }

    pub fn dim(&self) -> usize {
        self.feature_means.len()
    }

    pub fn predict(&self, eval_u: ArrayView2<f64>) -> Result<CoefficientPredictions> {
        if eval_u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: eval_u.ncols() });
        }
        let mut values = eval_u.dot(&self.slopes.t());
        for mut row in values.rows_mut() {
            row += &ArrayView1::from(&self.intercepts);
        }
        Ok(CoefficientPredictions { values, fallback_count: 0 })
    }

    /// Number of nonzero slopes over all targets.
    pub fn nonzero_slopes(&self) -> usize {
        self.std_slopes.iter().filter(|&&b| b != 0.0).count()
    }
}

pub fn lasso_predict(model: &LinearModel, eval_u: ArrayView2<f64>) -> Result<CoefficientPredictions> {
    model.predict(eval_u)
}

pub fn soft_threshold(x: f64, lambda: f64) -> f64 {
    if x > lambda {
        x - lambda
    } else if x < -lambda {
        x + lambda
    } else {
        0.0
    }
}

/// Standardized design summary shared by all targets and penalties.
struct Standardized {
    means: Vec<f64>,
    sds: Vec<f64>,
    /// Nonconstant feature indices.
    active: Vec<usize>,
    /// `X_sᵀ X_s / n` restricted to `active`.
    gram: Array2<f64>,
    /// `X_sᵀ (t − t̄) / n` per target, restricted to `active` (`n_targets × |active|`).
    cross: Array2<f64>,
    target_means: Vec<f64>,
}

fn standardize(train_u: ArrayView2<f64>, train_phi: ArrayView2<f64>) -> Result<Standardized> {
    if train_u.nrows() < 2 {
        return Err(Error::InsufficientData("LASSO needs at least two rows".into()));
    }
    if train_u.nrows() != train_phi.nrows() {
        return Err(Error::DimensionMismatch { expected: train_u.nrows(), got: train_phi.nrows() });
    }
    if train_u.iter().chain(train_phi.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("LASSO inputs must be finite".into()));
    }
    let n = train_u.nrows() as f64;
    let d = train_u.ncols();
    let means: Vec<f64> = column_means(train_u).to_vec();
    let sds: Vec<f64> = (0..d)
        .map(|j| {
            let m = means[j];
            (train_u.column(j).iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let active: Vec<usize> = (0..d).filter(|&j| sds[j] > 1e-12 * (1.0 + means[j].abs())).collect();
    let mut xs = Array2::<f64>::zeros((train_u.nrows(), active.len()));
    for (a, &j) in active.iter().enumerate() {
        let (m, s) = (means[j], sds[j]);
        for (dst, src) in xs.column_mut(a).iter_mut().zip(train_u.column(j).iter()) {
            *dst = (src - m) / s;
        }
    }
    let gram = xs.t().dot(&xs) / n;
    let target_means: Vec<f64> = column_means(train_phi).to_vec();
    let mut centered = train_phi.to_owned();
    for mut row in centered.rows_mut() {
        row -= &ArrayView1::from(&target_means);
    }
    let cross = centered.t().dot(&xs) / n;
    Ok(Standardized { means, sds, active, gram, cross, target_means })
}

/// Smallest penalty at which every slope of every target is zero.
pub fn lambda_max(train_u: ArrayView2<f64>, train_phi: ArrayView2<f64>) -> Result<f64> {
    let st = standardize(train_u, train_phi)?;
    Ok(st.cross.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Cyclic coordinate descent on one target using covariance updates.
/// Returns `(sweeps, converged)`.
fn coordinate_descent(
    gram: &Array2<f64>,
    cross: ArrayView1<f64>,
    lambda: f64,
    beta: &mut Array1<f64>,
    max_iter: usize,
    tol: f64,
) -> (usize, bool) {
    let p = beta.len();
    // g = G β
    let mut g = gram.dot(&*beta);
    for sweep in 1..=max_iter {
        let mut max_delta = 0.0f64;
        for j in 0..p {
            let gjj = gram[[j, j]];
            let rho = cross[j] - g[j] + gjj * beta[j];
            let new = soft_threshold(rho, lambda) / gjj;
            let delta = new - beta[j];
            if delta != 0.0 {
                beta[j] = new;
                g.scaled_add(delta, &gram.column(j));
                max_delta = max_delta.max(delta.abs());
            }
        }
        if max_delta < tol {
            return (sweep, true);
        }
    }
    (max_iter, false)
}

fn assemble(
    st: &Standardized,
    d: usize,
    lambda: f64,
    betas: &[Array1<f64>],
    iterations: usize,
    converged: bool,
) -> LinearModel {
    let n_targets = betas.len();
    let mut slopes = Array2::zeros((n_targets, d));
    let mut std_slopes = Array2::zeros((n_targets, d));
    let mut intercepts = Vec::with_capacity(n_targets);
    for (i, beta) in betas.iter().enumerate() {
        let mut intercept = st.target_means[i];
        for (a, &j) in st.active.iter().enumerate() {
            let b = beta[a];
            if b != 0.0 {
                std_slopes[[i, j]] = b;
                let orig = b / st.sds[j];
                slopes[[i, j]] = orig;
                intercept -= orig * st.means[j];
            }
        }
        intercepts.push(intercept);
    }
    LinearModel {
        lambda,
        intercepts,
        slopes,
        std_slopes,
        feature_means: st.means.clone(),
        feature_sds: st.sds.clone(),
        iterations,
        converged,
    }
}

/// LASSO fit of every target column at one penalty:
/// `min (1/2n)‖t − b₀ − X_s β‖² + λ‖β‖₁` on standardized covariates.
pub fn lasso_fit(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    lambda: f64,
    max_iter: usize,
    tol: f64,
) -> Result<LinearModel> {
    Ok(lasso_path(train_u, train_phi, &[lambda], max_iter, tol)?.remove(0))
}

/// Fits a sequence of penalties with warm starts, in the order given.
pub fn lasso_path(
    train_u: ArrayView2<f64>,
    train_phi: ArrayView2<f64>,
    lambdas: &[f64],
    max_iter: usize,
    tol: f64,
) -> Result<Vec<LinearModel>> {
    for &l in lambdas {
        BackendSpec::Lasso { lambda: l, max_iter, tol }.validate()?;
    }
    let st = standardize(train_u, train_phi)?;
    let d = train_u.ncols();
    let n_targets = train_phi.ncols();
    // Column-parallel; each target's path is independent.
    let per_target: Vec<Vec<(Array1<f64>, usize, bool)>> = (0..n_targets)
        .into_par_iter()
        .map(|i| {
            let mut beta = Array1::zeros(st.active.len());
            lambdas
                .iter()
                .map(|&l| {
                    let (it, ok) = coordinate_descent(&st.gram, st.cross.row(i), l, &mut beta, max_iter, tol);
                    (beta.clone(), it, ok)
                })
                .collect()
        })
        .collect();
    Ok(lambdas
        .iter()
        .enumerate()
        .map(|(li, &l)| {
            let betas: Vec<Array1<f64>> = per_target.iter().map(|p| p[li].0.clone()).collect();
            let iterations = per_target.iter().map(|p| p[li].1).max().unwrap_or(0);
            let converged = per_target.iter().all(|p| p[li].2);
            assemble(&st, d, l, &betas, iterations, converged)
        })
        .collect())
}

/// Median pairwise Euclidean distance over an evenly spaced subsample of
/// at most `max_points` rows.
pub fn median_pairwise_distance(u: ArrayView2<f64>, max_points: usize) -> f64 {
    let n = u.nrows();
    let m = n.min(max_points.max(2));
    let idx: Vec<usize> = (0..m).map(|i| i * n / m).collect();
    let mut d = Vec::with_capacity(m * (m - 1) / 2);
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            d.push(sq_dist(u.row(idx[a]), u.row(idx[b])).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    if d.len() % 2 == 0 {
        0.5 * (d[mid - 1] + d[mid])
    } else {
        d[mid]
    }
}

/// Eight radii log-spaced over `[c/4, 4c]` with
/// `c = median pairwise distance · T^(−1/(2+d))`.
pub fn default_nw_radii(train_u: ArrayView2<f64>) -> Vec<f64> {
    let t = train_u.nrows() as f64;
    let d = train_u.ncols() as f64;
    let mut center = median_pairwise_distance(train_u, 400) * t.powf(-1.0 / (2.0 + d));
    if !(center > 0.0 && center.is_finite()) {
        center = 1.0;
    }
    (0..8).map(|k| center * 4f64.powf((k as f64 - 3.5) / 3.5)).collect()
}

/// `{5, 10, 20, 40, 80, round(√N)}` restricted to `k ≤ N`, deduplicated.
pub fn default_knn_ks(n_train: usize) -> Vec<usize> {
    let mut ks: Vec<usize> = [5, 10, 20, 40, 80, (n_train as f64).sqrt().round() as usize]
        .into_iter()
        .filter(|&k| k >= 1 && k <= n_train)
        .collect();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() {
        ks.push(n_train.max(1));
    }
    ks
}

/// Ten penalties log-spaced from `λ_max` down to `λ_max · 1e−4`.
pub fn default_lasso_lambdas(train_u: ArrayView2<f64>, train_phi: ArrayView2<f64>) -> Result<Vec<f64>> {
    let mut top = lambda_max(train_u, train_phi)?;
    if top.is_nan() || top <= 0.0 {
        top = 1e-8;
    }
    Ok((0..10).map(|k| top * 10f64.powf(-4.0 * k as f64 / 9.0)).collect())
}
