//! Nearest-neighbor kernel conditional density estimation: a Gaussian KDE of
//! the responses of the `k` training points closest to the query covariates.

use std::f64::consts::PI;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;

use crate::density::{DensityEstimate, ResponseGrid};
use crate::error::{Error, Result};
use crate::evaluation::CdeLossReport;
use crate::regression::nearest;

#[derive(Debug, Clone, PartialEq)]
pub struct NnkcdeModel {
    pub train_u: Array2<f64>,
    pub train_y: Vec<f64>,
    pub k: usize,
    pub bandwidth: f64,
    pub grid: ResponseGrid,
    /// Grid-form validation loss at the selected `(k, h)`; `NaN` when the
    /// model was built without tuning.
    pub val_loss: f64,
    /// Grid entries with `k` above the training size.
    pub skipped_ks: Vec<usize>,
}

/// Half-width of the kernel support, in bandwidths.
const KERNEL_REACH: f64 = 10.0;

/// Adds `N(y − center; 0, h²)` to `acc` on the grid.
fn add_kernel(acc: &mut [f64], center: f64, h: f64, grid: &ResponseGrid) {
    let dx = grid.dx();
    let first = (((center - KERNEL_REACH * h) - grid.lo) / dx).floor().max(0.0) as usize;
    let last = ((((center + KERNEL_REACH * h) - grid.lo) / dx).ceil().max(0.0) as usize).min(grid.size - 1);
    let norm = 1.0 / (h * (2.0 * PI).sqrt());
    for (i, slot) in acc.iter_mut().enumerate().take(last + 1).skip(first) {
        let y = if i == grid.size - 1 { grid.hi } else { grid.lo + dx * i as f64 };
        let r = (y - center) / h;
        *slot += norm * (-0.5 * r * r).exp();
    }
}

impl NnkcdeModel {
    pub fn new(train_u: Array2<f64>, train_y: Vec<f64>, k: usize, bandwidth: f64, grid: ResponseGrid) -> Result<Self> {
        if train_u.nrows() != train_y.len() {
            return Err(Error::DimensionMismatch { expected: train_u.nrows(), got: train_y.len() });
        }
        if k == 0 || k > train_y.len() {
            return Err(Error::InvalidParameter(format!("NNKCDE needs 1 <= k <= {}, got {k}", train_y.len())));
        }
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {bandwidth}")));
        }
        Ok(Self { train_u, train_y, k, bandwidth, grid, val_loss: f64::NAN, skipped_ks: Vec::new() })
    }

    pub fn dim(&self) -> usize {
        self.train_u.ncols()
    }

    fn density_for(&self, q: ArrayView1<f64>) -> DensityEstimate {
        let idx = nearest(self.train_u.view(), q, self.k);
        let mut acc = vec![0.0; self.grid.size];
        for &j in &idx {
            add_kernel(&mut acc, self.train_y[j], self.bandwidth, &self.grid);
        }
        acc.iter_mut().for_each(|v| *v /= self.k as f64);
        DensityEstimate::from_raw(self.grid.points(), acc)
    }

    pub fn predict_density(&self, u: &[f64]) -> Result<DensityEstimate> {
        if u.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.len() });
        }
        Ok(self.density_for(ArrayView1::from(u)))
    }

    pub fn predict_densities(&self, u: ArrayView2<f64>) -> Result<Vec<DensityEstimate>> {
        if u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: u.ncols() });
        }
        Ok(u.axis_iter(Axis(0)).into_par_iter().map(|q| self.density_for(q)).collect())
    }
}

/// Bandwidths `sd(y) · 10^{-2 + 2k/11}`, `k = 0..=11`.
pub fn default_bandwidths(train_y: &[f64]) -> Vec<f64> {
    let n = train_y.len().max(2) as f64;
    let m = train_y.iter().sum::<f64>() / n;
    let mut sd = (train_y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0)).sqrt();
    if !(sd > 0.0 && sd.is_finite()) {
        sd = 1.0;
    }
    (0..12).map(|k| sd * 10f64.powf(-2.0 + 2.0 * k as f64 / 11.0)).collect()
}

/// Selects `(k, h)` by the grid-form validation CDE loss; ties go to the
/// earlier grid entry (`k` outer, `h` inner).
#[allow(clippy::too_many_arguments)]
pub fn nnkcde_fit(
    train_u: ArrayView2<f64>,
    train_y: &[f64],
    ks: &[usize],
    bandwidths: &[f64],
    val_u: ArrayView2<f64>,
    val_y: &[f64],
    grid: &ResponseGrid,
) -> Result<NnkcdeModel> {
    if ks.is_empty() || bandwidths.is_empty() {
        return Err(Error::InvalidParameter("NNKCDE grids must be nonempty".into()));
    }
    if train_u.nrows() != train_y.len() {
        return Err(Error::DimensionMismatch { expected: train_u.nrows(), got: train_y.len() });
    }
    if val_u.nrows() != val_y.len() {
        return Err(Error::DimensionMismatch { expected: val_u.nrows(), got: val_y.len() });
    }
    if val_u.ncols() != train_u.ncols() {
        return Err(Error::DimensionMismatch { expected: train_u.ncols(), got: val_u.ncols() });
    }
    if val_y.is_empty() {
        return Err(Error::EmptySplit("NNKCDE tuning needs validation rows".into()));
    }
    if let Some(h) = bandwidths.iter().find(|h| !(**h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidParameter(format!("bandwidth must be > 0, got {h}")));
    }
    let n_train = train_y.len();
    let (usable, skipped_ks): (Vec<usize>, Vec<usize>) = ks.iter().partition(|&&k| k >= 1 && k <= n_train);
    if usable.is_empty() {
        return Err(Error::InvalidParameter(format!("no k in {ks:?} fits {n_train} training rows")));
    }
    let k_max = *usable.iter().max().unwrap();
    let mut sorted_ks = usable.clone();
    sorted_ks.sort_unstable();
    sorted_ks.dedup();
    let points = grid.points();

    // contributions[row][ki * n_h + hi]
    let n_h = bandwidths.len();
    let per_row: Vec<Vec<f64>> = val_u
        .axis_iter(Axis(0))
        .into_par_iter()
        .zip(val_y.par_iter())
        .map(|(q, &y)| {
            let idx = nearest(train_u, q, k_max);
            let mut out = vec![0.0; usable.len() * n_h];
            for (hi, &h) in bandwidths.iter().enumerate() {
                let mut acc = vec![0.0; grid.size];
                let mut next = 0;
                for (c, &j) in idx.iter().enumerate() {
                    add_kernel(&mut acc, train_y[j], h, grid);
                    while next < sorted_ks.len() && sorted_ks[next] == c + 1 {
                        let k = sorted_ks[next];
                        let raw: Vec<f64> = acc.iter().map(|v| v / k as f64).collect();
                        let d = DensityEstimate::from_raw(points.clone(), raw);
                        let contrib = d.squared_integral() - 2.0 * d.value_at(y);
                        for (ki, _) in usable.iter().enumerate().filter(|(_, &kk)| kk == k) {
                            out[ki * n_h + hi] = contrib;
                        }
                        next += 1;
                    }
                }
            }
            out
        })
        .collect();

    let mut best: Option<(f64, usize)> = None;
    for cell in 0..usable.len() * n_h {
        let column: Vec<f64> = per_row.iter().map(|r| r[cell]).collect();
        let loss = CdeLossReport::from_contributions(&column, 0)?.loss;
        if best.is_none_or(|(b, _)| loss < b) {
            best = Some((loss, cell));
        }
    }
    let (val_loss, cell) = best.expect("nonempty grid");
    let mut model =
        NnkcdeModel::new(train_u.to_owned(), train_y.to_vec(), usable[cell / n_h], bandwidths[cell % n_h], *grid)?;
    model.val_loss = val_loss;
    model.skipped_ks = skipped_ks;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::cde_loss_grid;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_point_is_a_renormalized_kernel() {
        let grid = ResponseGrid::new(-3.0, 2.0, 1001).unwrap();
        let m = NnkcdeModel::new(array![[0.0]], vec![0.0], 1, 1.0, grid).unwrap();
        let d = m.predict_density(&[5.0]).unwrap();
        let pts = grid.points();
        let phi: Vec<f64> = pts.iter().map(|y| (-0.5 * y * y).exp() / (2.0 * PI).sqrt()).collect();
        let mass = crate::quadrature::trapezoid(&phi, grid.dx());
        for (v, p) in d.density.iter().zip(&phi) {
            assert!((v - p / mass).abs() < 1e-10);
        }
    }

    #[test]
    fn two_points_small_bandwidth_is_bimodal() {
        let grid = ResponseGrid::new(-2.0, 2.0, 1001).unwrap();
        let m = NnkcdeModel::new(array![[0.0], [0.1]], vec![-1.0, 1.0], 2, 0.1, grid).unwrap();
        let d = m.predict_density(&[0.0]).unwrap();
        let argmax = |lo: f64, hi: f64| {
            d.grid_y
                .iter()
                .zip(&d.density)
                .filter(|(y, _)| **y >= lo && **y <= hi)
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(y, _)| *y)
                .unwrap()
        };
        assert!((argmax(-2.0, 0.0) + 1.0).abs() < 0.01);
        assert!((argmax(0.0, 2.0) - 1.0).abs() < 0.01);
        assert!(d.value_at(0.0) < 1e-6);
    }

    #[test]
    fn predictions_have_unit_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = Array2::from_shape_fn((200, 2), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = (0..200).map(|_| rng.random_range(-1.0..1.0)).collect();
        let grid = ResponseGrid::new(-1.5, 1.5, 1001).unwrap();
        let m = NnkcdeModel::new(u.clone(), y, 15, 0.2, grid).unwrap();
        for d in m.predict_densities(u.view()).unwrap() {
            assert!((d.mass() - 1.0).abs() < 1e-8);
            assert!(d.density.iter().all(|&v| v >= 0.0));
        }
    }

    #[test]
    fn tuning_picks_the_minimum_of_a_direct_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = Array2::from_shape_fn((300, 1), |_| rng.random_range(-1.0..1.0));
        let y: Vec<f64> = u.column(0).iter().map(|&x| x + 0.2 * rng.random_range(-1.0..1.0)).collect();
        let (tu, vu) = (u.slice(ndarray::s![..250, ..]), u.slice(ndarray::s![250.., ..]));
        let grid = ResponseGrid::new(-1.6, 1.6, 501).unwrap();
        let ks = [5, 20, 400];
        let hs = [0.02, 0.1, 0.5];
        let m = nnkcde_fit(tu, &y[..250], &ks, &hs, vu, &y[250..], &grid).unwrap();
        assert_eq!(m.skipped_ks, vec![400]);
        let mut best = f64::INFINITY;
        for &k in &ks[..2] {
            for &h in &hs {
                let cand = NnkcdeModel::new(tu.to_owned(), y[..250].to_vec(), k, h, grid).unwrap();
                let l = cde_loss_grid(&cand.predict_densities(vu).unwrap(), &y[250..]).unwrap().loss;
                best = best.min(l);
            }
        }
        assert!((m.val_loss - best).abs() < 1e-12);
    }
}
