use flexts_core::evaluation::oracle_cde_loss_densities;
use flexts_core::scenarios::DEFAULT_NONLINEAR_MEAN_SD;
use flexts_core::{
    fit, lag_embed, true_density, BackendGrid, BackendKind, BasisKind, DesignMatrix, EmbedOptions, FitConfig,
    ScenarioName, ScenarioSpec, SeriesTable, SplitSpec,
};

fn design(name: ScenarioName, n: usize, seed: u64, lags: usize) -> (Vec<f64>, DesignMatrix) {
    let y = ScenarioSpec::new(name, n, seed).generate().unwrap().y;
    let d = lag_embed(&SeriesTable::univariate(y.clone()).unwrap(), &EmbedOptions::lags(lags)).unwrap();
    (y, d)
}

fn tail(d: &DesignMatrix, frac: f64) -> DesignMatrix {
    let start = ((1.0 - frac) * d.n_rows() as f64) as usize;
    d.slice(start..d.n_rows())
}

#[test]
fn lasso_importance_concentrates_on_the_true_lags() {
    let (_, d) = design(ScenarioName::Ar, 2500, 2, 6);
    let cfg = FitConfig { backend: BackendGrid::auto(BackendKind::Lasso), ..FitConfig::default() };
    let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
    let imp = m.importance(&tail(&d, 0.3), 0).unwrap();
    let total: f64 = imp.iter().sum();
    let first3: f64 = imp[..3].iter().sum();
    assert!(first3 / total > 0.8, "share {} of {imp:?}", first3 / total);
}

#[test]
fn fitted_densities_beat_the_flat_guess_on_the_oracle() {
    let (y, d) = design(ScenarioName::NonlinearMean, 1500, 4, 3);
    let m = fit(&d, &SplitSpec::default(), &FitConfig::default()).unwrap();
    let test = tail(&d, 0.2);
    let dens = m.predict_densities(test.u.view()).unwrap();
    let truth = |row: usize, v: f64| {
        let o = test.origin_index[row];
        true_density(ScenarioName::NonlinearMean, DEFAULT_NONLINEAR_MEAN_SD, &[y[o - 1], y[o - 2], y[o - 3]], v)
            .unwrap()
    };
    let fitted = oracle_cde_loss_densities(truth, &dens);
    let flat: Vec<_> = dens
        .iter()
        .map(|e| flexts_core::DensityEstimate::from_raw(e.grid_y.clone(), vec![1.0; e.grid_y.len()]))
        .collect();
    let baseline = oracle_cde_loss_densities(truth, &flat);
    assert!(fitted < 0.5 * baseline, "fitted {fitted}, flat {baseline}");
}

#[test]
fn every_backend_and_basis_gives_proper_densities() {
    let (_, d) = design(ScenarioName::NonlinearVariance, 800, 9, 3);
    for kind in [BackendKind::NadarayaWatson, BackendKind::Knn, BackendKind::Lasso] {
        for basis in [BasisKind::Cosine, BasisKind::Fourier] {
            let cfg = FitConfig { basis, backend: BackendGrid::auto(kind), max_terms: 15, ..FitConfig::default() };
            let m = fit(&d, &SplitSpec::default(), &cfg).unwrap();
            assert!(m.cutoff <= 15);
            for e in m.predict_densities(tail(&d, 0.1).u.view()).unwrap() {
                assert!(e.density.iter().all(|v| *v >= 0.0));
                assert!((e.mass() - 1.0).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn selection_is_lexicographic_with_ties_to_fewer_terms() {
    let (_, d) = design(ScenarioName::Ar, 600, 1, 3);
    let m = fit(&d, &SplitSpec::default(), &FitConfig::default()).unwrap();
    let best = m.val_loss_curve[m.cutoff];
    assert!(m.val_loss_curve.iter().all(|l| *l >= best));
    assert!(m.val_loss_curve[..m.cutoff].iter().all(|l| *l > best));
}
