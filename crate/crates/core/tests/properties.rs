use flexts_core::evaluation::cde_loss_curve;
use flexts_core::quadrature::{linspace, trapezoid};
use flexts_core::{cde_loss_from_coeffs, density_from_coeffs, lag_embed, BasisKind, EmbedOptions, Scaler, SeriesTable};
use ndarray::Array2;
use proptest::prelude::*;

const FINE: usize = 20_001;

fn basis_kind() -> impl Strategy<Value = BasisKind> {
    prop_oneof![Just(BasisKind::Cosine), Just(BasisKind::Fourier)]
}

/// `∫_0^1 f̂² − 2 f̂(z)` by trapezoid on a fine grid.
fn quadrature_loss(basis: BasisKind, coeffs: &[f64], z: f64) -> f64 {
    let grid = linspace(0.0, 1.0, FINE);
    let eval =
        |x: f64| -> f64 { basis.eval_vec(x, coeffs.len()).unwrap().iter().zip(coeffs).map(|(p, c)| p * c).sum() };
    let sq: Vec<f64> = grid.iter().map(|&x| eval(x).powi(2)).collect();
    trapezoid(&sq, 1.0 / (FINE - 1) as f64) - 2.0 * eval(z)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn coefficient_loss_matches_quadrature(
        basis in basis_kind(),
        coeffs in prop::collection::vec(-1.0f64..1.0, 1..31),
        z in 0.0f64..=1.0,
    ) {
        let b = Array2::from_shape_vec((1, coeffs.len()), coeffs.clone()).unwrap();
        let coef = cde_loss_from_coeffs(b.view(), &[z], basis, coeffs.len() - 1).unwrap().loss;
        let quad = quadrature_loss(basis, &coeffs, z);
        prop_assert!((coef - quad).abs() < 1e-10, "coefficient {coef} vs quadrature {quad}");
    }

    #[test]
    fn loss_curve_matches_every_truncation(
        basis in basis_kind(),
        rows in prop::collection::vec((prop::collection::vec(-2.0f64..2.0, 8), 0.0f64..=1.0), 1..12),
    ) {
        let n = rows.len();
        let b = Array2::from_shape_fn((n, 8), |(t, i)| rows[t].0[i]);
        let z: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let phi = Array2::from_shape_fn((n, 8), |(t, i)| basis.eval(i, z[t]).unwrap());
        let curve = cde_loss_curve(b.view(), phi.view()).unwrap();
        for (cut, c) in curve.iter().enumerate() {
            let direct = cde_loss_from_coeffs(b.view(), &z, basis, cut).unwrap().loss;
            prop_assert!((c - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn densities_are_proper(
        basis in basis_kind(),
        tail in prop::collection::vec(-1.5f64..1.5, 0..30),
        lo in -50.0f64..50.0,
        width in 0.01f64..100.0,
    ) {
        let mut coeffs = vec![1.0];
        coeffs.extend(tail);
        let scaler = Scaler::new(lo, lo + width, 0.05).unwrap();
        let d = density_from_coeffs(&scaler, basis, &coeffs, 1001);
        prop_assert!(d.density.iter().all(|v| *v >= 0.0 && v.is_finite()));
        prop_assert!((d.mass() - 1.0).abs() < 1e-8, "mass {}", d.mass());
        let taus: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
        let q = d.quantiles(&taus).unwrap();
        prop_assert!(q.windows(2).all(|w| w[0] <= w[1]), "{q:?}");
        prop_assert!(q.iter().all(|v| *v >= d.lo() && *v <= d.hi()));
    }

    #[test]
    fn lag_rows_read_the_series(
        y in prop::collection::vec(-10.0f64..10.0, 12..60),
        lags in 1usize..6,
    ) {
        let table = SeriesTable::univariate(y.clone()).unwrap();
        let d = lag_embed(&table, &EmbedOptions::lags(lags)).unwrap();
        prop_assert_eq!(d.n_rows(), y.len() - lags);
        for r in 0..d.n_rows() {
            let t = d.origin_index[r];
            prop_assert_eq!(d.y[r], y[t]);
            for j in 0..lags {
                prop_assert_eq!(d.u[[r, j]], y[t - 1 - j]);
            }
        }
    }
}

#[test]
fn basis_functions_are_orthonormal_up_to_thirty() {
    let grid = linspace(0.0, 1.0, FINE);
    let dx = 1.0 / (FINE - 1) as f64;
    for basis in [BasisKind::Cosine, BasisKind::Fourier] {
        let table: Vec<Vec<f64>> = grid.iter().map(|&z| basis.eval_vec(z, 31).unwrap()).collect();
        for i in 0..=30 {
            for j in 0..=30 {
                let prod: Vec<f64> = table.iter().map(|r| r[i] * r[j]).collect();
                let ip = trapezoid(&prod, dx);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((ip - want).abs() < 1e-6, "{basis:?} <{i},{j}> = {ip}");
            }
        }
    }
}
