//! Conditional density estimation for stationary time series by orthonormal
//! series expansion.
//!
//! The conditional density `f(y | u)` of a response given lagged and
//! exogenous covariates is expanded as `Σ_i β_i(u) φ_i(z)` on a rescaled
//! response `z ∈ [0, 1]`. Each coefficient `β_i(u) = E[φ_i(Z) | u]` is
//! estimated by an ordinary regression, and the number of terms is chosen
//! on a held-out validation block.
//!
//! ```
//! use flexts_core::{fit, lag_embed, EmbedOptions, FitConfig, ScenarioName, ScenarioSpec, SeriesTable, SplitSpec};
//!
//! let sim = ScenarioSpec::new(ScenarioName::Ar, 1000, 7).generate().unwrap();
//! let design = lag_embed(&SeriesTable::univariate(sim.y).unwrap(), &EmbedOptions::lags(3)).unwrap();
//! let model = fit(&design, &SplitSpec::default(), &FitConfig::default()).unwrap();
//! let density = model.predict_density(&[0.1, -0.2, 0.3]).unwrap();
//! assert!((density.mass() - 1.0).abs() < 1e-8);
//! ```

pub mod baselines;
pub mod basis;
pub mod density;
pub mod error;
pub mod estimator;
pub mod evaluation;
pub mod features;
pub mod quadrature;
pub mod regression;
pub mod scenarios;

pub use basis::{BasisKind, Scaler, DEFAULT_PAD};
pub use density::{density_from_coeffs, BasisGrid, DensityEstimate, ResponseGrid, DEFAULT_GRID_SIZE};
pub use error::{Error, Result};
pub use estimator::{fit, fit_blocks, BackendGrid, CoefficientModel, FitConfig, SelectionLoss};
pub use evaluation::{cde_loss_from_coeffs, cde_loss_grid, oracle_cde_loss, pinball_loss, CdeLossReport};
pub use features::{
    lag_embed, temporal_split, DesignMatrix, EmbedOptions, RollingKind, RollingSpec, SeriesTable, SplitSpec, Splits,
};
pub use regression::{BackendKind, BackendSpec};
pub use scenarios::{true_density, ScenarioName, ScenarioSpec, Simulation};
