//! Comparison estimators: nearest-neighbor kernel CDE and an AR-GARCH(1,1)
//! Gaussian predictive model.

pub mod garch;
pub mod nelder_mead;
pub mod nnkcde;

pub use garch::{garch_fit, GarchModel, GarchState};
pub use nnkcde::{default_bandwidths, nnkcde_fit, NnkcdeModel};
