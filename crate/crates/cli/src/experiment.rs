//! Shared fitting and scoring of the three methods on one dataset.

use std::fmt;
use std::str::FromStr;

use flexts_core::baselines::{default_bandwidths, garch_fit, nnkcde_fit};
use flexts_core::evaluation::oracle_cde_loss_densities;
use flexts_core::regression::default_knn_ks;
use flexts_core::{
    cde_loss_grid, fit_blocks, lag_embed, temporal_split, true_density, CdeLossReport, DensityEstimate, DesignMatrix,
    EmbedOptions, Error, FitConfig, ResponseGrid, Result, Scaler, ScenarioName, ScenarioSpec, SeriesTable, SplitSpec,
    Splits,
};
use serde::{Deserialize, Serialize};

use crate::persist::SavedModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Flexcode,
    Nnkcde,
    Garch,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Flexcode, Method::Nnkcde, Method::Garch];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Flexcode => "flexcode",
            Method::Nnkcde => "nnkcde",
            Method::Garch => "garch",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "flexcode" | "flexcodets" => Ok(Method::Flexcode),
            "nnkcde" => Ok(Method::Nnkcde),
            "garch" => Ok(Method::Garch),
            other => Err(Error::InvalidParameter(format!("unknown method '{other}'"))),
        }
    }
}

/// A response series embedded and split, with an optional simulation
/// oracle.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<f64>,
    pub design: DesignMatrix,
    pub splits: Splits,
    /// AR order used for GARCH.
    pub lags: usize,
    pub oracle: Option<(ScenarioName, f64)>,
}

impl Dataset {
    pub fn simulate(scenario: &ScenarioSpec, lags: usize, split: &SplitSpec) -> Result<Self> {
        let y = scenario.generate()?.y;
        let mut ds = Self::from_table(&SeriesTable::univariate(y)?, &EmbedOptions::lags(lags), split)?;
        ds.oracle = Some((scenario.name, scenario.noise_sd));
        Ok(ds)
    }

    pub fn from_table(table: &SeriesTable, embed: &EmbedOptions, split: &SplitSpec) -> Result<Self> {
        let design = lag_embed(table, embed)?;
        let splits = temporal_split(design.n_rows(), split)?;
        Ok(Self { y: table.response.clone(), design, splits, lags: embed.lags, oracle: None })
    }

    pub fn train(&self) -> DesignMatrix {
        self.design.slice(self.splits.train.clone())
    }

    pub fn val(&self) -> DesignMatrix {
        self.design.slice(self.splits.val.clone())
    }

    pub fn test(&self) -> DesignMatrix {
        self.design.slice(self.splits.test.clone())
    }

    /// Response grid shared by all methods: the padded training range.
    pub fn grid(&self, pad: f64, size: usize) -> Result<ResponseGrid> {
        let s = Scaler::fit(&self.design.y[self.splits.train.clone()], pad)?;
        Ok(ResponseGrid::from_scaler(&s, size))
    }

    /// `f(y | past)` at a row of the design, when the data are simulated.
    pub fn truth(&self, origin: usize, y: f64) -> Option<f64> {
        let (name, sd) = self.oracle?;
        if origin < 3 {
            return None;
        }
        let lags = [self.y[origin - 1], self.y[origin - 2], self.y[origin - 3]];
        true_density(name, sd, &lags, y).ok()
    }
}

/// Per-method tuning choices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MethodSettings {
    pub flexcode: FitConfig,
    /// NNKCDE neighbor counts; empty selects the default grid.
    pub nn_ks: Vec<usize>,
    /// NNKCDE bandwidths; empty selects the default grid.
    pub bandwidths: Vec<f64>,
}

impl MethodSettings {
    pub fn flexcode(cfg: FitConfig) -> Self {
        Self { flexcode: cfg, ..Self::default() }
    }
}

/// Fits `method` on the training block, tuning on the validation block.
pub fn fit_method(ds: &Dataset, method: Method, settings: &MethodSettings) -> Result<SavedModel> {
    let cfg = &settings.flexcode;
    match method {
        Method::Flexcode => Ok(SavedModel::Flexcode(fit_blocks(&ds.train(), &ds.val(), cfg)?)),
        Method::Nnkcde => {
            let (train, val) = (ds.train(), ds.val());
            let grid = ds.grid(cfg.pad, cfg.grid_size)?;
            let ks = if settings.nn_ks.is_empty() { default_knn_ks(train.n_rows()) } else { settings.nn_ks.clone() };
            let hs =
                if settings.bandwidths.is_empty() { default_bandwidths(&train.y) } else { settings.bandwidths.clone() };
            let m = nnkcde_fit(train.u.view(), &train.y, &ks, &hs, val.u.view(), &val.y, &grid)?;
            Ok(SavedModel::Nnkcde(m))
        }
        Method::Garch => {
            // The series up to the last training response.
            let end = ds.design.origin_index[ds.splits.train.end - 1] + 1;
            let model = garch_fit(&ds.y[..end], ds.lags)?;
            Ok(SavedModel::Garch { model, grid: ds.grid(cfg.pad, cfg.grid_size)? })
        }
    }
}

/// Predictive densities for `rows`, a block of `ds.design`.
pub fn predict_rows(model: &SavedModel, ds: &Dataset, rows: &DesignMatrix) -> Result<Vec<DensityEstimate>> {
    match model {
        SavedModel::Flexcode(m) => m.predict_densities(rows.u.view()),
        SavedModel::Nnkcde(m) => m.predict_densities(rows.u.view()),
        SavedModel::Garch { model, grid } => model.predict_series(&ds.y, &rows.origin_index, grid),
    }
}

/// Short description of the selected hyperparameters.
pub fn describe(model: &SavedModel) -> String {
    match model {
        SavedModel::Flexcode(m) => format!("I={} {}", m.cutoff, m.selected_backend().describe()),
        SavedModel::Nnkcde(m) => format!("k={} h={:.6}", m.k, m.bandwidth),
        SavedModel::Garch { model: m, .. } => format!("omega={:.6} alpha={:.4} beta={:.4}", m.omega, m.alpha, m.beta),
    }
}

/// Test-block scores of one method.
#[derive(Debug, Clone)]
pub struct MethodEvaluation {
    pub model: SavedModel,
    pub report: CdeLossReport,
    pub oracle_loss: Option<f64>,
    pub densities: Vec<DensityEstimate>,
}

/// Fits `method` and scores its densities on the test block in response
/// units.
pub fn evaluate_method(ds: &Dataset, method: Method, settings: &MethodSettings) -> Result<MethodEvaluation> {
    let model = fit_method(ds, method, settings)?;
    let test = ds.test();
    let densities = predict_rows(&model, ds, &test)?;
    let report = cde_loss_grid(&densities, &test.y)?;
    let oracle_loss = oracle_loss(ds, &test.origin_index, &densities);
    Ok(MethodEvaluation { model, report, oracle_loss, densities })
}

/// `mean ∫ (f̂ − f)²` over the rows with the given origins, when the truth
/// is known.
pub fn oracle_loss(ds: &Dataset, origins: &[usize], densities: &[DensityEstimate]) -> Option<f64> {
    if ds.oracle.is_none() || origins.iter().any(|&o| o < 3) {
        return None;
    }
    Some(oracle_cde_loss_densities(|row, y| ds.truth(origins[row], y).unwrap_or(0.0), densities))
}
