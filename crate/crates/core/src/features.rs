//! Supervised design matrices from raw series: response lags, exogenous
//! columns and rolling-window summaries, plus contiguous temporal splits.

use std::ops::Range;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A response series with optional exogenous columns, all of length `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub response: Vec<f64>,
    /// `n × m`; `m` may be zero.
    pub exogenous: Array2<f64>,
    pub column_names: Vec<String>,
}

impl SeriesTable {
    pub fn new(response: Vec<f64>, exogenous: Array2<f64>, column_names: Vec<String>) -> Result<Self> {
        let n = response.len();
        if exogenous.nrows() != n {
            return Err(Error::DimensionMismatch { expected: n, got: exogenous.nrows() });
        }
        if column_names.len() != exogenous.ncols() {
            return Err(Error::DimensionMismatch { expected: exogenous.ncols(), got: column_names.len() });
        }
        if response.iter().chain(exogenous.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("series contains missing or non-finite values".into()));
        }
        Ok(Self { response, exogenous, column_names })
    }

    pub fn univariate(response: Vec<f64>) -> Result<Self> {
        let n = response.len();
        Self::new(response, Array2::zeros((n, 0)), Vec::new())
    }

    pub fn len(&self) -> usize {
        self.response.len()
    }

    pub fn is_empty(&self) -> bool {
        self.response.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RollingKind {
    Mean,
    /// Population variance over the window.
    Variance,
    Min,
    Max,
}

/// A summary of the response over the `window` values ending at `t - 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RollingSpec {
    pub kind: RollingKind,
    pub window: usize,
}

impl RollingSpec {
    pub fn name(&self) -> String {
        let k = match self.kind {
            RollingKind::Mean => "mean",
            RollingKind::Variance => "variance",
            RollingKind::Min => "min",
            RollingKind::Max => "max",
        };
        format!("roll_{k}_{}", self.window)
    }

    fn apply(&self, window: &[f64]) -> f64 {
        match self.kind {
            RollingKind::Mean => window.iter().sum::<f64>() / window.len() as f64,
            RollingKind::Variance => {
                let m = window.iter().sum::<f64>() / window.len() as f64;
                window.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / window.len() as f64
            }
            RollingKind::Min => window.iter().copied().fold(f64::INFINITY, f64::min),
            RollingKind::Max => window.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl std::str::FromStr for RollingSpec {
    type Err = Error;

    /// Parses `kind:window`, e.g. `variance:3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, window) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidParameter(format!("rolling spec '{s}' must be kind:window")))?;
        let kind = match kind.trim().to_ascii_lowercase().as_str() {
            "mean" => RollingKind::Mean,
            "variance" | "var" => RollingKind::Variance,
            "min" => RollingKind::Min,
            "max" => RollingKind::Max,
            other => return Err(Error::InvalidParameter(format!("unknown rolling kind '{other}'"))),
        };
        let window: usize =
            window.trim().parse().map_err(|_| Error::InvalidParameter(format!("bad rolling window in '{s}'")))?;
        if window == 0 {
            return Err(Error::InvalidParameter("rolling window must be >= 1".into()));
        }
        Ok(RollingSpec { kind, window })
    }
}

/// How covariate rows are assembled from a series.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbedOptions {
    pub lags: usize,
    pub rolling: Vec<RollingSpec>,
    /// Use exogenous values at `t` instead of `t - 1`.
    pub exog_contemporaneous: bool,
}

impl EmbedOptions {
    pub fn lags(lags: usize) -> Self {
        Self { lags, rolling: Vec::new(), exog_contemporaneous: false }
    }

    /// Index of the first raw observation that can serve as a response.
    pub fn first_origin(&self) -> usize {
        let max_window = self.rolling.iter().map(|r| r.window).max();
        self.lags + max_window.map_or(0, |w| w - 1)
    }
}

/// Lag-embedded covariates aligned with responses, in time order.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    /// `N × d` covariates.
    pub u: Array2<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    /// Position of each response in the raw series.
    pub origin_index: Vec<usize>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.u.ncols()
    }

    /// Contiguous block of rows.
    pub fn slice(&self, rows: Range<usize>) -> DesignMatrix {
        DesignMatrix {
            u: self.u.slice(ndarray::s![rows.clone(), ..]).to_owned(),
            y: self.y[rows.clone()].to_vec(),
            feature_names: self.feature_names.clone(),
            origin_index: self.origin_index[rows].to_vec(),
        }
    }

    /// Concatenates two row blocks that share the feature layout.
    pub fn concat(&self, other: &DesignMatrix) -> Result<DesignMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let u = ndarray::concatenate(Axis(0), &[self.u.view(), other.u.view()])
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut y = self.y.clone();
        y.extend_from_slice(&other.y);
        let mut origin_index = self.origin_index.clone();
        origin_index.extend_from_slice(&other.origin_index);
        Ok(DesignMatrix { u, y, feature_names: self.feature_names.clone(), origin_index })
    }
}

/// Builds rows `u_t = (y_{t-1}, …, y_{t-p}, x_{t-1}, rolling_{t-1})` with
/// response `y_t`.
pub fn lag_embed(series: &SeriesTable, opts: &EmbedOptions) -> Result<DesignMatrix> {
    let n = series.len();
    let p = opts.lags;
    if p == 0 {
        return Err(Error::InvalidParameter("lag count must be >= 1".into()));
    }
    if opts.rolling.iter().any(|r| r.window == 0) {
        return Err(Error::InvalidParameter("rolling window must be >= 1".into()));
    }
    let start = opts.first_origin();
    if start >= n {
        return Err(Error::InsufficientData(format!(
            "{p} lags with rolling windows need more than {start} observations, got {n}"
        )));
    }
    let m = series.exogenous.ncols();
    let d = p + m + opts.rolling.len();

    let mut feature_names: Vec<String> = (1..=p).map(|k| format!("lag{k}")).collect();
    for name in &series.column_names {
        if opts.exog_contemporaneous {
            feature_names.push(name.clone());
        } else {
            feature_names.push(format!("{name}_lag1"));
        }
    }
    feature_names.extend(opts.rolling.iter().map(RollingSpec::name));

    let n_rows = n - start;
    let y_raw = &series.response;
    let mut u = Array2::zeros((n_rows, d));
    let mut y = Vec::with_capacity(n_rows);
    let mut origin_index = Vec::with_capacity(n_rows);
    for (row, t) in (start..n).enumerate() {
        let mut col = 0;
        for k in 1..=p {
            u[[row, col]] = y_raw[t - k];
            col += 1;
        }
        let exog_t = if opts.exog_contemporaneous { t } else { t - 1 };
        for j in 0..m {
            u[[row, col]] = series.exogenous[[exog_t, j]];
            col += 1;
        }
        for spec in &opts.rolling {
            u[[row, col]] = spec.apply(&y_raw[t - spec.window..t]);
            col += 1;
        }
        y.push(y_raw[t]);
        origin_index.push(t);
    }
    Ok(DesignMatrix { u, y, feature_names, origin_index })
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_frac: 0.7, val_frac: 0.1, test_frac: 0.2 }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self> {
        let spec = Self { train_frac, val_frac, test_frac };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
            return Err(Error::InvalidParameter(format!("split fractions must be > 0, got {fr:?}")));
        }
        if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("split fractions must sum to 1, got {fr:?}")));
        }
        Ok(())
    }
}

impl std::str::FromStr for SplitSpec {
    type Err = Error;

    /// Parses `train,val,test`, e.g. `0.7,0.1,0.2`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::InvalidParameter(format!("bad split '{s}'")))?;
        match parts.as_slice() {
            [a, b, c] => SplitSpec::new(*a, *b, *c),
            _ => Err(Error::InvalidParameter(format!("split '{s}' needs three fractions"))),
        }
    }
}

/// Contiguous ordered partition of `0..n_rows`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Splits {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

/// Sizes are `floor(N·frac)` for validation and test; train absorbs the
/// remainder.
pub fn temporal_split(n_rows: usize, spec: &SplitSpec) -> Result<Splits> {
    spec.validate()?;
    if n_rows < 10 {
        return Err(Error::InsufficientData(format!("temporal split needs >= 10 rows, got {n_rows}")));
    }
    let n = n_rows as f64;
    // Guard against 0.1 * 40000 = 3999.9999 style truncation.
    let floor = |f: f64| ((n * f) + 1e-9).floor() as usize;
    let n_val = floor(spec.val_frac);
    let n_test = floor(spec.test_frac);
    let n_train = n_rows.saturating_sub(n_val + n_test);
    for (name, size) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(Error::EmptySplit(format!("{name} split is empty for N = {n_rows}")));
        }
    }
    Ok(Splits { train: 0..n_train, val: n_train..n_train + n_val, test: n_train + n_val..n_rows })
}
