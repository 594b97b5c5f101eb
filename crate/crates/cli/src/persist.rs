//! Model files: one self-describing JSON document per fitted model.
//!
//! Every float is stored as a decimal string with 17 significant digits so
//! that loading reproduces the exact bits.

use std::path::Path;

use flexts_core::baselines::{GarchModel, NnkcdeModel};
use flexts_core::estimator::{CandidateSummary, FitDiagnostics, FittedBackend};
use flexts_core::regression::LinearModel;
use flexts_core::{
    BackendSpec, BasisKind, CoefficientModel, EmbedOptions, ResponseGrid, RollingSpec, Scaler, SplitSpec,
};
use ndarray::Array2;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CliError, CliResult};
use crate::experiment::Method;

pub const FORMAT_VERSION: u32 = 1;

/// How the model's covariates were built from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSchema {
    pub target: String,
    pub exog: Vec<String>,
    pub embed: EmbedOptions,
    pub split: SplitSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Flexcode(CoefficientModel),
    Nnkcde(NnkcdeModel),
    Garch { model: GarchModel, grid: ResponseGrid },
}

impl SavedModel {
    pub fn method(&self) -> Method {
        match self {
            SavedModel::Flexcode(_) => Method::Flexcode,
            SavedModel::Nnkcde(_) => Method::Nnkcde,
            SavedModel::Garch { .. } => Method::Garch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub schema: DataSchema,
    pub seed: u64,
    pub model: SavedModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Num(f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{:.16e}", self.0))
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map(Num).map_err(|_| serde::de::Error::custom(format!("bad number '{s}'")))
    }
}

fn nums(v: &[f64]) -> Vec<Num> {
    v.iter().map(|&x| Num(x)).collect()
}

fn floats(v: &[Num]) -> Vec<f64> {
    v.iter().map(|n| n.0).collect()
}

#[derive(Serialize, Deserialize)]
struct Matrix {
    rows: usize,
    cols: usize,
    /// Row-major.
    data: Vec<Num>,
}

impl Matrix {
    fn from_array(a: &Array2<f64>) -> Self {
        Self { rows: a.nrows(), cols: a.ncols(), data: a.iter().map(|&x| Num(x)).collect() }
    }

    fn to_array(&self) -> CliResult<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), floats(&self.data))
            .map_err(|e| CliError::data(format!("model file: matrix shape: {e}")))
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaDto {
    target: String,
    exog: Vec<String>,
    lags: usize,
    rolling: Vec<String>,
    exog_contemporaneous: bool,
    split: [Num; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SpecDto {
    NadarayaWatson { radius: Num },
    Knn { k: usize },
    Lasso { lambda: Num, max_iter: usize, tol: Num },
}

impl From<BackendSpec> for SpecDto {
    fn from(s: BackendSpec) -> Self {
        match s {
            BackendSpec::NadarayaWatson { radius } => SpecDto::NadarayaWatson { radius: Num(radius) },
            BackendSpec::Knn { k } => SpecDto::Knn { k },
            BackendSpec::Lasso { lambda, max_iter, tol } => {
                SpecDto::Lasso { lambda: Num(lambda), max_iter, tol: Num(tol) }
            }
        }
    }
}

impl From<&SpecDto> for BackendSpec {
    fn from(s: &SpecDto) -> Self {
        match *s {
            SpecDto::NadarayaWatson { radius } => BackendSpec::NadarayaWatson { radius: radius.0 },
            SpecDto::Knn { k } => BackendSpec::Knn { k },
            SpecDto::Lasso { lambda, max_iter, tol } => BackendSpec::Lasso { lambda: lambda.0, max_iter, tol: tol.0 },
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
enum BackendDto {
    Memory {
        spec: SpecDto,
        n_terms: usize,
        train_u: Matrix,
        train_z: Vec<Num>,
    },
    Linear {
        lambda: Num,
        intercepts: Vec<Num>,
        slopes: Matrix,
        std_slopes: Matrix,
        feature_means: Vec<Num>,
        feature_sds: Vec<Num>,
        iterations: usize,
        converged: bool,
    },
}

#[derive(Serialize, Deserialize)]
struct CandidateDto {
    spec: SpecDto,
    best_cutoff: usize,
    best_loss: Num,
}

#[derive(Serialize, Deserialize)]
struct FlexcodeDto {
    scaler: [Num; 3],
    basis: BasisKind,
    cutoff: usize,
    max_terms: usize,
    grid_size: usize,
    feature_names: Vec<String>,
    val_loss_curve: Vec<Num>,
    candidates: Vec<CandidateDto>,
    cutoff_at_max: bool,
    validation_fallbacks: usize,
    validation_outside: usize,
    lasso_converged: bool,
    backend: BackendDto,
}

#[derive(Serialize, Deserialize)]
struct GridDto {
    lo: Num,
    hi: Num,
    size: usize,
}

impl From<&ResponseGrid> for GridDto {
    fn from(g: &ResponseGrid) -> Self {
        Self { lo: Num(g.lo), hi: Num(g.hi), size: g.size }
    }
}

impl GridDto {
    fn to_grid(&self) -> CliResult<ResponseGrid> {
        Ok(ResponseGrid::new(self.lo.0, self.hi.0, self.size)?)
    }
}

#[derive(Serialize, Deserialize)]
struct NnkcdeDto {
    train_u: Matrix,
    train_y: Vec<Num>,
    k: usize,
    bandwidth: Num,
    grid: GridDto,
    val_loss: Num,
    skipped_ks: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct GarchDto {
    ar: Vec<Num>,
    intercept: Num,
    omega: Num,
    alpha: Num,
    beta: Num,
    gap: Num,
    init_variance: Num,
    log_likelihood: Num,
    start_log_likelihoods: Vec<Num>,
    ar_flag: bool,
    grid: GridDto,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
enum PayloadDto {
    Flexcode(FlexcodeDto),
    Nnkcde(NnkcdeDto),
    Garch(GarchDto),
}

#[derive(Serialize, Deserialize)]
struct Document {
    format_version: u32,
    seed: u64,
    data: SchemaDto,
    model: PayloadDto,
}

fn flexcode_dto(m: &CoefficientModel) -> FlexcodeDto {
    let backend = match &m.backend {
        FittedBackend::Memory { spec, train_u, train_z, train_phi } => BackendDto::Memory {
            spec: (*spec).into(),
            n_terms: train_phi.ncols(),
            train_u: Matrix::from_array(train_u),
            train_z: nums(train_z),
        },
        FittedBackend::Linear(l) => BackendDto::Linear {
            lambda: Num(l.lambda),
            intercepts: nums(&l.intercepts),
            slopes: Matrix::from_array(&l.slopes),
            std_slopes: Matrix::from_array(&l.std_slopes),
            feature_means: nums(&l.feature_means),
            feature_sds: nums(&l.feature_sds),
            iterations: l.iterations,
            converged: l.converged,
        },
    };
    FlexcodeDto {
        scaler: [Num(m.scaler.lo), Num(m.scaler.hi), Num(m.scaler.pad)],
        basis: m.basis,
        cutoff: m.cutoff,
        max_terms: m.max_terms,
        grid_size: m.grid_size,
        feature_names: m.feature_names.clone(),
        val_loss_curve: nums(&m.val_loss_curve),
        candidates: m
            .candidates
            .iter()
            .map(|c| CandidateDto { spec: c.spec.into(), best_cutoff: c.best_cutoff, best_loss: Num(c.best_loss) })
            .collect(),
        cutoff_at_max: m.diagnostics.cutoff_at_max,
        validation_fallbacks: m.diagnostics.validation_fallbacks,
        validation_outside: m.diagnostics.validation_outside,
        lasso_converged: m.diagnostics.lasso_converged,
        backend,
    }
}

fn flexcode_from(d: &FlexcodeDto) -> CliResult<CoefficientModel> {
    let backend = match &d.backend {
        BackendDto::Memory { spec, n_terms, train_u, train_z } => {
            FittedBackend::memory(spec.into(), d.basis, train_u.to_array()?, floats(train_z), *n_terms)?
        }
        BackendDto::Linear {
            lambda,
            intercepts,
            slopes,
            std_slopes,
            feature_means,
            feature_sds,
            iterations,
            converged,
        } => FittedBackend::Linear(LinearModel {
            lambda: lambda.0,
            intercepts: floats(intercepts),
            slopes: slopes.to_array()?,
            std_slopes: std_slopes.to_array()?,
            feature_means: floats(feature_means),
            feature_sds: floats(feature_sds),
            iterations: *iterations,
            converged: *converged,
        }),
    };
    Ok(CoefficientModel {
        scaler: Scaler::new(d.scaler[0].0, d.scaler[1].0, d.scaler[2].0)?,
        basis: d.basis,
        backend,
        cutoff: d.cutoff,
        max_terms: d.max_terms,
        val_loss_curve: floats(&d.val_loss_curve),
        candidates: d
            .candidates
            .iter()
            .map(|c| CandidateSummary { spec: (&c.spec).into(), best_cutoff: c.best_cutoff, best_loss: c.best_loss.0 })
            .collect(),
        grid_size: d.grid_size,
        feature_names: d.feature_names.clone(),
        diagnostics: FitDiagnostics {
            cutoff_at_max: d.cutoff_at_max,
            validation_fallbacks: d.validation_fallbacks,
            validation_outside: d.validation_outside,
            lasso_converged: d.lasso_converged,
        },
    })
}

impl ModelFile {
    pub fn to_json(&self) -> String {
        let s = &self.schema;
        let model = match &self.model {
            SavedModel::Flexcode(m) => PayloadDto::Flexcode(flexcode_dto(m)),
            SavedModel::Nnkcde(m) => PayloadDto::Nnkcde(NnkcdeDto {
                train_u: Matrix::from_array(&m.train_u),
                train_y: nums(&m.train_y),
                k: m.k,
                bandwidth: Num(m.bandwidth),
                grid: (&m.grid).into(),
                val_loss: Num(m.val_loss),
                skipped_ks: m.skipped_ks.clone(),
            }),
            SavedModel::Garch { model: m, grid } => PayloadDto::Garch(GarchDto {
                ar: nums(&m.ar),
                intercept: Num(m.intercept),
                omega: Num(m.omega),
                alpha: Num(m.alpha),
                beta: Num(m.beta),
                gap: Num(m.gap),
                init_variance: Num(m.init_variance),
                log_likelihood: Num(m.log_likelihood),
                start_log_likelihoods: nums(&m.start_log_likelihoods),
                ar_flag: m.ar_flag,
                grid: grid.into(),
            }),
        };
        let doc = Document {
            format_version: FORMAT_VERSION,
            seed: self.seed,
            data: SchemaDto {
                target: s.target.clone(),
                exog: s.exog.clone(),
                lags: s.embed.lags,
                rolling: s.embed.rolling.iter().map(rolling_token).collect(),
                exog_contemporaneous: s.embed.exog_contemporaneous,
                split: [Num(s.split.train_frac), Num(s.split.val_frac), Num(s.split.test_frac)],
            },
            model,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("model document serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::data(format!("model file is not JSON: {e}")))?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(FORMAT_VERSION) => {}
            Some(v) => return Err(CliError::data(format!("unsupported model format_version {v}"))),
            None => return Err(CliError::data("model file has no format_version")),
        }
        let doc: Document =
            serde_json::from_value(value).map_err(|e| CliError::data(format!("malformed model file: {e}")))?;
        let rolling =
            doc.data.rolling.iter().map(|r| r.parse::<RollingSpec>()).collect::<flexts_core::Result<Vec<_>>>()?;
        let schema = DataSchema {
            target: doc.data.target,
            exog: doc.data.exog,
            embed: EmbedOptions { lags: doc.data.lags, rolling, exog_contemporaneous: doc.data.exog_contemporaneous },
            split: SplitSpec::new(doc.data.split[0].0, doc.data.split[1].0, doc.data.split[2].0)?,
        };
        let model = match &doc.model {
            PayloadDto::Flexcode(d) => SavedModel::Flexcode(flexcode_from(d)?),
            PayloadDto::Nnkcde(d) => {
                let mut m =
                    NnkcdeModel::new(d.train_u.to_array()?, floats(&d.train_y), d.k, d.bandwidth.0, d.grid.to_grid()?)?;
                m.val_loss = d.val_loss.0;
                m.skipped_ks = d.skipped_ks.clone();
                SavedModel::Nnkcde(m)
            }
            PayloadDto::Garch(d) => SavedModel::Garch {
                model: GarchModel {
                    ar: floats(&d.ar),
                    intercept: d.intercept.0,
                    omega: d.omega.0,
                    alpha: d.alpha.0,
                    beta: d.beta.0,
                    gap: d.gap.0,
                    init_variance: d.init_variance.0,
                    log_likelihood: d.log_likelihood.0,
                    start_log_likelihoods: floats(&d.start_log_likelihoods),
                    ar_flag: d.ar_flag,
                },
                grid: d.grid.to_grid()?,
            },
        };
        Ok(ModelFile { schema, seed: doc.seed, model })
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// Inverse of `RollingSpec::from_str`.
pub fn rolling_token(r: &RollingSpec) -> String {
    let name = r.name();
    let rest = name.trim_start_matches("roll_");
    let (kind, window) = rest.rsplit_once('_').expect("roll_<kind>_<window>");
    format!("{kind}:{window}")
}
