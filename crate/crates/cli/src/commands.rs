//! Argument parsing and the six subcommands.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flexts_core::estimator::DEFAULT_MAX_TERMS;
use flexts_core::scenarios::{DEFAULT_BURN_IN, DEFAULT_NONLINEAR_MEAN_SD};
use flexts_core::{
    pinball_loss, BackendGrid, BackendKind, BackendSpec, BasisKind, DesignMatrix, EmbedOptions, FitConfig, RollingSpec,
    ScenarioName, ScenarioSpec, SelectionLoss, SplitSpec, DEFAULT_GRID_SIZE, DEFAULT_PAD,
};

use crate::bench::{self, BenchPlan};
use crate::config::expand_config;
use crate::csvio::{fmt_f64, open_output, read_table, write_csv};
use crate::error::{CliError, CliResult};
use crate::experiment::{describe, fit_method, oracle_loss, predict_rows, Dataset, Method, MethodSettings};
use crate::persist::{DataSchema, ModelFile, SavedModel};

#[derive(Debug, Parser)]
#[command(name = "flexts", version, about = "Conditional density estimation for time series")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a simulated scenario path as CSV.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Fit a model on the training and validation blocks of a CSV series.
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// Score fitted models on the test block of a CSV series.
    #[command(args_override_self = true)]
    Evaluate(EvaluateArgs),
    /// Predictive quantiles and densities for rows of a CSV series.
    #[command(args_override_self = true)]
    Predict(PredictArgs),
    /// Per-feature importance of a fitted model.
    #[command(args_override_self = true)]
    Importance(ImportanceArgs),
    /// Run a simulation benchmark grid.
    #[command(args_override_self = true)]
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, env = "FLEXTS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_NONLINEAR_MEAN_SD)]
    pub noise_sd: f64,
    /// Add a `z_jump` column for the jump scenarios.
    #[arg(long)]
    pub jumps: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "y")]
    pub target: String,
    /// Exogenous columns, comma-separated.
    #[arg(long, value_delimiter = ',')]
    pub exog: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub lags: usize,
    /// Rolling summaries of the response, e.g. `mean:5,variance:10`.
    #[arg(long = "roll", value_delimiter = ',')]
    pub rolling: Vec<String>,
    /// Use exogenous values at the response time instead of one step back.
    #[arg(long)]
    pub exog_contemporaneous: bool,
    #[arg(long, default_value = "0.7,0.1,0.2")]
    pub split: String,
}

impl DataArgs {
    fn schema(&self) -> CliResult<DataSchema> {
        let rolling = self.rolling.iter().map(|r| r.parse::<RollingSpec>()).collect::<flexts_core::Result<Vec<_>>>()?;
        Ok(DataSchema {
            target: self.target.clone(),
            exog: self.exog.clone(),
            embed: EmbedOptions { lags: self.lags, rolling, exog_contemporaneous: self.exog_contemporaneous },
            split: self.split.parse()?,
        })
    }
}

/// Estimator tuning flags shared by `fit` and `bench`.
#[derive(Debug, Clone, Args)]
pub struct TuningArgs {
    /// Backend kinds searched with their default grids: nw, knn, lasso.
    #[arg(long, value_delimiter = ',', default_value = "nw")]
    pub backend: Vec<String>,
    /// Explicit NW radii (replaces the default grid).
    #[arg(long, value_delimiter = ',')]
    pub radius: Vec<f64>,
    /// Explicit kNN neighbor counts.
    #[arg(long, value_delimiter = ',')]
    pub k: Vec<usize>,
    /// Explicit LASSO penalties.
    #[arg(long, value_delimiter = ',')]
    pub lambda: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_MAX_TERMS)]
    pub max_terms: usize,
    #[arg(long, default_value = "cosine")]
    pub basis: String,
    /// Cutoff selection loss: raw or post.
    #[arg(long, default_value = "raw")]
    pub selection: String,
    #[arg(long)]
    pub refit_final: bool,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    #[arg(long, default_value_t = DEFAULT_PAD)]
    pub pad: f64,
    /// NNKCDE neighbor counts (default grid when empty).
    #[arg(long, value_delimiter = ',')]
    pub nn_k: Vec<usize>,
    /// NNKCDE bandwidths (default grid when empty).
    #[arg(long, value_delimiter = ',')]
    pub bandwidth: Vec<f64>,
}

impl TuningArgs {
    pub fn settings(&self) -> CliResult<MethodSettings> {
        let mut explicit: Vec<BackendSpec> = Vec::new();
        explicit.extend(self.radius.iter().map(|&radius| BackendSpec::NadarayaWatson { radius }));
        explicit.extend(self.k.iter().map(|&k| BackendSpec::Knn { k }));
        explicit.extend(self.lambda.iter().map(|&l| BackendSpec::lasso(l)));
        let backend = if explicit.is_empty() {
            let kinds =
                self.backend.iter().map(|b| b.parse::<BackendKind>()).collect::<flexts_core::Result<Vec<_>>>()?;
            if kinds.is_empty() {
                return Err(CliError::usage("--backend needs at least one kind"));
            }
            BackendGrid::Auto(kinds)
        } else {
            BackendGrid::Fixed(explicit)
        };
        let selection = match self.selection.as_str() {
            "raw" => SelectionLoss::Raw,
            "post" | "post-processed" | "postprocessed" => SelectionLoss::PostProcessed,
            other => return Err(CliError::usage(format!("unknown selection loss '{other}' (raw or post)"))),
        };
        let cfg = FitConfig {
            basis: self.basis.parse::<BasisKind>()?,
            max_terms: self.max_terms,
            backend,
            grid_size: self.grid_size,
            pad: self.pad,
            selection,
            refit_final: self.refit_final,
        };
        cfg.validate()?;
        Ok(MethodSettings { flexcode: cfg, nn_ks: self.nn_k.clone(), bandwidths: self.bandwidth.clone() })
    }
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "flexcode")]
    pub method: String,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Stored with the model and used as the default importance seed.
    #[arg(long, env = "FLEXTS_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Model files; repeat to compare methods on the same rows.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long)]
    pub data: PathBuf,
    /// Quantile levels for the pinball loss.
    #[arg(long, value_delimiter = ',')]
    pub quantiles: Vec<f64>,
    /// Also emit `log(pinball)` per level.
    #[arg(long)]
    pub log_pinball: bool,
    /// Scenario that generated the data; adds `oracle_cde_loss`.
    #[arg(long)]
    pub oracle: Option<String>,
    #[arg(long, default_value_t = DEFAULT_NONLINEAR_MEAN_SD)]
    pub noise_sd: f64,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Rows to predict: test or all.
    #[arg(long, default_value = "test")]
    pub rows: String,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.25,0.5,0.75,0.95")]
    pub quantiles: Vec<f64>,
    /// Long-format grid densities (`index,y,density`).
    #[arg(long)]
    pub density_out: Option<PathBuf>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ImportanceArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Permutation seed; defaults to the seed stored in the model.
    #[arg(long, env = "FLEXTS_SEED")]
    pub seed: Option<u64>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "ar,arma_jump,arma_jump_t,nonlinear_mean,nonlinear_variance")]
    pub scenarios: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1000,2500,5000")]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "flexcode,nnkcde,garch")]
    pub methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    pub lags: Vec<usize>,
    /// Seeds as a list and/or inclusive ranges, e.g. `0-9` or `1,4,7`.
    #[arg(long, value_delimiter = ',', env = "FLEXTS_SEED", default_value = "0-9")]
    pub seeds: Vec<String>,
    #[arg(long, default_value = "0.7,0.1,0.2")]
    pub split: String,
    #[arg(long, default_value_t = DEFAULT_BURN_IN)]
    pub burn_in: usize,
    #[arg(long, default_value_t = DEFAULT_NONLINEAR_MEAN_SD)]
    pub noise_sd: f64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Keep finished rows of an existing output and run only the rest.
    #[arg(long)]
    pub resume: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

fn parse_seeds(items: &[String]) -> CliResult<Vec<u64>> {
    let mut out = Vec::new();
    for item in items {
        let bad = || CliError::usage(format!("bad seed '{item}'"));
        match item.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if b < a {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => out.push(item.trim().parse().map_err(|_| bad())?),
        }
    }
    Ok(out)
}

/// Parses `argv` (including the program name) after expanding any
/// `--config` file, and runs the command.
pub fn run(argv: Vec<String>) -> CliResult<()> {
    let argv = expand_config(argv)?;
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => match e.kind() {
            clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                print!("{e}");
                return Ok(());
            }
            _ => {
                let text = e.to_string();
                let first = text.lines().next().unwrap_or("invalid arguments");
                return Err(CliError::usage(first.trim_start_matches("error: ").to_string()));
            }
        },
    };
    match cli.command {
        Command::Simulate(a) => simulate(&a),
        Command::Fit(a) => fit(&a),
        Command::Evaluate(a) => evaluate(&a),
        Command::Predict(a) => predict(&a),
        Command::Importance(a) => importance(&a),
        Command::Bench(a) => bench_cmd(&a),
    }
}

fn simulate(a: &SimulateArgs) -> CliResult<()> {
    let name: ScenarioName = a.scenario.parse()?;
    let spec = ScenarioSpec { name, n: a.n, seed: a.seed, burn_in: a.burn_in, noise_sd: a.noise_sd };
    let sim = spec.generate()?;
    let with_jumps = a.jumps && sim.jumps.is_some();
    let header: Vec<String> = if with_jumps { vec!["y".into(), "z_jump".into()] } else { vec!["y".into()] };
    let rows: Vec<Vec<String>> = sim
        .y
        .iter()
        .enumerate()
        .map(|(t, &y)| {
            let mut r = vec![fmt_f64(y)];
            if with_jumps {
                r.push(if sim.jumps.as_ref().unwrap()[t] { "1" } else { "0" }.to_string());
            }
            r
        })
        .collect();
    write_csv(a.output.as_deref(), &header, &rows)
}

fn load_dataset(path: &Path, schema: &DataSchema) -> CliResult<Dataset> {
    let table = read_table(path, &schema.target, &schema.exog)?;
    Ok(Dataset::from_table(&table, &schema.embed, &schema.split)?)
}

fn fit(a: &FitArgs) -> CliResult<()> {
    let method: Method = a.method.parse()?;
    let schema = a.data.schema()?;
    let settings = a.tuning.settings()?;
    let ds = load_dataset(&a.data.data, &schema)?;
    let model = fit_method(&ds, method, &settings)?;
    let file = ModelFile { schema, seed: a.seed, model };
    file.save(&a.output)?;

    let mut out = std::io::stdout().lock();
    writeln!(out, "method: {method}")?;
    writeln!(
        out,
        "rows: train={} validation={} test={}",
        ds.splits.train.len(),
        ds.splits.val.len(),
        ds.splits.test.len()
    )?;
    writeln!(out, "selected: {}", describe(&file.model))?;
    match &file.model {
        SavedModel::Flexcode(m) => {
            writeln!(out, "cutoff: {}", m.cutoff)?;
            writeln!(out, "backend: {}", m.selected_backend().describe())?;
            writeln!(out, "validation_loss: {}", fmt_f64(m.val_loss_curve[m.cutoff]))?;
            writeln!(out, "validation_curve:")?;
            for (i, l) in m.val_loss_curve.iter().enumerate() {
                writeln!(out, "  {i} {}", fmt_f64(*l))?;
            }
            if m.diagnostics.cutoff_at_max {
                eprintln!("flexts: warning: selected cutoff equals --max-terms {}; consider raising it", m.max_terms);
            }
            if !m.diagnostics.lasso_converged {
                eprintln!("flexts: warning: LASSO did not reach its tolerance");
            }
        }
        SavedModel::Nnkcde(m) => {
            writeln!(out, "validation_loss: {}", fmt_f64(m.val_loss))?;
            for k in &m.skipped_ks {
                eprintln!("flexts: warning: NNKCDE k={k} exceeds the training rows; skipped");
            }
        }
        SavedModel::Garch { model, .. } => {
            writeln!(out, "log_likelihood: {}", fmt_f64(model.log_likelihood))?;
            if model.ar_flag {
                eprintln!("flexts: warning: sum of |AR coefficients| >= 1");
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Rows of `ds.design` whose origins lie in `origins`.
fn rows_at(ds: &Dataset, origins: &BTreeSet<usize>) -> DesignMatrix {
    let idx: Vec<usize> = (0..ds.design.n_rows()).filter(|&r| origins.contains(&ds.design.origin_index[r])).collect();
    match (idx.first(), idx.last()) {
        (Some(&a), Some(&b)) => ds.design.slice(a..b + 1),
        _ => ds.design.slice(0..0),
    }
}

fn default_quantiles() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).map(|t| (t * 100.0).round() / 100.0).collect()
}

fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let taus = if a.quantiles.is_empty() { default_quantiles() } else { a.quantiles.clone() };
    if let Some(t) = taus.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return Err(CliError::usage(format!("quantile level {t} must lie in (0, 1)")));
    }
    let oracle = a.oracle.as_deref().map(str::parse::<ScenarioName>).transpose()?;
    let files: Vec<ModelFile> = a.models.iter().map(|p| ModelFile::load(p)).collect::<CliResult<_>>()?;
    let mut datasets: Vec<Dataset> = Vec::new();
    for f in &files {
        let mut ds = load_dataset(&a.data, &f.schema)?;
        let dim = ds.design.dim();
        let expected = match &f.model {
            SavedModel::Flexcode(m) => Some(m.dim()),
            SavedModel::Nnkcde(m) => Some(m.dim()),
            SavedModel::Garch { .. } => None,
        };
        if let Some(e) = expected.filter(|&e| e != dim) {
            return Err(CliError::data(format!("model expects {e} features, data give {dim}")));
        }
        ds.oracle = oracle.map(|s| (s, a.noise_sd));
        datasets.push(ds);
    }
    // The test blocks are suffixes; compare every model on the shortest.
    let common: BTreeSet<usize> = datasets
        .iter()
        .map(|ds| ds.test().origin_index.into_iter().collect::<BTreeSet<_>>())
        .reduce(|a, b| a.intersection(&b).copied().collect())
        .unwrap_or_default();
    if common.is_empty() {
        return Err(CliError::data("no common test rows"));
    }

    let mut header: Vec<String> =
        ["method", "model", "n_test", "cde_loss", "se"].iter().map(|s| s.to_string()).collect();
    if oracle.is_some() {
        header.push("oracle_cde_loss".into());
    }
    header.extend(taus.iter().map(|t| format!("pinball_{t}")));
    if a.log_pinball {
        header.extend(taus.iter().map(|t| format!("log_pinball_{t}")));
    }
    let mut rows = Vec::new();
    for ((f, ds), path) in files.iter().zip(&datasets).zip(&a.models) {
        let test = rows_at(ds, &common);
        let dens = predict_rows(&f.model, ds, &test)?;
        let report = flexts_core::cde_loss_grid(&dens, &test.y)?;
        let mut r = vec![
            f.model.method().to_string(),
            path.display().to_string(),
            report.n_eval.to_string(),
            fmt_f64(report.loss),
            fmt_f64(report.std_error),
        ];
        if oracle.is_some() {
            r.push(oracle_loss(ds, &test.origin_index, &dens).map(fmt_f64).unwrap_or_default());
        }
        let qs: Vec<Vec<f64>> = dens.iter().map(|d| d.quantiles(&taus)).collect::<flexts_core::Result<_>>()?;
        let pins: Vec<f64> = taus
            .iter()
            .enumerate()
            .map(|(j, &t)| pinball_loss(&qs.iter().map(|q| q[j]).collect::<Vec<_>>(), &test.y, t))
            .collect::<flexts_core::Result<_>>()?;
        r.extend(pins.iter().map(|&p| fmt_f64(p)));
        if a.log_pinball {
            r.extend(pins.iter().map(|&p| fmt_f64(p.ln())));
        }
        rows.push(r);
    }
    write_csv(a.output.as_deref(), &header, &rows)
}

fn predict(a: &PredictArgs) -> CliResult<()> {
    let f = ModelFile::load(&a.model)?;
    let ds = load_dataset(&a.data, &f.schema)?;
    let rows = match a.rows.as_str() {
        "test" => ds.test(),
        "all" => ds.design.clone(),
        other => return Err(CliError::usage(format!("--rows must be test or all, got '{other}'"))),
    };
    let dens = predict_rows(&f.model, &ds, &rows)?;
    let mut header: Vec<String> = vec!["index".into(), "y".into()];
    header.extend(a.quantiles.iter().map(|t| format!("q_{t}")));
    let mut out = Vec::with_capacity(dens.len());
    for ((d, &o), &y) in dens.iter().zip(&rows.origin_index).zip(&rows.y) {
        let mut r = vec![o.to_string(), fmt_f64(y)];
        r.extend(d.quantiles(&a.quantiles)?.into_iter().map(fmt_f64));
        out.push(r);
    }
    write_csv(a.output.as_deref(), &header, &out)?;
    if let Some(path) = &a.density_out {
        let mut w = csv::Writer::from_writer(open_output(Some(path))?);
        w.write_record(["index", "y", "density"])?;
        for (d, &o) in dens.iter().zip(&rows.origin_index) {
            for (y, v) in d.grid_y.iter().zip(&d.density) {
                w.write_record([o.to_string(), fmt_f64(*y), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
    }
    Ok(())
}

fn importance(a: &ImportanceArgs) -> CliResult<()> {
    let f = ModelFile::load(&a.model)?;
    let SavedModel::Flexcode(m) = &f.model else {
        return Err(CliError::usage(format!("importance needs a flexcode model, got {}", f.model.method())));
    };
    let ds = load_dataset(&a.data, &f.schema)?;
    let scores = m.importance(&ds.val(), a.seed.unwrap_or(f.seed))?;
    let mut ranked: Vec<(usize, f64)> = scores.into_iter().enumerate().collect();
    ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
    let rows: Vec<Vec<String>> = ranked.iter().map(|&(j, s)| vec![m.feature_names[j].clone(), fmt_f64(s)]).collect();
    write_csv(a.output.as_deref(), &["feature".into(), "score".into()], &rows)
}

fn bench_cmd(a: &BenchArgs) -> CliResult<()> {
    let scenarios = a.scenarios.iter().map(|s| s.parse::<ScenarioName>()).collect::<flexts_core::Result<Vec<_>>>()?;
    let methods = a.methods.iter().map(|s| s.parse::<Method>()).collect::<flexts_core::Result<Vec<_>>>()?;
    let mut plan = BenchPlan::new(scenarios, a.n.clone(), methods, a.lags.clone(), parse_seeds(&a.seeds)?);
    plan.split = a.split.parse::<SplitSpec>()?;
    plan.burn_in = a.burn_in;
    plan.noise_sd = a.noise_sd;
    plan.settings = a.tuning.settings()?;
    plan.validate()?;

    let previous = match (&a.output, a.resume) {
        (Some(p), true) => bench::completed_rows(p)?,
        (None, true) => return Err(CliError::usage("--resume needs --output")),
        _ => Default::default(),
    };
    let rows = bench::run_resuming(&plan, &previous);
    let failed = rows.iter().filter(|r| r.last().is_some_and(|s| s != "ok")).count();
    if failed > 0 {
        eprintln!("flexts: warning: {failed} of {} cells failed; see the status column", rows.len());
    }
    write_csv(a.output.as_deref(), &bench::header(), &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_ranges() {
        assert_eq!(parse_seeds(&["0-3".into(), "7".into()]).unwrap(), vec![0, 1, 2, 3, 7]);
        assert!(parse_seeds(&["3-1".into()]).is_err());
        assert!(parse_seeds(&["x".into()]).is_err());
    }

    #[test]
    fn default_quantile_levels() {
        let q = default_quantiles();
        assert_eq!(q.len(), 19);
        assert_eq!(q[0], 0.05);
        assert_eq!(q[18], 0.95);
    }
}
