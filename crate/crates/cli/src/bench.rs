//! Full-factorial simulation benchmark over scenarios, sample sizes,
//! methods, lag counts and seeds.

use std::collections::BTreeMap;
use std::path::Path;

use flexts_core::scenarios::{DEFAULT_BURN_IN, DEFAULT_NONLINEAR_MEAN_SD};
use flexts_core::{ScenarioName, ScenarioSpec, SplitSpec};
use rayon::prelude::*;

use crate::csvio::fmt_f64;
use crate::error::{CliError, CliResult};
use crate::experiment::{describe, evaluate_method, Dataset, Method, MethodSettings};

pub const HEADER: [&str; 11] =
    ["scenario", "n", "method", "lags", "seed", "cde_loss", "se", "oracle_loss", "n_test", "selected", "status"];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchPlan {
    pub scenarios: Vec<ScenarioName>,
    pub ns: Vec<usize>,
    pub methods: Vec<Method>,
    pub lags: Vec<usize>,
    pub seeds: Vec<u64>,
    pub split: SplitSpec,
    pub burn_in: usize,
    pub noise_sd: f64,
    pub settings: MethodSettings,
}

impl BenchPlan {
    pub fn new(
        scenarios: Vec<ScenarioName>,
        ns: Vec<usize>,
        methods: Vec<Method>,
        lags: Vec<usize>,
        seeds: Vec<u64>,
    ) -> Self {
        Self {
            scenarios,
            ns,
            methods,
            lags,
            seeds,
            split: SplitSpec::default(),
            burn_in: DEFAULT_BURN_IN,
            noise_sd: DEFAULT_NONLINEAR_MEAN_SD,
            settings: MethodSettings::default(),
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let empty = [
            ("scenarios", self.scenarios.is_empty()),
            ("n", self.ns.is_empty()),
            ("methods", self.methods.is_empty()),
            ("lags", self.lags.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(CliError::usage(format!("bench needs a nonempty {name} list")));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut out = Vec::new();
        for &scenario in &self.scenarios {
            for &n in &self.ns {
                for &method in &self.methods {
                    for &lags in &self.lags {
                        for &seed in &self.seeds {
                            out.push(CellKey { scenario, n, method, lags, seed });
                        }
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

/// Field order is the output sort order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub scenario: ScenarioName,
    pub n: usize,
    pub method: Method,
    pub lags: usize,
    pub seed: u64,
}

impl CellKey {
    fn fields(&self) -> [String; 5] {
        [
            self.scenario.as_str().to_string(),
            self.n.to_string(),
            self.method.as_str().to_string(),
            self.lags.to_string(),
            self.seed.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellScores {
    pub cde_loss: f64,
    pub se: f64,
    pub oracle_loss: Option<f64>,
    pub n_test: usize,
    pub selected: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub outcome: Result<CellScores, String>,
}

impl CellResult {
    pub fn record(&self) -> Vec<String> {
        let mut r: Vec<String> = self.key.fields().into();
        match &self.outcome {
            Ok(s) => r.extend([
                fmt_f64(s.cde_loss),
                fmt_f64(s.se),
                s.oracle_loss.map(fmt_f64).unwrap_or_default(),
                s.n_test.to_string(),
                s.selected.clone(),
                "ok".to_string(),
            ]),
            Err(e) => {
                r.extend(std::iter::repeat_n(String::new(), 5));
                r.push(format!("error: {e}"));
            }
        }
        r
    }
}

type DataKey = (ScenarioName, usize, usize, u64);

fn run_group(plan: &BenchPlan, (scenario, n, lags, seed): DataKey, methods: &[Method]) -> Vec<CellResult> {
    let spec = ScenarioSpec { name: scenario, n, seed, burn_in: plan.burn_in, noise_sd: plan.noise_sd };
    let ds = Dataset::simulate(&spec, lags, &plan.split);
    methods
        .iter()
        .map(|&method| {
            let key = CellKey { scenario, n, method, lags, seed };
            let outcome = match &ds {
                Err(e) => Err(e.to_string()),
                Ok(ds) => evaluate_method(ds, method, &plan.settings).map_err(|e| e.to_string()).map(|ev| CellScores {
                    cde_loss: ev.report.loss,
                    se: ev.report.std_error,
                    oracle_loss: ev.oracle_loss,
                    n_test: ev.report.n_eval,
                    selected: describe(&ev.model),
                }),
            };
            CellResult { key, outcome }
        })
        .collect()
}

/// Runs the given cells, sharing one simulated dataset across the methods
/// of each `(scenario, n, lags, seed)`. Results are sorted by cell key.
pub fn run_cells(plan: &BenchPlan, cells: &[CellKey]) -> Vec<CellResult> {
    let mut groups: BTreeMap<DataKey, Vec<Method>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.scenario, c.n, c.lags, c.seed)).or_default().push(c.method);
    }
    let groups: Vec<(DataKey, Vec<Method>)> = groups.into_iter().collect();
    let mut out: Vec<CellResult> = groups.par_iter().flat_map_iter(|(k, m)| run_group(plan, *k, m)).collect();
    out.sort_by_key(|r| r.key);
    out
}

pub fn run(plan: &BenchPlan) -> Vec<CellResult> {
    run_cells(plan, &plan.cells())
}

/// Rows from an earlier output whose status is ok, keyed by their first
/// five fields.
pub fn completed_rows(path: &Path) -> CliResult<BTreeMap<[String; 5], Vec<String>>> {
    let mut out = BTreeMap::new();
    if !path.exists() {
        return Ok(out);
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    for rec in reader.records() {
        let rec = rec.map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if fields.len() == HEADER.len() && fields[HEADER.len() - 1] == "ok" {
            let key: [String; 5] = std::array::from_fn(|i| fields[i].clone());
            out.insert(key, fields);
        }
    }
    Ok(out)
}

/// Runs the plan, reusing finished rows from `previous`, and returns
/// sorted records.
pub fn run_resuming(plan: &BenchPlan, previous: &BTreeMap<[String; 5], Vec<String>>) -> Vec<Vec<String>> {
    let cells = plan.cells();
    let todo: Vec<CellKey> = cells.iter().filter(|c| !previous.contains_key(&c.fields())).copied().collect();
    let fresh: BTreeMap<CellKey, Vec<String>> =
        run_cells(plan, &todo).into_iter().map(|r| (r.key, r.record())).collect();
    cells.iter().map(|c| fresh.get(c).cloned().unwrap_or_else(|| previous[&c.fields()].clone())).collect()
}

pub fn header() -> Vec<String> {
    HEADER.iter().map(|s| s.to_string()).collect()
}
