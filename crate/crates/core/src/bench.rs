//! Comparing selection methods over many one-class tasks with Dolan-More
//! performance profiles.
//!
//! The quality of a method on a task is `q = 2 - validation_error`, floored
//! at [`QUALITY_FLOOR`] so that ratios between methods stay finite.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{load_class_csv, make_one_class_task, OneClassTask};
use crate::error::{Error, Result};
use crate::risk::{validation_error, RiskKind};
use crate::rng::{derive_seed, stream};
use crate::select::{select_gamma, sweep_risk_curve, GammaGrid, PlateauSpec, RiskSettings, DEFAULT_GRID_STEPS};
use crate::svdd::{fit, SvddConfig};
use crate::kernel::Bandwidth;

pub const QUALITY_FLOOR: f64 = 1e-6;

pub const QUALITY_MAPPING: &str = "q = 2 - validation_error, clamped below at 1e-6";

/// Map a validation error in `[0, 2]` to a positive higher-is-better quality.
pub fn quality_from_error(validation_error: f64) -> Result<f64> {
    if !(0.0..=2.0).contains(&validation_error) {
        return Err(Error::param(
            "validation_error",
            format!("{validation_error} not in [0, 2]"),
        ));
    }
    Ok((2.0 - validation_error).max(QUALITY_FLOOR))
}

/// `q[i][t]`: quality of method `i` on task `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityTable {
    pub methods: Vec<String>,
    pub tasks: Vec<String>,
    pub q: Vec<Vec<f64>>,
}

impl QualityTable {
    pub fn new(methods: Vec<String>, tasks: Vec<String>, q: Vec<Vec<f64>>) -> Result<Self> {
        if methods.is_empty() || tasks.is_empty() {
            return Err(Error::param("quality_table", "needs at least one method and one task"));
        }
        if q.len() != methods.len() || q.iter().any(|row| row.len() != tasks.len()) {
            return Err(Error::param("quality_table", "shape does not match methods x tasks"));
        }
        if q.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::param("quality_table", "qualities must be positive and finite"));
        }
        Ok(Self { methods, tasks, q })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DolanMoreCurve {
    pub method: String,
    pub beta: Vec<f64>,
    pub p: Vec<f64>,
}

/// 100 log-spaced values on `[1, 10]`.
pub fn default_beta_grid() -> Vec<f64> {
    GammaGrid::log_spaced(1.0, 10.0, 100)
        .expect("static grid")
        .values()
        .to_vec()
}

/// `p_i(beta) = |{t : q_ti >= max_j q_tj / beta}| / M` for every method `i`.
pub fn dolan_more_curves(table: &QualityTable, beta_grid: &[f64]) -> Result<Vec<DolanMoreCurve>> {
    if beta_grid.is_empty() {
        return Err(Error::param("beta_grid", "empty"));
    }
    if beta_grid.iter().any(|&b| !(b >= 1.0 && b.is_finite())) {
        return Err(Error::param("beta_grid", "values must be >= 1"));
    }
    if beta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("beta_grid", "values must be increasing"));
    }
    let tasks = table.tasks.len();
    let best: Vec<f64> = (0..tasks)
        .map(|t| table.q.iter().map(|row| row[t]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    Ok(table
        .methods
        .iter()
        .zip(&table.q)
        .map(|(method, row)| {
            let p = beta_grid
                .iter()
                .map(|&beta| {
                    let hits = row.iter().zip(&best).filter(|&(&q, &b)| q >= b / beta).count();
                    hits as f64 / tasks as f64
                })
                .collect();
            DolanMoreCurve {
                method: method.clone(),
                beta: beta_grid.to_vec(),
                p,
            }
        })
        .collect())
}

/// CSV with columns `method,beta,p`.
pub fn curves_to_csv(curves: &[DolanMoreCurve]) -> String {
    let mut out = String::from("method,beta,p\n");
    for c in curves {
        for (b, p) in c.beta.iter().zip(&c.p) {
            out.push_str(&format!("{},{b},{p}\n", c.method));
        }
    }
    out
}

/// A risk paired with a selection rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub kind: RiskKind,
    pub plateau: PlateauSpec,
}

impl Method {
    pub fn new(kind: RiskKind) -> Self {
        Self {
            kind,
            plateau: PlateauSpec::default_for(kind),
        }
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.kind, self.plateau.rule)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum GridSpec {
    /// Per-task automatic grid with this many points.
    Auto { steps: usize },
    Fixed { values: Vec<f64> },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::Auto {
            steps: DEFAULT_GRID_STEPS,
        }
    }
}

impl GridSpec {
    pub fn resolve(&self, task: &OneClassTask) -> Result<GammaGrid> {
        match self {
            GridSpec::Auto { steps } => GammaGrid::auto(&task.train, *steps),
            GridSpec::Fixed { values } => GammaGrid::new(values.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub grid: GridSpec,
    pub svdd: SvddConfig,
    pub risk: RiskSettings,
    pub seed: u64,
    pub beta_grid: Vec<f64>,
    /// Wall times make reports non-reproducible, so they are opt-in.
    pub record_timings: bool,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            svdd: SvddConfig::default(),
            risk: RiskSettings::default(),
            seed: 0,
            beta_grid: default_beta_grid(),
            record_timings: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: String,
    pub method: String,
    pub selected_gamma: f64,
    pub grid_min: f64,
    pub grid_max: f64,
    pub validation_error: f64,
    pub quality: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskFailure {
    pub task: String,
    pub method: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub quality_mapping: String,
    pub config: BenchmarkConfig,
    pub methods: Vec<Method>,
    pub records: Vec<TaskRecord>,
    pub failures: Vec<TaskFailure>,
    pub quality_table: QualityTable,
    pub curves: Vec<DolanMoreCurve>,
}

impl BenchmarkReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mean quality per method, in method order.
    pub fn mean_quality(&self) -> Vec<(String, f64)> {
        self.quality_table
            .methods
            .iter()
            .zip(&self.quality_table.q)
            .map(|(m, row)| (m.clone(), row.iter().sum::<f64>() / row.len() as f64))
            .collect()
    }
}

fn run_task(
    task: &OneClassTask,
    task_seed: u64,
    methods: &[Method],
    config: &BenchmarkConfig,
) -> Vec<std::result::Result<TaskRecord, TaskFailure>> {
    let fail = |method: &Method, e: Error| TaskFailure {
        task: task.name.clone(),
        method: method.name(),
        error: e.to_string(),
    };
    let grid = match config.grid.resolve(task) {
        Ok(g) => g,
        Err(e) => {
            let msg = e.to_string();
            return methods
                .iter()
                .map(|m| Err(fail(m, Error::InvalidDataset(msg.clone()))))
                .collect();
        }
    };
    let grid_min = grid.values()[0];
    let grid_max = *grid.values().last().expect("grid has >= 2 values");
    // one sweep per risk kind, shared by methods that only differ in rule
    let mut curves: Vec<(RiskKind, Result<crate::select::RiskCurve>)> = Vec::new();
    methods
        .iter()
        .map(|method| {
            let start = Instant::now();
            if !curves.iter().any(|(k, _)| *k == method.kind) {
                let curve = sweep_risk_curve(&task.train, &grid, &config.svdd, method.kind, &config.risk, task_seed);
                curves.push((method.kind, curve));
            }
            let curve = match &curves.iter().find(|(k, _)| *k == method.kind).expect("inserted").1 {
                Ok(c) => c,
                Err(e) => return Err(fail(method, Error::InvalidDataset(e.to_string()))),
            };
            let outcome = select_gamma(curve, &method.plateau).and_then(|sel| {
                let model = fit(
                    &task.train,
                    Bandwidth::new(sel.gamma)?,
                    &config.svdd,
                    derive_seed(task_seed, &[stream::FIT]),
                )?;
                let err = validation_error(&model, &task.validation)?;
                Ok((sel.gamma, err, quality_from_error(err)?))
            });
            match outcome {
                Ok((selected_gamma, validation_error, quality)) => Ok(TaskRecord {
                    task: task.name.clone(),
                    method: method.name(),
                    selected_gamma,
                    grid_min,
                    grid_max,
                    validation_error,
                    quality,
                    wall_time_ms: config
                        .record_timings
                        .then(|| start.elapsed().as_secs_f64() * 1e3),
                }),
                Err(e) => Err(fail(method, e)),
            }
        })
        .collect()
}

/// Sweep, select, refit and validate every method on every task.
///
/// Tasks run in parallel on the current rayon pool. Records are ordered by
/// task, then method. A failed (task, method) pair is listed under
/// `failures` and scores [`QUALITY_FLOOR`] in the quality table.
pub fn run_benchmark(tasks: &[OneClassTask], methods: &[Method], config: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if tasks.is_empty() {
        return Err(Error::param("tasks", "at least one task is required"));
    }
    if methods.is_empty() {
        return Err(Error::param("methods", "at least one method is required"));
    }
    config.svdd.validate()?;
    config.risk.validate()?;

    let per_task: Vec<_> = tasks
        .par_iter()
        .enumerate()
        .map(|(t, task)| {
            let task_seed = derive_seed(config.seed, &[stream::TASK, t as u64]);
            run_task(task, task_seed, methods, config)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut q = vec![vec![QUALITY_FLOOR; tasks.len()]; methods.len()];
    for (t, outcomes) in per_task.into_iter().enumerate() {
        for (i, outcome) in outcomes.into_iter().enumerate() {
            match outcome {
                Ok(rec) => {
                    q[i][t] = rec.quality;
                    records.push(rec);
                }
                Err(f) => failures.push(f),
            }
        }
    }
    let quality_table = QualityTable::new(
        methods.iter().map(Method::name).collect(),
        tasks.iter().map(|t| t.name.clone()).collect(),
        q,
    )?;
    let curves = dolan_more_curves(&quality_table, &config.beta_grid)?;
    Ok(BenchmarkReport {
        quality_mapping: QUALITY_MAPPING.to_owned(),
        config: config.clone(),
        methods: methods.to_vec(),
        records,
        failures,
        quality_table,
        curves,
    })
}

/// How multiclass corpus files become one-class tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub label_column: String,
    pub anomaly_fractions: Vec<f64>,
    pub box_factor: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            label_column: "class".to_owned(),
            anomaly_fractions: vec![0.05, 0.10, 0.15],
            box_factor: 2.0,
            val_fraction: 0.3,
            seed: 0,
        }
    }
}

/// Every (file, class, anomaly fraction) combination of the `*.csv` files
/// in `dir`, files in name order.
pub fn corpus_tasks(dir: impl AsRef<Path>, spec: &CorpusSpec) -> Result<Vec<OneClassTask>> {
    let dir = dir.as_ref();
    let io_err = |source| Error::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .map_err(io_err)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::InvalidDataset(format!("no .csv files in {}", dir.display())));
    }
    let mut tasks = Vec::new();
    for (f, path) in files.iter().enumerate() {
        let source = load_class_csv(path, &spec.label_column)?;
        for class in source.distinct_classes() {
            for (a, &fraction) in spec.anomaly_fractions.iter().enumerate() {
                let seed = derive_seed(spec.seed, &[f as u64, class as u64, a as u64]);
                tasks.push(make_one_class_task(
                    &source,
                    class,
                    fraction,
                    spec.box_factor,
                    spec.val_fraction,
                    seed,
                )?);
            }
        }
    }
    Ok(tasks)
}
