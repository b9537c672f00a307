//! Parameter sweeps over generated instances.
//!
//! A plan varies one generator parameter over a grid. Every grid cell is
//! generated and solved for several replicate seeds; the cell reports the
//! mean and standard deviation of the best risk ratio, plus the split that
//! minimizes the replicate-averaged split curve. Seeds are derived from the
//! base seed, the cell index and the replicate index only, so cells can run
//! in any order.

use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datagen::{generate, GenConfig};
use crate::exec::Execution;
use crate::heuristic::{sweep_with, SweepOptions, SweepResult};
use crate::model::Instance;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Parameter {
    NFacilities,
    MinFacilitySize,
    MaxFacilitySize,
    SizeAlpha,
    AvgActivities,
    InfectAlpha,
    CostMu,
    CostSigma,
    IsolationCostFraction,
    IsolationPopulationFraction,
    BudgetFraction,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::NFacilities => "nFacilities",
            Parameter::MinFacilitySize => "minFacilitySize",
            Parameter::MaxFacilitySize => "maxFacilitySize",
            Parameter::SizeAlpha => "sizeAlpha",
            Parameter::AvgActivities => "avgActivities",
            Parameter::InfectAlpha => "infectAlpha",
            Parameter::CostMu => "costMu",
            Parameter::CostSigma => "costSigma",
            Parameter::IsolationCostFraction => "isolationCostFraction",
            Parameter::IsolationPopulationFraction => "isolationPopulationFraction",
            Parameter::BudgetFraction => "budgetFraction",
        }
    }

    /// Copy of `base` with this parameter set to `value`.
    pub fn apply(self, base: &GenConfig, value: f64) -> Result<GenConfig, HarnessError> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 && value <= u32::MAX as f64 {
                Ok(value as usize)
            } else {
                Err(HarnessError::InvalidPlan(format!("{} needs a whole number, got {value}", self.name())))
            }
        };
        let mut cfg = base.clone();
        match self {
            Parameter::NFacilities => cfg.n_facilities = count()?,
            Parameter::MinFacilitySize => cfg.min_facility_size = count()?,
            Parameter::MaxFacilitySize => cfg.max_facility_size = count()?,
            Parameter::SizeAlpha => cfg.size_alpha = value,
            Parameter::AvgActivities => cfg.avg_activities = value,
            Parameter::InfectAlpha => cfg.infect_alpha = value,
            Parameter::CostMu => cfg.cost_mu = value,
            Parameter::CostSigma => cfg.cost_sigma = value,
            Parameter::IsolationCostFraction => cfg.isolation_cost_fraction = value,
            Parameter::IsolationPopulationFraction => cfg.isolation_population_fraction = Some(value),
            Parameter::BudgetFraction => cfg.budget_fraction = value,
        }
        Ok(cfg)
    }
}

fn default_seeds() -> u32 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExperimentPlan {
    pub base: GenConfig,
    pub parameter: Parameter,
    pub values: Vec<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: u32,
    #[serde(default)]
    pub solver: SweepOptions,
    #[serde(default)]
    pub execution: Execution,
}

impl ExperimentPlan {
    pub fn new(base: GenConfig, parameter: Parameter, values: Vec<f64>) -> Self {
        ExperimentPlan {
            base,
            parameter,
            values,
            seeds: default_seeds(),
            solver: SweepOptions::default(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.values.is_empty() {
            return Err(HarnessError::InvalidPlan("value grid is empty".into()));
        }
        if self.seeds == 0 {
            return Err(HarnessError::InvalidPlan("at least one seed per cell is required".into()));
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator seed for one replicate of one cell.
pub fn derive_seed(base: u64, cell: usize, replicate: u32) -> u64 {
    splitmix64(splitmix64(base ^ splitmix64(cell as u64)) ^ replicate as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplicateRow {
    pub cell: usize,
    pub value: f64,
    pub replicate: u32,
    pub seed: u64,
    pub n_people: usize,
    pub n_facilities: usize,
    pub baseline_risk: f64,
    pub best_split: f64,
    pub best_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellResult {
    pub cell: usize,
    pub value: f64,
    pub mean_ratio: f64,
    pub std_ratio: f64,
    /// Split minimizing the replicate-averaged split curve.
    pub best_split: f64,
    pub replicates: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellFailure {
    pub cell: usize,
    pub value: f64,
    pub replicate: u32,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PlanResult {
    pub parameter: Parameter,
    pub cells: Vec<CellResult>,
    pub replicates: Vec<ReplicateRow>,
    pub failures: Vec<CellFailure>,
}

struct Job {
    cell: usize,
    value: f64,
    replicate: u32,
    seed: u64,
}

enum JobOutcome {
    Done(ReplicateRow, Vec<f64>),
    Failed(CellFailure),
}

pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanResult, HarnessError> {
    plan.validate()?;
    let mut jobs = Vec::with_capacity(plan.values.len() * plan.seeds as usize);
    for (cell, &value) in plan.values.iter().enumerate() {
        for replicate in 0..plan.seeds {
            jobs.push(Job { cell, value, replicate, seed: derive_seed(plan.base.seed, cell, replicate) });
        }
    }

    let outcomes = plan.execution.map(jobs, |job| {
        let mut cfg = plan.parameter.apply(&plan.base, job.value).expect("validated");
        cfg.seed = job.seed;
        match generate(&cfg) {
            Ok(instance) => {
                let res = sweep_with(&instance, &plan.solver);
                let row = replicate_row(&job, &instance, &res);
                JobOutcome::Done(row, res.per_split.iter().map(|o| o.ratio).collect())
            }
            Err(e) => JobOutcome::Failed(CellFailure {
                cell: job.cell,
                value: job.value,
                replicate: job.replicate,
                seed: job.seed,
                error: e.to_string(),
            }),
        }
    });

    let grid = plan.solver.grid();
    let mut cells = Vec::new();
    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    let per_cell = plan.seeds as usize;
    let mut outcomes = outcomes.into_iter();
    for (cell, &value) in plan.values.iter().enumerate() {
        let mut rows = Vec::with_capacity(per_cell);
        let mut curves = Vec::with_capacity(per_cell);
        let mut failed = false;
        for outcome in outcomes.by_ref().take(per_cell) {
            match outcome {
                JobOutcome::Done(row, curve) => {
                    rows.push(row);
                    curves.push(curve);
                }
                JobOutcome::Failed(f) => {
                    failures.push(f);
                    failed = true;
                }
            }
        }
        if failed {
            continue;
        }
        let ratios: Vec<f64> = rows.iter().map(|r| r.best_ratio).collect();
        let mean_curve: Vec<f64> =
            (0..grid.len()).map(|i| curves.iter().map(|c| c[i]).sum::<f64>() / curves.len() as f64).collect();
        let best = mean_curve
            .iter()
            .enumerate()
            .min_by(|(i, a), (j, b)| a.total_cmp(b).then(i.cmp(j)))
            .map(|(i, _)| i)
            .expect("grid is never empty");
        let (mean_ratio, std_ratio) = mean_std(&ratios);
        cells.push(CellResult { cell, value, mean_ratio, std_ratio, best_split: grid[best], replicates: plan.seeds });
        replicates.extend(rows);
    }
    Ok(PlanResult { parameter: plan.parameter, cells, replicates, failures })
}

fn replicate_row(job: &Job, instance: &Instance, res: &SweepResult) -> ReplicateRow {
    ReplicateRow {
        cell: job.cell,
        value: job.value,
        replicate: job.replicate,
        seed: job.seed,
        n_people: instance.n_people(),
        n_facilities: instance.n_facilities(),
        baseline_risk: res.baseline_risk,
        best_split: res.best().split_percent,
        best_ratio: res.best().ratio,
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Spearman rank correlation, averaging ranks over ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, my) = (mean_std(&rx).0, mean_std(&ry).0);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn csv_writer<W: io::Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out)
}

impl PlanResult {
    /// Columns: `parameter,value,meanRatio,stdRatio,bestSplit,replicates`.
    pub fn write_cells_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv_writer(out);
        w.write_record(["parameter", "value", "meanRatio", "stdRatio", "bestSplit", "replicates"])?;
        for c in &self.cells {
            w.write_record([
                self.parameter.name().to_string(),
                c.value.to_string(),
                c.mean_ratio.to_string(),
                c.std_ratio.to_string(),
                c.best_split.to_string(),
                c.replicates.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Columns: `cell,value,replicate,seed,nPeople,nFacilities,baselineRisk,bestSplit,bestRatio`.
    pub fn write_replicates_csv<W: io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv_writer(out);
        w.write_record([
            "cell",
            "value",
            "replicate",
            "seed",
            "nPeople",
            "nFacilities",
            "baselineRisk",
            "bestSplit",
            "bestRatio",
        ])?;
        for r in &self.replicates {
            w.write_record([
                r.cell.to_string(),
                r.value.to_string(),
                r.replicate.to_string(),
                r.seed.to_string(),
                r.n_people.to_string(),
                r.n_facilities.to_string(),
                r.baseline_risk.to_string(),
                r.best_split.to_string(),
                r.best_ratio.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `cells.csv`, `replicates.csv` and `results.json` into `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), HarnessError> {
        fs::create_dir_all(dir)?;
        self.write_cells_csv(fs::File::create(dir.join("cells.csv"))?)?;
        self.write_replicates_csv(fs::File::create(dir.join("replicates.csv"))?)?;
        let mut json = serde_json::to_vec_pretty(self)?;
        json.push(b'\n');
        fs::write(dir.join("results.json"), json)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub split: f64,
    pub ratio: f64,
}

/// Risk ratio at each split of the default 101-point grid.
pub fn split_curve(instance: &Instance) -> Vec<CurvePoint> {
    crate::heuristic::sweep(instance).curve().into_iter().map(|(split, ratio)| CurvePoint { split, ratio }).collect()
}

/// Columns: `split,ratio`.
pub fn write_curve_csv<W: io::Write>(curve: &[CurvePoint], out: W) -> csv::Result<()> {
    let mut w = csv_writer(out);
    w.write_record(["split", "ratio"])?;
    for p in curve {
        w.write_record([p.split.to_string(), p.ratio.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
