//! Cell orchestration for `run`.
//!
//! A cell is one (method, sweep value, seed) triple. Each cell's randomness
//! comes from seeds derived with [`rng::mix_all`]:
//!
//! * data: `mix_all(base_seed, [0, sweep_index, seed])`, shared by every
//!   method so comparisons are paired on the same training sample;
//! * training: `mix_all(base_seed, [method_id, sweep_index, seed])`;
//! * evaluation: `mix_all(base_seed, [EVAL_WORD, sweep_index, seed])`.
//!
//! Adding or removing a method therefore never perturbs the other cells.

use std::time::Instant;

use rayon::prelude::*;

use super::config::{ExperimentConfig, NTrain, RunMethod};
use crate::error::Result;
use crate::eval::report;
use crate::objectives::{
    train, train_enp_pipeline, train_enp_population, ModelKind, ObjectiveSpec, Source, TrainConfig,
};
use crate::predictors::{Model, Routing};
use crate::rng::mix_all;
use crate::synthdata::{attach_annotations, sample_dataset, ProblemParams};

const EVAL_WORD: u64 = u64::MAX;

/// Status text for a cell that finished normally.
pub const STATUS_OK: &str = "ok";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: RunMethod,
    pub model_kind: ModelKind,
    pub gamma: f64,
    pub p_c: f64,
    pub eta: f64,
    pub sigma: f64,
    pub n_train: NTrain,
    pub fraction: f64,
    pub seed: u64,
    pub acc_c1: f64,
    pub acc_c2: f64,
    pub balanced: f64,
    pub worst: f64,
    pub train_steps: usize,
    pub wall_ms: u64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == STATUS_OK
    }
}

/// Rounds to 9 significant digits, the precision written to CSV, so rows
/// survive a write/parse round trip unchanged.
pub fn round9(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.8e}").parse().unwrap_or(x)
    } else {
        x
    }
}

/// Everything a single cell needs, detached from the config.
#[derive(Debug, Clone)]
pub struct Cell {
    pub method: RunMethod,
    pub sweep_index: usize,
    pub seed: u64,
    pub params: ProblemParams,
    pub n_train: NTrain,
    pub fraction: f64,
}

impl ExperimentConfig {
    /// All cells in canonical order: method, then sweep value, then seed.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        let mut out = Vec::new();
        let sweep = self.sweep_values();
        for &method in &self.methods {
            for (k, &v) in sweep.iter().enumerate() {
                let (params, n_train, fraction) = self.at(v)?;
                for &seed in &self.seeds {
                    out.push(Cell {
                        method,
                        sweep_index: k,
                        seed,
                        params: params.clone(),
                        n_train,
                        fraction,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn data_seed(&self, cell: &Cell) -> u64 {
        mix_all(self.base_seed, &[0, cell.sweep_index as u64, cell.seed])
    }

    pub fn train_seed(&self, cell: &Cell) -> u64 {
        mix_all(self.base_seed, &[cell.method.id(), cell.sweep_index as u64, cell.seed])
    }

    pub fn eval_seed(&self, cell: &Cell) -> u64 {
        mix_all(self.base_seed, &[EVAL_WORD, cell.sweep_index as u64, cell.seed])
    }
}

/// Trains the model for one cell and returns it with the step count.
pub fn train_cell(config: &ExperimentConfig, cell: &Cell) -> Result<(Model, usize)> {
    let cfg = TrainConfig {
        seed: config.train_seed(cell),
        model_kind: config.model_kind,
        ..config.train.clone()
    };
    match cell.n_train {
        NTrain::Population => {
            if cell.method == RunMethod::Enp {
                let (pipe, steps) = train_enp_population(&cell.params, config.mask_policy, &cfg)?;
                return Ok((Model::Enp(pipe), steps));
            }
            let spec = ObjectiveSpec::population(cell.method.objective());
            let t = train(&spec, Source::Population(&cell.params), &cfg)?;
            Ok((t.model, t.steps))
        }
        NTrain::Samples(n) => {
            let ds = sample_dataset(&cell.params, n, config.data_seed(cell))?;
            if cell.method == RunMethod::Enp {
                let ds = attach_annotations(ds, cell.fraction)?;
                let (pipe, steps) = train_enp_pipeline(&ds, config.mask_policy, &cfg)?;
                return Ok((Model::Enp(pipe), steps));
            }
            let spec = ObjectiveSpec::empirical(cell.method.objective());
            let t = train(&spec, Source::Data(&ds), &cfg)?;
            Ok((t.model, t.steps))
        }
    }
}

/// Trains and evaluates one cell. Failures land in `status`; accuracies are
/// then NaN.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> ResultRow {
    let start = Instant::now();
    let outcome = train_cell(config, cell).and_then(|(model, steps)| {
        let r = report(&model, &cell.params, config.n_mc, config.eval_seed(cell), Routing::EndToEnd)?;
        Ok((r, steps))
    });
    let wall_ms = start.elapsed().as_millis() as u64;
    let p = &cell.params;
    let mut row = ResultRow {
        method: cell.method,
        model_kind: config.model_kind,
        gamma: round9(p.gamma),
        p_c: round9(p.p_c),
        eta: round9(p.eta),
        sigma: round9(p.sigma),
        n_train: cell.n_train,
        fraction: round9(cell.fraction),
        seed: cell.seed,
        acc_c1: f64::NAN,
        acc_c2: f64::NAN,
        balanced: f64::NAN,
        worst: f64::NAN,
        train_steps: 0,
        wall_ms,
        status: STATUS_OK.to_string(),
    };
    match outcome {
        Ok((r, steps)) => {
            row.acc_c1 = round9(r.acc_c1);
            row.acc_c2 = round9(r.acc_c2);
            row.balanced = round9(r.balanced);
            row.worst = round9(r.worst);
            row.train_steps = steps;
        }
        Err(e) => {
            log::warn!("{} seed {} failed: {e}", cell.method, cell.seed);
            row.status = format!("error: {e}");
        }
    }
    row
}

/// Runs every cell, `jobs` at a time (0 means one per core), and returns
/// rows in canonical order.
pub fn run(config: &ExperimentConfig, jobs: usize) -> Result<Vec<ResultRow>> {
    config.validate()?;
    let cells = config.cells()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| crate::Error::Config(e.to_string()))?;
    Ok(pool.install(|| cells.par_iter().map(|c| run_cell(config, c)).collect()))
}
