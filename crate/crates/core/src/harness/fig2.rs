//! Default configurations for the four simulation panels and their
//! plot-ready summaries.

use std::fmt;

use super::config::{ExperimentConfig, NTrain, RunMethod, Sweep, SweepAxis};
use super::csv::fmt_f64;
use super::run::ResultRow;
use crate::objectives::ModelKind;
use crate::synthdata::ProblemParams;

pub const GAMMAS: [f64; 4] = [0.05, 0.1, 0.2, 0.4];
pub const FRACTIONS: [f64; 5] = [0.01, 0.05, 0.1, 0.5, 1.0];
pub const PANEL_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Panel {
    /// Exact population objectives, linear models, sweep over gamma.
    A,
    /// Linear models on n = 100 samples.
    B,
    /// One-hidden-layer ReLU networks on n = 100 samples.
    C,
    /// ENP alone, sweeping the annotated fraction.
    D,
}

impl Panel {
    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Some(Panel::A),
            "b" => Some(Panel::B),
            "c" => Some(Panel::C),
            "d" => Some(Panel::D),
            _ => None,
        }
    }

    pub fn config(self) -> ExperimentConfig {
        let all = RunMethod::ALL.to_vec();
        let gamma_sweep = Some(Sweep {
            axis: SweepAxis::Gamma,
            values: GAMMAS.to_vec(),
        });
        match self {
            Panel::A => {
                // Population training runs at the larger scale so the unit-norm
                // constraint does not bind; accuracies are scale free.
                let mut c = ExperimentConfig::new(ProblemParams::p0_population(), all, NTrain::Population);
                c.sweep = gamma_sweep;
                c
            }
            Panel::B | Panel::C => {
                let mut c = ExperimentConfig::new(ProblemParams::p0(), all, NTrain::Samples(100));
                c.seeds = PANEL_SEEDS.to_vec();
                c.sweep = gamma_sweep;
                if self == Panel::C {
                    c.model_kind = ModelKind::Mlp;
                    c.train.model_kind = ModelKind::Mlp;
                    c.n_mc = 20_000;
                }
                c
            }
            Panel::D => {
                let mut c = ExperimentConfig::new(ProblemParams::p0(), vec![RunMethod::Enp], NTrain::Samples(100));
                c.seeds = PANEL_SEEDS.to_vec();
                c.sweep = Some(Sweep {
                    axis: SweepAxis::AnnotationFraction,
                    values: FRACTIONS.to_vec(),
                });
                c
            }
        }
    }
}

impl fmt::Display for Panel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Panel::A => "a",
            Panel::B => "b",
            Panel::C => "c",
            Panel::D => "d",
        };
        f.write_str(s)
    }
}

/// Mean and sample standard deviation per (sweep value, method).
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub x: f64,
    pub method: RunMethod,
    pub n_ok: usize,
    pub balanced_mean: f64,
    pub balanced_sd: f64,
    pub worst_mean: f64,
    pub worst_sd: f64,
    pub acc_c1_mean: f64,
    pub acc_c2_mean: f64,
}

pub const SUMMARY_HEADER: [&str; 9] = [
    "x",
    "method",
    "n_ok",
    "balanced_mean",
    "balanced_sd",
    "worst_mean",
    "worst_sd",
    "acc_c1_mean",
    "acc_c2_mean",
];

impl SummaryRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            fmt_f64(self.x),
            self.method.name().to_string(),
            self.n_ok.to_string(),
            fmt_f64(self.balanced_mean),
            fmt_f64(self.balanced_sd),
            fmt_f64(self.worst_mean),
            fmt_f64(self.worst_sd),
            fmt_f64(self.acc_c1_mean),
            fmt_f64(self.acc_c2_mean),
        ]
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// The sweep coordinate of a row.
pub fn x_value(row: &ResultRow, axis: Option<SweepAxis>) -> f64 {
    match axis {
        None | Some(SweepAxis::Gamma) => row.gamma,
        Some(SweepAxis::AnnotationFraction) => row.fraction,
        Some(SweepAxis::Pc) => row.p_c,
        Some(SweepAxis::N) => match row.n_train {
            NTrain::Samples(n) => n as f64,
            NTrain::Population => f64::INFINITY,
        },
    }
}

/// Aggregates successful rows over seeds, keeping the canonical method
/// and sweep order of `rows`.
pub fn summarize(rows: &[ResultRow], axis: Option<SweepAxis>) -> Vec<SummaryRow> {
    let mut keys: Vec<(RunMethod, f64)> = Vec::new();
    for r in rows {
        let k = (r.method, x_value(r, axis));
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(method, x)| {
            let group: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.method == method && x_value(r, axis) == x && r.is_ok())
                .collect();
            let col = |f: fn(&ResultRow) -> f64| group.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (bm, bs) = mean_sd(&col(|r| r.balanced));
            let (wm, ws) = mean_sd(&col(|r| r.worst));
            SummaryRow {
                x,
                method,
                n_ok: group.len(),
                balanced_mean: bm,
                balanced_sd: bs,
                worst_mean: wm,
                worst_sd: ws,
                acc_c1_mean: mean_sd(&col(|r| r.acc_c1)).0,
                acc_c2_mean: mean_sd(&col(|r| r.acc_c2)).0,
            }
        })
        .collect()
}
