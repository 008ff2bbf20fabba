//! Losses, objectives, optimizers and the training procedures.

mod empirical;
mod loss;
mod mlp_train;
mod optim;
mod population;
mod train;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictors::{MaskPolicy, Router, DEFAULT_HIDDEN};
use crate::synthdata::Context;

pub use empirical::{empirical_objective, mlp_empirical_objective};
pub use loss::{context_loss, exp_loss, ObjectiveValue};
pub use mlp_train::{train_mlp, MlpTrainOutcome};
pub use optim::{minimize, project_unit_ball, PgdOutcome, StepRecord};
pub use population::population_objective;
pub use train::{
    predicted_masks, train, train_enp_pipeline, train_enp_population, Source, Trained,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Erm,
    Irm,
    Icc,
    #[serde(rename = "condro")]
    ConDro,
    EnpFeature,
    EnpTarget,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Erm => "erm",
            Method::Irm => "irm",
            Method::Icc => "icc",
            Method::ConDro => "condro",
            Method::EnpFeature => "enp_feature",
            Method::EnpTarget => "enp_target",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Some(match s.to_ascii_lowercase().as_str() {
            "erm" => Method::Erm,
            "irm" => Method::Irm,
            "icc" => Method::Icc,
            "condro" => Method::ConDro,
            "enp_feature" | "feature" => Method::EnpFeature,
            "enp_target" | "target" => Method::EnpTarget,
            _ => return None,
        })
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    #[default]
    Empirical,
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Linear,
    Mlp,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Linear => "linear",
            ModelKind::Mlp => "mlp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Some(ModelKind::Linear),
            "mlp" => Some(ModelKind::Mlp),
            _ => None,
        }
    }
}

/// What to minimize. `context` selects the group for a single ICC objective;
/// `train` ignores it and fits both groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjectiveSpec {
    pub method: Method,
    pub data_mode: DataMode,
    pub mask_policy: MaskPolicy,
    pub context: Option<Context>,
}

impl ObjectiveSpec {
    pub fn new(method: Method, data_mode: DataMode) -> Self {
        ObjectiveSpec {
            method,
            data_mode,
            mask_policy: MaskPolicy::default(),
            context: None,
        }
    }

    pub fn population(method: Method) -> Self {
        Self::new(method, DataMode::Population)
    }

    pub fn empirical(method: Method) -> Self {
        Self::new(method, DataMode::Empirical)
    }

    pub fn in_context(mut self, context: Context) -> Self {
        self.context = Some(context);
        self
    }

    pub(crate) fn icc_context(&self) -> Result<Context> {
        self.context
            .ok_or_else(|| Error::invalid("context", "an ICC objective needs a context"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub max_steps: usize,
    pub step_size: f64,
    pub backtrack: f64,
    pub armijo: f64,
    pub tolerance: f64,
    pub seed: u64,
    pub weight_penalty: f64,
    pub model_kind: ModelKind,
    /// Exponentiated-gradient step on the conDRO context weights.
    pub dro_step: f64,
    pub icc_router: Router,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub holdout: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_steps: 50_000,
            step_size: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            tolerance: 1e-10,
            seed: 0,
            weight_penalty: 0.0,
            model_kind: ModelKind::Linear,
            dro_step: 0.05,
            icc_router: Router::OracleContext,
            hidden: DEFAULT_HIDDEN,
            epochs: 200,
            batch_size: 64,
            learning_rate: 0.01,
            momentum: 0.9,
            holdout: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step_size", self.step_size),
            ("armijo", self.armijo),
            ("tolerance", self.tolerance),
            ("dro_step", self.dro_step),
            ("learning_rate", self.learning_rate),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("{v} must be positive")));
            }
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return Err(Error::invalid("backtrack", "must lie in (0, 1)"));
        }
        if !(self.weight_penalty >= 0.0) {
            return Err(Error::invalid("weight_penalty", "must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.holdout) {
            return Err(Error::invalid("holdout", "must lie in [0, 1)"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be at least 1"));
        }
        if self.hidden == 0 || self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::invalid("hidden", "hidden, batch_size and epochs must be positive"));
        }
        Ok(())
    }
}
