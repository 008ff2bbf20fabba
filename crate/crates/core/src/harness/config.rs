//! Experiment configuration files.
//!
//! ```toml
//! [params]            # defaults: the unit-scale P0 set
//! d = 20
//! mu_norm = 1.0       # or `mu = [...]` with d entries
//! sigma = 1.0
//! gamma = 0.1
//! eta = 0.3
//! p_c = 0.9
//! scale = 1.0         # multiplies mu, sigma and eta
//!
//! [experiment]
//! methods = ["erm", "irm", "icc", "condro", "enp"]
//! model_kind = "linear"      # or "mlp"
//! n_train = 100              # or "population"
//! n_mc = 100000
//! seeds = [0, 1, 2, 3, 4]
//! base_seed = 0
//! fraction = 0.2             # ENP annotation fraction
//! mask_policy = "zero"       # or "none"
//! output = "results.csv"
//!
//! [sweep]                    # optional
//! axis = "gamma"             # gamma | fraction | p_c | n
//! values = [0.05, 0.1, 0.2, 0.4]
//!
//! [train]                    # optional, any TrainConfig field
//! max_steps = 50000
//! ```

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::objectives::{Method, ModelKind, TrainConfig};
use crate::predictors::MaskPolicy;
use crate::synthdata::ProblemParams;

/// Methods the harness can run. `Enp` is the full two-stage pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RunMethod {
    Erm,
    Irm,
    Icc,
    ConDro,
    Enp,
}

impl RunMethod {
    pub const ALL: [RunMethod; 5] = [
        RunMethod::Erm,
        RunMethod::Irm,
        RunMethod::Icc,
        RunMethod::ConDro,
        RunMethod::Enp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RunMethod::Erm => "erm",
            RunMethod::Irm => "irm",
            RunMethod::Icc => "icc",
            RunMethod::ConDro => "condro",
            RunMethod::Enp => "enp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        RunMethod::ALL.into_iter().find(|m| m.name() == s.to_ascii_lowercase())
    }

    /// Stable identifier mixed into cell seeds.
    pub fn id(self) -> u64 {
        match self {
            RunMethod::Erm => 1,
            RunMethod::Irm => 2,
            RunMethod::Icc => 3,
            RunMethod::ConDro => 4,
            RunMethod::Enp => 5,
        }
    }

    /// The objective used for single-model methods.
    pub fn objective(self) -> Method {
        match self {
            RunMethod::Erm => Method::Erm,
            RunMethod::Irm => Method::Irm,
            RunMethod::Icc => Method::Icc,
            RunMethod::ConDro => Method::ConDro,
            RunMethod::Enp => Method::EnpTarget,
        }
    }
}

impl fmt::Display for RunMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Gamma,
    AnnotationFraction,
    Pc,
    N,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Gamma => "gamma",
            SweepAxis::AnnotationFraction => "fraction",
            SweepAxis::Pc => "p_c",
            SweepAxis::N => "n",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gamma" => Some(SweepAxis::Gamma),
            "fraction" | "annotation_fraction" => Some(SweepAxis::AnnotationFraction),
            "p_c" | "pc" => Some(SweepAxis::Pc),
            "n" | "n_train" => Some(SweepAxis::N),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

/// Training set size, or exact population objectives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NTrain {
    Samples(usize),
    Population,
}

impl fmt::Display for NTrain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NTrain::Samples(n) => write!(f, "{n}"),
            NTrain::Population => f.write_str("population"),
        }
    }
}

impl NTrain {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "population" {
            Some(NTrain::Population)
        } else {
            s.parse().ok().map(NTrain::Samples)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub params: ProblemParams,
    pub methods: Vec<RunMethod>,
    pub model_kind: ModelKind,
    pub n_train: NTrain,
    pub n_mc: usize,
    pub seeds: Vec<u64>,
    pub base_seed: u64,
    pub fraction: f64,
    pub mask_policy: MaskPolicy,
    pub sweep: Option<Sweep>,
    pub train: TrainConfig,
    pub output_path: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Single-cell configuration around `params`, handy for tests and as a
    /// starting point for the figure presets.
    pub fn new(params: ProblemParams, methods: Vec<RunMethod>, n_train: NTrain) -> Self {
        ExperimentConfig {
            params,
            methods,
            model_kind: ModelKind::Linear,
            n_train,
            n_mc: 100_000,
            seeds: vec![0],
            base_seed: 0,
            fraction: 0.2,
            mask_policy: MaskPolicy::ZeroMask,
            sweep: None,
            train: TrainConfig::default(),
            output_path: None,
        }
    }

    pub fn sweep_values(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            None => vec![None],
            Some(s) => s.values.iter().copied().map(Some).collect(),
        }
    }

    /// Parameters, training size and annotation fraction at one sweep value.
    pub fn at(&self, value: Option<f64>) -> Result<(ProblemParams, NTrain, f64)> {
        let mut params = self.params.clone();
        let mut n = self.n_train;
        let mut fraction = self.fraction;
        if let (Some(s), Some(v)) = (&self.sweep, value) {
            match s.axis {
                SweepAxis::Gamma => params = params.with_gamma(v)?,
                SweepAxis::Pc => params = params.with_p_c(v)?,
                SweepAxis::AnnotationFraction => fraction = v,
                SweepAxis::N => n = NTrain::Samples(v as usize),
            }
        }
        Ok((params, n, fraction))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.train.validate()?;
        if self.methods.is_empty() {
            return Err(Error::invalid("methods", "at least one method is required"));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        if self.n_mc == 0 {
            return Err(Error::invalid("n_mc", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::invalid("fraction", "must lie in [0, 1]"));
        }
        if self.n_train == NTrain::Population && self.model_kind == ModelKind::Mlp {
            return Err(Error::invalid("n_train", "population mode supports linear models only"));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(Error::invalid("sweep", "needs at least one value"));
            }
            for &v in &s.values {
                let ok = match s.axis {
                    SweepAxis::Gamma => v > 0.0 && v.is_finite(),
                    SweepAxis::Pc | SweepAxis::AnnotationFraction => (0.0..=1.0).contains(&v),
                    SweepAxis::N => v >= 1.0 && v.fract() == 0.0 && self.n_train != NTrain::Population,
                };
                if !ok {
                    return Err(Error::invalid(
                        "sweep",
                        format!("{v} is not a valid {} value", s.axis.name()),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        raw.into_config()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    params: RawParams,
    #[serde(default)]
    experiment: RawExperiment,
    sweep: Option<RawSweep>,
    #[serde(default)]
    train: TrainConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawParams {
    d: usize,
    mu_norm: f64,
    mu: Option<Vec<f64>>,
    sigma: f64,
    gamma: f64,
    eta: f64,
    p_c: f64,
    scale: f64,
}

impl Default for RawParams {
    fn default() -> Self {
        RawParams {
            d: 20,
            mu_norm: 1.0,
            mu: None,
            sigma: 1.0,
            gamma: 0.1,
            eta: 0.3,
            p_c: 0.9,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RawN {
    Count(usize),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct RawExperiment {
    methods: Vec<String>,
    model_kind: String,
    n_train: RawN,
    n_mc: usize,
    seeds: Vec<u64>,
    base_seed: u64,
    fraction: f64,
    mask_policy: String,
    output: Option<PathBuf>,
}

impl Default for RawExperiment {
    fn default() -> Self {
        RawExperiment {
            methods: RunMethod::ALL.iter().map(|m| m.name().to_string()).collect(),
            model_kind: "linear".into(),
            n_train: RawN::Count(100),
            n_mc: 100_000,
            seeds: vec![0],
            base_seed: 0,
            fraction: 0.2,
            mask_policy: "zero".into(),
            output: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: String,
    values: Vec<f64>,
}

impl RawConfig {
    fn into_config(self) -> Result<ExperimentConfig> {
        let p = self.params;
        let base = match p.mu {
            Some(mu) => {
                if mu.len() != p.d {
                    return Err(Error::invalid("mu", format!("has {} entries, expected d = {}", mu.len(), p.d)));
                }
                ProblemParams::new(mu, p.sigma, p.gamma, p.eta, p.p_c)?
            }
            None => ProblemParams::isotropic(p.d, p.mu_norm, p.sigma, p.gamma, p.eta, p.p_c)?,
        };
        let params = base.scaled(p.scale)?;
        let e = self.experiment;
        let methods = e
            .methods
            .iter()
            .map(|m| RunMethod::from_name(m).ok_or_else(|| Error::Config(format!("unknown method `{m}`"))))
            .collect::<Result<Vec<_>>>()?;
        let model_kind = ModelKind::from_name(&e.model_kind)
            .ok_or_else(|| Error::Config(format!("unknown model_kind `{}`", e.model_kind)))?;
        let n_train = match e.n_train {
            RawN::Count(n) => NTrain::Samples(n),
            RawN::Word(w) => NTrain::parse(&w).ok_or_else(|| Error::Config(format!("bad n_train `{w}`")))?,
        };
        let mask_policy = MaskPolicy::from_name(&e.mask_policy)
            .ok_or_else(|| Error::Config(format!("unknown mask_policy `{}`", e.mask_policy)))?;
        let sweep = match self.sweep {
            None => None,
            Some(s) => Some(Sweep {
                axis: SweepAxis::from_name(&s.axis)
                    .ok_or_else(|| Error::Config(format!("unknown sweep axis `{}`", s.axis)))?,
                values: s.values,
            }),
        };
        let mut train = self.train;
        train.model_kind = model_kind;
        let cfg = ExperimentConfig {
            params,
            methods,
            model_kind,
            n_train,
            n_mc: e.n_mc,
            seeds: e.seeds,
            base_seed: e.base_seed,
            fraction: e.fraction,
            mask_policy,
            sweep,
            train,
            output_path: e.output,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}
