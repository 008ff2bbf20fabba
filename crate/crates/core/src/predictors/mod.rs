//! Linear predictors, the one-hidden-layer ReLU network, and the two
//! composite models: the ENP pipeline (context predictor -> mask -> target)
//! and ICC (one predictor per context plus a router).

mod io;
mod mlp;

use std::ops::Range;

pub use io::{format_model, load_model, parse_model, save_model};
pub use mlp::{MlpGrad, MlpPredictor, DEFAULT_HIDDEN};

use crate::error::{check_dim, Error, Result};
use crate::synthdata::{Context, FeatureMask};

/// Hard label of a score; ties go to `+1`.
pub fn classify(score: f64) -> i8 {
    if score >= 0.0 {
        1
    } else {
        -1
    }
}

pub fn apply_mask(mask: &FeatureMask, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(mask.len(), x.len())?;
    Ok(x.iter()
        .zip(mask.bits())
        .map(|(&v, &keep)| if keep { v } else { 0.0 })
        .collect())
}

/// Copy of `x` with every coordinate at or past `kept` set to zero.
pub(crate) fn zero_tail(x: &[f64], kept: usize) -> Vec<f64> {
    let mut out = x.to_vec();
    out[kept.min(x.len())..].fill(0.0);
    out
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x -> <w, x>`, optionally restricted to a coordinate range.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    pub w: Vec<f64>,
    pub support: Option<Range<usize>>,
}

impl LinearPredictor {
    pub fn new(w: Vec<f64>) -> Self {
        LinearPredictor { w, support: None }
    }

    pub fn zeros(dim: usize) -> Self {
        Self::new(vec![0.0; dim])
    }

    /// Restricts `w` to `support`, zeroing everything outside it.
    pub fn with_support(mut w: Vec<f64>, support: Range<usize>) -> Self {
        for (j, v) in w.iter_mut().enumerate() {
            if !support.contains(&j) {
                *v = 0.0;
            }
        }
        LinearPredictor {
            w,
            support: Some(support),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.w)
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.w.len(), x.len())?;
        Ok(dot(&self.w, x))
    }

    /// Score of `x` with coordinates at or past `kept` treated as zero.
    pub(crate) fn score_prefix(&self, x: &[f64], kept: usize) -> f64 {
        dot(&self.w[..kept], &x[..kept])
    }
}

/// A single real-valued score function.
#[derive(Debug, Clone, PartialEq)]
pub enum Scorer {
    Linear(LinearPredictor),
    Mlp(MlpPredictor),
}

impl Scorer {
    pub fn input_dim(&self) -> usize {
        match self {
            Scorer::Linear(p) => p.dim(),
            Scorer::Mlp(m) => m.input_dim(),
        }
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        match self {
            Scorer::Linear(p) => p.score(x),
            Scorer::Mlp(m) => m.score(x),
        }
    }

    /// Score of `C o x` for a canonical mask keeping the first `kept` coordinates.
    pub(crate) fn score_masked(&self, x: &[f64], kept: usize) -> Result<f64> {
        match self {
            Scorer::Linear(p) => {
                check_dim(p.dim(), x.len())?;
                Ok(p.score_prefix(x, kept))
            }
            Scorer::Mlp(m) => m.score(&zero_tail(x, kept)),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearPredictor> {
        match self {
            Scorer::Linear(p) => Some(p),
            Scorer::Mlp(_) => None,
        }
    }
}

impl From<LinearPredictor> for Scorer {
    fn from(p: LinearPredictor) -> Self {
        Scorer::Linear(p)
    }
}

impl From<MlpPredictor> for Scorer {
    fn from(m: MlpPredictor) -> Self {
        Scorer::Mlp(m)
    }
}

/// How the ENP target sees an input once the context has been inferred.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskPolicy {
    /// Multiply by the inferred context's canonical mask.
    #[default]
    ZeroMask,
    /// Score the raw input; masks are used only during training.
    NoMaskAtEval,
}

impl MaskPolicy {
    pub fn name(self) -> &'static str {
        match self {
            MaskPolicy::ZeroMask => "zero",
            MaskPolicy::NoMaskAtEval => "none",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "zero" | "zero_mask" => Some(MaskPolicy::ZeroMask),
            "none" | "no_mask" | "no_mask_at_eval" => Some(MaskPolicy::NoMaskAtEval),
            _ => None,
        }
    }
}

/// Where a composite model gets the context from at prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Routing {
    /// Use the model's own router (ENP feature predictor, ICC router setting).
    #[default]
    EndToEnd,
    /// Use the true context.
    Oracle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnpPipeline {
    pub feature: Scorer,
    pub target: Scorer,
    pub mask_policy: MaskPolicy,
}

impl EnpPipeline {
    pub fn d(&self) -> usize {
        self.target.input_dim() / 3
    }

    pub fn infer_context(&self, x: &[f64]) -> Result<Context> {
        Ok(Context::from_score(self.feature.score(x)?))
    }

    pub fn predict(&self, x: &[f64]) -> Result<(Context, i8)> {
        let context = self.infer_context(x)?;
        Ok((context, self.predict_in(x, context)?))
    }

    /// Label of `x` once its context is known (or assumed).
    pub fn predict_in(&self, x: &[f64], context: Context) -> Result<i8> {
        let score = match self.mask_policy {
            MaskPolicy::ZeroMask => self.target.score_masked(x, context.kept_len(self.d()))?,
            MaskPolicy::NoMaskAtEval => self.target.score(x)?,
        };
        Ok(classify(score))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Router {
    #[default]
    OracleContext,
    LearnedRouter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IccModel {
    pub c1: Scorer,
    pub c2: Scorer,
    pub router: Router,
    pub context_predictor: Option<Scorer>,
}

impl IccModel {
    pub fn for_context(&self, context: Context) -> &Scorer {
        match context {
            Context::C1 => &self.c1,
            Context::C2 => &self.c2,
        }
    }

    pub fn route(&self, x: &[f64], true_context: Context) -> Result<Context> {
        match (self.router, &self.context_predictor) {
            (Router::OracleContext, _) => Ok(true_context),
            (Router::LearnedRouter, Some(g)) => Ok(Context::from_score(g.score(x)?)),
            (Router::LearnedRouter, None) => Err(Error::Unsupported(
                "learned ICC router requested but no context predictor is attached".into(),
            )),
        }
    }
}

/// Any trained model the harness can evaluate.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Linear(LinearPredictor),
    Mlp(MlpPredictor),
    Enp(EnpPipeline),
    Icc(IccModel),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Linear(_) => "linear",
            Model::Mlp(_) => "mlp",
            Model::Enp(_) => "enp",
            Model::Icc(_) => "icc",
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Model::Linear(p) => p.dim(),
            Model::Mlp(m) => m.input_dim(),
            Model::Enp(p) => p.target.input_dim(),
            Model::Icc(m) => m.c1.input_dim(),
        }
    }

    /// Predicted label for `x`, drawn from `true_context`. Plain predictors
    /// ignore the context; composite models use it when routed by oracle.
    pub fn predict(&self, x: &[f64], true_context: Context, routing: Routing) -> Result<i8> {
        match self {
            Model::Linear(p) => Ok(classify(p.score(x)?)),
            Model::Mlp(m) => Ok(classify(m.score(x)?)),
            Model::Enp(p) => match routing {
                Routing::EndToEnd => Ok(p.predict(x)?.1),
                Routing::Oracle => p.predict_in(x, true_context),
            },
            Model::Icc(m) => {
                let ctx = match routing {
                    Routing::EndToEnd => m.route(x, true_context)?,
                    Routing::Oracle => true_context,
                };
                Ok(classify(m.for_context(ctx).score(x)?))
            }
        }
    }
}
