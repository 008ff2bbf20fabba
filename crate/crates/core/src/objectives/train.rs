use std::ops::Range;

use super::empirical::empirical_objective;
use super::mlp_train::train_mlp;
use super::optim::{minimax, minimize};
use super::population::population_objective;
use super::{DataMode, Method, ModelKind, ObjectiveSpec, ObjectiveValue, TrainConfig};
use crate::error::{Error, Result};
use crate::predictors::{EnpPipeline, IccModel, LinearPredictor, MaskPolicy, Model, Router, Scorer};
use crate::synthdata::{attach_annotations, canonical_mask, Context, Dataset, FeatureMask, ProblemParams};

/// Where the objective comes from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Data(&'a Dataset),
    Population(&'a ProblemParams),
}

impl Source<'_> {
    fn dim(&self) -> usize {
        match self {
            Source::Data(ds) => 3 * ds.d(),
            Source::Population(p) => p.dim(),
        }
    }

    fn d(&self) -> usize {
        self.dim() / 3
    }
}

/// A trained model plus the number of optimizer steps (or epochs) spent.
#[derive(Debug, Clone, PartialEq)]
pub struct Trained {
    pub model: Model,
    pub steps: usize,
}

fn check_source(spec: &ObjectiveSpec, source: &Source<'_>) -> Result<()> {
    match (spec.data_mode, source) {
        (DataMode::Empirical, Source::Data(_)) | (DataMode::Population, Source::Population(_)) => Ok(()),
        (DataMode::Empirical, Source::Population(_)) => Err(Error::invalid(
            "data_mode",
            "empirical objectives need a dataset",
        )),
        (DataMode::Population, Source::Data(_)) => Err(Error::invalid(
            "data_mode",
            "population objectives need problem parameters",
        )),
    }
}

fn objective(
    spec: &ObjectiveSpec,
    source: &Source<'_>,
    masks: Option<&[FeatureMask]>,
    penalty: f64,
    w: &[f64],
) -> Result<ObjectiveValue> {
    match source {
        Source::Data(ds) => empirical_objective(w, spec, ds, masks, penalty),
        Source::Population(p) => population_objective(w, spec, p, penalty),
    }
}

/// Fits one linear predictor for a scalar objective.
fn fit_linear(
    spec: &ObjectiveSpec,
    source: &Source<'_>,
    masks: Option<&[FeatureMask]>,
    support: Option<Range<usize>>,
    cfg: &TrainConfig,
) -> Result<(LinearPredictor, usize)> {
    let f = |w: &[f64]| {
        objective(spec, source, masks, cfg.weight_penalty, w)?
            .into_scalar()
            .ok_or_else(|| Error::Unsupported(format!("{} has no scalar objective", spec.method)))
    };
    let out = minimize(f, vec![0.0; source.dim()], support.clone(), cfg)?;
    let p = match support {
        Some(s) => LinearPredictor::with_support(out.w, s),
        None => LinearPredictor::new(out.w),
    };
    Ok((p, out.steps))
}

fn fit_condro(source: &Source<'_>, spec: &ObjectiveSpec, cfg: &TrainConfig) -> Result<(LinearPredictor, usize)> {
    let f = |w: &[f64]| match objective(spec, source, None, cfg.weight_penalty, w)? {
        ObjectiveValue::PerContext { loss, grad } => Ok((loss, grad)),
        ObjectiveValue::Scalar { .. } => unreachable!("conDRO objectives are per-context"),
    };
    let out = minimax(f, vec![0.0; source.dim()], None, cfg)?;
    Ok((LinearPredictor::new(out.w), out.steps))
}

/// The class-balanced context predictor on every example, for ICC's learned
/// router (ICC sees context labels for all training points).
fn fit_router(source: &Source<'_>, cfg: &TrainConfig) -> Result<(LinearPredictor, usize)> {
    match source {
        Source::Data(ds) => {
            let all = attach_annotations((*ds).clone(), 1.0)?;
            fit_linear(
                &ObjectiveSpec::empirical(Method::EnpFeature),
                &Source::Data(&all),
                None,
                None,
                cfg,
            )
        }
        Source::Population(_) => fit_linear(&ObjectiveSpec::population(Method::EnpFeature), source, None, None, cfg),
    }
}

/// Trains the model prescribed by `spec` on `source`.
///
/// ICC returns a pair of per-context predictors routed by the true context
/// unless `cfg.icc_router` asks for a learned router. The ENP feature and
/// target objectives return their single predictor; use
/// [`train_enp_pipeline`] for the two-stage model.
pub fn train(spec: &ObjectiveSpec, source: Source<'_>, cfg: &TrainConfig) -> Result<Trained> {
    cfg.validate()?;
    check_source(spec, &source)?;
    if cfg.model_kind == ModelKind::Mlp {
        let Source::Data(ds) = source else {
            return Err(Error::Unsupported(
                "population objectives are available for linear models only".into(),
            ));
        };
        return train_mlp_model(spec, ds, cfg);
    }
    let d = source.d();
    let (model, steps) = match spec.method {
        Method::Erm | Method::EnpFeature | Method::EnpTarget => {
            let (p, s) = fit_linear(spec, &source, None, None, cfg)?;
            (Model::Linear(p), s)
        }
        Method::Irm => {
            let (p, s) = fit_linear(spec, &source, None, Some(0..d), cfg)?;
            (Model::Linear(p), s)
        }
        Method::ConDro => {
            let (p, s) = fit_condro(&source, spec, cfg)?;
            (Model::Linear(p), s)
        }
        Method::Icc => {
            let (c1, s1) = fit_linear(&spec.in_context(Context::C1), &source, None, None, cfg)?;
            let (c2, s2) = fit_linear(&spec.in_context(Context::C2), &source, None, None, cfg)?;
            let (context_predictor, s3) = match cfg.icc_router {
                Router::OracleContext => (None, 0),
                Router::LearnedRouter => {
                    let (g, s) = fit_router(&source, cfg)?;
                    (Some(Scorer::Linear(g)), s)
                }
            };
            let model = Model::Icc(IccModel {
                c1: c1.into(),
                c2: c2.into(),
                router: cfg.icc_router,
                context_predictor,
            });
            (model, s1 + s2 + s3)
        }
    };
    Ok(Trained { model, steps })
}

fn train_mlp_model(spec: &ObjectiveSpec, ds: &Dataset, cfg: &TrainConfig) -> Result<Trained> {
    let model = match spec.method {
        Method::Icc => {
            let c1 = train_mlp(&spec.in_context(Context::C1), ds, None, cfg)?.model;
            let c2 = train_mlp(&spec.in_context(Context::C2), ds, None, cfg)?.model;
            let context_predictor = match cfg.icc_router {
                Router::OracleContext => None,
                Router::LearnedRouter => {
                    let linear = TrainConfig {
                        model_kind: ModelKind::Linear,
                        ..cfg.clone()
                    };
                    Some(Scorer::Linear(fit_router(&Source::Data(ds), &linear)?.0))
                }
            };
            Model::Icc(IccModel {
                c1: c1.into(),
                c2: c2.into(),
                router: cfg.icc_router,
                context_predictor,
            })
        }
        _ => Model::Mlp(train_mlp(spec, ds, None, cfg)?.model),
    };
    Ok(Trained {
        model,
        steps: cfg.epochs,
    })
}

/// Canonical masks of the contexts predicted by `feature` for every example.
pub fn predicted_masks(feature: &Scorer, dataset: &Dataset) -> Result<Vec<FeatureMask>> {
    let d = dataset.d();
    dataset
        .examples
        .iter()
        .map(|e| Ok(canonical_mask(Context::from_score(feature.score(&e.x)?), d)))
        .collect()
}

/// Two-stage ENP on a dataset. Stage one fits a linear context predictor on
/// the annotated examples with class-balanced weights; stage two fits the
/// target on `C∘x` using ground-truth masks where annotated and the
/// predicted masks elsewhere. The target is an MLP when `cfg.model_kind`
/// asks for one.
pub fn train_enp_pipeline(
    dataset: &Dataset,
    mask_policy: MaskPolicy,
    cfg: &TrainConfig,
) -> Result<(EnpPipeline, usize)> {
    cfg.validate()?;
    if dataset.annotated().next().is_none() {
        return Err(Error::NoAnnotations);
    }
    let source = Source::Data(dataset);
    let (feature, s1) = fit_linear(&ObjectiveSpec::empirical(Method::EnpFeature), &source, None, None, cfg)?;
    let feature = Scorer::Linear(feature);
    let masks = predicted_masks(&feature, dataset)?;
    let target_spec = ObjectiveSpec::empirical(Method::EnpTarget);
    let (target, s2) = match cfg.model_kind {
        ModelKind::Linear => {
            let (t, s) = fit_linear(&target_spec, &source, Some(&masks), None, cfg)?;
            (Scorer::Linear(t), s)
        }
        ModelKind::Mlp => (
            Scorer::Mlp(train_mlp(&target_spec, dataset, Some(&masks), cfg)?.model),
            cfg.epochs,
        ),
    };
    Ok((
        EnpPipeline {
            feature,
            target,
            mask_policy,
        },
        s1 + s2,
    ))
}

/// Two-stage ENP with population access: the feature predictor minimizes the
/// balanced population context loss and the target minimizes the
/// `p_c`-weighted masked population loss.
pub fn train_enp_population(
    params: &ProblemParams,
    mask_policy: MaskPolicy,
    cfg: &TrainConfig,
) -> Result<(EnpPipeline, usize)> {
    cfg.validate()?;
    let source = Source::Population(params);
    let (feature, s1) = fit_linear(&ObjectiveSpec::population(Method::EnpFeature), &source, None, None, cfg)?;
    let (target, s2) = fit_linear(&ObjectiveSpec::population(Method::EnpTarget), &source, None, None, cfg)?;
    Ok((
        EnpPipeline {
            feature: feature.into(),
            target: target.into(),
            mask_policy,
        },
        s1 + s2,
    ))
}
