//! Monte-Carlo evaluation.
//!
//! Samples are drawn context-conditionally in shards of [`SHARD`] examples,
//! each shard from its own derived stream, and merged by exact counting, so
//! the result does not depend on the number of threads.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::objectives::{train, train_enp_pipeline, Method, ObjectiveSpec, Source, TrainConfig};
use crate::predictors::{MaskPolicy, Model, Routing, Scorer};
use crate::rng;
use crate::synthdata::{attach_annotations, sample_dataset, sample_label, Context, ProblemParams};

pub const SHARD: usize = 8192;

/// Number of fresh minority-context samples behind a test loss.
pub const GAP_TEST_SAMPLES: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyReport {
    pub acc_c1: f64,
    pub acc_c2: f64,
    pub balanced: f64,
    pub worst: f64,
    pub n_eval: usize,
    pub stderr_c1: f64,
    pub stderr_c2: f64,
}

impl AccuracyReport {
    pub fn new(acc_c1: f64, acc_c2: f64, n_eval: usize) -> Self {
        AccuracyReport {
            acc_c1,
            acc_c2,
            balanced: (acc_c1 + acc_c2) / 2.0,
            worst: acc_c1.min(acc_c2),
            n_eval,
            stderr_c1: stderr(acc_c1, n_eval),
            stderr_c2: stderr(acc_c2, n_eval),
        }
    }

    pub fn acc(&self, context: Context) -> f64 {
        match context {
            Context::C1 => self.acc_c1,
            Context::C2 => self.acc_c2,
        }
    }
}

fn stderr(acc: f64, n: usize) -> f64 {
    (acc * (1.0 - acc) / n as f64).sqrt()
}

fn context_seed(seed: u64, context: Context) -> u64 {
    rng::mix(seed, u64::from(context.code()))
}

/// Runs `f` over `n` fresh `(x, y)` draws from `context`, summing its
/// results shard by shard in parallel.
fn fold_samples<T, F>(params: &ProblemParams, context: Context, n: usize, seed: u64, f: F) -> Result<T>
where
    T: Send + std::iter::Sum<T>,
    F: Fn(&[f64], i8) -> Result<T> + Sync,
    Result<T>: Send,
{
    let shards = n.div_ceil(SHARD);
    (0..shards)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let len = SHARD.min(n - k * SHARD);
            (0..len)
                .map(|_| {
                    let y = sample_label(&mut r);
                    let x = params.sample_x(context, y, &mut r);
                    f(&x, y)
                })
                .sum::<Result<T>>()
        })
        .sum()
}

/// Fraction of `n_mc` fresh samples from `context` that `model` labels
/// correctly, and its normal-approximation standard error. Composite models
/// use their own router unless `routing` says otherwise.
pub fn mc_accuracy(
    model: &Model,
    params: &ProblemParams,
    context: Context,
    n_mc: usize,
    seed: u64,
    routing: Routing,
) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(Error::invalid("n_mc", "must be at least 1"));
    }
    let correct: usize = fold_samples(params, context, n_mc, seed, |x, y| {
        Ok(usize::from(model.predict(x, context, routing)? == y))
    })?;
    let acc = correct as f64 / n_mc as f64;
    Ok((acc, stderr(acc, n_mc)))
}

/// Per-context accuracy on `n_mc` samples per context, plus the balanced and
/// worst-context summaries.
pub fn report(
    model: &Model,
    params: &ProblemParams,
    n_mc: usize,
    seed: u64,
    routing: Routing,
) -> Result<AccuracyReport> {
    let (a1, _) = mc_accuracy(model, params, Context::C1, n_mc, context_seed(seed, Context::C1), routing)?;
    let (a2, _) = mc_accuracy(model, params, Context::C2, n_mc, context_seed(seed, Context::C2), routing)?;
    Ok(AccuracyReport::new(a1, a2, n_mc))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapReport {
    pub method: Method,
    pub context: Context,
    pub train_loss: f64,
    pub test_loss: f64,
    pub gap: f64,
    pub n: usize,
    pub p_c: f64,
    pub seed: u64,
}

/// Trains `method` (ICC or ENP) on a fresh dataset of size `n` and compares
/// the exponential loss of its minority-context predictor on the c2 training
/// points with its loss on fresh c2 samples. ICC is judged by its c2
/// classifier on the raw input; ENP by its target on the c2-masked input.
pub fn generalization_gap(
    method: Method,
    params: &ProblemParams,
    n: usize,
    fraction: f64,
    seed: u64,
    cfg: &TrainConfig,
) -> Result<GapReport> {
    if n < 10 {
        return Err(Error::invalid("n", "the gap needs at least 10 training points"));
    }
    let data_seed = rng::mix(seed, 1);
    let dataset = sample_dataset(params, n, data_seed)?;
    let minority: Vec<_> = dataset
        .examples
        .iter()
        .filter(|e| e.context == Context::C2)
        .collect();
    if minority.is_empty() {
        return Err(Error::EmptyGroup(Context::C2));
    }
    let cfg = TrainConfig {
        seed: rng::mix(seed, 2),
        ..cfg.clone()
    };
    let d = params.d();
    let (scorer, keep): (Scorer, usize) = match method {
        Method::Icc => {
            let trained = train(&ObjectiveSpec::empirical(Method::Icc), Source::Data(&dataset), &cfg)?;
            let Model::Icc(icc) = trained.model else {
                unreachable!("ICC training yields an ICC model")
            };
            (icc.c2, 3 * d)
        }
        Method::EnpTarget | Method::EnpFeature => {
            let annotated = attach_annotations(dataset.clone(), fraction)?;
            let (pipe, _) = train_enp_pipeline(&annotated, MaskPolicy::ZeroMask, &cfg)?;
            (pipe.target, Context::C2.kept_len(d))
        }
        other => {
            return Err(Error::Unsupported(format!(
                "generalization gap is defined for ICC and ENP, not {other}"
            )))
        }
    };
    let loss = |x: &[f64], y: i8| -> Result<f64> { Ok((-f64::from(y) * scorer.score_masked(x, keep)?).exp()) };
    let mut train_loss = 0.0;
    for e in &minority {
        train_loss += loss(&e.x, e.y)?;
    }
    train_loss /= minority.len() as f64;
    let test_sum: f64 = fold_samples(params, Context::C2, GAP_TEST_SAMPLES, rng::mix(seed, 3), loss)?;
    let test_loss = test_sum / GAP_TEST_SAMPLES as f64;
    Ok(GapReport {
        method,
        context: Context::C2,
        train_loss,
        test_loss,
        gap: test_loss - train_loss,
        n,
        p_c: params.p_c,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{bayes_predictor, invariant_predictor, per_context_accuracy};
    use crate::predictors::LinearPredictor;

    #[test]
    fn summaries_are_exact() {
        let r = AccuracyReport::new(0.9, 0.7, 100);
        assert_eq!(r.worst, 0.7);
        assert!((r.balanced - 0.8).abs() < 1e-15);
        assert!(r.worst <= r.balanced && r.balanced <= 0.9);
    }

    #[test]
    fn constant_classifier_is_a_coin_flip() {
        let p = ProblemParams::p0();
        let m = Model::Linear(LinearPredictor::zeros(p.dim()));
        let (a, se) = mc_accuracy(&m, &p, Context::C1, 20_000, 5, Routing::EndToEnd).unwrap();
        assert!((a - 0.5).abs() < 4.0 * se, "{a}");
    }

    #[test]
    fn reproducible_and_matches_closed_form() {
        let p = ProblemParams::p0();
        let w = bayes_predictor(Context::C1, &p);
        let m = Model::Linear(w.clone());
        let a = mc_accuracy(&m, &p, Context::C2, 50_000, 11, Routing::EndToEnd).unwrap();
        let b = mc_accuracy(&m, &p, Context::C2, 50_000, 11, Routing::EndToEnd).unwrap();
        assert_eq!(a, b);
        let exact = per_context_accuracy(&w, &p, Context::C2, None).unwrap();
        assert!((a.0 - exact).abs() < 4.0 * a.1, "{} vs {exact}", a.0);
    }

    #[test]
    fn symmetric_model_matches_across_contexts() {
        let p = ProblemParams::p0();
        let m = Model::Linear(invariant_predictor(&p));
        let r = report(&m, &p, 40_000, 2, Routing::EndToEnd).unwrap();
        assert!((r.acc_c1 - r.acc_c2).abs() < 3.0 * (r.stderr_c1 + r.stderr_c2));
    }

    #[test]
    fn gap_rejects_small_or_unsupported_requests() {
        let p = ProblemParams::p0();
        let cfg = TrainConfig::default();
        assert!(generalization_gap(Method::Icc, &p, 5, 1.0, 0, &cfg).is_err());
        assert!(generalization_gap(Method::Erm, &p, 50, 1.0, 0, &cfg).is_err());
        let all_c1 = p.with_p_c(1.0).unwrap();
        assert!(matches!(
            generalization_gap(Method::Icc, &all_c1, 50, 1.0, 0, &cfg),
            Err(Error::EmptyGroup(Context::C2))
        ));
    }
}
