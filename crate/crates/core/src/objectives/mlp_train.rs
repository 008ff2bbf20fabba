//! Mini-batch training of the ReLU network.
//!
//! Inputs are rescaled per coordinate by the inverse RMS over the training
//! split; a coordinate that is identically zero there (masked or outside the
//! IRM block) gets scale zero and is removed from the network's view.

use rand::seq::SliceRandom;

use super::empirical::{build_terms, masked_input, mlp_accumulate, mlp_ridge, Term};
use super::{Method, ObjectiveSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::predictors::{classify, MlpGrad, MlpPredictor};
use crate::rng;
use crate::synthdata::{Dataset, FeatureMask};

#[derive(Debug, Clone, PartialEq)]
pub struct MlpTrainOutcome {
    pub model: MlpPredictor,
    /// Epoch (1-based) whose weights were kept; 0 means the initialization.
    pub best_epoch: usize,
    /// Held-out balanced accuracy of the kept weights, if a holdout exists.
    pub holdout_accuracy: Option<f64>,
    pub epochs: usize,
}

fn input_scale(terms: &[&Term<'_>], dim: usize) -> Vec<f64> {
    let mut sq = vec![0.0; dim];
    for t in terms {
        for (s, x) in sq[..t.keep].iter_mut().zip(&t.x[..t.keep]) {
            *s += x * x;
        }
    }
    let n = terms.len().max(1) as f64;
    sq.iter()
        .map(|&s| {
            let rms = (s / n).sqrt();
            if rms > 0.0 {
                1.0 / rms
            } else {
                0.0
            }
        })
        .collect()
}

/// Mean over the groups present of the per-group accuracy of `sign(f)`
/// against each term's sign.
fn balanced_accuracy(model: &MlpPredictor, terms: &[&Term<'_>]) -> f64 {
    let mut hit = [0usize; 2];
    let mut tot = [0usize; 2];
    let mut buf = Vec::new();
    for t in terms {
        masked_input(t.x, t.keep, &mut buf);
        let g = t.group.index();
        tot[g] += 1;
        if f64::from(classify(model.score_unchecked(&buf))) == t.sign {
            hit[g] += 1;
        }
    }
    let present: Vec<f64> = (0..2)
        .filter(|&g| tot[g] > 0)
        .map(|g| hit[g] as f64 / tot[g] as f64)
        .collect();
    present.iter().sum::<f64>() / present.len().max(1) as f64
}

/// Trains an MLP on the empirical objective of `spec` with momentum SGD,
/// keeping the epoch with the best held-out balanced accuracy. conDRO runs
/// the exponentiated-gradient weight update on each mini-batch.
pub fn train_mlp(
    spec: &ObjectiveSpec,
    dataset: &Dataset,
    masks: Option<&[FeatureMask]>,
    cfg: &TrainConfig,
) -> Result<MlpTrainOutcome> {
    cfg.validate()?;
    let dim = 3 * dataset.d();
    let terms = build_terms(spec, dataset, masks)?;
    let mut order: Vec<usize> = (0..terms.len()).collect();
    let mut split_rng = rng::stream(cfg.seed, 0);
    order.shuffle(&mut split_rng);
    let n_hold = ((terms.len() as f64) * cfg.holdout).floor() as usize;
    let n_hold = if terms.len() - n_hold == 0 { 0 } else { n_hold };
    let (hold_idx, train_idx) = order.split_at(n_hold);
    let hold: Vec<&Term<'_>> = hold_idx.iter().map(|&i| &terms[i]).collect();
    let mut train: Vec<Term<'_>> = train_idx.iter().map(|&i| terms[i]).collect();

    // Renormalize so the training split carries the full objective weight.
    let (total, kept): (f64, f64) = (
        terms.iter().map(|t| 1.0 / t.div).sum(),
        train.iter().map(|t| 1.0 / t.div).sum(),
    );
    for t in train.iter_mut() {
        t.div *= kept / total;
    }

    let train_refs: Vec<&Term<'_>> = train.iter().collect();
    let mut model = MlpPredictor::init(dim, cfg.hidden, &mut rng::stream(cfg.seed, 1));
    model.set_input_scale(input_scale(&train_refs, dim));

    let mut best = (
        if hold.is_empty() { f64::NEG_INFINITY } else { balanced_accuracy(&model, &hold) },
        model.clone(),
        0usize,
    );
    let mut velocity = MlpGrad::zeros_like(&model);
    let mut grad = [MlpGrad::zeros_like(&model), MlpGrad::zeros_like(&model)];
    let mut step_grad = MlpGrad::zeros_like(&model);
    let mut log_q = [0.5f64.ln(); 2];
    let mut shuffle_rng = rng::stream(cfg.seed, 2);
    let mut idx: Vec<usize> = (0..train.len()).collect();
    let n_train = train.len() as f64;

    for epoch in 1..=cfg.epochs {
        idx.shuffle(&mut shuffle_rng);
        for chunk in idx.chunks(cfg.batch_size) {
            let batch: Vec<&Term<'_>> = chunk.iter().map(|&i| &train[i]).collect();
            for g in grad.iter_mut() {
                g.clear();
            }
            let mut loss = [0.0; 2];
            mlp_accumulate(&model, &batch, &mut loss, &mut grad);
            step_grad.clear();
            if spec.method == Method::ConDro {
                // Per-group batch means, then an ascent step on the weights.
                let mut count = [0usize; 2];
                for t in &batch {
                    count[t.group.index()] += 1;
                }
                let mut mean = [0.0; 2];
                let mut scale = [0.0; 2];
                for g in 0..2 {
                    if count[g] > 0 {
                        let w: f64 = batch.iter().filter(|t| t.group.index() == g).map(|t| 1.0 / t.div).sum();
                        scale[g] = 1.0 / w;
                        mean[g] = loss[g] * scale[g];
                        log_q[g] += cfg.dro_step * mean[g];
                    }
                }
                let top = log_q[0].max(log_q[1]);
                let lse = top + ((log_q[0] - top).exp() + (log_q[1] - top).exp()).ln();
                log_q = [log_q[0] - lse, log_q[1] - lse];
                for g in 0..2 {
                    step_grad.axpy(log_q[g].exp() * scale[g], &grad[g]);
                }
            } else {
                let k = n_train / batch.len() as f64;
                step_grad.axpy(k, &grad[0]);
                step_grad.axpy(k, &grad[1]);
            }
            let mut ridge = 0.0;
            mlp_ridge(&model, cfg.weight_penalty, &mut ridge, &mut step_grad);
            let batch_loss = loss[0] + loss[1];
            if !batch_loss.is_finite() || !step_grad.norm().is_finite() {
                return Err(Error::Divergence {
                    step: epoch,
                    loss: batch_loss,
                });
            }
            velocity.scale(cfg.momentum);
            velocity.axpy(-cfg.learning_rate, &step_grad);
            model.add_scaled(&velocity, 1.0);
        }
        if !model.is_finite() {
            return Err(Error::Divergence {
                step: epoch,
                loss: f64::NAN,
            });
        }
        if !hold.is_empty() {
            let acc = balanced_accuracy(&model, &hold);
            if acc >= best.0 {
                best = (acc, model.clone(), epoch);
            }
        }
    }
    if hold.is_empty() {
        return Ok(MlpTrainOutcome {
            model,
            best_epoch: cfg.epochs,
            holdout_accuracy: None,
            epochs: cfg.epochs,
        });
    }
    Ok(MlpTrainOutcome {
        model: best.1,
        best_epoch: best.2,
        holdout_accuracy: Some(best.0),
        epochs: cfg.epochs,
    })
}
