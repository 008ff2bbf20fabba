//! Projected gradient descent on the unit ball and the conDRO minimax loop.

use std::ops::Range;

use super::TrainConfig;
use crate::error::{Error, Result};

/// Zero everything outside `support`, then shrink onto the unit sphere if
/// the norm exceeds one. Points within rounding of the sphere are left
/// alone, which makes the projection idempotent in floating point.
pub fn project_unit_ball(w: &mut [f64], support: Option<&Range<usize>>) {
    if let Some(s) = support {
        for (j, v) in w.iter_mut().enumerate() {
            if !s.contains(&j) {
                *v = 0.0;
            }
        }
    }
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > 1.0 + 1e-12 {
        for v in w.iter_mut() {
            *v /= norm;
        }
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    /// Objective before the step.
    pub previous: f64,
    /// Objective after the step.
    pub loss: f64,
    pub norm: f64,
    pub step_size: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub w: Vec<f64>,
    pub loss: f64,
    pub steps: usize,
    pub converged: bool,
    pub history: Vec<StepRecord>,
}

const MIN_STEP: f64 = 1e-30;
const MAX_STEP: f64 = 1e12;

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct LineSearch<'a> {
    cfg: &'a TrainConfig,
    support: Option<&'a Range<usize>>,
    step: f64,
}

enum Outcome {
    Accepted { w: Vec<f64>, loss: f64, grad: Vec<f64> },
    Stalled,
}

impl LineSearch<'_> {
    /// Armijo backtracking along the projection arc `P(w - t g)`. Trial
    /// points whose loss or gradient is not finite are treated as failures.
    fn step<F>(&mut self, f: &mut F, w: &[f64], loss: f64, grad: &[f64]) -> Result<Outcome>
    where
        F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    {
        loop {
            let mut trial: Vec<f64> = w.iter().zip(grad).map(|(a, g)| a - self.step * g).collect();
            project_unit_ball(&mut trial, self.support);
            let predicted: f64 = grad.iter().zip(w.iter().zip(&trial)).map(|(g, (a, b))| g * (a - b)).sum();
            if predicted <= 0.0 || trial == w {
                return Ok(Outcome::Stalled);
            }
            let (ft, gt) = f(&trial)?;
            let finite = ft.is_finite() && gt.iter().all(|v| v.is_finite());
            if finite && ft <= loss - self.cfg.armijo * predicted {
                let accepted = self.step;
                self.step = (accepted / self.cfg.backtrack).min(MAX_STEP);
                return Ok(Outcome::Accepted {
                    w: trial,
                    loss: ft,
                    grad: gt,
                });
            }
            self.step *= self.cfg.backtrack;
            if self.step < MIN_STEP {
                return Ok(Outcome::Stalled);
            }
        }
    }
}

/// Minimizes `f` over the unit ball (restricted to `support` when given),
/// starting from the projection of `w0`. Accepted steps satisfy a sufficient
/// decrease condition, so the recorded objective never increases. Stops
/// when a step decreases the objective by less than `cfg.tolerance`.
pub fn minimize<F>(
    mut f: F,
    w0: Vec<f64>,
    support: Option<Range<usize>>,
    cfg: &TrainConfig,
) -> Result<PgdOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let mut w = w0;
    project_unit_ball(&mut w, support.as_ref());
    let (mut loss, mut grad) = f(&w)?;
    if !loss.is_finite() {
        return Err(Error::Divergence { step: 0, loss });
    }
    let mut search = LineSearch {
        cfg,
        support: support.as_ref(),
        step: cfg.step_size,
    };
    let mut history = Vec::new();
    let mut converged = false;
    for step in 1..=cfg.max_steps {
        match search.step(&mut f, &w, loss, &grad)? {
            Outcome::Stalled => {
                converged = true;
                break;
            }
            Outcome::Accepted {
                w: next,
                loss: next_loss,
                grad: next_grad,
            } => {
                debug_assert!(next_loss <= loss + 1e-12);
                history.push(StepRecord {
                    step,
                    previous: loss,
                    loss: next_loss,
                    norm: norm(&next),
                    step_size: search.step * cfg.backtrack,
                });
                let decrease = loss - next_loss;
                w = next;
                loss = next_loss;
                grad = next_grad;
                if decrease < cfg.tolerance {
                    converged = true;
                    break;
                }
            }
        }
    }
    Ok(PgdOutcome {
        w,
        loss,
        steps: history.len(),
        converged,
        history,
    })
}

/// Result of the minimax loop: the best iterate under `max_c L_c`, its
/// per-context losses and the final context weights.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MinimaxOutcome {
    pub w: Vec<f64>,
    pub losses: [f64; 2],
    pub weights: [f64; 2],
    pub steps: usize,
    pub history: Vec<StepRecord>,
}

/// `min_w max_{q in simplex} Σ q_c L_c(w)`: exponentiated-gradient ascent on
/// `q` alternated with one projected line-search step on `w` for the current
/// weighted loss. Returns the iterate with the smallest worst-context loss.
pub(crate) fn minimax<F>(
    mut f: F,
    w0: Vec<f64>,
    support: Option<Range<usize>>,
    cfg: &TrainConfig,
) -> Result<MinimaxOutcome>
where
    F: FnMut(&[f64]) -> Result<([f64; 2], [Vec<f64>; 2])>,
{
    let mut w = w0;
    project_unit_ball(&mut w, support.as_ref());
    let (mut losses, mut grads) = f(&w)?;
    if !(losses[0].is_finite() && losses[1].is_finite()) {
        return Err(Error::Divergence {
            step: 0,
            loss: losses[0].max(losses[1]),
        });
    }
    let mut log_q = [0.5f64.ln(); 2];
    let mut best = (losses[0].max(losses[1]), w.clone(), losses);
    let mut search = LineSearch {
        cfg,
        support: support.as_ref(),
        step: cfg.step_size,
    };
    let mut history = Vec::new();
    let mut q = [0.5; 2];
    for step in 1..=cfg.max_steps {
        for c in 0..2 {
            log_q[c] += cfg.dro_step * losses[c];
        }
        let top = log_q[0].max(log_q[1]);
        let lse = top + ((log_q[0] - top).exp() + (log_q[1] - top).exp()).ln();
        for c in 0..2 {
            log_q[c] -= lse;
        }
        let q_prev = q;
        q = [log_q[0].exp(), log_q[1].exp()];

        let weighted = q[0] * losses[0] + q[1] * losses[1];
        let grad: Vec<f64> = grads[0].iter().zip(&grads[1]).map(|(a, b)| q[0] * a + q[1] * b).collect();
        let mut cache = None;
        let mut objective = |v: &[f64]| -> Result<(f64, Vec<f64>)> {
            let (l, g) = f(v)?;
            let lw = q[0] * l[0] + q[1] * l[1];
            let gw = g[0].iter().zip(&g[1]).map(|(a, b)| q[0] * a + q[1] * b).collect();
            cache = Some((l, g));
            Ok((lw, gw))
        };
        let moved = match search.step(&mut objective, &w, weighted, &grad)? {
            Outcome::Stalled => 0.0,
            Outcome::Accepted { w: next, loss, .. } => {
                let (l, g) = cache.take().expect("accepted point was evaluated");
                history.push(StepRecord {
                    step,
                    previous: weighted,
                    loss,
                    norm: norm(&next),
                    step_size: search.step * cfg.backtrack,
                });
                let moved = weighted - loss;
                w = next;
                losses = l;
                grads = g;
                moved
            }
        };
        let worst = losses[0].max(losses[1]);
        if worst < best.0 {
            best = (worst, w.clone(), losses);
        }
        let q_shift = (q[0] - q_prev[0]).abs();
        if moved < cfg.tolerance && q_shift < cfg.tolerance && step > 1 {
            break;
        }
    }
    Ok(MinimaxOutcome {
        w: best.1,
        losses: best.2,
        weights: q,
        steps: history.len(),
        history,
    })
}
