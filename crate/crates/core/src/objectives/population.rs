//! Exact expected objectives under the generative model.
//!
//! Given `(context, y)` the input is Gaussian with mean `m` and diagonal
//! variance `v`, so for any sign `s` and kept prefix `k`
//!
//! `E exp(-s w·x) = exp(-s Σ_{j<k} w_j m_j + ½ Σ_{j<k} w_j² v_j)`.
//!
//! Each method is a weighted sum of such cells.

use super::empirical::{finish, GroupSums};
use super::{Method, ObjectiveSpec, ObjectiveValue};
use crate::error::{check_dim, Result};
use crate::synthdata::{Context, ProblemParams};

struct Cell {
    context: Context,
    y: i8,
    keep: usize,
    sign: f64,
    weight: f64,
}

fn cells(spec: &ObjectiveSpec, params: &ProblemParams) -> Result<Vec<Cell>> {
    let d = params.d();
    let dim = params.dim();
    let mut out = Vec::with_capacity(4);
    let icc = match spec.method {
        Method::Icc => Some(spec.icc_context()?),
        _ => None,
    };
    for c in Context::ALL {
        if icc.is_some_and(|k| k != c) {
            continue;
        }
        for y in [1i8, -1] {
            let half = 0.5;
            let (keep, sign, weight) = match spec.method {
                Method::Erm => (dim, f64::from(y), half * params.context_prob(c)),
                Method::Irm => (d, f64::from(y), half * params.context_prob(c)),
                Method::Icc | Method::ConDro => (dim, f64::from(y), half),
                Method::EnpFeature => (dim, c.sign(), half * half),
                Method::EnpTarget => (c.kept_len(d), f64::from(y), half * params.context_prob(c)),
            };
            out.push(Cell {
                context: c,
                y,
                keep,
                sign,
                weight,
            });
        }
    }
    Ok(out)
}

/// Exact population objective of the linear predictor `w` and its gradient.
/// The ENP target objective uses the true context's mask with weights
/// `p_c` and `1 - p_c`; the feature objective weighs both contexts equally.
pub fn population_objective(
    w: &[f64],
    spec: &ObjectiveSpec,
    params: &ProblemParams,
    penalty: f64,
) -> Result<ObjectiveValue> {
    let dim = params.dim();
    check_dim(dim, w.len())?;
    let mut sums = GroupSums::new(dim);
    for cell in cells(spec, params)? {
        let k = cell.keep;
        let m = params.conditional_mean(cell.context, cell.y);
        let v = params.conditional_variance(cell.context);
        let mut exponent = 0.0;
        for j in 0..k {
            exponent += -cell.sign * w[j] * m[j] + 0.5 * w[j] * w[j] * v[j];
        }
        let value = cell.weight * exponent.exp();
        let g = cell.context.index();
        sums.loss[g] += value;
        for j in 0..k {
            sums.grad[g][j] += (-cell.sign * m[j] + v[j] * w[j]) * value;
        }
    }
    Ok(finish(spec.method, sums, w, penalty))
}
