//! Sample-average objectives.
//!
//! Every method is expressed as a list of terms `exp(-sign * f(x[..keep])) / div`,
//! each tagged with a context group. The divisor is constant within a group
//! and normalized per method, so the scalar objective is the sum over both
//! groups and conDRO reads the two group sums separately. Sums are divided
//! once per group, which keeps e.g. the zero predictor's loss exactly 1.

use super::{Method, ObjectiveSpec, ObjectiveValue};
use crate::error::{check_dim, Error, Result};
use crate::predictors::{MlpGrad, MlpPredictor};
use crate::synthdata::{Context, Dataset, FeatureMask};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Term<'a> {
    pub x: &'a [f64],
    pub keep: usize,
    pub sign: f64,
    pub div: f64,
    pub group: Context,
}

/// Length of the leading run of ones. Only canonical (prefix) masks occur.
pub(crate) fn mask_prefix(mask: &FeatureMask) -> Result<usize> {
    let bits = mask.bits();
    let keep = bits.iter().take_while(|&&b| b).count();
    if bits[keep..].iter().any(|&b| b) {
        return Err(Error::Unsupported(
            "feature masks must keep a leading block of coordinates".into(),
        ));
    }
    Ok(keep)
}

fn per_group_counts<'a>(examples: impl Iterator<Item = &'a Context>) -> [usize; 2] {
    let mut n = [0usize; 2];
    for c in examples {
        n[c.index()] += 1;
    }
    n
}

/// Builds the weighted terms of `spec.method` over `dataset`. `masks`
/// supplies predicted masks for examples without an annotation.
pub(crate) fn build_terms<'a>(
    spec: &ObjectiveSpec,
    dataset: &'a Dataset,
    masks: Option<&[FeatureMask]>,
) -> Result<Vec<Term<'a>>> {
    let d = dataset.d();
    let dim = 3 * d;
    let ex = &dataset.examples;
    if let Some(m) = masks {
        check_dim(ex.len(), m.len())?;
    }
    let plain = |keep: usize, div: f64| -> Vec<Term<'a>> {
        ex.iter()
            .map(|e| Term {
                x: &e.x,
                keep,
                sign: f64::from(e.y),
                div,
                group: e.context,
            })
            .collect()
    };
    let terms = match spec.method {
        Method::Erm | Method::Irm => {
            if ex.is_empty() {
                return Err(Error::invalid("dataset", "no examples"));
            }
            let keep = if spec.method == Method::Irm { d } else { dim };
            plain(keep, ex.len() as f64)
        }
        Method::Icc => {
            let ctx = spec.icc_context()?;
            let n = dataset.count(ctx);
            if n == 0 {
                return Err(Error::EmptyGroup(ctx));
            }
            plain(dim, n as f64).into_iter().filter(|t| t.group == ctx).collect()
        }
        Method::ConDro => {
            let n = per_group_counts(ex.iter().map(|e| &e.context));
            for c in Context::ALL {
                if n[c.index()] == 0 {
                    return Err(Error::EmptyGroup(c));
                }
            }
            ex.iter()
                .map(|e| Term {
                    x: &e.x,
                    keep: dim,
                    sign: f64::from(e.y),
                    div: n[e.context.index()] as f64,
                    group: e.context,
                })
                .collect()
        }
        Method::EnpFeature => {
            let n = per_group_counts(dataset.annotated().map(|e| &e.context));
            let present = n.iter().filter(|&&k| k > 0).count();
            if present == 0 {
                return Err(Error::NoAnnotations);
            }
            if present == 1 {
                log::warn!("annotated examples cover a single context; the feature predictor sees one class");
            }
            dataset
                .annotated()
                .map(|e| Term {
                    x: &e.x,
                    keep: dim,
                    sign: e.context.sign(),
                    div: (present * n[e.context.index()]) as f64,
                    group: e.context,
                })
                .collect()
        }
        Method::EnpTarget => {
            if ex.is_empty() {
                return Err(Error::invalid("dataset", "no examples"));
            }
            let div = ex.len() as f64;
            let mut out = Vec::with_capacity(ex.len());
            for (i, e) in ex.iter().enumerate() {
                let mask = match (&e.annotation, masks) {
                    (Some(a), _) => a,
                    (None, Some(m)) => &m[i],
                    (None, None) => return Err(Error::MissingMask { index: i }),
                };
                check_dim(dim, mask.len())?;
                out.push(Term {
                    x: &e.x,
                    keep: mask_prefix(mask)?,
                    sign: f64::from(e.y),
                    div,
                    group: e.context,
                });
            }
            out
        }
    };
    Ok(terms)
}

/// Unnormalized per-group sums of a loss and its gradient, with the divisor
/// shared by every term of the group.
pub(crate) struct GroupSums {
    pub loss: [f64; 2],
    pub grad: [Vec<f64>; 2],
    pub div: [f64; 2],
}

impl GroupSums {
    pub fn new(dim: usize) -> Self {
        GroupSums {
            loss: [0.0; 2],
            grad: [vec![0.0; dim], vec![0.0; dim]],
            div: [1.0; 2],
        }
    }
}

fn linear_group_sums(terms: &[Term<'_>], w: &[f64]) -> GroupSums {
    let mut sums = GroupSums::new(w.len());
    for t in terms {
        let k = t.keep;
        let z: f64 = w[..k].iter().zip(&t.x[..k]).map(|(a, b)| a * b).sum();
        let e = (-t.sign * z).exp();
        let g = t.group.index();
        sums.div[g] = t.div;
        sums.loss[g] += e;
        let coeff = -t.sign * e;
        for (gj, xj) in sums.grad[g][..k].iter_mut().zip(&t.x[..k]) {
            *gj += coeff * xj;
        }
    }
    sums
}

/// Normalizes group sums into the method's objective value and adds the
/// ridge term `penalty/2 * ‖w‖²` (to each group for conDRO).
pub(crate) fn finish(method: Method, sums: GroupSums, w: &[f64], penalty: f64) -> ObjectiveValue {
    let GroupSums { loss, grad, div } = sums;
    let ridge = 0.5 * penalty * w.iter().map(|v| v * v).sum::<f64>();
    if div[0] == div[1] && method != Method::ConDro {
        let grad = grad[0]
            .iter()
            .zip(&grad[1])
            .zip(w)
            .map(|((a, b), wj)| (a + b) / div[0] + penalty * wj)
            .collect();
        return ObjectiveValue::Scalar {
            loss: (loss[0] + loss[1]) / div[0] + ridge,
            grad,
        };
    }
    let mut loss = [loss[0] / div[0], loss[1] / div[1]];
    let mut grad = grad;
    for g in 0..2 {
        for v in grad[g].iter_mut() {
            *v /= div[g];
        }
    }
    if method == Method::ConDro {
        for g in 0..2 {
            loss[g] += ridge;
            for (gj, wj) in grad[g].iter_mut().zip(w) {
                *gj += penalty * wj;
            }
        }
        return ObjectiveValue::PerContext { loss, grad };
    }
    let [g0, g1] = grad;
    let grad = g0
        .iter()
        .zip(&g1)
        .zip(w)
        .map(|((a, b), wj)| a + b + penalty * wj)
        .collect();
    ObjectiveValue::Scalar {
        loss: loss[0] + loss[1] + ridge,
        grad,
    }
}

/// Empirical objective of a linear predictor `w` and its exact gradient.
///
/// ERM averages over all examples, IRM is ERM on the x1 block, ICC averages
/// within `spec.context`, conDRO returns the two per-context means, the
/// feature objective is the class-balanced context loss on annotated
/// examples, and the target objective scores `C∘x` with each example's
/// annotation or, failing that, the matching entry of `masks`.
pub fn empirical_objective(
    w: &[f64],
    spec: &ObjectiveSpec,
    dataset: &Dataset,
    masks: Option<&[FeatureMask]>,
    penalty: f64,
) -> Result<ObjectiveValue> {
    check_dim(3 * dataset.d(), w.len())?;
    let terms = build_terms(spec, dataset, masks)?;
    Ok(finish(spec.method, linear_group_sums(&terms, w), w, penalty))
}

pub(crate) fn masked_input(x: &[f64], keep: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend_from_slice(&x[..keep]);
    buf.resize(x.len(), 0.0);
}

/// Adds the exponential-loss contribution of `terms` to per-group sums.
pub(crate) fn mlp_accumulate(
    model: &MlpPredictor,
    terms: &[&Term<'_>],
    loss: &mut [f64; 2],
    grad: &mut [MlpGrad; 2],
) {
    let mut buf = Vec::with_capacity(model.input_dim());
    for t in terms {
        masked_input(t.x, t.keep, &mut buf);
        let z = model.score_unchecked(&buf);
        let e = (-t.sign * z).exp() / t.div;
        let g = t.group.index();
        loss[g] += e;
        model.accumulate_grad(&buf, -t.sign * e, &mut grad[g]);
    }
}

pub(crate) fn mlp_ridge(model: &MlpPredictor, penalty: f64, loss: &mut f64, grad: &mut MlpGrad) {
    if penalty == 0.0 {
        return;
    }
    let sq: f64 = model.w1.iter().chain(&model.w2).map(|v| v * v).sum();
    *loss += 0.5 * penalty * sq;
    for (g, w) in grad.w1.iter_mut().zip(&model.w1) {
        *g += penalty * w;
    }
    for (g, w) in grad.w2.iter_mut().zip(&model.w2) {
        *g += penalty * w;
    }
}

/// The same objectives for the ReLU network; the ridge term covers the
/// weight matrices but not the biases.
pub fn mlp_empirical_objective(
    model: &MlpPredictor,
    spec: &ObjectiveSpec,
    dataset: &Dataset,
    masks: Option<&[FeatureMask]>,
    penalty: f64,
) -> Result<ObjectiveValue<MlpGrad>> {
    check_dim(3 * dataset.d(), model.input_dim())?;
    let terms = build_terms(spec, dataset, masks)?;
    let refs: Vec<&Term<'_>> = terms.iter().collect();
    let mut loss = [0.0; 2];
    let mut grad = [MlpGrad::zeros_like(model), MlpGrad::zeros_like(model)];
    mlp_accumulate(model, &refs, &mut loss, &mut grad);
    if spec.method == Method::ConDro {
        for (l, g) in loss.iter_mut().zip(grad.iter_mut()) {
            mlp_ridge(model, penalty, l, g);
        }
        return Ok(ObjectiveValue::PerContext { loss, grad });
    }
    let [mut g0, g1] = grad;
    g0.add(&g1);
    let mut total = loss[0] + loss[1];
    mlp_ridge(model, penalty, &mut total, &mut g0);
    Ok(ObjectiveValue::Scalar {
        loss: total,
        grad: g0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthdata::{attach_annotations, canonical_mask, sample_dataset, ProblemParams};

    fn small() -> Dataset {
        let p = ProblemParams::isotropic(2, 1.0, 1.0, 0.1, 0.3, 0.7).unwrap();
        sample_dataset(&p, 40, 3).unwrap()
    }

    #[test]
    fn zero_predictor_erm() {
        let ds = small();
        let v = empirical_objective(&[0.0; 6], &ObjectiveSpec::empirical(Method::Erm), &ds, None, 0.0)
            .unwrap();
        let (loss, grad) = v.into_scalar().unwrap();
        assert_eq!(loss, 1.0);
        let n = ds.len() as f64;
        for (j, g) in grad.iter().enumerate() {
            let mean: f64 = ds.examples.iter().map(|e| f64::from(e.y) * e.x[j]).sum::<f64>() / n;
            assert!((g + mean).abs() < 1e-12);
        }
    }

    #[test]
    fn target_with_c2_masks_has_zero_tail_gradient() {
        let ds = small();
        let masks = vec![canonical_mask(Context::C2, 2); ds.len()];
        let w = [0.3, -0.2, 0.5, 0.1, 0.4, -0.6];
        let v = empirical_objective(&w, &ObjectiveSpec::empirical(Method::EnpTarget), &ds, Some(&masks), 0.0)
            .unwrap();
        let (_, grad) = v.into_scalar().unwrap();
        assert!(grad[2..].iter().all(|&g| g == 0.0));
        assert!(grad[..2].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn missing_masks_and_empty_groups() {
        let ds = small();
        let spec = ObjectiveSpec::empirical(Method::EnpTarget);
        assert!(matches!(
            empirical_objective(&[0.0; 6], &spec, &ds, None, 0.0),
            Err(Error::MissingMask { index: 0 })
        ));
        let p = ProblemParams::isotropic(2, 1.0, 1.0, 0.1, 0.3, 1.0).unwrap();
        let only_c1 = sample_dataset(&p, 10, 1).unwrap();
        let icc = ObjectiveSpec::empirical(Method::Icc).in_context(Context::C2);
        assert!(matches!(
            empirical_objective(&[0.0; 6], &icc, &only_c1, None, 0.0),
            Err(Error::EmptyGroup(Context::C2))
        ));
        assert!(matches!(
            empirical_objective(&[0.0; 6], &ObjectiveSpec::empirical(Method::ConDro), &only_c1, None, 0.0),
            Err(Error::EmptyGroup(Context::C2))
        ));
        let feature = ObjectiveSpec::empirical(Method::EnpFeature);
        assert!(matches!(
            empirical_objective(&[0.0; 6], &feature, &ds, None, 0.0),
            Err(Error::NoAnnotations)
        ));
        let annotated = attach_annotations(ds, 0.5).unwrap();
        let v = empirical_objective(&[0.0; 6], &feature, &annotated, None, 0.0).unwrap();
        assert!((v.loss() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn condro_groups_are_per_context_means() {
        let ds = small();
        let w = [0.1, 0.2, 0.3, -0.1, 0.0, 0.2];
        let v = empirical_objective(&w, &ObjectiveSpec::empirical(Method::ConDro), &ds, None, 0.0).unwrap();
        let ObjectiveValue::PerContext { loss, .. } = v else {
            panic!("conDRO reports per-context values")
        };
        for c in Context::ALL {
            let spec = ObjectiveSpec::empirical(Method::Icc).in_context(c);
            let icc = empirical_objective(&w, &spec, &ds, None, 0.0).unwrap().loss();
            assert!((icc - loss[c.index()]).abs() < 1e-12);
        }
    }

    #[test]
    fn irm_ignores_spurious_blocks() {
        let ds = small();
        let spec = ObjectiveSpec::empirical(Method::Irm);
        let a = empirical_objective(&[0.3, 0.2, 0.0, 0.0, 0.0, 0.0], &spec, &ds, None, 0.0).unwrap();
        let b = empirical_objective(&[0.3, 0.2, 5.0, -1.0, 2.0, 0.7], &spec, &ds, None, 0.0).unwrap();
        assert_eq!(a.loss(), b.loss());
    }
}
