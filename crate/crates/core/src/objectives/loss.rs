use crate::synthdata::Context;

/// `exp(-z y)`.
pub fn exp_loss(z: f64, y: i8) -> f64 {
    (-z * f64::from(y)).exp()
}

/// Exponential loss for the context predictor, with c1 as the positive class.
pub fn context_loss(z: f64, context: Context) -> f64 {
    (-z * context.sign()).exp()
}

/// An objective value and its exact gradient. conDRO reports one pair per
/// context and leaves the maximization to the optimizer.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectiveValue<G = Vec<f64>> {
    Scalar { loss: f64, grad: G },
    PerContext { loss: [f64; 2], grad: [G; 2] },
}

impl<G> ObjectiveValue<G> {
    /// The scalar loss, or the worst context for per-context values.
    pub fn loss(&self) -> f64 {
        match self {
            ObjectiveValue::Scalar { loss, .. } => *loss,
            ObjectiveValue::PerContext { loss, .. } => loss[0].max(loss[1]),
        }
    }

    pub fn into_scalar(self) -> Option<(f64, G)> {
        match self {
            ObjectiveValue::Scalar { loss, grad } => Some((loss, grad)),
            ObjectiveValue::PerContext { .. } => None,
        }
    }
}

impl ObjectiveValue {
    /// `Σ q_c L_c` and its gradient; a scalar value is returned unchanged.
    pub fn weighted(&self, q: [f64; 2]) -> (f64, Vec<f64>) {
        match self {
            ObjectiveValue::Scalar { loss, grad } => (*loss, grad.clone()),
            ObjectiveValue::PerContext { loss, grad } => {
                let g = grad[0]
                    .iter()
                    .zip(&grad[1])
                    .map(|(a, b)| q[0] * a + q[1] * b)
                    .collect();
                (q[0] * loss[0] + q[1] * loss[1], g)
            }
        }
    }
}
