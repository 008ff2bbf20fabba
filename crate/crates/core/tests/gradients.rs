//! Analytic gradients against central finite differences.

mod common;

const REL_TOL: f64 = 1e-5;

#[test]
fn linear_gradients_match_finite_differences() {
    let e = common::worst_linear_fd_error();
    assert!(e < REL_TOL, "worst relative error {e:e}");
}

#[test]
fn mlp_gradients_match_finite_differences() {
    let e = common::worst_mlp_fd_error();
    assert!(e < REL_TOL, "worst relative error {e:e}");
}

#[test]
fn a_wrong_gradient_is_detected() {
    use enp_lab::objectives::ObjectiveValue;
    let w = [0.3, -0.2];
    let e = common::linear_fd_error(
        |w| ObjectiveValue::Scalar {
            loss: w[0] * w[0] + w[1],
            grad: vec![w[0], 1.0],
        },
        &w,
    );
    assert!(e > 0.1);
}
