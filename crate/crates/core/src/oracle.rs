//! Closed-form ground truth for the two-context Gaussian model.
//!
//! Every linear score `w·x` is Gaussian given `(context, y)`, so accuracies
//! reduce to `erfc` evaluations. The generalization-bound constants follow the
//! high-probability input-norm ball argument; the loss Lipschitz constant on
//! that ball is `exp(B)` and is carried in log space because `B` is large for
//! realistic parameters.

use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;


use crate::error::{check_dim, Error, Result};
use crate::predictors::LinearPredictor;
use crate::synthdata::{Context, FeatureMask, ProblemParams};

// W. J. Cody, "Rational Chebyshev approximations for the error function",
// Math. Comp. 23 (1969). Three intervals: |x| <= 0.46875, <= 4, and beyond.
const A: [f64; 5] = [
    3.1611237438705656,
    113.864154151050156,
    377.485237685302021,
    3209.37758913846947,
    0.185777706184603153,
];
const B: [f64; 4] = [
    23.6012909523441209,
    244.024637934444173,
    1282.61652607737228,
    2844.23683343917062,
];
const C: [f64; 9] = [
    0.564188496988670089,
    8.88314979438837594,
    66.1191906371416295,
    298.635138197400131,
    881.95222124176909,
    1712.04761263407058,
    2051.07837782607147,
    1230.33935479799725,
    2.15311535474403846e-8,
];
const D: [f64; 8] = [
    15.7449261107098347,
    117.693950891312499,
    537.181101862009858,
    1621.38957456669019,
    3290.79923573345963,
    4362.61909014324716,
    3439.36767414372164,
    1230.33935480374942,
];
const P: [f64; 6] = [
    0.305326634961232344,
    0.360344899949804439,
    0.125781726111229246,
    0.0160837851487422766,
    6.58749161529837803e-4,
    0.0163153871373020978,
];
const Q: [f64; 5] = [
    2.56852019228982242,
    1.87295284992346047,
    0.527905102951428412,
    0.0605183413124413191,
    0.00233520497626869185,
];
const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const SMALL: f64 = 0.46875;
const BIG: f64 = 26.543;

/// `exp(-y^2)` with the square split at a multiple of 1/16 so the rounding
/// error of `y*y` is not amplified by the exponential.
fn exp_neg_square(y: f64) -> f64 {
    let lead = (y * 16.0).trunc() / 16.0;
    (-lead * lead).exp() * (-(y - lead) * (y + lead)).exp()
}

fn erf_small(x: f64) -> f64 {
    let z = x * x;
    x * ((((A[4] * z + A[0]) * z + A[1]) * z + A[2]) * z + A[3])
        / ((((z + B[0]) * z + B[1]) * z + B[2]) * z + B[3])
}

/// `erfc(y)` for `y > 0.46875`.
fn erfc_tail(y: f64) -> f64 {
    if y >= BIG {
        return 0.0;
    }
    let ratio = if y <= 4.0 {
        let num = C[..8].iter().fold(C[8], |acc, &c| acc * y + c);
        let den = D.iter().fold(1.0, |acc, &d| acc * y + d);
        num / den
    } else {
        let z = 1.0 / (y * y);
        let num = P[..5].iter().fold(P[5], |acc, &p| acc * z + p);
        let den = Q.iter().fold(1.0, |acc, &q| acc * z + q);
        (FRAC_1_SQRT_PI - z * num / den) / y
    };
    ratio * exp_neg_square(y)
}

/// Complementary error function, `2/sqrt(pi) * int_x^inf exp(-t^2) dt`.
pub fn erfc(x: f64) -> f64 {
    let y = x.abs();
    if y <= SMALL {
        return 1.0 - erf_small(x);
    }
    let tail = erfc_tail(y);
    if x < 0.0 {
        2.0 - tail
    } else {
        tail
    }
}

pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= SMALL {
        return erf_small(x);
    }
    let e = 1.0 - erfc_tail(y);
    if x < 0.0 {
        -e
    } else {
        e
    }
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Probability that a classifier with Gaussian score `N(mean, var)` is correct
/// for label `y`, honoring the `sign(0) = +1` tie-break when `var = 0`.
fn label_accuracy(mean: f64, var: f64, y: i8) -> f64 {
    if var > 0.0 {
        normal_cdf(f64::from(y) * mean / var.sqrt())
    } else if y > 0 {
        f64::from(u8::from(mean >= 0.0))
    } else {
        f64::from(u8::from(mean < 0.0))
    }
}

/// Exact accuracy of `w` on samples from `context`, optionally scoring the
/// masked input `C∘x` (equivalently, the weights `w∘C`).
pub fn per_context_accuracy(
    w: &LinearPredictor,
    params: &ProblemParams,
    context: Context,
    mask: Option<&FeatureMask>,
) -> Result<f64> {
    check_dim(params.dim(), w.dim())?;
    let mut weights = w.w.clone();
    if let Some(m) = mask {
        check_dim(params.dim(), m.len())?;
        for (wj, &keep) in weights.iter_mut().zip(m.bits()) {
            if !keep {
                *wj = 0.0;
            }
        }
    }
    let var: f64 = params
        .conditional_variance(context)
        .iter()
        .zip(&weights)
        .map(|(v, wj)| v * wj * wj)
        .sum();
    let acc = [1i8, -1]
        .iter()
        .map(|&y| {
            let mean: f64 = params
                .conditional_mean(context, y)
                .iter()
                .zip(&weights)
                .map(|(m, wj)| m * wj)
                .sum();
            label_accuracy(mean, var, y)
        })
        .sum::<f64>()
        / 2.0;
    Ok(acc)
}

/// The per-context predictor with the least 0-1 error among unit-norm linear
/// predictors: `[γμ, μ, 0]` on c1 and `[μ, -γμ, 0]` on c2, normalized.
pub fn bayes_predictor(context: Context, params: &ProblemParams) -> LinearPredictor {
    let d = params.d();
    let g = params.gamma;
    let scale = 1.0 / (params.mu_norm() * (1.0 + g * g).sqrt());
    let (a, b) = match context {
        Context::C1 => (g, 1.0),
        Context::C2 => (1.0, -g),
    };
    let mut w = vec![0.0; 3 * d];
    for (j, &m) in params.mu.iter().enumerate() {
        w[j] = a * m * scale;
        w[d + j] = b * m * scale;
    }
    LinearPredictor::new(w)
}

/// The x1-only predictor `[μ, 0, 0]/‖μ‖`, which is what IRM and conDRO
/// recover.
pub fn invariant_predictor(params: &ProblemParams) -> LinearPredictor {
    let mut w = vec![0.0; params.dim()];
    let norm = params.mu_norm();
    for (j, &m) in params.mu.iter().enumerate() {
        w[j] = m / norm;
    }
    LinearPredictor::new(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TheoremMethod {
    ErmPcTo1,
    Irm,
    ConDro,
    Icc,
    EnpLowerBound,
    EnpTheoremEval,
}

impl TheoremMethod {
    pub const ALL: [TheoremMethod; 6] = [
        TheoremMethod::ErmPcTo1,
        TheoremMethod::Irm,
        TheoremMethod::ConDro,
        TheoremMethod::Icc,
        TheoremMethod::EnpLowerBound,
        TheoremMethod::EnpTheoremEval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremMethod::ErmPcTo1 => "erm_pc_to_1",
            TheoremMethod::Irm => "irm",
            TheoremMethod::ConDro => "condro",
            TheoremMethod::Icc => "icc",
            TheoremMethod::EnpLowerBound => "enp_lower_bound",
            TheoremMethod::EnpTheoremEval => "enp_theorem_eval",
        }
    }
}

impl fmt::Display for TheoremMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoremAccuracies {
    pub method: TheoremMethod,
    pub acc_c1: f64,
    pub acc_c2: f64,
}

fn half_erfc(x: f64) -> f64 {
    0.5 * erfc(x)
}

/// Accuracy of the feature predictor at routing a sample to its context.
pub fn router_accuracy(params: &ProblemParams) -> f64 {
    half_erfc(-params.rho2())
}

pub fn bayes_accuracy_c1(params: &ProblemParams) -> f64 {
    half_erfc(-params.rho1() * (1.0 + 1.0 / params.gamma).sqrt())
}

pub fn bayes_accuracy_c2(params: &ProblemParams) -> f64 {
    half_erfc(-params.rho1() * (1.0 + params.gamma).sqrt())
}

/// Accuracy of the x1-only predictor, identical in both contexts.
pub fn invariant_accuracy(params: &ProblemParams) -> f64 {
    half_erfc(-params.rho1())
}

/// Accuracy on c2 of the c1-optimal target evaluated on the unmasked input.
pub fn enp_unmasked_c2(params: &ProblemParams) -> f64 {
    half_erfc(-params.rho1() / (1.0 + params.gamma.powi(-3)).sqrt())
}

fn table_warnings(params: &ProblemParams) {
    for w in params.warnings() {
        log::warn!("{w}");
    }
    if params.p_c < 0.5 {
        log::warn!("p_c = {} < 0.5: c1 is not the majority context", params.p_c);
    }
}

/// Population test accuracies of every method, per context.
pub fn theorem1_table(params: &ProblemParams) -> Vec<TheoremAccuracies> {
    table_warnings(params);
    let r1 = params.rho1();
    let g = params.gamma;
    let inv = invariant_accuracy(params);
    let bayes1 = bayes_accuracy_c1(params);
    let router = router_accuracy(params);
    let enp_c2 = enp_unmasked_c2(params);
    TheoremMethod::ALL
        .iter()
        .map(|&method| {
            let (acc_c1, acc_c2) = match method {
                TheoremMethod::ErmPcTo1 => (
                    bayes1,
                    half_erfc(-r1 * (g - 1.0) / (g * g + 1.0 / g).sqrt()),
                ),
                TheoremMethod::Irm | TheoremMethod::ConDro => (inv, inv),
                TheoremMethod::Icc => (bayes1, bayes_accuracy_c2(params)),
                TheoremMethod::EnpLowerBound => (router * bayes1, router * enp_c2),
                TheoremMethod::EnpTheoremEval => (bayes1, enp_c2),
            };
            TheoremAccuracies {
                method,
                acc_c1,
                acc_c2,
            }
        })
        .collect()
}

pub fn theorem1_entry(params: &ProblemParams, method: TheoremMethod) -> TheoremAccuracies {
    theorem1_table(params)
        .into_iter()
        .find(|t| t.method == method)
        .expect("table covers every method")
}

/// Ratios of the end-to-end ENP accuracy (router errors included) to the
/// reference accuracy in each context. Both tend to their perfect-router
/// values as `η → 0`. The reference on c1 is the Bayes accuracy; on c2 it is the
/// best accuracy available from the non-spurious block alone, `erfc(-ρ1)/2`.
pub fn corollary1_ratios(params: &ProblemParams) -> (f64, f64) {
    if params.gamma >= 1.0 {
        log::warn!(
            "gamma = {} is outside the small-gamma regime the ratios describe",
            params.gamma
        );
    }
    let enp = theorem1_entry(params, TheoremMethod::EnpLowerBound);
    (
        enp.acc_c1 / bayes_accuracy_c1(params),
        enp.acc_c2 / invariant_accuracy(params),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub c0: f64,
    /// Radius of the ball that holds `‖x‖` with probability `1 - δ/2`.
    pub radius: f64,
    /// `ln L`, where `L = exp(radius)` bounds `|ℓ'|` on the ball.
    pub log_lipschitz: f64,
    pub icc_bound: f64,
    pub enp_bound: f64,
    pub delta: f64,
    pub n: usize,
    pub p_c: f64,
}

impl BoundReport {
    /// `icc_bound / enp_bound`, computed without forming `L`.
    pub fn ratio(&self) -> f64 {
        1.0 / (1.0 - self.p_c).sqrt()
    }
}

fn rate(n: f64, delta: f64) -> f64 {
    1.0 / n.sqrt() + ((2.0 / delta).ln() / (2.0 * n)).sqrt()
}

/// Estimation-error bounds on the minority context for ICC (which sees only
/// `n(1 - p_c)` minority points) and ENP (which pools all `n`).
pub fn generalization_bounds(params: &ProblemParams, n: usize, delta: f64) -> Result<BoundReport> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid("delta", format!("{delta} is not in (0, 1)")));
    }
    if n == 0 {
        return Err(Error::invalid("n", "must be at least 1"));
    }
    if params.p_c >= 1.0 {
        return Err(Error::invalid(
            "p_c",
            "p_c = 1 leaves no minority context, so the ICC bound is undefined",
        ));
    }
    let d = params.d() as f64;
    let log_term = (2.0 / delta).ln();
    let spread = (params.sigma / params.gamma.sqrt()).max(params.eta);
    let mu = params.mu_norm();
    let c0 = 3f64.sqrt() * mu + ((3.0 * d).sqrt() + log_term.sqrt()) * spread;
    let radius = spread * ((2.0 * log_term).sqrt() + (3.0 * d).sqrt()) + 3f64.sqrt() * mu;
    let lip = radius.exp();
    let nf = n as f64;
    Ok(BoundReport {
        c0,
        radius,
        log_lipschitz: radius,
        icc_bound: lip * c0 * rate(nf * (1.0 - params.p_c), delta),
        enp_bound: lip * c0 * rate(nf, delta),
        delta,
        n,
        p_c: params.p_c,
    })
}

/// `erfc(x)` at `x = -1/√2`, i.e. `2Φ(1)`, handy in tests and examples.
pub const ERFC_NEG_FRAC_1_SQRT_2: f64 = 1.682_689_492_137_085_9;
