//! Two-context Gaussian data.
//!
//! An input is `x = [x1, x2, x3]` with each block in `R^d`. The context is
//! `C1` with probability `p_c`, the label is uniform on `{-1, +1}`, and
//!
//! ```text
//! x1 | y        ~ N( mu*y,  sigma^2 I)
//! x2 | y, C1    ~ N( mu*y,  gamma*sigma^2 I)
//! x2 | y, C2    ~ N(-mu*y,  sigma^2/gamma I)
//! x3 | C1       ~ N( mu,    eta^2 I)
//! x3 | C2       ~ N(-mu,    eta^2 I)
//! ```
//!
//! `x1` is predictive in both contexts, `x2` flips sign between them and
//! `x3` only identifies the context.

mod io;

use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use io::{format_dataset, load_dataset, parse_dataset, save_dataset};

use crate::error::{Error, Result};
use crate::rng;

/// Scale applied to `mu`, `sigma` and `eta` in
/// [`ProblemParams::p0_population`].
///
/// Accuracies only depend on the ratios `|mu|/sigma` and `|mu|/eta`, but the
/// exponential-loss minimizer over the unit ball only coincides with the
/// Fisher direction when that direction has norm below one, i.e. when
/// `sqrt(1 + 1/gamma^2) / P0_SCALE <= 1`. 25 keeps the constraint slack for
/// every gamma down to 0.05. Finite samples want the opposite: at this scale
/// exponential losses of held-out points are astronomically heavy-tailed, so
/// sampled experiments stay at unit scale.
pub const P0_SCALE: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    C1,
    C2,
}

impl Context {
    pub const ALL: [Context; 2] = [Context::C1, Context::C2];

    pub fn index(self) -> usize {
        match self {
            Context::C1 => 0,
            Context::C2 => 1,
        }
    }

    /// `+1` for `C1`, `-1` for `C2`; the label used when predicting the context.
    pub fn sign(self) -> f64 {
        match self {
            Context::C1 => 1.0,
            Context::C2 => -1.0,
        }
    }

    /// Context read off a feature-predictor score (`C1` iff score > 0).
    pub fn from_score(score: f64) -> Self {
        if score > 0.0 {
            Context::C1
        } else {
            Context::C2
        }
    }

    /// Number of leading coordinates kept by this context's canonical mask.
    pub fn kept_len(self, d: usize) -> usize {
        match self {
            Context::C1 => 2 * d,
            Context::C2 => d,
        }
    }

    pub fn code(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Context::C1),
            2 => Some(Context::C2),
            _ => None,
        }
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Context::C1 => "c1",
            Context::C2 => "c2",
        })
    }
}

/// Generative parameters. The block dimension `d` is `mu.len()`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemParams {
    pub mu: Vec<f64>,
    pub sigma: f64,
    pub gamma: f64,
    pub eta: f64,
    pub p_c: f64,
}

impl ProblemParams {
    pub fn new(mu: Vec<f64>, sigma: f64, gamma: f64, eta: f64, p_c: f64) -> Result<Self> {
        let params = ProblemParams {
            mu,
            sigma,
            gamma,
            eta,
            p_c,
        };
        params.validate()?;
        Ok(params)
    }

    /// `mu = mu_norm * 1/sqrt(d)` in every coordinate.
    pub fn isotropic(
        d: usize,
        mu_norm: f64,
        sigma: f64,
        gamma: f64,
        eta: f64,
        p_c: f64,
    ) -> Result<Self> {
        if d == 0 {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        let v = mu_norm / (d as f64).sqrt();
        Self::new(vec![v; d], sigma, gamma, eta, p_c)
    }

    /// Default parameter set: d = 20, mu = 1/sqrt(d) in every coordinate so
    /// |mu| = 1, sigma = 1, gamma = 0.1, eta = 0.3, p_c = 0.9. Then
    /// rho1 = 1/sqrt(2) and rho2 = 1/(0.3 sqrt(2)).
    pub fn p0() -> Self {
        Self::isotropic(20, 1.0, 1.0, 0.1, 0.3, 0.9).expect("P0 is valid")
    }

    /// [`p0`](Self::p0) scaled by [`P0_SCALE`], for population-mode training.
    pub fn p0_population() -> Self {
        Self::p0().scaled(P0_SCALE).expect("scaled P0 is valid")
    }

    /// Multiplies `mu`, `sigma` and `eta` by `s`, which leaves every
    /// accuracy unchanged.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::new(
            self.mu.iter().map(|m| m * s).collect(),
            self.sigma * s,
            self.gamma,
            self.eta * s,
            self.p_c,
        )
    }

    pub fn d(&self) -> usize {
        self.mu.len()
    }

    pub fn dim(&self) -> usize {
        3 * self.d()
    }

    pub fn mu_norm(&self) -> f64 {
        self.mu.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `|mu| / (sqrt(2) sigma)`
    pub fn rho1(&self) -> f64 {
        self.mu_norm() / (std::f64::consts::SQRT_2 * self.sigma)
    }

    /// `|mu| / (sqrt(2) eta)`
    pub fn rho2(&self) -> f64 {
        self.mu_norm() / (std::f64::consts::SQRT_2 * self.eta)
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_p_c(mut self, p_c: f64) -> Result<Self> {
        self.p_c = p_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_eta(mut self, eta: f64) -> Result<Self> {
        self.eta = eta;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |field: &'static str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(field, format!("must be finite and > 0, got {v}")))
            }
        };
        if self.mu.is_empty() {
            return Err(Error::invalid("d", "must be at least 1"));
        }
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu", "has non-finite coordinates"));
        }
        positive("sigma", self.sigma)?;
        positive("gamma", self.gamma)?;
        positive("eta", self.eta)?;
        if !(0.0..=1.0).contains(&self.p_c) {
            return Err(Error::invalid("p_c", format!("must lie in [0, 1], got {}", self.p_c)));
        }
        if self.mu_norm() <= 0.0 {
            return Err(Error::invalid("mu", "must have positive norm"));
        }
        for (name, rho) in [("rho1", self.rho1()), ("rho2", self.rho2())] {
            if !(rho.is_finite() && rho > 0.0) {
                return Err(Error::invalid(name, format!("not finite and positive: {rho}")));
            }
        }
        for w in self.warnings() {
            log::warn!("{w}");
        }
        Ok(())
    }

    /// Soft violations of the regime the closed-form results assume.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.gamma >= 1.0 {
            out.push(format!(
                "gamma = {} >= 1: closed-form results assume gamma << 1",
                self.gamma
            ));
        }
        out
    }

    pub fn context_prob(&self, context: Context) -> f64 {
        match context {
            Context::C1 => self.p_c,
            Context::C2 => 1.0 - self.p_c,
        }
    }

    /// `E[x | context, y]`.
    pub fn conditional_mean(&self, context: Context, y: i8) -> Vec<f64> {
        let y = f64::from(y);
        let s = context.sign();
        let mut m = Vec::with_capacity(self.dim());
        m.extend(self.mu.iter().map(|&v| v * y));
        m.extend(self.mu.iter().map(|&v| v * y * s));
        m.extend(self.mu.iter().map(|&v| v * s));
        m
    }

    /// Diagonal of `Cov[x | context, y]` (independent of `y`).
    pub fn conditional_variance(&self, context: Context) -> Vec<f64> {
        let d = self.d();
        let s2 = self.sigma * self.sigma;
        let v2 = match context {
            Context::C1 => self.gamma * s2,
            Context::C2 => s2 / self.gamma,
        };
        let mut v = Vec::with_capacity(3 * d);
        v.extend(std::iter::repeat_n(s2, d));
        v.extend(std::iter::repeat_n(v2, d));
        v.extend(std::iter::repeat_n(self.eta * self.eta, d));
        v
    }

    /// Draws `x` given the context and label.
    pub fn sample_x(&self, context: Context, y: i8, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let d = self.d();
        let yf = f64::from(y);
        let (x2_sign, x2_sd, x3_sign) = match context {
            Context::C1 => (1.0, self.sigma * self.gamma.sqrt(), 1.0),
            Context::C2 => (-1.0, self.sigma / self.gamma.sqrt(), -1.0),
        };
        let mut x = Vec::with_capacity(3 * d);
        for &m in &self.mu {
            let z: f64 = rng.sample(StandardNormal);
            x.push(m * yf + self.sigma * z);
        }
        for &m in &self.mu {
            let z: f64 = rng.sample(StandardNormal);
            x.push(x2_sign * m * yf + x2_sd * z);
        }
        for &m in &self.mu {
            let z: f64 = rng.sample(StandardNormal);
            x.push(x3_sign * m + self.eta * z);
        }
        x
    }
}

pub fn sample_label(rng: &mut ChaCha8Rng) -> i8 {
    if rng.random::<bool>() {
        1
    } else {
        -1
    }
}

/// Binary mask over the `3d` input coordinates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMask {
    bits: Vec<bool>,
}

impl FeatureMask {
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(len: usize) -> Self {
        FeatureMask {
            bits: vec![true; len],
        }
    }
}

/// `C1` keeps `x1, x2` (coordinates `j < 2d`), `C2` keeps `x1` (`j < d`).
pub fn canonical_mask(context: Context, d: usize) -> FeatureMask {
    let kept = context.kept_len(d);
    FeatureMask {
        bits: (0..3 * d).map(|j| j < kept).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub x: Vec<f64>,
    pub y: i8,
    pub context: Context,
    pub annotation: Option<FeatureMask>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub examples: Vec<Example>,
    pub params: ProblemParams,
    pub seed: u64,
    pub annotated_fraction: f64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn d(&self) -> usize {
        self.params.d()
    }

    pub fn count(&self, context: Context) -> usize {
        self.examples.iter().filter(|e| e.context == context).count()
    }

    pub fn annotated(&self) -> impl Iterator<Item = &Example> {
        self.examples.iter().filter(|e| e.annotation.is_some())
    }
}

/// Draws one example from the stream `(seed, index)`.
pub fn sample_example(params: &ProblemParams, seed: u64, index: u64) -> Example {
    let mut rng = rng::stream(seed, index);
    let context = if rng.random::<f64>() < params.p_c {
        Context::C1
    } else {
        Context::C2
    };
    let y = sample_label(&mut rng);
    let x = params.sample_x(context, y, &mut rng);
    Example {
        x,
        y,
        context,
        annotation: None,
    }
}

pub fn sample_dataset(params: &ProblemParams, n: usize, seed: u64) -> Result<Dataset> {
    params.validate()?;
    let examples = (0..n as u64)
        .map(|i| sample_example(params, seed, i))
        .collect();
    Ok(Dataset {
        examples,
        params: params.clone(),
        seed,
        annotated_fraction: 0.0,
    })
}

/// Annotates the first `floor(fraction * n)` examples with their context's
/// canonical mask and clears the rest.
pub fn attach_annotations(mut dataset: Dataset, fraction: f64) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::invalid(
            "annotated_fraction",
            format!("must lie in [0, 1], got {fraction}"),
        ));
    }
    let d = dataset.d();
    let k = annotated_count(dataset.len(), fraction);
    for (i, ex) in dataset.examples.iter_mut().enumerate() {
        ex.annotation = (i < k).then(|| canonical_mask(ex.context, d));
    }
    dataset.annotated_fraction = fraction;
    Ok(dataset)
}

pub fn annotated_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).floor() as usize).min(n)
}
