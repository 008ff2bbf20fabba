use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Result};

pub const DEFAULT_HIDDEN: usize = 512;

/// One hidden ReLU layer and a scalar output.
///
/// Inputs are multiplied coordinate-wise by `input_scale` before the first
/// layer. Training sets it to the inverse RMS of each coordinate; a zero
/// entry removes the coordinate entirely (used for input-support
/// restrictions).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpPredictor {
    pub(crate) input_scale: Vec<f64>,
    /// `hidden x input_dim`, row-major.
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: f64,
}

/// Gradient with respect to every parameter of an [`MlpPredictor`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpGrad {
    pub fn zeros_like(m: &MlpPredictor) -> Self {
        MlpGrad {
            w1: vec![0.0; m.w1.len()],
            b1: vec![0.0; m.b1.len()],
            w2: vec![0.0; m.w2.len()],
            b2: 0.0,
        }
    }

    /// `self += other`.
    pub fn add(&mut self, other: &MlpGrad) {
        axpy(&mut self.w1, &other.w1, 1.0);
        axpy(&mut self.b1, &other.b1, 1.0);
        axpy(&mut self.w2, &other.w2, 1.0);
        self.b2 += other.b2;
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &MlpGrad) {
        axpy(&mut self.w1, &other.w1, a);
        axpy(&mut self.b1, &other.b1, a);
        axpy(&mut self.w2, &other.w2, a);
        self.b2 += a * other.b2;
    }

    pub fn clear(&mut self) {
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2 = 0.0;
    }

    pub fn scale(&mut self, k: f64) {
        self.w1.iter_mut().for_each(|v| *v *= k);
        self.b1.iter_mut().for_each(|v| *v *= k);
        self.w2.iter_mut().for_each(|v| *v *= k);
        self.b2 *= k;
    }

    pub fn norm(&self) -> f64 {
        let sq = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>();
        (sq(&self.w1) + sq(&self.b1) + sq(&self.w2) + self.b2 * self.b2).sqrt()
    }
}

impl MlpPredictor {
    /// Centered uniform initialization with half-width `1/sqrt(fan_in)`.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let a1 = 1.0 / (input_dim as f64).sqrt();
        let a2 = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |a: f64| rng.random_range(-a..a);
        let w1 = (0..hidden * input_dim).map(|_| uniform(a1)).collect();
        let b1 = (0..hidden).map(|_| uniform(a1)).collect();
        let w2 = (0..hidden).map(|_| uniform(a2)).collect();
        let b2 = uniform(a2);
        MlpPredictor {
            input_scale: vec![1.0; input_dim],
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_scale.len()
    }

    pub fn hidden(&self) -> usize {
        self.b1.len()
    }

    pub fn input_scale(&self) -> &[f64] {
        &self.input_scale
    }

    pub fn set_input_scale(&mut self, scale: Vec<f64>) {
        assert_eq!(scale.len(), self.input_dim());
        self.input_scale = scale;
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.input_dim(), x.len())?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> f64 {
        let z = self.scaled(x);
        let mut out = self.b2;
        for (h, row) in self.w1.chunks_exact(z.len()).enumerate() {
            let pre = self.b1[h] + super::dot(row, &z);
            if pre > 0.0 {
                out += self.w2[h] * pre;
            }
        }
        out
    }

    fn scaled(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.input_scale).map(|(a, s)| a * s).collect()
    }

    /// Adds `coeff * d score(x) / d params` into `grad` and returns the score.
    pub fn accumulate_grad(&self, x: &[f64], coeff: f64, grad: &mut MlpGrad) -> f64 {
        let z = self.scaled(x);
        let n_in = z.len();
        let mut out = self.b2;
        grad.b2 += coeff;
        for (h, row) in self.w1.chunks_exact(n_in).enumerate() {
            let pre = self.b1[h] + super::dot(row, &z);
            if pre > 0.0 {
                out += self.w2[h] * pre;
                grad.w2[h] += coeff * pre;
                let g = coeff * self.w2[h];
                grad.b1[h] += g;
                for (gw, zi) in grad.w1[h * n_in..(h + 1) * n_in].iter_mut().zip(&z) {
                    *gw += g * zi;
                }
            }
        }
        out
    }

    /// `d score / d x`.
    pub fn input_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), x.len())?;
        let z = self.scaled(x);
        let mut g = vec![0.0; z.len()];
        for (h, row) in self.w1.chunks_exact(z.len()).enumerate() {
            let pre = self.b1[h] + super::dot(row, &z);
            if pre > 0.0 {
                for (gi, wi) in g.iter_mut().zip(row) {
                    *gi += self.w2[h] * wi;
                }
            }
        }
        for (gi, s) in g.iter_mut().zip(&self.input_scale) {
            *gi *= s;
        }
        Ok(g)
    }

    /// `self += step * dir` over all parameters.
    pub fn add_scaled(&mut self, dir: &MlpGrad, step: f64) {
        axpy(&mut self.w1, &dir.w1, step);
        axpy(&mut self.b1, &dir.b1, step);
        axpy(&mut self.w2, &dir.w2, step);
        self.b2 += step * dir.b2;
    }

    pub fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(&self.b1)
            .chain(&self.w2)
            .all(|v| v.is_finite())
            && self.b2.is_finite()
    }
}

fn axpy(y: &mut [f64], x: &[f64], a: f64) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}
