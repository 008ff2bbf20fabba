//! Checks shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

use enp_lab::objectives::{
    empirical_objective, mlp_empirical_objective, population_objective, Method, ObjectiveSpec, ObjectiveValue,
};
use enp_lab::predictors::{MlpGrad, MlpPredictor};
use enp_lab::rng;
use enp_lab::synthdata::{attach_annotations, sample_dataset, Context, ProblemParams};
use rand::Rng;

pub const FD_STEP: f64 = 1e-5;

pub const METHODS: [Method; 6] = [
    Method::Erm,
    Method::Irm,
    Method::Icc,
    Method::ConDro,
    Method::EnpFeature,
    Method::EnpTarget,
];

pub fn spec_for(method: Method, population: bool) -> ObjectiveSpec {
    let s = if population {
        ObjectiveSpec::population(method)
    } else {
        ObjectiveSpec::empirical(method)
    };
    if method == Method::Icc {
        s.in_context(Context::C2)
    } else {
        s
    }
}

/// (loss, gradient) pairs, one per context for the minimax objective.
pub fn parts<G>(v: ObjectiveValue<G>) -> Vec<(f64, G)> {
    match v {
        ObjectiveValue::Scalar { loss, grad } => vec![(loss, grad)],
        ObjectiveValue::PerContext { loss, grad } => {
            let [g0, g1] = grad;
            vec![(loss[0], g0), (loss[1], g1)]
        }
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let scale: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt().max(1e-12);
    diff / scale
}

/// Largest relative error between the analytic gradient of `f` at `w` and
/// central differences, over all parts of the objective.
pub fn linear_fd_error<F: Fn(&[f64]) -> ObjectiveValue>(f: F, w: &[f64]) -> f64 {
    let analytic = parts(f(w));
    let mut worst = 0.0f64;
    for (k, (_, grad)) in analytic.iter().enumerate() {
        let fd: Vec<f64> = (0..w.len())
            .map(|j| {
                let mut up = w.to_vec();
                let mut dn = w.to_vec();
                up[j] += FD_STEP;
                dn[j] -= FD_STEP;
                (parts(f(&up))[k].0 - parts(f(&dn))[k].0) / (2.0 * FD_STEP)
            })
            .collect();
        worst = worst.max(rel_err(&fd, grad));
    }
    worst
}

pub fn random_ball_point(dim: usize, radius: f64, seed: u64) -> Vec<f64> {
    let mut r = rng::rng(seed);
    let w: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    w.iter().map(|v| v * radius / n).collect()
}

/// Worst finite-difference error over every linear objective, population
/// and empirical, with and without the ridge term.
pub fn worst_linear_fd_error() -> f64 {
    let pop = ProblemParams::isotropic(3, 1.5, 1.0, 0.2, 0.5, 0.8).unwrap();
    let emp = ProblemParams::isotropic(4, 1.0, 1.0, 0.1, 0.3, 0.7).unwrap();
    let ds = attach_annotations(sample_dataset(&emp, 80, 21).unwrap(), 1.0).unwrap();
    let mut worst = 0.0f64;
    for (i, &m) in METHODS.iter().enumerate() {
        for penalty in [0.0, 0.3] {
            let spec = spec_for(m, true);
            let w = random_ball_point(pop.dim(), 0.7, i as u64);
            worst = worst.max(linear_fd_error(|w| population_objective(w, &spec, &pop, penalty).unwrap(), &w));
            let spec = spec_for(m, false);
            let w = random_ball_point(emp.dim(), 0.9, 100 + i as u64);
            worst = worst.max(linear_fd_error(
                |w| empirical_objective(w, &spec, &ds, None, penalty).unwrap(),
                &w,
            ));
        }
    }
    worst
}

fn mlp_dot(a: &MlpGrad, b: &MlpGrad) -> f64 {
    let d = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(u, v)| u * v).sum::<f64>();
    d(&a.w1, &b.w1) + d(&a.b1, &b.b1) + d(&a.w2, &b.w2) + a.b2 * b.b2
}

fn random_direction(model: &MlpPredictor, seed: u64) -> MlpGrad {
    let mut r = rng::rng(seed);
    let mut dir = MlpGrad::zeros_like(model);
    for v in dir.w1.iter_mut().chain(dir.b1.iter_mut()).chain(dir.w2.iter_mut()) {
        *v = r.random_range(-1.0..1.0);
    }
    dir.b2 = r.random_range(-1.0..1.0);
    dir
}

/// Worst relative error of directional derivatives of the network
/// objectives along random parameter directions.
pub fn worst_mlp_fd_error() -> f64 {
    let p = ProblemParams::isotropic(2, 1.0, 1.0, 0.3, 0.5, 0.75).unwrap();
    let ds = attach_annotations(sample_dataset(&p, 40, 8).unwrap(), 1.0).unwrap();
    let model = MlpPredictor::init(p.dim(), 8, &mut rng::rng(3));
    let mut worst = 0.0f64;
    for &m in &METHODS {
        if m == Method::EnpFeature {
            continue;
        }
        let spec = spec_for(m, false);
        let eval = |model: &MlpPredictor| parts(mlp_empirical_objective(model, &spec, &ds, None, 0.1).unwrap());
        let base = eval(&model);
        for trial in 0..4 {
            let dir = random_direction(&model, 50 + trial);
            let mut up = model.clone();
            up.add_scaled(&dir, FD_STEP);
            let mut dn = model.clone();
            dn.add_scaled(&dir, -FD_STEP);
            let (fu, fdn) = (eval(&up), eval(&dn));
            for (k, (_, g)) in base.iter().enumerate() {
                let fd = (fu[k].0 - fdn[k].0) / (2.0 * FD_STEP);
                let an = mlp_dot(g, &dir);
                worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
            }
        }
    }
    worst
}

/// Squared mass of `w` outside span{(μ,0,0), (0,μ,0), (0,0,μ)} relative to
/// its squared norm.
pub fn orthogonal_mass(w: &[f64], mu: &[f64]) -> f64 {
    let d = mu.len();
    let mm: f64 = mu.iter().map(|m| m * m).sum();
    let total: f64 = w.iter().map(|v| v * v).sum();
    let inside: f64 = (0..3)
        .map(|b| {
            let c: f64 = (0..d).map(|j| w[b * d + j] * mu[j]).sum();
            c * c / mm
        })
        .sum();
    ((total - inside) / total).max(0.0)
}

/// Mean vector with unequal entries, scaled so the norm constraint is slack.
pub fn anisotropic_params() -> ProblemParams {
    let mu: Vec<f64> = (1..=6).map(|k| 5.0 * f64::from(k) / 10.0).collect();
    ProblemParams::new(mu, 20.0, 0.1, 6.0, 0.9).unwrap()
}
