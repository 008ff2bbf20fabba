//! Generalization-gap sweeps over the minority-context proportion or the
//! training-set size.

use rayon::prelude::*;

use super::config::{ExperimentConfig, NTrain, RunMethod, SweepAxis};
use crate::error::{Error, Result};
use crate::eval::{generalization_gap, GapReport};
use crate::objectives::Method;
use crate::rng::mix_all;

/// One gap measurement per (method, sweep value, seed), in canonical order.
/// Only ICC and ENP are meaningful here and the sweep must be over `p_c`
/// or `n`.
pub fn gen_gap(config: &ExperimentConfig, jobs: usize) -> Result<Vec<GapReport>> {
    config.validate()?;
    match config.sweep.as_ref().map(|s| s.axis) {
        Some(SweepAxis::Pc) | Some(SweepAxis::N) => {}
        _ => return Err(Error::invalid("sweep", "gen-gap needs a p_c or n sweep")),
    }
    let cells = config.cells()?;
    let jobs_list: Vec<_> = cells
        .iter()
        .map(|c| {
            let method = match c.method {
                RunMethod::Icc => Method::Icc,
                RunMethod::Enp => Method::EnpTarget,
                other => {
                    return Err(Error::Unsupported(format!("gen-gap supports icc and enp, not {other}")))
                }
            };
            let n = match c.n_train {
                NTrain::Samples(n) => n,
                NTrain::Population => return Err(Error::invalid("n_train", "gen-gap needs a sample size")),
            };
            Ok((c, method, n))
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        jobs_list
            .par_iter()
            .map(|(c, method, n)| {
                // Both methods see the same dataset for a given seed.
                let seed = mix_all(config.base_seed, &[c.sweep_index as u64, c.seed]);
                let mut g = generalization_gap(*method, &c.params, *n, c.fraction, seed, &config.train)?;
                g.seed = c.seed;
                Ok(g)
            })
            .collect()
    })
}

/// The default ICC-versus-ENP comparison: `n = 200`, 20 seeds,
/// `p_c` in {0.5, 0.75, 0.9, 0.9375}.
pub fn default_gap_config() -> ExperimentConfig {
    use super::config::Sweep;
    use crate::synthdata::ProblemParams;
    let mut c = ExperimentConfig::new(
        ProblemParams::p0(),
        vec![RunMethod::Icc, RunMethod::Enp],
        NTrain::Samples(200),
    );
    c.seeds = (0..20).collect();
    c.sweep = Some(Sweep {
        axis: SweepAxis::Pc,
        values: vec![0.5, 0.75, 0.9, 0.9375],
    });
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Sweep;
    use crate::synthdata::ProblemParams;

    #[test]
    fn single_cell_single_row() {
        let mut c = ExperimentConfig::new(ProblemParams::p0(), vec![RunMethod::Icc], NTrain::Samples(60));
        c.sweep = Some(Sweep {
            axis: SweepAxis::Pc,
            values: vec![0.75],
        });
        c.train.max_steps = 100;
        let rows = gen_gap(&c, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!((rows[0].gap - (rows[0].test_loss - rows[0].train_loss)).abs() < 1e-12);
    }

    #[test]
    fn rejects_wrong_axis_or_method() {
        let mut c = default_gap_config();
        c.sweep = None;
        assert!(gen_gap(&c, 1).is_err());
        let mut c = default_gap_config();
        c.methods = vec![RunMethod::Erm];
        assert!(gen_gap(&c, 1).is_err());
    }
}
