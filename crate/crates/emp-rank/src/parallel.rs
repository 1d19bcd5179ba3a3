//! Multi-threaded drivers. Work items carry their own random streams, so
//! results do not depend on the number of threads.

use std::sync::atomic::{AtomicUsize, Ordering};

use emp_core::pem::{compare_covariance, replicate, CovarianceComparison, PemOptions, MIN_REPLICATIONS};
use emp_core::scenario::{run_once, ScenarioConfig, ScenarioReport};
use emp_core::{CascadeNetwork, Emp, Error};
use rayon::prelude::*;

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(t).build()?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

struct Progress {
    label: &'static str,
    total: usize,
    done: AtomicUsize,
}

impl Progress {
    fn new(label: &'static str, total: usize) -> Self {
        Self {
            label,
            total,
            done: AtomicUsize::new(0),
        }
    }

    fn tick(&self) {
        let done = self.done.fetch_add(1, Ordering::Relaxed) + 1;
        let step = (self.total / 10).max(1);
        if done.is_multiple_of(step) || done == self.total {
            log::info!("{}: {done}/{}", self.label, self.total);
        }
    }
}

pub fn run_scenario(cfg: &ScenarioConfig) -> emp_core::Result<ScenarioReport> {
    cfg.validate()?;
    let progress = Progress::new("runs", cfg.runs);
    let outcomes = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let o = run_once(cfg, run);
            progress.tick();
            o
        })
        .collect();
    ScenarioReport::from_outcomes(cfg.clone(), outcomes)
}

pub fn empirical_covariance(
    net: &CascadeNetwork,
    emp: &Emp,
    n_samples: usize,
    replications: usize,
    seed: u64,
) -> emp_core::Result<CovarianceComparison> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications {
            got: replications,
            min: MIN_REPLICATIONS,
        });
    }
    let progress = Progress::new("replications", replications);
    let estimates = (0..replications as u64)
        .into_par_iter()
        .map(|rep| {
            let e = replicate(net, emp, n_samples, seed, rep, PemOptions::default());
            progress.tick();
            e
        })
        .collect::<emp_core::Result<Vec<_>>>()?;
    compare_covariance(net, emp, n_samples, &estimates)
}
