//! Randomized EMP-selection experiments: one run draws a network and a
//! variance profile, ranks every minimal EMP and records the winner.
//!
//! Each run owns an independent random stream selected by its index, so a
//! report does not depend on how runs are distributed over workers.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cascade::CascadeNetwork;
use crate::emp::{enumerate_minimal, Pattern, VarianceProfile};
use crate::error::{Error, Result};
use crate::fisher::CriterionKind;
use crate::lti::ParamModule;
use crate::ranking::rank_emps;
use crate::sampling::{sample_module, sample_profile, ModuleFamily, VarianceMode};

/// Multiply parameter `param` of module `module` (both 1-based) by `factor`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Perturbation {
    pub module: usize,
    pub param: usize,
    pub factor: f64,
}

impl Perturbation {
    /// First parameter of `module` times ten.
    pub fn first_times_ten(module: usize) -> Self {
        Self {
            module,
            param: 1,
            factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioConfig {
    pub n: usize,
    pub family: ModuleFamily,
    pub runs: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub variance_mode: VarianceMode,
    /// Draw a single module and repeat it along the chain.
    #[cfg_attr(feature = "serde", serde(default))]
    pub identical: bool,
    #[cfg_attr(feature = "serde", serde(default))]
    pub perturbation: Option<Perturbation>,
    #[cfg_attr(feature = "serde", serde(default))]
    pub master_seed: u64,
    #[cfg_attr(feature = "serde", serde(default))]
    pub criterion: CriterionKind,
}

impl ScenarioConfig {
    pub fn new(n: usize, family: ModuleFamily, runs: usize) -> Self {
        Self {
            n,
            family,
            runs,
            variance_mode: VarianceMode::Equal,
            identical: false,
            perturbation: None,
            master_seed: 0,
            criterion: CriterionKind::Trace,
        }
    }

    /// Four-node FIR-Butterworth scenario `S1`..`S5` with equal variances.
    /// `S1` repeats one module; `S2`..`S5` draw independent modules, and
    /// `S3`..`S5` also scale the first tap of `G1`..`G3` by ten.
    pub fn fir_table(scenario: u8, runs: usize, master_seed: u64) -> Result<Self> {
        let mut cfg = Self::new(4, ModuleFamily::FirButterworth, runs);
        cfg.master_seed = master_seed;
        match scenario {
            1 => cfg.identical = true,
            2 => cfg.identical = false,
            3..=5 => {
                cfg.perturbation = Some(Perturbation::first_times_ten(usize::from(scenario) - 2));
            }
            _ => return Err(Error::Parse(alloc::format!("unknown FIR scenario S{scenario}"))),
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewNodes(self.n));
        }
        enumerate_minimal(self.n).map(|_| ())?;
        if self.runs == 0 {
            return Err(Error::Dimension("a scenario needs at least one run"));
        }
        if let Some(p) = self.perturbation {
            if p.module == 0 || p.module >= self.n {
                return Err(Error::Dimension("perturbed module index must lie in 1..n"));
            }
            if p.param == 0 || !p.factor.is_finite() {
                return Err(Error::Dimension(
                    "perturbation needs a 1-based parameter and a finite factor",
                ));
            }
        }
        Ok(())
    }
}

/// Random stream of run `run`.
pub fn run_rng(master_seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(run);
    rng
}

/// Modules for one run, with the perturbation applied. Fails if the
/// perturbed module is no longer stable or the index is out of range.
pub fn draw_network(cfg: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<CascadeNetwork> {
    let m = cfg.n - 1;
    let mut modules: Vec<ParamModule> = if cfg.identical {
        vec![sample_module(cfg.family, rng); m]
    } else {
        (0..m).map(|_| sample_module(cfg.family, rng)).collect()
    };
    if let Some(p) = cfg.perturbation {
        let target = &modules[p.module - 1];
        let mut theta = target.theta().to_vec();
        let slot = theta.get_mut(p.param - 1).ok_or(Error::Dimension(
            "perturbed parameter index exceeds the module's parameter count",
        ))?;
        *slot *= p.factor;
        modules[p.module - 1] = ParamModule::new(target.family(), theta)?;
    }
    CascadeNetwork::new(modules)
}

/// What a single successful run contributes. EMPs are identified by
/// canonical index.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RunRecord {
    pub run: usize,
    pub best: usize,
    pub runner_up: Option<usize>,
    pub worst: usize,
    pub runner_up_ratio: Option<f64>,
    pub worst_ratio: f64,
    pub non_informative: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum RunOutcome {
    Ranked(RunRecord),
    /// Invalid draw or no informative EMP.
    Rejected {
        run: usize,
        reason: String,
    },
}

impl RunOutcome {
    pub fn run(&self) -> usize {
        match self {
            RunOutcome::Ranked(r) => r.run,
            RunOutcome::Rejected { run, .. } => *run,
        }
    }
}

/// Run `run` of the scenario. Never fails: problems become rejections.
pub fn run_once(cfg: &ScenarioConfig, run: usize) -> RunOutcome {
    let mut rng = run_rng(cfg.master_seed, run as u64);
    let reject = |e: Error| RunOutcome::Rejected {
        run,
        reason: e.to_string(),
    };
    let net = match draw_network(cfg, &mut rng) {
        Ok(n) => n,
        Err(e) => return reject(e),
    };
    let profile: VarianceProfile = sample_profile(cfg.variance_mode, cfg.n, &mut rng);
    match rank_emps(&net, &profile, cfg.criterion) {
        Ok(r) => RunOutcome::Ranked(RunRecord {
            run,
            best: r.best().canonical_index,
            runner_up: r.runner_up().map(|e| e.canonical_index),
            worst: r.worst().canonical_index,
            runner_up_ratio: r.runner_up_ratio(),
            worst_ratio: r.worst_ratio(),
            non_informative: r.non_informative.len(),
            converged: r.converged,
        }),
        Err(e) => reject(e),
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Rejection {
    pub run: usize,
    pub reason: String,
}

/// Selection frequencies over all runs of a scenario.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    /// Minimal EMPs in canonical order, as `B=..;C=..` literals.
    pub emps: Vec<String>,
    /// How often each EMP won, aligned with `emps`.
    pub counts: Vec<usize>,
    pub informative_runs: usize,
    pub rejected: Vec<Rejection>,
    /// Total non-informative EMP evaluations across ranked runs.
    pub non_informative_emps: usize,
    /// Ranked runs where some impulse response hit the length cap.
    pub non_converged_runs: usize,
    /// Per ranked run, in run order.
    pub runner_up_ratios: Vec<f64>,
    pub worst_ratios: Vec<f64>,
}

impl ScenarioReport {
    /// Merges run outcomes in any order; the result is keyed by run index.
    pub fn from_outcomes(config: ScenarioConfig, mut outcomes: Vec<RunOutcome>) -> Result<Self> {
        let patterns = enumerate_minimal(config.n)?;
        outcomes.sort_by_key(RunOutcome::run);
        let mut report = Self {
            emps: patterns.iter().map(Pattern::to_string).collect(),
            counts: vec![0; patterns.len()],
            config,
            informative_runs: 0,
            rejected: Vec::new(),
            non_informative_emps: 0,
            non_converged_runs: 0,
            runner_up_ratios: Vec::new(),
            worst_ratios: Vec::new(),
        };
        for o in outcomes {
            match o {
                RunOutcome::Ranked(r) => {
                    report.counts[r.best] += 1;
                    report.informative_runs += 1;
                    report.non_informative_emps += r.non_informative;
                    report.non_converged_runs += usize::from(!r.converged);
                    if let Some(x) = r.runner_up_ratio {
                        report.runner_up_ratios.push(x);
                    }
                    report.worst_ratios.push(r.worst_ratio);
                }
                RunOutcome::Rejected { run, reason } => report.rejected.push(Rejection { run, reason }),
            }
        }
        Ok(report)
    }

    /// Selection percentage of each EMP over informative runs.
    pub fn percentages(&self) -> Vec<f64> {
        let total = self.informative_runs.max(1) as f64;
        self.counts.iter().map(|&c| 100.0 * c as f64 / total).collect()
    }

    /// Canonical indices ordered by selection count, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.counts.len()).collect();
        idx.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        idx
    }

    /// Most selected EMP.
    pub fn best(&self) -> usize {
        self.order()[0]
    }

    pub fn runner_up(&self) -> Option<usize> {
        self.order().get(1).copied()
    }

    pub fn percentage_of(&self, pattern: &Pattern) -> Option<f64> {
        let idx = pattern.canonical_index()?;
        self.percentages().get(idx).copied()
    }
}

/// Sequential driver; `emp-rank` provides the parallel one.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioReport> {
    cfg.validate()?;
    let outcomes = (0..cfg.runs).map(|run| run_once(cfg, run)).collect();
    ScenarioReport::from_outcomes(cfg.clone(), outcomes)
}

/// Median of a sample; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RatioStats {
    pub median_runner_up: f64,
    pub median_worst: f64,
}

pub fn ratio_stats(report: &ScenarioReport) -> Result<RatioStats> {
    match (median(&report.runner_up_ratios), median(&report.worst_ratios)) {
        (Some(median_runner_up), Some(median_worst)) => Ok(RatioStats {
            median_runner_up,
            median_worst,
        }),
        _ => Err(Error::EmptyRanking),
    }
}
