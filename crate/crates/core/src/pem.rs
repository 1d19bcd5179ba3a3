//! Data simulation and prediction-error fitting, used to check the
//! information matrix against the spread of actual estimates.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cascade::CascadeNetwork;
use crate::emp::Emp;
use crate::error::{Error, Result};
use crate::fisher::{gradient_stack, information_matrix};
use crate::lti::{Family, ParamModule};

/// Samples dropped from the start of every record before fitting.
pub const TRANSIENT: usize = 50;
/// Minimum replications for an empirical covariance.
pub const MIN_REPLICATIONS: usize = 30;
/// Share of failed fits above which a comparison is unreliable.
pub const MAX_FAILURE_RATE: f64 = 0.05;

/// Excitations and measurements of one experiment, plus the truth that
/// generated them.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub net: CascadeNetwork,
    pub emp: Emp,
    /// Excited nodes, ascending; `r[k]` belongs to `excited[k]`.
    pub excited: Vec<usize>,
    pub r: Vec<Vec<f64>>,
    /// Measured nodes, ascending; `y[k]` belongs to `measured[k]`.
    pub measured: Vec<usize>,
    pub y: Vec<Vec<f64>>,
    pub seed: u64,
    pub stream: u64,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.r.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Wraps externally produced records. Lengths must agree with the EMP.
    pub fn from_records(net: CascadeNetwork, emp: Emp, r: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        let excited = emp.pattern().excited();
        let measured = emp.pattern().measured();
        let len = r.first().map_or(0, Vec::len);
        if r.len() != excited.len() || y.len() != measured.len() || r.iter().chain(&y).any(|v| v.len() != len) {
            return Err(Error::Dimension("record count or length does not match the EMP"));
        }
        Ok(Self {
            net,
            emp,
            excited,
            r,
            measured,
            y,
            seed: 0,
            stream: 0,
        })
    }

    /// Noise-free node signals `w` implied by the excitations.
    fn node_signals(&self, net: &CascadeNetwork) -> Vec<Vec<f64>> {
        let len = self.len();
        let mut w: Vec<Vec<f64>> = Vec::with_capacity(net.n());
        for node in 1..=net.n() {
            let mut v = if node == 1 {
                vec![0.0; len]
            } else {
                net.module(node - 1).transfer_function().filter(&w[node - 2])
            };
            if let Some(k) = self.excited.iter().position(|&i| i == node) {
                for (a, b) in v.iter_mut().zip(&self.r[k]) {
                    *a += b;
                }
            }
            w.push(v);
        }
        w
    }
}

/// White Gaussian excitations and noise on a zero-initial-condition cascade.
pub fn simulate(net: &CascadeNetwork, emp: &Emp, n_samples: usize, seed: u64) -> Result<Dataset> {
    simulate_stream(net, emp, n_samples, seed, 0)
}

/// As [`simulate`], on stream `stream` of the seed.
pub fn simulate_stream(net: &CascadeNetwork, emp: &Emp, n_samples: usize, seed: u64, stream: u64) -> Result<Dataset> {
    if emp.n() != net.n() {
        return Err(Error::NodeCountMismatch {
            emp: emp.n(),
            network: net.n(),
        });
    }
    if n_samples == 0 {
        return Err(Error::Dimension("simulation needs at least one sample"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut white = |var: f64| -> Vec<f64> {
        let sd = var.sqrt();
        (0..n_samples)
            .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let excited = emp.pattern().excited();
    let measured = emp.pattern().measured();
    let r: Vec<Vec<f64>> = excited.iter().map(|&i| white(emp.sigma2(i).unwrap_or(0.0))).collect();
    let e: Vec<Vec<f64>> = measured.iter().map(|&j| white(emp.lambda(j).unwrap_or(0.0))).collect();
    let mut data = Dataset {
        net: net.clone(),
        emp: emp.clone(),
        excited,
        r,
        measured,
        y: Vec::new(),
        seed,
        stream,
    };
    let w = data.node_signals(net);
    data.y = data
        .measured
        .iter()
        .zip(e)
        .map(|(&j, mut ej)| {
            for (a, b) in ej.iter_mut().zip(&w[j - 1]) {
                *a += b;
            }
            ej
        })
        .collect();
    Ok(data)
}

/// Builds a network of the given structure from stacked parameters.
pub fn realize_network(structure: &[(Family, usize)], theta: &[f64]) -> Result<CascadeNetwork> {
    let total: usize = structure.iter().map(|s| s.1).sum();
    if total != theta.len() {
        return Err(Error::Dimension("parameter vector does not match the model structure"));
    }
    let mut at = 0;
    let mut modules = Vec::with_capacity(structure.len());
    for &(family, count) in structure {
        modules.push(ParamModule::new(family, theta[at..at + count].to_vec())?);
        at += count;
    }
    CascadeNetwork::new(modules)
}

struct Residuals {
    cost: f64,
    /// Per measured node, after the transient.
    eps: Vec<Vec<f64>>,
}

fn residuals(data: &Dataset, net: &CascadeNetwork, skip: usize) -> Residuals {
    let w = data.node_signals(net);
    let mut cost = 0.0;
    let eps: Vec<Vec<f64>> = data
        .measured
        .iter()
        .zip(&data.y)
        .map(|(&j, yj)| {
            let lambda = data.emp.lambda(j).unwrap_or(1.0);
            let e: Vec<f64> = yj[skip..].iter().zip(&w[j - 1][skip..]).map(|(y, p)| y - p).collect();
            cost += e.iter().map(|v| v * v).sum::<f64>() / lambda;
            e
        })
        .collect();
    Residuals { cost, eps }
}

/// Predictor sensitivities `∂ŷ_j/∂θ` for every measured node, after the
/// transient. `out[k][p]` is the column of parameter `p` for `measured[k]`.
fn sensitivities(data: &Dataset, net: &CascadeNetwork, skip: usize) -> Result<Vec<Vec<Vec<f64>>>> {
    let d = net.param_count();
    let len = data.len() - skip;
    let mut out = Vec::with_capacity(data.measured.len());
    for &j in &data.measured {
        let mut cols = vec![vec![0.0; len]; d];
        for (k, &i) in data.excited.iter().enumerate() {
            if i >= j {
                continue;
            }
            let stack = gradient_stack(net, i, j)?;
            for block in &stack.blocks {
                let off = net.param_offset(block.module);
                for (p, f) in block.entries.iter().enumerate() {
                    let s = f.filter(&data.r[k]);
                    for (c, v) in cols[off + p].iter_mut().zip(&s[skip..]) {
                        *c += v;
                    }
                }
            }
        }
        out.push(cols);
    }
    Ok(out)
}

/// Weighted prediction-error cost `Σ_t Σ_j (y_j - ŷ_j)² / λ_j` after the
/// transient, or `None` if `theta` does not give a stable network.
pub fn cost(data: &Dataset, structure: &[(Family, usize)], theta: &[f64]) -> Option<f64> {
    let net = realize_network(structure, theta).ok()?;
    Some(residuals(data, &net, TRANSIENT.min(data.len() - 1)).cost)
}

/// Analytic gradient of [`cost`].
pub fn cost_gradient(data: &Dataset, structure: &[(Family, usize)], theta: &[f64]) -> Result<Vec<f64>> {
    let net = realize_network(structure, theta)?;
    let skip = TRANSIENT.min(data.len() - 1);
    let res = residuals(data, &net, skip);
    let psi = sensitivities(data, &net, skip)?;
    let mut g = vec![0.0; theta.len()];
    for ((&j, eps), cols) in data.measured.iter().zip(&res.eps).zip(&psi) {
        let lambda = data.emp.lambda(j).unwrap_or(1.0);
        for (gp, col) in g.iter_mut().zip(cols) {
            *gp -= 2.0 * col.iter().zip(eps).map(|(a, b)| a * b).sum::<f64>() / lambda;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PemOptions {
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub cost_tol: f64,
    /// Stop when the step is this small relative to `1 + |θ|`.
    pub step_tol: f64,
    pub max_halvings: usize,
}

impl Default for PemOptions {
    fn default() -> Self {
        Self {
            max_iter: 50,
            cost_tol: 1e-12,
            step_tol: 1e-10,
            max_halvings: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PemEstimate {
    pub theta: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Damped Gauss–Newton on the weighted prediction-error cost. Steps are
/// halved until the cost decreases, so it never increases from `theta_init`.
pub fn pem_fit(
    data: &Dataset,
    structure: &[(Family, usize)],
    theta_init: &[f64],
    opts: PemOptions,
) -> Result<PemEstimate> {
    if data.len() <= TRANSIENT {
        return Err(Error::Dimension("record is not longer than the discarded transient"));
    }
    let mut theta = theta_init.to_vec();
    let mut net = realize_network(structure, &theta)?;
    let mut res = residuals(data, &net, TRANSIENT);
    let d = theta.len();
    for iter in 1..=opts.max_iter {
        let psi = sensitivities(data, &net, TRANSIENT)?;
        let mut h = DMatrix::<f64>::zeros(d, d);
        let mut g = DVector::<f64>::zeros(d);
        for ((&j, eps), cols) in data.measured.iter().zip(&res.eps).zip(&psi) {
            let lambda = data.emp.lambda(j).unwrap_or(1.0);
            for p in 0..d {
                g[p] += cols[p].iter().zip(eps).map(|(a, b)| a * b).sum::<f64>() / lambda;
                for q in p..d {
                    let v = cols[p].iter().zip(&cols[q]).map(|(a, b)| a * b).sum::<f64>() / lambda;
                    h[(p, q)] += v;
                    if q != p {
                        h[(q, p)] += v;
                    }
                }
            }
        }
        let step = match h.clone().cholesky() {
            Some(c) => c.solve(&g),
            None => {
                h.pseudo_inverse(1e-12)
                    .map_err(|_| Error::Dimension("Gauss-Newton normal matrix"))?
                    * &g
            }
        };
        let theta_norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if step.norm() <= opts.step_tol * (1.0 + theta_norm) || res.cost == 0.0 {
            return Ok(PemEstimate {
                theta,
                cost: res.cost,
                iterations: iter - 1,
                converged: true,
            });
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + alpha * s).collect();
            if let Ok(trial_net) = realize_network(structure, &trial) {
                let trial_res = residuals(data, &trial_net, TRANSIENT);
                if trial_res.cost <= res.cost {
                    accepted = Some((trial, trial_net, trial_res));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((t, n, r)) = accepted else {
            // No decrease along a descent direction: at the floating-point floor.
            return Ok(PemEstimate {
                theta,
                cost: res.cost,
                iterations: iter,
                converged: true,
            });
        };
        let decrease = res.cost - r.cost;
        theta = t;
        net = n;
        res = r;
        if decrease <= opts.cost_tol * res.cost.max(f64::MIN_POSITIVE) {
            return Ok(PemEstimate {
                theta,
                cost: res.cost,
                iterations: iter,
                converged: true,
            });
        }
    }
    Ok(PemEstimate {
        theta,
        cost: res.cost,
        iterations: opts.max_iter,
        converged: false,
    })
}

/// Simulates replication `rep` and fits it starting from the truth.
pub fn replicate(
    net: &CascadeNetwork,
    emp: &Emp,
    n_samples: usize,
    seed: u64,
    rep: u64,
    opts: PemOptions,
) -> Result<PemEstimate> {
    let data = simulate_stream(net, emp, n_samples, seed, rep)?;
    pem_fit(&data, &net.structure(), &net.theta(), opts)
}

/// Theoretical per-sample covariance next to the sample covariance of
/// `√N (θ̂ - θ⁰)`, with `N` the number of samples used by the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceComparison {
    pub n_samples: usize,
    pub replications: usize,
    pub failed: usize,
    pub theoretical: DMatrix<f64>,
    pub empirical: DMatrix<f64>,
    pub theoretical_trace: f64,
    pub empirical_trace: f64,
    /// `|empirical - theoretical| / theoretical` on the traces.
    pub deviation: f64,
    /// More than 5% of fits failed to converge.
    pub unreliable: bool,
}

pub fn compare_covariance(
    net: &CascadeNetwork,
    emp: &Emp,
    n_samples: usize,
    estimates: &[PemEstimate],
) -> Result<CovarianceComparison> {
    if estimates.len() < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications {
            got: estimates.len(),
            min: MIN_REPLICATIONS,
        });
    }
    if n_samples <= TRANSIENT {
        return Err(Error::Dimension("record is not longer than the discarded transient"));
    }
    let info = information_matrix(net, emp)?;
    let theoretical = info
        .covariance
        .clone()
        .ok_or(Error::NonInformative { rcond: info.rcond })?;
    let truth = net.theta();
    let d = truth.len();
    let scale = ((n_samples - TRANSIENT) as f64).sqrt();
    let good: Vec<DVector<f64>> = estimates
        .iter()
        .filter(|e| e.converged)
        .map(|e| DVector::from_iterator(d, e.theta.iter().zip(&truth).map(|(a, b)| scale * (a - b))))
        .collect();
    let failed = estimates.len() - good.len();
    if good.len() < 2 {
        return Err(Error::Dimension("fewer than two converged fits"));
    }
    let mean = good.iter().fold(DVector::zeros(d), |acc, v| acc + v) / good.len() as f64;
    let empirical = good.iter().fold(DMatrix::zeros(d, d), |acc, v| {
        acc + (v - &mean) * (v - &mean).transpose()
    }) / (good.len() - 1) as f64;
    let theoretical_trace = theoretical.trace();
    let empirical_trace = empirical.trace();
    Ok(CovarianceComparison {
        n_samples,
        replications: estimates.len(),
        failed,
        deviation: (empirical_trace - theoretical_trace).abs() / theoretical_trace,
        unreliable: failed as f64 > MAX_FAILURE_RATE * estimates.len() as f64,
        theoretical,
        empirical,
        theoretical_trace,
        empirical_trace,
    })
}

/// Sequential replication loop; `emp-rank` runs the same loop in parallel.
pub fn empirical_covariance(
    net: &CascadeNetwork,
    emp: &Emp,
    n_samples: usize,
    replications: usize,
    seed: u64,
) -> Result<CovarianceComparison> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::TooFewReplications {
            got: replications,
            min: MIN_REPLICATIONS,
        });
    }
    let estimates = (0..replications as u64)
        .map(|rep| replicate(net, emp, n_samples, seed, rep, PemOptions::default()))
        .collect::<Result<Vec<_>>>()?;
    compare_covariance(net, emp, n_samples, &estimates)
}
