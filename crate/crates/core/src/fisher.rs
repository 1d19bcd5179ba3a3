//! Per-sample information matrix and asymptotic covariance of the module
//! parameter estimates.
//!
//! The prediction-error gradient of the measurement at node `j` splits into
//! one stack per excited source `i < j`: the block for module `k` on the path
//! is `∂G_k/∂θ_k · ∏_{l≠k} G_l` applied to `r_i`. For white `r_i` the expected
//! outer product of a stack is `σ_i²` times the Gram matrix of the entries'
//! impulse responses, so
//!
//! ```text
//! M = Σ_{i∈ℬ, j∈𝒞, i<j} (σ_i² / λ_j) · Γ_ji,    P = M⁻¹
//! ```
//!
//! with the per-sample normalization (no factor `N`).

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use nalgebra::DMatrix;

use crate::cascade::CascadeNetwork;
use crate::dd::{filter_in_place, Dd, DdMatrix};
use crate::emp::{Emp, Pattern};
use crate::error::{Error, Result};
use crate::lti::{TransferFunction, DEFAULT_MAX_LEN, DEFAULT_TAIL_TOL};

/// Reciprocal condition number below which `M` is treated as singular.
pub const SINGULARITY_RCOND: f64 = 1e-10;

/// Impulse-response truncation used for every expectation.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truncation {
    pub max_len: usize,
    pub tail_tol: f64,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            max_len: DEFAULT_MAX_LEN,
            tail_tol: DEFAULT_TAIL_TOL,
        }
    }
}

/// A-optimality (`trace P`) or D-optimality (`log det P`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum CriterionKind {
    #[default]
    Trace,
    LogDet,
}

impl fmt::Display for CriterionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CriterionKind::Trace => "trace",
            CriterionKind::LogDet => "logdet",
        })
    }
}

impl core::str::FromStr for CriterionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "trace" | "a" => Ok(CriterionKind::Trace),
            "logdet" | "log-det" | "d" => Ok(CriterionKind::LogDet),
            _ => Err(Error::Parse(alloc::format!("unknown criterion `{s}`"))),
        }
    }
}

/// One module's slice of a gradient stack.
#[derive(Debug, Clone, PartialEq)]
pub struct StackBlock {
    pub module: usize,
    /// One filter per parameter of `module`.
    pub entries: Vec<TransferFunction>,
}

/// Sensitivity filters of the path from excited node `source` to measured
/// node `sink`. Modules off the path have no block.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientStack {
    pub source: usize,
    pub sink: usize,
    pub blocks: Vec<StackBlock>,
}

impl GradientStack {
    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = &TransferFunction> {
        self.blocks.iter().flat_map(|b| b.entries.iter())
    }

    /// Range of the stacked parameter vector covered by this stack.
    pub fn param_range(&self, net: &CascadeNetwork) -> Range<usize> {
        match (self.blocks.first(), self.blocks.last()) {
            (Some(first), Some(last)) => {
                net.param_offset(first.module)..net.param_offset(last.module) + last.entries.len()
            }
            _ => 0..0,
        }
    }
}

/// Builds `ψ_ji`. The block for module `k` is `G_k'` in series with
/// `path_gain(i, k) · path_gain(k + 1, j)`, never by dividing `ρ_ji` by `G_k`.
pub fn gradient_stack(net: &CascadeNetwork, i: usize, j: usize) -> Result<GradientStack> {
    let n = net.n();
    for node in [i, j] {
        if node == 0 || node > n {
            return Err(Error::NodeOutOfRange { node, n });
        }
    }
    let mut blocks = Vec::new();
    if i < j {
        for k in i..j {
            let around = net.path_gain(i, k)?.series(&net.path_gain(k + 1, j)?);
            let entries = net.module(k).jacobian().iter().map(|d| d.series(&around)).collect();
            blocks.push(StackBlock { module: k, entries });
        }
    }
    Ok(GradientStack {
        source: i,
        sink: j,
        blocks,
    })
}

/// Matrix of white-noise cross-correlations with a convergence flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub matrix: DMatrix<f64>,
    pub converged: bool,
}

fn impulse_rows(filters: &[&TransferFunction], trunc: Truncation) -> Result<(Vec<Vec<f64>>, bool)> {
    let mut converged = true;
    let mut rows = Vec::with_capacity(filters.len());
    for f in filters {
        let h = f.impulse_response(trunc.max_len, trunc.tail_tol)?;
        converged &= h.converged;
        rows.push(h.taps);
    }
    Ok((rows, converged))
}

fn pack(rows: &[Vec<f64>], len: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(rows.len(), len);
    for (r, taps) in rows.iter().enumerate() {
        for (t, &v) in taps.iter().enumerate() {
            m[(r, t)] = v;
        }
    }
    m
}

/// `variance · Σ_t h_a(t) h_b(t)ᵀ`, i.e. `E[(a(q) r)(b(q) r)ᵀ]` for zero-mean
/// white `r` of that variance.
pub fn white_correlation(
    a: &[TransferFunction],
    b: &[TransferFunction],
    variance: f64,
    trunc: Truncation,
) -> Result<Correlation> {
    let (ra, ca) = impulse_rows(&a.iter().collect::<Vec<_>>(), trunc)?;
    let (rb, cb) = impulse_rows(&b.iter().collect::<Vec<_>>(), trunc)?;
    let len = ra.iter().chain(rb.iter()).map(Vec::len).max().unwrap_or(0);
    let ha = pack(&ra, len);
    let hb = pack(&rb, len);
    Ok(Correlation {
        matrix: (ha * hb.transpose()) * variance,
        converged: ca && cb,
    })
}

/// Unit-variance Gram matrix of one gradient stack, placed at `offset` in the
/// stacked parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGram {
    pub source: usize,
    pub sink: usize,
    pub offset: usize,
    /// Rounded to `f64`; [`NetworkGrams::assemble`] also uses the low parts.
    pub gram: DMatrix<f64>,
    gram_lo: DMatrix<f64>,
    pub converged: bool,
}

impl PathGram {
    pub fn new(net: &CascadeNetwork, i: usize, j: usize, trunc: Truncation) -> Result<Self> {
        let stack = gradient_stack(net, i, j)?;
        let range = stack.param_range(net);
        // The f64 responses fix the truncation length and convergence flag.
        let filters: Vec<&TransferFunction> = stack.entries().collect();
        let (rows, converged) = impulse_rows(&filters, trunc)?;
        let len = rows.iter().map(Vec::len).max().unwrap_or(0);

        let mut responses: Vec<Vec<Dd>> = Vec::with_capacity(rows.len());
        for block in &stack.blocks {
            let k = block.module;
            for factors in net.module(k).jacobian_factors() {
                let mut x = vec![Dd::ZERO; len];
                if let Some(first) = x.first_mut() {
                    *first = Dd::ONE;
                }
                let around = (i..j).filter(|&m| m != k).map(|m| net.module(m).transfer_function());
                for f in factors.iter().chain(around) {
                    let (b, a) = f.shift_form();
                    filter_in_place(&b, &a, &mut x);
                }
                responses.push(x);
            }
        }

        let d = responses.len();
        let mut gram = DMatrix::zeros(d, d);
        let mut gram_lo = DMatrix::zeros(d, d);
        for r in 0..d {
            for c in 0..=r {
                let mut acc = Dd::ZERO;
                for (x, y) in responses[r].iter().zip(&responses[c]) {
                    acc += *x * *y;
                }
                for (row, col) in [(r, c), (c, r)] {
                    gram[(row, col)] = acc.hi;
                    gram_lo[(row, col)] = acc.lo;
                }
            }
        }
        Ok(Self {
            source: i,
            sink: j,
            offset: range.start,
            gram,
            gram_lo,
            converged,
        })
    }
}

/// Gram matrices for a set of (source, sink) pairs of one network. Every EMP
/// of the network reuses them, only the SNR weights change.
#[derive(Debug, Clone)]
pub struct NetworkGrams {
    n: usize,
    param_counts: Vec<usize>,
    grams: Vec<PathGram>,
}

impl NetworkGrams {
    /// Every forward pair `i < j`.
    pub fn all_pairs(net: &CascadeNetwork, trunc: Truncation) -> Result<Self> {
        let n = net.n();
        let pairs: Vec<(usize, usize)> = (1..n).flat_map(|i| (i + 1..=n).map(move |j| (i, j))).collect();
        Self::for_pairs(net, &pairs, trunc)
    }

    /// Only the pairs a single pattern needs.
    pub fn for_pattern(net: &CascadeNetwork, pattern: &Pattern, trunc: Truncation) -> Result<Self> {
        let pairs: Vec<(usize, usize)> = pattern.paths().collect();
        Self::for_pairs(net, &pairs, trunc)
    }

    fn for_pairs(net: &CascadeNetwork, pairs: &[(usize, usize)], trunc: Truncation) -> Result<Self> {
        let grams = pairs
            .iter()
            .map(|&(i, j)| PathGram::new(net, i, j, trunc))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n: net.n(),
            param_counts: net.param_counts(),
            grams,
        })
    }

    pub fn gram(&self, i: usize, j: usize) -> Option<&PathGram> {
        self.grams.iter().find(|g| g.source == i && g.sink == j)
    }

    /// Weighted sum of the path Gram matrices, symmetrized and inverted.
    pub fn assemble(&self, emp: &Emp) -> Result<InfoResult> {
        if emp.n() != self.n {
            return Err(Error::NodeCountMismatch {
                emp: emp.n(),
                network: self.n,
            });
        }
        let dim: usize = self.param_counts.iter().sum();
        let mut m = DdMatrix::zeros(dim);
        let mut converged = true;
        for (i, j) in emp.pattern().paths() {
            let pg = self
                .gram(i, j)
                .ok_or(Error::Dimension("path Gram matrix was not precomputed"))?;
            let w = Dd::from_f64(emp.sigma2(i).unwrap_or(0.0)) / Dd::from_f64(emp.lambda(j).unwrap_or(1.0));
            let d = pg.gram.nrows();
            for r in 0..d {
                for c in 0..d {
                    let g = Dd {
                        hi: pg.gram[(r, c)],
                        lo: pg.gram_lo[(r, c)],
                    };
                    *m.at_mut(pg.offset + r, pg.offset + c) += g * w;
                }
            }
            converged &= pg.converged;
        }
        Ok(InfoResult::from_dd(m, self.param_counts.clone(), converged, 0.0))
    }
}

/// Outcome of evaluating one (network, EMP) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoResult {
    /// Per-sample information matrix, symmetrized.
    pub information: DMatrix<f64>,
    /// `M⁻¹`, present only when `rcond` clears [`SINGULARITY_RCOND`].
    pub covariance: Option<DMatrix<f64>>,
    /// `λ_min / λ_max` of `D^{-1/2} M D^{-1/2}` with `D = diag(M)`.
    pub rcond: f64,
    /// `max|M - Mᵀ| / max|M|` before symmetrization.
    pub asymmetry: f64,
    /// False if any impulse response hit `max_len` before its tail tolerance.
    pub converged: bool,
    log_det_information: Option<f64>,
    param_counts: Vec<usize>,
}

impl InfoResult {
    pub fn from_information(m: DMatrix<f64>, param_counts: Vec<usize>, converged: bool) -> Self {
        let scale = m.amax();
        let asymmetry = if scale > 0.0 {
            (&m - m.transpose()).amax() / scale
        } else {
            0.0
        };
        let n = m.nrows();
        let mut dd = DdMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                *dd.at_mut(r, c) =
                    Dd::from_f64(m[(r, c)]) * Dd::from_f64(0.5) + Dd::from_f64(m[(c, r)]) * Dd::from_f64(0.5);
            }
        }
        Self::from_dd(dd, param_counts, converged, asymmetry)
    }

    /// Inverts in double-double after Jacobi scaling, which also makes the
    /// singularity threshold independent of parameter units.
    fn from_dd(m: DdMatrix, param_counts: Vec<usize>, converged: bool, asymmetry: f64) -> Self {
        let n = m.n;
        let information = DMatrix::from_fn(n, n, |r, c| m.at(r, c).to_f64());
        let diag: Vec<Dd> = (0..n).map(|k| m.at(k, k)).collect();
        let usable = n > 0 && diag.iter().all(|d| d.hi > 0.0 && d.hi.is_finite());

        let mut rcond = 0.0;
        let mut covariance = None;
        let mut log_det_information = None;
        if usable {
            let inv_sqrt: Vec<Dd> = diag.iter().map(|d| Dd::ONE / d.sqrt()).collect();
            let mut scaled = DdMatrix::zeros(n);
            for r in 0..n {
                for c in 0..n {
                    *scaled.at_mut(r, c) = m.at(r, c) * inv_sqrt[r] * inv_sqrt[c];
                }
            }
            let eig = DMatrix::from_fn(n, n, |r, c| scaled.at(r, c).to_f64()).symmetric_eigenvalues();
            rcond = (eig.min() / eig.max()).max(0.0);
            if rcond > SINGULARITY_RCOND {
                if let Some(l) = scaled.cholesky() {
                    let log_diag: f64 = diag.iter().map(|d| d.ln()).sum();
                    log_det_information = Some(2.0 * (0..n).map(|k| l.at(k, k).ln()).sum::<f64>() + log_diag);
                    let s_inv = DdMatrix::cholesky_inverse(&l);
                    covariance = Some(DMatrix::from_fn(n, n, |r, c| {
                        (s_inv.at(r, c) * inv_sqrt[r] * inv_sqrt[c]).to_f64()
                    }));
                }
            }
        }
        Self {
            information,
            covariance,
            rcond,
            asymmetry,
            converged,
            log_det_information,
            param_counts,
        }
    }

    pub fn is_informative(&self) -> bool {
        self.covariance.is_some()
    }

    pub fn param_counts(&self) -> &[usize] {
        &self.param_counts
    }

    /// Parameter range of module `k` (1-based).
    pub fn module_range(&self, k: usize) -> Range<usize> {
        let start: usize = self.param_counts[..k - 1].iter().sum();
        start..start + self.param_counts[k - 1]
    }

    fn covariance_or_err(&self) -> Result<&DMatrix<f64>> {
        self.covariance
            .as_ref()
            .ok_or(Error::NonInformative { rcond: self.rcond })
    }

    /// Diagonal block of `P` for module `k`.
    pub fn module_covariance(&self, k: usize) -> Result<DMatrix<f64>> {
        let p = self.covariance_or_err()?;
        let r = self.module_range(k);
        Ok(p.view((r.start, r.start), (r.len(), r.len())).into_owned())
    }

    /// Diagonal block of `M` for module `k`.
    pub fn module_information(&self, k: usize) -> DMatrix<f64> {
        let r = self.module_range(k);
        self.information
            .view((r.start, r.start), (r.len(), r.len()))
            .into_owned()
    }

    /// Block `(k, l)` of `M`.
    pub fn information_block(&self, k: usize, l: usize) -> DMatrix<f64> {
        let rk = self.module_range(k);
        let rl = self.module_range(l);
        self.information
            .view((rk.start, rl.start), (rk.len(), rl.len()))
            .into_owned()
    }

    /// `trace` of each module's covariance block.
    pub fn module_traces(&self) -> Result<Vec<f64>> {
        (1..=self.param_counts.len())
            .map(|k| self.module_covariance(k).map(|b| b.trace()))
            .collect()
    }

    pub fn trace(&self) -> Result<f64> {
        Ok(self.covariance_or_err()?.trace())
    }

    /// `log det P = -log det M`.
    pub fn log_det(&self) -> Result<f64> {
        self.covariance_or_err()?;
        self.log_det_information
            .map(|v| -v)
            .ok_or(Error::NonInformative { rcond: self.rcond })
    }

    pub fn criterion(&self, kind: CriterionKind) -> Result<f64> {
        match kind {
            CriterionKind::Trace => self.trace(),
            CriterionKind::LogDet => self.log_det(),
        }
    }
}

/// `trace P` or `log det P`; errors with the condition estimate when `P` is
/// not available.
pub fn criterion(res: &InfoResult, kind: CriterionKind) -> Result<f64> {
    res.criterion(kind)
}

/// Information matrix and covariance for one EMP with default truncation.
pub fn information_matrix(net: &CascadeNetwork, emp: &Emp) -> Result<InfoResult> {
    information_matrix_with(net, emp, Truncation::default())
}

pub fn information_matrix_with(net: &CascadeNetwork, emp: &Emp, trunc: Truncation) -> Result<InfoResult> {
    if emp.n() != net.n() {
        return Err(Error::NodeCountMismatch {
            emp: emp.n(),
            network: net.n(),
        });
    }
    NetworkGrams::for_pattern(net, emp.pattern(), trunc)?.assemble(emp)
}

/// `Q X Qᵀ` where `Q` reverses the order of the module blocks (parameters
/// inside a block keep their order). `param_counts` describes the rows of `x`.
pub fn reverse_module_blocks(x: &DMatrix<f64>, param_counts: &[usize]) -> DMatrix<f64> {
    let mut perm = Vec::with_capacity(x.nrows());
    let mut starts = vec![0usize; param_counts.len()];
    for k in 1..param_counts.len() {
        starts[k] = starts[k - 1] + param_counts[k - 1];
    }
    for k in (0..param_counts.len()).rev() {
        perm.extend(starts[k]..starts[k] + param_counts[k]);
    }
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| x[(perm[r], perm[c])])
}
