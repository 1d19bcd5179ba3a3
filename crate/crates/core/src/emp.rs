//! Excitation and measurement patterns.
//!
//! A [`Pattern`] is the pair of node sets (excited `ℬ`, measured `𝒞`). An
//! [`Emp`] attaches an excitation variance to every excited node and a noise
//! variance to every measured node.
//!
//! For a cascade, a pattern is minimal iff node 1 is excited, node n is
//! measured and every interior node is exactly one of the two; there are
//! `2^{n-2}` of them for `n >= 3`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Largest node count a [`Pattern`] can hold.
pub const MAX_NODES: usize = 64;

/// Largest node count [`enumerate_minimal`] accepts.
pub const MAX_ENUMERATION_NODES: usize = 26;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    n: usize,
    excited: u64,
    measured: u64,
}

fn bit(node: usize) -> u64 {
    1u64 << (node - 1)
}

fn nodes_of(mask: u64) -> Vec<usize> {
    (1..=64).filter(|&i| mask & bit(i) != 0).collect()
}

impl Pattern {
    pub fn new(n: usize, excited: &[usize], measured: &[usize]) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        if n > MAX_NODES {
            return Err(Error::TooManyNodes { n, max: MAX_NODES });
        }
        let mut ex = 0u64;
        let mut me = 0u64;
        for &i in excited {
            if i == 0 || i > n {
                return Err(Error::NodeOutOfRange { node: i, n });
            }
            ex |= bit(i);
        }
        for &j in measured {
            if j == 0 || j > n {
                return Err(Error::NodeOutOfRange { node: j, n });
            }
            me |= bit(j);
        }
        Ok(Self {
            n,
            excited: ex,
            measured: me,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn excited(&self) -> Vec<usize> {
        nodes_of(self.excited)
    }

    pub fn measured(&self) -> Vec<usize> {
        nodes_of(self.measured)
    }

    pub fn is_excited(&self, node: usize) -> bool {
        (1..=self.n).contains(&node) && self.excited & bit(node) != 0
    }

    pub fn is_measured(&self, node: usize) -> bool {
        (1..=self.n).contains(&node) && self.measured & bit(node) != 0
    }

    /// `|ℬ| + |𝒞|`.
    pub fn cardinality(&self) -> usize {
        (self.excited.count_ones() + self.measured.count_ones()) as usize
    }

    pub fn is_minimal(&self) -> bool {
        let all = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        self.is_excited(1)
            && self.is_measured(self.n)
            && (self.excited | self.measured) == all
            && self.excited != self.measured
            && self.cardinality() == self.n
    }

    /// Reflect end to end and swap excitations with measurements:
    /// `ℬ' = {n-j+1 : j ∈ 𝒞}`, `𝒞' = {n-j+1 : j ∈ ℬ}`.
    pub fn mirror(&self) -> Self {
        let reflect = |mask: u64| {
            nodes_of(mask)
                .into_iter()
                .fold(0u64, |acc, j| acc | bit(self.n - j + 1))
        };
        Self {
            n: self.n,
            excited: reflect(self.measured),
            measured: reflect(self.excited),
        }
    }

    /// Modules `G_i` with `i ∈ ℬ` and `i + 1 ∈ 𝒞`.
    pub fn direct_modules(&self) -> Vec<usize> {
        (1..self.n)
            .filter(|&i| self.is_excited(i) && self.is_measured(i + 1))
            .collect()
    }

    /// Every (excited source, measured sink) pair with a forward path, `i < j`.
    pub fn paths(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.excited()
            .into_iter()
            .flat_map(move |i| self.measured().into_iter().filter(move |&j| j > i).map(move |j| (i, j)))
    }

    /// Position in the order produced by [`enumerate_minimal`].
    pub fn canonical_index(&self) -> Option<usize> {
        if !self.is_minimal() {
            return None;
        }
        Some((2..self.n).fold(0usize, |acc, node| {
            acc | (usize::from(self.is_excited(node)) << (node - 2))
        }))
    }

    /// Roman-numeral names conventionally used for the 3- and 4-node patterns.
    pub fn roman_label(&self) -> Option<&'static str> {
        let key = (self.excited(), self.measured());
        let label = match (self.n, key.0.as_slice(), key.1.as_slice()) {
            (3, [1], [2, 3]) | (4, [1], [2, 3, 4]) => "I",
            (3, [1, 2], [3]) | (4, [1, 2, 3], [4]) => "II",
            (4, [1, 2], [3, 4]) => "III",
            (4, [1, 3], [2, 4]) => "IV",
            _ => return None,
        };
        Some(label)
    }

    /// Parses the literal `B=1,2;C=3,4`. Extra `key=value` segments are ignored.
    pub fn parse(n: usize, literal: &str) -> Result<Self> {
        let fields = parse_fields(literal)?;
        let excited = fields
            .get("B")
            .ok_or_else(|| Error::Parse(format!("missing `B=` in `{literal}`")))?;
        let measured = fields
            .get("C")
            .ok_or_else(|| Error::Parse(format!("missing `C=` in `{literal}`")))?;
        let excited = parse_list::<usize>(excited)?;
        let measured = parse_list::<usize>(measured)?;
        Self::new(n, &excited, &measured)
    }
}

fn join(nodes: &[usize]) -> String {
    let mut s = String::new();
    for (k, v) in nodes.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        s.push_str(&format!("{v}"));
    }
    s
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "B={};C={}", join(&self.excited()), join(&self.measured()))
    }
}

fn parse_fields(literal: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for seg in literal.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = seg
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected `key=value`, got `{seg}`")))?;
        let key = k.trim();
        let key = match key {
            "b" => "B",
            "c" => "C",
            other => other,
        };
        out.insert(String::from(key), String::from(v.trim()));
    }
    Ok(out)
}

fn parse_list<T: core::str::FromStr>(s: &str) -> Result<Vec<T>> {
    s.trim_matches(|c| c == '{' || c == '}')
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<T>()
                .map_err(|_| Error::Parse(format!("bad list entry `{t}`")))
        })
        .collect()
}

/// All minimal patterns in canonical order: interior nodes are assigned by a
/// binary counter with node 2 as the least significant bit, a set bit meaning
/// "excited". `n = 2` yields the single pattern `({1}, {2})`.
pub fn enumerate_minimal(n: usize) -> Result<Vec<Pattern>> {
    if n < 2 {
        return Err(Error::TooFewNodes(n));
    }
    if n > MAX_ENUMERATION_NODES {
        return Err(Error::TooManyNodes {
            n,
            max: MAX_ENUMERATION_NODES,
        });
    }
    let interior = n - 2;
    let all = (1u64 << n) - 1;
    Ok((0u64..(1u64 << interior))
        .map(|code| {
            let excited = bit(1) | (code << 1);
            Pattern {
                n,
                excited,
                measured: all & !excited,
            }
        })
        .collect())
}

/// Per-node excitation and noise variances for a whole network, so any pattern
/// can pick the values of the nodes it uses.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VarianceProfile {
    sigma2: Vec<f64>,
    lambda: Vec<f64>,
}

impl VarianceProfile {
    pub fn new(sigma2: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        if sigma2.len() != lambda.len() {
            return Err(Error::Dimension("sigma2 and lambda must cover the same nodes"));
        }
        for (k, &v) in sigma2.iter().chain(lambda.iter()).enumerate() {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidVariance {
                    node: k % sigma2.len() + 1,
                    value: v,
                });
            }
        }
        Ok(Self { sigma2, lambda })
    }

    pub fn uniform(n: usize, sigma2: f64, lambda: f64) -> Result<Self> {
        Self::new(alloc::vec![sigma2; n], alloc::vec![lambda; n])
    }

    pub fn n(&self) -> usize {
        self.sigma2.len()
    }

    pub fn sigma2(&self, node: usize) -> f64 {
        self.sigma2[node - 1]
    }

    pub fn lambda(&self, node: usize) -> f64 {
        self.lambda[node - 1]
    }

    pub fn sigma2_all(&self) -> &[f64] {
        &self.sigma2
    }

    pub fn lambda_all(&self) -> &[f64] {
        &self.lambda
    }

    /// Same value on every node for each of σ² and λ.
    pub fn is_uniform(&self) -> bool {
        self.sigma2.iter().all(|&v| v == self.sigma2[0]) && self.lambda.iter().all(|&v| v == self.lambda[0])
    }

    /// Multiplies every σ² and every λ by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.sigma2.iter().map(|v| v * factor).collect(),
            self.lambda.iter().map(|v| v * factor).collect(),
        )
    }
}

/// A pattern with its variances: `σ_i²` on each excited node, `λ_j` on each
/// measured node.
#[derive(Debug, Clone, PartialEq)]
pub struct Emp {
    pattern: Pattern,
    sigma2: BTreeMap<usize, f64>,
    lambda: BTreeMap<usize, f64>,
}

fn check_variances(map: &BTreeMap<usize, f64>) -> Result<()> {
    for (&node, &v) in map {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidVariance { node, value: v });
        }
    }
    Ok(())
}

impl Emp {
    /// `sigma2` must be keyed exactly by the excited nodes and `lambda` by the
    /// measured nodes, all values positive.
    pub fn new(pattern: Pattern, sigma2: BTreeMap<usize, f64>, lambda: BTreeMap<usize, f64>) -> Result<Self> {
        if sigma2.keys().copied().collect::<Vec<_>>() != pattern.excited() {
            return Err(Error::InvalidEmp("sigma2 must be defined exactly on the excited nodes"));
        }
        if lambda.keys().copied().collect::<Vec<_>>() != pattern.measured() {
            return Err(Error::InvalidEmp(
                "lambda must be defined exactly on the measured nodes",
            ));
        }
        check_variances(&sigma2)?;
        check_variances(&lambda)?;
        Ok(Self {
            pattern,
            sigma2,
            lambda,
        })
    }

    pub fn uniform(pattern: Pattern, sigma2: f64, lambda: f64) -> Result<Self> {
        Self::new(
            pattern,
            pattern.excited().into_iter().map(|i| (i, sigma2)).collect(),
            pattern.measured().into_iter().map(|j| (j, lambda)).collect(),
        )
    }

    pub fn from_profile(pattern: Pattern, profile: &VarianceProfile) -> Result<Self> {
        if profile.n() != pattern.n() {
            return Err(Error::NodeCountMismatch {
                emp: pattern.n(),
                network: profile.n(),
            });
        }
        Self::new(
            pattern,
            pattern.excited().into_iter().map(|i| (i, profile.sigma2(i))).collect(),
            pattern.measured().into_iter().map(|j| (j, profile.lambda(j))).collect(),
        )
    }

    /// Parses `B=1,2;C=3,4` with optional `sigma2=...` and `lambda=...` lists
    /// (one value per listed node, or a single value for all of them).
    pub fn parse(n: usize, literal: &str, default_sigma2: f64, default_lambda: f64) -> Result<Self> {
        let pattern = Pattern::parse(n, literal)?;
        let fields = parse_fields(literal)?;
        let pick = |key: &str, nodes: Vec<usize>, default: f64| -> Result<BTreeMap<usize, f64>> {
            let values = match fields.get(key) {
                Some(raw) => parse_list::<f64>(raw)?,
                None => alloc::vec![default],
            };
            if values.len() == 1 {
                Ok(nodes.into_iter().map(|k| (k, values[0])).collect())
            } else if values.len() == nodes.len() {
                Ok(nodes.into_iter().zip(values).collect())
            } else {
                Err(Error::Parse(format!(
                    "`{key}` lists {} values for {} nodes",
                    values.len(),
                    nodes.len()
                )))
            }
        };
        let sigma2 = pick("sigma2", pattern.excited(), default_sigma2)?;
        let lambda = pick("lambda", pattern.measured(), default_lambda)?;
        Self::new(pattern, sigma2, lambda)
    }

    pub fn pattern(&self) -> &Pattern {
        &self.pattern
    }

    pub fn n(&self) -> usize {
        self.pattern.n()
    }

    pub fn sigma2(&self, node: usize) -> Option<f64> {
        self.sigma2.get(&node).copied()
    }

    pub fn lambda(&self, node: usize) -> Option<f64> {
        self.lambda.get(&node).copied()
    }

    pub fn sigma2_map(&self) -> &BTreeMap<usize, f64> {
        &self.sigma2
    }

    pub fn lambda_map(&self) -> &BTreeMap<usize, f64> {
        &self.lambda
    }

    /// `σ_i² / λ_j`.
    pub fn snr(&self, i: usize, j: usize) -> Option<f64> {
        Some(self.sigma2(i)? / self.lambda(j)?)
    }

    pub fn is_minimal(&self) -> bool {
        self.pattern.is_minimal()
    }

    pub fn direct_modules(&self) -> Vec<usize> {
        self.pattern.direct_modules()
    }

    /// Mirrored EMP with variances carried along so that every path keeps its
    /// signal-to-noise ratio: the path `i → j` becomes `n-j+1 → n-i+1` with the
    /// same `σ_i²/λ_j`. Uniform variances map onto themselves.
    pub fn mirror(&self) -> Self {
        let n = self.n();
        let gm = |m: &BTreeMap<usize, f64>| (m.values().map(|v| v.ln()).sum::<f64>() / m.len() as f64).exp();
        let kappa = gm(&self.sigma2) * gm(&self.lambda);
        let sigma2 = self.lambda.iter().map(|(&j, &l)| (n - j + 1, kappa / l)).collect();
        let lambda = self.sigma2.iter().map(|(&i, &s)| (n - i + 1, kappa / s)).collect();
        Self {
            pattern: self.pattern.mirror(),
            sigma2,
            lambda,
        }
    }
}

impl fmt::Display for Emp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let values = |m: &BTreeMap<usize, f64>| {
            let mut s = String::new();
            for (k, v) in m.values().enumerate() {
                if k > 0 {
                    s.push(',');
                }
                s.push_str(&format!("{v}"));
            }
            s
        };
        write!(
            f,
            "{};sigma2={};lambda={}",
            self.pattern,
            values(&self.sigma2),
            values(&self.lambda)
        )
    }
}
