//! Network description files.
//!
//! ```json
//! {
//!   "n": 4,
//!   "modules": [
//!     { "family": "first_order", "theta": [0.5, 1.0] },
//!     { "family": "first_order", "theta": [0.5, 1.0] },
//!     { "family": "first_order", "theta": [0.5, 1.0] }
//!   ],
//!   "defaults": { "sigma2": 1.0, "lambda": 0.01 }
//! }
//! ```
//!
//! `family` is one of `fir`, `first_order`, `second_order`. `defaults` may be
//! omitted (σ² = 1, λ = 0.01). An optional `profile` with per-node `sigma2`
//! and `lambda` arrays overrides the defaults for ranking and checks.

use std::path::Path;

use anyhow::{bail, Context};
use emp_core::{CascadeNetwork, Emp, Family, ParamModule, VarianceProfile};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub family: Family,
    pub theta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defaults {
    pub sigma2: f64,
    pub lambda: f64,
}

impl Default for Defaults {
    fn default() -> Self {
        Self {
            sigma2: 1.0,
            lambda: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSpec {
    pub sigma2: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub n: usize,
    pub modules: Vec<ModuleSpec>,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileSpec>,
}

impl NetworkFile {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("cannot parse network file {}", path.display()))
    }

    pub fn from_network(net: &CascadeNetwork, defaults: Defaults) -> Self {
        Self {
            n: net.n(),
            modules: net
                .modules()
                .iter()
                .map(|m| ModuleSpec {
                    family: m.family(),
                    theta: m.theta().to_vec(),
                })
                .collect(),
            defaults,
            profile: None,
        }
    }

    /// Builds the cascade. An unstable module is reported by its index.
    pub fn network(&self) -> anyhow::Result<CascadeNetwork> {
        if self.modules.len() + 1 != self.n {
            bail!(
                "network file declares n = {} but lists {} modules (expected {})",
                self.n,
                self.modules.len(),
                self.n.saturating_sub(1)
            );
        }
        let modules = self
            .modules
            .iter()
            .enumerate()
            .map(|(k, m)| {
                ParamModule::new(m.family, m.theta.clone()).map_err(|e| match e {
                    emp_core::Error::Unstable { radius } => emp_core::Error::UnstableModule { index: k + 1, radius },
                    e => e,
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .context("invalid module in network file")?;
        Ok(CascadeNetwork::new(modules)?)
    }

    pub fn variance_profile(&self) -> anyhow::Result<VarianceProfile> {
        Ok(match &self.profile {
            Some(p) => {
                if p.sigma2.len() != self.n || p.lambda.len() != self.n {
                    bail!("profile arrays must have one entry per node ({})", self.n);
                }
                VarianceProfile::new(p.sigma2.clone(), p.lambda.clone())?
            }
            None => VarianceProfile::uniform(self.n, self.defaults.sigma2, self.defaults.lambda)?,
        })
    }

    /// Parses an EMP literal; unspecified variances come from the file.
    pub fn emp(&self, literal: &str) -> anyhow::Result<Emp> {
        let emp = Emp::parse(self.n, literal, self.defaults.sigma2, self.defaults.lambda)?;
        if self.profile.is_some() && !literal.contains("sigma2") && !literal.contains("lambda") {
            return Ok(Emp::from_profile(*emp.pattern(), &self.variance_profile()?)?);
        }
        Ok(emp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"{"n": 3, "modules": [
        {"family": "first_order", "theta": [0.5, 1.0]},
        {"family": "fir", "theta": [1.0, 0.3]}]}"#;

    #[test]
    fn parses_with_defaults() {
        let f: NetworkFile = serde_json::from_str(FILE).unwrap();
        assert_eq!(f.defaults, Defaults::default());
        let net = f.network().unwrap();
        assert_eq!(net.n(), 3);
        assert_eq!(net.param_count(), 4);
        let back: NetworkFile = serde_json::from_str(&serde_json::to_string(&f).unwrap()).unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn unstable_module_is_named() {
        let f: NetworkFile = serde_json::from_str(
            r#"{"n": 3, "modules": [
            {"family": "first_order", "theta": [0.5, 1.0]},
            {"family": "first_order", "theta": [1.5, 1.0]}]}"#,
        )
        .unwrap();
        let msg = format!("{:#}", f.network().unwrap_err());
        assert!(msg.contains("G2"), "{msg}");
    }

    #[test]
    fn count_mismatch() {
        let mut f: NetworkFile = serde_json::from_str(FILE).unwrap();
        f.n = 4;
        assert!(f.network().is_err());
    }

    #[test]
    fn profile_feeds_emps() {
        let mut f: NetworkFile = serde_json::from_str(FILE).unwrap();
        f.profile = Some(ProfileSpec {
            sigma2: vec![2.0, 3.0, 4.0],
            lambda: vec![0.1, 0.2, 0.3],
        });
        let emp = f.emp("B=1;C=2,3").unwrap();
        assert_eq!(emp.sigma2(1), Some(2.0));
        assert_eq!(emp.lambda(3), Some(0.3));
        let emp = f.emp("B=1;C=2,3;lambda=0.5").unwrap();
        assert_eq!(emp.lambda(3), Some(0.5));
    }
}
