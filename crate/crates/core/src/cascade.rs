//! The n-node cascade `w_{k+1} = G_k(q) w_k + r_{k+1}`.
//!
//! Nodes and modules are numbered from 1 as in the usual network notation:
//! module `G_k` is the edge from node `k` to node `k + 1`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::lti::{Family, ParamModule, TransferFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeNetwork {
    modules: Vec<ParamModule>,
}

impl CascadeNetwork {
    /// A cascade with `modules.len() + 1` nodes. Every module must be stable,
    /// which is also what makes `(I - G)^{-1}` stable for a chain.
    pub fn new(modules: Vec<ParamModule>) -> Result<Self> {
        if modules.is_empty() {
            return Err(Error::TooFewNodes(modules.len() + 1));
        }
        for (k, m) in modules.iter().enumerate() {
            let tf = m.transfer_function();
            if !tf.is_stable() {
                return Err(Error::UnstableModule {
                    index: k + 1,
                    radius: tf.spectral_radius(),
                });
            }
        }
        Ok(Self { modules })
    }

    /// `n - 1` copies of the same module.
    pub fn identical(module: ParamModule, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewNodes(n));
        }
        Self::new(core::iter::repeat_n(module, n - 1).collect())
    }

    /// Node count.
    pub fn n(&self) -> usize {
        self.modules.len() + 1
    }

    pub fn modules(&self) -> &[ParamModule] {
        &self.modules
    }

    /// Module `G_k`, `1 <= k <= n - 1`.
    pub fn module(&self, k: usize) -> &ParamModule {
        &self.modules[k - 1]
    }

    /// Offset of module `k`'s first parameter in the stacked θ, modules in edge order.
    pub fn param_offset(&self, k: usize) -> usize {
        self.modules[..k - 1].iter().map(ParamModule::param_count).sum()
    }

    pub fn param_counts(&self) -> Vec<usize> {
        self.modules.iter().map(ParamModule::param_count).collect()
    }

    pub fn param_count(&self) -> usize {
        self.modules.iter().map(ParamModule::param_count).sum()
    }

    /// All module parameters stacked in edge order.
    pub fn theta(&self) -> Vec<f64> {
        self.modules.iter().flat_map(|m| m.theta().iter().copied()).collect()
    }

    pub fn structure(&self) -> Vec<(Family, usize)> {
        self.modules.iter().map(|m| (m.family(), m.param_count())).collect()
    }

    /// True when every module has the same family and parameters.
    pub fn has_identical_modules(&self) -> bool {
        let first = &self.modules[0];
        self.modules
            .iter()
            .all(|m| m.family() == first.family() && m.theta() == first.theta())
    }

    fn check_node(&self, node: usize) -> Result<()> {
        if node == 0 || node > self.n() {
            Err(Error::NodeOutOfRange { node, n: self.n() })
        } else {
            Ok(())
        }
    }

    /// `∏_{k=i}^{j-1} G_k`, the unit filter when `i == j`.
    pub fn path_gain(&self, i: usize, j: usize) -> Result<TransferFunction> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i > j {
            return Err(Error::ReversePath { from: i, to: j });
        }
        Ok((i..j).fold(TransferFunction::unit(), |acc, k| {
            acc.series(self.module(k).transfer_function())
        }))
    }

    /// `T = (I - G)^{-1}`: unit lower triangular, `T_ji = path_gain(i, j)` below
    /// the diagonal. Indexed `[j - 1][i - 1]`.
    pub fn transfer_matrix(&self) -> Vec<Vec<TransferFunction>> {
        let n = self.n();
        (1..=n)
            .map(|j| {
                (1..=n)
                    .map(|i| {
                        if i > j {
                            TransferFunction::zero()
                        } else {
                            self.path_gain(i, j).expect("nodes in range")
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn net3() -> CascadeNetwork {
        CascadeNetwork::new(vec![
            ParamModule::first_order(0.5, 1.0).unwrap(),
            ParamModule::first_order(-0.3, 2.0).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn path_gain_examples() {
        let net = net3();
        assert_eq!(net.path_gain(2, 2).unwrap(), TransferFunction::unit());
        let g12 = net
            .module(1)
            .transfer_function()
            .series(net.module(2).transfer_function());
        assert_eq!(net.path_gain(1, 3).unwrap(), g12);
    }

    #[test]
    fn reverse_path_is_domain_error() {
        assert_eq!(net3().path_gain(3, 1), Err(Error::ReversePath { from: 3, to: 1 }));
        assert!(matches!(net3().path_gain(0, 2), Err(Error::NodeOutOfRange { .. })));
    }

    #[test]
    fn transfer_matrix_two_nodes() {
        let g = ParamModule::first_order(0.5, 1.0).unwrap();
        let net = CascadeNetwork::new(vec![g.clone()]).unwrap();
        let t = net.transfer_matrix();
        assert_eq!(t[0][0], TransferFunction::unit());
        assert_eq!(t[0][1], TransferFunction::zero());
        assert_eq!(&t[1][0], g.transfer_function());
        assert_eq!(t[1][1], TransferFunction::unit());
    }

    #[test]
    fn parameter_offsets() {
        let net = CascadeNetwork::new(vec![
            ParamModule::fir(vec![1.0, 0.5, 0.2]).unwrap(),
            ParamModule::first_order(0.5, 1.0).unwrap(),
            ParamModule::second_order([1.0, 0.0, -0.5, 0.06]).unwrap(),
        ])
        .unwrap();
        assert_eq!(net.param_offset(1), 0);
        assert_eq!(net.param_offset(2), 3);
        assert_eq!(net.param_offset(3), 5);
        assert_eq!(net.param_count(), 9);
        assert_eq!(net.n(), 4);
    }

    #[test]
    fn needs_a_module() {
        assert_eq!(CascadeNetwork::new(vec![]), Err(Error::TooFewNodes(1)));
    }
}
