#![allow(dead_code)]

use emp_core::{CascadeNetwork, Family, ParamModule};
use proptest::prelude::*;

pub fn first_order() -> impl Strategy<Value = ParamModule> {
    (0.1f64..0.9, 0.5f64..2.0).prop_map(|(a, b)| ParamModule::first_order(a, b).unwrap())
}

pub fn fir() -> impl Strategy<Value = ParamModule> {
    prop::collection::vec(-2.0f64..2.0, 1..5).prop_map(|t| ParamModule::fir(t).unwrap())
}

/// Stable second-order modules from two real poles in (-0.9, 0.9), with the
/// zero and the poles kept apart so the parametrization stays identifiable.
pub fn second_order() -> impl Strategy<Value = ParamModule> {
    (0.2f64..2.0, -2.0f64..2.0, -0.9f64..0.9, -0.9f64..0.9)
        .prop_filter("near pole-zero cancellation or double pole", |&(b1, b2, p1, p2)| {
            let z = -b2 / b1;
            (z - p1).abs() > 0.3 && (z - p2).abs() > 0.3 && (p1 - p2).abs() > 0.1
        })
        .prop_map(|(b1, b2, p1, p2)| ParamModule::second_order([b1, b2, -(p1 + p2), p1 * p2]).unwrap())
}

pub fn any_module() -> impl Strategy<Value = ParamModule> {
    prop_oneof![first_order(), fir(), second_order()]
}

pub fn network(n: std::ops::RangeInclusive<usize>) -> impl Strategy<Value = CascadeNetwork> {
    n.prop_flat_map(|n| prop::collection::vec(any_module(), n - 1))
        .prop_map(|m| CascadeNetwork::new(m).unwrap())
}

pub fn identical_first_order(n: usize) -> impl Strategy<Value = CascadeNetwork> {
    first_order().prop_map(move |m| CascadeNetwork::identical(m, n).unwrap())
}

/// Direct convolution of two tap sequences.
pub fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

pub fn family_of(m: &ParamModule) -> Family {
    m.family()
}

pub fn on_circle(w: f64) -> nalgebra::Complex<f64> {
    nalgebra::Complex::new(w.cos(), w.sin())
}

pub fn cabs(z: nalgebra::Complex<f64>) -> f64 {
    z.norm_sqr().sqrt()
}
