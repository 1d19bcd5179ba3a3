//! Discrete-time SISO transfer functions in the forward-shift operator `q`.
//!
//! Polynomials are stored in descending powers of `q` and denominators are
//! kept monic, so `[1.0]` over `[1.0, 0.5]` is `1 / (q + 0.5)`. Everything that
//! needs an expectation over white noise goes through [`TransferFunction::impulse_response`].

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

/// Poles must lie strictly inside this radius for [`TransferFunction::is_stable`].
pub const DEFAULT_STABILITY_MARGIN: f64 = 1.0 - 1e-9;
pub const DEFAULT_MAX_LEN: usize = 4096;
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

/// Impulse response samples `h(0), h(1), ...`.
///
/// `converged` is false when `max_len` was hit before the tail dropped below
/// the requested tolerance; the taps are still the exact leading samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    pub taps: Vec<f64>,
    pub converged: bool,
}

impl TransferFunction {
    /// Builds `num(q) / den(q)`, normalizing the denominator to be monic.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        let den = strip_leading_zeros(den);
        if den.is_empty() {
            return Err(Error::ZeroDenominator);
        }
        let num = strip_leading_zeros(num);
        if num.is_empty() {
            return Ok(Self::zero());
        }
        if num.len() > den.len() {
            return Err(Error::Improper {
                num: num.len() - 1,
                den: den.len() - 1,
            });
        }
        let lead = den[0];
        Ok(Self {
            num: num.into_iter().map(|c| c / lead).collect(),
            den: den.into_iter().map(|c| c / lead).collect(),
        })
    }

    pub fn unit() -> Self {
        Self {
            num: vec![1.0],
            den: vec![1.0],
        }
    }

    pub fn zero() -> Self {
        Self {
            num: vec![0.0],
            den: vec![1.0],
        }
    }

    /// The pure delay `q^{-k}`.
    pub fn delay(k: usize) -> Self {
        let mut den = vec![0.0; k + 1];
        den[0] = 1.0;
        Self { num: vec![1.0], den }
    }

    pub fn numerator(&self) -> &[f64] {
        &self.num
    }

    pub fn denominator(&self) -> &[f64] {
        &self.den
    }

    /// Degree of the denominator.
    pub fn order(&self) -> usize {
        self.den.len() - 1
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(|&c| c == 0.0)
    }

    /// True when every pole sits at the origin.
    pub fn is_fir(&self) -> bool {
        self.den[1..].iter().all(|&c| c == 0.0)
    }

    /// Cascade product `self · other`. No pole-zero cancellation.
    pub fn series(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero();
        }
        Self {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
        }
    }

    pub fn scale(&self, gain: f64) -> Self {
        if gain == 0.0 {
            return Self::zero();
        }
        Self {
            num: self.num.iter().map(|c| c * gain).collect(),
            den: self.den.clone(),
        }
    }

    /// Evaluates the rational function at a complex point `z`.
    pub fn eval(&self, z: Complex<f64>) -> Complex<f64> {
        horner(&self.num, z) / horner(&self.den, z)
    }

    /// Largest pole magnitude, found by bisection on the Schur-Cohn test so
    /// no polynomial roots are computed.
    pub fn spectral_radius(&self) -> f64 {
        if self.is_fir() {
            return 0.0;
        }
        let a = &self.den[1..];
        let mut hi = 1.0 + a.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
        let mut lo = 0.0;
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if roots_within(a, mid) {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        hi
    }

    pub fn is_stable(&self) -> bool {
        self.is_stable_within(DEFAULT_STABILITY_MARGIN)
    }

    /// True iff every pole has magnitude strictly below `margin`.
    pub fn is_stable_within(&self, margin: f64) -> bool {
        self.is_fir() || roots_within(&self.den[1..], margin)
    }

    /// Poles as companion-matrix eigenvalues.
    pub fn poles(&self) -> Vec<Complex<f64>> {
        let n = self.order();
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for k in 0..n {
            companion[(0, k)] = -self.den[k + 1];
        }
        for k in 1..n {
            companion[(k, k - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().copied().collect()
    }

    /// Same numerator and denominator, both padded to `order + 1` coefficients
    /// in ascending powers of `q^{-1}`.
    pub(crate) fn shift_form(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.den.len();
        let mut b = vec![0.0; n];
        b[n - self.num.len()..].copy_from_slice(&self.num);
        (b, self.den.clone())
    }

    /// Impulse response truncated once the geometric envelope of the poles
    /// guarantees the remaining samples stay below `tail_tol`.
    ///
    /// FIR responses are returned exactly. For rational filters the recursion
    /// runs until a guard window, long enough for the envelope `ρ^k` of the
    /// slowest pole to shrink tenfold, has passed entirely below `tail_tol`;
    /// the taps end at the last sample above it.
    pub fn impulse_response(&self, max_len: usize, tail_tol: f64) -> Result<ImpulseResponse> {
        debug_assert!(max_len >= 1 && tail_tol > 0.0);
        let (b, a) = self.shift_form();
        let order = a.len() - 1;
        if self.is_fir() {
            let converged = b.len() <= max_len;
            let mut taps = b;
            taps.truncate(max_len);
            return Ok(ImpulseResponse { taps, converged });
        }
        let radius = self.spectral_radius();
        if radius >= DEFAULT_STABILITY_MARGIN {
            return Err(Error::Unstable { radius });
        }
        let decade = if radius > 0.0 {
            (0.1_f64.ln() / radius.ln()).ceil() as usize
        } else {
            1
        };
        let guard = decade.max(order).max(1);

        let mut h: Vec<f64> = Vec::with_capacity(max_len.min(1024));
        let mut last_big: Option<usize> = None;
        for k in 0..max_len {
            let mut v = if k <= order { b[k] } else { 0.0 };
            for i in 1..=order.min(k) {
                v -= a[i] * h[k - i];
            }
            h.push(v);
            if v.abs() >= tail_tol {
                last_big = Some(k);
            }
            let quiet = match last_big {
                Some(idx) => k - idx,
                None => k + 1,
            };
            if k >= order && quiet >= guard {
                h.truncate(last_big.map_or(1, |idx| idx + 1));
                return Ok(ImpulseResponse {
                    taps: h,
                    converged: true,
                });
            }
        }
        Ok(ImpulseResponse {
            taps: h,
            converged: false,
        })
    }

    /// Runs `input` through the difference equation from zero initial conditions.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let (b, a) = self.shift_form();
        let order = a.len() - 1;
        let fir = self.is_fir();
        let mut out = vec![0.0; input.len()];
        for t in 0..input.len() {
            let mut v = 0.0;
            for k in 0..=order.min(t) {
                v += b[k] * input[t - k];
            }
            if !fir {
                for k in 1..=order.min(t) {
                    v -= a[k] * out[t - k];
                }
            }
            out[t] = v;
        }
        out
    }
}

impl fmt::Display for TransferFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} / {:?}", self.num, self.den)
    }
}

fn strip_leading_zeros(mut p: Vec<f64>) -> Vec<f64> {
    let first = p.iter().position(|&c| c != 0.0).unwrap_or(p.len());
    p.drain(..first);
    p
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, &pi) in p.iter().enumerate() {
        if pi == 0.0 {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            out[i + j] += pi * qj;
        }
    }
    out
}

fn horner(p: &[f64], z: Complex<f64>) -> Complex<f64> {
    p.iter()
        .fold(Complex::new(0.0, 0.0), |acc, &c| acc * z + Complex::new(c, 0.0))
}

/// Schur-Cohn step-down test: do all roots of `z^n + a_1 z^{n-1} + ... + a_n`
/// lie strictly inside the disk of radius `margin`?
fn roots_within(a: &[f64], margin: f64) -> bool {
    if a.iter().all(|&c| c == 0.0) {
        return margin > 0.0;
    }
    if margin <= 0.0 {
        return false;
    }
    // Rescale z = margin·w so the question becomes the unit disk.
    let mut c: Vec<f64> = Vec::with_capacity(a.len() + 1);
    c.push(1.0);
    let mut s = 1.0;
    for &ak in a {
        s /= margin;
        c.push(ak * s);
    }
    let mut deg = c.len() - 1;
    while deg > 0 {
        let k = c[deg];
        if k.is_nan() || k.abs() >= 1.0 {
            return false;
        }
        let denom = 1.0 - k * k;
        let next: Vec<f64> = (0..deg).map(|i| (c[i] - k * c[deg - i]) / denom).collect();
        c = next;
        deg -= 1;
    }
    true
}

/// Module parametrizations used on the edges of a cascade.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Family {
    /// `Σ_k g_k q^{-k}`, one parameter per tap.
    Fir,
    /// `b / (q + a)` with `θ = [a, b]`.
    FirstOrder,
    /// `(θ₁ q + θ₂) / (q² + θ₃ q + θ₄)`.
    SecondOrder,
}

/// Position of a parameter inside a rational module.
#[derive(Clone, Copy)]
enum Coef {
    /// Numerator coefficient of `q^p`.
    Num(usize),
    /// Denominator coefficient of `q^p`.
    Den(usize),
}

impl Family {
    /// Fixed parameter count, `None` for FIR (any positive length).
    pub fn fixed_param_count(self) -> Option<usize> {
        match self {
            Family::Fir => None,
            Family::FirstOrder => Some(2),
            Family::SecondOrder => Some(4),
        }
    }

    fn check_count(self, theta: &[f64]) -> Result<()> {
        let ok = match self.fixed_param_count() {
            Some(k) => theta.len() == k,
            None => !theta.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::ParameterCount {
                family: self,
                expected: self.fixed_param_count().unwrap_or(1),
                got: theta.len(),
            })
        }
    }

    fn layout(self) -> &'static [Coef] {
        match self {
            Family::Fir => &[],
            Family::FirstOrder => &[Coef::Den(0), Coef::Num(0)],
            Family::SecondOrder => &[Coef::Num(1), Coef::Num(0), Coef::Den(1), Coef::Den(0)],
        }
    }

    /// Transfer function for a parameter vector. Only the count is checked.
    pub fn realize(self, theta: &[f64]) -> Result<TransferFunction> {
        self.check_count(theta)?;
        match self {
            Family::Fir => {
                let mut den = vec![0.0; theta.len()];
                den[0] = 1.0;
                TransferFunction::new(theta.to_vec(), den)
            }
            Family::FirstOrder => TransferFunction::new(vec![theta[1]], vec![1.0, theta[0]]),
            Family::SecondOrder => TransferFunction::new(vec![theta[0], theta[1]], vec![1.0, theta[2], theta[3]]),
        }
    }

    /// `∂G/∂θ_m` for every parameter, as transfer functions.
    pub fn jacobian(self, theta: &[f64]) -> Result<Vec<TransferFunction>> {
        self.check_count(theta)?;
        if self == Family::Fir {
            return Ok((0..theta.len())
                .map(|k| {
                    let mut num = vec![0.0; theta.len()];
                    num[k] = 1.0;
                    let mut den = vec![0.0; theta.len()];
                    den[0] = 1.0;
                    TransferFunction::new(num, den).expect("unit tap is proper")
                })
                .collect());
        }
        let g = self.realize(theta)?;
        let den_sq = poly_mul(&g.den, &g.den);
        self.layout()
            .iter()
            .map(|&c| match c {
                Coef::Num(p) => TransferFunction::new(monomial(p), g.den.clone()),
                Coef::Den(p) => {
                    let shifted = poly_mul(&monomial(p), &g.num);
                    TransferFunction::new(shifted.iter().map(|c| -c).collect(), den_sq.clone())
                }
            })
            .collect()
    }
}

impl Family {
    /// Every Jacobian entry as a product of filters whose coefficients are
    /// taken from `θ` without rounding: `q^p / D` for numerator parameters and
    /// `(-q^p N / D) · (1 / D)` for denominator parameters.
    pub(crate) fn jacobian_factors(self, theta: &[f64]) -> Result<Vec<Vec<TransferFunction>>> {
        if self == Family::Fir {
            return Ok(self.jacobian(theta)?.into_iter().map(|tf| vec![tf]).collect());
        }
        let g = self.realize(theta)?;
        self.layout()
            .iter()
            .map(|&c| match c {
                Coef::Num(p) => Ok(vec![TransferFunction::new(monomial(p), g.den.clone())?]),
                Coef::Den(p) => {
                    let shifted = poly_mul(&monomial(p), &g.num);
                    Ok(vec![
                        TransferFunction::new(shifted.iter().map(|c| -c).collect(), g.den.clone())?,
                        TransferFunction::new(vec![1.0], g.den.clone())?,
                    ])
                }
            })
            .collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Fir => "fir",
            Family::FirstOrder => "first_order",
            Family::SecondOrder => "second_order",
        })
    }
}

impl core::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fir" => Ok(Family::Fir),
            "first_order" | "first" => Ok(Family::FirstOrder),
            "second_order" | "second" => Ok(Family::SecondOrder),
            _ => Err(Error::Parse(alloc::format!("unknown module family `{s}`"))),
        }
    }
}

/// `q^p` in descending coefficient order.
fn monomial(p: usize) -> Vec<f64> {
    let mut m = vec![0.0; p + 1];
    m[0] = 1.0;
    m
}

/// A stable, parametrized module `G(q, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamModule {
    family: Family,
    theta: Vec<f64>,
    tf: TransferFunction,
}

impl ParamModule {
    /// Validates the parameter count and rejects unstable realizations.
    pub fn new(family: Family, theta: Vec<f64>) -> Result<Self> {
        let tf = family.realize(&theta)?;
        if !tf.is_stable() {
            return Err(Error::Unstable {
                radius: tf.spectral_radius(),
            });
        }
        Ok(Self { family, theta, tf })
    }

    pub fn fir(taps: Vec<f64>) -> Result<Self> {
        Self::new(Family::Fir, taps)
    }

    pub fn first_order(a: f64, b: f64) -> Result<Self> {
        Self::new(Family::FirstOrder, vec![a, b])
    }

    pub fn second_order(theta: [f64; 4]) -> Result<Self> {
        Self::new(Family::SecondOrder, theta.to_vec())
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn param_count(&self) -> usize {
        self.theta.len()
    }

    pub fn transfer_function(&self) -> &TransferFunction {
        &self.tf
    }

    pub fn realize(&self) -> TransferFunction {
        self.tf.clone()
    }

    pub(crate) fn jacobian_factors(&self) -> Vec<Vec<TransferFunction>> {
        self.family
            .jacobian_factors(&self.theta)
            .expect("parameter count checked at construction")
    }

    pub fn jacobian(&self) -> Vec<TransferFunction> {
        self.family
            .jacobian(&self.theta)
            .expect("parameter count validated at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tf(num: &[f64], den: &[f64]) -> TransferFunction {
        TransferFunction::new(num.to_vec(), den.to_vec()).unwrap()
    }

    #[test]
    fn normalizes_denominator() {
        let g = tf(&[2.0], &[2.0, 1.0]);
        assert_eq!(g.numerator(), &[1.0]);
        assert_eq!(g.denominator(), &[1.0, 0.5]);
    }

    #[test]
    fn rejects_improper_and_zero_denominator() {
        assert!(matches!(
            TransferFunction::new(vec![1.0, 0.0, 0.0], vec![1.0, 0.5]),
            Err(Error::Improper { num: 2, den: 1 })
        ));
        assert_eq!(
            TransferFunction::new(vec![1.0], vec![0.0, 0.0]),
            Err(Error::ZeroDenominator)
        );
    }

    #[test]
    fn all_zero_numerator_is_the_zero_filter() {
        let g = tf(&[0.0, 0.0], &[1.0, 0.3]);
        assert_eq!(g, TransferFunction::zero());
        assert!(g.is_zero());
    }

    #[test]
    fn realize_families() {
        let g = Family::FirstOrder.realize(&[0.5, 1.0]).unwrap();
        assert_eq!(g.numerator(), &[1.0]);
        assert_eq!(g.denominator(), &[1.0, 0.5]);

        let g = Family::Fir.realize(&[1.0, -0.3]).unwrap();
        assert_eq!(g.numerator(), &[1.0, -0.3]);
        assert_eq!(g.denominator(), &[1.0, 0.0]);

        let g = Family::SecondOrder.realize(&[1.0, 0.0, -0.5, 0.06]).unwrap();
        assert_eq!(g.numerator(), &[1.0, 0.0]);
        let mut poles: Vec<f64> = g.poles().iter().map(|p| p.re).collect();
        poles.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((poles[0] - 0.2).abs() < 1e-12 && (poles[1] - 0.3).abs() < 1e-12);
    }

    #[test]
    fn wrong_parameter_count_is_structural_error() {
        assert!(matches!(
            Family::FirstOrder.realize(&[0.5]),
            Err(Error::ParameterCount {
                expected: 2,
                got: 1,
                ..
            })
        ));
        assert!(matches!(
            Family::SecondOrder.realize(&[0.5; 3]),
            Err(Error::ParameterCount { expected: 4, .. })
        ));
        assert!(Family::Fir.realize(&[]).is_err());
    }

    #[test]
    fn unstable_module_rejected() {
        assert!(matches!(
            ParamModule::first_order(-1.2, 1.0),
            Err(Error::Unstable { .. })
        ));
    }

    #[test]
    fn stability_examples() {
        assert!(tf(&[1.0], &[1.0, 0.5]).is_stable());
        assert!(!tf(&[1.0], &[1.0, -1.0]).is_stable());
        // poles 0.2 ± 0.3i: (q - 0.2)^2 + 0.09
        let g = tf(&[1.0], &[1.0, -0.4, 0.13]);
        assert!(g.is_stable());
        assert!((g.spectral_radius() - 0.13_f64.sqrt()).abs() < 1e-12);
        assert!(!g.is_stable_within(0.3));
    }

    #[test]
    fn spectral_radius_of_repeated_pole() {
        let p = tf(&[1.0], &[1.0, 0.9]);
        let mut g = p.clone();
        for _ in 0..5 {
            g = g.series(&p);
        }
        // a sixfold root moves by about eps^(1/6) under rounding
        assert!((g.spectral_radius() - 0.9).abs() < 1e-2);
        assert!(g.is_stable());
    }

    #[test]
    fn impulse_response_examples() {
        let h = tf(&[1.0], &[1.0, 0.5]).impulse_response(64, 1e-12).unwrap();
        assert!(h.converged);
        assert_eq!(&h.taps[..5], &[0.0, 1.0, -0.5, 0.25, -0.125]);

        let h = tf(&[1.0, -0.3], &[1.0, 0.0]).impulse_response(64, 1e-12).unwrap();
        assert_eq!(h.taps, vec![1.0, -0.3]);
        assert!(h.converged);
    }

    #[test]
    fn impulse_response_rejects_unstable() {
        let g = tf(&[1.0], &[1.0, -1.0]);
        assert!(matches!(g.impulse_response(100, 1e-12), Err(Error::Unstable { .. })));
    }

    #[test]
    fn impulse_response_flags_non_convergence() {
        let h = tf(&[1.0], &[1.0, -0.99]).impulse_response(50, 1e-12).unwrap();
        assert!(!h.converged);
        assert_eq!(h.taps.len(), 50);
    }

    #[test]
    fn first_order_jacobian_quotient_rule() {
        let j = Family::FirstOrder.jacobian(&[0.5, 2.0]).unwrap();
        // ∂/∂a = -b/(q+a)^2
        assert_eq!(j[0].numerator(), &[-2.0]);
        assert_eq!(j[0].denominator(), &[1.0, 1.0, 0.25]);
        // ∂/∂b = 1/(q+a)
        assert_eq!(j[1].numerator(), &[1.0]);
        assert_eq!(j[1].denominator(), &[1.0, 0.5]);
    }

    #[test]
    fn fir_jacobian_is_delays() {
        let j = Family::Fir.jacobian(&[0.7, 0.2]).unwrap();
        let h0 = j[0].impulse_response(8, 1e-12).unwrap().taps;
        let h1 = j[1].impulse_response(8, 1e-12).unwrap().taps;
        assert_eq!(h0, vec![1.0, 0.0]);
        assert_eq!(h1, vec![0.0, 1.0]);
    }

    #[test]
    fn series_identity_and_square() {
        let g = tf(&[1.0], &[1.0, 0.5]);
        assert_eq!(g.series(&TransferFunction::unit()), g);
        let sq = g.series(&g);
        assert_eq!(sq.denominator(), &[1.0, 1.0, 0.25]);
        assert_eq!(sq.numerator(), &[1.0]);
    }

    #[test]
    fn filter_matches_impulse_response() {
        let g = tf(&[0.3, 1.0], &[1.0, -0.4, 0.13]);
        let mut impulse = vec![0.0; 40];
        impulse[0] = 1.0;
        let out = g.filter(&impulse);
        let h = g.impulse_response(40, 1e-30).unwrap().taps;
        for (a, b) in out.iter().zip(h.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn eval_matches_polynomials() {
        let g = tf(&[1.0], &[1.0, 0.5]);
        let v = g.eval(Complex::new(1.0, 0.0));
        assert!((v.re - 1.0 / 1.5).abs() < 1e-15 && v.im.abs() < 1e-15);
    }
}
