//! Random module families and variance profiles for the Monte Carlo runs.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use core::fmt;

use rand::Rng;

use crate::emp::VarianceProfile;
use crate::error::{Error, Result};
use crate::lti::{ParamModule, TransferFunction};

/// FIR taps are kept up to the last one with magnitude at least this.
pub const BUTTERWORTH_TAP_TOL: f64 = 1e-4;
/// Cutoff range, as a fraction of the sampling rate.
pub const BUTTERWORTH_CUTOFF: (f64, f64) = (0.1, 0.4);
pub const FIRST_ORDER_A: (f64, f64) = (0.1, 0.9);
pub const FIRST_ORDER_B: (f64, f64) = (0.5, 2.0);
/// Zeros of second-order modules are drawn from `[-ZERO_RADIUS, ZERO_RADIUS]`.
pub const ZERO_RADIUS: f64 = 3.0;
/// Scenario (i): `σ² = 1`, `λ = 0.01` at every node.
pub const EQUAL_SIGMA2: f64 = 1.0;
pub const EQUAL_LAMBDA: f64 = 0.01;
/// Scenario (ii): every variance uniform on this range.
pub const RANDOM_VARIANCE: (f64, f64) = (0.001, 50.0);

/// Module distribution used to draw networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModuleFamily {
    /// Truncated impulse response of a random second-order Butterworth lowpass.
    FirButterworth,
    FirstOrder,
    SecondOrder,
}

impl fmt::Display for ModuleFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModuleFamily::FirButterworth => "fir_butterworth",
            ModuleFamily::FirstOrder => "first_order",
            ModuleFamily::SecondOrder => "second_order",
        })
    }
}

impl core::str::FromStr for ModuleFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "fir_butterworth" | "fir" | "butterworth" => Ok(ModuleFamily::FirButterworth),
            "first_order" => Ok(ModuleFamily::FirstOrder),
            "second_order" => Ok(ModuleFamily::SecondOrder),
            _ => Err(Error::Parse(alloc::format!("unknown module family `{s}`"))),
        }
    }
}

pub fn sample_module<R: Rng + ?Sized>(family: ModuleFamily, rng: &mut R) -> ParamModule {
    match family {
        ModuleFamily::FirButterworth => sample_fir_butterworth(rng),
        ModuleFamily::FirstOrder => sample_first_order(rng),
        ModuleFamily::SecondOrder => sample_second_order(rng),
    }
}

/// Second-order lowpass Butterworth, bilinear transform prewarped at the
/// cutoff. `cutoff` is in cycles per sample, `0 < cutoff < 0.5`.
pub fn butterworth_lowpass(cutoff: f64) -> Result<TransferFunction> {
    if !(cutoff > 0.0 && cutoff < 0.5) {
        return Err(Error::Dimension(
            "Butterworth cutoff must lie in (0, 0.5) cycles/sample",
        ));
    }
    let k = (PI * cutoff).tan();
    let k2 = k * k;
    let norm = 1.0 / (1.0 + SQRT_2 * k + k2);
    let b0 = k2 * norm;
    TransferFunction::new(
        alloc::vec![b0, 2.0 * b0, b0],
        alloc::vec![1.0, 2.0 * (k2 - 1.0) * norm, (1.0 - SQRT_2 * k + k2) * norm],
    )
}

/// FIR module holding the Butterworth impulse response up to its last tap
/// with `|g| >= BUTTERWORTH_TAP_TOL`.
pub fn butterworth_fir(cutoff: f64) -> Result<ParamModule> {
    let h = butterworth_lowpass(cutoff)?.impulse_response(4096, 1e-15)?;
    let last = h.taps.iter().rposition(|g| g.abs() >= BUTTERWORTH_TAP_TOL).unwrap_or(0);
    ParamModule::fir(h.taps[..=last].to_vec())
}

pub fn sample_fir_butterworth<R: Rng + ?Sized>(rng: &mut R) -> ParamModule {
    let fc = rng.random_range(BUTTERWORTH_CUTOFF.0..BUTTERWORTH_CUTOFF.1);
    butterworth_fir(fc).expect("cutoff lies inside the design range")
}

/// `θ = [a, b]` realizing `b / (q + a)`.
pub fn sample_first_order<R: Rng + ?Sized>(rng: &mut R) -> ParamModule {
    let a = rng.random_range(FIRST_ORDER_A.0..FIRST_ORDER_A.1);
    let b = rng.random_range(FIRST_ORDER_B.0..FIRST_ORDER_B.1);
    ParamModule::first_order(a, b).expect("|a| < 1")
}

/// Poles in the right half of the unit disk, either a conjugate pair
/// (probability 1/2, area-uniform) or two independent real poles in `[0, 1)`.
/// One real zero in `[-3, 3]` and unit leading numerator coefficient, so
/// `θ = [1, -z, -(p₁+p₂), p₁p₂]`.
pub fn sample_second_order<R: Rng + ?Sized>(rng: &mut R) -> ParamModule {
    loop {
        let (sum, prod) = if rng.random_bool(0.5) {
            let r = rng.random::<f64>().sqrt();
            let phi = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
            (2.0 * r * phi.cos(), r * r)
        } else {
            let p1: f64 = rng.random();
            let p2: f64 = rng.random();
            (p1 + p2, p1 * p2)
        };
        let z = rng.random_range(-ZERO_RADIUS..=ZERO_RADIUS);
        // A pole drawn within 1e-9 of the unit circle fails the stability
        // margin; draw again rather than use it.
        if let Ok(m) = ParamModule::second_order([1.0, -z, -sum, prod]) {
            return m;
        }
    }
}

/// How the node variances of a run are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum VarianceMode {
    /// Scenario (i).
    #[default]
    Equal,
    /// Scenario (ii).
    RandomUniform,
}

impl fmt::Display for VarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceMode::Equal => "equal",
            VarianceMode::RandomUniform => "random_uniform",
        })
    }
}

impl core::str::FromStr for VarianceMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "equal" | "i" => Ok(VarianceMode::Equal),
            "random_uniform" | "random" | "ii" => Ok(VarianceMode::RandomUniform),
            _ => Err(Error::Parse(alloc::format!("unknown variance mode `{s}`"))),
        }
    }
}

/// One `σ²` and one `λ` per node; each EMP uses the entries of its own nodes.
pub fn sample_profile<R: Rng + ?Sized>(mode: VarianceMode, n: usize, rng: &mut R) -> VarianceProfile {
    match mode {
        VarianceMode::Equal => VarianceProfile::uniform(n, EQUAL_SIGMA2, EQUAL_LAMBDA),
        VarianceMode::RandomUniform => {
            let mut draw = || -> Vec<f64> {
                (0..n)
                    .map(|_| rng.random_range(RANDOM_VARIANCE.0..RANDOM_VARIANCE.1))
                    .collect()
            };
            let sigma2 = draw();
            let lambda = draw();
            VarianceProfile::new(sigma2, lambda)
        }
    }
    .expect("sampled variances are positive")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lti::Family;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn butterworth_matches_recursion() {
        let g = butterworth_lowpass(0.25).unwrap();
        let (b, a) = (g.numerator().to_vec(), g.denominator().to_vec());
        // y(t) = b0 u(t) + b1 u(t-1) + b2 u(t-2) - a1 y(t-1) - a2 y(t-2)
        let mut y = alloc::vec![0.0; 40];
        for t in 0..40 {
            let u = |k: usize| if t == k { 1.0 } else { 0.0 };
            let mut v = b[0] * u(0) + b[1] * u(1) + b[2] * u(2);
            if t >= 1 {
                v -= a[1] * y[t - 1];
            }
            if t >= 2 {
                v -= a[2] * y[t - 2];
            }
            y[t] = v;
        }
        let m = butterworth_fir(0.25).unwrap();
        for (k, &tap) in m.theta().iter().enumerate() {
            assert!((tap - y[k]).abs() < 1e-14);
        }
        // unit DC gain, zero gain at Nyquist
        let dc: f64 = g.numerator().iter().sum::<f64>() / g.denominator().iter().sum::<f64>();
        assert!((dc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn butterworth_tail_is_below_tolerance() {
        for fc in [0.1, 0.17, 0.25, 0.33, 0.4] {
            let m = butterworth_fir(fc).unwrap();
            let full = butterworth_lowpass(fc).unwrap().impulse_response(4096, 1e-15).unwrap();
            let l = m.param_count();
            assert!(full.taps[l..].iter().all(|g| g.abs() < BUTTERWORTH_TAP_TOL));
            assert!(m.theta()[l - 1].abs() >= BUTTERWORTH_TAP_TOL);
        }
    }

    #[test]
    fn draws_are_deterministic_and_stable() {
        for fam in [
            ModuleFamily::FirButterworth,
            ModuleFamily::FirstOrder,
            ModuleFamily::SecondOrder,
        ] {
            let mut r1 = ChaCha8Rng::seed_from_u64(9);
            let mut r2 = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..200 {
                let a = sample_module(fam, &mut r1);
                assert_eq!(a, sample_module(fam, &mut r2));
                assert!(a.transfer_function().is_stable());
            }
        }
    }

    #[test]
    fn first_order_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mean = (0..n).map(|_| sample_first_order(&mut rng).theta()[0]).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01);
    }

    #[test]
    fn second_order_vieta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let m = sample_second_order(&mut rng);
            assert_eq!(m.family(), Family::SecondOrder);
            let th = m.theta();
            let poles = m.transfer_function().poles();
            let sum: f64 = poles.iter().map(|p| p.re).sum();
            let prod = poles[0] * poles[1];
            assert!((th[2] + sum).abs() < 1e-9);
            assert!((th[3] - prod.re).abs() < 1e-9 && prod.im.abs() < 1e-9);
            assert!(poles.iter().all(|p| p.re >= -1e-12 && p.norm_sqr() < 1.0));
            assert!(th.iter().all(|v| v.is_finite()));
            assert!(th[1].abs() <= ZERO_RADIUS);
        }
    }

    #[test]
    fn profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = sample_profile(VarianceMode::Equal, 5, &mut rng);
        assert!(p.is_uniform() && p.sigma2(3) == 1.0 && p.lambda(2) == 0.01);
        let q = sample_profile(VarianceMode::RandomUniform, 5, &mut rng);
        assert!(q
            .sigma2_all()
            .iter()
            .chain(q.lambda_all())
            .all(|&v| (0.001..50.0).contains(&v)));
    }
}
