//! Double-double arithmetic: a value is the unevaluated sum `hi + lo` with
//! `|lo| <= ulp(hi) / 2`, good for about 32 significant digits.
//!
//! Used where information matrices of badly conditioned networks are formed
//! and inverted, so the covariance keeps full `f64` accuracy.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn fast_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn from_f64(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = fast_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }

    pub fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        // One Newton step from the f64 root.
        let x = self.hi.sqrt();
        let (p, e) = two_prod(x, x);
        let r = ((self.hi - p) - e + self.lo) / (2.0 * x);
        let (hi, lo) = fast_two_sum(x, r);
        Dd { hi, lo }
    }

    pub fn ln(self) -> f64 {
        self.hi.ln() + self.lo / self.hi
    }
}

impl Add for Dd {
    type Output = Dd;

    #[inline]
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = fast_two_sum(s, e + t);
        let (hi, lo) = fast_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    #[inline]
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl Neg for Dd {
    type Output = Dd;

    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Sub for Dd {
    type Output = Dd;

    #[inline]
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;

    #[inline]
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let (hi, lo) = fast_two_sum(p, e + (self.hi * b.lo + self.lo * b.hi));
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;

    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (hi, lo) = fast_two_sum(q1, q2);
        Dd { hi, lo } + Dd::from_f64(q3)
    }
}

/// Dense symmetric matrix in double-double, row-major.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DdMatrix {
    pub n: usize,
    pub data: Vec<Dd>,
}

impl DdMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Dd::ZERO; n * n],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> Dd {
        self.data[r * self.n + c]
    }

    #[inline]
    pub fn at_mut(&mut self, r: usize, c: usize) -> &mut Dd {
        &mut self.data[r * self.n + c]
    }

    /// Lower Cholesky factor, `None` unless positive definite.
    pub fn cholesky(&self) -> Option<DdMatrix> {
        let n = self.n;
        let mut l = DdMatrix::zeros(n);
        for j in 0..n {
            let mut d = self.at(j, j);
            for k in 0..j {
                let v = l.at(j, k);
                d = d - v * v;
            }
            if d.hi.is_nan() || d.hi <= 0.0 {
                return None;
            }
            let djj = d.sqrt();
            *l.at_mut(j, j) = djj;
            for i in j + 1..n {
                let mut s = self.at(i, j);
                for k in 0..j {
                    s = s - l.at(i, k) * l.at(j, k);
                }
                *l.at_mut(i, j) = s / djj;
            }
        }
        Some(l)
    }

    /// `(L Lᵀ)⁻¹` from a lower Cholesky factor `L`.
    pub fn cholesky_inverse(l: &DdMatrix) -> DdMatrix {
        let n = l.n;
        // W = L⁻¹, lower triangular.
        let mut w = DdMatrix::zeros(n);
        for c in 0..n {
            *w.at_mut(c, c) = Dd::ONE / l.at(c, c);
            for r in c + 1..n {
                let mut s = Dd::ZERO;
                for k in c..r {
                    s += l.at(r, k) * w.at(k, c);
                }
                *w.at_mut(r, c) = -(s / l.at(r, r));
            }
        }
        let mut p = DdMatrix::zeros(n);
        for r in 0..n {
            for c in 0..=r {
                let mut s = Dd::ZERO;
                for k in r..n {
                    s += w.at(k, r) * w.at(k, c);
                }
                *p.at_mut(r, c) = s;
                *p.at_mut(c, r) = s;
            }
        }
        p
    }
}

/// `b(q⁻¹) / a(q⁻¹)` applied in place, zero initial conditions; `a[0] = 1`.
pub(crate) fn filter_in_place(b: &[f64], a: &[f64], x: &mut [Dd]) {
    let input: Vec<Dd> = x.to_vec();
    for t in 0..x.len() {
        let mut v = Dd::ZERO;
        for (k, &bk) in b.iter().enumerate().take(t + 1) {
            if bk != 0.0 {
                v += input[t - k].mul_f64(bk);
            }
        }
        for (i, &ai) in a.iter().enumerate().skip(1).take(t) {
            if ai != 0.0 {
                v = v - x[t - i].mul_f64(ai);
            }
        }
        x[t] = v;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_lost_digits() {
        let third = Dd::ONE / Dd::from_f64(3.0);
        let back = third.mul_f64(3.0) - Dd::ONE;
        assert!(back.to_f64().abs() < 1e-31);
        let x = Dd::from_f64(1.0) + Dd::from_f64(1e-20);
        assert_eq!(x.hi, 1.0);
        assert_eq!(x.lo, 1e-20);
        let r = Dd::from_f64(2.0).sqrt();
        assert!((r * r - Dd::from_f64(2.0)).to_f64().abs() < 1e-30);
    }

    #[test]
    fn cholesky_inverse_of_hilbert() {
        let n = 6;
        let mut h = DdMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                *h.at_mut(r, c) = Dd::ONE / Dd::from_f64((r + c + 1) as f64);
            }
        }
        let p = DdMatrix::cholesky_inverse(&h.cholesky().unwrap());
        // Exact inverse entries; f64 inversion keeps only about 9 digits here.
        assert!(((p.at(0, 0) - Dd::from_f64(36.0)).to_f64() / 36.0).abs() < 1e-20);
        assert!(((p.at(5, 5) - Dd::from_f64(698_544.0)).to_f64() / 698_544.0).abs() < 1e-20);
    }

    #[test]
    fn filter_matches_recursion() {
        let mut x = vec![Dd::ZERO; 5];
        x[0] = Dd::ONE;
        filter_in_place(&[0.0, 1.0], &[1.0, -0.5], &mut x);
        let want = [0.0, 1.0, 0.5, 0.25, 0.125];
        for (a, b) in x.iter().zip(want) {
            assert_eq!(a.to_f64(), b);
        }
    }
}
