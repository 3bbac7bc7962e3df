//! Truncated power series in one complex variable `t = ε − ε₀`.

use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::maps::Scalar;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficients `c_0 .. c_n` of `Σ c_j t^j`, truncated after `t^n`.
///
/// Binary operations between jets of different lengths truncate to the
/// shorter one.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    coeffs: Vec<Complex64>,
}

impl Jet {
    pub fn from_coeffs(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet has at least one coefficient");
        Self { coeffs }
    }

    pub fn zeros(len: usize) -> Self {
        Self::from_coeffs(vec![ZERO; len])
    }

    pub fn constant(value: Complex64, len: usize) -> Self {
        let mut j = Self::zeros(len);
        j.coeffs[0] = value;
        j
    }

    /// The independent variable `x₀ + t`.
    pub fn variable(x0: Complex64, len: usize) -> Self {
        let mut j = Self::constant(x0, len);
        if len > 1 {
            j.coeffs[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Highest retained power.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Complex64 {
        self.coeffs.get(n).copied().unwrap_or(ZERO)
    }

    pub fn value(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn truncate(&self, len: usize) -> Self {
        let mut c = self.coeffs.clone();
        c.resize(len, ZERO);
        Self::from_coeffs(c)
    }

    /// Evaluate the polynomial at offset `t` (Horner).
    pub fn eval(&self, t: Complex64) -> Complex64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, c| acc * t + c)
    }

    /// `d/dt`, one order shorter (a length-1 jet maps to zero).
    pub fn derivative(&self) -> Self {
        if self.len() == 1 {
            return Self::zeros(1);
        }
        Self::from_coeffs(
            self.coeffs[1..]
                .iter()
                .enumerate()
                .map(|(j, c)| c * (j + 1) as f64)
                .collect(),
        )
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self::from_coeffs(self.coeffs.iter().map(|c| c * z).collect())
    }

    /// Cauchy product truncated to the shorter length.
    pub fn mul_jet(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        let mut out = vec![ZERO; len];
        for (i, a) in self.coeffs[..len].iter().enumerate() {
            if *a == ZERO {
                continue;
            }
            for (j, b) in other.coeffs[..len - i].iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Self::from_coeffs(out)
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Option<Self> {
        let a0 = self.coeffs[0];
        if a0 == ZERO {
            return None;
        }
        let inv0 = 1.0 / a0;
        let mut out = vec![ZERO; self.len()];
        out[0] = inv0;
        for n in 1..self.len() {
            let s: Complex64 = (1..=n).map(|k| self.coeffs[k] * out[n - k]).sum();
            out[n] = -s * inv0;
        }
        Some(Self::from_coeffs(out))
    }

    pub fn div_jet(&self, other: &Self) -> Option<Self> {
        Some(self.mul_jet(&other.recip()?))
    }

    /// `(sin x, cos x)` through the coupled recurrences `s' = c x'`, `c' = −s x'`.
    pub fn sin_cos_jet(&self) -> (Self, Self) {
        let len = self.len();
        let mut s = vec![ZERO; len];
        let mut c = vec![ZERO; len];
        s[0] = self.coeffs[0].sin();
        c[0] = self.coeffs[0].cos();
        for n in 1..len {
            let mut ss = ZERO;
            let mut cc = ZERO;
            for k in 1..=n {
                let kx = self.coeffs[k] * k as f64;
                ss += kx * c[n - k];
                cc -= kx * s[n - k];
            }
            s[n] = ss / n as f64;
            c[n] = cc / n as f64;
        }
        (Self::from_coeffs(s), Self::from_coeffs(c))
    }

    /// `exp x` through `e' = e x'`.
    pub fn exp(&self) -> Self {
        let len = self.len();
        let mut e = vec![ZERO; len];
        e[0] = self.coeffs[0].exp();
        for n in 1..len {
            let s: Complex64 = (1..=n).map(|k| self.coeffs[k] * k as f64 * e[n - k]).sum();
            e[n] = s / n as f64;
        }
        Self::from_coeffs(e)
    }

    pub fn powi(&self, n: u32) -> Self {
        let mut acc = Self::constant(Complex64::new(1.0, 0.0), self.len());
        for _ in 0..n {
            acc = acc.mul_jet(self);
        }
        acc
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn zip_with(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        let len = self.len().min(other.len());
        Self::from_coeffs(
            self.coeffs[..len]
                .iter()
                .zip(&other.coeffs[..len])
                .map(|(a, b)| f(*a, *b))
                .collect(),
        )
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a + b)
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        self.zip_with(&rhs, |a, b| a - b)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        self.mul_jet(&rhs)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        self.mul_jet(rhs)
    }
}

impl Scalar for Jet {
    fn constant_like(value: Complex64, like: &Self) -> Self {
        Jet::constant(value, like.len())
    }

    fn sin_cos(&self) -> (Self, Self) {
        self.sin_cos_jet()
    }

    fn scale(&self, z: Complex64) -> Self {
        Jet::scale(self, z)
    }

    fn value(&self) -> Complex64 {
        self.coeffs[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_jet(rng: &mut ChaCha8Rng, len: usize) -> Jet {
        Jet::from_coeffs(
            (0..len)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn difference_of_squares() {
        let one_plus = Jet::from_coeffs(vec![c(1.0), c(1.0), c(0.0)]);
        let one_minus = Jet::from_coeffs(vec![c(1.0), c(-1.0), c(0.0)]);
        let p = &one_plus * &one_minus;
        assert_eq!(p.coeffs(), &[c(1.0), c(0.0), c(-1.0)]);
    }

    #[test]
    fn product_matches_direct_convolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_jet(&mut rng, 9);
        let b = random_jet(&mut rng, 9);
        let p = &a * &b;
        for n in 0..9 {
            let mut direct = Complex64::new(0.0, 0.0);
            for i in 0..9 {
                for j in 0..9 {
                    if i + j == n {
                        direct += a.coeff(i) * b.coeff(j);
                    }
                }
            }
            assert!((p.coeff(n) - direct).norm() <= 1e-14);
        }
    }

    #[test]
    fn sin_cos_and_exp_series() {
        let x = Jet::variable(c(0.0), 6);
        let (s, co) = x.sin_cos_jet();
        let sin_ref = [0.0, 1.0, 0.0, -1.0 / 6.0, 0.0, 1.0 / 120.0];
        let cos_ref = [1.0, 0.0, -0.5, 0.0, 1.0 / 24.0, 0.0];
        for n in 0..6 {
            assert!((s.coeff(n) - c(sin_ref[n])).norm() < 1e-15);
            assert!((co.coeff(n) - c(cos_ref[n])).norm() < 1e-15);
        }
        let e = x.exp();
        let mut f = 1.0;
        for n in 0..6 {
            if n > 0 {
                f *= n as f64;
            }
            assert!((e.coeff(n) - c(1.0 / f)).norm() < 1e-15);
        }
    }

    #[test]
    fn reciprocal_inverts() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut a = random_jet(&mut rng, 7);
        a.coeffs_mut()[0] += c(3.0);
        let one = &a * &a.recip().unwrap();
        assert!((one.coeff(0) - c(1.0)).norm() < 1e-15);
        for n in 1..7 {
            assert!(one.coeff(n).norm() < 1e-14);
        }
        assert!(Jet::zeros(3).recip().is_none());
    }

    #[test]
    fn sin_of_sum_identity() {
        // sin(a + b) = sin a cos b + cos a sin b as jets
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_jet(&mut rng, 8);
        let b = random_jet(&mut rng, 8);
        let (sab, _) = (&a + &b).sin_cos_jet();
        let (sa, ca) = a.sin_cos_jet();
        let (sb, cb) = b.sin_cos_jet();
        let rhs = &(&sa * &cb) + &(&ca * &sb);
        for n in 0..8 {
            assert!((sab.coeff(n) - rhs.coeff(n)).norm() < 1e-12);
        }
    }
}
