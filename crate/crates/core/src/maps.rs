//! Conformally symplectic map families `f_{μ,ε}` on `T^d × R^d`.
//!
//! Every family satisfies `Df^T J Df = λ(ε) J` for the constant symplectic
//! matrix `J = [[0, I], [−I, 0]]`. Maps are written generically over
//! [`Scalar`] so that the same formulas evaluate on complex numbers and on
//! ε-jets (truncated Taylor series), which is how high ε-derivatives are
//! obtained without numerical differentiation.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::lindstedt::Jet;

/// Ring of values a map can be evaluated on.
pub trait Scalar: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> {
    /// Constant with the same truncation as `like`.
    fn constant_like(value: Complex64, like: &Self) -> Self;
    fn sin_cos(&self) -> (Self, Self);
    fn scale(&self, z: Complex64) -> Self;
    /// Constant term.
    fn value(&self) -> Complex64;
}

impl Scalar for Complex64 {
    fn constant_like(value: Complex64, _: &Self) -> Self {
        value
    }

    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn scale(&self, z: Complex64) -> Self {
        self * z
    }

    fn value(&self) -> Complex64 {
        *self
    }
}

/// `λ(ε) = 1 + α ε^a`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConformalFactor {
    pub alpha: Complex64,
    pub a: u32,
}

impl ConformalFactor {
    pub fn new(alpha: Complex64, a: u32) -> Self {
        assert!(a >= 1, "the exponent a must be at least 1");
        assert!(alpha != Complex64::new(0.0, 0.0), "alpha must be nonzero");
        Self { alpha, a }
    }

    pub fn eval<S: Scalar>(&self, eps: &S) -> S {
        let mut p = eps.clone();
        for _ in 1..self.a {
            p = p * eps.clone();
        }
        S::constant_like(Complex64::new(1.0, 0.0), eps) + p.scale(self.alpha)
    }

    pub fn value(&self, eps: Complex64) -> Complex64 {
        self.eval(&eps)
    }

    /// `λ'(ε) = a α ε^{a−1}`.
    pub fn derivative(&self, eps: Complex64) -> Complex64 {
        self.alpha * self.a as f64 * eps.powu(self.a - 1)
    }

    pub fn derivative_jet(&self, eps: &Jet) -> Jet {
        eps.powi(self.a - 1).scale(self.alpha * self.a as f64)
    }

    /// Taylor jet of `λ` at `eps0` with `len` coefficients.
    pub fn jet(&self, eps0: Complex64, len: usize) -> Jet {
        self.eval(&Jet::variable(eps0, len))
    }
}

impl Default for ConformalFactor {
    fn default() -> Self {
        Self::new(Complex64::new(1.0, 0.0), 1)
    }
}

/// A family `f_{μ,ε}` of conformally symplectic maps with `d` drift parameters.
///
/// Points are `(x, y)` with `x ∈ T^d` given as a real lift; `apply_lifted`
/// does not reduce angles, which is what torus embeddings need.
pub trait MapFamily: Sync {
    fn dim(&self) -> usize;

    fn conformal(&self) -> ConformalFactor;

    fn lambda(&self, eps: Complex64) -> Complex64 {
        self.conformal().value(eps)
    }

    fn apply_lifted<S: Scalar>(&self, x: &[S], mu: &[S], eps: &S) -> Vec<S>;

    /// `Df`, row-major `2d × 2d`.
    fn jacobian<S: Scalar>(&self, x: &[S], mu: &[S], eps: &S) -> Vec<S>;

    /// `D_μ f`, row-major `2d × d`.
    fn d_mu<S: Scalar>(&self, x: &[S], mu: &[S], eps: &S) -> Vec<S>;

    /// `D_ε f`.
    fn d_eps<S: Scalar>(&self, x: &[S], mu: &[S], eps: &S) -> Vec<S>;

    /// Evaluation on ε-jets: all ε-derivatives of `f` along jet arguments.
    fn jet_apply(&self, x: &[Jet], mu: &[Jet], eps: &Jet) -> Vec<Jet> {
        self.apply_lifted(x, mu, eps)
    }
}

/// Image of a phase point with the angle components reduced to `[0, 1)`.
pub fn apply_map<F: MapFamily>(fam: &F, x: &[Complex64], mu: &[Complex64], eps: Complex64) -> Vec<Complex64> {
    let d = fam.dim();
    let mut out = fam.apply_lifted(x, mu, &eps);
    for v in out.iter_mut().take(d) {
        v.re = v.re.rem_euclid(1.0);
    }
    out
}

/// `(Df, D_μ f)` as nalgebra matrices.
pub fn jacobians<F: MapFamily>(
    fam: &F,
    x: &[Complex64],
    mu: &[Complex64],
    eps: Complex64,
) -> (DMatrix<Complex64>, DMatrix<Complex64>) {
    let d = fam.dim();
    let df = DMatrix::from_row_slice(2 * d, 2 * d, &fam.jacobian(x, mu, &eps));
    let dmu = DMatrix::from_row_slice(2 * d, d, &fam.d_mu(x, mu, &eps));
    (df, dmu)
}

/// The constant symplectic matrix `[[0, I], [−I, 0]]`.
pub fn symplectic_j(d: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * d, 2 * d);
    for i in 0..d {
        j[(i, d + i)] = 1.0;
        j[(d + i, i)] = -1.0;
    }
    j
}

/// Max over random samples of `‖Df^T J Df − λ(ε) J‖_∞`.
///
/// Samples are drawn from a fixed seed: angles in `[0, 1)`, actions and
/// drifts in `[−1, 1]`.
pub fn verify_conformal<F: MapFamily>(fam: &F, sample_count: usize, eps: Complex64) -> f64 {
    let d = fam.dim();
    let j = symplectic_j(d).map(|v| Complex64::new(v, 0.0));
    let lam = fam.lambda(eps);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..sample_count {
        let mut x: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random_range(0.0..1.0), 0.0))
            .collect();
        x.extend((0..d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0)));
        let mu: Vec<Complex64> = (0..d)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0))
            .collect();
        let (df, _) = jacobians(fam, &x, &mu, eps);
        let defect = df.transpose() * &j * &df - &j * lam;
        let norm = defect
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        worst = worst.max(norm);
    }
    worst
}

/// `y' = λ(ε) y + μ + εκ sin(2πx)/(2π)`, `x' = x + y'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DissipativeStandardMap {
    pub kappa: f64,
    pub conformal: ConformalFactor,
}

impl DissipativeStandardMap {
    pub fn new(kappa: f64, conformal: ConformalFactor) -> Self {
        Self { kappa, conformal }
    }

    /// `λ(ε) = 1 + ε`.
    pub fn linear(kappa: f64) -> Self {
        Self::new(kappa, ConformalFactor::new(Complex64::new(1.0, 0.0), 1))
    }

    /// `λ(ε) = 1 + ε³`.
    pub fn cubic(kappa: f64) -> Self {
        Self::new(kappa, ConformalFactor::new(Complex64::new(1.0, 0.0), 3))
    }
}

const TWO_PI: Complex64 = Complex64::new(2.0 * PI, 0.0);

impl MapFamily for DissipativeStandardMap {
    fn dim(&self) -> usize {
        1
    }

    fn conformal(&self) -> ConformalFactor {
        self.conformal
    }

    fn apply_lifted<S: Scalar>(&self, x: &[S], mu: &[S], eps: &S) -> Vec<S> {
        let (s, _) = x[0].scale(TWO_PI).sin_cos();
        let kick = (eps.clone() * s).scale(Complex64::new(self.kappa / (2.0 * PI), 0.0));
        let y1 = self.conformal.eval(eps) * x[1].clone() + mu[0].clone() + kick;
        vec![x[0].clone() + y1.clone(), y1]
    }

    fn jacobian<S: Scalar>(&self, x: &[S], _mu: &[S], eps: &S) -> Vec<S> {
        let (_, c) = x[0].scale(TWO_PI).sin_cos();
        let shear = (eps.clone() * c).scale(Complex64::new(self.kappa, 0.0));
        let lam = self.conformal.eval(eps);
        let one = S::constant_like(Complex64::new(1.0, 0.0), eps);
        vec![one + shear.clone(), lam.clone(), shear, lam]
    }

    fn d_mu<S: Scalar>(&self, _x: &[S], _mu: &[S], eps: &S) -> Vec<S> {
        let one = S::constant_like(Complex64::new(1.0, 0.0), eps);
        vec![one.clone(), one]
    }

    fn d_eps<S: Scalar>(&self, x: &[S], _mu: &[S], eps: &S) -> Vec<S> {
        let (s, _) = x[0].scale(TWO_PI).sin_cos();
        let kick = s.scale(Complex64::new(self.kappa / (2.0 * PI), 0.0));
        // λ'(ε) = a α ε^{a−1}
        let a = self.conformal.a;
        let mut dl = S::constant_like(self.conformal.alpha * a as f64, eps);
        for _ in 1..a {
            dl = dl * eps.clone();
        }
        let dy = dl * x[1].clone() + kick;
        vec![dy.clone(), dy]
    }
}
