//! Finite-scan estimates of the small-divisor constants
//!
//! ```text
//! ν(ω; τ)    = sup_{k≠0} |e^{2πik·ω} − 1|^{-1} |k|^{-τ}
//! ν(λ; ω, τ) = sup_{k≠0} |e^{2πik·ω} − λ|^{-1} |k|^{-τ}
//! ```
//!
//! and membership in the good set `{ε : ν(λ(ε); ω, τ) |λ(ε) − 1|^{N+1} ≤ A}`.
//! Every estimate carries the scan bound it was computed with.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{KamError, Result};

/// Divisors below this are treated as exact zeros.
pub const ZERO_DIVISOR: f64 = 1e-300;

/// Divisors at rounding level relative to `|λ|` are also exact zeros: a
/// `λ` that is a root of unity times `e^{2πik·ω}` in exact arithmetic
/// only comes within a few ulps of it in floating point.
fn is_zero_divisor(div: f64, lambda: Complex64) -> bool {
    div < ZERO_DIVISOR.max(4.0 * f64::EPSILON * (1.0 + lambda.norm()))
}

/// Inverse golden mean `(√5 − 1)/2`.
pub fn golden_mean() -> f64 {
    (5f64.sqrt() - 1.0) / 2.0
}

/// Running supremum over a finite `k` scan.
#[derive(Clone, Debug, PartialEq)]
pub struct NuEstimate {
    pub value: f64,
    pub infinite: bool,
    /// Maximizing `k` (the first zero divisor when `infinite`).
    pub argmax: Vec<i64>,
    pub k_scan: usize,
}

impl NuEstimate {
    /// `+∞` when flagged infinite.
    pub fn as_f64(&self) -> f64 {
        if self.infinite {
            f64::INFINITY
        } else {
            self.value
        }
    }
}

/// One row of a divisor trace.
#[derive(Clone, Debug, PartialEq)]
pub struct DivisorSample {
    pub k: Vec<i64>,
    pub divisor: f64,
    pub running_sup: f64,
}

/// A rotation vector with its cached `ν(ω; τ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Frequency {
    pub omega: Vec<f64>,
    pub tau: f64,
    pub nu_omega_est: NuEstimate,
    pub k_scan: usize,
}

impl Frequency {
    pub fn new(omega: Vec<f64>, tau: f64, k_scan: usize) -> Result<Self> {
        if omega.is_empty() || !(tau > 0.0) || k_scan == 0 {
            return Err(KamError::InvalidArgument(
                "frequency needs d >= 1, tau > 0 and k_scan >= 1".into(),
            ));
        }
        let nu_omega_est = nu_omega(&omega, tau, k_scan);
        Ok(Self {
            omega,
            tau,
            nu_omega_est,
            k_scan,
        })
    }

    pub fn golden(tau: f64, k_scan: usize) -> Result<Self> {
        Self::new(vec![golden_mean()], tau, k_scan)
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }
}

/// Parameters of the good set `G(A; ω, τ, N) ∩ {|ε| ≤ r0}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GoodSetParams {
    pub a: f64,
    pub n: usize,
    pub tau: f64,
    pub r0: f64,
}

impl GoodSetParams {
    pub fn new(a: f64, n: usize, tau: f64, r0: f64) -> Result<Self> {
        if !(a > 0.0) || !(r0 > 0.0) || !(tau > 0.0) {
            return Err(KamError::InvalidArgument(format!(
                "good set needs A > 0, r0 > 0, tau > 0 (got A={a}, r0={r0}, tau={tau})"
            )));
        }
        Ok(Self { a, n, tau, r0 })
    }
}

/// Outcome of a good-set membership test.
#[derive(Clone, Debug, PartialEq)]
pub struct GoodSetWitness {
    pub inside: bool,
    pub lambda: Complex64,
    /// `ν |λ − 1|^{N+1}` (infinite when ν is).
    pub value: f64,
    pub nu: NuEstimate,
}

/// `k·ω mod 1` in `[−1/2, 1/2)`, with the product error compensated so that
/// large `|k|` keep full relative accuracy.
pub fn phase_mod1(k: &[i64], omega: &[f64]) -> f64 {
    let mut hi = 0.0f64;
    let mut lo = 0.0f64;
    for (&ki, &w) in k.iter().zip(omega) {
        let kf = ki as f64;
        let p = kf * w;
        let e = kf.mul_add(w, -p);
        let r = p - p.round();
        let s = hi + r;
        lo += (hi - s) + r + e;
        hi = s - s.round();
    }
    let t = hi + lo;
    t - t.round()
}

/// `|e^{2πik·ω} − λ|`.
pub fn divisor(k: &[i64], omega: &[f64], lambda: Complex64) -> f64 {
    let phi = phase_mod1(k, omega);
    if lambda == Complex64::new(1.0, 0.0) {
        return 2.0 * (PI * phi).sin().abs();
    }
    let z = Complex64::from_polar(1.0, 2.0 * PI * phi);
    (z - lambda).norm()
}

/// Call `f` on every integer vector with `|k|_1 = j`, `j >= 1`, in a fixed order.
pub fn for_each_shell(d: usize, j: usize, f: &mut impl FnMut(&[i64])) {
    fn rec(k: &mut Vec<i64>, axis: usize, remaining: i64, f: &mut impl FnMut(&[i64])) {
        let d = k.len();
        if axis == d - 1 {
            if remaining == 0 {
                k[axis] = 0;
                f(k);
            } else {
                k[axis] = remaining;
                f(k);
                k[axis] = -remaining;
                f(k);
            }
            return;
        }
        for a in -remaining..=remaining {
            k[axis] = a;
            rec(k, axis + 1, remaining - a.abs(), f);
        }
    }
    let mut k = vec![0i64; d];
    rec(&mut k, 0, j as i64, f);
}

fn scan(
    omega: &[f64],
    lambda: Complex64,
    tau: f64,
    k_scan: usize,
    mut trace: Option<&mut Vec<DivisorSample>>,
) -> NuEstimate {
    let d = omega.len();
    let mut best = NuEstimate {
        value: 0.0,
        infinite: false,
        argmax: vec![0; d],
        k_scan,
    };
    for j in 1..=k_scan {
        let weight = (j as f64).powf(-tau);
        for_each_shell(d, j, &mut |k| {
            if best.infinite {
                return;
            }
            let div = divisor(k, omega, lambda);
            if is_zero_divisor(div, lambda) {
                best.infinite = true;
                best.argmax = k.to_vec();
            } else {
                let v = weight / div;
                if v > best.value {
                    best.value = v;
                    best.argmax = k.to_vec();
                }
            }
            if let Some(t) = trace.as_deref_mut() {
                t.push(DivisorSample {
                    k: k.to_vec(),
                    divisor: div,
                    running_sup: if best.infinite { f64::INFINITY } else { best.value },
                });
            }
        });
        if best.infinite {
            break;
        }
    }
    best
}

/// `ν(ω; τ)` over `0 < |k|_1 <= k_scan`.
pub fn nu_omega(omega: &[f64], tau: f64, k_scan: usize) -> NuEstimate {
    scan(omega, Complex64::new(1.0, 0.0), tau, k_scan, None)
}

/// `ν(λ; ω, τ)` over `0 < |k|_1 <= k_scan`.
pub fn nu_lambda(lambda: Complex64, omega: &[f64], tau: f64, k_scan: usize) -> NuEstimate {
    scan(omega, lambda, tau, k_scan, None)
}

/// Every `(k, divisor, running sup)` visited by the `ν(λ; ω, τ)` scan.
pub fn divisor_trace(lambda: Complex64, omega: &[f64], tau: f64, k_scan: usize) -> Vec<DivisorSample> {
    let mut t = Vec::new();
    scan(omega, lambda, tau, k_scan, Some(&mut t));
    t
}

/// Whether `ν(λ(ε)) |λ(ε) − 1|^{N+1} <= A` at the given scan bound.
pub fn in_good_set(
    eps: Complex64,
    params: &GoodSetParams,
    family_lambda: impl Fn(Complex64) -> Complex64,
    omega: &[f64],
    k_scan: usize,
) -> GoodSetWitness {
    let lambda = family_lambda(eps);
    let factor = (lambda - 1.0).norm().powi(params.n as i32 + 1);
    if factor == 0.0 {
        // λ = 1: the divisor constant of ω alone matters, multiplied by zero
        let nu = nu_omega(omega, params.tau, k_scan);
        return GoodSetWitness {
            inside: !nu.infinite,
            lambda,
            value: if nu.infinite { f64::INFINITY } else { 0.0 },
            nu,
        };
    }
    let nu = nu_lambda(lambda, omega, params.tau, k_scan);
    let value = if nu.infinite { f64::INFINITY } else { nu.value * factor };
    GoodSetWitness {
        inside: value <= params.a,
        lambda,
        value,
        nu,
    }
}
