//! Shared fixtures for the criterion benchmarks.

use kamlind::{golden_mean, Complex64, DissipativeStandardMap, FourierSeries, TorusEmbedding};

/// The benchmark map: `λ(ε) = 1 + ε`, kick amplitude 0.5.
pub fn standard_map() -> DissipativeStandardMap {
    DissipativeStandardMap::linear(0.5)
}

pub fn omega() -> Vec<f64> {
    vec![golden_mean()]
}

/// Flat torus with action `ω` and drift `(1 − λ(ε)) ω`, the exact solution at `ε = 0`.
pub fn flat_start(kmax: usize, eps: f64) -> (TorusEmbedding, Vec<Complex64>) {
    let w = Complex64::new(golden_mean(), 0.0);
    (TorusEmbedding::flat(1, kmax, &[w]), vec![-w * eps])
}

/// Scalar series with coefficients `e^{−|k|/4}` times a deterministic phase.
pub fn decaying_series(kmax: usize) -> FourierSeries {
    let mut s = FourierSeries::scalar_zeros(1, kmax);
    for i in 0..s.n_modes() {
        let k = s.mode(i)[0] as f64;
        s.coeffs_mut()[i] = Complex64::from_polar((-k.abs() / 4.0).exp(), 0.7 * k);
    }
    s
}
