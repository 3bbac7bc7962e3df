//! Truncated Fourier series on complex strips of the torus.
//!
//! A [`FourierSeries`] stores the coefficients `c_k`, `|k_i| <= kmax`, of a
//! scalar, vector or matrix valued function
//!
//! ```text
//! f(θ) = Σ_k c_k e^{2πi k·θ},   θ ∈ T^d_ρ = { Re θ ∈ T^d, |Im θ_j| <= ρ }.
//! ```
//!
//! Sizes on the strip are measured with the weighted ℓ¹ majorant
//! `Σ_k |c_k| e^{2πρ|k|}` (with `|k| = |k_1| + ... + |k_d|`), which bounds the
//! supremum over the strip and is submultiplicative. Matrix-valued series use
//! the induced ∞-norm of the matrix of entrywise majorants.

mod grid;
pub mod io;

pub(crate) use grid::{bin_of, check_resolution, fft_nd};
pub use grid::{oversampled_len, GridLayout, GridValues};

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use crate::diophantine::phase_mod1;
use crate::error::{KamError, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Half-width of the complex strip on which analytic norms are measured.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct StripNorm {
    rho: f64,
}

impl StripNorm {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho >= 0.0) || !rho.is_finite() {
            return Err(KamError::InvalidArgument(format!(
                "strip width must be finite and >= 0, got {rho}"
            )));
        }
        Ok(Self { rho })
    }

    /// The real torus (`ρ = 0`), where the majorant is the ℓ¹ coefficient norm.
    pub const fn torus() -> Self {
        Self { rho: 0.0 }
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Weight `e^{2πρ|k|}` of a mode with ℓ¹ size `k1`.
    pub fn weight(&self, k1: i64) -> f64 {
        (2.0 * PI * self.rho * k1 as f64).exp()
    }
}

/// Truncated multivariate Fourier series with uniform matrix value shape.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierSeries {
    dim: usize,
    kmax: usize,
    rows: usize,
    cols: usize,
    /// `coeffs[entry * n_modes + mode]`
    coeffs: Vec<Complex64>,
}

impl FourierSeries {
    pub fn zeros(dim: usize, kmax: usize, rows: usize, cols: usize) -> Self {
        assert!(dim >= 1, "torus dimension must be positive");
        assert!(rows >= 1 && cols >= 1, "value shape must be non-empty");
        let n_modes = (2 * kmax + 1).pow(dim as u32);
        Self {
            dim,
            kmax,
            rows,
            cols,
            coeffs: vec![ZERO; rows * cols * n_modes],
        }
    }

    pub fn scalar_zeros(dim: usize, kmax: usize) -> Self {
        Self::zeros(dim, kmax, 1, 1)
    }

    /// Constant series whose average is the row-major matrix `value`.
    pub fn constant(dim: usize, kmax: usize, rows: usize, cols: usize, value: &[Complex64]) -> Self {
        assert_eq!(value.len(), rows * cols);
        let mut s = Self::zeros(dim, kmax, rows, cols);
        let zero = s.zero_mode_index();
        for (e, v) in value.iter().enumerate() {
            let nm = s.n_modes();
            s.coeffs[e * nm + zero] = *v;
        }
        s
    }

    /// Scalar series from `(k, c_k)` pairs; modes outside the cutoff are rejected.
    pub fn from_modes(dim: usize, kmax: usize, modes: &[(Vec<i64>, Complex64)]) -> Result<Self> {
        let mut s = Self::scalar_zeros(dim, kmax);
        for (k, c) in modes {
            let idx = s
                .mode_index(k)
                .ok_or_else(|| KamError::InvalidArgument(format!("mode {k:?} outside cutoff {kmax}")))?;
            s.coeffs[idx] += *c;
        }
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kmax(&self) -> usize {
        self.kmax
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn n_modes(&self) -> usize {
        (2 * self.kmax + 1).pow(self.dim as u32)
    }

    pub fn zero_mode_index(&self) -> usize {
        let side = 2 * self.kmax + 1;
        (0..self.dim).map(|i| self.kmax * side.pow(i as u32)).sum()
    }

    /// Flat mode index of `k`, or `None` outside the cutoff.
    pub fn mode_index(&self, k: &[i64]) -> Option<usize> {
        if k.len() != self.dim {
            return None;
        }
        let side = 2 * self.kmax + 1;
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &ki in k {
            if ki.unsigned_abs() as usize > self.kmax {
                return None;
            }
            idx += (ki + self.kmax as i64) as usize * stride;
            stride *= side;
        }
        Some(idx)
    }

    /// Integer vector of a flat mode index.
    pub fn mode(&self, mut idx: usize) -> Vec<i64> {
        let side = 2 * self.kmax + 1;
        let mut k = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            k.push((idx % side) as i64 - self.kmax as i64);
            idx /= side;
        }
        k
    }

    /// All mode vectors in flat-index order.
    pub fn modes(&self) -> Vec<Vec<i64>> {
        (0..self.n_modes()).map(|i| self.mode(i)).collect()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient slice of one matrix entry, indexed by flat mode.
    pub fn entry_coeffs(&self, row: usize, col: usize) -> &[Complex64] {
        let nm = self.n_modes();
        let e = row * self.cols + col;
        &self.coeffs[e * nm..(e + 1) * nm]
    }

    pub fn entry_coeffs_mut(&mut self, row: usize, col: usize) -> &mut [Complex64] {
        let nm = self.n_modes();
        let e = row * self.cols + col;
        &mut self.coeffs[e * nm..(e + 1) * nm]
    }

    /// Coefficient of mode `k` in entry `(row, col)`; zero outside the cutoff.
    pub fn get(&self, k: &[i64], row: usize, col: usize) -> Complex64 {
        match self.mode_index(k) {
            Some(i) => self.entry_coeffs(row, col)[i],
            None => ZERO,
        }
    }

    pub fn set(&mut self, k: &[i64], row: usize, col: usize, value: Complex64) -> Result<()> {
        let i = self
            .mode_index(k)
            .ok_or_else(|| KamError::InvalidArgument(format!("mode {k:?} outside cutoff {}", self.kmax)))?;
        self.entry_coeffs_mut(row, col)[i] = value;
        Ok(())
    }

    /// Scalar series holding entry `(row, col)`.
    pub fn entry(&self, row: usize, col: usize) -> Self {
        let mut s = Self::scalar_zeros(self.dim, self.kmax);
        s.coeffs.copy_from_slice(self.entry_coeffs(row, col));
        s
    }

    /// Assemble a matrix series from row-major scalar entries.
    pub fn from_entries(rows: usize, cols: usize, entries: &[FourierSeries]) -> Result<Self> {
        if entries.len() != rows * cols || entries.is_empty() {
            return Err(KamError::ShapeMismatch {
                expected: format!("{} entries", rows * cols),
                found: format!("{}", entries.len()),
            });
        }
        let (dim, kmax) = (entries[0].dim, entries[0].kmax);
        let mut s = Self::zeros(dim, kmax, rows, cols);
        let nm = s.n_modes();
        for (e, x) in entries.iter().enumerate() {
            if x.dim != dim || x.kmax != kmax || x.shape() != (1, 1) {
                return Err(KamError::ShapeMismatch {
                    expected: format!("scalar series d={dim} kmax={kmax}"),
                    found: format!("d={} kmax={} shape={:?}", x.dim, x.kmax, x.shape()),
                });
            }
            s.coeffs[e * nm..(e + 1) * nm].copy_from_slice(&x.coeffs);
        }
        Ok(s)
    }

    /// Sub-block of rows `r0..r1` and columns `c0..c1`.
    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        let mut s = Self::zeros(self.dim, self.kmax, r1 - r0, c1 - c0);
        for r in r0..r1 {
            for c in c0..c1 {
                s.entry_coeffs_mut(r - r0, c - c0)
                    .copy_from_slice(self.entry_coeffs(r, c));
            }
        }
        s
    }

    /// Stack `blocks` vertically (all with equal column count).
    pub fn vstack(blocks: &[&FourierSeries]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| KamError::InvalidArgument("empty stack".into()))?;
        let rows: usize = blocks.iter().map(|b| b.rows).sum();
        let mut s = Self::zeros(first.dim, first.kmax, rows, first.cols);
        let mut r = 0;
        for b in blocks {
            first.check_compatible(b)?;
            if b.cols != first.cols {
                return Err(KamError::ShapeMismatch {
                    expected: format!("{} columns", first.cols),
                    found: format!("{} columns", b.cols),
                });
            }
            for br in 0..b.rows {
                for c in 0..b.cols {
                    s.entry_coeffs_mut(r + br, c).copy_from_slice(b.entry_coeffs(br, c));
                }
            }
            r += b.rows;
        }
        Ok(s)
    }

    /// Stack `blocks` horizontally (all with equal row count).
    pub fn hstack(blocks: &[&FourierSeries]) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| KamError::InvalidArgument("empty stack".into()))?;
        let cols: usize = blocks.iter().map(|b| b.cols).sum();
        let mut s = Self::zeros(first.dim, first.kmax, first.rows, cols);
        let mut c = 0;
        for b in blocks {
            first.check_compatible(b)?;
            if b.rows != first.rows {
                return Err(KamError::ShapeMismatch {
                    expected: format!("{} rows", first.rows),
                    found: format!("{} rows", b.rows),
                });
            }
            for r in 0..b.rows {
                for bc in 0..b.cols {
                    s.entry_coeffs_mut(r, c + bc).copy_from_slice(b.entry_coeffs(r, bc));
                }
            }
            c += b.cols;
        }
        Ok(s)
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim || self.kmax != other.kmax {
            return Err(KamError::ShapeMismatch {
                expected: format!("d={} kmax={}", self.dim, self.kmax),
                found: format!("d={} kmax={}", other.dim, other.kmax),
            });
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        if self.shape() != other.shape() {
            return Err(KamError::ShapeMismatch {
                expected: format!("{:?}", self.shape()),
                found: format!("{:?}", other.shape()),
            });
        }
        Ok(())
    }

    /// Evaluate `Σ_k c_k e^{2πi k·θ}` at a complex angle; returns the row-major value.
    pub fn eval(&self, theta: &[Complex64]) -> Result<Vec<Complex64>> {
        if theta.len() != self.dim {
            return Err(KamError::ShapeMismatch {
                expected: format!("angle of length {}", self.dim),
                found: format!("length {}", theta.len()),
            });
        }
        let nm = self.n_modes();
        let phases: Vec<Complex64> = (0..nm)
            .map(|i| {
                let k = self.mode(i);
                let arg: Complex64 = k.iter().zip(theta).map(|(&ki, &t)| t * ki as f64).sum();
                (Complex64::i() * 2.0 * PI * arg).exp()
            })
            .collect();
        Ok((0..self.rows * self.cols)
            .map(|e| {
                self.coeffs[e * nm..(e + 1) * nm]
                    .iter()
                    .zip(&phases)
                    .map(|(c, p)| c * p)
                    .sum()
            })
            .collect())
    }

    /// Evaluate a scalar series; errors if the value shape is not 1×1.
    pub fn eval_scalar(&self, theta: &[Complex64]) -> Result<Complex64> {
        if self.shape() != (1, 1) {
            return Err(KamError::ShapeMismatch {
                expected: "scalar series".into(),
                found: format!("{:?}", self.shape()),
            });
        }
        Ok(self.eval(theta)?[0])
    }

    /// Composition with the rotation `θ ↦ θ + ω`, with `k·ω mod 1` compensated.
    pub fn shift(&self, omega: &[f64]) -> Self {
        assert_eq!(omega.len(), self.dim, "shift vector length");
        let mults: Vec<Complex64> = (0..self.n_modes())
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * phase_mod1(&self.mode(i), omega)))
            .collect();
        self.apply_multipliers(&mults)
    }

    /// Composition with a complex translation `θ ↦ θ + σ`.
    pub fn shift_complex(&self, sigma: &[Complex64]) -> Self {
        assert_eq!(sigma.len(), self.dim, "shift vector length");
        let mults: Vec<Complex64> = (0..self.n_modes())
            .map(|i| {
                let k = self.mode(i);
                let arg: Complex64 = k.iter().zip(sigma).map(|(&ki, &s)| s * ki as f64).sum();
                (Complex64::i() * 2.0 * PI * arg).exp()
            })
            .collect();
        self.apply_multipliers(&mults)
    }

    fn apply_multipliers(&self, mults: &[Complex64]) -> Self {
        let nm = self.n_modes();
        let mut out = self.clone();
        for e in 0..self.rows * self.cols {
            for (c, m) in out.coeffs[e * nm..(e + 1) * nm].iter_mut().zip(mults) {
                *c *= m;
            }
        }
        out
    }

    /// Partial derivative `∂/∂θ_axis`: `c_k ↦ 2πi k_axis c_k`.
    pub fn differentiate(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(KamError::AxisOutOfRange { axis, dim: self.dim });
        }
        let nm = self.n_modes();
        let factors: Vec<Complex64> = (0..nm)
            .map(|i| Complex64::new(0.0, 2.0 * PI * self.mode(i)[axis] as f64))
            .collect();
        let mut out = self.clone();
        for e in 0..self.rows * self.cols {
            for (c, f) in out.coeffs[e * nm..(e + 1) * nm].iter_mut().zip(&factors) {
                *c *= f;
            }
        }
        // the derivative of a periodic function has exactly zero mean
        let z = out.zero_mode_index();
        for e in 0..self.rows * self.cols {
            out.coeffs[e * nm + z] = ZERO;
        }
        Ok(out)
    }

    /// Weighted ℓ¹ majorant of each entry, row-major.
    pub fn entry_norms(&self, rho: StripNorm) -> Vec<f64> {
        let nm = self.n_modes();
        let weights: Vec<f64> = (0..nm)
            .map(|i| rho.weight(self.mode(i).iter().map(|k| k.abs()).sum()))
            .collect();
        (0..self.rows * self.cols)
            .map(|e| {
                self.coeffs[e * nm..(e + 1) * nm]
                    .iter()
                    .zip(&weights)
                    .map(|(c, w)| c.norm() * w)
                    .sum()
            })
            .collect()
    }

    /// Computable majorant of the sup norm on `T^d_ρ`.
    pub fn analytic_norm(&self, rho: StripNorm) -> f64 {
        let en = self.entry_norms(rho);
        (0..self.rows)
            .map(|r| en[r * self.cols..(r + 1) * self.cols].iter().sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// ℓ¹ norm on the real torus.
    pub fn l1_norm(&self) -> f64 {
        self.analytic_norm(StripNorm::torus())
    }

    /// Largest coefficient modulus over all entries.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Averages (the `k = 0` coefficients), row-major.
    pub fn average(&self) -> Vec<Complex64> {
        let nm = self.n_modes();
        let z = self.zero_mode_index();
        (0..self.rows * self.cols).map(|e| self.coeffs[e * nm + z]).collect()
    }

    /// Copy with the `k = 0` coefficients set to exactly zero.
    pub fn zero_average(&self) -> Self {
        let mut out = self.clone();
        let nm = self.n_modes();
        let z = self.zero_mode_index();
        for e in 0..self.rows * self.cols {
            out.coeffs[e * nm + z] = ZERO;
        }
        out
    }

    pub fn is_zero_average(&self) -> bool {
        self.average().iter().all(|c| *c == ZERO)
    }

    /// Add a constant matrix to the average.
    pub fn add_constant(&mut self, value: &[Complex64]) {
        assert_eq!(value.len(), self.rows * self.cols);
        let nm = self.n_modes();
        let z = self.zero_mode_index();
        for (e, v) in value.iter().enumerate() {
            self.coeffs[e * nm + z] += v;
        }
    }

    /// Largest violation of `c_{-k} = conj(c_k)` relative to the ℓ¹ norm.
    pub fn reality_defect(&self) -> f64 {
        let nm = self.n_modes();
        let mut worst = 0.0f64;
        for e in 0..self.rows * self.cols {
            let cs = &self.coeffs[e * nm..(e + 1) * nm];
            let scale: f64 = cs.iter().map(|c| c.norm()).sum::<f64>().max(f64::MIN_POSITIVE);
            for i in 0..nm {
                let j = nm - 1 - i; // index of -k in the symmetric layout
                worst = worst.max((cs[j] - cs[i].conj()).norm() / scale);
            }
        }
        worst
    }

    /// Change the cutoff, truncating or zero-padding.
    pub fn resize(&self, kmax: usize) -> Self {
        let mut out = Self::zeros(self.dim, kmax, self.rows, self.cols);
        let nm_new = out.n_modes();
        for i in 0..nm_new {
            let k = out.mode(i);
            if let Some(j) = self.mode_index(&k) {
                for e in 0..self.rows * self.cols {
                    out.coeffs[e * nm_new + i] = self.coeffs[e * self.n_modes() + j];
                }
            }
        }
        out
    }

    /// Fraction of ℓ¹ mass carried by modes with `max_i |k_i| > kmax / 2`.
    pub fn tail_fraction(&self) -> f64 {
        let nm = self.n_modes();
        let half = (self.kmax / 2) as i64;
        let mut tail = 0.0;
        let mut total = 0.0;
        for i in 0..nm {
            let in_tail = self.mode(i).iter().any(|k| k.abs() > half);
            for e in 0..self.rows * self.cols {
                let a = self.coeffs[e * nm + i].norm();
                total += a;
                if in_tail {
                    tail += a;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            tail / total
        }
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= factor);
        out
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn try_sub(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    /// Samples on an `n`-point-per-axis grid.
    pub fn to_grid(&self, layout: GridLayout) -> Result<GridValues> {
        if layout.dim != self.dim {
            return Err(KamError::ShapeMismatch {
                expected: format!("grid of dimension {}", self.dim),
                found: format!("{}", layout.dim),
            });
        }
        check_resolution(layout.n, self.kmax)?;
        let npts = layout.num_points();
        let nm = self.n_modes();
        let bins: Vec<usize> = (0..nm).map(|i| bin_of(&self.mode(i), layout.n)).collect();
        let mut out = GridValues::zeros(layout, self.rows, self.cols);
        for e in 0..self.rows * self.cols {
            let buf = &mut out.data[e * npts..(e + 1) * npts];
            for (i, &b) in bins.iter().enumerate() {
                buf[b] = self.coeffs[e * nm + i];
            }
            fft_nd(buf, layout, true);
        }
        Ok(out)
    }

    /// Coefficients `|k_i| <= kmax` of grid samples (modes above the cutoff are discarded).
    pub fn from_grid(grid: &GridValues, kmax: usize) -> Result<Self> {
        let layout = grid.layout;
        check_resolution(layout.n, kmax)?;
        let npts = layout.num_points();
        let mut out = Self::zeros(layout.dim, kmax, grid.rows, grid.cols);
        let nm = out.n_modes();
        let bins: Vec<usize> = (0..nm).map(|i| bin_of(&out.mode(i), layout.n)).collect();
        let inv = 1.0 / npts as f64;
        let mut buf = vec![ZERO; npts];
        for e in 0..grid.rows * grid.cols {
            buf.copy_from_slice(&grid.data[e * npts..(e + 1) * npts]);
            fft_nd(&mut buf, layout, false);
            for (i, &b) in bins.iter().enumerate() {
                out.coeffs[e * nm + i] = buf[b] * inv;
            }
        }
        Ok(out)
    }

    /// Matrix product `self · other`, evaluated pointwise on an oversampled grid
    /// and truncated back to the common cutoff.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        if self.cols != other.rows {
            return Err(KamError::ShapeMismatch {
                expected: format!("{} rows on the right factor", self.cols),
                found: format!("{}", other.rows),
            });
        }
        let layout = GridLayout::oversampled(self.dim, self.kmax);
        let a = self.to_grid(layout)?;
        let b = other.to_grid(layout)?;
        let mut c = GridValues::zeros(layout, self.rows, other.cols);
        let npts = layout.num_points();
        for i in 0..self.rows {
            for j in 0..other.cols {
                for k in 0..self.cols {
                    let (ae, be) = (a.entry(i, k), b.entry(k, j));
                    let ce = &mut c.data[(i * other.cols + j) * npts..(i * other.cols + j + 1) * npts];
                    for p in 0..npts {
                        ce[p] += ae[p] * be[p];
                    }
                }
            }
        }
        Self::from_grid(&c, self.kmax)
    }
}

impl Add for &FourierSeries {
    type Output = FourierSeries;
    fn add(self, rhs: &FourierSeries) -> FourierSeries {
        self.try_add(rhs).expect("series shapes differ")
    }
}

impl Sub for &FourierSeries {
    type Output = FourierSeries;
    fn sub(self, rhs: &FourierSeries) -> FourierSeries {
        self.try_sub(rhs).expect("series shapes differ")
    }
}

impl Neg for &FourierSeries {
    type Output = FourierSeries;
    fn neg(self) -> FourierSeries {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul<Complex64> for &FourierSeries {
    type Output = FourierSeries;
    fn mul(self, rhs: Complex64) -> FourierSeries {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub(crate) fn random_series(rng: &mut ChaCha8Rng, dim: usize, kmax: usize) -> FourierSeries {
        let mut s = FourierSeries::scalar_zeros(dim, kmax);
        for z in s.coeffs_mut() {
            *z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        }
        s
    }

    #[test]
    fn constant_series_evaluates_to_constant() {
        let s = FourierSeries::constant(1, 4, 1, 1, &[c(3.0, 0.0)]);
        for t in [0.0, 0.3, 0.77] {
            assert_eq!(s.eval_scalar(&[c(t, 0.1)]).unwrap(), c(3.0, 0.0));
        }
    }

    #[test]
    fn cosine_pair_at_zero() {
        let s = FourierSeries::from_modes(1, 3, &[(vec![1], c(1.0, 0.0)), (vec![-1], c(1.0, 0.0))]).unwrap();
        assert!((s.eval_scalar(&[c(0.0, 0.0)]).unwrap() - c(2.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn eval_shape_mismatch() {
        let s = FourierSeries::zeros(1, 2, 2, 1);
        assert!(s.eval_scalar(&[c(0.0, 0.0)]).is_err());
        assert!(s.eval(&[c(0.0, 0.0), c(0.0, 0.0)]).is_err());
    }

    #[test]
    fn eval_matches_direct_summation_on_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = random_series(&mut rng, 1, 16);
        let layout = GridLayout::new(1, 64);
        let g = s.to_grid(layout).unwrap();
        for p in 0..64 {
            let th = p as f64 / 64.0;
            let direct: Complex64 = (-16i64..=16)
                .map(|k| s.get(&[k], 0, 0) * (Complex64::i() * 2.0 * PI * (k as f64) * th).exp())
                .sum();
            let scale = s.l1_norm();
            assert!((g.data[p] - direct).norm() <= 1e-13 * scale);
            assert!((s.eval_scalar(&[c(th, 0.0)]).unwrap() - direct).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn shift_quarter_turn_multiplies_by_i() {
        let s = FourierSeries::from_modes(1, 2, &[(vec![1], c(1.0, 0.0))]).unwrap();
        let t = s.shift(&[0.25]);
        assert!((t.get(&[1], 0, 0) - Complex64::i()).norm() < 1e-15);
        assert_eq!(s.shift(&[0.0]), s);
    }

    #[test]
    fn shift_group_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = random_series(&mut rng, 2, 5);
        let w = [0.3125, -0.127];
        let twice = s.shift(&w).shift(&w);
        let once = s.shift(&[2.0 * w[0], 2.0 * w[1]]);
        let err = (&twice - &once).max_coeff();
        assert!(err <= 1e-15 * 4.0, "err {err}");
    }

    #[test]
    fn differentiate_sine() {
        // sin(2πθ) = (e^{2πiθ} - e^{-2πiθ}) / 2i
        let s = FourierSeries::from_modes(1, 3, &[(vec![1], c(0.0, -0.5)), (vec![-1], c(0.0, 0.5))]).unwrap();
        let d = s.differentiate(0).unwrap();
        // 2π cos(2πθ) = π e^{2πiθ} + π e^{-2πiθ}
        assert!((d.get(&[1], 0, 0) - c(PI, 0.0)).norm() < 1e-14);
        assert!((d.get(&[-1], 0, 0) - c(PI, 0.0)).norm() < 1e-14);
        assert!(d.is_zero_average());
        let k = FourierSeries::constant(1, 3, 1, 1, &[c(2.0, 0.0)]);
        assert_eq!(k.differentiate(0).unwrap().max_coeff(), 0.0);
        assert!(matches!(
            k.differentiate(1),
            Err(KamError::AxisOutOfRange { axis: 1, dim: 1 })
        ));
    }

    #[test]
    fn derivative_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut s = random_series(&mut rng, 1, 8);
        // damp so the finite-difference truncation error stays small
        for (i, z) in s.coeffs_mut().iter_mut().enumerate() {
            let k = i as f64 - 8.0;
            *z *= (-0.5 * k.abs()).exp();
        }
        let d = s.differentiate(0).unwrap();
        let h = 1e-6;
        for j in 0..10 {
            let t = 0.1 * j as f64 + 0.013;
            let fd = (s.eval_scalar(&[c(t + h, 0.0)]).unwrap() - s.eval_scalar(&[c(t - h, 0.0)]).unwrap()) / (2.0 * h);
            let exact = d.eval_scalar(&[c(t, 0.0)]).unwrap();
            assert!((fd - exact).norm() <= 1e-7 * exact.norm().max(1.0));
        }
    }

    #[test]
    fn analytic_norm_single_mode() {
        let s = FourierSeries::from_modes(1, 2, &[(vec![1], c(1.0, 0.0))]).unwrap();
        let n = s.analytic_norm(StripNorm::new(0.1).unwrap());
        assert!((n - (0.2 * PI).exp()).abs() < 1e-14);
        assert_eq!(FourierSeries::scalar_zeros(1, 2).analytic_norm(StripNorm::torus()), 0.0);
    }

    #[test]
    fn majorant_bounds_boundary_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = 0.07;
        for _ in 0..5 {
            let s = random_series(&mut rng, 1, 10);
            let bound = s.analytic_norm(StripNorm::new(rho).unwrap());
            for j in 0..256 {
                let t = j as f64 / 256.0;
                for im in [rho, -rho] {
                    let v = s.eval_scalar(&[c(t, im)]).unwrap().norm();
                    assert!(v <= bound * (1.0 + 1e-14));
                }
            }
        }
    }

    #[test]
    fn grid_round_trip_and_constant_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let s = random_series(&mut rng, 2, 6);
        let layout = GridLayout::new(2, 13);
        let back = FourierSeries::from_grid(&s.to_grid(layout).unwrap(), 6).unwrap();
        assert!((&back - &s).max_coeff() <= 1e-13 * s.max_coeff());

        let g = GridValues::from_fn(GridLayout::new(1, 16), 1, 1, |_, _| vec![c(2.5, -1.0)]);
        let cs = FourierSeries::from_grid(&g, 7).unwrap();
        for k in -7i64..=7 {
            let expect = if k == 0 { c(2.5, -1.0) } else { c(0.0, 0.0) };
            assert!((cs.get(&[k], 0, 0) - expect).norm() < 1e-15);
        }
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let s = FourierSeries::scalar_zeros(1, 8);
        assert!(matches!(
            s.to_grid(GridLayout::new(1, 16)),
            Err(KamError::UnderResolved { n: 16, kmax: 8 })
        ));
    }

    #[test]
    fn product_of_single_modes() {
        let e1 = FourierSeries::from_modes(1, 4, &[(vec![1], c(1.0, 0.0))]).unwrap();
        let p = e1.matmul(&e1).unwrap();
        assert!((p.get(&[2], 0, 0) - c(1.0, 0.0)).norm() < 1e-15);
        let rest: f64 = p.l1_norm() - 1.0;
        assert!(rest.abs() < 1e-14);
    }

    #[test]
    fn cauchy_inequality_and_banach_algebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let rho = StripNorm::new(0.05).unwrap();
        let a = random_series(&mut rng, 1, 12);
        let b = random_series(&mut rng, 1, 12);
        let na = a.analytic_norm(rho);
        for i in 0..a.n_modes() {
            let k1: i64 = a.mode(i).iter().map(|k| k.abs()).sum();
            assert!(a.coeffs()[i].norm() <= na * (-2.0 * PI * k1 as f64 * rho.rho()).exp() * (1.0 + 1e-14));
        }
        let ab = a.matmul(&b).unwrap();
        assert!(ab.analytic_norm(rho) <= na * b.analytic_norm(rho) * (1.0 + 1e-12));
    }

    #[test]
    fn shift_commutes_with_derivative() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = random_series(&mut rng, 1, 9);
        let a = s.shift(&[0.37]).differentiate(0).unwrap();
        let b = s.differentiate(0).unwrap().shift(&[0.37]);
        assert!((&a - &b).l1_norm() <= 1e-13 * a.l1_norm());
    }

    #[test]
    fn real_series_has_real_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut s = random_series(&mut rng, 1, 10);
        let nm = s.n_modes();
        let cs = s.coeffs().to_vec();
        for i in 0..nm {
            s.coeffs_mut()[i] = 0.5 * (cs[i] + cs[nm - 1 - i].conj());
        }
        assert!(s.reality_defect() <= 1e-14);
        for j in 0..32 {
            let v = s.eval_scalar(&[c(j as f64 / 32.0, 0.0)]).unwrap();
            assert!(v.im.abs() <= 1e-13 * s.l1_norm());
        }
    }
}
