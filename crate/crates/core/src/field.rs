//! ε-jets of matrix-valued functions on the torus.
//!
//! A plain Newton step is the one-coefficient case; the same code runs on
//! longer jets for order-by-order Lindstedt series and for Newton steps on
//! jets. Products are Cauchy products in the jet variable and matrix
//! products in the values.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cohomology::solve_twisted_with_floor;
use crate::error::{KamError, Result};
use crate::fourier::{FourierSeries, GridLayout, GridValues};
use crate::lindstedt::Jet;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Grid samples of a matrix-valued jet, one grid per order.
#[derive(Clone, Debug)]
pub(crate) struct JetGrid {
    pub layout: GridLayout,
    pub rows: usize,
    pub cols: usize,
    pub orders: Vec<GridValues>,
}

/// Fourier coefficients of a matrix-valued jet, one series per order.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct JetSeries {
    pub orders: Vec<FourierSeries>,
}

/// Constant (θ-independent) matrix-valued jet.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct JetMatrix {
    pub orders: Vec<DMatrix<Complex64>>,
}

impl JetGrid {
    pub fn zeros(layout: GridLayout, rows: usize, cols: usize, len: usize) -> Self {
        Self {
            layout,
            rows,
            cols,
            orders: vec![GridValues::zeros(layout, rows, cols); len],
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn npts(&self) -> usize {
        self.layout.num_points()
    }

    pub fn to_series(&self, kmax: usize) -> Result<JetSeries> {
        Ok(JetSeries {
            orders: self
                .orders
                .iter()
                .map(|g| FourierSeries::from_grid(g, kmax))
                .collect::<Result<_>>()?,
        })
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "jet grid product shapes");
        let len = self.len().min(other.len());
        let npts = self.npts();
        let mut out = Self::zeros(self.layout, self.rows, other.cols, len);
        for (i, a) in self.orders[..len].iter().enumerate() {
            for (j, b) in other.orders[..len - i].iter().enumerate() {
                let c = &mut out.orders[i + j];
                for r in 0..self.rows {
                    for col in 0..other.cols {
                        let ce = &mut c.data[(r * other.cols + col) * npts..(r * other.cols + col + 1) * npts];
                        for k in 0..self.cols {
                            let (ae, be) = (a.entry(r, k), b.entry(k, col));
                            for p in 0..npts {
                                ce[p] += ae[p] * be[p];
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.layout, self.cols, self.rows, self.len());
        for (o, g) in out.orders.iter_mut().zip(&self.orders) {
            for r in 0..self.rows {
                for c in 0..self.cols {
                    o.entry_mut(c, r).copy_from_slice(g.entry(r, c));
                }
            }
        }
        out
    }

    fn zip(&self, other: &Self, f: impl Fn(Complex64, Complex64) -> Complex64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "jet grid shapes");
        let len = self.len().min(other.len());
        let mut out = self.clone();
        out.orders.truncate(len);
        for (o, g) in out.orders.iter_mut().zip(&other.orders) {
            for (a, b) in o.data.iter_mut().zip(&g.data) {
                *a = f(*a, *b);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    /// Multiply by a scalar jet.
    pub fn scale_jet(&self, s: &Jet) -> Self {
        let len = self.len().min(s.len());
        let mut out = Self::zeros(self.layout, self.rows, self.cols, len);
        for (i, a) in self.orders[..len].iter().enumerate() {
            for j in 0..len - i {
                let sj = s.coeff(j);
                if sj == ZERO {
                    continue;
                }
                for (o, v) in out.orders[i + j].data.iter_mut().zip(&a.data) {
                    *o += v * sj;
                }
            }
        }
        out
    }

    /// `J^{-1} X` for `J = [[0, I], [−I, 0]]`: `(a, b) ↦ (−b, a)`.
    pub fn jinv_left(&self) -> Self {
        let d = self.rows / 2;
        let mut out = Self::zeros(self.layout, self.rows, self.cols, self.len());
        for (o, g) in out.orders.iter_mut().zip(&self.orders) {
            for r in 0..d {
                for c in 0..self.cols {
                    for (x, y) in o.entry_mut(r, c).iter_mut().zip(g.entry(d + r, c)) {
                        *x = -y;
                    }
                    o.entry_mut(d + r, c).copy_from_slice(g.entry(r, c));
                }
            }
        }
        out
    }

    pub fn hstack(a: &Self, b: &Self) -> Self {
        assert_eq!(a.rows, b.rows);
        let len = a.len().min(b.len());
        let mut out = Self::zeros(a.layout, a.rows, a.cols + b.cols, len);
        for n in 0..len {
            for r in 0..a.rows {
                for c in 0..a.cols {
                    out.orders[n].entry_mut(r, c).copy_from_slice(a.orders[n].entry(r, c));
                }
                for c in 0..b.cols {
                    out.orders[n]
                        .entry_mut(r, a.cols + c)
                        .copy_from_slice(b.orders[n].entry(r, c));
                }
            }
        }
        out
    }

    fn point_matrix(&self, n: usize, p: usize) -> DMatrix<Complex64> {
        DMatrix::from_fn(self.rows, self.cols, |r, c| self.orders[n].at(r, c, p))
    }

    /// Pointwise inverse of a square jet field; the second value is the
    /// worst ∞-norm condition number of the order-0 matrices.
    pub fn inverse(&self) -> Result<(Self, f64)> {
        assert_eq!(self.rows, self.cols, "inverse of a non-square field");
        let r = self.rows;
        let npts = self.npts();
        let len = self.len();
        let mut out = Self::zeros(self.layout, r, r, len);
        let mut worst = 0.0f64;
        for p in 0..npts {
            let a: Vec<DMatrix<Complex64>> = (0..len).map(|n| self.point_matrix(n, p)).collect();
            let b0 = a[0].clone().try_inverse().ok_or(KamError::FrameSingular {
                condition: f64::INFINITY,
            })?;
            let cond = inf_norm(&a[0]) * inf_norm(&b0);
            if !cond.is_finite() {
                return Err(KamError::FrameSingular { condition: cond });
            }
            worst = worst.max(cond);
            let b = jet_inverse_from(&a, b0);
            for (n, bn) in b.iter().enumerate() {
                for i in 0..r {
                    for j in 0..r {
                        out.orders[n].data[(i * r + j) * npts + p] = bn[(i, j)];
                    }
                }
            }
        }
        Ok((out, worst))
    }

    /// Add the identity to the top-left `k × k` block of order 0.
    pub fn add_identity_top(&mut self, k: usize) {
        for i in 0..k {
            for v in self.orders[0].entry_mut(i, i) {
                *v += ONE;
            }
        }
    }
}

/// `B_0 = A_0^{-1}`, `B_n = −B_0 Σ_{k=1..n} A_k B_{n−k}`.
fn jet_inverse_from(a: &[DMatrix<Complex64>], b0: DMatrix<Complex64>) -> Vec<DMatrix<Complex64>> {
    let mut b = vec![b0];
    for n in 1..a.len() {
        let mut s = DMatrix::zeros(a[0].nrows(), a[0].ncols());
        for k in 1..=n {
            s += &a[k] * &b[n - k];
        }
        let bn = -(&b[0] * s);
        b.push(bn);
    }
    b
}

pub(crate) fn inf_norm(m: &DMatrix<Complex64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl JetSeries {
    pub fn zeros(dim: usize, kmax: usize, rows: usize, cols: usize, len: usize) -> Self {
        Self {
            orders: vec![FourierSeries::zeros(dim, kmax, rows, cols); len],
        }
    }

    pub fn single(s: FourierSeries) -> Self {
        Self { orders: vec![s] }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn dim(&self) -> usize {
        self.orders[0].dim()
    }

    pub fn kmax(&self) -> usize {
        self.orders[0].kmax()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.orders[0].shape()
    }

    pub fn to_grid(&self, layout: GridLayout) -> Result<JetGrid> {
        let (rows, cols) = self.shape();
        Ok(JetGrid {
            layout,
            rows,
            cols,
            orders: self.orders.iter().map(|s| s.to_grid(layout)).collect::<Result<_>>()?,
        })
    }

    pub fn shift(&self, omega: &[f64]) -> Self {
        Self {
            orders: self.orders.iter().map(|s| s.shift(omega)).collect(),
        }
    }

    pub fn average(&self) -> JetMatrix {
        let (rows, cols) = self.shape();
        JetMatrix {
            orders: self
                .orders
                .iter()
                .map(|s| DMatrix::from_row_slice(rows, cols, &s.average()))
                .collect(),
        }
    }

    pub fn zero_average(&self) -> Self {
        Self {
            orders: self.orders.iter().map(|s| s.zero_average()).collect(),
        }
    }

    pub fn block(&self, r0: usize, r1: usize, c0: usize, c1: usize) -> Self {
        Self {
            orders: self.orders.iter().map(|s| s.block(r0, r1, c0, c1)).collect(),
        }
    }

    pub fn vstack(a: &Self, b: &Self) -> Result<Self> {
        Ok(Self {
            orders: a
                .orders
                .iter()
                .zip(&b.orders)
                .map(|(x, y)| FourierSeries::vstack(&[x, y]))
                .collect::<Result<_>>()?,
        })
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            orders: self.orders.iter().zip(&other.orders).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            orders: self.orders.iter().map(|a| -a).collect(),
        }
    }

    /// Right multiplication by a constant jet matrix, mode by mode.
    pub fn mul_matrix(&self, m: &JetMatrix) -> Self {
        let (rows, inner) = self.shape();
        assert_eq!(inner, m.orders[0].nrows(), "series times matrix shapes");
        let cols = m.orders[0].ncols();
        let len = self.len().min(m.len());
        let mut out = Self::zeros(self.dim(), self.kmax(), rows, cols, len);
        let nm = self.orders[0].n_modes();
        for i in 0..len {
            for j in 0..len - i {
                let a = &self.orders[i];
                let b = &m.orders[j];
                let o = out.orders[i + j].coeffs_mut();
                for r in 0..rows {
                    for c in 0..cols {
                        for k in 0..inner {
                            let bkc = b[(k, c)];
                            if bkc == ZERO {
                                continue;
                            }
                            let src = &a.coeffs()[(r * inner + k) * nm..(r * inner + k + 1) * nm];
                            let dst = &mut o[(r * cols + c) * nm..(r * cols + c + 1) * nm];
                            for (x, y) in dst.iter_mut().zip(src) {
                                *x += y * bkc;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn add_constant(&mut self, m: &JetMatrix) {
        for (s, c) in self.orders.iter_mut().zip(&m.orders) {
            let v: Vec<Complex64> = c.transpose().iter().copied().collect();
            s.add_constant(&v);
        }
    }
}

impl JetMatrix {
    pub fn zeros(rows: usize, cols: usize, len: usize) -> Self {
        Self {
            orders: vec![DMatrix::zeros(rows, cols); len],
        }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        let mut out = Self::zeros(self.orders[0].nrows(), other.orders[0].ncols(), len);
        for i in 0..len {
            for j in 0..len - i {
                out.orders[i + j] += &self.orders[i] * &other.orders[j];
            }
        }
        out
    }

    pub fn inverse(&self) -> Option<Self> {
        let b0 = self.orders[0].clone().try_inverse()?;
        Some(Self {
            orders: jet_inverse_from(&self.orders, b0),
        })
    }

    pub fn rows(&self, r0: usize, r1: usize) -> Self {
        Self {
            orders: self.orders.iter().map(|m| m.rows(r0, r1 - r0).into_owned()).collect(),
        }
    }
}

/// `λ(t) φ − φ∘T_ω = η` for a jet `λ`, reduced order by order to scalar
/// twisted equations with the constant term `λ_0`:
/// `λ_0 φ_n − φ_n∘T_ω = η_n − Σ_{m≥1} λ_m φ_{n−m}`.
///
/// Returns the solution and the largest divisor gain met.
pub(crate) fn solve_twisted_jet(eta: &JetSeries, lambda: &Jet, omega: &[f64], floor: f64) -> Result<(JetSeries, f64)> {
    let mut phi: Vec<FourierSeries> = Vec::with_capacity(eta.len());
    let mut gain = 0.0f64;
    for n in 0..eta.len() {
        let mut rhs = eta.orders[n].clone();
        for m in 1..=n {
            let lm = lambda.coeff(m);
            if lm != ZERO {
                rhs = &rhs - &phi[n - m].scale(lm);
            }
        }
        let sol = solve_twisted_with_floor(&rhs, lambda.value(), omega, floor)?;
        gain = gain.max(sol.max_divisor_gain);
        phi.push(sol.phi);
    }
    Ok((JetSeries { orders: phi }, gain))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diophantine::golden_mean;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_c(rng: &mut ChaCha8Rng) -> Complex64 {
        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    }

    fn random_jet_series(rng: &mut ChaCha8Rng, kmax: usize, rows: usize, cols: usize, len: usize) -> JetSeries {
        let mut s = JetSeries::zeros(1, kmax, rows, cols, len);
        for o in &mut s.orders {
            for z in o.coeffs_mut() {
                *z = rand_c(rng) * 0.3;
            }
        }
        s
    }

    #[test]
    fn pointwise_jet_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layout = GridLayout::new(1, 16);
        let mut s = random_jet_series(&mut rng, 3, 2, 2, 5);
        s.orders[0].add_constant(&[Complex64::new(2.0, 0.0), ZERO, ZERO, Complex64::new(2.0, 0.0)]);
        let g = s.to_grid(layout).unwrap();
        let (inv, cond) = g.inverse().unwrap();
        assert!(cond >= 1.0);
        let id = g.mul(&inv);
        for (n, o) in id.orders.iter().enumerate() {
            for r in 0..2 {
                for c in 0..2 {
                    let target = if n == 0 && r == c { ONE } else { ZERO };
                    for v in o.entry(r, c) {
                        assert!((v - target).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn twisted_jet_solve_satisfies_jet_equation() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let w = [golden_mean()];
        let eta = random_jet_series(&mut rng, 6, 1, 1, 4).zero_average();
        let lambda = Jet::from_coeffs(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(1.0, 0.0),
            ZERO,
            Complex64::new(0.5, 0.0),
        ]);
        let (phi, _) = solve_twisted_jet(&eta, &lambda, &w, 1e-12).unwrap();
        // check (λ φ)_n − φ_n∘T = η_n by explicit Cauchy sums
        for n in 0..4 {
            let mut lhs = -&phi.orders[n].shift(&w);
            for m in 0..=n {
                lhs = &lhs + &phi.orders[n - m].scale(lambda.coeff(m));
            }
            assert!((&lhs - &eta.orders[n]).l1_norm() < 1e-12);
        }
    }

    #[test]
    fn series_matrix_product_matches_grid_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let s = random_jet_series(&mut rng, 4, 2, 2, 3);
        let m = JetMatrix {
            orders: (0..3)
                .map(|_| DMatrix::from_fn(2, 1, |_, _| rand_c(&mut rng)))
                .collect(),
        };
        let via_modes = s.mul_matrix(&m);
        let layout = GridLayout::oversampled(1, 4);
        let mut const_series = JetSeries::zeros(1, 4, 2, 1, 3);
        const_series.add_constant(&m);
        let via_grid = s
            .to_grid(layout)
            .unwrap()
            .mul(&const_series.to_grid(layout).unwrap())
            .to_series(4)
            .unwrap();
        for n in 0..3 {
            assert!((&via_modes.orders[n] - &via_grid.orders[n]).l1_norm() < 1e-13);
        }
    }

    #[test]
    fn constant_jet_matrix_inverse() {
        let a = JetMatrix {
            orders: vec![
                DMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE]),
                DMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
            ],
        };
        let b = a.inverse().unwrap();
        let id = a.mul(&b);
        assert!((&id.orders[0] - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);
        assert!(id.orders[1].norm() < 1e-15);
    }
}
