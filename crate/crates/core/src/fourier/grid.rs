//! Tensor-product collocation grids on T^d and the FFTs between grid samples
//! and Fourier coefficients.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{KamError, Result};

/// Uniform grid with `n` points per axis on the `dim`-torus. Flat point
/// index is `sum_i j_i n^i` (axis 0 fastest).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GridLayout {
    pub dim: usize,
    pub n: usize,
}

impl GridLayout {
    pub fn new(dim: usize, n: usize) -> Self {
        assert!(dim >= 1 && n >= 1, "grid needs dim >= 1 and n >= 1");
        Self { dim, n }
    }

    /// Grid with the 3/2 oversampling used for products of series of cutoff `kmax`.
    pub fn oversampled(dim: usize, kmax: usize) -> Self {
        Self::new(dim, oversampled_len(kmax))
    }

    pub fn num_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    /// Angle vector of a flat point index.
    pub fn theta(&self, mut p: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim);
        for _ in 0..self.dim {
            out.push((p % self.n) as f64 / self.n as f64);
            p /= self.n;
        }
        out
    }

    /// Angle of point `p` along `axis`.
    pub fn theta_axis(&self, p: usize, axis: usize) -> f64 {
        let j = (p / self.n.pow(axis as u32)) % self.n;
        j as f64 / self.n as f64
    }
}

/// Smallest power of two that resolves products of two series of cutoff
/// `kmax` without aliasing into the retained band.
pub fn oversampled_len(kmax: usize) -> usize {
    (3 * kmax + 2).next_power_of_two().max(4)
}

/// Matrix-valued samples on a grid, stored entry-major: `data[entry * npts + p]`
/// with `entry = row * cols + col`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridValues {
    pub layout: GridLayout,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl GridValues {
    pub fn zeros(layout: GridLayout, rows: usize, cols: usize) -> Self {
        Self {
            layout,
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols * layout.num_points()],
        }
    }

    pub fn from_fn(
        layout: GridLayout,
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, &[f64]) -> Vec<Complex64>,
    ) -> Self {
        let mut g = Self::zeros(layout, rows, cols);
        let npts = layout.num_points();
        for p in 0..npts {
            let th = layout.theta(p);
            let v = f(p, &th);
            assert_eq!(v.len(), rows * cols, "sample has wrong number of entries");
            for (e, val) in v.into_iter().enumerate() {
                g.data[e * npts + p] = val;
            }
        }
        g
    }

    pub fn npts(&self) -> usize {
        self.layout.num_points()
    }

    pub fn entry(&self, row: usize, col: usize) -> &[Complex64] {
        let npts = self.npts();
        let e = row * self.cols + col;
        &self.data[e * npts..(e + 1) * npts]
    }

    pub fn entry_mut(&mut self, row: usize, col: usize) -> &mut [Complex64] {
        let npts = self.npts();
        let e = row * self.cols + col;
        &mut self.data[e * npts..(e + 1) * npts]
    }

    pub fn at(&self, row: usize, col: usize, p: usize) -> Complex64 {
        self.data[(row * self.cols + col) * self.npts() + p]
    }

    /// Matrix sample at point `p`, row-major.
    pub fn sample(&self, p: usize) -> Vec<Complex64> {
        let npts = self.npts();
        (0..self.rows * self.cols).map(|e| self.data[e * npts + p]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>);

fn fft_cache() -> &'static Mutex<PlanCache> {
    static CACHE: OnceLock<Mutex<PlanCache>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut guard = fft_cache().lock().expect("fft cache poisoned");
    let (planner, map) = &mut *guard;
    map.entry((n, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// In-place unnormalized FFT of a `dim`-dimensional block along every axis.
/// `inverse = true` uses the `e^{+2πi}` kernel (synthesis).
pub(crate) fn fft_nd(buf: &mut [Complex64], layout: GridLayout, inverse: bool) {
    let n = layout.n;
    let fft = plan(n, inverse);
    if layout.dim == 1 {
        fft.process(buf);
        return;
    }
    let npts = layout.num_points();
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..layout.dim {
        let stride = n.pow(axis as u32);
        for start in 0..npts {
            // visit each line once: its first element has j_axis = 0
            if !(start / stride).is_multiple_of(n) {
                continue;
            }
            for (j, slot) in line.iter_mut().enumerate() {
                *slot = buf[start + j * stride];
            }
            fft.process(&mut line);
            for (j, v) in line.iter().enumerate() {
                buf[start + j * stride] = *v;
            }
        }
    }
}

/// Flat grid bin holding mode `k`.
pub(crate) fn bin_of(k: &[i64], n: usize) -> usize {
    let mut idx = 0usize;
    let mut stride = 1usize;
    for &ki in k {
        idx += (ki.rem_euclid(n as i64) as usize) * stride;
        stride *= n;
    }
    idx
}

pub(crate) fn check_resolution(n: usize, kmax: usize) -> Result<()> {
    if n < 2 * kmax + 1 {
        Err(KamError::UnderResolved { n, kmax })
    } else {
        Ok(())
    }
}
