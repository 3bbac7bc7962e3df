//! Geometry of the analyticity domain: resonance balls in the `λ` and `ε`
//! planes, grid classification, excluded-area scaling, parabolic cones and
//! continuation sweeps.

mod export;
mod sweep;

pub use export::{render_balls_table, render_grid_table, render_svg, render_sweep_table};
pub use sweep::{
    compensation_path, path_length, sweep_continuation, Obstruction, StepPolicy, StepStatus, SweepReport, SweepStep,
};

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diophantine::{for_each_shell, in_good_set, GoodSetParams};
use crate::error::{KamError, Result};
use crate::maps::ConformalFactor;

/// Monte-Carlo samples spent on each cluster of overlapping balls.
pub const CLUSTER_SAMPLES: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Plane {
    Lambda,
    Epsilon,
}

/// A disk removed around the resonance `λ = e^{2πik·ω}` (or one of its
/// `ε`-preimages).
#[derive(Clone, Debug, PartialEq)]
pub struct ExclusionBall {
    pub k: Vec<i64>,
    pub center: Complex64,
    pub radius: f64,
    /// Preimage branch in the `ε` plane; always 0 in the `λ` plane.
    pub branch: usize,
}

impl ExclusionBall {
    pub fn contains(&self, z: Complex64) -> bool {
        (z - self.center).norm() < self.radius
    }
}

/// `C A^{-1} ρ^{N+1} |k|^{-τ}` with the constant `C` chosen by the caller.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallGeometry {
    pub params: GoodSetParams,
    pub constant: f64,
}

impl BallGeometry {
    /// The smallest `C` for which `R_k ∩ {ρ < |λ−1| < 2ρ}` lies in the ball:
    /// `|λ − 1|^{N+1} < (2ρ)^{N+1}` on the annulus.
    pub fn covering(params: GoodSetParams) -> Self {
        Self {
            params,
            constant: 2f64.powi(params.n as i32 + 1),
        }
    }

    pub fn radius(&self, k_norm: usize, rho: f64) -> f64 {
        self.constant / self.params.a * rho.powi(self.params.n as i32 + 1) * (k_norm as f64).powf(-self.params.tau)
    }
}

fn resonance(k: &[i64], omega: &[f64]) -> Complex64 {
    let phase: f64 = k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
    Complex64::from_polar(1.0, 2.0 * PI * phase)
}

/// Balls for `0 < |k|_1 <= k_max` meeting the annulus `ρ < |λ − 1| < 2ρ`,
/// sorted by `|k|_1`.
pub fn excluded_balls(geom: &BallGeometry, omega: &[f64], k_max: usize, rho: f64) -> Vec<ExclusionBall> {
    let mut out = Vec::new();
    for j in 1..=k_max {
        let r = geom.radius(j, rho);
        for_each_shell(omega.len(), j, &mut |k| {
            let c = resonance(k, omega);
            let dist = (c - 1.0).norm();
            if dist - r < 2.0 * rho && dist + r > rho {
                out.push(ExclusionBall {
                    k: k.to_vec(),
                    center: c,
                    radius: r,
                    branch: 0,
                });
            }
        });
    }
    out
}

/// Balls of radius `radius(|k|_1)` around every resonance with `0 < |k|_1 <= k_max`.
pub fn resonance_balls(omega: &[f64], k_max: usize, radius: impl Fn(usize) -> f64) -> Vec<ExclusionBall> {
    let mut out = Vec::new();
    for j in 1..=k_max {
        let r = radius(j);
        for_each_shell(omega.len(), j, &mut |k| {
            out.push(ExclusionBall {
                k: k.to_vec(),
                center: resonance(k, omega),
                radius: r,
                branch: 0,
            });
        });
    }
    out
}

/// All `ε` with `λ(ε) = target`: the `a` roots of `((target − 1)/α)^{1/a}`,
/// each polished by Newton on `λ(ε) − target`.
pub fn lambda_preimages(conformal: &ConformalFactor, target: Complex64) -> Vec<Complex64> {
    let a = conformal.a.max(1);
    let w = (target - 1.0) / conformal.alpha;
    let (r, th) = w.to_polar();
    (0..a)
        .map(|b| {
            let mut e = Complex64::from_polar(r.powf(1.0 / a as f64), (th + 2.0 * PI * b as f64) / a as f64);
            for _ in 0..4 {
                let dl = conformal.derivative(e);
                if dl.norm() == 0.0 {
                    break;
                }
                e -= (conformal.value(e) - target) / dl;
            }
            e
        })
        .collect()
}

/// `ε`-plane images of `λ`-plane balls: every preimage branch of the center,
/// with the radius scaled by `|dε/dλ|` there. Balls whose center is `λ = 1`'s
/// critical preimage (`λ'(ε) = 0`) keep radius `(r/|α|)^{1/a}`.
pub fn epsilon_balls(balls: &[ExclusionBall], conformal: &ConformalFactor) -> Vec<ExclusionBall> {
    let mut out = Vec::new();
    for b in balls {
        for (branch, e) in lambda_preimages(conformal, b.center).into_iter().enumerate() {
            let dl = conformal.derivative(e).norm();
            let radius = if dl > 0.0 {
                b.radius / dl
            } else {
                (b.radius / conformal.alpha.norm()).powf(1.0 / conformal.a as f64)
            };
            out.push(ExclusionBall {
                k: b.k.clone(),
                center: e,
                radius,
                branch,
            });
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub enum CellClass {
    Inside,
    Excluded(Vec<i64>),
    OutsideR0,
}

/// Rectangle `[re_min, re_max] × [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

/// Cell-center classification on a regular grid, row-major with the real
/// axis fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct AtlasGrid {
    pub plane: Plane,
    pub bounds: Bounds,
    pub resolution: (usize, usize),
    pub cells: Vec<CellClass>,
}

impl AtlasGrid {
    pub fn cell_center(&self, ix: usize, iy: usize) -> Complex64 {
        cell_center(&self.bounds, self.resolution, ix, iy)
    }

    pub fn class_at(&self, ix: usize, iy: usize) -> &CellClass {
        &self.cells[iy * self.resolution.0 + ix]
    }

    pub fn inside_count(&self) -> usize {
        self.cells.iter().filter(|c| **c == CellClass::Inside).count()
    }
}

fn cell_center(b: &Bounds, (nx, ny): (usize, usize), ix: usize, iy: usize) -> Complex64 {
    Complex64::new(
        b.re_min + (ix as f64 + 0.5) * (b.re_max - b.re_min) / nx as f64,
        b.im_min + (iy as f64 + 0.5) * (b.im_max - b.im_min) / ny as f64,
    )
}

/// Classify one point. In the `λ` plane the point is `λ` itself and the
/// outer radius applies to `|λ − 1|`; in the `ε` plane it applies to `|ε|`.
pub fn classify_point(
    z: Complex64,
    plane: Plane,
    params: &GoodSetParams,
    conformal: &ConformalFactor,
    omega: &[f64],
    k_scan: usize,
) -> CellClass {
    let (radius, witness) = match plane {
        Plane::Lambda => ((z - 1.0).norm(), in_good_set(z, params, |l| l, omega, k_scan)),
        Plane::Epsilon => (z.norm(), in_good_set(z, params, |e| conformal.value(e), omega, k_scan)),
    };
    if radius > params.r0 {
        CellClass::OutsideR0
    } else if witness.inside {
        CellClass::Inside
    } else {
        CellClass::Excluded(witness.nu.argmax)
    }
}

pub fn classify_grid(
    plane: Plane,
    bounds: Bounds,
    resolution: (usize, usize),
    params: &GoodSetParams,
    conformal: &ConformalFactor,
    omega: &[f64],
    k_scan: usize,
) -> Result<AtlasGrid> {
    let (nx, ny) = resolution;
    if nx == 0 || ny == 0 || !(bounds.re_max > bounds.re_min) || !(bounds.im_max > bounds.im_min) {
        return Err(KamError::InvalidArgument(format!(
            "empty atlas grid {resolution:?} over {bounds:?}"
        )));
    }
    let cells = (0..nx * ny)
        .into_par_iter()
        .map(|i| {
            let z = cell_center(&bounds, resolution, i % nx, i / nx);
            classify_point(z, plane, params, conformal, omega, k_scan)
        })
        .collect();
    Ok(AtlasGrid {
        plane,
        bounds,
        resolution,
        cells,
    })
}

/// How the area of a union of balls was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AreaMethod {
    DisjointSum,
    MonteCarlo,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AreaEstimate {
    pub rho: f64,
    pub ball_count: usize,
    pub area: f64,
    /// `Σ π r_k²` over the listed balls.
    pub union_bound: f64,
    pub method: AreaMethod,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasureReport {
    /// Estimates at `ρ`, `ρ/2`, `ρ/4`.
    pub estimates: Vec<AreaEstimate>,
    /// Least-squares slope of `log area` against `log ρ`.
    pub exponent: f64,
}

/// Overlapping balls grouped into clusters. Centers are sorted by argument,
/// so for balls with centers on a circle neighbouring pairs decide overlap.
fn clusters(balls: &[ExclusionBall]) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..balls.len()).collect();
    idx.sort_by(|&a, &b| balls[a].center.arg().total_cmp(&balls[b].center.arg()));
    let overlap = |a: usize, b: usize| (balls[a].center - balls[b].center).norm() < balls[a].radius + balls[b].radius;
    let mut out: Vec<Vec<usize>> = Vec::new();
    for &i in &idx {
        match out.last_mut() {
            Some(c) if overlap(*c.last().unwrap(), i) => c.push(i),
            _ => out.push(vec![i]),
        }
    }
    if out.len() > 1 && overlap(*out.last().unwrap().last().unwrap(), out[0][0]) {
        let last = out.pop().unwrap();
        out[0].extend(last);
    }
    out
}

/// Area of a union of balls: exact sum when disjoint, seeded Monte Carlo
/// over each overlapping cluster's bounding box otherwise.
pub fn union_area(balls: &[ExclusionBall], seed: u64) -> (f64, AreaMethod) {
    let groups = clusters(balls);
    let mut method = AreaMethod::DisjointSum;
    let area = groups
        .iter()
        .enumerate()
        .map(|(g, members)| {
            if members.len() == 1 {
                return PI * balls[members[0]].radius.powi(2);
            }
            method = AreaMethod::MonteCarlo;
            let lo_re = members
                .iter()
                .map(|&i| balls[i].center.re - balls[i].radius)
                .fold(f64::INFINITY, f64::min);
            let hi_re = members
                .iter()
                .map(|&i| balls[i].center.re + balls[i].radius)
                .fold(f64::NEG_INFINITY, f64::max);
            let lo_im = members
                .iter()
                .map(|&i| balls[i].center.im - balls[i].radius)
                .fold(f64::INFINITY, f64::min);
            let hi_im = members
                .iter()
                .map(|&i| balls[i].center.im + balls[i].radius)
                .fold(f64::NEG_INFINITY, f64::max);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (g as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            let hits = (0..CLUSTER_SAMPLES)
                .filter(|_| {
                    let z = Complex64::new(rng.random_range(lo_re..hi_re), rng.random_range(lo_im..hi_im));
                    members.iter().any(|&i| balls[i].contains(z))
                })
                .count();
            (hi_re - lo_re) * (hi_im - lo_im) * hits as f64 / CLUSTER_SAMPLES as f64
        })
        .sum();
    (area, method)
}

/// Excluded area in the annuli at `ρ`, `ρ/2`, `ρ/4` and the fitted exponent.
pub fn excluded_measure(
    geom: &BallGeometry,
    omega: &[f64],
    k_max: usize,
    rho: f64,
    seed: u64,
) -> Result<MeasureReport> {
    let d = omega.len() as f64;
    if 2.0 * geom.params.tau <= d {
        return Err(KamError::InvalidArgument(format!(
            "excluded measure needs 2τ > d (τ = {}, d = {d})",
            geom.params.tau
        )));
    }
    let estimates: Vec<AreaEstimate> = [1.0, 0.5, 0.25]
        .iter()
        .map(|s| {
            let r = rho * s;
            let balls = excluded_balls(geom, omega, k_max, r);
            let (area, method) = union_area(&balls, seed);
            AreaEstimate {
                rho: r,
                ball_count: balls.len(),
                area,
                union_bound: balls.iter().map(|b| PI * b.radius * b.radius).sum(),
                method,
            }
        })
        .collect();
    if estimates.iter().any(|e| !(e.area > 0.0)) {
        return Err(KamError::InvalidArgument(format!(
            "no excluded area in some annulus below ρ = {rho} with k_max = {k_max}"
        )));
    }
    let xs: Vec<f64> = estimates.iter().map(|e| e.rho.ln()).collect();
    let ys: Vec<f64> = estimates.iter().map(|e| e.area.ln()).collect();
    Ok(MeasureReport {
        exponent: slope(&xs, &ys),
        estimates,
    })
}

/// Least-squares slope of `ys` against `xs`.
pub fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// The parabolic cone `{λ₀ + t u + s iu : |t|, |s| < δ, s >= γ|t|^m}` (or
/// `|s| >= γ|t|^m` from both sides), with `u` the tangent and `iu` the normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cone {
    pub apex: Complex64,
    pub u: Complex64,
    pub m: u32,
    pub gamma: f64,
    pub delta: f64,
    pub both_sides: bool,
}

impl Cone {
    pub fn new(apex: Complex64, u: Complex64, m: u32, gamma: f64, delta: f64, both_sides: bool) -> Result<Self> {
        if m < 2 || !(gamma > 0.0) || !(delta > 0.0) || !((u.norm() - 1.0).abs() < 1e-12) {
            return Err(KamError::InvalidArgument(format!(
                "cone needs m >= 2, γ, δ > 0 and |u| = 1 (got m={m}, γ={gamma}, δ={delta}, |u|={})",
                u.norm()
            )));
        }
        Ok(Self {
            apex,
            u,
            m,
            gamma,
            delta,
            both_sides,
        })
    }

    fn local(&self, z: Complex64) -> (f64, f64) {
        let w = (z - self.apex) * self.u.conj();
        (w.re, w.im)
    }

    /// Largest `|t|` on the parabola inside the box.
    fn t_edge(&self) -> f64 {
        self.delta.min((self.delta / self.gamma).powf(1.0 / self.m as f64))
    }

    fn contains_local(&self, t: f64, s: f64) -> bool {
        let lim = self.gamma * t.abs().powi(self.m as i32);
        let side = if self.both_sides { s.abs() } else { s };
        t.abs() <= self.delta && s.abs() <= self.delta && side >= lim
    }

    /// Distance from `z` to the closed upper half of the cone.
    fn half_distance(&self, t: f64, s: f64) -> f64 {
        if t.abs() <= self.delta && s <= self.delta && s >= self.gamma * t.abs().powi(self.m as i32) {
            return 0.0;
        }
        let te = self.t_edge();
        let para = |x: f64| ((x - t).powi(2) + (self.gamma * x.abs().powi(self.m as i32) - s).powi(2)).sqrt();
        // coarse scan then golden-section refinement on the parabola arc
        let samples = 256;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=samples {
            let x = -te + 2.0 * te * i as f64 / samples as f64;
            let v = para(x);
            if v < best.0 {
                best = (v, x);
            }
        }
        let h = 2.0 * te / samples as f64;
        let (mut lo, mut hi) = ((best.1 - h).max(-te), (best.1 + h).min(te));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..60 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if para(a) < para(b) {
                hi = b;
            } else {
                lo = a;
            }
        }
        let on_parabola = para(0.5 * (lo + hi)).min(best.0);
        // top edge s = δ, |t| <= te, and the side edges t = ±δ when te = δ
        let top = {
            let tc = t.clamp(-te, te);
            ((tc - t).powi(2) + (self.delta - s).powi(2)).sqrt()
        };
        let sides = if te >= self.delta {
            let lo_s = self.gamma * self.delta.powi(self.m as i32);
            [-self.delta, self.delta]
                .iter()
                .map(|&tt| ((tt - t).powi(2) + (s.clamp(lo_s, self.delta) - s).powi(2)).sqrt())
                .fold(f64::INFINITY, f64::min)
        } else {
            f64::INFINITY
        };
        on_parabola.min(top).min(sides)
    }

    /// Euclidean distance from `z` to the closed cone.
    pub fn distance(&self, z: Complex64) -> f64 {
        let (t, s) = self.local(z);
        let upper = self.half_distance(t, s);
        if self.both_sides {
            upper.min(self.half_distance(t, -s))
        } else {
            upper
        }
    }

    /// Points of the cone on a `n × n` grid in `(t, s)`.
    pub fn sample(&self, n: usize) -> Vec<Complex64> {
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let t = -self.delta + 2.0 * self.delta * (i as f64 + 0.5) / n as f64;
                let s = -self.delta + 2.0 * self.delta * (j as f64 + 0.5) / n as f64;
                if self.contains_local(t, s) {
                    out.push(self.apex + self.u * Complex64::new(t, s));
                }
            }
        }
        out
    }
}

/// Whether the cone avoids every ball: each ball's distance to the cone is
/// compared with its radius, and cone samples at the given density are
/// tested against the balls as a second route.
pub fn tangential_cone_check(cone: &Cone, balls: &[ExclusionBall], density: usize) -> bool {
    let reach = cone.delta * 2f64.sqrt();
    let near: Vec<&ExclusionBall> = balls
        .iter()
        .filter(|b| (b.center - cone.apex).norm() < reach + b.radius)
        .collect();
    if near.iter().any(|b| cone.distance(b.center) < b.radius) {
        return false;
    }
    !cone.sample(density).iter().any(|z| near.iter().any(|b| b.contains(*z)))
}

/// Fraction of `n` equally spaced points of the unit circle at which the
/// two-sided cone with tangent `u = iλ₀` avoids every ball.
pub fn accessible_fraction(balls: &[ExclusionBall], n: usize, m: u32, gamma: f64, delta: f64) -> Result<f64> {
    let hits: Vec<bool> = (0..n)
        .into_par_iter()
        .map(|j| {
            let apex = Complex64::from_polar(1.0, 2.0 * PI * (j as f64 + 0.5) / n as f64);
            let u = apex * Complex64::i();
            Cone::new(apex, u, m, gamma, delta, true).map(|c| tangential_cone_check(&c, balls, 8))
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|&&h| h).count() as f64 / n as f64)
}
