use std::f64::consts::PI;

use num_complex::Complex64;

use super::{lambda_preimages, ExclusionBall};
use crate::diophantine::GoodSetParams;
use crate::error::{KamError, Result};
use crate::maps::MapFamily;
use crate::newton::{run_newton, KamSolution, NewtonConfig, TorusEmbedding};

/// Step-size control along a continuation path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepPolicy {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Factor applied to the step after each accepted solve.
    pub grow: f64,
    /// Go around an obstructing ball instead of halting.
    pub detour: bool,
    /// Detour circles use the obstruction radius times this factor.
    pub detour_margin: f64,
}

impl Default for StepPolicy {
    fn default() -> Self {
        Self {
            initial_step: 0.01,
            min_step: 1e-5,
            max_step: 0.05,
            grow: 1.5,
            detour: false,
            detour_margin: 1.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StepStatus {
    Converged,
    /// The step was rejected and halved.
    Halved(String),
    Obstructed(Vec<i64>),
    /// The path was rerouted around the ball of this `k`.
    Detour(Vec<i64>),
    Failed(String),
}

/// One attempted point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepStep {
    pub eps: Complex64,
    pub status: StepStatus,
    pub residual: f64,
    pub mu: Vec<Complex64>,
    pub iterations: usize,
}

/// Where a sweep was stopped by a small divisor.
#[derive(Clone, Debug, PartialEq)]
pub struct Obstruction {
    pub k: Vec<i64>,
    /// First rejected point at the finest step.
    pub eps: Complex64,
    pub divisor: f64,
    /// Last accepted point before it.
    pub last_good: Complex64,
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub steps: Vec<SweepStep>,
    pub solutions: Vec<KamSolution>,
    pub obstruction: Option<Obstruction>,
    pub reached_end: bool,
    /// Length of the polyline through the accepted points.
    pub path_length: f64,
    /// `|ε_last − ε_first|` over the accepted points.
    pub endpoint_distance: f64,
}

impl SweepReport {
    pub fn length_ratio(&self) -> f64 {
        if self.endpoint_distance > 0.0 {
            self.path_length / self.endpoint_distance
        } else {
            1.0
        }
    }
}

pub fn path_length(path: &[Complex64]) -> f64 {
    path.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Point at arc length `s` along a polyline, clamped to its ends.
fn point_at(path: &[Complex64], mut s: f64) -> Complex64 {
    for w in path.windows(2) {
        let l = (w[1] - w[0]).norm();
        if s <= l {
            return if l > 0.0 { w[0] + (w[1] - w[0]) * (s / l) } else { w[0] };
        }
        s -= l;
    }
    *path.last().unwrap()
}

/// Polyline from `path[0]` to the point at arc length `s`, followed by the rest of `path`.
fn split_at(path: &[Complex64], s: f64) -> Vec<Complex64> {
    let mut acc = 0.0;
    for (i, w) in path.windows(2).enumerate() {
        let l = (w[1] - w[0]).norm();
        if acc + l > s {
            let mut rest = vec![point_at(path, s)];
            rest.extend_from_slice(&path[i + 1..]);
            return rest;
        }
        acc += l;
    }
    vec![*path.last().unwrap()]
}

/// Points of the arc of `|z − c| = r` from angle `a0` to `a1` (signed sweep), ends included.
fn arc(c: Complex64, r: f64, a0: f64, sweep: f64, pieces: usize) -> Vec<Complex64> {
    (0..=pieces)
        .map(|i| c + Complex64::from_polar(r, a0 + sweep * i as f64 / pieces as f64))
        .collect()
}

/// Replace the part of `path` inside the disk `(c, r)` by the shorter arc
/// of its boundary. `path[0]` must lie outside the disk; `None` when the
/// path never enters it.
fn reroute(path: &[Complex64], c: Complex64, r: f64, pieces: usize) -> Result<Option<Vec<Complex64>>> {
    if (path[0] - c).norm() < r {
        return Err(KamError::InvalidArgument("detour starts inside the obstruction".into()));
    }
    // entry and exit arc-length parameters from the circle-segment roots
    let mut entry = None;
    let mut exit = None;
    let mut acc = 0.0;
    for w in path.windows(2) {
        let d = w[1] - w[0];
        let l = d.norm();
        let p = w[0] - c;
        let (qa, qb, qc) = (d.norm_sqr(), 2.0 * (p * d.conj()).re, p.norm_sqr() - r * r);
        let disc = qb * qb - 4.0 * qa * qc;
        if l > 0.0 && disc > 0.0 {
            let t1 = (-qb - disc.sqrt()) / (2.0 * qa);
            let t2 = (-qb + disc.sqrt()) / (2.0 * qa);
            if entry.is_none() && (0.0..=1.0).contains(&t1) {
                entry = Some(acc + t1 * l);
            }
            if entry.is_some() && (0.0..=1.0).contains(&t2) {
                exit = Some(acc + t2 * l);
                break;
            }
        }
        acc += l;
    }
    let Some(s_in) = entry else {
        return Ok(None);
    };
    let Some(s_out) = exit else {
        return Err(KamError::InvalidArgument(
            "path ends inside the obstruction; no detour possible".into(),
        ));
    };
    let z_in = point_at(path, s_in);
    let z_out = point_at(path, s_out);
    let a0 = (z_in - c).arg();
    let mut sweep = (z_out - c).arg() - a0;
    if sweep > PI {
        sweep -= 2.0 * PI;
    } else if sweep < -PI {
        sweep += 2.0 * PI;
    }
    let mut out = split_at_prefix(path, s_in);
    out.extend(arc(c, r, a0, sweep, pieces).into_iter().skip(1));
    out.extend(split_at(path, s_out).into_iter().skip(1));
    Ok(Some(out))
}

/// Polyline from `path[0]` up to the point at arc length `s`.
fn split_at_prefix(path: &[Complex64], s: f64) -> Vec<Complex64> {
    let mut out = vec![path[0]];
    let mut acc = 0.0;
    for w in path.windows(2) {
        let l = (w[1] - w[0]).norm();
        if acc + l >= s {
            out.push(point_at(path, s));
            return out;
        }
        out.push(w[1]);
        acc += l;
    }
    out
}

/// Path from `e1` to `e2`: the segment, with every stretch inside a ball
/// replaced by the shorter boundary arc. Overlapping balls are handled one
/// at a time in order along the segment.
pub fn compensation_path(e1: Complex64, e2: Complex64, balls: &[ExclusionBall]) -> Result<Vec<Complex64>> {
    let dir = e2 - e1;
    let len = dir.norm();
    let mut hit: Vec<&ExclusionBall> = balls
        .iter()
        .filter(|b| {
            let t = (((b.center - e1) * dir.conj()).re / (len * len)).clamp(0.0, 1.0);
            (e1 + dir * t - b.center).norm() < b.radius
        })
        .collect();
    if hit.iter().any(|b| b.contains(e1) || b.contains(e2)) {
        return Err(KamError::InvalidArgument(
            "compensation path endpoint lies in a ball".into(),
        ));
    }
    hit.sort_by(|a, b| {
        ((a.center - e1) * dir.conj())
            .re
            .total_cmp(&((b.center - e1) * dir.conj()).re)
    });
    let mut path = vec![e1, e2];
    for b in hit {
        if let Some(p) = reroute(&path, b.center, b.radius, 64)? {
            path = p;
        }
    }
    Ok(path)
}

/// The ball around the `ε`-preimage of `e^{2πik·ω}` nearest to `near`, with
/// radius `A^{-1}|k|^{-τ}|λ − 1|^{N+1} / |λ'(ε)|`.
fn obstruction_ball<F: MapFamily>(
    fam: &F,
    k: &[i64],
    omega: &[f64],
    params: &GoodSetParams,
    near: Complex64,
) -> ExclusionBall {
    let phase: f64 = k.iter().zip(omega).map(|(&ki, &wi)| ki as f64 * wi).sum();
    let c = Complex64::from_polar(1.0, 2.0 * PI * phase);
    let conf = fam.conformal();
    let (branch, e) = lambda_preimages(&conf, c)
        .into_iter()
        .enumerate()
        .min_by(|a, b| (a.1 - near).norm().total_cmp(&(b.1 - near).norm()))
        .unwrap();
    let knorm = k.iter().map(|x| x.unsigned_abs()).sum::<u64>().max(1) as f64;
    let r_lambda = (c - 1.0).norm().powi(params.n as i32 + 1) * knorm.powf(-params.tau) / params.a;
    ExclusionBall {
        k: k.to_vec(),
        center: e,
        radius: r_lambda / conf.derivative(e).norm().max(f64::MIN_POSITIVE),
        branch,
    }
}

/// Continue a solution along the polyline `path`, starting from `(k0, μ0)` at `path[0]`.
pub fn sweep_continuation<F: MapFamily>(
    fam: &F,
    path: &[Complex64],
    k0: &TorusEmbedding,
    mu0: &[Complex64],
    omega: &[f64],
    cfg: &NewtonConfig,
    policy: &StepPolicy,
) -> Result<SweepReport> {
    if path.is_empty() || !(policy.min_step > 0.0) || policy.initial_step < policy.min_step {
        return Err(KamError::InvalidArgument(format!(
            "invalid sweep: {} vertices, {policy:?}",
            path.len()
        )));
    }
    let mut steps = Vec::new();
    let mut solutions = Vec::new();
    let first = run_newton(k0, mu0, fam, path[0], omega, cfg)?;
    steps.push(SweepStep {
        eps: path[0],
        status: StepStatus::Converged,
        residual: first.residual_norm,
        mu: first.mu.clone(),
        iterations: first.iteration_trace.len(),
    });
    solutions.push(first);
    let mut route = path.to_vec();
    let mut h = policy.initial_step;
    let mut obstruction = None;
    let mut reached_end = path_length(&route) == 0.0;
    while !reached_end {
        let remaining = path_length(&route);
        let step = h.min(remaining);
        let target = point_at(&route, step);
        let prev = solutions.last().unwrap();
        match run_newton(&prev.k, &prev.mu, fam, target, omega, cfg) {
            Ok(sol) => {
                steps.push(SweepStep {
                    eps: target,
                    status: StepStatus::Converged,
                    residual: sol.residual_norm,
                    mu: sol.mu.clone(),
                    iterations: sol.iteration_trace.len(),
                });
                solutions.push(sol);
                route = split_at(&route, step);
                reached_end = step >= remaining;
                h = (h * policy.grow).min(policy.max_step);
            }
            Err(err) => {
                let record = |status| SweepStep {
                    eps: target,
                    status,
                    residual: f64::NAN,
                    mu: Vec::new(),
                    iterations: 0,
                };
                if h > policy.min_step {
                    steps.push(record(StepStatus::Halved(err.to_string())));
                    h = (h / 2.0).max(policy.min_step);
                    continue;
                }
                match err {
                    KamError::DivisorTooSmall { k, divisor } => {
                        let here = solutions.last().unwrap().eps;
                        match (policy.detour, &cfg.good_set) {
                            (true, Some(gs)) => {
                                let ball = obstruction_ball(fam, &k, omega, gs, target);
                                let mut r = ball.radius * policy.detour_margin;
                                // back up to the last accepted point outside the detour circle
                                let mut back = vec![here];
                                while solutions.len() > 1 && (solutions.last().unwrap().eps - ball.center).norm() < r {
                                    solutions.pop();
                                    back.push(solutions.last().unwrap().eps);
                                }
                                r = r.min((solutions.last().unwrap().eps - ball.center).norm() * 0.999);
                                back.reverse();
                                back.extend(route.into_iter().skip(1));
                                route = back;
                                steps.push(record(StepStatus::Detour(k)));
                                route = reroute(&route, ball.center, r, 32)?.ok_or_else(|| {
                                    KamError::InvalidArgument(format!("obstruction at {target} off the sweep path"))
                                })?;
                                h = policy.initial_step.min(r * PI / 16.0).max(policy.min_step);
                            }
                            _ => {
                                steps.push(record(StepStatus::Obstructed(k.clone())));
                                obstruction = Some(Obstruction {
                                    k,
                                    eps: target,
                                    divisor,
                                    last_good: here,
                                });
                                break;
                            }
                        }
                    }
                    other => {
                        steps.push(record(StepStatus::Failed(other.to_string())));
                        break;
                    }
                }
            }
        }
    }
    let accepted: Vec<Complex64> = solutions.iter().map(|s| s.eps).collect();
    Ok(SweepReport {
        path_length: path_length(&accepted),
        endpoint_distance: (accepted[accepted.len() - 1] - accepted[0]).norm(),
        steps,
        solutions,
        obstruction,
        reached_end,
    })
}
