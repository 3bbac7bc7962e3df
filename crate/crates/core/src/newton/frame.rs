//! Frame construction and the linearized solve, on ε-jets of any length.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{KamError, Result};
use crate::field::{inf_norm, solve_twisted_jet, JetGrid, JetMatrix, JetSeries};
use crate::fourier::{FourierSeries, GridLayout};
use crate::lindstedt::Jet;
use crate::maps::MapFamily;

const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Largest tolerated condition number of `DK^T DK`.
pub(crate) const MAX_GRAM_CONDITION: f64 = 1e12;

/// Relative determinant threshold of the average system.
pub(crate) const NONDEGENERACY_REL: f64 = 1e-10;

/// Samples of `K` (or `K∘T_ω` when `shift` is given) including the `θ` of the angle rows.
pub(crate) fn embedding_grid(periodic: &JetSeries, layout: GridLayout, shift: Option<&[f64]>) -> Result<JetGrid> {
    let d = periodic.dim();
    let mut g = match shift {
        Some(w) => periodic.shift(w).to_grid(layout)?,
        None => periodic.to_grid(layout)?,
    };
    let npts = layout.num_points();
    for i in 0..d {
        let off = shift.map_or(0.0, |w| w[i]);
        let col = g.orders[0].entry_mut(i, 0);
        for (p, v) in col.iter_mut().enumerate().take(npts) {
            *v += layout.theta_axis(p, i) + off;
        }
    }
    Ok(g)
}

pub(crate) struct FamilyEval {
    pub f: JetGrid,
    pub df: Option<JetGrid>,
    pub dmu: Option<JetGrid>,
}

fn scatter(out: &mut JetGrid, p: usize, vals: &[Jet]) {
    let npts = out.npts();
    for (e, j) in vals.iter().enumerate() {
        for (n, g) in out.orders.iter_mut().enumerate() {
            g.data[e * npts + p] = j.coeff(n);
        }
    }
}

/// `f`, and optionally `Df` and `D_μ f`, along a jet field of points.
pub(crate) fn eval_family<F: MapFamily>(fam: &F, k: &JetGrid, mu: &[Jet], eps: &Jet, derivs: bool) -> FamilyEval {
    let d = fam.dim();
    let len = k.len();
    let npts = k.npts();
    let layout = k.layout;
    let samples: Vec<(Vec<Jet>, Vec<Jet>, Vec<Jet>)> = (0..npts)
        .into_par_iter()
        .map(|p| {
            if len == 1 {
                let x: Vec<Complex64> = (0..2 * d).map(|e| k.orders[0].at(e, 0, p)).collect();
                let m: Vec<Complex64> = mu.iter().map(|j| j.value()).collect();
                let e = eps.value();
                let wrap = |v: Vec<Complex64>| v.into_iter().map(|z| Jet::constant(z, 1)).collect::<Vec<_>>();
                let f = wrap(fam.apply_lifted(&x, &m, &e));
                if derivs {
                    (f, wrap(fam.jacobian(&x, &m, &e)), wrap(fam.d_mu(&x, &m, &e)))
                } else {
                    (f, Vec::new(), Vec::new())
                }
            } else {
                let x: Vec<Jet> = (0..2 * d)
                    .map(|e| Jet::from_coeffs((0..len).map(|n| k.orders[n].at(e, 0, p)).collect()))
                    .collect();
                let f = fam.jet_apply(&x, mu, eps);
                if derivs {
                    (f, fam.jacobian(&x, mu, eps), fam.d_mu(&x, mu, eps))
                } else {
                    (f, Vec::new(), Vec::new())
                }
            }
        })
        .collect();
    let mut f = JetGrid::zeros(layout, 2 * d, 1, len);
    let mut df = JetGrid::zeros(layout, 2 * d, 2 * d, len);
    let mut dmu = JetGrid::zeros(layout, 2 * d, d, len);
    for (p, (fv, dfv, dmuv)) in samples.iter().enumerate() {
        scatter(&mut f, p, fv);
        if derivs {
            scatter(&mut df, p, dfv);
            scatter(&mut dmu, p, dmuv);
        }
    }
    FamilyEval {
        f,
        df: derivs.then_some(df),
        dmu: derivs.then_some(dmu),
    }
}

/// `E = f∘K − K∘T_ω` on the oversampled grid, angle rows lifted to the
/// nearest integer translate, truncated to the cutoff of `periodic`.
pub(crate) fn residual_jet_series<F: MapFamily>(
    fam: &F,
    periodic: &JetSeries,
    mu: &[Jet],
    eps: &Jet,
    omega: &[f64],
    derivs: bool,
) -> Result<(JetSeries, FamilyEval, GridLayout)> {
    let d = periodic.dim();
    if periodic.shape() != (2 * d, 1) || mu.len() != d || omega.len() != d {
        return Err(KamError::ShapeMismatch {
            expected: format!("embedding of shape ({}, 1) with {d} drifts and frequencies", 2 * d),
            found: format!(
                "{:?}, {} drifts, {} frequencies",
                periodic.shape(),
                mu.len(),
                omega.len()
            ),
        });
    }
    let kmax = periodic.kmax();
    let layout = GridLayout::oversampled(d, kmax);
    let k = embedding_grid(periodic, layout, None)?;
    let k_shift = embedding_grid(periodic, layout, Some(omega))?;
    let ev = eval_family(fam, &k, mu, eps, derivs);
    let mut e = ev.f.sub(&k_shift);
    for i in 0..d {
        for v in e.orders[0].entry_mut(i, 0) {
            v.re -= v.re.round();
        }
    }
    Ok((e.to_series(kmax)?, ev, layout))
}

/// `DK` as a `2d × d` jet series (without the identity from the angle rows).
pub(crate) fn derivative_series(periodic: &JetSeries) -> Result<JetSeries> {
    let d = periodic.dim();
    let orders = periodic
        .orders
        .iter()
        .map(|s| {
            let cols: Vec<FourierSeries> = (0..d).map(|a| s.differentiate(a)).collect::<Result<_>>()?;
            let refs: Vec<&FourierSeries> = cols.iter().collect();
            FourierSeries::hstack(&refs)
        })
        .collect::<Result<_>>()?;
    Ok(JetSeries { orders })
}

/// `M = [DK | J^{-1} DK N]` and `N = (DK^T DK)^{-1}` on a grid.
pub(crate) fn frame_matrices(periodic: &JetSeries, layout: GridLayout) -> Result<(JetGrid, JetGrid, JetGrid, f64)> {
    let d = periodic.dim();
    let mut dk = derivative_series(periodic)?.to_grid(layout)?;
    dk.add_identity_top(d);
    let (n, cond) = dk.transpose().mul(&dk).inverse()?;
    if cond > MAX_GRAM_CONDITION {
        return Err(KamError::FrameSingular { condition: cond });
    }
    let m = JetGrid::hstack(&dk, &dk.mul(&n).jinv_left());
    Ok((dk, n, m, cond))
}

/// Everything the linearized equation needs at one approximate solution.
pub(crate) struct Frame {
    pub d: usize,
    pub kmax: usize,
    pub layout: GridLayout,
    pub lambda: Jet,
    pub e: JetSeries,
    pub n: JetGrid,
    pub m: JetGrid,
    pub m_shift: JetGrid,
    pub beta: JetGrid,
    pub s: JetGrid,
    pub a_tilde: JetGrid,
    pub df: JetGrid,
    pub condition: f64,
}

pub(crate) fn build_frame<F: MapFamily>(
    fam: &F,
    periodic: &JetSeries,
    mu: &[Jet],
    eps: &Jet,
    omega: &[f64],
) -> Result<Frame> {
    let d = periodic.dim();
    let (e, ev, layout) = residual_jet_series(fam, periodic, mu, eps, omega, true)?;
    let (dk, n, m, c0) = frame_matrices(periodic, layout)?;
    let (dk_s, n_s, m_shift, c1) = frame_matrices(&periodic.shift(omega), layout)?;
    let (beta, _) = m_shift.inverse()?;
    let lambda = fam.conformal().eval(eps);
    let df = ev.df.expect("derivatives requested");
    let dmu = ev.dmu.expect("derivatives requested");

    let p = dk.mul(&n);
    let p_s = dk_s.mul(&n_s);
    let gamma_s = dk_s.transpose().mul(&dk_s.jinv_left());
    let twist = p_s.transpose().mul(&df).mul(&p.jinv_left());
    let s = twist.sub(&n_s.transpose().mul(&gamma_s).mul(&n_s).scale_jet(&lambda));
    let a_tilde = beta.mul(&dmu);
    Ok(Frame {
        d,
        kmax: periodic.kmax(),
        layout,
        lambda,
        e,
        n,
        m,
        m_shift,
        beta,
        s,
        a_tilde,
        df,
        condition: c0.max(c1),
    })
}

/// Solution `(W, σ)` of the linearized equation in the frame, and `ΔK = M W`.
pub(crate) struct Correction {
    pub w: JetSeries,
    pub sigma: JetMatrix,
    pub delta_k: JetSeries,
    pub twist_constant: f64,
    pub det: f64,
    pub max_divisor_gain: f64,
}

/// Solve `Λ W − W∘T_ω = −Ẽ − Ã σ` with `Λ = [[I, S], [0, λI]]` and `W̄₁ = 0`,
/// where `Ẽ = β E` for the given `e` (which need not be the frame's own residual).
pub(crate) fn solve_linearized(frame: &Frame, e: &JetSeries, omega: &[f64], floor: f64) -> Result<Correction> {
    let d = frame.d;
    let kmax = frame.kmax;
    let layout = frame.layout;
    let len = e.len();
    let e_tilde = frame.beta.mul(&e.to_grid(layout)?).to_series(kmax)?;
    let a_tilde = frame.a_tilde.to_series(kmax)?;
    let (e1, e2) = (e_tilde.block(0, d, 0, 1), e_tilde.block(d, 2 * d, 0, 1));
    let (a1, a2) = (a_tilde.block(0, d, 0, d), a_tilde.block(d, 2 * d, 0, d));
    let lambda = frame.lambda.truncate(len.min(frame.lambda.len()));

    let (b_a, g1) = solve_twisted_jet(&e2.zero_average().neg(), &lambda, omega, floor)?;
    let (b_b, g2) = solve_twisted_jet(&a2.zero_average().neg(), &lambda, omega, floor)?;
    let s_grid = &frame.s;
    let s_avg = s_grid.to_series(kmax)?.average();
    let sb_a = s_grid.mul(&b_a.to_grid(layout)?).to_series(kmax)?.average();
    let sb_b = s_grid.mul(&b_b.to_grid(layout)?).to_series(kmax)?.average();
    let (a1_avg, a2_avg) = (a1.average(), a2.average());
    let (e1_avg, e2_avg) = (e1.average(), e2.average());

    // [[S̄, avg(S B_b) + Ā₁], [(λ−1) I, Ā₂]] (W̄₂, σ) = (−avg(S B_a) − Ē₁, −Ē₂)
    let mut sys = JetMatrix::zeros(2 * d, 2 * d, len);
    let mut rhs = JetMatrix::zeros(2 * d, 1, len);
    for nidx in 0..len {
        let m = &mut sys.orders[nidx];
        let lam_m1 = lambda.coeff(nidx) - if nidx == 0 { ONE } else { Complex64::new(0.0, 0.0) };
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] = s_avg.orders.get(nidx).map_or(Complex64::default(), |x| x[(i, j)]);
                m[(i, d + j)] = sb_b.orders[nidx][(i, j)] + a1_avg.orders[nidx][(i, j)];
                m[(d + i, d + j)] = a2_avg.orders[nidx][(i, j)];
            }
            m[(d + i, i)] = lam_m1;
            rhs.orders[nidx][(i, 0)] = -sb_a.orders[nidx][(i, 0)] - e1_avg.orders[nidx][(i, 0)];
            rhs.orders[nidx][(d + i, 0)] = -e2_avg.orders[nidx][(i, 0)];
        }
    }
    let a0 = &sys.orders[0];
    let scale = inf_norm(a0);
    let det = a0.determinant().norm();
    let threshold = NONDEGENERACY_REL * scale.powi(2 * d as i32);
    if !(det >= threshold) || det == 0.0 {
        return Err(KamError::NonDegeneracyFailure { det, threshold });
    }
    let inv = sys.inverse().ok_or(KamError::NonDegeneracyFailure { det, threshold })?;
    let twist_constant = inf_norm(&inv.orders[0]);
    let x = inv.mul(&rhs);
    let w2_avg = x.rows(0, d);
    let sigma = x.rows(d, 2 * d);

    let mut w2 = b_a.add(&b_b.mul_matrix(&sigma));
    w2.add_constant(&w2_avg);
    let sw2 = s_grid.mul(&w2.to_grid(layout)?).to_series(kmax)?;
    let rhs1 = sw2.add(&e1).add(&a1.mul_matrix(&sigma)).zero_average().neg();
    let (w1, g3) = solve_twisted_jet(&rhs1, &Jet::constant(ONE, 1), omega, floor)?;
    let w = JetSeries::vstack(&w1, &w2)?;
    let delta_k = frame.m.mul(&w.to_grid(layout)?).to_series(kmax)?;
    Ok(Correction {
        w,
        sigma,
        delta_k,
        twist_constant,
        det,
        max_divisor_gain: g1.max(g2).max(g3),
    })
}

/// `Df M − (M∘T_ω) [[I, S], [0, λI]]` at order 0.
pub(crate) fn reducibility_residual(frame: &Frame) -> Result<FourierSeries> {
    let d = frame.d;
    let layout = frame.layout;
    let npts = layout.num_points();
    let lam = frame.lambda.value();
    let mut lam_block = JetGrid::zeros(layout, 2 * d, 2 * d, 1);
    for i in 0..d {
        for v in lam_block.orders[0].entry_mut(i, i) {
            *v = ONE;
        }
        for v in lam_block.orders[0].entry_mut(d + i, d + i) {
            *v = lam;
        }
        for j in 0..d {
            let s = frame.s.orders[0].entry(i, j).to_vec();
            lam_block.orders[0].entry_mut(i, d + j)[..npts].copy_from_slice(&s);
        }
    }
    let first = |g: &JetGrid| JetGrid {
        layout,
        rows: g.rows,
        cols: g.cols,
        orders: vec![g.orders[0].clone()],
    };
    let r = first(&frame.df)
        .mul(&first(&frame.m))
        .sub(&first(&frame.m_shift).mul(&lam_block));
    Ok(r.to_series(frame.kmax)?.orders.remove(0))
}

/// Order-0 slice of a jet series.
pub(crate) fn order0(s: &JetSeries) -> FourierSeries {
    s.orders[0].clone()
}
