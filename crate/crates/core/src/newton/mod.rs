//! A-posteriori Newton solver for invariant tori of conformally symplectic maps.
//!
//! Unknowns are an embedding `K(θ) = (θ + u(θ), v(θ))` and a drift `μ` with
//! `f_{μ,ε}∘K = K∘T_ω`. Each step builds the automatic reducibility frame
//! `M = [DK | J^{-1} DK N]`, in which the linearized map is upper triangular
//! `[[I, S], [0, λI]]` up to an error of the size of the residual, and
//! solves the resulting pair of cohomology equations plus a `2d × 2d`
//! average system for the mean action correction and the drift correction.

pub(crate) mod frame;

use num_complex::Complex64;

use crate::cohomology::DEFAULT_DIVISOR_FLOOR;
use crate::diophantine::{in_good_set, GoodSetParams};
use crate::error::{KamError, Result};
use crate::field::{JetGrid, JetSeries};
use crate::fourier::io::{fmt_c64, fmt_f64, parse_c64, TabularDoc};
use crate::fourier::{FourierSeries, GridLayout, StripNorm};
use crate::lindstedt::Jet;
use crate::maps::MapFamily;

use frame::{build_frame, frame_matrices, order0, reducibility_residual, residual_jet_series, solve_linearized};

/// `K(θ) = (θ + u(θ), v(θ))`, stored as the periodic part `(u, v)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TorusEmbedding {
    periodic: FourierSeries,
}

impl TorusEmbedding {
    pub fn new(periodic: FourierSeries) -> Result<Self> {
        let d = periodic.dim();
        if periodic.shape() != (2 * d, 1) {
            return Err(KamError::ShapeMismatch {
                expected: format!("({}, 1)", 2 * d),
                found: format!("{:?}", periodic.shape()),
            });
        }
        Ok(Self { periodic })
    }

    /// The flat torus `(θ, action)`.
    pub fn flat(dim: usize, kmax: usize, action: &[Complex64]) -> Self {
        assert_eq!(action.len(), dim);
        let mut c = vec![Complex64::new(0.0, 0.0); dim];
        c.extend_from_slice(action);
        Self {
            periodic: FourierSeries::constant(dim, kmax, 2 * dim, 1, &c),
        }
    }

    pub fn dim(&self) -> usize {
        self.periodic.dim()
    }

    pub fn kmax(&self) -> usize {
        self.periodic.kmax()
    }

    pub fn periodic(&self) -> &FourierSeries {
        &self.periodic
    }

    pub fn u(&self) -> FourierSeries {
        let d = self.dim();
        self.periodic.block(0, d, 0, 1)
    }

    pub fn v(&self) -> FourierSeries {
        let d = self.dim();
        self.periodic.block(d, 2 * d, 0, 1)
    }

    /// `K(θ)` at a (possibly complex) angle.
    pub fn eval(&self, theta: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut p = self.periodic.eval(theta)?;
        for (x, t) in p.iter_mut().zip(theta) {
            *x += t;
        }
        Ok(p)
    }

    pub fn resize(&self, kmax: usize) -> Self {
        Self {
            periodic: self.periodic.resize(kmax),
        }
    }

    /// `K∘T_σ`.
    pub fn shifted(&self, sigma: &[Complex64]) -> Self {
        let mut periodic = self.periodic.shift_complex(sigma);
        let mut add = sigma.to_vec();
        add.extend(std::iter::repeat_n(Complex64::new(0.0, 0.0), self.dim()));
        periodic.add_constant(&add);
        Self { periodic }
    }

    pub(crate) fn jet(&self) -> JetSeries {
        JetSeries::single(self.periodic.clone())
    }
}

fn scalar_jets(v: &[Complex64]) -> Vec<Jet> {
    v.iter().map(|z| Jet::constant(*z, 1)).collect()
}

/// `E = f_{μ,ε}∘K − K∘T_ω`, with the angle component lifted continuously.
pub fn invariance_residual<F: MapFamily>(
    k: &TorusEmbedding,
    mu: &[Complex64],
    fam: &F,
    eps: Complex64,
    omega: &[f64],
) -> Result<FourierSeries> {
    let (e, _, _) = residual_jet_series(fam, &k.jet(), &scalar_jets(mu), &Jet::constant(eps, 1), omega, false)?;
    Ok(order0(&e))
}

/// The automatic reducibility frame at an approximate solution.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducibilityFrame {
    pub m_frame: FourierSeries,
    pub n_norm: FourierSeries,
    pub s_tors: FourierSeries,
    pub a_tilde: FourierSeries,
    pub beta: FourierSeries,
    /// `Df∘K M − (M∘T_ω) [[I, S], [0, λI]]`.
    pub reducibility_residual: FourierSeries,
    pub residual_norm: f64,
    pub invariance_error_norm: f64,
    /// `‖R‖ / ‖E‖` (infinite when `E = 0` and `R ≠ 0`).
    pub ratio: f64,
    /// Worst condition number of `DK^T DK` over the grid.
    pub condition: f64,
    pub lambda: Complex64,
}

pub fn reducibility_frame<F: MapFamily>(
    k: &TorusEmbedding,
    mu: &[Complex64],
    fam: &F,
    eps: Complex64,
    omega: &[f64],
) -> Result<ReducibilityFrame> {
    let fr = build_frame(fam, &k.jet(), &scalar_jets(mu), &Jet::constant(eps, 1), omega)?;
    let kmax = fr.kmax;
    let r = reducibility_residual(&fr)?;
    let e = order0(&fr.e);
    let (rn, en) = (r.l1_norm(), e.l1_norm());
    let s0 = |g: &JetGrid| -> Result<FourierSeries> { Ok(g.to_series(kmax)?.orders.remove(0)) };
    Ok(ReducibilityFrame {
        m_frame: s0(&fr.m)?,
        n_norm: s0(&fr.n)?,
        s_tors: s0(&fr.s)?,
        a_tilde: s0(&fr.a_tilde)?,
        beta: s0(&fr.beta)?,
        reducibility_residual: r,
        residual_norm: rn,
        invariance_error_norm: en,
        ratio: if rn == 0.0 { 0.0 } else { rn / en },
        condition: fr.condition,
        lambda: fr.lambda.value(),
    })
}

/// Diagnostics of one Newton step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport {
    /// `‖E‖` on the torus before the step.
    pub residual: f64,
    pub correction_norm: f64,
    pub sigma_norm: f64,
    pub twist_constant: f64,
    /// `|det|` of the average system.
    pub det: f64,
    pub max_divisor_gain: f64,
    pub frame_condition: f64,
}

/// One step of the Newton method; returns `(K + MW, μ + σ, report)`.
pub fn newton_step<F: MapFamily>(
    k: &TorusEmbedding,
    mu: &[Complex64],
    fam: &F,
    eps: Complex64,
    omega: &[f64],
    divisor_floor: f64,
) -> Result<(TorusEmbedding, Vec<Complex64>, StepReport)> {
    let fr = build_frame(fam, &k.jet(), &scalar_jets(mu), &Jet::constant(eps, 1), omega)?;
    let corr = solve_linearized(&fr, &fr.e, omega, divisor_floor)?;
    let dk = order0(&corr.delta_k);
    let sigma: Vec<Complex64> = corr.sigma.orders[0].iter().copied().collect();
    let report = StepReport {
        residual: order0(&fr.e).l1_norm(),
        correction_norm: order0(&corr.w).l1_norm(),
        sigma_norm: sigma.iter().map(|s| s.norm()).fold(0.0, f64::max),
        twist_constant: corr.twist_constant,
        det: corr.det,
        max_divisor_gain: corr.max_divisor_gain,
        frame_condition: fr.condition,
    };
    let new_k = TorusEmbedding::new(k.periodic() + &dk)?;
    let new_mu = mu.iter().zip(&sigma).map(|(a, b)| a + b).collect();
    Ok((new_k, new_mu, report))
}

/// Settings of [`run_newton`].
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonConfig {
    /// Stop when `‖E‖` on the torus is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial strip half-width `ρ_0`.
    pub rho: f64,
    /// Total strip loss; the `n`-th step loses `δ_0 / 2^{n+1}`. Defaults to `ρ/4`.
    pub delta0: Option<f64>,
    pub divisor_floor: f64,
    /// Good-set test performed before iterating (skipped when `None`).
    pub good_set: Option<GoodSetParams>,
    pub k_scan: usize,
    /// Iterate even when the good-set test fails.
    pub force: bool,
    /// Double the cutoff when the tail carries more than this fraction of the mass.
    pub tail_threshold: f64,
    pub kmax_limit: usize,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 30,
            rho: 0.1,
            delta0: None,
            divisor_floor: DEFAULT_DIVISOR_FLOOR,
            good_set: None,
            k_scan: 1000,
            force: false,
            tail_threshold: 1e-10,
            kmax_limit: 512,
        }
    }
}

/// One row of the convergence trace.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `‖E‖` on the torus.
    pub residual: f64,
    /// `‖E‖_{ρ_n}` on the current strip.
    pub residual_strip: f64,
    pub rho: f64,
    pub kmax: usize,
    pub correction_norm: f64,
    pub sigma_norm: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct KamSolution {
    pub k: TorusEmbedding,
    pub mu: Vec<Complex64>,
    pub eps: Complex64,
    pub lambda: Complex64,
    pub omega: Vec<f64>,
    pub residual_norm: f64,
    pub twist_constant: f64,
    pub lagrangian_defect: f64,
    pub rho: f64,
    pub iteration_trace: Vec<IterationRecord>,
}

/// Iterations stop as divergent once `‖E‖` exceeds its initial value by this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e4;

/// Newton iteration from `(K0, μ0)` until `‖E‖ <= tol`.
pub fn run_newton<F: MapFamily>(
    k0: &TorusEmbedding,
    mu0: &[Complex64],
    fam: &F,
    eps: Complex64,
    omega: &[f64],
    cfg: &NewtonConfig,
) -> Result<KamSolution> {
    if let Some(gs) = &cfg.good_set {
        let w = in_good_set(eps, gs, |e| fam.lambda(e), omega, cfg.k_scan);
        if !w.inside && !cfg.force {
            let k = w.nu.argmax.clone();
            let divisor = crate::diophantine::divisor(&k, omega, w.lambda);
            return Err(KamError::DivisorTooSmall { k, divisor });
        }
    }
    let delta0 = cfg.delta0.unwrap_or(cfg.rho / 4.0);
    let mut k = k0.clone();
    let mut mu = mu0.to_vec();
    let mut rho = cfg.rho;
    let mut trace: Vec<IterationRecord> = Vec::new();
    for it in 0..=cfg.max_iter {
        let (k_next, mu_next, rep) = newton_step(&k, &mu, fam, eps, omega, cfg.divisor_floor)?;
        let e = invariance_residual(&k, &mu, fam, eps, omega)?;
        trace.push(IterationRecord {
            iteration: it,
            residual: rep.residual,
            residual_strip: e.analytic_norm(StripNorm::new(rho)?),
            rho,
            kmax: k.kmax(),
            correction_norm: rep.correction_norm,
            sigma_norm: rep.sigma_norm,
        });
        if !rep.residual.is_finite() || rep.residual > DIVERGENCE_FACTOR * trace[0].residual {
            break;
        }
        if rep.residual <= cfg.tol {
            return Ok(KamSolution {
                lagrangian_defect: lagrangian_defect(&k)?,
                lambda: fam.lambda(eps),
                k,
                mu,
                eps,
                omega: omega.to_vec(),
                residual_norm: rep.residual,
                twist_constant: rep.twist_constant,
                rho,
                iteration_trace: trace,
            });
        }
        if it == cfg.max_iter {
            break;
        }
        k = k_next;
        mu = mu_next;
        rho -= delta0 / 2f64.powi(it as i32 + 1);
        if k.periodic().tail_fraction() > cfg.tail_threshold && 2 * k.kmax() <= cfg.kmax_limit {
            k = k.resize(2 * k.kmax());
        }
    }
    Err(KamError::NoConvergence {
        iterations: trace.len().saturating_sub(1),
        residual: trace.last().map_or(f64::NAN, |r| r.residual),
        trace: trace.iter().map(|r| r.residual).collect(),
    })
}

/// `‖DK^T J DK‖` on the torus (zero for Lagrangian tori).
pub fn lagrangian_defect(k: &TorusEmbedding) -> Result<f64> {
    let layout = GridLayout::oversampled(k.dim(), k.kmax());
    let (dk, _, _, _) = frame_matrices(&k.jet(), layout)?;
    // J X = −J^{-1} X
    let form = dk.transpose().mul(&dk.jinv_left());
    Ok(form.to_series(k.kmax())?.orders[0].l1_norm())
}

/// Settings of [`normalize_embedding`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalizeConfig {
    /// Newton iterates with `|σ|` above this abort.
    pub trust_radius: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for NormalizeConfig {
    fn default() -> Self {
        Self {
            trust_radius: 0.25,
            max_iter: 50,
            tol: 1e-14,
        }
    }
}

/// Find `σ` with `avg[M_ref^{-1}(K∘T_σ − K_ref)]_{1..d} = 0`, the phase
/// normalization fixing the reparametrization freedom of `K`.
pub fn normalize_embedding(
    k: &TorusEmbedding,
    k_ref: &TorusEmbedding,
    cfg: &NormalizeConfig,
) -> Result<(TorusEmbedding, Vec<Complex64>)> {
    let d = k.dim();
    if k_ref.dim() != d {
        return Err(KamError::ShapeMismatch {
            expected: format!("reference of dimension {d}"),
            found: format!("{}", k_ref.dim()),
        });
    }
    let kmax = k.kmax().max(k_ref.kmax());
    let k = k.resize(kmax);
    let k_ref = k_ref.resize(kmax);
    let layout = GridLayout::oversampled(d, kmax);
    let (_, _, m_ref, _) = frame_matrices(&k_ref.jet(), layout)?;
    let (m_inv, _) = m_ref.inverse()?;
    let ref_grid = k_ref.jet().to_grid(layout)?;
    let g = |sigma: &[Complex64]| -> Result<(Vec<Complex64>, nalgebra::DMatrix<Complex64>)> {
        let ks = k.shifted(sigma);
        let diff = ks.jet().to_grid(layout)?.sub(&ref_grid);
        let val = m_inv.mul(&diff).to_series(kmax)?.orders[0].average();
        let (dk, _, _, _) = frame_matrices(&ks.jet(), layout)?;
        let jac = m_inv.mul(&dk).to_series(kmax)?.orders[0].average();
        let jm = nalgebra::DMatrix::from_row_slice(2 * d, d, &jac)
            .rows(0, d)
            .into_owned();
        Ok((val[..d].to_vec(), jm))
    };
    let mut sigma = vec![Complex64::new(0.0, 0.0); d];
    for _ in 0..cfg.max_iter {
        let (val, jac) = g(&sigma)?;
        let size = val.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if size <= cfg.tol {
            return Ok((k.shifted(&sigma), sigma));
        }
        let inv = jac
            .try_inverse()
            .ok_or(KamError::NormalizationDiverged { sigma: f64::INFINITY })?;
        let step = inv * nalgebra::DMatrix::from_column_slice(d, 1, &val);
        for i in 0..d {
            sigma[i] -= step[(i, 0)];
        }
        let s = sigma.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if !(s <= cfg.trust_radius) {
            return Err(KamError::NormalizationDiverged { sigma: s });
        }
    }
    let (val, _) = g(&sigma)?;
    if val.iter().map(|v| v.norm()).fold(0.0, f64::max) <= 1e3 * cfg.tol {
        return Ok((k.shifted(&sigma), sigma));
    }
    Err(KamError::NormalizationDiverged {
        sigma: sigma.iter().map(|v| v.norm()).fold(0.0, f64::max),
    })
}

impl KamSolution {
    /// Header plus `u` and `v` blocks.
    pub fn to_doc(&self) -> TabularDoc {
        let mu: Vec<String> = self.mu.iter().map(|m| fmt_c64(*m)).collect();
        let omega: Vec<String> = self.omega.iter().map(|w| fmt_f64(*w)).collect();
        TabularDoc::new("solution")
            .with_meta("d", self.k.dim().to_string())
            .with_meta("kmax", self.k.kmax().to_string())
            .with_meta("rho", fmt_f64(self.rho))
            .with_meta("omega", omega.join(" "))
            .with_meta("mu", mu.join(" "))
            .with_meta("lambda", fmt_c64(self.lambda))
            .with_meta("eps", fmt_c64(self.eps))
            .with_meta("residual", fmt_f64(self.residual_norm))
            .with_meta("twist_constant", fmt_f64(self.twist_constant))
            .with_meta("lagrangian_defect", fmt_f64(self.lagrangian_defect))
            .with_block("u", self.k.u())
            .with_block("v", self.k.v())
    }

    /// Load `(K, μ, ε)` from a dump written by [`KamSolution::to_doc`].
    pub fn embedding_from_doc(doc: &TabularDoc) -> Result<(TorusEmbedding, Vec<Complex64>, Complex64)> {
        let missing = |what: &str| KamError::Parse {
            line: 0,
            message: format!("solution dump lacks '{what}'"),
        };
        let u = doc.block("u").ok_or_else(|| missing("u"))?;
        let v = doc.block("v").ok_or_else(|| missing("v"))?;
        let k = TorusEmbedding::new(FourierSeries::vstack(&[u, v])?)?;
        let mu_text = doc.meta("mu").ok_or_else(|| missing("mu"))?;
        let fields: Vec<&str> = mu_text.split_whitespace().collect();
        let mu = fields
            .chunks(2)
            .map(|c| parse_c64(&c.join(" ")).ok_or_else(|| missing("valid mu")))
            .collect::<Result<Vec<_>>>()?;
        let eps = parse_c64(doc.meta("eps").ok_or_else(|| missing("eps"))?).ok_or_else(|| missing("valid eps"))?;
        Ok((k, mu, eps))
    }
}
