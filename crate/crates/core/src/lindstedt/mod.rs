//! Lindstedt series `K_ε = Σ_j K_j (ε − ε₀)^j`, `μ_ε = Σ_j μ_j (ε − ε₀)^j`.
//!
//! Two engines produce the same normalized coefficients:
//!
//! * [`lindstedt_expand`] solves one linear problem per order in the frame of
//!   the base torus, with right-hand sides from jet evaluation of the map;
//! * [`lindstedt_double`] performs one Newton step on jets, taking an exact
//!   order-`N` jet to an exact order-`2N+1` jet.
//!
//! Coefficients are normalized with the base frame `M₀`: the first `d`
//! components of `avg(M₀^{-1} K_j)` vanish for `j >= 1`.

mod jet;

pub use jet::Jet;

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{KamError, Result};
use crate::field::JetSeries;
use crate::fourier::io::{fmt_c64, parse_c64, TabularDoc};
use crate::fourier::{FourierSeries, GridLayout};
use crate::maps::MapFamily;
use crate::newton::frame::{build_frame, frame_matrices, residual_jet_series, solve_linearized};
use crate::newton::TorusEmbedding;

/// Largest order supported in double precision.
pub const MAX_ORDER: usize = 16;

/// Residual level below which the base torus counts as invariant.
pub const BASE_TOLERANCE: f64 = 1e-10;

/// A scalar jet tied to its base point; arithmetic checks that base points agree.
#[derive(Clone, Debug, PartialEq)]
pub struct BasedJet {
    pub base: Complex64,
    pub jet: Jet,
}

impl BasedJet {
    pub fn new(base: Complex64, jet: Jet) -> Self {
        Self { base, jet }
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.base != other.base {
            return Err(KamError::BasePointMismatch {
                left: format!("{}", self.base),
                right: format!("{}", other.base),
            });
        }
        Ok(())
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self::new(self.base, &self.jet + &other.jet))
    }

    pub fn try_mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        Ok(Self::new(self.base, &self.jet * &other.jet))
    }
}

/// Truncated Lindstedt series of an invariant torus around `ε₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct EpsilonJet {
    pub eps0: Complex64,
    /// Periodic parts `(u_j, v_j)` of `K_j`; `K_0` includes the base torus.
    pub k_coeffs: Vec<FourierSeries>,
    pub mu_coeffs: Vec<Vec<Complex64>>,
    /// Taylor coefficients of `λ(ε)` at `ε₀`.
    pub lambda_coeffs: Jet,
}

impl EpsilonJet {
    /// The order-0 jet of a base solution.
    pub fn constant<F: MapFamily>(fam: &F, k: &TorusEmbedding, mu: &[Complex64], eps0: Complex64) -> Self {
        Self {
            eps0,
            k_coeffs: vec![k.periodic().clone()],
            mu_coeffs: vec![mu.to_vec()],
            lambda_coeffs: fam.conformal().jet(eps0, 1),
        }
    }

    pub fn order(&self) -> usize {
        self.k_coeffs.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.k_coeffs[0].dim()
    }

    pub fn kmax(&self) -> usize {
        self.k_coeffs[0].kmax()
    }

    pub fn base(&self) -> TorusEmbedding {
        TorusEmbedding::new(self.k_coeffs[0].clone()).expect("jet holds a valid embedding")
    }

    /// `K^{≤N}_ε` and `μ^{≤N}_ε`.
    pub fn evaluate(&self, eps: Complex64) -> (TorusEmbedding, Vec<Complex64>) {
        let t = eps - self.eps0;
        let mut k = self.k_coeffs[self.order()].clone();
        let mut mu = self.mu_coeffs[self.order()].clone();
        for j in (0..self.order()).rev() {
            k = &k.scale(t) + &self.k_coeffs[j];
            for (m, c) in mu.iter_mut().zip(&self.mu_coeffs[j]) {
                *m = *m * t + c;
            }
        }
        (TorusEmbedding::new(k).expect("jet holds a valid embedding"), mu)
    }

    /// Coefficientwise sum of two jets at the same base point.
    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if self.eps0 != other.eps0 {
            return Err(KamError::BasePointMismatch {
                left: format!("{}", self.eps0),
                right: format!("{}", other.eps0),
            });
        }
        let n = self.order().min(other.order());
        Ok(Self {
            eps0: self.eps0,
            k_coeffs: (0..=n).map(|j| &self.k_coeffs[j] + &other.k_coeffs[j]).collect(),
            mu_coeffs: (0..=n)
                .map(|j| {
                    self.mu_coeffs[j]
                        .iter()
                        .zip(&other.mu_coeffs[j])
                        .map(|(a, b)| a + b)
                        .collect()
                })
                .collect(),
            lambda_coeffs: self.lambda_coeffs.truncate(n + 1),
        })
    }

    pub fn truncate(&self, n: usize) -> Self {
        let n = n.min(self.order());
        Self {
            eps0: self.eps0,
            k_coeffs: self.k_coeffs[..=n].to_vec(),
            mu_coeffs: self.mu_coeffs[..=n].to_vec(),
            lambda_coeffs: self.lambda_coeffs.truncate(n + 1),
        }
    }

    pub(crate) fn periodic_jet(&self, len: usize) -> JetSeries {
        let zero = FourierSeries::zeros(self.dim(), self.kmax(), 2 * self.dim(), 1);
        JetSeries {
            orders: (0..len)
                .map(|j| self.k_coeffs.get(j).cloned().unwrap_or_else(|| zero.clone()))
                .collect(),
        }
    }

    pub(crate) fn mu_jets(&self, len: usize) -> Vec<Jet> {
        (0..self.dim())
            .map(|i| {
                Jet::from_coeffs(
                    (0..len)
                        .map(|j| self.mu_coeffs.get(j).map_or(Complex64::new(0.0, 0.0), |m| m[i]))
                        .collect(),
                )
            })
            .collect()
    }

    fn from_parts<F: MapFamily>(fam: &F, eps0: Complex64, periodic: JetSeries, mu: &[Jet]) -> Self {
        let len = periodic.len();
        Self {
            eps0,
            k_coeffs: periodic.orders,
            mu_coeffs: (0..len).map(|j| mu.iter().map(|m| m.coeff(j)).collect()).collect(),
            lambda_coeffs: fam.conformal().jet(eps0, len),
        }
    }

    /// Taylor coefficients of `f_{μ_ε,ε}∘K_ε − (θ, 0)` through order `N`,
    /// evaluated on the oversampled grid and truncated to the jet's cutoff.
    pub fn compose_with_family<F: MapFamily>(&self, fam: &F, omega: &[f64]) -> Result<Vec<FourierSeries>> {
        let len = self.order() + 1;
        let periodic = self.periodic_jet(len);
        let (_, ev, _) = residual_jet_series(
            fam,
            &periodic,
            &self.mu_jets(len),
            &Jet::variable(self.eps0, len),
            omega,
            false,
        )?;
        let mut f = ev.f;
        let layout = f.layout;
        for i in 0..self.dim() {
            for (p, v) in f.orders[0].entry_mut(i, 0).iter_mut().enumerate() {
                *v -= layout.theta_axis(p, i);
            }
        }
        Ok(f.to_series(self.kmax())?.orders)
    }

    pub fn to_doc(&self) -> TabularDoc {
        let mut doc = TabularDoc::new("jet")
            .with_meta("eps0", fmt_c64(self.eps0))
            .with_meta("order", self.order().to_string())
            .with_meta("d", self.dim().to_string())
            .with_meta("kmax", self.kmax().to_string());
        for (j, m) in self.mu_coeffs.iter().enumerate() {
            let s: Vec<String> = m.iter().map(|z| fmt_c64(*z)).collect();
            doc = doc.with_meta(&format!("mu_{j}"), s.join(" "));
        }
        for (j, l) in self.lambda_coeffs.coeffs().iter().enumerate() {
            doc = doc.with_meta(&format!("lambda_{j}"), fmt_c64(*l));
        }
        for (j, k) in self.k_coeffs.iter().enumerate() {
            doc = doc.with_block(&format!("K_{j}"), k.clone());
        }
        doc
    }

    pub fn from_doc(doc: &TabularDoc) -> Result<Self> {
        let bad = |what: String| KamError::Parse { line: 0, message: what };
        let eps0 = doc
            .meta("eps0")
            .and_then(parse_c64)
            .ok_or_else(|| bad("jet dump lacks a valid 'eps0'".into()))?;
        let order: usize = doc
            .meta("order")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| bad("jet dump lacks a valid 'order'".into()))?;
        let mut k_coeffs = Vec::new();
        let mut mu_coeffs = Vec::new();
        let mut lam = Vec::new();
        for j in 0..=order {
            k_coeffs.push(
                doc.block(&format!("K_{j}"))
                    .cloned()
                    .ok_or_else(|| bad(format!("missing block K_{j}")))?,
            );
            let text = doc
                .meta(&format!("mu_{j}"))
                .ok_or_else(|| bad(format!("missing mu_{j}")))?;
            let fields: Vec<&str> = text.split_whitespace().collect();
            mu_coeffs.push(
                fields
                    .chunks(2)
                    .map(|c| parse_c64(&c.join(" ")).ok_or_else(|| bad(format!("bad mu_{j}"))))
                    .collect::<Result<Vec<_>>>()?,
            );
            lam.push(
                doc.meta(&format!("lambda_{j}"))
                    .and_then(parse_c64)
                    .ok_or_else(|| bad(format!("missing lambda_{j}")))?,
            );
        }
        Ok(Self {
            eps0,
            k_coeffs,
            mu_coeffs,
            lambda_coeffs: Jet::from_coeffs(lam),
        })
    }
}

fn check_base<F: MapFamily>(
    fam: &F,
    k: &TorusEmbedding,
    mu: &[Complex64],
    eps0: Complex64,
    omega: &[f64],
) -> Result<()> {
    let e = crate::newton::invariance_residual(k, mu, fam, eps0, omega)?;
    if e.l1_norm() > BASE_TOLERANCE {
        return Err(KamError::InvalidArgument(format!(
            "base torus is not invariant: residual {:.3e}",
            e.l1_norm()
        )));
    }
    Ok(())
}

/// Order-by-order Lindstedt coefficients through order `n` around an invariant torus at `ε₀`.
pub fn lindstedt_expand<F: MapFamily>(
    fam: &F,
    k_base: &TorusEmbedding,
    mu_base: &[Complex64],
    eps0: Complex64,
    omega: &[f64],
    n: usize,
    divisor_floor: f64,
) -> Result<EpsilonJet> {
    if n > MAX_ORDER {
        return Err(KamError::InvalidArgument(format!(
            "order {n} exceeds the double-precision cap {MAX_ORDER}"
        )));
    }
    check_base(fam, k_base, mu_base, eps0, omega)?;
    let mut jet = EpsilonJet::constant(fam, k_base, mu_base, eps0);
    let base_mu: Vec<Jet> = mu_base.iter().map(|m| Jet::constant(*m, 1)).collect();
    let frame = build_frame(fam, &k_base.jet(), &base_mu, &Jet::constant(eps0, 1), omega)?;
    for j in 1..=n {
        let len = j + 1;
        let (e, _, _) = residual_jet_series(
            fam,
            &jet.periodic_jet(len),
            &jet.mu_jets(len),
            &Jet::variable(eps0, len),
            omega,
            false,
        )?;
        let ej = JetSeries::single(e.orders[j].clone());
        let corr = solve_linearized(&frame, &ej, omega, divisor_floor)?;
        jet.k_coeffs.push(corr.delta_k.orders[0].clone());
        jet.mu_coeffs.push(corr.sigma.orders[0].iter().copied().collect());
    }
    jet.lambda_coeffs = fam.conformal().jet(eps0, n + 1);
    Ok(jet)
}

/// One Newton step on jets: an order-`N` jet exact through order `N`
/// becomes an order-`2N+1` jet exact through order `2N+1`, normalized with
/// the base frame.
pub fn lindstedt_double<F: MapFamily>(
    fam: &F,
    jet: &EpsilonJet,
    omega: &[f64],
    divisor_floor: f64,
) -> Result<EpsilonJet> {
    let n = jet.order();
    let len = 2 * n + 2;
    if len - 1 > MAX_ORDER {
        return Err(KamError::InvalidArgument(format!(
            "doubling order {n} exceeds the double-precision cap {MAX_ORDER}"
        )));
    }
    let periodic = jet.periodic_jet(len);
    let mu = jet.mu_jets(len);
    let frame = build_frame(fam, &periodic, &mu, &Jet::variable(jet.eps0, len), omega)?;
    let corr = solve_linearized(&frame, &frame.e, omega, divisor_floor)?;
    let new_periodic = periodic.add(&corr.delta_k);
    let new_mu: Vec<Jet> = (0..jet.dim())
        .map(|i| {
            let s = Jet::from_coeffs(corr.sigma.orders.iter().map(|m| m[(i, 0)]).collect());
            &mu[i] + &s
        })
        .collect();
    let doubled = EpsilonJet::from_parts(fam, jet.eps0, new_periodic, &new_mu);
    normalize_jet(&doubled)
}

/// Reparametrize `K_ε ↦ K_ε∘T_{σ(ε)}` with `σ(ε₀) = 0` so that every order
/// satisfies the base-frame normalization.
pub fn normalize_jet(jet: &EpsilonJet) -> Result<EpsilonJet> {
    let d = jet.dim();
    let kmax = jet.kmax();
    let len = jet.order() + 1;
    let layout = GridLayout::oversampled(d, kmax);
    let (_, _, m0, _) = frame_matrices(&JetSeries::single(jet.k_coeffs[0].clone()), layout)?;
    let (m0_inv, _) = m0.inverse()?;
    let mut sigma: Vec<Jet> = vec![Jet::zeros(len); d];
    let mut out = jet.clone();
    for _ in 0..=len {
        out = shift_jet(jet, &sigma);
        let mut worst = 0.0f64;
        let mut g = vec![Jet::zeros(len); d];
        for j in 1..len {
            let grid = out.k_coeffs[j].to_grid(layout)?;
            let single = crate::field::JetGrid {
                layout,
                rows: 2 * d,
                cols: 1,
                orders: vec![grid],
            };
            let avg = m0_inv.mul(&single).to_series(kmax)?.orders[0].average();
            for i in 0..d {
                g[i].coeffs_mut()[j] = avg[i];
                worst = worst.max(avg[i].norm());
            }
        }
        if worst <= 1e-15 {
            break;
        }
        for i in 0..d {
            sigma[i] = &sigma[i] - &g[i];
        }
    }
    Ok(out)
}

/// `K_ε∘T_{σ(ε)}` for a jet shift with `σ_0 = 0`.
fn shift_jet(jet: &EpsilonJet, sigma: &[Jet]) -> EpsilonJet {
    let d = jet.dim();
    let len = jet.order() + 1;
    let periodic = jet.periodic_jet(len);
    let proto = &periodic.orders[0];
    let nm = proto.n_modes();
    let mut out = periodic.clone();
    for o in &mut out.orders {
        o.coeffs_mut().iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
    }
    for idx in 0..nm {
        let k = proto.mode(idx);
        let mut arg = Jet::zeros(len);
        for (ki, s) in k.iter().zip(sigma) {
            arg = &arg + &s.scale(Complex64::new(0.0, 2.0 * PI * *ki as f64));
        }
        let mult = arg.exp();
        for e in 0..2 * d {
            let coeff = Jet::from_coeffs((0..len).map(|j| periodic.orders[j].coeffs()[e * nm + idx]).collect());
            let shifted = &coeff * &mult;
            for j in 0..len {
                out.orders[j].coeffs_mut()[e * nm + idx] = shifted.coeff(j);
            }
        }
    }
    for (i, s) in sigma.iter().enumerate() {
        for j in 1..len {
            let mut add = vec![Complex64::new(0.0, 0.0); 2 * d];
            add[i] = s.coeff(j);
            out.orders[j].add_constant(&add);
        }
    }
    EpsilonJet {
        eps0: jet.eps0,
        k_coeffs: out.orders,
        mu_coeffs: jet.mu_coeffs.clone(),
        lambda_coeffs: jet.lambda_coeffs.clone(),
    }
}

/// Taylor coefficients `E_0 .. E_{2N+2}` of `f_{μ_ε,ε}∘K_ε − K_ε∘T_ω` for the truncated series.
pub fn residual_jet<F: MapFamily>(jet: &EpsilonJet, fam: &F, omega: &[f64]) -> Result<Vec<FourierSeries>> {
    let len = 2 * jet.order() + 3;
    let (e, _, _) = residual_jet_series(
        fam,
        &jet.periodic_jet(len),
        &jet.mu_jets(len),
        &Jet::variable(jet.eps0, len),
        omega,
        false,
    )?;
    Ok(e.orders)
}

/// `‖Σ_{n=N+1}^{2N+2} E_n (ε − ε₀)^n‖` on the torus: the leading part of the
/// truncation error, free of the cancellation a direct evaluation suffers
/// once it drops below machine precision times `‖K‖`.
pub fn truncation_residual(residual: &[FourierSeries], order: usize, eps0: Complex64, eps: Complex64) -> f64 {
    let t = eps - eps0;
    let mut acc = residual[order + 1].scale(t.powu(order as u32 + 1));
    for (n, e) in residual.iter().enumerate().skip(order + 2) {
        acc = &acc + &e.scale(t.powu(n as u32));
    }
    acc.l1_norm()
}
