use std::fmt::Write as _;

use kamlind::atlas::{
    classify_grid, epsilon_balls, excluded_balls, excluded_measure, render_balls_table, render_grid_table, render_svg,
    render_sweep_table, sweep_continuation, AreaMethod, BallGeometry, Plane,
};
use kamlind::cohomology::solve_twisted;
use kamlind::diophantine::divisor_trace;
use kamlind::fourier::io::{fmt_c64, fmt_f64};
use kamlind::lindstedt::{lindstedt_double, lindstedt_expand, residual_jet, truncation_residual};
use kamlind::maps::verify_conformal;
use kamlind::newton::{lagrangian_defect, run_newton};
use kamlind::{Complex64, EpsilonJet, FourierSeries, GoodSetParams, KamError, KamSolution, MapFamily, TorusEmbedding};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{c, ConfigError, RunConfig};
use crate::output::RunDir;

pub struct Ctx<'a> {
    pub cfg: &'a RunConfig,
    pub seed: u64,
    pub force: bool,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Flat torus `y = ω` with the drift `(1 − λ(ε))ω` that makes it invariant when the kick vanishes.
fn flat_start(ctx: &Ctx, eps: Complex64) -> (TorusEmbedding, Vec<Complex64>) {
    let w: Vec<Complex64> = ctx.cfg.omega().iter().map(|&x| Complex64::new(x, 0.0)).collect();
    let lam = ctx.cfg.family().lambda(eps);
    let mu = w.iter().map(|&x| (1.0 - lam) * x).collect();
    (TorusEmbedding::flat(w.len(), ctx.cfg.solver.kmax, &w), mu)
}

/// Add a real perturbation `amp · e^{−|k|} · U(−1, 1)` to the modes `1 <= |k| <= 3` of both components.
fn perturb(k: &TorusEmbedding, amp: f64, seed: u64) -> anyhow::Result<TorusEmbedding> {
    if amp == 0.0 {
        return Ok(k.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = k.periodic().clone();
    for row in 0..p.rows() {
        for j in 1..=3i64.min(k.kmax() as i64) {
            let z =
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * amp * (-(j as f64)).exp();
            p.set(&[j], row, 0, p.get(&[j], row, 0) + z)?;
            p.set(&[-j], row, 0, p.get(&[-j], row, 0) + z.conj())?;
        }
    }
    Ok(TorusEmbedding::new(p)?)
}

fn trace_table(sol: &KamSolution) -> String {
    let mut out = String::from("# newton trace\n# iteration residual residual_strip rho kmax correction sigma\n");
    for r in &sol.iteration_trace {
        writeln!(
            out,
            "{} {} {} {} {} {} {}",
            r.iteration,
            fmt_f64(r.residual),
            fmt_f64(r.residual_strip),
            fmt_f64(r.rho),
            r.kmax,
            fmt_f64(r.correction_norm),
            fmt_f64(r.sigma_norm)
        )
        .unwrap();
    }
    out
}

pub fn solve(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let eps = c(ctx.cfg.solve.eps);
    let (k0, mu0) = flat_start(ctx, eps);
    let k0 = perturb(&k0, ctx.cfg.solve.perturbation, ctx.seed)?;
    let sol = run_newton(
        &k0,
        &mu0,
        &ctx.cfg.family(),
        eps,
        &ctx.cfg.omega(),
        &ctx.cfg.newton(ctx.force),
    )?;
    out.write("solution.txt", sol.to_doc().render().as_bytes())?;
    out.write("trace.txt", trace_table(&sol).as_bytes())?;
    eprintln!(
        "solved at eps = {eps}: residual {:.3e} after {} iterations, mu = {}",
        sol.residual_norm,
        sol.iteration_trace.len().saturating_sub(1),
        sol.mu[0]
    );
    Ok(0)
}

/// Solution at `eps0` to expand around: exact at `ε = 0`, from Newton otherwise.
fn base_solution(ctx: &Ctx, eps0: Complex64) -> anyhow::Result<(TorusEmbedding, Vec<Complex64>)> {
    let (k0, mu0) = flat_start(ctx, eps0);
    if eps0 == zero() {
        return Ok((k0, mu0));
    }
    let mut cfg = ctx.cfg.newton(ctx.force);
    cfg.tol = cfg.tol.min(1e-12);
    let sol = run_newton(&k0, &mu0, &ctx.cfg.family(), eps0, &ctx.cfg.omega(), &cfg)?;
    Ok((sol.k, sol.mu))
}

fn jet_report(ctx: &Ctx, jet: &EpsilonJet) -> anyhow::Result<String> {
    let res = residual_jet(jet, &ctx.cfg.family(), &ctx.cfg.omega())?;
    let n = jet.order();
    let mut out = format!("# jet residual order={n} eps0={}\n# order l1_norm\n", fmt_c64(jet.eps0));
    for (j, e) in res.iter().enumerate() {
        writeln!(out, "{j} {}", fmt_f64(e.l1_norm())).unwrap();
    }
    out.push_str("# probe: eps_re eps_im truncated_residual\n");
    for p in &ctx.cfg.lindstedt.probe {
        let e = c(*p);
        writeln!(
            out,
            "{} {}",
            fmt_c64(e),
            fmt_f64(truncation_residual(&res, n, jet.eps0, e))
        )
        .unwrap();
    }
    Ok(out)
}

fn expand(ctx: &Ctx, order: usize) -> anyhow::Result<EpsilonJet> {
    let eps0 = c(ctx.cfg.lindstedt.eps0);
    let (k, mu) = base_solution(ctx, eps0)?;
    Ok(lindstedt_expand(
        &ctx.cfg.family(),
        &k,
        &mu,
        eps0,
        &ctx.cfg.omega(),
        order,
        ctx.cfg.solver.divisor_floor,
    )?)
}

pub fn lindstedt(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let jet = expand(ctx, ctx.cfg.lindstedt.order)?;
    out.write("jet.txt", jet.to_doc().render().as_bytes())?;
    out.write("residual.txt", jet_report(ctx, &jet)?.as_bytes())?;
    eprintln!("order {} jet around {}", jet.order(), jet.eps0);
    Ok(0)
}

pub fn double(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let mut jet = expand(ctx, ctx.cfg.double.start_order)?;
    for _ in 0..ctx.cfg.double.doublings {
        jet = lindstedt_double(&ctx.cfg.family(), &jet, &ctx.cfg.omega(), ctx.cfg.solver.divisor_floor)?;
    }
    out.write("jet.txt", jet.to_doc().render().as_bytes())?;
    out.write("residual.txt", jet_report(ctx, &jet)?.as_bytes())?;
    eprintln!("doubled to order {}", jet.order());
    Ok(0)
}

fn require_good_set(cfg: &RunConfig, command: &str) -> anyhow::Result<GoodSetParams> {
    cfg.good_set()
        .ok_or_else(|| ConfigError(format!("the {command} command needs a [good_set] table")).into())
}

pub fn atlas(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let cfg = ctx.cfg;
    let a = &cfg.atlas;
    let params = require_good_set(cfg, "atlas")?;
    let omega = cfg.omega();
    let conformal = cfg.family().conformal();
    let geom = match a.constant {
        Some(constant) => BallGeometry { params, constant },
        None => BallGeometry::covering(params),
    };
    let plane = cfg.plane();
    let mut balls = excluded_balls(&geom, &omega, a.k_max, a.rho);
    if plane == Plane::Epsilon {
        balls = epsilon_balls(&balls, &conformal);
    }
    let bounds = cfg.atlas_bounds();
    let grid = classify_grid(
        plane,
        bounds,
        (a.resolution[0], a.resolution[1]),
        &params,
        &conformal,
        &omega,
        a.k_scan,
    )?;
    out.write("balls.txt", render_balls_table(&balls, plane).as_bytes())?;
    out.write("grid.txt", render_grid_table(&grid).as_bytes())?;
    out.write(
        "atlas.svg",
        render_svg(bounds, Some(&grid), &balls, a.svg_width).as_bytes(),
    )?;
    let mut trace = String::from("# divisors lambda=1\n# k divisor running_sup\n");
    for s in divisor_trace(Complex64::new(1.0, 0.0), &omega, cfg.frequency.tau, a.k_scan) {
        let k: Vec<String> = s.k.iter().map(|x| x.to_string()).collect();
        writeln!(
            trace,
            "{} {} {}",
            k.join(","),
            fmt_f64(s.divisor),
            fmt_f64(s.running_sup)
        )
        .unwrap();
    }
    out.write("divisors.txt", trace.as_bytes())?;
    if a.measure {
        let rep = excluded_measure(&geom, &omega, a.measure_k_max, a.rho, ctx.seed)?;
        let mut m = format!(
            "# excluded area exponent={}\n# rho balls area union_bound method\n",
            fmt_f64(rep.exponent)
        );
        for e in &rep.estimates {
            let method = match e.method {
                AreaMethod::DisjointSum => "disjoint",
                AreaMethod::MonteCarlo => "montecarlo",
            };
            writeln!(
                m,
                "{} {} {} {} {method}",
                fmt_f64(e.rho),
                e.ball_count,
                fmt_f64(e.area),
                fmt_f64(e.union_bound)
            )
            .unwrap();
        }
        out.write("measure.txt", m.as_bytes())?;
    }
    eprintln!(
        "{} balls, {} of {} cells inside",
        balls.len(),
        grid.inside_count(),
        grid.cells.len()
    );
    Ok(0)
}

pub fn sweep(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let path: Vec<Complex64> = ctx.cfg.sweep.path.iter().map(|p| c(*p)).collect();
    let (k0, mu0) = flat_start(ctx, path[0]);
    let rep = sweep_continuation(
        &ctx.cfg.family(),
        &path,
        &k0,
        &mu0,
        &ctx.cfg.omega(),
        &ctx.cfg.newton(ctx.force),
        &ctx.cfg.step_policy(),
    )?;
    out.write("sweep.txt", render_sweep_table(&rep).as_bytes())?;
    let last = rep.solutions.last().expect("a sweep keeps its start");
    out.write("solution.txt", last.to_doc().render().as_bytes())?;
    eprintln!(
        "sweep reached eps = {} over {} accepted points, length ratio {:.4}",
        last.eps,
        rep.solutions.len(),
        rep.length_ratio()
    );
    if let Some(o) = &rep.obstruction {
        eprintln!(
            "obstructed by k = {:?} at eps = {} (divisor {:.3e})",
            o.k, o.eps, o.divisor
        );
        return Ok(3);
    }
    Ok(if rep.reached_end { 0 } else { 4 })
}

struct Check {
    name: &'static str,
    value: f64,
    tol: f64,
}

fn check(name: &'static str, value: anyhow::Result<f64>, tol: f64) -> Check {
    let value = match value {
        Ok(v) => v,
        Err(e) => {
            eprintln!("{name}: {e:#}");
            f64::INFINITY
        }
    };
    Check { name, value, tol }
}

pub fn verify(ctx: &Ctx, out: &mut RunDir) -> anyhow::Result<i32> {
    let cfg = ctx.cfg;
    let fam = cfg.family();
    let omega = cfg.omega();
    let eps = Complex64::new(cfg.verify.eps, 0.0);
    let samples = cfg.verify.samples;
    let mut newton_cfg = cfg.newton(true);
    newton_cfg.tol = 1e-13;
    let mut checks = vec![check(
        "conformality_defect",
        Ok(
            [zero(), eps, Complex64::new(0.5 * cfg.verify.eps, 0.5 * cfg.verify.eps)]
                .iter()
                .map(|&e| verify_conformal(&fam, samples, e))
                .fold(0.0, f64::max),
        ),
        1e-13,
    )];
    checks.push(check(
        "cohomology_reconstruction",
        (|| {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
            let mut worst = 0.0f64;
            for _ in 0..samples.min(50) {
                let mut eta = FourierSeries::scalar_zeros(1, 32);
                for z in eta.coeffs_mut() {
                    *z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                }
                let lambda = Complex64::from_polar(rng.random_range(0.5..1.5), rng.random_range(-3.0..3.0));
                let sol = solve_twisted(&eta, lambda, &omega)?;
                let recon = &sol.phi.scale(lambda) - &sol.phi.shift(&omega);
                worst = worst.max((&recon - &eta).max_coeff() / eta.max_coeff());
            }
            Ok(worst)
        })(),
        1e-12,
    ));
    checks.push(check(
        "newton_residual_at_zero",
        (|| {
            let (k0, mu0) = flat_start(ctx, zero());
            Ok(run_newton(&k0, &mu0, &fam, zero(), &omega, &newton_cfg)?.residual_norm)
        })(),
        1e-13,
    ));
    let solved = (|| {
        let (k0, mu0) = flat_start(ctx, eps);
        Ok::<_, anyhow::Error>(run_newton(&k0, &mu0, &fam, eps, &omega, &newton_cfg)?)
    })();
    let (residual, lagrangian) = match &solved {
        Ok(s) => (Ok(s.residual_norm), lagrangian_defect(&s.k).map_err(Into::into)),
        Err(e) => (Err(anyhow::anyhow!("{e:#}")), Err(anyhow::anyhow!("{e:#}"))),
    };
    checks.push(check("newton_residual", residual, 1e-13));
    checks.push(check("lagrangian_defect", lagrangian, 1e-10));
    let low_orders = |jet: &EpsilonJet| -> anyhow::Result<f64> {
        let res = residual_jet(jet, &fam, &omega)?;
        Ok(res
            .iter()
            .take(jet.order() + 1)
            .map(|e| e.l1_norm())
            .fold(0.0, f64::max))
    };
    let floor = cfg.solver.divisor_floor;
    let (base_k, base_mu) = flat_start(ctx, zero());
    let expanded = |n| lindstedt_expand(&fam, &base_k, &base_mu, zero(), &omega, n, floor);
    checks.push(check(
        "lindstedt_low_orders",
        expanded(4).map_err(Into::into).and_then(|j| low_orders(&j)),
        1e-10,
    ));
    checks.push(check(
        "doubling_low_orders",
        expanded(1)
            .and_then(|j| lindstedt_double(&fam, &j, &omega, floor))
            .map_err(Into::into)
            .and_then(|j| low_orders(&j)),
        1e-10,
    ));
    // order-4 jet against the Newton solution, in units of ε^5
    checks.push(check(
        "lindstedt_vs_newton",
        (|| {
            let jet = expanded(4)?;
            let (k, mu) = jet.evaluate(eps);
            let s = solved.as_ref().map_err(|e| anyhow::anyhow!("{e:#}"))?;
            let (kn, _) = kamlind::newton::normalize_embedding(&s.k, &k, &Default::default())?;
            let kmax = kn.kmax().max(k.kmax());
            let dk = (kn.resize(kmax).periodic() - k.resize(kmax).periodic()).max_coeff();
            Ok(dk.max((s.mu[0] - mu[0]).norm()) / cfg.verify.eps.abs().powi(5).max(f64::MIN_POSITIVE))
        })(),
        1e3,
    ));
    if let Some(params) = cfg.good_set() {
        checks.push(check(
            "ball_symmetry",
            Ok({
                let balls = excluded_balls(&BallGeometry::covering(params), &omega, 50, 0.25);
                balls
                    .iter()
                    .map(|b| {
                        let neg: Vec<i64> = b.k.iter().map(|x| -x).collect();
                        balls.iter().find(|o| o.k == neg).map_or(f64::INFINITY, |o| {
                            (o.center - b.center.conj()).norm() + (o.radius - b.radius).abs()
                        })
                    })
                    .fold(0.0, f64::max)
            }),
            1e-14,
        ));
    }
    let mut report = String::from("# verify\n# status check value tolerance\n");
    let mut failed = 0;
    for ch in &checks {
        let pass = ch.value <= ch.tol;
        failed += usize::from(!pass);
        writeln!(
            report,
            "{} {} {} {}",
            if pass { "PASS" } else { "FAIL" },
            ch.name,
            fmt_f64(ch.value),
            fmt_f64(ch.tol)
        )
        .unwrap();
        eprintln!(
            "{} {:<32} {:.3e} (tol {:.0e})",
            if pass { "PASS" } else { "FAIL" },
            ch.name,
            ch.value,
            ch.tol
        );
    }
    out.write("verify.txt", report.as_bytes())?;
    Ok(if failed == 0 { 0 } else { 1 })
}

/// Exit status for an error: 64 for configuration problems, the error
/// class for solver failures, 1 otherwise.
pub fn exit_status(err: &anyhow::Error) -> i32 {
    if err.downcast_ref::<ConfigError>().is_some() {
        return 64;
    }
    match err.downcast_ref::<KamError>() {
        Some(KamError::NonDegeneracyFailure { .. } | KamError::FrameSingular { .. }) => 2,
        Some(KamError::DivisorTooSmall { .. }) => 3,
        Some(KamError::NoConvergence { .. } | KamError::NormalizationDiverged { .. }) => 4,
        _ => 1,
    }
}
