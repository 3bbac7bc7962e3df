//! Continuation sweeps in the complex ε plane.

use std::f64::consts::PI;

use kamlind::atlas::{sweep_continuation, StepPolicy, StepStatus};
use kamlind::newton::{normalize_embedding, NormalizeConfig};
use kamlind::{golden_mean, Complex64, DissipativeStandardMap, GoodSetParams, NewtonConfig, TorusEmbedding};

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn flat(kmax: usize) -> TorusEmbedding {
    TorusEmbedding::flat(1, kmax, &[c(golden_mean())])
}

#[test]
fn real_ray_reaches_its_end() {
    let fam = DissipativeStandardMap::linear(0.5);
    let w = [golden_mean()];
    let rep = sweep_continuation(
        &fam,
        &[c(0.0), c(0.2)],
        &flat(32),
        &[c(0.0)],
        &w,
        &NewtonConfig::default(),
        &StepPolicy::default(),
    )
    .unwrap();
    assert!(rep.reached_end);
    assert!(rep.obstruction.is_none());
    assert!((rep.solutions.last().unwrap().eps - 0.2).norm() < 1e-15);
    assert!(rep.solutions.iter().all(|s| s.residual_norm <= 1e-12));
    assert!((rep.length_ratio() - 1.0).abs() < 1e-12);
}

#[test]
fn reversed_sweep_returns_to_the_initial_torus() {
    let fam = DissipativeStandardMap::linear(0.5);
    let w = [golden_mean()];
    let cfg = NewtonConfig {
        tol: 1e-13,
        ..Default::default()
    };
    let policy = StepPolicy::default();
    let out = sweep_continuation(&fam, &[c(0.0), c(0.1)], &flat(32), &[c(0.0)], &w, &cfg, &policy).unwrap();
    let start = &out.solutions[0];
    let end = out.solutions.last().unwrap();
    let back = sweep_continuation(&fam, &[end.eps, c(0.0)], &end.k, &end.mu, &w, &cfg, &policy).unwrap();
    assert!(back.reached_end);
    let home = back.solutions.last().unwrap();
    let (normalized, _) = normalize_embedding(&home.k, &start.k, &NormalizeConfig::default()).unwrap();
    let kmax = normalized.kmax().max(start.k.kmax());
    let diff = (normalized.resize(kmax).periodic() - start.k.resize(kmax).periodic()).max_coeff();
    assert!(diff <= 1e-8, "round trip moved the torus by {diff:e}");
    assert!((home.mu[0] - start.mu[0]).norm() <= 1e-8);
}

#[test]
fn detour_goes_around_the_resonance_within_the_length_bound() {
    let w = [golden_mean()];
    let resonance = Complex64::from_polar(1.0, 2.0 * PI * w[0]);
    // aim past the ε-preimage of e^{2πiω} so that the straight ray crosses its ball
    let target = (resonance - 1.0) * 1.3;
    let params = GoodSetParams::new(100.0, 1, 1.0, 2.0).unwrap();
    let cfg = NewtonConfig {
        good_set: Some(params),
        ..Default::default()
    };
    let policy = StepPolicy {
        // steps shorter than the ball radius so the ray cannot jump over it
        initial_step: 0.02,
        max_step: 0.02,
        min_step: 1e-4,
        detour: true,
        ..Default::default()
    };
    let fam = DissipativeStandardMap::linear(0.01);
    let rep = sweep_continuation(&fam, &[c(0.0), target], &flat(32), &[c(0.0)], &w, &cfg, &policy).unwrap();
    assert!(rep
        .steps
        .iter()
        .any(|s| matches!(&s.status, StepStatus::Detour(k) if k == &vec![1])));
    assert!(
        rep.reached_end,
        "sweep stopped: {:?}",
        rep.steps.last().map(|s| &s.status)
    );
    assert!(rep.obstruction.is_none());
    let ratio = rep.length_ratio();
    assert!(ratio > 1.0 && ratio <= PI * 1.05, "length ratio {ratio}");
}

#[test]
fn resonant_ray_without_detour_stops_at_the_ball() {
    let w = [golden_mean()];
    let resonance = Complex64::from_polar(1.0, 2.0 * PI * w[0]);
    let target = resonance - 1.0;
    let cfg = NewtonConfig {
        good_set: Some(GoodSetParams::new(100.0, 1, 1.0, 2.0).unwrap()),
        ..Default::default()
    };
    let policy = StepPolicy {
        initial_step: 0.05,
        max_step: 0.1,
        min_step: 1e-4,
        ..Default::default()
    };
    let fam = DissipativeStandardMap::linear(0.01);
    let rep = sweep_continuation(&fam, &[c(0.0), target], &flat(32), &[c(0.0)], &w, &cfg, &policy).unwrap();
    let obs = rep.obstruction.expect("obstruction");
    assert_eq!(obs.k, vec![1]);
    assert!(!rep.reached_end);
    assert!((obs.last_good - target).norm() < target.norm());
    assert!(matches!(rep.steps.last().unwrap().status, StepStatus::Obstructed(_)));
}

#[test]
fn invalid_policy_is_rejected() {
    let fam = DissipativeStandardMap::linear(0.5);
    let policy = StepPolicy {
        min_step: 0.0,
        ..Default::default()
    };
    let res = sweep_continuation(
        &fam,
        &[c(0.0), c(0.1)],
        &flat(8),
        &[c(0.0)],
        &[golden_mean()],
        &NewtonConfig::default(),
        &policy,
    );
    assert!(res.is_err());
}
