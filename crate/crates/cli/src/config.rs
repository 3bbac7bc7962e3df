//! Run configuration: a TOML file with one table per concern.
//!
//! Unknown keys are rejected, every number must be finite, and frequencies
//! are given symbolically (`"golden"`, `"silver"`), as exact rationals
//! (`"3/5"`) or as plain numbers.

use std::path::Path;

use anyhow::{bail, Context};
use kamlind::atlas::{Bounds, Plane, StepPolicy};
use kamlind::{golden_mean, Complex64, ConformalFactor, DissipativeStandardMap, GoodSetParams, NewtonConfig};
use serde::Deserialize;

/// A failure to read or validate the configuration (exit status 64).
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub family: FamilySection,
    pub frequency: FrequencySection,
    #[serde(default)]
    pub solver: SolverSection,
    pub good_set: Option<GoodSetSection>,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub lindstedt: LindstedtSection,
    #[serde(default)]
    pub double: DoubleSection,
    #[serde(default)]
    pub atlas: AtlasSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySection {
    pub name: String,
    pub kappa: f64,
    #[serde(default = "one")]
    pub alpha: f64,
    #[serde(default = "one_u32")]
    pub a: u32,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum FrequencyValue {
    Number(f64),
    Text(String),
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencySection {
    pub omega: Vec<FrequencyValue>,
    #[serde(default = "one")]
    pub tau: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub rho: f64,
    pub delta0: Option<f64>,
    pub kmax: usize,
    pub kmax_limit: usize,
    pub divisor_floor: f64,
    pub k_scan: usize,
    pub tail_threshold: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = NewtonConfig::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            rho: d.rho,
            delta0: d.delta0,
            kmax: 32,
            kmax_limit: d.kmax_limit,
            divisor_floor: d.divisor_floor,
            k_scan: d.k_scan,
            tail_threshold: d.tail_threshold,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSetSection {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub r0: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    /// `[re, im]`.
    pub eps: [f64; 2],
    /// Amplitude of a seeded random perturbation of the initial torus.
    pub perturbation: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self {
            eps: [0.0, 0.0],
            perturbation: 0.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LindstedtSection {
    pub order: usize,
    pub eps0: [f64; 2],
    /// Points where the truncated-jet residual is reported.
    pub probe: Vec<[f64; 2]>,
}

impl Default for LindstedtSection {
    fn default() -> Self {
        Self {
            order: 4,
            eps0: [0.0, 0.0],
            probe: vec![[1e-3, 0.0], [1e-2, 0.0]],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoubleSection {
    /// Order of the order-by-order jet the doublings start from.
    pub start_order: usize,
    pub doublings: usize,
}

impl Default for DoubleSection {
    fn default() -> Self {
        Self {
            start_order: 1,
            doublings: 2,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtlasSection {
    pub plane: String,
    /// `[re_min, re_max, im_min, im_max]`.
    pub bounds: [f64; 4],
    pub resolution: [usize; 2],
    pub k_scan: usize,
    /// Largest `|k|` of the listed balls.
    pub k_max: usize,
    /// Annulus scale `ρ` for the ball list and the area fit.
    pub rho: f64,
    /// Ball radius constant; the covering constant `2^{N+1}` when absent.
    pub constant: Option<f64>,
    pub measure: bool,
    pub measure_k_max: usize,
    pub svg_width: usize,
}

impl Default for AtlasSection {
    fn default() -> Self {
        Self {
            plane: "epsilon".into(),
            bounds: [-0.5, 0.5, -0.5, 0.5],
            resolution: [200, 200],
            k_scan: 200,
            k_max: 100,
            rho: 0.25,
            constant: None,
            measure: false,
            measure_k_max: 10_000,
            svg_width: 800,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Polyline vertices `[re, im]`.
    pub path: Vec<[f64; 2]>,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub grow: f64,
    pub detour: bool,
    pub detour_margin: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let p = StepPolicy::default();
        Self {
            path: vec![[0.0, 0.0], [0.1, 0.0]],
            initial_step: p.initial_step,
            min_step: p.min_step,
            max_step: p.max_step,
            grow: p.grow,
            detour: p.detour,
            detour_margin: p.detour_margin,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub samples: usize,
    /// Real `ε` where the Newton and Lindstedt checks run.
    pub eps: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            samples: 100,
            eps: 0.02,
        }
    }
}

fn one() -> f64 {
    1.0
}

fn one_u32() -> u32 {
    1
}

pub fn c(z: [f64; 2]) -> Complex64 {
    Complex64::new(z[0], z[1])
}

fn parse_frequency(v: &FrequencyValue) -> anyhow::Result<f64> {
    let x = match v {
        FrequencyValue::Number(x) => *x,
        FrequencyValue::Text(t) => match t.trim() {
            "golden" => golden_mean(),
            "silver" => std::f64::consts::SQRT_2 - 1.0,
            s => match s.split_once('/') {
                Some((p, q)) => {
                    let p: i64 = p.trim().parse().with_context(|| format!("bad numerator in '{s}'"))?;
                    let q: i64 = q.trim().parse().with_context(|| format!("bad denominator in '{s}'"))?;
                    if q == 0 {
                        bail!("zero denominator in '{s}'");
                    }
                    p as f64 / q as f64
                }
                None => s.parse().with_context(|| format!("unknown frequency '{s}'"))?,
            },
        },
    };
    Ok(x)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), ConfigError> {
        let bytes = std::fs::read(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        let cfg = Self::parse(text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Ok((cfg, bytes))
    }

    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> anyhow::Result<()> {
        let mut nums: Vec<(&str, f64)> = vec![
            ("family.kappa", self.family.kappa),
            ("family.alpha", self.family.alpha),
            ("frequency.tau", self.frequency.tau),
            ("solver.tol", self.solver.tol),
            ("solver.rho", self.solver.rho),
            ("solver.divisor_floor", self.solver.divisor_floor),
            ("solver.tail_threshold", self.solver.tail_threshold),
            ("solve.perturbation", self.solve.perturbation),
            ("atlas.rho", self.atlas.rho),
            ("sweep.initial_step", self.sweep.initial_step),
            ("sweep.min_step", self.sweep.min_step),
            ("sweep.max_step", self.sweep.max_step),
            ("sweep.grow", self.sweep.grow),
            ("sweep.detour_margin", self.sweep.detour_margin),
            ("verify.eps", self.verify.eps),
        ];
        nums.extend(self.solve.eps.iter().map(|&x| ("solve.eps", x)));
        nums.extend(self.lindstedt.eps0.iter().map(|&x| ("lindstedt.eps0", x)));
        nums.extend(self.lindstedt.probe.iter().flatten().map(|&x| ("lindstedt.probe", x)));
        nums.extend(self.atlas.bounds.iter().map(|&x| ("atlas.bounds", x)));
        nums.extend(self.sweep.path.iter().flatten().map(|&x| ("sweep.path", x)));
        nums.extend(self.solver.delta0.map(|x| ("solver.delta0", x)));
        nums.extend(self.atlas.constant.map(|x| ("atlas.constant", x)));
        if let Some(g) = &self.good_set {
            nums.extend([("good_set.A", g.a), ("good_set.r0", g.r0)]);
        }
        if let Some((key, x)) = nums.iter().find(|(_, x)| !x.is_finite()) {
            bail!("{key} must be finite, got {x}");
        }
        if self.family.name != "dissipative_standard" {
            bail!(
                "family.name: unknown family '{}' (expected 'dissipative_standard')",
                self.family.name
            );
        }
        if self.family.a == 0 {
            bail!("family.a must be at least 1");
        }
        if self.frequency.omega.len() != 1 {
            bail!(
                "frequency.omega: the standard family needs exactly 1 frequency, got {}",
                self.frequency.omega.len()
            );
        }
        for v in &self.frequency.omega {
            let w = parse_frequency(v).context("frequency.omega")?;
            if !w.is_finite() {
                bail!("frequency.omega must be finite");
            }
        }
        if self.sweep.path.is_empty() {
            bail!("sweep.path needs at least one vertex");
        }
        parse_plane(&self.atlas.plane)?;
        Ok(())
    }

    pub fn omega(&self) -> Vec<f64> {
        self.frequency
            .omega
            .iter()
            .map(|v| parse_frequency(v).unwrap())
            .collect()
    }

    pub fn family(&self) -> DissipativeStandardMap {
        DissipativeStandardMap::new(
            self.family.kappa,
            ConformalFactor::new(Complex64::new(self.family.alpha, 0.0), self.family.a),
        )
    }

    pub fn good_set(&self) -> Option<GoodSetParams> {
        self.good_set
            .as_ref()
            .map(|g| GoodSetParams::new(g.a, g.n, self.frequency.tau, g.r0).expect("validated good set"))
    }

    pub fn newton(&self, force: bool) -> NewtonConfig {
        let s = &self.solver;
        NewtonConfig {
            tol: s.tol,
            max_iter: s.max_iter,
            rho: s.rho,
            delta0: s.delta0,
            divisor_floor: s.divisor_floor,
            good_set: self.good_set(),
            k_scan: s.k_scan,
            force,
            tail_threshold: s.tail_threshold,
            kmax_limit: s.kmax_limit,
        }
    }

    pub fn step_policy(&self) -> StepPolicy {
        let s = &self.sweep;
        StepPolicy {
            initial_step: s.initial_step,
            min_step: s.min_step,
            max_step: s.max_step,
            grow: s.grow,
            detour: s.detour,
            detour_margin: s.detour_margin,
        }
    }

    pub fn plane(&self) -> Plane {
        parse_plane(&self.atlas.plane).expect("validated plane")
    }

    pub fn atlas_bounds(&self) -> Bounds {
        let [re_min, re_max, im_min, im_max] = self.atlas.bounds;
        Bounds {
            re_min,
            re_max,
            im_min,
            im_max,
        }
    }
}

fn parse_plane(s: &str) -> anyhow::Result<Plane> {
    match s {
        "lambda" => Ok(Plane::Lambda),
        "epsilon" => Ok(Plane::Epsilon),
        other => bail!("atlas.plane: expected 'lambda' or 'epsilon', got '{other}'"),
    }
}
