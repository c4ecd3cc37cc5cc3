//! Scenario files: TOML with a fixed key set, validated up front so that
//! every problem is reported at once.

use std::fmt;
use std::path::{Path, PathBuf};

use krein_core::coefficient::Shape;
use krein_core::io::read_profile_samples;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoefficientKind {
    Zero,
    Constant,
    Box,
    Gaussian,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub kind: CoefficientKind,
    pub value: Option<f64>,
    pub amplitude: Option<f64>,
    pub start: Option<f64>,
    pub end: Option<f64>,
    pub center: Option<f64>,
    pub width: Option<f64>,
    /// CSV samples `r,value[,value_im]`, relative to the scenario file.
    pub path: Option<PathBuf>,
}

/// Grid of the main solve shared by the plancherel, normalization and
/// mr-check experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub r_step: f64,
    pub r_extent: f64,
    pub k_half_width: f64,
    pub k_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSpec {
    pub osc_factor: f64,
    pub zero_threshold: f64,
    /// Sanity ceiling for the discrete `int dsigma / (1 + k^2)`.
    pub mass_ceiling: f64,
    /// Tail tolerance for the Szegő limit when the coefficient has no support bound.
    pub tail_tolerance: Option<f64>,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self { osc_factor: 0.1, zero_threshold: 1e-3, mass_ceiling: 1e3, tail_tolerance: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentitiesSpec {
    pub step: f64,
    pub extent: f64,
    pub k_half_width: f64,
    pub k_step: f64,
    pub tolerance: f64,
    /// Bound on `|P - e^{irk}|` and `|P* - 1|`, checked when `A = 0`.
    pub free_tolerance: f64,
    pub halving_steps: Vec<f64>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for IdentitiesSpec {
    fn default() -> Self {
        Self {
            step: 1e-3,
            extent: 10.0,
            k_half_width: 10.0,
            k_step: 0.5,
            tolerance: 1e-7,
            free_tolerance: 1e-10,
            halving_steps: vec![0.01, 0.005, 0.0025],
            ratio_min: 12.0,
            ratio_max: 20.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlancherelSpec {
    pub tolerance: f64,
    /// Smooth bump data `exp(1 - 1/(1 - u^2))`, `u = (r - center)/half_width`.
    pub data_center: f64,
    pub data_half_width: f64,
}

impl Default for PlancherelSpec {
    fn default() -> Self {
        Self { tolerance: 1e-3, data_center: 2.0, data_half_width: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationSpec {
    pub ceiling: f64,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        Self { ceiling: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrCheckSpec {
    pub samples: u64,
    /// Random data lives on `[0, 2^depth]`.
    pub depth: u32,
    /// Largest integer endpoint; defaults to the last whole radius of the grid.
    pub n_max: Option<usize>,
    pub ceiling: f64,
    pub rho: Vec<f64>,
}

impl Default for MrCheckSpec {
    fn default() -> Self {
        Self { samples: 100, depth: 3, n_max: None, ceiling: 25.0, rho: vec![0.0, 1.0, 2.0, 4.0, 8.0] }
    }
}

/// `sin(frequency x) exp(-(x - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacketSpec {
    pub frequency: f64,
    pub center: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScatterSpec {
    pub times: Vec<f64>,
    pub r_step: f64,
    pub r_extent: f64,
    pub k_half_width: f64,
    pub k_step: f64,
    pub x_step: f64,
    pub x_extent: f64,
    pub packet: PacketSpec,
    /// Smooth band-pass `[lo0, lo1, hi0, hi1]` that puts the data in the test class.
    pub band: [f64; 4],
    pub window: [f64; 2],
    /// Gaps all below this count as converged even if not strictly decreasing.
    pub gap_floor: f64,
    pub distance_tolerance: f64,
    pub norm_tolerance: f64,
    pub limit_tolerance: f64,
    pub i_tolerance: f64,
    pub plancherel_tolerance: f64,
}

impl Default for ScatterSpec {
    fn default() -> Self {
        Self {
            times: vec![5.0, 10.0, 20.0, 40.0, 80.0],
            r_step: 0.1,
            r_extent: 10.0,
            k_half_width: 10.0,
            k_step: 0.0015,
            x_step: 0.05,
            x_extent: 1536.0,
            packet: PacketSpec { frequency: 5.0, center: 4.0, width: 1.0 },
            band: [0.5, 1.0, 8.5, 9.5],
            window: [1.0, 9.0],
            gap_floor: 1e-6,
            distance_tolerance: 5e-2,
            norm_tolerance: 1e-3,
            limit_tolerance: 1e-3,
            i_tolerance: 1e-2,
            plancherel_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagatorSpec {
    pub times: Vec<f64>,
    pub r_step: f64,
    pub r_extent: f64,
    pub k_half_width: f64,
    pub k_step: f64,
    pub x_step: f64,
    pub x_extent: f64,
    pub dt: f64,
    pub packet: PacketSpec,
    pub tolerance: f64,
    pub plancherel_tolerance: f64,
}

impl Default for PropagatorSpec {
    fn default() -> Self {
        Self {
            times: vec![1.0, 5.0, 10.0],
            r_step: 0.0125,
            r_extent: 10.0,
            k_half_width: 12.0,
            k_step: 0.008,
            x_step: 0.00625,
            x_extent: 160.0,
            dt: 1e-3,
            packet: PacketSpec { frequency: 5.0, center: 10.0, width: 2.0 },
            tolerance: 1e-3,
            plancherel_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AsymptCheck {
    Fresnel,
    Phase,
    Free,
    Uniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FresnelSpec {
    pub crossover: f64,
    pub order: usize,
    pub tolerance: f64,
    pub agreement_tolerance: f64,
    pub h0_tolerance: f64,
}

impl Default for FresnelSpec {
    fn default() -> Self {
        Self { crossover: 6.0, order: 10, tolerance: 1e-10, agreement_tolerance: 1e-8, h0_tolerance: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PhaseSpec {
    pub eps: Vec<f64>,
    pub nu: f64,
    pub ceiling: f64,
    /// Allowed relative deviation of `|I(eps)| / |I(eps/2)|` from 2 once `eps <= 1e-2`.
    pub halving_slack: f64,
}

impl Default for PhaseSpec {
    fn default() -> Self {
        Self {
            eps: (0..10).map(|j| 0.1 / 2f64.powi(j)).chain([1e-4]).collect(),
            nu: 1.0,
            ceiling: 2.0,
            halving_slack: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreeAsymptSpec {
    pub half_width: f64,
    pub step: f64,
    pub times: Vec<f64>,
    pub decay_factor: f64,
}

impl Default for FreeAsymptSpec {
    fn default() -> Self {
        Self { half_width: 1500.0, step: 0.1, times: vec![1.0, 10.0, 100.0], decay_factor: 10.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UniformSpec {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub k_half_width: f64,
    pub k_step: f64,
    pub ceiling: f64,
    pub flatness: f64,
}

impl Default for UniformSpec {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            center: 3.0,
            width: 1.0,
            times: vec![1.0, 4.0, 16.0, 64.0],
            alphas: vec![-1.0, 0.0, 6.0, 22.0],
            betas: vec![6.0, 10.0, 23.0],
            k_half_width: 12.0,
            k_step: 0.05,
            ceiling: 10.0,
            flatness: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AsymptSpec {
    pub checks: Vec<AsymptCheck>,
    pub fresnel: FresnelSpec,
    pub phase: PhaseSpec,
    pub free: FreeAsymptSpec,
    pub uniform: UniformSpec,
}

impl Default for AsymptSpec {
    fn default() -> Self {
        Self {
            checks: vec![AsymptCheck::Fresnel, AsymptCheck::Phase, AsymptCheck::Free, AsymptCheck::Uniform],
            fresnel: FresnelSpec::default(),
            phase: PhaseSpec::default(),
            free: FreeAsymptSpec::default(),
            uniform: UniformSpec::default(),
        }
    }
}

/// Parsed scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub name: String,
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    pub coefficient: CoefficientSpec,
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub identities: Option<IdentitiesSpec>,
    pub plancherel: Option<PlancherelSpec>,
    pub normalization: Option<NormalizationSpec>,
    pub mr_check: Option<MrCheckSpec>,
    pub scatter: Option<ScatterSpec>,
    pub propagator: Option<PropagatorSpec>,
    pub asympt: Option<AsymptSpec>,
}

/// A validated scenario with its coefficient resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub shape: Shape,
    pub source: Option<PathBuf>,
}

/// Every problem found in a scenario file, one entry per offending key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub origin: String,
    pub problems: Vec<String>,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid scenario {}:", self.origin)?;
        for p in &self.problems {
            writeln!(f, "  - {p}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ScenarioError {}

const BUNDLED: &[(&str, &str)] = &[
    ("free", include_str!("../scenarios/free.scn")),
    ("gauss03", include_str!("../scenarios/gauss03.scn")),
    ("box03", include_str!("../scenarios/box03.scn")),
    ("const1", include_str!("../scenarios/const1.scn")),
];

/// Names of the scenarios shipped with the binary.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _)| *n).collect()
}

pub fn bundled_text(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Loads `arg` as a path if it exists, otherwise as a bundled scenario name.
pub fn resolve(arg: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    let name = arg.strip_suffix(".scn").unwrap_or(arg);
    match bundled_text(name) {
        Some(text) => parse_scenario(text, None),
        None => Err(ScenarioError {
            origin: arg.to_owned(),
            problems: vec![format!("no such file and no bundled scenario (known: {})", bundled_names().join(", "))],
        }),
    }
}

pub fn load_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|e| ScenarioError {
        origin: path.display().to_string(),
        problems: vec![format!("cannot read file: {e}")],
    })?;
    parse_scenario(&text, Some(path))
}

/// Parses and validates scenario text; relative paths resolve against `source`'s directory.
pub fn parse_scenario(text: &str, source: Option<&Path>) -> Result<Scenario, ScenarioError> {
    let origin = source.map_or_else(|| "<bundled>".to_owned(), |p| p.display().to_string());
    let fail = |problems: Vec<String>| ScenarioError { origin: origin.clone(), problems };
    let mut unknown = Vec::new();
    let de = toml::Deserializer::new(text);
    let file: ScenarioFile = match serde_ignored::deserialize(de, |path| {
        // optional sections show up as a `?` segment
        unknown.push(path.to_string().replace("?.", ""))
    }) {
        Ok(f) => f,
        Err(e) => {
            let mut problems: Vec<String> = unknown.iter().map(|k| format!("unknown key `{k}`")).collect();
            problems.push(e.to_string().trim().to_owned());
            return Err(fail(problems));
        }
    };
    let mut problems: Vec<String> = unknown.iter().map(|k| format!("unknown key `{k}`")).collect();
    let base = source.and_then(Path::parent).map(Path::to_path_buf);
    let shape = resolve_shape(&file.coefficient, base.as_deref(), &mut problems);
    validate(&file, shape.as_ref(), &mut problems);
    if problems.is_empty() {
        Ok(Scenario { file, shape: shape.expect("shape resolved when no problems"), source: source.map(Path::to_path_buf) })
    } else {
        Err(fail(problems))
    }
}

/// Re-runs validation after a caller has edited `sc.file` in place.
pub fn revalidate(sc: &Scenario) -> Result<(), ScenarioError> {
    let mut problems = Vec::new();
    validate(&sc.file, Some(&sc.shape), &mut problems);
    if problems.is_empty() {
        Ok(())
    } else {
        let origin = sc.source.as_ref().map_or_else(|| "<bundled>".to_owned(), |p| p.display().to_string());
        Err(ScenarioError { origin, problems })
    }
}

fn resolve_shape(c: &CoefficientSpec, base: Option<&Path>, problems: &mut Vec<String>) -> Option<Shape> {
    let given: Vec<(&str, bool)> = vec![
        ("value", c.value.is_some()),
        ("amplitude", c.amplitude.is_some()),
        ("start", c.start.is_some()),
        ("end", c.end.is_some()),
        ("center", c.center.is_some()),
        ("width", c.width.is_some()),
        ("path", c.path.is_some()),
    ];
    let used: &[&str] = match c.kind {
        CoefficientKind::Zero => &[],
        CoefficientKind::Constant => &["value"],
        CoefficientKind::Box => &["amplitude", "start", "end"],
        CoefficientKind::Gaussian => &["amplitude", "center", "width"],
        CoefficientKind::Csv => &["path"],
    };
    let before = problems.len();
    for (key, present) in &given {
        if *present && !used.contains(key) {
            problems.push(format!("`coefficient.{key}` is not used by kind {:?}", c.kind).to_lowercase());
        }
        if !*present && used.contains(key) {
            problems.push(format!("`coefficient.{key}` is required by kind {:?}", c.kind).to_lowercase());
        }
    }
    if problems.len() > before {
        return None;
    }
    let re = |v: Option<f64>| Complex64::new(v.unwrap_or(0.0), 0.0);
    let shape = match c.kind {
        CoefficientKind::Zero => Shape::Zero,
        CoefficientKind::Constant => Shape::Constant { value: re(c.value) },
        CoefficientKind::Box => {
            Shape::Box { amplitude: re(c.amplitude), start: c.start.unwrap_or(0.0), end: c.end.unwrap_or(0.0) }
        }
        CoefficientKind::Gaussian => Shape::Gaussian {
            amplitude: re(c.amplitude),
            center: c.center.unwrap_or(0.0),
            width: c.width.unwrap_or(0.0),
        },
        CoefficientKind::Csv => {
            let rel = c.path.clone().unwrap_or_default();
            let path = match base {
                Some(b) if rel.is_relative() => b.join(&rel),
                _ => rel,
            };
            if !path.exists() {
                problems.push(format!("`coefficient.path`: file {} does not exist", path.display()));
                return None;
            }
            match read_profile_samples(&path) {
                Ok(p) => Shape::Sampled { step: p.grid().step(), values: p.values().to_vec() },
                Err(e) => {
                    problems.push(format!("`coefficient.path`: {e}"));
                    return None;
                }
            }
        }
    };
    if let Err(e) = krein_core::Coefficient::new(shape.clone(), krein_core::RadialGrid::new(1.0, 2).expect("valid grid")) {
        problems.push(format!("`coefficient`: {e}"));
        return None;
    }
    Some(shape)
}

struct Checker<'a> {
    problems: &'a mut Vec<String>,
}

impl Checker<'_> {
    fn positive(&mut self, key: &str, v: f64) {
        if !(v.is_finite() && v > 0.0) {
            self.problems.push(format!("`{key}` must be positive, got {v}"));
        }
    }

    fn nonnegative(&mut self, key: &str, v: f64) {
        if !(v.is_finite() && v >= 0.0) {
            self.problems.push(format!("`{key}` must be nonnegative, got {v}"));
        }
    }

    fn increasing(&mut self, key: &str, v: &[f64]) {
        if v.is_empty() || v.windows(2).any(|w| !(w[0] < w[1])) {
            self.problems.push(format!("`{key}` must be a nonempty increasing list"));
        }
    }

    fn fail(&mut self, msg: String) {
        self.problems.push(msg);
    }

    /// The x-grid is the radial grid halved, and must not alias under the k step.
    fn matched_grids(&mut self, sec: &str, r_step: f64, x_step: f64, x_extent: f64, k_step: f64) {
        if (x_step * 2.0 - r_step).abs() > 1e-12 * r_step {
            self.fail(format!("`{sec}.x_step` must be half of `{sec}.r_step` ({r_step}), got {x_step}"));
        }
        if x_extent >= std::f64::consts::PI / k_step {
            self.fail(format!(
                "`{sec}.x_extent` = {x_extent} reaches the aliasing distance pi/k_step = {:.1}",
                std::f64::consts::PI / k_step
            ));
        }
    }

    fn covers_support(&mut self, key: &str, extent: f64, shape: Option<&Shape>) {
        if let Some(r0) = shape.and_then(Shape::support_bound) {
            if extent < r0 {
                self.fail(format!("`{key}` = {extent} ends before the coefficient support {r0:.4}"));
            }
        }
    }
}

fn validate(f: &ScenarioFile, shape: Option<&Shape>, problems: &mut Vec<String>) {
    let mut c = Checker { problems };
    if f.name.trim().is_empty() {
        c.fail("`name` must not be empty".into());
    }
    c.positive("solver.osc_factor", f.solver.osc_factor);
    c.positive("solver.zero_threshold", f.solver.zero_threshold);
    c.positive("solver.mass_ceiling", f.solver.mass_ceiling);
    if let Some(t) = f.solver.tail_tolerance {
        c.positive("solver.tail_tolerance", t);
    }
    let needs_grid = f.plancherel.is_some() || f.normalization.is_some() || f.mr_check.is_some();
    match &f.grid {
        Some(g) => {
            c.positive("grid.r_step", g.r_step);
            c.positive("grid.r_extent", g.r_extent);
            c.positive("grid.k_half_width", g.k_half_width);
            c.positive("grid.k_step", g.k_step);
            if g.k_step >= g.k_half_width {
                c.fail("`grid.k_step` must be smaller than `grid.k_half_width`".into());
            }
            if g.r_extent < 2.0 * g.r_step {
                c.fail("`grid.r_extent` must span at least two steps".into());
            }
            if shape.is_some_and(|s| s.support_bound().is_none()) && f.solver.tail_tolerance.is_none() && needs_grid {
                c.fail("coefficient has no support bound: set `solver.tail_tolerance`".into());
            }
            c.covers_support("grid.r_extent", g.r_extent, shape);
        }
        None if needs_grid => c.fail("`grid` is required by the plancherel, normalization and mr_check experiments".into()),
        None => {}
    }
    if let Some(s) = &f.identities {
        c.positive("identities.step", s.step);
        c.positive("identities.extent", s.extent);
        c.positive("identities.k_half_width", s.k_half_width);
        c.positive("identities.k_step", s.k_step);
        c.positive("identities.tolerance", s.tolerance);
        c.positive("identities.free_tolerance", s.free_tolerance);
        c.positive("identities.ratio_min", s.ratio_min);
        c.positive("identities.ratio_max", s.ratio_max);
        if s.ratio_min >= s.ratio_max {
            c.fail("`identities.ratio_min` must be below `identities.ratio_max`".into());
        }
        if s.halving_steps.len() < 3 || s.halving_steps.windows(2).any(|w| (2.0 * w[1] - w[0]).abs() > 1e-12 * w[0]) {
            c.fail("`identities.halving_steps` needs at least three steps, each half the previous".into());
        }
    }
    if let Some(s) = &f.plancherel {
        c.positive("plancherel.tolerance", s.tolerance);
        c.positive("plancherel.data_half_width", s.data_half_width);
        if let Some(g) = &f.grid {
            if s.data_center - s.data_half_width < 0.0 || s.data_center + s.data_half_width > g.r_extent {
                c.fail("`plancherel.data_center` +- `data_half_width` must lie inside [0, grid.r_extent]".into());
            }
        }
    }
    if let Some(s) = &f.normalization {
        c.positive("normalization.ceiling", s.ceiling);
    }
    if let Some(s) = &f.mr_check {
        c.positive("mr_check.ceiling", s.ceiling);
        if s.samples == 0 {
            c.fail("`mr_check.samples` must be positive".into());
        }
        if let Some(g) = &f.grid {
            if 2f64.powi(s.depth as i32) > g.r_extent {
                c.fail(format!("`mr_check.depth`: 2^{} exceeds grid.r_extent = {}", s.depth, g.r_extent));
            }
            if let Some(n) = s.n_max {
                if n == 0 || n as f64 > g.r_extent {
                    c.fail(format!("`mr_check.n_max` = {n} must lie in [1, grid.r_extent]"));
                }
            }
            for &r in &s.rho {
                c.nonnegative("mr_check.rho", r);
                if r > g.r_extent {
                    c.fail(format!("`mr_check.rho` value {r} exceeds grid.r_extent"));
                }
            }
        }
        c.increasing("mr_check.rho", &s.rho);
    }
    if let Some(s) = &f.scatter {
        c.increasing("scatter.times", &s.times);
        for (k, v) in [
            ("r_step", s.r_step),
            ("r_extent", s.r_extent),
            ("k_half_width", s.k_half_width),
            ("k_step", s.k_step),
            ("x_step", s.x_step),
            ("x_extent", s.x_extent),
            ("packet.width", s.packet.width),
            ("gap_floor", s.gap_floor),
            ("distance_tolerance", s.distance_tolerance),
            ("norm_tolerance", s.norm_tolerance),
            ("limit_tolerance", s.limit_tolerance),
            ("i_tolerance", s.i_tolerance),
            ("plancherel_tolerance", s.plancherel_tolerance),
        ] {
            c.positive(&format!("scatter.{k}"), v);
        }
        c.matched_grids("scatter", s.r_step, s.x_step, s.x_extent, s.k_step);
        c.covers_support("scatter.r_extent", s.r_extent, shape);
        let [lo0, lo1, hi0, hi1] = s.band;
        if !(0.0 < lo0 && lo0 < lo1 && lo1 <= hi0 && hi0 < hi1) {
            c.fail("`scatter.band` needs 0 < lo0 < lo1 <= hi0 < hi1".into());
        }
        if !(s.window[0] < s.window[1]) {
            c.fail("`scatter.window` must be a nonempty interval".into());
        }
        if let Some(&t_max) = s.times.last() {
            let need = 2.0 * hi1 * t_max + 6.0 * s.packet.width;
            if s.x_extent < need {
                c.fail(format!(
                    "`scatter.x_extent` = {} is below the sizing rule 2 b t_max + 6 width = {need}",
                    s.x_extent
                ));
            }
            if s.times[0] < 1.0 {
                c.fail("`scatter.times` must start at t >= 1".into());
            }
        }
        if shape.is_some_and(|s| !s.is_real()) {
            c.fail("`scatter` needs a real coefficient".into());
        }
    }
    if let Some(s) = &f.propagator {
        c.increasing("propagator.times", &s.times);
        for (k, v) in [
            ("r_step", s.r_step),
            ("r_extent", s.r_extent),
            ("k_half_width", s.k_half_width),
            ("k_step", s.k_step),
            ("x_step", s.x_step),
            ("x_extent", s.x_extent),
            ("dt", s.dt),
            ("packet.width", s.packet.width),
            ("tolerance", s.tolerance),
            ("plancherel_tolerance", s.plancherel_tolerance),
        ] {
            c.positive(&format!("propagator.{k}"), v);
        }
        c.matched_grids("propagator", s.r_step, s.x_step, s.x_extent, s.k_step);
        c.covers_support("propagator.r_extent", s.r_extent, shape);
        if shape.is_some_and(|s| !s.is_real()) {
            c.fail("`propagator` needs a real coefficient".into());
        }
    }
    if let Some(s) = &f.asympt {
        c.positive("asympt.fresnel.crossover", s.fresnel.crossover);
        c.positive("asympt.fresnel.tolerance", s.fresnel.tolerance);
        c.positive("asympt.fresnel.agreement_tolerance", s.fresnel.agreement_tolerance);
        c.positive("asympt.fresnel.h0_tolerance", s.fresnel.h0_tolerance);
        if s.fresnel.order == 0 {
            c.fail("`asympt.fresnel.order` must be positive".into());
        }
        c.positive("asympt.phase.nu", s.phase.nu);
        c.positive("asympt.phase.ceiling", s.phase.ceiling);
        c.positive("asympt.phase.halving_slack", s.phase.halving_slack);
        if s.phase.eps.is_empty() || s.phase.eps.iter().any(|&e| !(e > 0.0 && e < 1.0)) {
            c.fail("`asympt.phase.eps` values must lie in (0, 1)".into());
        }
        c.positive("asympt.free.half_width", s.free.half_width);
        c.positive("asympt.free.step", s.free.step);
        c.positive("asympt.free.decay_factor", s.free.decay_factor);
        c.increasing("asympt.free.times", &s.free.times);
        c.positive("asympt.uniform.width", s.uniform.width);
        c.positive("asympt.uniform.k_half_width", s.uniform.k_half_width);
        c.positive("asympt.uniform.k_step", s.uniform.k_step);
        c.positive("asympt.uniform.ceiling", s.uniform.ceiling);
        c.positive("asympt.uniform.flatness", s.uniform.flatness);
        c.increasing("asympt.uniform.times", &s.uniform.times);
    }
    let any = f.identities.is_some()
        || needs_grid
        || f.scatter.is_some()
        || f.propagator.is_some()
        || f.asympt.is_some();
    if !any {
        c.fail("scenario declares no experiments".into());
    }
}
