//! Scenario files, the experiment runner and its JSON report.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod report;
pub mod scenario;

use std::path::PathBuf;
use std::time::Instant;

use krein_core::io::CacheStatus;
use krein_core::{RadialGrid, SpectralGrid};
use serde::Serialize;
use serde_json::{json, Value};

use experiments::Solved;
pub use report::{ExperimentRecord, RunReport};
pub use scenario::{load_scenario, parse_scenario, resolve, AsymptCheck, Scenario, ScenarioError};

/// Experiment names in run order.
pub const EXPERIMENTS: &[&str] =
    &["identities", "solve", "plancherel", "normalization", "mr_check", "scatter", "propagator", "asympt"];

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where solutions are cached; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    /// Where CSV artifacts go; `None` writes nothing.
    pub out_dir: Option<PathBuf>,
    pub osc_factor: Option<f64>,
    pub zero_threshold: Option<f64>,
    /// Restrict the run to these experiments. The main solve runs whenever
    /// something selected needs it.
    pub only: Option<Vec<String>>,
    pub asympt_check: Option<AsymptCheck>,
}

impl RunOptions {
    fn selected(&self, name: &str) -> bool {
        self.only.as_ref().is_none_or(|o| o.iter().any(|n| n == name))
    }
}

struct Recorder<'a> {
    scenario: &'a Scenario,
    solver: scenario::SolverSpec,
    records: Vec<ExperimentRecord>,
}

impl Recorder<'_> {
    fn inputs_hash(&self, section: &impl Serialize) -> String {
        report::short_hash(&(&self.scenario.shape, section, &self.solver, self.scenario.file.seed))
    }

    fn record(
        &mut self,
        name: &str,
        section: &impl Serialize,
        f: impl FnOnce() -> anyhow::Result<(bool, Value, Option<CacheStatus>)>,
    ) -> bool {
        let inputs_hash = self.inputs_hash(section);
        let start = Instant::now();
        let result = f();
        let runtime_s = start.elapsed().as_secs_f64();
        let rec = match result {
            Ok((pass, observed, cache)) => {
                ExperimentRecord { name: name.into(), inputs_hash, pass, runtime_s, cache, observed, error: None }
            }
            Err(e) => ExperimentRecord {
                name: name.into(),
                inputs_hash,
                pass: false,
                runtime_s,
                cache: None,
                observed: Value::Null,
                error: Some(format!("{e:#}")),
            },
        };
        let pass = rec.pass;
        self.records.push(rec);
        pass
    }
}

fn no_cache(r: anyhow::Result<(bool, Value)>) -> anyhow::Result<(bool, Value, Option<CacheStatus>)> {
    r.map(|(p, v)| (p, v, None))
}

/// Runs every experiment the scenario declares and collects the report.
pub fn run(sc: &Scenario, opts: &RunOptions) -> anyhow::Result<RunReport> {
    let file = &sc.file;
    let mut solver = file.solver.clone();
    if let Some(v) = opts.osc_factor {
        solver.osc_factor = v;
    }
    if let Some(v) = opts.zero_threshold {
        solver.zero_threshold = v;
    }
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let cache = opts.cache_dir.as_deref();
    let out = opts.out_dir.as_deref();
    let mut artifacts = Vec::new();
    let mut rec = Recorder { scenario: sc, solver: solver.clone(), records: Vec::new() };

    if let Some(spec) = file.identities.as_ref().filter(|_| opts.selected("identities")) {
        rec.record("identities", spec, || {
            let (p, v, c) = experiments::identities(&sc.shape, spec, &solver, cache)?;
            Ok((p, v, Some(c)))
        });
    }

    let wants_main = (file.plancherel.is_some() && opts.selected("plancherel"))
        || (file.normalization.is_some() && opts.selected("normalization"))
        || (file.mr_check.is_some() && opts.selected("mr_check"))
        || (file.grid.is_some() && opts.selected("solve"));
    let mut main: Option<Solved> = None;
    let mut main_error = None;
    if let (Some(grid), true) = (&file.grid, wants_main) {
        rec.record("solve", grid, || {
            let solved = experiments::solve_and_measure(
                &sc.shape,
                RadialGrid::with_extent(grid.r_step, grid.r_extent)?,
                SpectralGrid::new(grid.k_half_width, grid.k_step)?,
                &solver,
                cache,
            );
            match solved {
                Ok(s) => {
                    let (p, v) = experiments::solve_summary(&s, &solver, out, &mut artifacts)?;
                    let c = s.cache;
                    main = Some(s);
                    Ok((p, v, Some(c)))
                }
                Err(e) => {
                    main_error = Some(format!("{e:#}"));
                    Err(e)
                }
            }
        });
    }
    let need_main = |name: &str| -> anyhow::Result<&Solved> {
        main.as_ref().ok_or_else(|| {
            anyhow::anyhow!("{name} needs the main solve, which failed: {}", main_error.as_deref().unwrap_or("not run"))
        })
    };

    if let Some(spec) = file.plancherel.as_ref().filter(|_| opts.selected("plancherel")) {
        rec.record("plancherel", &(spec, &file.grid), || no_cache(experiments::plancherel(need_main("plancherel")?, spec)));
    }
    if let Some(spec) = file.normalization.as_ref().filter(|_| opts.selected("normalization")) {
        rec.record("normalization", &(spec, &file.grid), || {
            no_cache(experiments::normalization(need_main("normalization")?, spec))
        });
    }
    if let Some(spec) = file.mr_check.as_ref().filter(|_| opts.selected("mr_check")) {
        rec.record("mr_check", &(spec, &file.grid), || {
            no_cache(experiments::mr_check(need_main("mr_check")?, spec, file.seed, out, &mut artifacts))
        });
    }
    if let Some(spec) = file.scatter.as_ref().filter(|_| opts.selected("scatter")) {
        rec.record("scatter", spec, || {
            let (p, v, c) = experiments::scatter(&sc.shape, spec, &solver, cache, out, &mut artifacts)?;
            Ok((p, v, Some(c)))
        });
    }
    if let Some(spec) = file.propagator.as_ref().filter(|_| opts.selected("propagator")) {
        rec.record("propagator", spec, || {
            let (p, v, c) = experiments::propagator(&sc.shape, spec, &solver, cache)?;
            Ok((p, v, Some(c)))
        });
    }
    if let Some(spec) = file.asympt.as_ref().filter(|_| opts.selected("asympt")) {
        rec.record("asympt", &(spec, opts.asympt_check), || no_cache(experiments::asympt(spec, opts.asympt_check)));
    }

    let records = rec.records;
    if records.is_empty() {
        anyhow::bail!("nothing to run: no selected experiment is declared in scenario {}", file.name);
    }
    let report = RunReport {
        scenario: file.name.clone(),
        seed: file.seed,
        global_pass: records.iter().all(|r| r.pass),
        experiments: records,
        artifacts,
    };
    if let Some(dir) = out {
        let path = dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

/// One line per experiment, for terminal output.
pub fn summary_lines(report: &RunReport) -> Vec<String> {
    let mut lines: Vec<String> = report
        .experiments
        .iter()
        .map(|e| {
            let status = if e.pass { "PASS" } else { "FAIL" };
            let detail = e.error.clone().unwrap_or_else(|| headline(&e.name, &e.observed));
            format!("{status} {:<14} {:>8.2}s  {detail}", e.name, e.runtime_s)
        })
        .collect();
    lines.push(format!(
        "{} scenario {} (seed {})",
        if report.global_pass { "PASS" } else { "FAIL" },
        report.scenario,
        report.seed
    ));
    lines
}

fn headline(name: &str, v: &Value) -> String {
    let keys: &[&str] = match name {
        "identities" => &["integral_residual", "conjugation_residual"],
        "solve" => &["szego_radius", "min_modulus"],
        "plancherel" => &["plancherel_defect", "e_defect", "psi_defect"],
        "normalization" => &["ratio", "attained_at"],
        "mr_check" => &["max_ratio", "max_weighted_ratio"],
        "scatter" => &["limit_norm_ratio", "final_window_distance"],
        "propagator" => &["max_difference"],
        _ => &[],
    };
    if keys.is_empty() {
        if let Value::Object(map) = v {
            return map
                .iter()
                .map(|(k, sub)| format!("{k}={}", sub.get("pass").cloned().unwrap_or(json!(null))))
                .collect::<Vec<_>>()
                .join(" ");
        }
    }
    keys.iter()
        .map(|k| match v.get(*k) {
            Some(Value::Number(n)) => format!("{k}={:.3e}", n.as_f64().unwrap_or(f64::NAN)),
            Some(x) => format!("{k}={x}"),
            None => format!("{k}=-"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}
