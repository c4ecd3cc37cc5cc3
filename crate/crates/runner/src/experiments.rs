//! One function per experiment kind. Each returns its observations as JSON
//! and a pass flag; errors are turned into failed records by the caller.

use std::f64::consts::PI;
use std::path::Path;

use krein_core::asymptotics::{
    fresnel_coeffs, fresnel_h0, free_asymptotic_defect, gauss_kronrod, stationary_phase_check, BandPacket,
    FresnelExpansion, LineProfile, UniformBoundConfig, uniform_bound_check,
};
use krein_core::coefficient::Shape;
use krein_core::grid::{norm_l2_sigma, SpectralGrid};
use krein_core::io::{solve_cached, write_measure, write_profile, write_spectral, write_spectral_real, CacheStatus};
use krein_core::krein::{
    halving_study, normalization_constant, residual_conjugation_identity, residual_integral_identity,
    spectral_density, stummel_norm, szego, DiracEigenfunctions, SzegoFunction,
};
use krein_core::maximal::{maximal_continuous, maximal_integer, random_profile, tail_oscillation};
use krein_core::scattering::{
    exhaustion_diagnostic, fd_extrapolated_at, perturbed_propagate_spectral, spectral_i, wave_operator_run,
    FdHamiltonian,
};
use krein_core::transforms::{band_pass, e_plancherel_defect, plancherel_parts, psi_plancherel_defect, BandWindow};
use krein_core::{Coefficient, KreinSolution, RadialGrid, SampledProfile, SpectralMeasure};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::{
    AsymptCheck, AsymptSpec, IdentitiesSpec, MrCheckSpec, NormalizationSpec, PacketSpec, PlancherelSpec,
    PropagatorSpec, ScatterSpec, SolverSpec,
};

pub type Outcome = anyhow::Result<(bool, Value)>;

/// Solution, Szegő function and measure on one pair of grids.
pub struct Solved {
    pub sol: KreinSolution,
    pub pi: SzegoFunction,
    pub m: SpectralMeasure,
    pub cache: CacheStatus,
}

pub fn solve_and_measure(
    shape: &Shape,
    r_grid: RadialGrid,
    k_grid: SpectralGrid,
    solver: &SolverSpec,
    cache: Option<&Path>,
) -> anyhow::Result<Solved> {
    let coef = Coefficient::new(shape.clone(), r_grid)?;
    let (sol, cache) = solve_cached(&coef, r_grid, k_grid, solver.osc_factor, cache)?;
    let pi = szego(&sol, solver.tail_tolerance)?;
    let m = spectral_density(&pi, solver.zero_threshold)?;
    Ok(Solved { sol, pi, m, cache })
}

/// Summary of the main solve.
pub fn solve_summary(s: &Solved, solver: &SolverSpec, out: Option<&Path>, artifacts: &mut Vec<String>) -> Outcome {
    let mass = s.m.check_mass_ceiling(solver.mass_ceiling);
    let stummel = stummel_norm(s.sol.coefficient())?;
    if let Some(dir) = out {
        let path = dir.join("sigma.csv");
        write_measure(&path, &s.m)?;
        artifacts.push(path.display().to_string());
        let pi = krein_core::transforms::SpectralFunction::new(*s.pi.grid(), s.pi.values().to_vec())?;
        let path = dir.join("pi.csv");
        write_spectral(&path, &pi)?;
        artifacts.push(path.display().to_string());
    }
    let pi_deviation = s.pi.values().iter().map(|v| (v - 1.0).norm()).fold(0.0, f64::max);
    let density_deviation =
        s.m.density().iter().map(|d| (2.0 * PI * d - 1.0).abs()).fold(0.0, f64::max);
    let observed = json!({
        "r_step": s.sol.r_grid().step(),
        "r_extent": s.sol.r_grid().last(),
        "k_half_width": s.sol.k_grid().half_width(),
        "k_step": s.sol.k_grid().step(),
        "szego_radius": s.pi.radius(),
        "min_modulus": s.pi.min_modulus(),
        "edge_deviation": s.pi.edge_deviation(),
        "max_pi_minus_one": pi_deviation,
        "max_relative_density_deviation": density_deviation,
        "point_masses": s.m.point_masses().len(),
        "weighted_mass": mass.as_ref().ok(),
        "stummel_norm": stummel,
    });
    Ok((mass.is_ok(), observed))
}

pub fn identities(shape: &Shape, spec: &IdentitiesSpec, solver: &SolverSpec, cache: Option<&Path>) -> anyhow::Result<(bool, Value, CacheStatus)> {
    let grid = RadialGrid::with_extent(spec.step, spec.extent)?;
    let kg = SpectralGrid::new(spec.k_half_width, spec.k_step)?;
    let coef = Coefficient::new(shape.clone(), grid)?;
    let (sol, status) = solve_cached(&coef, grid, kg, solver.osc_factor, cache)?;
    let integral = residual_integral_identity(&sol);
    let conjugation = residual_conjugation_identity(&sol);
    let mut free_deviation: f64 = 0.0;
    for i in 0..kg.len() {
        let k = kg.node(i);
        for j in 0..grid.len() {
            let e = Complex64::from_polar(1.0, k * grid.node(j));
            free_deviation = free_deviation.max((sol.p(j, i) - e).norm()).max((sol.p_star(j, i) - 1.0).norm());
        }
    }
    // P* stops moving once the coefficient has vanished
    let tail_drift = coef.support_bound().filter(|&r0| r0 <= grid.last()).map(|r0| {
        let j0 = grid.ceil_index(r0);
        (0..kg.len())
            .flat_map(|i| {
                let col = sol.p_star_column(i);
                col[j0..].iter().map(move |v| (v - col[j0]).norm())
            })
            .fold(0.0, f64::max)
    });
    let study = halving_study(&coef, &spec.halving_steps, spec.halving_extent(), kg, solver.osc_factor)?;
    let stummel = stummel_norm(&coef)?;
    let is_free = matches!(shape, Shape::Zero);
    let pass = integral < spec.tolerance
        && conjugation < spec.tolerance
        && study.within(spec.ratio_min, spec.ratio_max)
        && (!is_free || free_deviation < spec.free_tolerance)
        && tail_drift.is_none_or(|d| d == 0.0);
    let observed = json!({
        "step": spec.step,
        "integral_residual": integral,
        "conjugation_residual": conjugation,
        "free_deviation": free_deviation,
        "tail_drift": tail_drift,
        "stummel_norm": stummel,
        "halving": study,
    });
    Ok((pass, observed, status))
}

impl IdentitiesSpec {
    fn halving_extent(&self) -> f64 {
        self.extent.min(10.0)
    }
}

fn bump(center: f64, half_width: f64) -> impl Fn(f64) -> Complex64 {
    move |r| {
        let u = (r - center) / half_width;
        if u.abs() >= 1.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((1.0 - 1.0 / (1.0 - u * u)).exp(), 0.0)
        }
    }
}

pub fn plancherel(s: &Solved, spec: &PlancherelSpec) -> Outcome {
    let (c, w) = (spec.data_center, spec.data_half_width);
    let top = c + w;
    let rg = *s.sol.r_grid();
    let f = SampledProfile::from_fn(rg, Some(top), bump(c, w));
    let parts = plancherel_parts(&f, &s.sol, &s.m, top)?;
    // F decays like 1/k once A is nonzero, so the band edge leaves a tail
    let defect_p = parts.closed_defect();
    let x_step = 0.5 * rg.step();
    let x_grid = RadialGrid::new(x_step, ((top + 1.0) / x_step).ceil() as usize)?;
    let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid)?;
    let fx = SampledProfile::from_fn(x_grid, Some(top), bump(c, w));
    let defect_e = e_plancherel_defect(&fx, &view, &s.m)?;
    let defect_psi = psi_plancherel_defect(&fx, &view, &s.m.doubled())?;
    let worst = defect_p.max(defect_e).max(defect_psi);
    let observed = json!({
        "plancherel_defect": defect_p,
        "truncated_defect": parts.truncated_defect(),
        "tail_estimate": parts.tail / parts.mass,
        "e_defect": defect_e,
        "psi_defect": defect_psi,
        "k_half_width": s.sol.k_grid().half_width(),
        "tolerance": spec.tolerance,
    });
    Ok((worst < spec.tolerance, observed))
}

pub fn normalization(s: &Solved, spec: &NormalizationSpec) -> Outcome {
    let n = normalization_constant(&s.sol, &s.m)?;
    let st = stummel_norm(s.sol.coefficient())?;
    let ratio = n.constant / (1.0 + st * st);
    let observed = json!({
        "normalization_constant": n.constant,
        "attained_at": n.attained_at,
        "stummel_norm": st,
        "ratio": ratio,
        "ceiling": spec.ceiling,
    });
    Ok((ratio <= spec.ceiling, observed))
}

#[derive(Serialize)]
struct TailEntry {
    rho: f64,
    norm: f64,
    ratio: f64,
}

pub fn mr_check(
    s: &Solved,
    spec: &MrCheckSpec,
    seed: u64,
    out: Option<&Path>,
    artifacts: &mut Vec<String>,
) -> Outcome {
    let rg = *s.sol.r_grid();
    let support = 2f64.powi(spec.depth as i32);
    let n_max = spec.n_max.unwrap_or((rg.last() + 1e-9).floor() as usize);
    let mut integer = Vec::with_capacity(spec.samples as usize);
    let mut weighted = Vec::with_capacity(spec.samples as usize);
    for idx in 0..spec.samples {
        let f = random_profile(rg, support, seed, idx)?;
        let rep = maximal_integer(&f, &s.sol, &s.m, n_max)?;
        if idx == 0 {
            if let Some(dir) = out {
                let path = dir.join("mr_M.csv");
                write_spectral_real(&path, s.sol.k_grid(), &rep.m, "M")?;
                artifacts.push(path.display().to_string());
            }
        }
        integer.push(rep.ratio);
        weighted.push(maximal_continuous(&f, &s.sol, &s.m, true)?.ratio);
    }
    let tail = spec
        .rho
        .iter()
        .map(|&rho| {
            let r = tail_oscillation(&s.sol, &s.m, rho)?;
            Ok(TailEntry { rho, norm: r.norm_m_sq.sqrt(), ratio: r.ratio })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let nonincreasing = tail.windows(2).all(|w| w[1].norm <= w[0].norm);
    let r0 = s.sol.coefficient().support_bound();
    let zero_beyond_support = tail.iter().filter(|t| r0.is_some_and(|r0| t.rho >= r0)).all(|t| t.norm == 0.0);
    let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    let (max_int, max_w) = (max(&integer), max(&weighted));
    let pass = max_int <= spec.ceiling && max_w <= spec.ceiling && nonincreasing && zero_beyond_support;
    let observed = json!({
        "variant": "integer",
        "samples": spec.samples,
        "n_max": n_max,
        "L": 1.0,
        "max_ratio": max_int,
        "mean_ratio": integer.iter().sum::<f64>() / integer.len() as f64,
        "max_weighted_ratio": max_w,
        "ceiling": spec.ceiling,
        "tail": tail,
        "tail_nonincreasing": nonincreasing,
        "tail_zero_beyond_support": zero_beyond_support,
    });
    Ok((pass, observed))
}

fn packet_fn(p: PacketSpec) -> impl Fn(f64) -> Complex64 + Copy {
    move |x| {
        let u = (x - p.center) / p.width;
        Complex64::new((p.frequency * x).sin() * (-0.5 * u * u).exp(), 0.0)
    }
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub fn scatter(
    shape: &Shape,
    spec: &ScatterSpec,
    solver: &SolverSpec,
    cache: Option<&Path>,
    out: Option<&Path>,
    artifacts: &mut Vec<String>,
) -> anyhow::Result<(bool, Value, CacheStatus)> {
    let rg = RadialGrid::with_extent(spec.r_step, spec.r_extent)?;
    let kg = SpectralGrid::new(spec.k_half_width, spec.k_step)?;
    let s = solve_and_measure(shape, rg, kg, solver, cache)?;
    let m2 = s.m.doubled();
    let x_grid = RadialGrid::with_extent(spec.x_step, spec.x_extent)?;
    let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid)?;
    let [lo0, lo1, hi0, hi1] = spec.band;
    let band = BandWindow::new(lo0, lo1, hi0, hi1)?;
    let f = band_pass(&SampledProfile::from_fn(x_grid, None, packet_fn(spec.packet)), &band)?;
    let run = wave_operator_run(&f, &view, &s.pi, &m2, &spec.times, spec.plancherel_tolerance)?;
    let fnorm = run.f_norm;
    let exh = exhaustion_diagnostic(
        &run,
        &m2,
        (spec.window[0], spec.window[1]),
        spec.distance_tolerance,
        spec.norm_tolerance * fnorm,
    )?;
    let t_max = *spec.times.last().expect("validated nonempty");
    let i_norm = norm_l2_sigma(spectral_i(&f, &band, t_max, &view, &m2)?.values(), &m2, None)?;
    if let Some(dir) = out {
        for (t, u) in run.times.iter().zip(&run.iterates) {
            let path = dir.join(format!("u_t{t}.csv"));
            write_profile(&path, u)?;
            artifacts.push(path.display().to_string());
        }
        let path = dir.join("p.csv");
        write_spectral(&path, &run.predicted_limit)?;
        artifacts.push(path.display().to_string());
    }
    let norm_ratios: Vec<f64> = run.norms.iter().map(|n| n / fnorm).collect();
    let decreasing = strictly_decreasing(&run.cauchy_gaps);
    let negligible = run.cauchy_gaps.iter().all(|&g| g < spec.gap_floor);
    let limit_ratio = run.limit_norm / fnorm;
    let final_distance = *exh.distances.last().expect("one distance per time");
    let pass = (decreasing || negligible)
        && norm_ratios.iter().all(|r| (r - 1.0).abs() <= spec.norm_tolerance)
        && (limit_ratio - 1.0).abs() <= spec.limit_tolerance
        && final_distance < spec.distance_tolerance
        && (i_norm / fnorm - 1.0).abs() < spec.i_tolerance;
    let observed = json!({
        "times": run.times,
        "f_norm": fnorm,
        "gaps": run.cauchy_gaps,
        "gaps_strictly_decreasing": decreasing,
        "norm_ratios": norm_ratios,
        "limit_norm_ratio": limit_ratio,
        "window": spec.window,
        "window_distances": exh.distances,
        "final_window_distance": final_distance,
        "i_norm_ratio": i_norm / fnorm,
        "szego_min_modulus": s.pi.min_modulus(),
    });
    Ok((pass, observed, s.cache))
}

pub fn propagator(
    shape: &Shape,
    spec: &PropagatorSpec,
    solver: &SolverSpec,
    cache: Option<&Path>,
) -> anyhow::Result<(bool, Value, CacheStatus)> {
    let rg = RadialGrid::with_extent(spec.r_step, spec.r_extent)?;
    let kg = SpectralGrid::new(spec.k_half_width, spec.k_step)?;
    let s = solve_and_measure(shape, rg, kg, solver, cache)?;
    let m2 = s.m.doubled();
    let x_grid = RadialGrid::with_extent(spec.x_step, spec.x_extent)?;
    let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid)?;
    let packet = packet_fn(spec.packet);
    let f = SampledProfile::from_fn(x_grid, None, packet);
    let spectral = spec
        .times
        .iter()
        .map(|&t| Ok(perturbed_propagate_spectral(&f, t, &view, &m2, spec.plancherel_tolerance)?))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let coef = Coefficient::new(shape.clone(), rg)?;
    let build = |g: RadialGrid| FdHamiltonian::from_coefficient(&coef, g);
    let fd = fd_extrapolated_at(&packet, x_grid, &spec.times, spec.dt, &build)?;
    let diffs = spectral
        .iter()
        .zip(&fd)
        .map(|(a, b)| Ok(a.combine(1.0.into(), b, (-1.0).into())?.discrete_l2_norm()))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let max_diff = diffs.iter().copied().fold(0.0, f64::max);
    let observed = json!({
        "times": spec.times,
        "f_norm": f.discrete_l2_norm(),
        "l2_differences": diffs,
        "max_difference": max_diff,
        "spectral_norms": spectral.iter().map(SampledProfile::discrete_l2_norm).collect::<Vec<_>>(),
        "fd_norms": fd.iter().map(SampledProfile::discrete_l2_norm).collect::<Vec<_>>(),
        "tolerance": spec.tolerance,
    });
    Ok((max_diff < spec.tolerance, observed, s.cache))
}

fn fresnel_check(spec: &AsymptSpec) -> Outcome {
    let fs = &spec.fresnel;
    let exp = FresnelExpansion::new(fs.crossover, fs.order, fs.tolerance)?;
    let x0 = fs.crossover;
    let quad = exp.quadrature(x0)?.value;
    let series = exp.series(x0);
    let agreement = (quad - series.value).norm();
    // H(0) rebuilt from int_0^{x0} e^{it^2} plus the series tail
    let head = gauss_kronrod(&|t| Complex64::from_polar(1.0, t * t), 0.0, x0, 1e-14)?;
    let h0_closed = Complex64::from_polar(PI.sqrt() / 2.0, PI / 4.0);
    let h0_error = (head + series.value - h0_closed).norm();
    let h0_lib_error = (fresnel_h0() - h0_closed).norm();
    let c0 = fresnel_coeffs(1)[0].to_complex();
    let c0_exact = c0 == Complex64::new(0.0, 0.5);
    let x = 10.0;
    let leading = (exp.eval(x)?.value - Complex64::new(0.0, 1.0) * Complex64::from_polar(1.0, x * x) / (2.0 * x)).norm();
    let pass = agreement < fs.agreement_tolerance
        && h0_error < fs.h0_tolerance
        && h0_lib_error < fs.h0_tolerance
        && c0_exact
        && series.within_tolerance
        && leading < 1.5e-3;
    Ok((
        pass,
        json!({
            "crossover": x0,
            "order": fs.order,
            "branch_agreement": agreement,
            "series_error_estimate": series.error_estimate,
            "h0_error": h0_error,
            "c0": [c0.re, c0.im],
            "c0_exact": c0_exact,
            "leading_term_defect_at_10": leading,
        }),
    ))
}

fn phase_check(spec: &AsymptSpec) -> Outcome {
    let ps = &spec.phase;
    let linear = stationary_phase_check(&|u| u, &ps.eps, ps.nu, ps.ceiling)?;
    let quadratic = stationary_phase_check(&|u| u * (1.0 - u), &ps.eps, ps.nu, ps.ceiling)?;
    let halving: Vec<(f64, f64)> = quadratic
        .entries
        .windows(2)
        .filter(|w| w[0].eps <= 1e-2 && (w[0].eps / w[1].eps - 2.0).abs() < 1e-9)
        .map(|w| (w[0].eps, w[0].integral.norm() / w[1].integral.norm()))
        .collect();
    let halving_ok = halving.iter().all(|(_, q)| (q / 2.0 - 1.0).abs() <= ps.halving_slack);
    let pass = linear.pass && quadratic.pass && halving_ok;
    let ratios = |r: &krein_core::asymptotics::PhaseReport| r.entries.iter().map(|e| (e.eps, e.ratio)).collect::<Vec<_>>();
    Ok((
        pass,
        json!({
            "nu": ps.nu,
            "ceiling": ps.ceiling,
            "linear_max_ratio": linear.max_ratio,
            "quadratic_max_ratio": quadratic.max_ratio,
            "linear_ratios": ratios(&linear),
            "quadratic_ratios": ratios(&quadratic),
            "halving_ratios": halving,
            "halving_ok": halving_ok,
        }),
    ))
}

fn free_check(spec: &AsymptSpec) -> Outcome {
    let fs = &spec.free;
    let grid = SpectralGrid::new(fs.half_width, fs.step)?;
    let h = LineProfile::from_fn(grid, |x| Complex64::new((-0.5 * x * x).exp(), 0.0));
    let defects = fs.times.iter().map(|&t| Ok(free_asymptotic_defect(&h, t)?)).collect::<anyhow::Result<Vec<f64>>>()?;
    let decay = defects[0] / defects[defects.len() - 1];
    let nonincreasing = defects.windows(2).all(|w| w[1] <= w[0]);
    Ok((
        decay >= fs.decay_factor && nonincreasing,
        json!({ "times": fs.times, "defects": defects, "decay": decay, "nonincreasing": nonincreasing }),
    ))
}

fn uniform_check(spec: &AsymptSpec) -> Outcome {
    let us = &spec.uniform;
    let packet = BandPacket { amplitude: us.amplitude, center: us.center, width: us.width };
    let cfg = UniformBoundConfig {
        times: us.times.clone(),
        alphas: us.alphas.clone(),
        betas: us.betas.clone(),
        k_grid: SpectralGrid::new(us.k_half_width, us.k_step)?,
        ceiling: us.ceiling,
        flatness: us.flatness,
    };
    let r = uniform_bound_check(&packet, &cfg)?;
    Ok((r.pass, serde_json::to_value(&r)?))
}

pub fn asympt(spec: &AsymptSpec, only: Option<AsymptCheck>) -> Outcome {
    let mut pass = true;
    let mut observed = serde_json::Map::new();
    for &check in &spec.checks {
        if only.is_some_and(|o| o != check) {
            continue;
        }
        let (name, result) = match check {
            AsymptCheck::Fresnel => ("fresnel", fresnel_check(spec)),
            AsymptCheck::Phase => ("phase", phase_check(spec)),
            AsymptCheck::Free => ("free", free_check(spec)),
            AsymptCheck::Uniform => ("uniform", uniform_check(spec)),
        };
        let (ok, mut value) = match result {
            Ok(v) => v,
            Err(e) => (false, json!({ "error": e.to_string() })),
        };
        if let Value::Object(map) = &mut value {
            map.insert("pass".into(), Value::Bool(ok));
        }
        pass &= ok;
        observed.insert(name.into(), value);
    }
    Ok((pass, Value::Object(observed)))
}
