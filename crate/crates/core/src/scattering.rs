//! Half-line Schrödinger scattering for `H = -d^2/dx^2 + a' + a^2` with
//! `a(x) = 2 A(2x)` and a Dirichlet condition at 0.
//!
//! `H` acts as `k^2` in the `psi`-transform with measure `2 sigma`, so
//! `e^{itH}` is a multiplier there. The free group `e^{-itH_0}` runs through
//! the odd-extension FFT. A Crank-Nicolson solver on the same grid serves as
//! an independent check.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::coefficient::Coefficient;
use crate::error::{Error, Result};
use crate::grid::{norm_l2_sigma, windowed_norm_sq, RadialGrid, SampledProfile, SpectralMeasure};
use crate::krein::{DiracEigenfunctions, SzegoFunction};
use crate::transforms::{
    fourier_grid, forward_psi, inverse_psi, inverse_spectrum, odd_spectrum, odd_transform_at, BandWindow,
    SpectralFunction,
};

/// Default relative Plancherel defect above which spectral propagation is refused.
pub const DEFAULT_PLANCHEREL_TOLERANCE: f64 = 1e-3;

const WALL_NODES: usize = 5;
const WALL_FRACTION: f64 = 1e-6;

/// `a(x) = 2 A(2x)` and `v = a' + a^2` on an x-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Potential {
    pub a: SampledProfile,
    pub v: SampledProfile,
    /// Extra potential used only by the finite-difference solver.
    pub extra: Option<SampledProfile>,
}

impl Potential {
    /// `v` plus the extra term, if any.
    pub fn fd_potential(&self) -> Result<SampledProfile> {
        match &self.extra {
            None => Ok(self.v.clone()),
            Some(q) => self.v.combine(Complex64::new(1.0, 0.0), q, Complex64::new(1.0, 0.0)),
        }
    }
}

/// Samples `a` exactly at the nodes and differentiates it by centered
/// differences (second-order one-sided at the ends).
pub fn build_potential(coef: &Coefficient, x_grid: RadialGrid) -> Result<Potential> {
    if !coef.is_real() {
        return Err(Error::Domain("the Schrödinger potential needs a real coefficient".into()));
    }
    let h = x_grid.step();
    let n = x_grid.count();
    if n < 2 {
        return Err(Error::Shape("x-grid too short to differentiate".into()));
    }
    let a: Vec<f64> = x_grid.nodes().map(|x| 2.0 * coef.value(2.0 * x).re).collect();
    let mut v = vec![0.0; n + 1];
    for j in 0..=n {
        let da = if j == 0 {
            (-3.0 * a[0] + 4.0 * a[1] - a[2]) / (2.0 * h)
        } else if j == n {
            (3.0 * a[n] - 4.0 * a[n - 1] + a[n - 2]) / (2.0 * h)
        } else {
            (a[j + 1] - a[j - 1]) / (2.0 * h)
        };
        v[j] = da + a[j] * a[j];
    }
    let support = coef.support_bound().map(|r0| 0.5 * r0);
    let to_c = |xs: Vec<f64>| xs.into_iter().map(|x| Complex64::new(x, 0.0)).collect::<Vec<_>>();
    Ok(Potential {
        a: SampledProfile::new(x_grid, to_c(a), support)?,
        v: SampledProfile::new(x_grid, to_c(v), support.map(|s| (s + 2.0 * h).min(x_grid.last())))?,
        extra: None,
    })
}

fn far_wall_fraction(values: &[Complex64]) -> f64 {
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let edge = WALL_NODES.min(values.len());
    values[values.len() - edge..].iter().map(|v| v.norm_sqr()).sum::<f64>() / total
}

fn check_far_wall(values: &[Complex64], t: f64) -> Result<()> {
    let frac = far_wall_fraction(values);
    if frac > WALL_FRACTION {
        return Err(Error::DomainTooSmall(format!(
            "at t = {t} a fraction {frac:.3e} of the mass sits next to the far wall"
        )));
    }
    Ok(())
}

/// `e^{-itH_0} f` on the half-line through the odd extension.
///
/// The far wall is inspected at eight intermediate times, so a packet that
/// wraps around and comes back is still caught.
pub fn free_propagate(f: &SampledProfile, t: f64) -> Result<SampledProfile> {
    let grid = *f.grid();
    let xi = fourier_grid(&grid)?;
    let spectrum = odd_spectrum(f.values(), &grid);
    let evolve = |s: f64| {
        let turned: Vec<Complex64> = spectrum
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let x = xi.node(m);
                v * Complex64::from_polar(1.0, -s * x * x)
            })
            .collect();
        let mut out = inverse_spectrum(&turned, &grid);
        out[0] = Complex64::zero();
        out
    };
    for j in 1..8 {
        let s = t * j as f64 / 8.0;
        check_far_wall(&evolve(s), s)?;
    }
    let out = evolve(t);
    check_far_wall(&out, t)?;
    SampledProfile::new(grid, out, None)
}

fn psi_norm_defect(f: &SampledProfile, big_f: &SpectralFunction, m2: &SpectralMeasure) -> Result<f64> {
    let mass = f.l2_norm().powi(2);
    if mass == 0.0 {
        return Ok(0.0);
    }
    Ok((big_f.norm(m2)?.powi(2) - mass).abs() / mass)
}

/// `e^{itk^2}` times the `psi`-transform of `f`, refused when the transform
/// loses more than `tolerance` of the norm.
fn evolved_transform(
    f: &SampledProfile,
    t: f64,
    view: &DiracEigenfunctions<'_>,
    m2: &SpectralMeasure,
    tolerance: f64,
) -> Result<SpectralFunction> {
    let big_f = forward_psi(f, view, m2)?;
    let defect = psi_norm_defect(f, &big_f, m2)?;
    if defect > tolerance {
        return Err(Error::Refused(format!(
            "psi-transform Plancherel defect {defect:.3e} exceeds {tolerance:.1e}; propagation would not be unitary"
        )));
    }
    Ok(big_f.map(|k, v| v * Complex64::from_polar(1.0, t * k * k)))
}

/// `e^{itH} f` as `psi`-transform, multiplier `e^{itk^2}`, inverse transform.
pub fn perturbed_propagate_spectral(
    f: &SampledProfile,
    t: f64,
    view: &DiracEigenfunctions<'_>,
    m2: &SpectralMeasure,
    tolerance: f64,
) -> Result<SampledProfile> {
    let g = evolved_transform(f, t, view, m2, tolerance)?;
    inverse_psi(&g, view, m2)
}

/// Real symmetric tridiagonal operator on the interior nodes `1..N` of an
/// x-grid with Dirichlet walls.
#[derive(Debug, Clone, PartialEq)]
pub struct FdHamiltonian {
    grid: RadialGrid,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl FdHamiltonian {
    /// `-D^2 + v` with the three-point Laplacian.
    pub fn from_potential(v: &SampledProfile) -> Result<Self> {
        if !v.is_real() {
            return Err(Error::Domain("finite-difference potential must be real".into()));
        }
        let grid = *v.grid();
        let n = grid.count();
        if n < 3 {
            return Err(Error::Shape("finite-difference grid needs at least three intervals".into()));
        }
        let h2 = grid.step() * grid.step();
        let diag = (1..n).map(|j| 2.0 / h2 + v.values()[j].re).collect();
        let off = vec![-1.0 / h2; n - 2];
        Ok(Self { grid, diag, off })
    }

    /// `B^T B` with `(B u)_{j+1/2} = -(u_{j+1} - u_j)/h + a_{j+1/2}(u_j + u_{j+1})/2`,
    /// the staggered form of `(d/dx + a)(-d/dx + a) = -d^2/dx^2 + a' + a^2`.
    /// Only `a` at half nodes enters, so jumps of `a` on grid nodes cost no
    /// accuracy.
    pub fn factored(a: &dyn Fn(f64) -> f64, grid: RadialGrid) -> Result<Self> {
        let n = grid.count();
        if n < 3 {
            return Err(Error::Shape("finite-difference grid needs at least three intervals".into()));
        }
        let h = grid.step();
        let alpha: Vec<f64> = (0..n).map(|j| 0.5 * a(grid.node(j) + 0.5 * h)).collect();
        let diag = (1..n)
            .map(|j| {
                let up = 1.0 / h + alpha[j];
                let down = -1.0 / h + alpha[j - 1];
                up * up + down * down
            })
            .collect();
        let off = (1..n - 1).map(|j| alpha[j] * alpha[j] - 1.0 / (h * h)).collect();
        Ok(Self { grid, diag, off })
    }

    /// Factored operator for `a(x) = 2 A(2x)`.
    pub fn from_coefficient(coef: &Coefficient, grid: RadialGrid) -> Result<Self> {
        if !coef.is_real() {
            return Err(Error::Domain("the Schrödinger potential needs a real coefficient".into()));
        }
        Self::factored(&|x| 2.0 * coef.value(2.0 * x).re, grid)
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }
}

/// Thomas factorization of `I - i tau H`, with the right-hand side
/// `(I + i tau H) u` formed in the same sweep.
struct CayleyStep<'a> {
    op: &'a FdHamiltonian,
    it: Complex64,
    lower: Vec<Complex64>,
    inv_pivot: Vec<Complex64>,
    upper: Vec<Complex64>,
}

impl<'a> CayleyStep<'a> {
    fn new(op: &'a FdHamiltonian, tau: f64) -> Self {
        let m = op.diag.len();
        let it = Complex64::new(0.0, tau);
        let upper: Vec<Complex64> = op.off.iter().map(|&e| -it * e).collect();
        let mut inv_pivot = Vec::with_capacity(m);
        let mut lower = Vec::with_capacity(m.saturating_sub(1));
        inv_pivot.push((Complex64::new(1.0, 0.0) - it * op.diag[0]).inv());
        for j in 1..m {
            let l = upper[j - 1] * inv_pivot[j - 1];
            lower.push(l);
            inv_pivot.push((Complex64::new(1.0, 0.0) - it * op.diag[j] - l * upper[j - 1]).inv());
        }
        Self { op, it, lower, inv_pivot, upper }
    }

    fn advance(&self, u: &mut [Complex64], rhs: &mut [Complex64]) {
        let m = u.len();
        let (d, e) = (&self.op.diag, &self.op.off);
        let it = self.it;
        rhs[0] = u[0] + it * (u[0] * d[0] + u[1] * e[0]);
        for j in 1..m - 1 {
            let hu = u[j] * d[j] + u[j - 1] * e[j - 1] + u[j + 1] * e[j];
            rhs[j] = u[j] + it * hu - self.lower[j - 1] * rhs[j - 1];
        }
        let j = m - 1;
        rhs[j] = u[j] + it * (u[j] * d[j] + u[j - 1] * e[j - 1]) - self.lower[j - 1] * rhs[j - 1];
        u[j] = rhs[j] * self.inv_pivot[j];
        for j in (0..m - 1).rev() {
            u[j] = (rhs[j] - self.upper[j] * u[j + 1]) * self.inv_pivot[j];
        }
    }
}

/// Crank-Nicolson snapshots at increasing `times` (from 0). Each segment
/// takes `refine * ceil(length / dt)` equal steps.
fn cn_snapshots(f: &SampledProfile, times: &[f64], op: &FdHamiltonian, dt: f64, refine: usize) -> Result<Vec<SampledProfile>> {
    if f.grid() != op.grid() {
        return Err(Error::Shape("data and operator use different grids".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {dt}")));
    }
    let monotone = times.windows(2).all(|w| w[0].abs() <= w[1].abs() && w[0] * w[1] >= 0.0);
    if !monotone {
        return Err(Error::Domain("snapshot times must move monotonically away from 0".into()));
    }
    let n = op.grid.count();
    let mut u: Vec<Complex64> = f.values()[1..n].to_vec();
    let mut rhs = vec![Complex64::zero(); u.len()];
    let mut out = Vec::with_capacity(times.len());
    let mut now = 0.0;
    for &t in times {
        let span = t - now;
        let steps = (span.abs() / dt).ceil() as usize * refine;
        if steps > 0 {
            let stepper = CayleyStep::new(op, 0.5 * span / steps as f64);
            let check_every = steps.div_ceil(16);
            for s in 1..=steps {
                stepper.advance(&mut u, &mut rhs);
                if s % check_every == 0 {
                    check_far_wall(&u, now + span * s as f64 / steps as f64)?;
                }
            }
        }
        now = t;
        let mut values = Vec::with_capacity(n + 1);
        values.push(Complex64::zero());
        values.extend_from_slice(&u);
        values.push(Complex64::zero());
        out.push(SampledProfile::new(op.grid, values, None)?);
    }
    Ok(out)
}

/// `e^{itH} f` by Crank-Nicolson steps `(I - i dt H/2) u' = (I + i dt H/2) u`.
///
/// The step is shrunk so that a whole number of steps lands on `t`.
pub fn perturbed_propagate_fd(f: &SampledProfile, t: f64, op: &FdHamiltonian, dt: f64) -> Result<SampledProfile> {
    Ok(cn_snapshots(f, &[t], op, dt, 1)?.remove(0))
}

/// Richardson combination `(4 u_{h/2, dt/2} - u_{h, dt}) / 3` of two
/// Crank-Nicolson runs, returned on the coarse grid at each of `times`.
/// Both the space and time errors are second order, so the leading terms
/// cancel together.
pub fn fd_extrapolated_at(
    f: &dyn Fn(f64) -> Complex64,
    grid: RadialGrid,
    times: &[f64],
    dt: f64,
    build: &dyn Fn(RadialGrid) -> Result<FdHamiltonian>,
) -> Result<Vec<SampledProfile>> {
    let fine_grid = RadialGrid::new(0.5 * grid.step(), 2 * grid.count())?;
    let coarse = cn_snapshots(&SampledProfile::from_fn(grid, None, f), times, &build(grid)?, dt, 1)?;
    let fine = cn_snapshots(&SampledProfile::from_fn(fine_grid, None, f), times, &build(fine_grid)?, dt, 2)?;
    coarse
        .iter()
        .zip(&fine)
        .map(|(c, fi)| {
            let values = c.values().iter().enumerate().map(|(j, v)| (4.0 * fi.values()[2 * j] - v) / 3.0).collect();
            SampledProfile::new(grid, values, None)
        })
        .collect()
}

/// [`fd_extrapolated_at`] for a single time.
pub fn fd_extrapolated(
    f: &dyn Fn(f64) -> Complex64,
    grid: RadialGrid,
    t: f64,
    dt: f64,
    build: &dyn Fn(RadialGrid) -> Result<FdHamiltonian>,
) -> Result<SampledProfile> {
    Ok(fd_extrapolated_at(f, grid, &[t], dt, build)?.remove(0))
}

/// Iterates `u_t = e^{itH} e^{-itH_0} f` and their `psi`-transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringRun {
    pub times: Vec<f64>,
    pub iterates: Vec<SampledProfile>,
    pub norms: Vec<f64>,
    pub f_norm: f64,
    /// `||u_{t_{i+1}} - u_{t_i}||_2`.
    pub cauchy_gaps: Vec<f64>,
    pub transform_trajectory: Vec<SpectralFunction>,
    pub predicted_limit: SpectralFunction,
    pub limit_norm: f64,
}

/// Runs the wave-operator iterates on an increasing time ladder.
pub fn wave_operator_run(
    f: &SampledProfile,
    view: &DiracEigenfunctions<'_>,
    pi: &SzegoFunction,
    m2: &SpectralMeasure,
    times: &[f64],
    tolerance: f64,
) -> Result<ScatteringRun> {
    if times.is_empty() || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Domain("scattering times must be a nonempty increasing sequence".into()));
    }
    let (predicted_limit, limit_norm) = scattering_limit(f, pi, m2)?;
    let mut iterates = Vec::with_capacity(times.len());
    let mut transform_trajectory = Vec::with_capacity(times.len());
    for &t in times {
        let g = free_propagate(f, t)?;
        let big_f = evolved_transform(&g, t, view, m2, tolerance)?;
        iterates.push(inverse_psi(&big_f, view, m2)?);
        transform_trajectory.push(big_f);
    }
    let norms: Vec<f64> = iterates.iter().map(SampledProfile::discrete_l2_norm).collect();
    let cauchy_gaps = iterates
        .windows(2)
        .map(|w| Ok(w[1].combine(Complex64::new(1.0, 0.0), &w[0], Complex64::new(-1.0, 0.0))?.discrete_l2_norm()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(ScatteringRun {
        times: times.to_vec(),
        iterates,
        norms,
        f_norm: f.discrete_l2_norm(),
        cauchy_gaps,
        transform_trajectory,
        predicted_limit,
        limit_norm,
    })
}

/// `p(k) = sqrt(2 pi) (conj(Pi(k)) f^_+(-k) - Pi(k) f^_+(k)) / (2i)` and its
/// `L^2(2 sigma)` norm.
pub fn scattering_limit(f: &SampledProfile, pi: &SzegoFunction, m2: &SpectralMeasure) -> Result<(SpectralFunction, f64)> {
    if !pi.is_validated() {
        return Err(Error::Refused("Szegő function was not read off a validated solution".into()));
    }
    if pi.grid() != m2.grid() {
        return Err(Error::Shape("Szegő function and measure use different grids".into()));
    }
    let grid = *pi.grid();
    let zero = grid.zero_index();
    let positive: Vec<f64> = (zero + 1..grid.len()).map(|i| grid.node(i)).collect();
    let hat = odd_transform_at(f, &positive);
    // f^_+ at |k_i|; the grid is symmetric so -k_i is the mirror node.
    let plus = |i: usize| -> Complex64 {
        if i > zero {
            hat[i - zero - 1]
        } else {
            Complex64::zero()
        }
    };
    let c = (2.0 * PI).sqrt() / Complex64::new(0.0, 2.0);
    let values = (0..grid.len())
        .map(|i| {
            let p = pi.values()[i];
            c * (p.conj() * plus(grid.mirror(i)) - p * plus(i))
        })
        .collect();
    let limit = SpectralFunction::new(grid, values)?;
    let norm = norm_l2_sigma(limit.values(), m2, None)?;
    Ok((limit, norm))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionReport {
    pub window: (f64, f64),
    pub times: Vec<f64>,
    /// Windowed `L^2(2 sigma)` distance between the transform of `u_t` and `p`.
    pub distances: Vec<f64>,
    /// `| ||u_t|| - ||f|| |`.
    pub norm_gaps: Vec<f64>,
    pub distance_tolerance: f64,
    pub norm_tolerance: f64,
    pub pass: bool,
}

pub fn exhaustion_diagnostic(
    run: &ScatteringRun,
    m2: &SpectralMeasure,
    window: (f64, f64),
    distance_tolerance: f64,
    norm_tolerance: f64,
) -> Result<ExhaustionReport> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::Domain(format!("empty spectral window [{lo}, {hi}]")));
    }
    let distances = run
        .transform_trajectory
        .iter()
        .map(|big_f| Ok(windowed_norm_sq(big_f.sub(&run.predicted_limit)?.values(), m2, lo, hi)?.sqrt()))
        .collect::<Result<Vec<f64>>>()?;
    let norm_gaps: Vec<f64> = run.norms.iter().map(|n| (n - run.f_norm).abs()).collect();
    let pass = distances.last().is_some_and(|&d| d < distance_tolerance)
        && norm_gaps.last().is_some_and(|&g| g < norm_tolerance);
    Ok(ExhaustionReport {
        window,
        times: run.times.clone(),
        distances,
        norm_gaps,
        distance_tolerance,
        norm_tolerance,
        pass,
    })
}

/// `I(k) = (e^{itk^2}/(1+i)) int (e^{ix^2/4t}/sqrt(t)) h(x/2t) psi(x,k) dx`
/// for a frequency profile `h` vanishing outside `[band.lo0, band.hi1]`.
pub fn spectral_i_from_hat(
    hat: &dyn Fn(f64) -> Complex64,
    band: &BandWindow,
    t: f64,
    view: &DiracEigenfunctions<'_>,
    m2: &SpectralMeasure,
) -> Result<SpectralFunction> {
    if !(t >= 1.0) {
        return Err(Error::Precondition(format!("t must be at least 1, got {t}")));
    }
    let grid = *view.x_grid();
    let (lo, hi) = (2.0 * band.lo0 * t, 2.0 * band.hi1 * t);
    if hi > grid.last() {
        return Err(Error::Range(format!("x-grid ends at {} but the integrand reaches {hi}", grid.last())));
    }
    let scale = 1.0 / t.sqrt();
    let g = SampledProfile::from_fn(grid, None, |x| {
        if x < lo || x > hi {
            Complex64::zero()
        } else {
            Complex64::from_polar(scale, x * x / (4.0 * t)) * hat(x / (2.0 * t))
        }
    });
    let pre = Complex64::new(1.0, 1.0).inv();
    Ok(forward_psi(&g, view, m2)?.map(|k, v| v * pre * Complex64::from_polar(1.0, t * k * k)))
}

/// [`spectral_i_from_hat`] with `h = f^_+` computed by direct sine quadrature.
pub fn spectral_i(
    f: &SampledProfile,
    band: &BandWindow,
    t: f64,
    view: &DiracEigenfunctions<'_>,
    m2: &SpectralMeasure,
) -> Result<SpectralFunction> {
    let grid = *view.x_grid();
    let (lo, hi) = (2.0 * band.lo0 * t, 2.0 * band.hi1 * t);
    let xs: Vec<f64> = grid.nodes().filter(|&x| x >= lo && x <= hi).map(|x| x / (2.0 * t)).collect();
    let values = odd_transform_at(f, &xs);
    let first = xs.first().copied().unwrap_or(0.0);
    let dxi = grid.step() / (2.0 * t);
    let hat = |xi: f64| {
        let j = ((xi - first) / dxi).round();
        if j < 0.0 || j as usize >= values.len() {
            Complex64::zero()
        } else {
            values[j as usize]
        }
    };
    spectral_i_from_hat(&hat, band, t, view, m2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpectralGrid;
    use crate::krein::{integrate_krein, spectral_density, szego, DEFAULT_OSC_FACTOR};

    fn gaussian_packet(grid: RadialGrid, center: f64, freq: f64) -> SampledProfile {
        SampledProfile::from_real_fn(grid, None, |x| (-(x - center).powi(2) / 2.0).exp() * (freq * x).sin())
    }

    fn diff_norm(a: &SampledProfile, b: &SampledProfile) -> f64 {
        a.combine(Complex64::new(1.0, 0.0), b, Complex64::new(-1.0, 0.0)).unwrap().discrete_l2_norm()
    }

    #[test]
    fn zero_coefficient_gives_zero_potential() {
        let grid = RadialGrid::new(0.05, 200).unwrap();
        let p = build_potential(&Coefficient::zero(grid), grid).unwrap();
        assert!(p.v.values().iter().all(|v| v.is_zero()));
    }

    #[test]
    fn gaussian_potential_matches_symbolic_derivative() {
        let mut errors = Vec::new();
        for h in [0.02, 0.01] {
            let grid = RadialGrid::with_extent(h, 6.0).unwrap();
            let coef = Coefficient::gaussian(0.3, 2.0, 1.0, RadialGrid::new(0.01, 10).unwrap()).unwrap();
            let p = build_potential(&coef, grid).unwrap();
            let exact = |x: f64| {
                let e = (-(2.0 * x - 2.0).powi(2)).exp();
                let a = 0.6 * e;
                -2.4 * (2.0 * x - 2.0) * e + a * a
            };
            let err = grid.nodes().zip(p.v.values()).map(|(x, v)| (v.re - exact(x)).abs()).fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors[1] < 1e-3);
        assert!((errors[0] / errors[1] - 4.0).abs() < 0.5, "{errors:?}");
    }

    #[test]
    fn derivative_part_integrates_to_minus_a0() {
        let grid = RadialGrid::with_extent(0.005, 6.0).unwrap();
        let coef = Coefficient::gaussian(0.3, 2.0, 1.0, RadialGrid::new(0.01, 10).unwrap()).unwrap();
        let p = build_potential(&coef, grid).unwrap();
        let da = p.v.combine(Complex64::new(1.0, 0.0), &p.a.map(|_, a| a * a), Complex64::new(-1.0, 0.0)).unwrap();
        let integral = crate::grid::quad_radial(&da, 0.0, grid.last()).unwrap();
        assert!((integral.re + p.a.values()[0].re).abs() < 1e-3 * p.a.values()[0].re);
    }

    #[test]
    fn complex_coefficient_is_rejected() {
        let grid = RadialGrid::new(0.05, 20).unwrap();
        let c = Coefficient::new(crate::Shape::Constant { value: Complex64::new(0.0, 1.0) }, grid).unwrap();
        assert!(matches!(build_potential(&c, grid), Err(Error::Domain(_))));
    }

    #[test]
    fn free_propagation_is_unitary_and_starts_at_identity() {
        let grid = RadialGrid::with_extent(0.05, 100.0).unwrap();
        let f = gaussian_packet(grid, 40.0, 3.0);
        let same = free_propagate(&f, 0.0).unwrap();
        assert!(diff_norm(&same, &f) < 1e-10);
        let u = free_propagate(&f, 2.0).unwrap();
        assert!((u.discrete_l2_norm() - f.discrete_l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn free_propagation_matches_gaussian_closed_form() {
        let grid = RadialGrid::with_extent(0.05, 100.0).unwrap();
        let f = SampledProfile::from_real_fn(grid, None, |x| (-(x - 40.0).powi(2) / 2.0).exp());
        let u = free_propagate(&f, 1.0).unwrap();
        let z = Complex64::new(1.0, 2.0);
        let exact = SampledProfile::from_fn(grid, None, |x| (-(x - 40.0) * (x - 40.0) / (2.0 * z)).exp() / z.sqrt());
        assert!(diff_norm(&u, &exact) < 1e-6);
    }

    #[test]
    fn wrap_around_is_refused() {
        let grid = RadialGrid::with_extent(0.05, 30.0).unwrap();
        let f = gaussian_packet(grid, 15.0, 5.0);
        assert!(matches!(free_propagate(&f, 10.0), Err(Error::DomainTooSmall(_))));
    }

    #[test]
    fn fd_matches_free_propagation_without_potential() {
        let grid = RadialGrid::with_extent(0.01, 80.0).unwrap();
        let f = SampledProfile::from_real_fn(grid, None, |x| (-(x - 40.0).powi(2) / 2.0).exp());
        let op = FdHamiltonian::from_potential(&SampledProfile::zeros(grid)).unwrap();
        let fd = perturbed_propagate_fd(&f, 1.0, &op, 1e-3).unwrap();
        // e^{itH} with H = H_0 is the free group run backwards.
        let exact = free_propagate(&f, -1.0).unwrap();
        assert!(diff_norm(&fd, &exact) < 1e-4, "{}", diff_norm(&fd, &exact));
    }

    #[test]
    fn fd_is_unitary() {
        let grid = RadialGrid::with_extent(0.02, 60.0).unwrap();
        let coef = Coefficient::gaussian(0.3, 2.0, 1.0, RadialGrid::new(0.01, 10).unwrap()).unwrap();
        let pot = build_potential(&coef, grid).unwrap();
        let op = FdHamiltonian::from_potential(&pot.v).unwrap();
        let f = gaussian_packet(grid, 20.0, 2.0);
        let u = perturbed_propagate_fd(&f, 1.0, &op, 1e-3).unwrap();
        assert!((u.discrete_l2_norm() - f.discrete_l2_norm()).abs() < 1e-10);
    }

    #[test]
    fn fd_is_second_order_in_time() {
        let grid = RadialGrid::with_extent(0.02, 60.0).unwrap();
        let op = FdHamiltonian::from_potential(&SampledProfile::zeros(grid)).unwrap();
        let f = gaussian_packet(grid, 30.0, 2.0);
        let runs: Vec<SampledProfile> =
            [4e-3, 2e-3, 1e-3].iter().map(|&dt| perturbed_propagate_fd(&f, 1.0, &op, dt).unwrap()).collect();
        let ratio = diff_norm(&runs[0], &runs[1]) / diff_norm(&runs[1], &runs[2]);
        assert!((ratio - 4.0).abs() < 0.2, "{ratio}");
    }

    #[test]
    fn factored_and_potential_forms_agree() {
        let grid = RadialGrid::with_extent(0.01, 40.0).unwrap();
        let coef = Coefficient::gaussian(0.3, 2.0, 1.0, RadialGrid::new(0.01, 10).unwrap()).unwrap();
        let pot = build_potential(&coef, grid).unwrap();
        let a = FdHamiltonian::from_potential(&pot.v).unwrap();
        let b = FdHamiltonian::from_coefficient(&coef, grid).unwrap();
        let f = gaussian_packet(grid, 6.0, 2.0);
        let ua = perturbed_propagate_fd(&f, 1.0, &a, 1e-3).unwrap();
        let ub = perturbed_propagate_fd(&f, 1.0, &b, 1e-3).unwrap();
        assert!(diff_norm(&ua, &ub) < 1e-3);
    }

    #[test]
    fn richardson_improves_free_propagation() {
        let grid = RadialGrid::with_extent(0.02, 60.0).unwrap();
        let f = |x: f64| Complex64::new((-(x - 30.0).powi(2) / 2.0).exp() * (4.0 * x).sin(), 0.0);
        let build = |g: RadialGrid| FdHamiltonian::from_potential(&SampledProfile::zeros(g));
        let exact = free_propagate(&SampledProfile::from_fn(grid, None, f), -1.0).unwrap();
        let plain = perturbed_propagate_fd(&SampledProfile::from_fn(grid, None, f), 1.0, &build(grid).unwrap(), 4e-3)
            .unwrap();
        let extrapolated = fd_extrapolated(&f, grid, 1.0, 4e-3, &build).unwrap();
        let (e0, e1) = (diff_norm(&plain, &exact), diff_norm(&extrapolated, &exact));
        assert!(e1 < 0.05 * e0, "{e0} {e1}");
    }

    struct Setup {
        sol: crate::KreinSolution,
        pi: SzegoFunction,
        m2: SpectralMeasure,
    }

    fn setup(coef_of: impl Fn(RadialGrid) -> Coefficient, x_step: f64, r_extent: f64, k_max: f64, dk: f64) -> Setup {
        let r_grid = RadialGrid::with_extent(2.0 * x_step, r_extent).unwrap();
        let k_grid = SpectralGrid::new(k_max, dk).unwrap();
        let sol = integrate_krein(&coef_of(r_grid), r_grid, k_grid, DEFAULT_OSC_FACTOR).unwrap();
        let pi = szego(&sol, None).unwrap();
        let m2 = spectral_density(&pi, 1e-3).unwrap().doubled();
        Setup { sol, pi, m2 }
    }

    #[test]
    fn spectral_propagation_reduces_to_free_without_potential() {
        let s = setup(Coefficient::zero, 0.05, 1.0, 12.0, 0.02);
        let x_grid = RadialGrid::with_extent(0.05, 60.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let f = gaussian_packet(x_grid, 30.0, 3.0);
        let u = perturbed_propagate_spectral(&f, 1.0, &view, &s.m2, DEFAULT_PLANCHEREL_TOLERANCE).unwrap();
        let exact = free_propagate(&f, -1.0).unwrap();
        assert!(diff_norm(&u, &exact) < 1e-6, "{}", diff_norm(&u, &exact));
    }

    #[test]
    fn spectral_round_trip_with_gaussian_coefficient() {
        let s = setup(|g| Coefficient::gaussian(0.3, 2.0, 1.0, g).unwrap(), 0.05, 10.0, 12.0, 0.02);
        let x_grid = RadialGrid::with_extent(0.05, 60.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let f = gaussian_packet(x_grid, 10.0, 3.0);
        let u = perturbed_propagate_spectral(&f, 0.0, &view, &s.m2, DEFAULT_PLANCHEREL_TOLERANCE).unwrap();
        assert!(diff_norm(&u, &f) < 1e-4, "{}", diff_norm(&u, &f));
    }

    #[test]
    fn truncated_spectrum_is_refused() {
        let s = setup(Coefficient::zero, 0.05, 1.0, 2.0, 0.02);
        let x_grid = RadialGrid::with_extent(0.05, 60.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let f = gaussian_packet(x_grid, 30.0, 5.0);
        assert!(matches!(
            perturbed_propagate_spectral(&f, 1.0, &view, &s.m2, DEFAULT_PLANCHEREL_TOLERANCE),
            Err(Error::Refused(_))
        ));
    }

    #[test]
    fn free_limit_is_the_sine_transform() {
        let s = setup(Coefficient::zero, 0.05, 1.0, 12.0, 0.02);
        let x_grid = RadialGrid::with_extent(0.05, 60.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let f = gaussian_packet(x_grid, 30.0, 3.0);
        let (p, norm) = scattering_limit(&f, &s.pi, &s.m2).unwrap();
        assert!((norm - f.l2_norm()).abs() < 1e-3 * f.l2_norm());
        let psi = forward_psi(&f, &view, &s.m2).unwrap();
        assert!(p.sub(&psi).unwrap().norm(&s.m2).unwrap() < 1e-8);
        let (zero, zero_norm) = scattering_limit(&SampledProfile::zeros(x_grid), &s.pi, &s.m2).unwrap();
        assert!(zero.values().iter().all(|v| v.is_zero()) && zero_norm == 0.0);
        let unvalidated = SzegoFunction::new(*s.pi.grid(), s.pi.values().to_vec()).unwrap();
        assert!(matches!(scattering_limit(&f, &unvalidated, &s.m2), Err(Error::Refused(_))));
    }

    #[test]
    fn free_wave_operator_is_identity() {
        let s = setup(Coefficient::zero, 0.05, 1.0, 12.0, 0.02);
        let x_grid = RadialGrid::with_extent(0.05, 150.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let f = gaussian_packet(x_grid, 30.0, 3.0);
        let run = wave_operator_run(&f, &view, &s.pi, &s.m2, &[1.0, 2.0, 4.0], 1e-3).unwrap();
        assert!(run.cauchy_gaps.iter().all(|&g| g < 1e-6), "{:?}", run.cauchy_gaps);
        assert!(run.norms.iter().all(|n| (n / run.f_norm - 1.0).abs() < 1e-3));
        let wide = exhaustion_diagnostic(&run, &s.m2, (0.0, 12.0), 1e-2, 1e-3).unwrap();
        let narrow = exhaustion_diagnostic(&run, &s.m2, (2.0, 4.0), 1e-2, 1e-3).unwrap();
        assert!(wide.pass);
        for (n, w) in narrow.distances.iter().zip(&wide.distances) {
            assert!(n <= w);
        }
        assert!(matches!(exhaustion_diagnostic(&run, &s.m2, (3.0, 3.0), 1e-2, 1e-3), Err(Error::Domain(_))));
        assert!(wave_operator_run(&f, &view, &s.pi, &s.m2, &[2.0, 1.0], 1e-3).is_err());
    }

    #[test]
    fn zero_data_run_has_zero_distances() {
        let s = setup(Coefficient::zero, 0.05, 1.0, 6.0, 0.05);
        let x_grid = RadialGrid::with_extent(0.05, 40.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let run = wave_operator_run(&SampledProfile::zeros(x_grid), &view, &s.pi, &s.m2, &[1.0, 2.0], 1e-3).unwrap();
        let rep = exhaustion_diagnostic(&run, &s.m2, (1.0, 5.0), 1e-2, 1e-3).unwrap();
        assert!(rep.distances.iter().all(|&d| d == 0.0));
    }

    // With A = 0 and h = 1 on [a, b], I(k) reduces to Fresnel integrals:
    // I = (1/((1+i) i)) [F(sqrt t (b+k)) - F(sqrt t (a+k)) - F(sqrt t (b-k)) + F(sqrt t (a-k))]
    // with F(y) = int_0^y e^{is^2} ds.
    #[test]
    fn free_spectral_i_matches_fresnel_closed_form() {
        use crate::asymptotics::{fresnel_h, fresnel_h0};
        let t = 4.0;
        let (a, b) = (1.0, 3.0);
        let s = setup(Coefficient::zero, 0.01, 1.0, 4.0, 0.05);
        let x_grid = RadialGrid::with_extent(0.01, 2.0 * b * t + 1.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, x_grid).unwrap();
        let band = BandWindow::new(a, a + 1e-9, b - 1e-9, b).unwrap();
        let hat = |xi: f64| if (a..=b).contains(&xi) { Complex64::new(1.0, 0.0) } else { Complex64::zero() };
        let i_k = spectral_i_from_hat(&hat, &band, t, &view, &s.m2).unwrap();
        let big_f = |y: f64| {
            let v = fresnel_h0() - fresnel_h(y.abs()).unwrap();
            if y < 0.0 {
                -v
            } else {
                v
            }
        };
        let st = t.sqrt();
        let k = 2.0;
        let exact = (big_f(st * (b + k)) - big_f(st * (a + k)) - big_f(st * (b - k)) + big_f(st * (a - k)))
            / (Complex64::new(1.0, 1.0) * Complex64::new(0.0, 1.0));
        let got = i_k.values()[i_k.grid().zero_index() + 40];
        assert!((got - exact).norm() < 1e-2, "{got} vs {exact}");
        let short = RadialGrid::with_extent(0.01, 10.0).unwrap();
        let view = DiracEigenfunctions::new(&s.sol, &s.pi, short).unwrap();
        assert!(matches!(spectral_i_from_hat(&hat, &band, t, &view, &s.m2), Err(Error::Range(_))));
    }
}
