//! Generalized Fourier transforms for `(P, sigma)`, `(psi, 2 sigma)` and
//! `(E, sigma)`, and the odd-extension Fourier split of half-line data.
//!
//! Fourier transforms follow `f^(k) = (2 pi)^{-1/2} int f(x) e^{-ikx} dx`.

use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_sq_sigma, quad_radial, simpson_weights, RadialGrid, SampledProfile, SpectralGrid, SpectralMeasure};
use crate::krein::{DiracEigenfunctions, KreinSolution};

/// Complex values on a spectral grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl SpectralFunction {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "{} values for a spectral grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpectralGrid) -> Self {
        Self { grid, values: vec![Complex64::zero(); grid.len()] }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self.values.iter().enumerate().map(|(i, &v)| f(self.grid.node(i), v)).collect();
        Self { grid: self.grid, values }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("spectral functions live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(Self { grid: self.grid, values })
    }

    pub fn norm(&self, m: &SpectralMeasure) -> Result<f64> {
        if m.grid() != &self.grid {
            return Err(Error::Shape("measure lives on a different spectral grid".into()));
        }
        norm_sq_sigma(&self.values, m, None).map(f64::sqrt)
    }
}

/// `F(k) = int_0^a f(r) P(r,k) dr`.
pub fn forward_p(f: &SampledProfile, sol: &KreinSolution, a: f64) -> Result<SpectralFunction> {
    if f.grid() != sol.r_grid() {
        return Err(Error::Shape("data and solution use different radial grids".into()));
    }
    let grid = *f.grid();
    let support = f.declared_support();
    let values = (0..sol.k_grid().len())
        .into_par_iter()
        .map(|i| {
            let prod: Vec<Complex64> = f.values().iter().zip(sol.p_column(i)).map(|(x, y)| x * y).collect();
            let profile = SampledProfile::new(grid, prod, support)?;
            quad_radial(&profile, 0.0, a)
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralFunction::new(*sol.k_grid(), values)
}

/// `| ||F||^2_sigma - int_0^a |f|^2 | / int_0^a |f|^2`.
pub fn plancherel_defect(f: &SampledProfile, sol: &KreinSolution, m: &SpectralMeasure, a: f64) -> Result<f64> {
    Ok(plancherel_parts(f, sol, m, a)?.truncated_defect())
}

/// Pieces of the P-transform Plancherel balance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlancherelParts {
    /// `int_0^a |f|^2`.
    pub mass: f64,
    /// `||F||^2_sigma` over the sampled band.
    pub image: f64,
    /// Estimated `||F||^2_sigma` beyond the band.
    pub tail: f64,
}

impl PlancherelParts {
    pub fn truncated_defect(&self) -> f64 {
        (self.image - self.mass).abs() / self.mass
    }

    pub fn closed_defect(&self) -> f64 {
        (self.image + self.tail - self.mass).abs() / self.mass
    }
}

/// Tail of `||F||^2_sigma` past `|k| = K` when `|F|^2 ~ c^2 / k^2` and the
/// density is flat there: `c^2 rho(K) / K` per side, with `c^2` the mean of
/// `|k F|^2` over the outer tenth of each half-band.
pub fn spectral_tail(big_f: &SpectralFunction, m: &SpectralMeasure) -> Result<f64> {
    let grid = *big_f.grid();
    if m.grid() != &grid {
        return Err(Error::Shape("measure lives on a different spectral grid".into()));
    }
    let n = grid.len();
    let span = (grid.half_count() / 10).max(2);
    let kmax = grid.half_width();
    let side = |idx: &mut dyn Iterator<Item = usize>, edge: usize| {
        let (sum, count) = idx.fold((0.0, 0usize), |(s, c), i| (s + (big_f.values()[i] * grid.node(i)).norm_sqr(), c + 1));
        sum / count as f64 * m.density()[edge] / kmax
    };
    Ok(side(&mut (0..span), 0) + side(&mut (n - span..n), n - 1))
}

/// [`plancherel_defect`] with its parts and a tail estimate.
pub fn plancherel_parts(f: &SampledProfile, sol: &KreinSolution, m: &SpectralMeasure, a: f64) -> Result<PlancherelParts> {
    let mass = quad_radial(&f.map(|_, v| Complex64::new(v.norm_sqr(), 0.0)), 0.0, a)?.re;
    if !(mass > 0.0) {
        return Err(Error::Degenerate("data has zero norm on [0, a]".into()));
    }
    let big_f = forward_p(f, sol, a)?;
    let image = big_f.norm(m)?.powi(2);
    let tail = spectral_tail(&big_f, m)?;
    Ok(PlancherelParts { mass, image, tail })
}

fn x_weights(f: &SampledProfile) -> Vec<f64> {
    let g = f.grid();
    simpson_weights(g.count(), g.step())
}

fn check_x_grid(f: &SampledProfile, view: &DiracEigenfunctions<'_>) -> Result<()> {
    if f.grid() != view.x_grid() {
        return Err(Error::Shape("data and eigenfunctions use different x-grids".into()));
    }
    Ok(())
}

/// Generic `int f(x) K(x, k_i) dx` over x nodes, with `pick` selecting
/// the kernel from `E`.
fn forward_kernel(
    f: &SampledProfile,
    view: &DiracEigenfunctions<'_>,
    pick: impl Fn(Complex64) -> Complex64 + Sync,
) -> Vec<Complex64> {
    let w = x_weights(f);
    let weighted: Vec<Complex64> = f.values().iter().zip(&w).map(|(v, w)| v * w).collect();
    let last = weighted.iter().rposition(|v| !v.is_zero()).map_or(0, |j| j + 1);
    (0..view.k_grid().len())
        .into_par_iter()
        .map_init(Vec::new, |buf, i| {
            view.e_column_into(i, buf);
            weighted[..last].iter().zip(buf.iter()).fold(Complex64::zero(), |acc, (a, e)| acc + a * pick(*e))
        })
        .collect()
}

/// `F(k) = int f(x) psi(x,k) dx`.
pub fn forward_psi(f: &SampledProfile, view: &DiracEigenfunctions<'_>, m2: &SpectralMeasure) -> Result<SpectralFunction> {
    check_x_grid(f, view)?;
    if m2.grid() != view.k_grid() {
        return Err(Error::Shape("measure and eigenfunctions use different spectral grids".into()));
    }
    let values = forward_kernel(f, view, |e| Complex64::new(e.im, 0.0));
    SpectralFunction::new(*view.k_grid(), values)
}

/// `F(k) = int f(x) E(x,k) dx`.
pub fn forward_e(f: &SampledProfile, view: &DiracEigenfunctions<'_>, m: &SpectralMeasure) -> Result<SpectralFunction> {
    check_x_grid(f, view)?;
    if m.grid() != view.k_grid() {
        return Err(Error::Shape("measure and eigenfunctions use different spectral grids".into()));
    }
    let values = forward_kernel(f, view, |e| e);
    SpectralFunction::new(*view.k_grid(), values)
}

fn x_isometry_defect(f: &SampledProfile, image: f64) -> Result<f64> {
    let mass = f.l2_norm().powi(2);
    if !(mass > 0.0) {
        return Err(Error::Degenerate("data has zero norm".into()));
    }
    Ok((image - mass).abs() / mass)
}

/// `| ||F||^2_{2 sigma} - ||f||^2 | / ||f||^2` for the `psi`-transform.
pub fn psi_plancherel_defect(f: &SampledProfile, view: &DiracEigenfunctions<'_>, m2: &SpectralMeasure) -> Result<f64> {
    let big_f = forward_psi(f, view, m2)?;
    x_isometry_defect(f, big_f.norm(m2)?.powi(2))
}

/// Same defect for the `E`-transform against `sigma`.
pub fn e_plancherel_defect(f: &SampledProfile, view: &DiracEigenfunctions<'_>, m: &SpectralMeasure) -> Result<f64> {
    let big_f = forward_e(f, view, m)?;
    x_isometry_defect(f, big_f.norm(m)?.powi(2))
}

const INVERSE_CHUNK: usize = 256;

/// `f(x) = int F(k) psi(x,k) d(2 sigma)` on the eigenfunction x-grid.
///
/// The k-sum uses trapezoid weights: Simpson would alias a copy of `f` at
/// distance `pi / dk`.
pub fn inverse_psi(big_f: &SpectralFunction, view: &DiracEigenfunctions<'_>, m2: &SpectralMeasure) -> Result<SampledProfile> {
    if big_f.grid() != view.k_grid() || m2.grid() != view.k_grid() {
        return Err(Error::Shape("spectral grids do not match".into()));
    }
    if !m2.point_masses().is_empty() {
        return Err(Error::Refused("inverse transform does not support point masses".into()));
    }
    let w = m2.trapezoid_node_weights();
    let nx = view.x_grid().len();
    let nk = big_f.grid().len();
    // fixed chunks summed in order keep the result independent of thread count
    let chunks: Vec<Vec<Complex64>> = (0..nk.div_ceil(INVERSE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Complex64::zero(); nx];
            let mut buf = Vec::with_capacity(nx);
            for i in c * INVERSE_CHUNK..((c + 1) * INVERSE_CHUNK).min(nk) {
                let coef = big_f.values()[i] * w[i];
                if coef.is_zero() {
                    continue;
                }
                view.e_column_into(i, &mut buf);
                for (a, e) in acc.iter_mut().zip(&buf) {
                    *a += coef * e.im;
                }
            }
            acc
        })
        .collect();
    let mut out = vec![Complex64::zero(); nx];
    for chunk in chunks {
        for (o, v) in out.iter_mut().zip(chunk) {
            *o += v;
        }
    }
    SampledProfile::new(*view.x_grid(), out, None)
}

/// Fourier data of the odd extension, split by the sign of the frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitData {
    pub f_hat_odd: SpectralFunction,
    pub f_hat_plus: SpectralFunction,
    pub f_hat_minus: SpectralFunction,
}

impl SplitData {
    /// `sum |f^|^2 dxi`, which equals `||f_o||^2 = 2 ||f||^2` discretely.
    pub fn energy(&self) -> f64 {
        let step = self.f_hat_odd.grid().step();
        let e = |s: &SpectralFunction| s.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * step;
        e(&self.f_hat_plus) + e(&self.f_hat_minus)
    }
}

/// Frequency grid of the odd extension of data on `x_grid`: `xi_m = m pi / x_max`.
pub fn fourier_grid(x_grid: &RadialGrid) -> Result<SpectralGrid> {
    if x_grid.count() < 2 {
        return Err(Error::Shape("x-grid too short for a Fourier grid".into()));
    }
    SpectralGrid::from_parts(PI / x_grid.last(), x_grid.count() - 1)
}

/// Discrete Fourier transform of the odd extension of `values` (nodes
/// `0..=N`), returned on [`fourier_grid`]. The Nyquist bin is dropped; it
/// vanishes identically for odd data.
pub(crate) fn odd_spectrum(values: &[Complex64], x_grid: &RadialGrid) -> Vec<Complex64> {
    let n = x_grid.count();
    let mut buf = vec![Complex64::zero(); 2 * n];
    for j in 1..n {
        buf[j] = values[j];
        buf[2 * n - j] = -values[j];
    }
    FftPlanner::new().plan_fft_forward(2 * n).process(&mut buf);
    let scale = x_grid.step() / (2.0 * PI).sqrt();
    let half = n - 1;
    let mut out = Vec::with_capacity(2 * half + 1);
    for m in 0..=2 * half {
        let idx = (m as isize - half as isize).rem_euclid(2 * n as isize) as usize;
        out.push(buf[idx] * scale);
    }
    out
}

/// Inverse of [`odd_spectrum`] for an arbitrary spectrum, restricted to `x >= 0`.
pub(crate) fn inverse_spectrum(spectrum: &[Complex64], x_grid: &RadialGrid) -> Vec<Complex64> {
    let n = x_grid.count();
    let half = n - 1;
    let mut buf = vec![Complex64::zero(); 2 * n];
    for (m, v) in spectrum.iter().enumerate() {
        let idx = (m as isize - half as isize).rem_euclid(2 * n as isize) as usize;
        buf[idx] = *v;
    }
    FftPlanner::new().plan_fft_inverse(2 * n).process(&mut buf);
    let scale = (2.0 * PI).sqrt() / (x_grid.step() * 2.0 * n as f64);
    buf[..=n].iter().map(|v| v * scale).collect()
}

/// Odd extension, Fourier transform and sign split of real half-line data.
pub fn split_odd_extension(f: &SampledProfile) -> Result<SplitData> {
    if !f.is_real() {
        return Err(Error::Domain("odd-extension split needs real data".into()));
    }
    let grid = fourier_grid(f.grid())?;
    let mut odd = odd_spectrum(f.values(), f.grid());
    odd[grid.zero_index()] = Complex64::zero();
    let zero = grid.zero_index();
    let plus = odd.iter().enumerate().map(|(m, v)| if m > zero { *v } else { Complex64::zero() }).collect();
    let minus = odd.iter().enumerate().map(|(m, v)| if m < zero { *v } else { Complex64::zero() }).collect();
    Ok(SplitData {
        f_hat_odd: SpectralFunction::new(grid, odd)?,
        f_hat_plus: SpectralFunction::new(grid, plus)?,
        f_hat_minus: SpectralFunction::new(grid, minus)?,
    })
}

/// Smooth even frequency window: zero on `|xi| <= lo0`, rising on `[lo0, lo1]`,
/// one on `[lo1, hi0]`, falling on `[hi0, hi1]`, zero beyond.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BandWindow {
    pub lo0: f64,
    pub lo1: f64,
    pub hi0: f64,
    pub hi1: f64,
}

impl BandWindow {
    pub fn new(lo0: f64, lo1: f64, hi0: f64, hi1: f64) -> Result<Self> {
        if !(0.0 <= lo0 && lo0 < lo1 && lo1 <= hi0 && hi0 < hi1) {
            return Err(Error::Domain(format!("band window needs 0 <= lo0 < lo1 <= hi0 < hi1, got {lo0}, {lo1}, {hi0}, {hi1}")));
        }
        Ok(Self { lo0, lo1, hi0, hi1 })
    }

    pub fn weight(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= self.lo0 || a >= self.hi1 {
            0.0
        } else if a < self.lo1 {
            smooth_step((a - self.lo0) / (self.lo1 - self.lo0))
        } else if a <= self.hi0 {
            1.0
        } else {
            smooth_step((self.hi1 - a) / (self.hi1 - self.hi0))
        }
    }
}

/// C-infinity transition from 0 at `t <= 0` to 1 at `t >= 1`.
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let a = (-1.0 / t).exp();
    let b = (-1.0 / (1.0 - t)).exp();
    a / (a + b)
}

/// Filters real data through `window` applied to its odd-extension spectrum.
pub fn band_pass(f: &SampledProfile, window: &BandWindow) -> Result<SampledProfile> {
    let split = split_odd_extension(f)?;
    let grid = split.f_hat_odd.grid();
    let filtered: Vec<Complex64> = split
        .f_hat_odd
        .values()
        .iter()
        .enumerate()
        .map(|(m, v)| v * window.weight(grid.node(m)))
        .collect();
    let back = inverse_spectrum(&filtered, f.grid());
    let mut values: Vec<Complex64> = back.into_iter().map(|v| Complex64::new(v.re, 0.0)).collect();
    values[0] = Complex64::zero();
    SampledProfile::new(*f.grid(), values, None)
}

/// `f_o^(k)` at arbitrary frequencies by direct sine quadrature:
/// `-2i (2 pi)^{-1/2} int_0^inf f(x) sin(kx) dx`. Uses the trapezoid rule,
/// the rule implied by the FFT, so both agree on the Fourier grid.
pub fn odd_transform_at(f: &SampledProfile, ks: &[f64]) -> Vec<Complex64> {
    let g = f.grid();
    let mut weighted: Vec<Complex64> = f.values().iter().map(|v| v * g.step()).collect();
    weighted[0] *= 0.5;
    let n = weighted.len() - 1;
    weighted[n] *= 0.5;
    let last = weighted.iter().rposition(|v| !v.is_zero()).map_or(0, |j| j + 1);
    let c = Complex64::new(0.0, -2.0 / (2.0 * PI).sqrt());
    ks.par_iter()
        .map(|&k| {
            let step = Complex64::from_polar(1.0, k * g.step());
            let mut rot = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::zero();
            for (j, a) in weighted[..last].iter().enumerate() {
                if j % 64 == 0 {
                    rot = Complex64::from_polar(1.0, k * g.node(j));
                }
                acc += a * rot.im;
                rot *= step;
            }
            c * acc
        })
        .collect()
}
