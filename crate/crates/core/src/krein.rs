//! Integration of the Krein system
//!
//! ```text
//! P'  = ik P - conj(A) P*,   P(0)  = 1
//! P*' = -A P,                P*(0) = 1
//! ```
//!
//! over real spectral parameters, together with the Szegő function, the
//! spectral density and the Dirac eigenfunctions built from `P`.
//!
//! Each column is integrated with classical RK4 applied to `Q = e^{-irk} P`
//! and `P*`, so the free rotation is carried exactly and the map keeps the
//! symmetry `P = e^{irk} conj(P*)` to rounding.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coefficient::{Coefficient, Shape};
use crate::error::{Error, Result};
use crate::grid::{cumulative_uniform, cumulative_with_support, PointMass, RadialGrid, SpectralGrid, SpectralMeasure};

pub const DEFAULT_OSC_FACTOR: f64 = 0.1;
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-3;

/// Matrices `P(r_j, k_i)` and `P*(r_j, k_i)`, stored one k-column at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct KreinSolution {
    r_grid: RadialGrid,
    k_grid: SpectralGrid,
    p: Vec<Complex64>,
    p_star: Vec<Complex64>,
    coefficient: Coefficient,
    osc_factor: f64,
}

fn cis(x: f64) -> Complex64 {
    let (s, c) = x.sin_cos();
    Complex64::new(c, s)
}

/// Substeps per radial step for spectral parameter `k`.
pub fn substeps(step: f64, k: f64, osc_factor: f64) -> usize {
    let h_max = step.min(osc_factor / (1.0 + k.abs()));
    ((step / h_max) - 1e-9).ceil().max(1.0) as usize
}

/// Coefficient values at the three RK stage points of every substep:
/// right limit at the start, midpoint, left limit at the end.
fn stage_table(a: &Coefficient, grid: &RadialGrid, n_sub: usize) -> Vec<Complex64> {
    let shape = a.shape();
    let h = grid.step() / n_sub as f64;
    let mut table = Vec::with_capacity(grid.count() * n_sub * 3);
    for j in 0..grid.count() {
        let r0 = grid.node(j);
        for s in 0..n_sub {
            let start = r0 + s as f64 * h;
            let end = if s + 1 == n_sub { grid.node(j + 1) } else { start + h };
            table.push(shape.value_right(start));
            table.push(shape.value(0.5 * (start + end)));
            table.push(shape.value_left(end));
        }
    }
    table
}

fn integrate_column(
    k: f64,
    grid: &RadialGrid,
    n_sub: usize,
    table: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let n = grid.len();
    let mut p = Vec::with_capacity(n);
    let mut p_star = Vec::with_capacity(n);
    let h = grid.step() / n_sub as f64;
    let half_turn = cis(0.5 * k * h);
    let mut q = Complex64::new(1.0, 0.0);
    let mut s = Complex64::new(1.0, 0.0);
    p.push(q);
    p_star.push(s);
    let rhs = |a: Complex64, e: Complex64, q: Complex64, s: Complex64| (-(a.conj() * e.conj()) * s, -(a * e) * q);
    for j in 0..grid.count() {
        let mut e0 = cis(k * grid.node(j));
        for sub in 0..n_sub {
            let base = (j * n_sub + sub) * 3;
            let (a0, am, a1) = (table[base], table[base + 1], table[base + 2]);
            let em = e0 * half_turn;
            let e1 = if sub + 1 == n_sub { cis(k * grid.node(j + 1)) } else { em * half_turn };
            let (k1q, k1s) = rhs(a0, e0, q, s);
            let (k2q, k2s) = rhs(am, em, q + k1q * (0.5 * h), s + k1s * (0.5 * h));
            let (k3q, k3s) = rhs(am, em, q + k2q * (0.5 * h), s + k2s * (0.5 * h));
            let (k4q, k4s) = rhs(a1, e1, q + k3q * h, s + k3s * h);
            q += (k1q + (k2q + k3q) * 2.0 + k4q) * (h / 6.0);
            s += (k1s + (k2s + k3s) * 2.0 + k4s) * (h / 6.0);
            e0 = e1;
        }
        if !(q.re.is_finite() && q.im.is_finite() && s.re.is_finite() && s.im.is_finite()) {
            return Err(Error::Divergence { k });
        }
        p.push(cis(k * grid.node(j + 1)) * q);
        p_star.push(s);
    }
    Ok((p, p_star))
}

/// Integrates the Krein system for every node of `k_grid`.
pub fn integrate_krein(
    a: &Coefficient,
    r_grid: RadialGrid,
    k_grid: SpectralGrid,
    osc_factor: f64,
) -> Result<KreinSolution> {
    if !(osc_factor.is_finite() && osc_factor > 0.0) {
        return Err(Error::Shape(format!("osc_factor must be positive, got {osc_factor}")));
    }
    let ks: Vec<f64> = k_grid.nodes().collect();
    let subs: Vec<usize> = ks.iter().map(|&k| substeps(r_grid.step(), k, osc_factor)).collect();
    let mut tables = BTreeMap::new();
    for &n in &subs {
        tables.entry(n).or_insert_with(|| stage_table(a, &r_grid, n));
    }
    let columns: Vec<(Vec<Complex64>, Vec<Complex64>)> = ks
        .par_iter()
        .zip(subs.par_iter())
        .map(|(&k, &n)| integrate_column(k, &r_grid, n, &tables[&n]))
        .collect::<Result<_>>()?;
    let mut p = Vec::with_capacity(ks.len() * r_grid.len());
    let mut p_star = Vec::with_capacity(ks.len() * r_grid.len());
    for (cp, cs) in columns {
        p.extend(cp);
        p_star.extend(cs);
    }
    Ok(KreinSolution { r_grid, k_grid, p, p_star, coefficient: a.clone(), osc_factor })
}

impl KreinSolution {
    /// Assembles a solution from stored matrices (column per k node).
    pub fn from_parts(
        r_grid: RadialGrid,
        k_grid: SpectralGrid,
        p: Vec<Complex64>,
        p_star: Vec<Complex64>,
        coefficient: Coefficient,
        osc_factor: f64,
    ) -> Result<Self> {
        let n = r_grid.len() * k_grid.len();
        if p.len() != n || p_star.len() != n {
            return Err(Error::Shape(format!("expected {n} entries per matrix, got {} and {}", p.len(), p_star.len())));
        }
        Ok(Self { r_grid, k_grid, p, p_star, coefficient, osc_factor })
    }

    pub fn r_grid(&self) -> &RadialGrid {
        &self.r_grid
    }

    pub fn k_grid(&self) -> &SpectralGrid {
        &self.k_grid
    }

    pub fn coefficient(&self) -> &Coefficient {
        &self.coefficient
    }

    pub fn osc_factor(&self) -> f64 {
        self.osc_factor
    }

    pub fn p(&self, j: usize, i: usize) -> Complex64 {
        self.p[i * self.r_grid.len() + j]
    }

    pub fn p_star(&self, j: usize, i: usize) -> Complex64 {
        self.p_star[i * self.r_grid.len() + j]
    }

    /// `P(., k_i)` over all r nodes.
    pub fn p_column(&self, i: usize) -> &[Complex64] {
        let n = self.r_grid.len();
        &self.p[i * n..(i + 1) * n]
    }

    pub fn p_star_column(&self, i: usize) -> &[Complex64] {
        let n = self.r_grid.len();
        &self.p_star[i * n..(i + 1) * n]
    }

    pub fn p_row(&self, j: usize) -> Vec<Complex64> {
        (0..self.k_grid.len()).map(|i| self.p(j, i)).collect()
    }

    pub fn p_star_row(&self, j: usize) -> Vec<Complex64> {
        (0..self.k_grid.len()).map(|i| self.p_star(j, i)).collect()
    }
}

/// Grid indices of coefficient jumps that fall on nodes.
fn node_jumps(a: &Coefficient, grid: &RadialGrid) -> Vec<usize> {
    let Shape::Box { start, end, .. } = a.shape() else {
        return Vec::new();
    };
    let mut jumps: Vec<usize> =
        [*start, *end].iter().filter(|&&r| r > 0.0).filter_map(|&r| grid.index_of(r)).collect();
    jumps.dedup();
    jumps
}

/// `int_0^r A P` at every node, split at jumps of `A` so each piece sees
/// one-sided limits at its ends.
fn cumulative_a_p(a: &Coefficient, sol: &KreinSolution, i: usize, jumps: &[usize]) -> Vec<Complex64> {
    let grid = &sol.r_grid;
    let h = grid.step();
    let p = sol.p_column(i);
    if jumps.is_empty() {
        let prod: Vec<Complex64> = a.sample(*grid).values().iter().zip(p).map(|(x, y)| x * y).collect();
        return cumulative_with_support(&prod, h, a.support_bound());
    }
    let shape = a.shape();
    let mut bounds = vec![0];
    bounds.extend_from_slice(jumps);
    bounds.push(grid.count());
    let mut out = vec![Complex64::zero(); grid.len()];
    let mut offset = Complex64::zero();
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if lo == hi {
            continue;
        }
        let piece: Vec<Complex64> = (lo..=hi)
            .map(|j| {
                let r = grid.node(j);
                let v = if j == lo {
                    shape.value_right(r)
                } else if j == hi {
                    shape.value_left(r)
                } else {
                    shape.value(r)
                };
                v * p[j]
            })
            .collect();
        let cum = cumulative_uniform(&piece, h);
        for (o, c) in out[lo..=hi].iter_mut().zip(&cum) {
            *o = offset + c;
        }
        offset = out[hi];
    }
    out
}

/// `max |P*(r,k) - 1 + int_0^r A P|` over the grid.
pub fn residual_integral_identity(sol: &KreinSolution) -> f64 {
    let jumps = node_jumps(&sol.coefficient, &sol.r_grid);
    (0..sol.k_grid.len())
        .into_par_iter()
        .map(|i| {
            let cum = cumulative_a_p(&sol.coefficient, sol, i, &jumps);
            sol.p_star_column(i)
                .iter()
                .zip(&cum)
                .map(|(s, c)| (s - 1.0 + c).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// `max |P(r,k) - e^{irk} conj(P*(r,k))|` over the grid.
pub fn residual_conjugation_identity(sol: &KreinSolution) -> f64 {
    (0..sol.k_grid.len())
        .into_par_iter()
        .map(|i| {
            let k = sol.k_grid.node(i);
            sol.p_column(i)
                .iter()
                .zip(sol.p_star_column(i))
                .enumerate()
                .map(|(j, (p, s))| (p - cis(k * sol.r_grid.node(j)) * s.conj()).norm())
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Residuals below this are rounding noise and carry no order information.
pub const HALVING_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingLevel {
    pub step: f64,
    pub osc_factor: f64,
    pub integral_residual: f64,
    pub conjugation_residual: f64,
    /// `max |P_h - P_{2h}| + max |P*_h - P*_{2h}|` on the coarser nodes.
    pub self_difference: Option<f64>,
}

/// Residuals and solution differences over successively halved steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalvingStudy {
    pub levels: Vec<HalvingLevel>,
    /// Ratios of consecutive integral residuals; `None` when both sit below
    /// [`HALVING_FLOOR`].
    pub integral_ratios: Vec<Option<f64>>,
    pub self_ratios: Vec<Option<f64>>,
}

impl HalvingStudy {
    /// Every ratio that carries information lies in `[lo, hi]`.
    pub fn within(&self, lo: f64, hi: f64) -> bool {
        self.integral_ratios.iter().chain(&self.self_ratios).flatten().all(|r| (lo..=hi).contains(r))
    }
}

fn floor_ratio(coarse: f64, fine: f64) -> Option<f64> {
    if coarse < HALVING_FLOOR && fine < HALVING_FLOOR {
        None
    } else {
        Some(coarse / fine)
    }
}

/// Solves on `extent` with each step in `steps` (each half the previous),
/// scaling `osc_factor` with the step so substeps halve too.
pub fn halving_study(
    a: &Coefficient,
    steps: &[f64],
    extent: f64,
    k_grid: SpectralGrid,
    osc_factor: f64,
) -> Result<HalvingStudy> {
    if steps.len() < 2 || steps.windows(2).any(|w| (w[1] * 2.0 - w[0]).abs() > 1e-12 * w[0]) {
        return Err(Error::Shape("halving study needs at least two steps, each half the previous".into()));
    }
    let mut levels: Vec<HalvingLevel> = Vec::new();
    let mut prev: Option<KreinSolution> = None;
    for &step in steps {
        let grid = RadialGrid::with_extent(step, extent)?;
        let coef = Coefficient::new(a.shape().clone(), grid)?;
        let osc = osc_factor * step / steps[0];
        let sol = integrate_krein(&coef, grid, k_grid, osc)?;
        let self_difference = prev.as_ref().map(|c| {
            let mut dp: f64 = 0.0;
            let mut ds: f64 = 0.0;
            for i in 0..k_grid.len() {
                for j in 0..c.r_grid.len() {
                    dp = dp.max((c.p(j, i) - sol.p(2 * j, i)).norm());
                    ds = ds.max((c.p_star(j, i) - sol.p_star(2 * j, i)).norm());
                }
            }
            dp + ds
        });
        levels.push(HalvingLevel {
            step,
            osc_factor: osc,
            integral_residual: residual_integral_identity(&sol),
            conjugation_residual: residual_conjugation_identity(&sol),
            self_difference,
        });
        prev = Some(sol);
    }
    let integral_ratios = levels.windows(2).map(|w| floor_ratio(w[0].integral_residual, w[1].integral_residual)).collect();
    let self_ratios = levels[1..]
        .windows(2)
        .map(|w| floor_ratio(w[0].self_difference.unwrap_or(0.0), w[1].self_difference.unwrap_or(0.0)))
        .collect();
    Ok(HalvingStudy { levels, integral_ratios, self_ratios })
}

/// Boundary values of the Szegő function on the spectral grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SzegoFunction {
    grid: SpectralGrid,
    values: Vec<Complex64>,
    min_modulus: f64,
    /// Per-k `|P*(r_N) - P*(r_{N-1})|` when no support bound was available.
    tail_difference: Option<Vec<f64>>,
    /// Radius at which the limit was read off.
    radius: f64,
}

impl SzegoFunction {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape("Szegő values do not match the spectral grid".into()));
        }
        let min_modulus = values.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
        Ok(Self { grid, values, min_modulus, tail_difference: None, radius: f64::NAN })
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn min_modulus(&self) -> f64 {
        self.min_modulus
    }

    pub fn tail_difference(&self) -> Option<&[f64]> {
        self.tail_difference.as_deref()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Whether the values were read off a solution by [`szego`].
    pub fn is_validated(&self) -> bool {
        self.radius.is_finite()
    }

    /// `max(|Pi(-K) - 1|, |Pi(K) - 1|)`.
    pub fn edge_deviation(&self) -> f64 {
        let last = self.values.len() - 1;
        (self.values[0] - 1.0).norm().max((self.values[last] - 1.0).norm())
    }
}

/// Reads off `Pi = lim P*`. With a support bound inside the grid this is
/// `P*` at the first node at or past the bound; otherwise the last row is
/// used and its step-to-step change must stay below `tail_tolerance`.
pub fn szego(sol: &KreinSolution, tail_tolerance: Option<f64>) -> Result<SzegoFunction> {
    let grid = &sol.r_grid;
    if let Some(r0) = sol.coefficient.support_bound().filter(|&r0| r0 <= grid.last()) {
        let j = grid.ceil_index(r0);
        let mut pi = SzegoFunction::new(sol.k_grid, sol.p_star_row(j))?;
        pi.radius = grid.node(j);
        return Ok(pi);
    }
    let tol = tail_tolerance.ok_or_else(|| {
        Error::NonConvergence("coefficient has no support bound inside the grid and no tail tolerance was given".into())
    })?;
    let n = grid.count();
    let diffs: Vec<f64> = (0..sol.k_grid.len()).map(|i| (sol.p_star(n, i) - sol.p_star(n - 1, i)).norm()).collect();
    let worst = diffs.iter().cloned().fold(0.0, f64::max);
    if !(worst <= tol) {
        return Err(Error::NonConvergence(format!("tail difference {worst:e} exceeds tolerance {tol:e}")));
    }
    let mut pi = SzegoFunction::new(sol.k_grid, sol.p_star_row(n))?;
    pi.tail_difference = Some(diffs);
    pi.radius = grid.last();
    Ok(pi)
}

/// `dsigma = dk / (2 pi |Pi|^2)`, refusing near-zeros of `Pi`.
pub fn spectral_density(pi: &SzegoFunction, zero_threshold: f64) -> Result<SpectralMeasure> {
    if pi.min_modulus < zero_threshold {
        return Err(Error::PossibleSingularPart { min_modulus: pi.min_modulus, threshold: zero_threshold });
    }
    let density = pi.values.iter().map(|v| 1.0 / (2.0 * PI * v.norm_sqr())).collect();
    SpectralMeasure::new(pi.grid, density, Vec::<PointMass>::new())
}

/// `sup_r (int_r^{r+1} |A|^2)^{1/2}` over window starts at grid nodes.
pub fn stummel_norm(a: &Coefficient) -> Result<f64> {
    let profile = a.profile();
    let grid = profile.grid();
    if grid.last() < 1.0 - 1e-12 {
        return Err(Error::Range(format!("grid of length {} is shorter than one window", grid.last())));
    }
    let sq = profile.map(|_, v| Complex64::new(v.norm_sqr(), 0.0));
    let starts: Vec<f64> = grid.nodes().take_while(|&r| r + 1.0 <= grid.last() + 1e-9 * grid.step()).collect();
    let best = starts
        .par_iter()
        .map(|&r| crate::grid::quad_radial(&sq, r, (r + 1.0).min(grid.last())).map(|z| z.re))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(best.max(0.0).sqrt())
}

/// `K = sup_r int |P(r,k)|^2 / (1+k^2) dsigma` and the radius where it is attained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub constant: f64,
    pub attained_at: f64,
}

pub fn normalization_constant(sol: &KreinSolution, m: &SpectralMeasure) -> Result<Normalization> {
    if m.grid() != &sol.k_grid {
        return Err(Error::Shape("measure and solution use different spectral grids".into()));
    }
    if !m.point_masses().is_empty() {
        return Err(Error::Refused("point masses are not supported by the normalization constant".into()));
    }
    let w = m.node_weights();
    let mut per_r = vec![0.0; sol.r_grid.len()];
    for i in 0..sol.k_grid.len() {
        let k = sol.k_grid.node(i);
        let wi = w[i] / (1.0 + k * k);
        for (acc, p) in per_r.iter_mut().zip(sol.p_column(i)) {
            *acc += p.norm_sqr() * wi;
        }
    }
    let (j, constant) = per_r
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (j, &v)| if v > best.1 { (j, v) } else { best });
    Ok(Normalization { constant, attained_at: sol.r_grid.node(j) })
}

/// Lazy view of the Dirac eigenfunctions `E(x,k) = P(2x,k) e^{-ikx}`,
/// `phi = Re E`, `psi = Im E` on an x-grid with half the radial step.
///
/// Past the coefficient support `E(x,k) = e^{ikx} conj(Pi(k))`, which lets the
/// x-grid extend beyond half the radial grid.
#[derive(Debug, Clone)]
pub struct DiracEigenfunctions<'a> {
    sol: &'a KreinSolution,
    pi: Vec<Complex64>,
    x_grid: RadialGrid,
    /// First x index served by the closed form.
    closed_from: usize,
}

const RESYNC: usize = 64;

impl<'a> DiracEigenfunctions<'a> {
    pub fn new(sol: &'a KreinSolution, pi: &SzegoFunction, x_grid: RadialGrid) -> Result<Self> {
        let half = sol.r_grid.step() / 2.0;
        if (x_grid.step() - half).abs() > 1e-12 * half {
            return Err(Error::Shape(format!(
                "x-grid step {} must be half the radial step {}",
                x_grid.step(),
                sol.r_grid.step()
            )));
        }
        if pi.grid() != &sol.k_grid {
            return Err(Error::Shape("Szegő function lives on a different spectral grid".into()));
        }
        let stored = sol.r_grid.count();
        let closed_from = match sol.coefficient.support_bound() {
            Some(r0) if r0 <= sol.r_grid.last() => sol.r_grid.ceil_index(r0).min(stored),
            _ => {
                if x_grid.count() > stored {
                    return Err(Error::Range(format!(
                        "radial grid reaches {} but the x-grid needs {}",
                        sol.r_grid.last(),
                        2.0 * x_grid.last()
                    )));
                }
                stored + 1
            }
        };
        Ok(Self { sol, pi: pi.values().to_vec(), x_grid, closed_from })
    }

    /// View on the x-grid that mirrors the radial grid (`x_j = r_j / 2`).
    pub fn on_radial_grid(sol: &'a KreinSolution, pi: &SzegoFunction) -> Result<Self> {
        Self::new(sol, pi, sol.r_grid.halved())
    }

    pub fn x_grid(&self) -> &RadialGrid {
        &self.x_grid
    }

    pub fn k_grid(&self) -> &SpectralGrid {
        &self.sol.k_grid
    }

    /// `E(x_j, k_i)` for all x nodes, written into `out`.
    pub fn e_column_into(&self, i: usize, out: &mut Vec<Complex64>) {
        out.clear();
        let k = self.sol.k_grid.node(i);
        let h = self.x_grid.step();
        let pcol = self.sol.p_column(i);
        let tail = self.pi[i].conj();
        let stored_end = self.closed_from.min(self.x_grid.len());
        let back = cis(-k * h);
        let mut rot = Complex64::new(1.0, 0.0);
        for (j, p) in pcol.iter().enumerate().take(stored_end) {
            if j % RESYNC == 0 {
                rot = cis(-k * self.x_grid.node(j));
            }
            out.push(p * rot);
            rot *= back;
        }
        let fwd = cis(k * h);
        for j in stored_end..self.x_grid.len() {
            if (j - stored_end) % RESYNC == 0 {
                rot = cis(k * self.x_grid.node(j));
            }
            out.push(rot * tail);
            rot *= fwd;
        }
    }

    pub fn e_column(&self, i: usize) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(self.x_grid.len());
        self.e_column_into(i, &mut out);
        out
    }

    pub fn psi_column(&self, i: usize) -> Vec<f64> {
        self.e_column(i).iter().map(|e| e.im).collect()
    }

    pub fn phi_column(&self, i: usize) -> Vec<f64> {
        self.e_column(i).iter().map(|e| e.re).collect()
    }

    /// Full `(phi, psi, E)` matrices, indexed `[x][k]`.
    pub fn materialize(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<Complex64>>) {
        let nx = self.x_grid.len();
        let nk = self.sol.k_grid.len();
        let mut e = vec![vec![Complex64::new(0.0, 0.0); nk]; nx];
        for i in 0..nk {
            for (j, v) in self.e_column(i).into_iter().enumerate() {
                e[j][i] = v;
            }
        }
        let phi = e.iter().map(|row| row.iter().map(|v| v.re).collect()).collect();
        let psi = e.iter().map(|row| row.iter().map(|v| v.im).collect()).collect();
        (phi, psi, e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halving_study_shows_fourth_order() {
        let g = RadialGrid::with_extent(0.01, 5.0).unwrap();
        let kg = SpectralGrid::new(5.0, 1.0).unwrap();
        let a = Coefficient::boxcar(0.3, 1.0, 3.0, g).unwrap();
        let s = halving_study(&a, &[0.01, 0.005, 0.0025], 5.0, kg, 0.1).unwrap();
        assert_eq!(s.integral_ratios.len(), 2);
        assert_eq!(s.self_ratios.len(), 1);
        assert!(s.within(12.0, 20.0), "{s:?}");
        assert!(s.levels[2].integral_residual < 1e-9);

        let free = halving_study(&Coefficient::zero(g), &[0.01, 0.005], 5.0, kg, 0.1).unwrap();
        assert!(free.integral_ratios.iter().all(Option::is_none));
        assert!(halving_study(&a, &[0.01, 0.004], 5.0, kg, 0.1).is_err());
    }

    #[test]
    fn jump_inside_grid_keeps_identity_sharp() {
        let rg = RadialGrid::with_extent(1e-3, 6.0).unwrap();
        let kg = SpectralGrid::new(10.0, 0.5).unwrap();
        let a = Coefficient::boxcar(0.3, 1.0, 3.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        assert!(residual_integral_identity(&sol) < 1e-10);
    }

    fn free_solution(step: f64, extent: f64, kmax: f64, dk: f64) -> KreinSolution {
        let rg = RadialGrid::with_extent(step, extent).unwrap();
        let kg = SpectralGrid::new(kmax, dk).unwrap();
        integrate_krein(&Coefficient::zero(rg), rg, kg, DEFAULT_OSC_FACTOR).unwrap()
    }

    #[test]
    fn free_system_is_exact() {
        let sol = free_solution(1e-3, 20.0, 10.0, 0.5);
        let mut worst: f64 = 0.0;
        for i in 0..sol.k_grid().len() {
            let k = sol.k_grid().node(i);
            for j in 0..sol.r_grid().len() {
                let r = sol.r_grid().node(j);
                worst = worst.max((sol.p(j, i) - cis(k * r)).norm());
                worst = worst.max((sol.p_star(j, i) - 1.0).norm());
            }
        }
        assert!(worst < 1e-10, "{worst}");
        assert_eq!(residual_integral_identity(&sol), 0.0);
        assert!(residual_conjugation_identity(&sol) < 1e-14);
    }

    #[test]
    fn constant_coefficient_at_zero_frequency() {
        let rg = RadialGrid::new(1e-3, 1000).unwrap();
        let kg = SpectralGrid::new(1.0, 1.0).unwrap();
        let a = Coefficient::constant(1.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        let i0 = kg.zero_index();
        let e = (-1.0f64).exp();
        assert!((sol.p(1000, i0) - e).norm() < 1e-12);
        assert!((sol.p_star(1000, i0) - e).norm() < 1e-12);
        assert!((e - 0.3678794).abs() < 1e-7);
    }

    #[test]
    fn constant_coefficient_identities() {
        let rg = RadialGrid::with_extent(1e-3, 10.0).unwrap();
        let kg = SpectralGrid::new(10.0, 0.5).unwrap();
        let a = Coefficient::constant(1.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        assert!(residual_conjugation_identity(&sol) < 1e-8);
        let r = residual_integral_identity(&sol);
        assert!(r < 1e-8, "{r}");
    }

    #[test]
    fn box_coefficient_szego_is_frozen_past_support() {
        let rg = RadialGrid::with_extent(1e-3, 4.0).unwrap();
        let kg = SpectralGrid::new(5.0, 0.25).unwrap();
        let a = Coefficient::boxcar(0.3, 0.0, 1.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        let pi = szego(&sol, None).unwrap();
        assert!((pi.radius() - 1.0).abs() < 1e-12);
        for i in 0..kg.len() {
            for j in 1000..rg.len() {
                assert_eq!(sol.p_star(j, i), pi.values()[i]);
            }
        }
        let r = residual_integral_identity(&sol);
        assert!(r < 1e-7, "{r}");
    }

    #[test]
    fn szego_without_support_needs_tolerance() {
        let rg = RadialGrid::with_extent(1e-2, 2.0).unwrap();
        let kg = SpectralGrid::new(1.0, 0.5).unwrap();
        let a = Coefficient::constant(0.1, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        assert!(matches!(szego(&sol, None), Err(Error::NonConvergence(_))));
        assert!(matches!(szego(&sol, Some(1e-12)), Err(Error::NonConvergence(_))));
        let pi = szego(&sol, Some(1.0)).unwrap();
        assert!(pi.tail_difference().is_some());
    }

    #[test]
    fn free_density_and_guard() {
        let kg = SpectralGrid::new(2.0, 0.5).unwrap();
        let pi = SzegoFunction::new(kg, vec![Complex64::new(1.0, 0.0); kg.len()]).unwrap();
        let m = spectral_density(&pi, DEFAULT_ZERO_THRESHOLD).unwrap();
        assert!(m.density().iter().all(|d| (d - 0.1591549).abs() < 1e-7));
        let small = SzegoFunction::new(kg, vec![Complex64::new(0.5e-3, 0.0); kg.len()]).unwrap();
        assert!(matches!(
            spectral_density(&small, 1e-3),
            Err(Error::PossibleSingularPart { .. })
        ));
    }

    #[test]
    fn stummel_examples() {
        let rg = RadialGrid::with_extent(1e-3, 4.0).unwrap();
        assert_eq!(stummel_norm(&Coefficient::zero(rg)).unwrap(), 0.0);
        let c = stummel_norm(&Coefficient::constant(0.7, rg).unwrap()).unwrap();
        assert!((c - 0.7).abs() < 1e-12);
        let b = stummel_norm(&Coefficient::boxcar(1.0, 0.0, 0.5, rg).unwrap()).unwrap();
        assert!((b - 0.5f64.sqrt()).abs() < 1e-12);
        let short = RadialGrid::new(0.1, 5).unwrap();
        assert!(stummel_norm(&Coefficient::zero(short)).is_err());
    }

    #[test]
    fn free_normalization_constant() {
        let sol = free_solution(0.5, 2.0, 50.0, 0.05);
        let pi = szego(&sol, None).unwrap();
        let m = spectral_density(&pi, DEFAULT_ZERO_THRESHOLD).unwrap();
        let n = normalization_constant(&sol, &m).unwrap();
        assert!((n.constant - 50f64.atan() / PI).abs() < 1e-6, "{}", n.constant);
        assert!((n.constant - 0.493635).abs() < 1e-5);
    }

    #[test]
    fn free_eigenfunctions() {
        let sol = free_solution(0.02, 4.0, 3.0, 0.5);
        let pi = szego(&sol, None).unwrap();
        // the closed form takes over past the (empty) support and extends the grid
        let view = DiracEigenfunctions::new(&sol, &pi, RadialGrid::new(0.01, 1000).unwrap()).unwrap();
        for i in 0..sol.k_grid().len() {
            let k = sol.k_grid().node(i);
            let e = view.e_column(i);
            for (j, v) in e.iter().enumerate() {
                let x = view.x_grid().node(j);
                assert!((v - cis(k * x)).norm() < 1e-12);
            }
            let psi = view.psi_column(i);
            assert!((psi[17] - (k * view.x_grid().node(17)).sin()).abs() < 1e-12);
        }
    }

    #[test]
    fn eigenfunction_modulus_identity() {
        let rg = RadialGrid::with_extent(0.01, 6.0).unwrap();
        let kg = SpectralGrid::new(4.0, 0.5).unwrap();
        let a = Coefficient::gaussian(0.3, 2.0, 1.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        let pi = szego(&sol, Some(1e-6)).unwrap();
        let view = DiracEigenfunctions::on_radial_grid(&sol, &pi).unwrap();
        let (phi, psi, _) = view.materialize();
        for j in (0..rg.len()).step_by(37) {
            for i in 0..kg.len() {
                let lhs = phi[j][i].powi(2) + psi[j][i].powi(2);
                assert!((lhs - sol.p(j, i).norm_sqr()).abs() < 1e-12);
            }
        }
        let too_long = RadialGrid::new(0.005, 2000).unwrap();
        assert!(matches!(DiracEigenfunctions::new(&sol, &pi, too_long), Err(Error::Range(_))));
    }

    #[test]
    fn closed_form_tail_matches_stored_rows() {
        let rg = RadialGrid::with_extent(0.01, 12.0).unwrap();
        let kg = SpectralGrid::new(4.0, 0.5).unwrap();
        let a = Coefficient::gaussian(0.3, 2.0, 1.0, rg).unwrap();
        let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        let pi = szego(&sol, None).unwrap();
        let view = DiracEigenfunctions::on_radial_grid(&sol, &pi).unwrap();
        for i in 0..kg.len() {
            let k = kg.node(i);
            let e = view.e_column(i);
            for j in (900..rg.len()).step_by(50) {
                let x = view.x_grid().node(j);
                let direct = sol.p(j, i) * cis(-k * x);
                assert!((e[j] - direct).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_is_reported() {
        let rg = RadialGrid::with_extent(0.5, 400.0).unwrap();
        let kg = SpectralGrid::new(0.5, 0.5).unwrap();
        let a = Coefficient::constant(50.0, rg).unwrap();
        assert!(matches!(integrate_krein(&a, rg, kg, 10.0), Err(Error::Divergence { .. })));
    }
}
