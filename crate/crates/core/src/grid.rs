//! Uniform radial and spectral grids, sampled profiles, spectral measures and
//! the quadrature rules every other module integrates with.
//!
//! All integrals over uniform grids use composite Simpson. An odd number of
//! intervals closes with the 3/8 rule on the last three intervals. A lone
//! interval borrows a neighbouring node for a three-point rule and falls back
//! to the trapezoid rule only on two-node grids. Cumulative integrals use the
//! same rules, so the value at node `j` equals the direct integral over
//! `[0, r_j]`.

use std::ops::{Add, Mul};

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Values that can be integrated with real quadrature weights.
pub trait Quadrable: Copy + Add<Output = Self> + Mul<f64, Output = Self> + Zero {}

impl<T> Quadrable for T where T: Copy + Add<Output = T> + Mul<f64, Output = T> + Zero {}

const NODE_SLACK: f64 = 1e-9;

/// Composite quadrature weights for `n_intervals` uniform intervals of width `h`.
pub fn simpson_weights(n_intervals: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n_intervals + 1];
    match n_intervals {
        0 => {}
        1 => {
            w[0] = 0.5 * h;
            w[1] = 0.5 * h;
        }
        n => {
            let simpson_part = if n % 2 == 0 { n } else { n - 3 };
            for j in (0..simpson_part).step_by(2) {
                w[j] += h / 3.0;
                w[j + 1] += 4.0 * h / 3.0;
                w[j + 2] += h / 3.0;
            }
            if n % 2 == 1 {
                let s = simpson_part;
                let c = 3.0 * h / 8.0;
                w[s] += c;
                w[s + 1] += 3.0 * c;
                w[s + 2] += 3.0 * c;
                w[s + 3] += c;
            }
        }
    }
    w
}

/// Integral of uniformly spaced samples over their full span.
pub fn integrate_uniform<T: Quadrable>(values: &[T], h: f64) -> T {
    let n = values.len().saturating_sub(1);
    match n {
        0 => T::zero(),
        1 => (values[0] + values[1]) * (0.5 * h),
        _ => {
            let simpson_part = if n % 2 == 0 { n } else { n - 3 };
            let mut acc = T::zero();
            for j in (0..simpson_part).step_by(2) {
                acc = acc + (values[j] + values[j + 1] * 4.0 + values[j + 2]) * (h / 3.0);
            }
            if n % 2 == 1 {
                let s = simpson_part;
                acc = acc
                    + (values[s] + values[s + 1] * 3.0 + values[s + 2] * 3.0 + values[s + 3])
                        * (3.0 * h / 8.0);
            }
            acc
        }
    }
}

/// Integral over the single interval `[j, j + 1]`. A neighbouring node below
/// `usable` turns this into a three-point rule exact for quadratics; without
/// one it is the trapezoid rule.
fn single_interval<T: Quadrable>(values: &[T], j: usize, usable: usize, h: f64) -> T {
    if j + 2 < usable.min(values.len()) {
        (values[j] * 5.0 + values[j + 1] * 8.0 + values[j + 2] * -1.0) * (h / 12.0)
    } else if j >= 1 {
        (values[j - 1] * -1.0 + values[j] * 8.0 + values[j + 1] * 5.0) * (h / 12.0)
    } else {
        (values[j] + values[j + 1]) * (0.5 * h)
    }
}

/// `out[j]` is the integral over nodes `0..=j`: composite Simpson with a 3/8
/// closure at odd `j`, and the three-point rule for the first interval.
pub fn cumulative_uniform<T: Quadrable>(values: &[T], h: f64) -> Vec<T> {
    cumulative_within(values, h, values.len())
}

fn cumulative_within<T: Quadrable>(values: &[T], h: f64, usable: usize) -> Vec<T> {
    let n = values.len();
    let mut out = vec![T::zero(); n];
    if n < 2 {
        return out;
    }
    out[1] = single_interval(values, 0, usable, h);
    for j in 2..n {
        out[j] = if j % 2 == 0 {
            out[j - 2] + (values[j - 2] + values[j - 1] * 4.0 + values[j]) * (h / 3.0)
        } else {
            // j >= 3 here; out[j - 3] is an even (pure Simpson) node
            out[j - 3]
                + (values[j - 3] + values[j - 2] * 3.0 + values[j - 1] * 3.0 + values[j])
                    * (3.0 * h / 8.0)
        };
    }
    out
}

/// Nodes `r_j = j * step`, `j = 0..=count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    step: f64,
    count: usize,
}

impl RadialGrid {
    pub fn new(step: f64, count: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::Shape(format!("radial step must be positive, got {step}")));
        }
        if count < 2 {
            return Err(Error::Shape(format!("radial grid needs count >= 2, got {count}")));
        }
        Ok(Self { step, count })
    }

    /// Grid with the given step reaching at least `extent`.
    pub fn with_extent(step: f64, extent: f64) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Shape(format!("radial extent must be positive, got {extent}")));
        }
        let count = (extent / step - NODE_SLACK).ceil().max(0.0) as usize;
        Self::new(step, count)
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Number of nodes, `count + 1`.
    pub fn len(&self) -> usize {
        self.count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.node(self.count)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.count).map(move |j| self.node(j))
    }

    /// Index of `r` if it coincides with a node.
    pub fn index_of(&self, r: f64) -> Option<usize> {
        let u = r / self.step;
        let j = u.round();
        if (u - j).abs() <= NODE_SLACK && j >= 0.0 && (j as usize) <= self.count {
            Some(j as usize)
        } else {
            None
        }
    }

    /// First node index at or beyond `r`, clamped to the grid.
    pub fn ceil_index(&self, r: f64) -> usize {
        let u = (r / self.step - NODE_SLACK).ceil().max(0.0) as usize;
        u.min(self.count)
    }

    pub fn weights(&self) -> Vec<f64> {
        simpson_weights(self.count, self.step)
    }

    /// The same grid with half the step, as used for `x = r / 2`.
    pub fn halved(&self) -> Self {
        Self { step: 0.5 * self.step, count: self.count }
    }
}

/// Symmetric uniform grid `k_i = (i - m) * step`, `i = 0..=2m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrid {
    step: f64,
    half_count: usize,
}

impl SpectralGrid {
    /// Grid covering `[-half_width, half_width]` with a step close to `step`;
    /// the step is adjusted so that `half_width` is a node.
    pub fn new(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0 && step.is_finite() && step > 0.0) {
            return Err(Error::Shape(format!(
                "spectral grid needs positive half width and step, got {half_width}, {step}"
            )));
        }
        let m = (half_width / step).round().max(1.0) as usize;
        Ok(Self { step: half_width / m as f64, half_count: m })
    }

    pub fn from_parts(step: f64, half_count: usize) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) || half_count == 0 {
            return Err(Error::Shape("spectral grid needs a positive step and half count".into()));
        }
        Ok(Self { step, half_count })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn half_count(&self) -> usize {
        self.half_count
    }

    pub fn half_width(&self) -> f64 {
        self.step * self.half_count as f64
    }

    pub fn len(&self) -> usize {
        2 * self.half_count + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn node(&self, i: usize) -> f64 {
        (i as f64 - self.half_count as f64) * self.step
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.node(i))
    }

    pub fn zero_index(&self) -> usize {
        self.half_count
    }

    /// Index of the node `-k_i`.
    pub fn mirror(&self, i: usize) -> usize {
        2 * self.half_count - i
    }

    pub fn weights(&self) -> Vec<f64> {
        simpson_weights(2 * self.half_count, self.step)
    }

    /// Trapezoid weights. Sums of `e^{ikx}` against these are periodic in
    /// `x` with period `2 pi / step`, half the aliasing reach of Simpson.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.step; self.len()];
        let last = w.len() - 1;
        w[0] *= 0.5;
        w[last] *= 0.5;
        w
    }

    /// Linear interpolation of nodal values at `k`.
    pub fn interpolate(&self, values: &[Complex64], k: f64) -> Result<Complex64> {
        let u = k / self.step + self.half_count as f64;
        let last = (self.len() - 1) as f64;
        if !(-NODE_SLACK..=last + NODE_SLACK).contains(&u) {
            return Err(Error::Range(format!("k = {k} lies outside the spectral grid")));
        }
        let u = u.clamp(0.0, last);
        let j = (u.floor() as usize).min(self.len() - 2);
        let t = u - j as f64;
        Ok(values[j] * (1.0 - t) + values[j + 1] * t)
    }
}

/// Complex samples on a radial grid, optionally known to vanish beyond a support bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledProfile {
    grid: RadialGrid,
    values: Vec<Complex64>,
    declared_support: Option<f64>,
}

impl SampledProfile {
    pub fn new(grid: RadialGrid, values: Vec<Complex64>, declared_support: Option<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(r0) = declared_support {
            if !(r0.is_finite() && r0 >= 0.0) {
                return Err(Error::Shape(format!("declared support must be nonnegative, got {r0}")));
            }
            let first_outside = (0..grid.len()).find(|&j| grid.node(j) > r0 + NODE_SLACK * grid.step());
            if let Some(j0) = first_outside {
                if let Some(j) = (j0..grid.len()).find(|&j| values[j] != Complex64::zero()) {
                    return Err(Error::Shape(format!(
                        "profile is nonzero at r = {} beyond declared support {r0}",
                        grid.node(j)
                    )));
                }
            }
        }
        Ok(Self { grid, values, declared_support })
    }

    /// Samples `f` at the nodes; values beyond `declared_support` are set to zero.
    pub fn from_fn(grid: RadialGrid, declared_support: Option<f64>, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid
            .nodes()
            .map(|r| match declared_support {
                Some(r0) if r > r0 + NODE_SLACK * grid.step() => Complex64::zero(),
                _ => f(r),
            })
            .collect();
        Self { grid, values, declared_support }
    }

    pub fn from_real_fn(grid: RadialGrid, declared_support: Option<f64>, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, declared_support, |r| Complex64::new(f(r), 0.0))
    }

    pub fn zeros(grid: RadialGrid) -> Self {
        Self { grid, values: vec![Complex64::zero(); grid.len()], declared_support: None }
    }

    pub fn grid(&self) -> &RadialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn declared_support(&self) -> Option<f64> {
        self.declared_support
    }

    /// Pointwise map that keeps the declared support. `f(0)` must be 0 for
    /// the support to remain valid.
    pub fn map(&self, f: impl Fn(f64, Complex64) -> Complex64) -> Self {
        let values = self
            .values
            .iter()
            .enumerate()
            .map(|(j, &v)| f(self.grid.node(j), v))
            .collect();
        Self { grid: self.grid, values, declared_support: self.declared_support }
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        self.map(|_, v| v * c)
    }

    /// `alpha * self + beta * other` on a shared grid.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Shape("profiles live on different grids".into()));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        let declared_support = match (self.declared_support, other.declared_support) {
            (Some(a), Some(b)) => Some(a.max(b)),
            _ => None,
        };
        Ok(Self { grid: self.grid, values, declared_support })
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    /// Value at `r` by linear interpolation between nodes.
    pub fn interpolate(&self, r: f64) -> Complex64 {
        interpolate_nodes(&self.values, self.grid.step(), r)
    }

    /// `(int |p|^2 dr)^(1/2)` over the whole grid.
    pub fn l2_norm(&self) -> f64 {
        let sq = self.map(|_, v| Complex64::new(v.norm_sqr(), 0.0));
        quad_radial(&sq, 0.0, self.grid.last()).map(|z| z.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Plain discrete norm `(sum |p_j|^2 step)^(1/2)`.
    pub fn discrete_l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step()).sqrt()
    }
}

pub(crate) fn interpolate_nodes(values: &[Complex64], h: f64, r: f64) -> Complex64 {
    let n = values.len();
    let u = (r / h).clamp(0.0, (n - 1) as f64);
    let j = (u.floor() as usize).min(n - 2);
    let t = u - j as f64;
    values[j] * (1.0 - t) + values[j + 1] * t
}

/// Composite quadrature of `p` over `[a, b]`. Endpoints between nodes are
/// handled by a trapezoid piece on the linearly interpolated value, and a
/// declared support clamps the upper limit.
pub fn quad_radial(p: &SampledProfile, a: f64, b: f64) -> Result<Complex64> {
    let grid = p.grid;
    let h = grid.step();
    let slack = NODE_SLACK * h;
    if !(a >= -slack && a <= b + slack && b <= grid.last() + slack) {
        return Err(Error::Range(format!(
            "interval [{a}, {b}] is outside the grid [0, {}]",
            grid.last()
        )));
    }
    let a = a.clamp(0.0, grid.last());
    let mut b = b.clamp(a, grid.last());
    if let Some(r0) = p.declared_support {
        b = b.min(r0);
    }
    if b <= a {
        return Ok(Complex64::zero());
    }
    let usable = match p.declared_support {
        Some(r0) => ((r0 / h + NODE_SLACK).floor() as usize + 1).min(p.values.len()),
        None => p.values.len(),
    };
    Ok(quad_nodes(&p.values, h, a, b, usable))
}

fn quad_nodes(values: &[Complex64], h: f64, a: f64, b: f64, usable: usize) -> Complex64 {
    let ua = a / h;
    let ub = b / h;
    let ia = (ua - NODE_SLACK).ceil().max(0.0) as usize;
    let ib = ((ub + NODE_SLACK).floor() as usize).min(values.len() - 1);
    if ia > ib {
        let fa = interpolate_nodes(values, h, a);
        let fb = interpolate_nodes(values, h, b);
        return (fa + fb) * (0.5 * (b - a));
    }
    let mut total = if ib == ia + 1 {
        single_interval(values, ia, usable, h)
    } else {
        integrate_uniform(&values[ia..=ib], h)
    };
    let ra = ia as f64 * h;
    if ra - a > NODE_SLACK * h {
        let fa = interpolate_nodes(values, h, a);
        total += (fa + values[ia]) * (0.5 * (ra - a));
    }
    let rb = ib as f64 * h;
    if b - rb > NODE_SLACK * h {
        let fb = interpolate_nodes(values, h, b);
        total += (values[ib] + fb) * (0.5 * (b - rb));
    }
    total
}

/// `out[j] = quad_radial(p, 0, r_j)` for every node, in linear time.
pub fn cumulative_radial(p: &SampledProfile) -> Vec<Complex64> {
    cumulative_with_support(&p.values, p.grid.step(), p.declared_support)
}

pub(crate) fn cumulative_with_support(values: &[Complex64], h: f64, support: Option<f64>) -> Vec<Complex64> {
    let Some(r0) = support else {
        return cumulative_uniform(values, h);
    };
    let u = r0 / h;
    let j_floor = (u + NODE_SLACK).floor() as usize;
    let mut out = cumulative_within(values, h, j_floor + 1);
    if j_floor + 1 < values.len() {
        let mut held = out[j_floor];
        let rj = j_floor as f64 * h;
        if r0 - rj > NODE_SLACK * h {
            let f0 = interpolate_nodes(values, h, r0);
            held += (values[j_floor] + f0) * (0.5 * (r0 - rj));
        }
        for v in out.iter_mut().skip(j_floor + 1) {
            *v = held;
        }
    }
    out
}

/// `L = int |f(r)|^2 log^2(2 + r) dr` over the grid.
pub fn log_weight_functional(f: &SampledProfile) -> f64 {
    let weighted = f.map(|r, v| {
        let l = (2.0 + r).ln();
        Complex64::new(v.norm_sqr() * l * l, 0.0)
    });
    quad_radial(&weighted, 0.0, f.grid.last()).map(|z| z.re).unwrap_or(0.0)
}

/// A point mass of a spectral measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointMass {
    #[serde(rename = "k")]
    pub location: f64,
    #[serde(rename = "w")]
    pub weight: f64,
}

/// Absolutely continuous density on a spectral grid plus finitely many point masses.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMeasure {
    grid: SpectralGrid,
    density: Vec<f64>,
    point_masses: Vec<PointMass>,
}

impl SpectralMeasure {
    pub fn new(grid: SpectralGrid, density: Vec<f64>, point_masses: Vec<PointMass>) -> Result<Self> {
        if density.len() != grid.len() {
            return Err(Error::Shape(format!(
                "density has {} values for a spectral grid of {} nodes",
                density.len(),
                grid.len()
            )));
        }
        if let Some(d) = density.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Shape(format!("density value {d} is not a nonnegative number")));
        }
        if let Some(m) = point_masses.iter().find(|m| !(m.weight.is_finite() && m.weight > 0.0)) {
            return Err(Error::Shape(format!("point mass weight {} is not positive", m.weight)));
        }
        Ok(Self { grid, density, point_masses })
    }

    /// `dk / (2 pi)`, the measure of the free system.
    pub fn free(grid: SpectralGrid) -> Self {
        let density = vec![1.0 / (2.0 * std::f64::consts::PI); grid.len()];
        Self { grid, density, point_masses: Vec::new() }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn point_masses(&self) -> &[PointMass] {
        &self.point_masses
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            density: self.density.iter().map(|d| d * c).collect(),
            point_masses: self
                .point_masses
                .iter()
                .map(|m| PointMass { location: m.location, weight: m.weight * c })
                .collect(),
        }
    }

    /// The measure `2 sigma`.
    pub fn doubled(&self) -> Self {
        self.scaled(2.0)
    }

    /// Quadrature weight times density at every node.
    pub fn node_weights(&self) -> Vec<f64> {
        self.grid.weights().iter().zip(&self.density).map(|(w, d)| w * d).collect()
    }

    /// Density times trapezoid weights, for oscillatory synthesis sums.
    pub fn trapezoid_node_weights(&self) -> Vec<f64> {
        self.grid.trapezoid_weights().iter().zip(&self.density).map(|(w, d)| w * d).collect()
    }

    /// Discrete `int dsigma / (1 + k^2)`.
    pub fn weighted_total_mass(&self) -> f64 {
        let ac: f64 = self
            .node_weights()
            .iter()
            .zip(self.grid.nodes())
            .map(|(w, k)| w / (1.0 + k * k))
            .sum();
        ac + self.point_masses.iter().map(|m| m.weight / (1.0 + m.location * m.location)).sum::<f64>()
    }

    /// Fails when `int dsigma / (1 + k^2)` exceeds `ceiling`.
    pub fn check_mass_ceiling(&self, ceiling: f64) -> Result<f64> {
        let total = self.weighted_total_mass();
        if total.is_finite() && total <= ceiling {
            Ok(total)
        } else {
            Err(Error::Range(format!("int dsigma/(1+k^2) = {total} exceeds ceiling {ceiling}")))
        }
    }
}

fn check_len(values: &[Complex64], m: &SpectralMeasure) -> Result<()> {
    if values.len() != m.grid.len() {
        return Err(Error::Shape(format!(
            "function has {} values for a spectral grid of {} nodes",
            values.len(),
            m.grid.len()
        )));
    }
    Ok(())
}

/// `int |F|^2 kappa^{-1} dsigma`.
pub fn norm_sq_sigma(values: &[Complex64], m: &SpectralMeasure, weight: Option<&dyn Fn(f64) -> f64>) -> Result<f64> {
    check_len(values, m)?;
    let w = m.node_weights();
    let mut total = 0.0;
    for (i, (f, wi)) in values.iter().zip(&w).enumerate() {
        let kw = weight.map_or(1.0, |g| g(m.grid.node(i)));
        total += f.norm_sqr() * wi * kw;
    }
    for mass in &m.point_masses {
        let f = m.grid.interpolate(values, mass.location)?;
        let kw = weight.map_or(1.0, |g| g(mass.location));
        total += f.norm_sqr() * mass.weight * kw;
    }
    Ok(total)
}

/// Weighted `L^2(sigma / kappa)` norm; without a weight this is the plain `||F||_{2,sigma}`.
pub fn norm_l2_sigma(values: &[Complex64], m: &SpectralMeasure, weight: Option<&dyn Fn(f64) -> f64>) -> Result<f64> {
    norm_sq_sigma(values, m, weight).map(f64::sqrt)
}

/// `int_{lo <= k <= hi} |F|^2 dsigma` using the full-grid weights restricted
/// to the window, so the value is monotone in the window.
pub fn windowed_norm_sq(values: &[Complex64], m: &SpectralMeasure, lo: f64, hi: f64) -> Result<f64> {
    check_len(values, m)?;
    if !(lo <= hi) {
        return Err(Error::Domain(format!("empty window [{lo}, {hi}]")));
    }
    let w = m.node_weights();
    let mut total = 0.0;
    for (i, (f, wi)) in values.iter().zip(&w).enumerate() {
        let k = m.grid.node(i);
        if k >= lo && k <= hi {
            total += f.norm_sqr() * wi;
        }
    }
    for mass in &m.point_masses {
        if mass.location >= lo && mass.location <= hi {
            total += m.grid.interpolate(values, mass.location)?.norm_sqr() * mass.weight;
        }
    }
    Ok(total)
}

/// Inverse weight `1 / (1 + k^2)`.
pub fn inverse_kappa(k: f64) -> f64 {
    1.0 / (1.0 + k * k)
}
