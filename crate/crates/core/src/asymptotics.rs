//! Oscillatory integrals: the Fresnel tail `H(x) = int_x^inf e^{it^2} dt`
//! and its asymptotic series, a stationary-phase scaling check, and the
//! large-time profile of the free Schrödinger evolution on the line.

use std::f64::consts::{FRAC_PI_4, PI};

use num_bigint::BigUint;
use num_complex::Complex64;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{cumulative_uniform, SpectralGrid};

const I: Complex64 = Complex64::new(0.0, 1.0);

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes.
const G_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mid = f(c);
    let mut kronrod = mid * GK_WEIGHTS[7];
    let mut gauss = mid * G_WEIGHTS[3];
    for j in 0..7 {
        let pair = f(c - h * GK_NODES[j]) + f(c + h * GK_NODES[j]);
        kronrod += pair * GK_WEIGHTS[j];
        if j % 2 == 1 {
            gauss += pair * G_WEIGHTS[j / 2];
        }
    }
    ((kronrod * h), ((kronrod - gauss) * h).norm())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature of a complex integrand.
///
/// Intervals are bisected until each local error estimate is below its
/// share of `tol`.
pub fn gauss_kronrod(f: &dyn Fn(f64) -> Complex64, a: f64, b: f64, tol: f64) -> Result<Complex64> {
    if a == b {
        return Ok(Complex64::zero());
    }
    let span = b - a;
    let mut stack = vec![(a, b)];
    let mut total = Complex64::zero();
    let mut evaluated = 0usize;
    while let Some((lo, hi)) = stack.pop() {
        evaluated += 1;
        if evaluated > 200_000 {
            return Err(Error::NonConvergence(format!("adaptive quadrature on [{a}, {b}] did not settle")));
        }
        let (value, err) = gk15(f, lo, hi);
        let share = tol * ((hi - lo) / span).abs();
        if err <= share.max(1e-15 * value.norm()) || (hi - lo).abs() < 1e-12 * span.abs() {
            total += value;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi));
            stack.push((lo, mid));
        }
    }
    Ok(total)
}

/// `H(0) = (sqrt(pi)/2) e^{i pi/4}`.
pub fn fresnel_h0() -> Complex64 {
    Complex64::from_polar(0.5 * PI.sqrt(), FRAC_PI_4)
}

/// Exact coefficient `i^power * numerator / 2^exponent`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactCoefficient {
    pub numerator: BigUint,
    pub exponent: u32,
    /// Power of `i`, reduced mod 4.
    pub i_power: u8,
}

impl ExactCoefficient {
    pub fn to_complex(&self) -> Complex64 {
        let magnitude = self.numerator.to_f64().unwrap_or(f64::INFINITY) * 2f64.powi(-(self.exponent as i32));
        let unit = match self.i_power {
            0 => Complex64::new(1.0, 0.0),
            1 => I,
            2 => Complex64::new(-1.0, 0.0),
            _ => -I,
        };
        unit * magnitude
    }
}

/// The first `n` coefficients of `H(x) ~ e^{ix^2} sum_j c_j x^{-1-2j}`.
///
/// Each integration by parts multiplies by `(2j+1)/(2i)`, starting from
/// `c_0 = i/2`.
pub fn fresnel_coeffs(n: usize) -> Vec<ExactCoefficient> {
    let mut out = Vec::with_capacity(n);
    let mut c = ExactCoefficient { numerator: BigUint::one(), exponent: 1, i_power: 1 };
    for j in 0..n {
        out.push(c.clone());
        c = ExactCoefficient {
            numerator: &c.numerator * BigUint::from(2 * j as u64 + 1),
            exponent: c.exponent + 1,
            i_power: (c.i_power + 3) % 4,
        };
    }
    out
}

/// Which evaluation route produced a value of `H`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Quadrature,
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FresnelValue {
    pub value: Complex64,
    pub branch: Branch,
    /// Size of the first omitted series term, or the quadrature tolerance.
    pub error_estimate: f64,
    pub within_tolerance: bool,
}

/// Two-branch evaluator for `H`: quadrature below the crossover, the
/// truncated asymptotic series above it.
#[derive(Debug, Clone, PartialEq)]
pub struct FresnelExpansion {
    crossover: f64,
    coefficients: Vec<Complex64>,
    next_coefficient: f64,
    tolerance: f64,
}

impl Default for FresnelExpansion {
    fn default() -> Self {
        Self::new(6.0, 10, 1e-10).expect("default expansion is valid")
    }
}

impl FresnelExpansion {
    pub fn new(crossover: f64, order: usize, tolerance: f64) -> Result<Self> {
        if !(crossover > 0.0) || order == 0 || !(tolerance > 0.0) {
            return Err(Error::Domain("crossover, order and tolerance must be positive".into()));
        }
        let exact = fresnel_coeffs(order + 1);
        let next_coefficient = exact[order].to_complex().norm();
        let coefficients = exact[..order].iter().map(ExactCoefficient::to_complex).collect();
        Ok(Self { crossover, coefficients, next_coefficient, tolerance })
    }

    pub fn crossover(&self) -> f64 {
        self.crossover
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coefficients
    }

    pub fn eval(&self, x: f64) -> Result<FresnelValue> {
        if !(x >= 0.0) {
            return Err(Error::Domain(format!("H is evaluated for x >= 0, got {x}")));
        }
        if x < self.crossover {
            self.quadrature(x)
        } else {
            Ok(self.series(x))
        }
    }

    /// `H(0) - int_0^x e^{it^2} dt`, whatever the crossover.
    pub fn quadrature(&self, x: f64) -> Result<FresnelValue> {
        let tol = 1e-3 * self.tolerance;
        let head = gauss_kronrod(&|t| Complex64::from_polar(1.0, t * t), 0.0, x, tol)?;
        Ok(FresnelValue {
            value: fresnel_h0() - head,
            branch: Branch::Quadrature,
            error_estimate: tol,
            within_tolerance: true,
        })
    }

    /// The truncated series, whatever the crossover.
    pub fn series(&self, x: f64) -> FresnelValue {
        let inv_sq = 1.0 / (x * x);
        let mut power = 1.0 / x;
        let mut sum = Complex64::zero();
        for c in &self.coefficients {
            sum += c * power;
            power *= inv_sq;
        }
        let error_estimate = self.next_coefficient * power;
        FresnelValue {
            value: Complex64::from_polar(1.0, x * x) * sum,
            branch: Branch::Series,
            error_estimate,
            within_tolerance: error_estimate <= self.tolerance,
        }
    }
}

/// `H(x)` with the default expansion.
pub fn fresnel_h(x: f64) -> Result<Complex64> {
    FresnelExpansion::default().eval(x).map(|v| v.value)
}

/// Oscillatory moments `int_{-w}^{w} e^{is} s^m ds` for m = 0, 1, 2.
fn filon_moments(w: f64) -> [Complex64; 3] {
    let (s, c) = w.sin_cos();
    if w >= 1.0 {
        return [
            Complex64::new(2.0 * s, 0.0),
            Complex64::new(0.0, 2.0 * (s - w * c)),
            Complex64::new(2.0 * ((w * w - 2.0) * s + 2.0 * w * c), 0.0),
        ];
    }
    // Series for short panels, where the closed forms cancel.
    let w2 = w * w;
    let (mut m1, mut m2) = (0.0, 0.0);
    let mut pw = w2 * w;
    let mut fact_odd = 1.0; // (2k+1)!
    let mut fact_even = 1.0; // (2k)!
    for k in 0..12 {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let denom = (2 * k + 3) as f64;
        m1 += sign * pw / (fact_odd * denom);
        m2 += sign * pw / (fact_even * denom);
        pw *= w2;
        let kk = (2 * k + 2) as f64;
        fact_even *= kk * (kk - 1.0);
        fact_odd *= (kk + 1.0) * kk;
    }
    [Complex64::new(2.0 * s, 0.0), Complex64::new(0.0, 2.0 * m1), Complex64::new(2.0 * m2, 0.0)]
}

/// Filon-Simpson quadrature of `int_lo^hi e^{iv} phi(v) dv` on panels of
/// relative width `rel`.
fn filon_geometric(phi: &dyn Fn(f64) -> f64, lo: f64, hi: f64, rel: f64) -> Complex64 {
    let mut total = Complex64::zero();
    let mut v0 = lo;
    let mut f0 = phi(v0);
    while v0 < hi {
        let v1 = (v0 * (1.0 + rel)).min(hi);
        let w = 0.5 * (v1 - v0);
        let vc = v0 + w;
        let (fc, f1) = (phi(vc), phi(v1));
        let b = (f1 - f0) / (2.0 * w);
        let q = (f1 - 2.0 * fc + f0) / (2.0 * w * w);
        let [m0, m1, m2] = filon_moments(w);
        total += Complex64::from_polar(1.0, vc) * (m0 * fc + m1 * b + m2 * q);
        v0 = v1;
        f0 = f1;
    }
    total
}

const PHASE_SPLIT: f64 = 8.0;
const FILON_PANEL: f64 = 0.005;

/// `int_0^a e^{iu^2} g(u eps) du`.
///
/// Gauss-Kronrod on `[0, min(a, 8)]`; past that the substitution `v = u^2`
/// turns the chirp into `e^{iv}` and Filon-Simpson panels take over.
pub fn stationary_phase_integral(g: &dyn Fn(f64) -> f64, eps: f64, a: f64, nu: f64) -> Result<Complex64> {
    if !(eps > 0.0 && eps < 1.0) || !(a > 0.0) || !(nu > 0.0) {
        return Err(Error::Domain(format!("need 0 < eps < 1, a > 0, nu > 0 (eps = {eps}, a = {a}, nu = {nu})")));
    }
    if a * eps > nu * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("|a eps| = {} exceeds nu = {nu}", a * eps)));
    }
    if g(0.0).abs() > 1e-14 {
        return Err(Error::Precondition(format!("g(0) = {} but must vanish", g(0.0))));
    }
    let split = a.min(PHASE_SPLIT);
    let near = gauss_kronrod(&|u| Complex64::from_polar(g(u * eps), u * u), 0.0, split, 1e-14)?;
    if a <= split {
        return Ok(near);
    }
    let phi = |v: f64| {
        let u = v.sqrt();
        g(u * eps) / (2.0 * u)
    };
    Ok(near + filon_geometric(&phi, split * split, a * a, FILON_PANEL))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseEntry {
    pub eps: f64,
    pub a: f64,
    pub integral: Complex64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub nu: f64,
    pub entries: Vec<PhaseEntry>,
    pub max_ratio: f64,
    pub ceiling: f64,
    pub pass: bool,
}

impl PhaseReport {
    /// `|I(eps)| / |I(eps')|` for consecutive entries.
    pub fn successive_ratios(&self) -> Vec<f64> {
        self.entries.windows(2).map(|w| w[0].integral.norm() / w[1].integral.norm()).collect()
    }
}

/// Scans `eps` with `a = nu/eps` and reports `|I|/eps` against a ceiling.
pub fn stationary_phase_check(
    g: &(dyn Fn(f64) -> f64 + Sync),
    eps_list: &[f64],
    nu: f64,
    ceiling: f64,
) -> Result<PhaseReport> {
    let entries = eps_list
        .par_iter()
        .map(|&eps| {
            let a = nu / eps;
            let integral = stationary_phase_integral(g, eps, a, nu)?;
            Ok(PhaseEntry { eps, a, integral, ratio: integral.norm() / eps })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_ratio = entries.iter().map(|e| e.ratio).fold(0.0, f64::max);
    Ok(PhaseReport { nu, entries, max_ratio, ceiling, pass: max_ratio <= ceiling })
}

/// Samples of a function on a symmetric uniform grid of the whole line.
#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    grid: SpectralGrid,
    values: Vec<Complex64>,
}

impl LineProfile {
    pub fn new(grid: SpectralGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!("{} values for a line grid of {} nodes", values.len(), grid.len())));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: SpectralGrid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().map(f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * c).collect() }
    }

    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.step()).sqrt()
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::Shape("line profiles live on different grids".into()));
        }
        let sq: f64 = self.values.iter().zip(&other.values).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((sq * self.grid.step()).sqrt())
    }
}

/// Errors out if more than `1e-6` of the mass sits within five nodes of
/// either end of the grid.
pub(crate) fn check_walls(values: &[Complex64], what: &str) -> Result<()> {
    let total: f64 = values.iter().map(|v| v.norm_sqr()).sum();
    let n = values.len();
    let edge = 5.min(n / 2);
    let near: f64 = values[..edge].iter().chain(&values[n - edge..]).map(|v| v.norm_sqr()).sum();
    if total > 0.0 && near > 1e-6 * total {
        return Err(Error::DomainTooSmall(format!(
            "{what}: fraction {:.3e} of the mass reaches the grid ends",
            near / total
        )));
    }
    Ok(())
}

/// `e^{it d^2/dx^2} h` through the periodic FFT with multiplier `e^{-it xi^2}`.
pub fn free_line_propagate(h: &LineProfile, t: f64) -> Result<LineProfile> {
    let n = h.values.len();
    let mut buf = h.values.clone();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    let dxi = 2.0 * PI / (n as f64 * h.grid.step());
    for (b, v) in buf.iter_mut().enumerate() {
        let q = if b <= n / 2 { b as f64 } else { b as f64 - n as f64 };
        let xi = q * dxi;
        *v *= Complex64::from_polar(1.0 / n as f64, -t * xi * xi);
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    check_walls(&buf, "free evolution on the line")?;
    LineProfile::new(h.grid, buf)
}

/// `h^(xi)` at arbitrary frequencies by direct quadrature over the nodes
/// where `h` is not negligible. Samples carry no information past the
/// grid Nyquist frequency, so the transform is zero there.
pub fn line_fourier_at(h: &LineProfile, xis: &[f64]) -> Vec<Complex64> {
    let peak = h.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let active: Vec<usize> = (0..h.values.len()).filter(|&l| h.values[l].norm() > 1e-17 * peak).collect();
    let (Some(&first), Some(&last)) = (active.first(), active.last()) else {
        return vec![Complex64::zero(); xis.len()];
    };
    let dx = h.grid.step();
    let scale = dx / (2.0 * PI).sqrt();
    xis.par_iter()
        .map(|&xi| {
            if xi.abs() >= PI / dx {
                return Complex64::zero();
            }
            let step = Complex64::from_polar(1.0, -xi * dx);
            let mut sum = Complex64::zero();
            let mut phase = Complex64::zero();
            for (n, l) in (first..=last).enumerate() {
                if n % 64 == 0 {
                    phase = Complex64::from_polar(1.0, -xi * h.grid.node(l));
                }
                sum += h.values[l] * phase;
                phase *= step;
            }
            sum * scale
        })
        .collect()
}

/// `(1/(1+i)) e^{ix^2/4t} t^{-1/2} h^(x/2t)` on the grid of `h`.
pub fn comparison_profile(h: &LineProfile, t: f64) -> Result<LineProfile> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("comparison profile needs t > 0, got {t}")));
    }
    let xs: Vec<f64> = h.grid.nodes().collect();
    let xis: Vec<f64> = xs.iter().map(|x| x / (2.0 * t)).collect();
    let hat = line_fourier_at(h, &xis);
    let pre = Complex64::new(1.0, 1.0).inv() / t.sqrt();
    let values = xs.iter().zip(hat).map(|(&x, v)| pre * Complex64::from_polar(1.0, x * x / (4.0 * t)) * v).collect();
    LineProfile::new(h.grid, values)
}

/// L2 distance between the free evolution of `h` and its large-time profile.
pub fn free_asymptotic_defect(h: &LineProfile, t: f64) -> Result<f64> {
    if !(t >= 1.0) {
        return Err(Error::Precondition(format!("the asymptotic profile is compared for t >= 1, got {t}")));
    }
    let evolved = free_line_propagate(h, t)?;
    evolved.distance(&comparison_profile(h, t)?)
}

/// Gaussian frequency window `amplitude * exp(-(xi - center)^2 / (2 width^2))`,
/// cut to zero below `1e-14` of its peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPacket {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
}

impl BandPacket {
    pub fn support(&self) -> (f64, f64) {
        let reach = self.width * (2.0 * 1e14f64.ln()).sqrt();
        (self.center - reach, self.center + reach)
    }

    pub fn value(&self, xi: f64) -> f64 {
        let (lo, hi) = self.support();
        if xi < lo || xi > hi {
            return 0.0;
        }
        let u = (xi - self.center) / self.width;
        self.amplitude * (-0.5 * u * u).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundConfig {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub k_grid: SpectralGrid,
    pub ceiling: f64,
    /// Allowed relative spread of the per-time sups.
    pub flatness: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformBoundReport {
    pub times: Vec<f64>,
    pub sup_per_time: Vec<f64>,
    pub sup: f64,
    pub spread: f64,
    pub ceiling: f64,
    pub flatness: f64,
    pub pass: bool,
}

/// `sup_k |int_{alpha t}^{beta t} e^{ix^2/4t} t^{-1/2} h^(x/2t) e^{ixk} dx|`
/// over the configured lattice.
///
/// With `x = 2t xi` the integral is `2 sqrt(t) int e^{it(xi^2 + 2 xi k)} h^(xi) dxi`
/// over `[alpha/2, beta/2]` intersected with the support of the window.
pub fn uniform_bound_check(packet: &BandPacket, cfg: &UniformBoundConfig) -> Result<UniformBoundReport> {
    if cfg.times.iter().any(|&t| !(t >= 1.0)) {
        return Err(Error::Precondition("uniform bound times must be >= 1".into()));
    }
    let pairs: Vec<(f64, f64)> = cfg
        .alphas
        .iter()
        .flat_map(|&a| cfg.betas.iter().map(move |&b| (a, b)))
        .filter(|(a, b)| a < b)
        .collect();
    if pairs.is_empty() || pairs.iter().any(|(a, b)| !(a.is_finite() && b.is_finite())) {
        return Err(Error::Domain("the (alpha, beta) lattice needs finite pairs with alpha < beta".into()));
    }
    let (s0, s1) = packet.support();
    let kmax = cfg.k_grid.half_width();
    let reach = s0.abs().max(s1.abs()) + kmax;
    let ks: Vec<f64> = cfg.k_grid.nodes().collect();

    let mut sup_per_time = Vec::with_capacity(cfg.times.len());
    for &t in &cfg.times {
        // About five nodes per radian of the fastest phase.
        let n = (((s1 - s0) * 2.0 * t * reach / 0.2).ceil() as usize).max(16);
        let n = n + n % 2;
        let h = (s1 - s0) / n as f64;
        let window: Vec<f64> = (0..=n).map(|j| packet.value(s0 + j as f64 * h)).collect();
        let pre = 2.0 * t.sqrt();
        let sup = ks
            .par_iter()
            .map(|&k| {
                let vals: Vec<Complex64> = (0..=n)
                    .map(|j| {
                        let xi = s0 + j as f64 * h;
                        Complex64::from_polar(window[j], t * xi * (xi + 2.0 * k))
                    })
                    .collect();
                let cum = cumulative_uniform(&vals, h);
                let at = |xi: f64| {
                    let s = ((xi - s0) / h).clamp(0.0, n as f64);
                    let j = (s.floor() as usize).min(n - 1);
                    let w = s - j as f64;
                    cum[j] * (1.0 - w) + cum[j + 1] * w
                };
                pairs.iter().map(|&(a, b)| (pre * (at(0.5 * b) - at(0.5 * a))).norm()).fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max);
        sup_per_time.push(sup);
    }
    let sup = sup_per_time.iter().copied().fold(0.0, f64::max);
    let low = sup_per_time.iter().copied().fold(f64::INFINITY, f64::min);
    let spread = if sup > 0.0 { (sup - low) / sup } else { 0.0 };
    Ok(UniformBoundReport {
        times: cfg.times.clone(),
        sup_per_time,
        sup,
        spread,
        ceiling: cfg.ceiling,
        flatness: cfg.flatness,
        pass: sup <= cfg.ceiling && spread <= cfg.flatness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad_h(x: f64) -> Complex64 {
        FresnelExpansion::default().quadrature(x).unwrap().value
    }

    #[test]
    fn gauss_kronrod_polynomial_and_oscillatory() {
        let v = gauss_kronrod(&|x| Complex64::new(x * x * x, 0.0), 0.0, 2.0, 1e-14).unwrap();
        assert!((v.re - 4.0).abs() < 1e-13);
        let v = gauss_kronrod(&|x| Complex64::from_polar(1.0, 50.0 * x), 0.0, 1.0, 1e-13).unwrap();
        let exact = (Complex64::from_polar(1.0, 50.0) - 1.0) / Complex64::new(0.0, 50.0);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn h_at_zero() {
        let h = fresnel_h(0.0).unwrap();
        assert!((h.re - 0.626_657_068_657_750_1).abs() < 1e-10);
        assert!((h.im - 0.626_657_068_657_750_1).abs() < 1e-10);
    }

    #[test]
    fn branches_agree_at_crossover() {
        let e = FresnelExpansion::default();
        let x0 = e.crossover();
        let q = e.quadrature(x0).unwrap().value;
        let s = e.series(x0);
        assert!((q - s.value).norm() < 1e-8, "{}", (q - s.value).norm());
        assert!(s.within_tolerance);
        assert_eq!(e.eval(x0).unwrap().branch, Branch::Series);
        assert_eq!(e.eval(0.5 * x0).unwrap().branch, Branch::Quadrature);
    }

    #[test]
    fn short_series_flags_its_error() {
        let e = FresnelExpansion::new(3.0, 3, 1e-8).unwrap();
        let v = e.eval(3.0).unwrap();
        assert!(!v.within_tolerance);
        // |c_3| / 3^7
        assert!((v.error_estimate - 15.0 / 16.0 / 2187.0).abs() < 1e-15);
    }

    #[test]
    fn leading_term_at_ten() {
        let x = 10.0f64;
        let lead = I * Complex64::from_polar(1.0, x * x) / (2.0 * x);
        let d = (quad_h(x) - lead).norm();
        assert!(d < 1.5e-3);
        // The gap is the next term, 1/(4 x^3).
        assert!((d - 0.25 / 1000.0).abs() < 1e-5);
    }

    #[test]
    fn envelope_for_large_x() {
        for x in [5.0, 7.5, 10.0, 15.0, 25.0] {
            assert!(fresnel_h(x).unwrap().norm() <= 1.2 / (2.0 * x));
        }
    }

    #[test]
    fn negative_argument_is_rejected() {
        assert!(matches!(fresnel_h(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn coefficients_are_exact() {
        let c = fresnel_coeffs(5);
        assert_eq!(c[0].to_complex(), Complex64::new(0.0, 0.5));
        assert_eq!(c[1].to_complex(), Complex64::new(0.25, 0.0));
        assert_eq!(c[2].to_complex(), Complex64::new(0.0, -0.375));
        assert_eq!(c[3].to_complex(), Complex64::new(-15.0 / 16.0, 0.0));
        assert_eq!(c[4].numerator, BigUint::from(105u32));
        assert_eq!(fresnel_coeffs(5), c);
    }

    #[test]
    fn coefficient_ratio_grows_linearly() {
        let c = fresnel_coeffs(30);
        for j in 0..29 {
            let ratio = c[j + 1].to_complex().norm() / c[j].to_complex().norm();
            assert!((ratio - (2 * j + 1) as f64 / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn c1_from_a_large_x_fit() {
        let x = 20.0f64;
        let c = fresnel_coeffs(3);
        let reduced = quad_h(x) * Complex64::from_polar(1.0, -x * x);
        let fit = (reduced - c[0].to_complex() / x) * x.powi(3);
        assert!((fit - c[1].to_complex()).norm() < 1e-3);
        let refined = fit - c[2].to_complex() / (x * x);
        assert!((refined - c[1].to_complex()).norm() < 1e-5);
    }

    #[test]
    fn filon_moments_match_closed_forms_near_switch() {
        let w = 0.999_999_999;
        let s = filon_moments(w);
        let l = filon_moments(1.0);
        for m in 0..3 {
            assert!((s[m] - l[m]).norm() < 1e-8);
        }
    }

    // For g(u) = u the integral is eps (e^{ia^2} - 1)/(2i).
    #[test]
    fn linear_g_matches_closed_form() {
        for eps in [0.3, 0.1, 1e-2, 1e-3, 1e-4] {
            let a = 1.0 / eps;
            let got = stationary_phase_integral(&|u| u, eps, a, 1.0).unwrap();
            let exact = eps * (Complex64::from_polar(1.0, a * a) - 1.0) / (2.0 * I);
            // a^2 reaches 1e8, where one ulp of phase is 1.5e-8.
            assert!((got - exact).norm() < 1e-7 * eps, "eps {eps}: {}", (got - exact).norm() / eps);
        }
    }

    // For g(u) = u(1 - u) and nu = 1 the boundary term cancels:
    // I = i eps/2 + eps^2 (H(0) - H(a)) / (2i).
    #[test]
    fn quadratic_g_matches_closed_form() {
        for eps in [0.1, 1e-2, 1e-3, 1e-4] {
            let a = 1.0 / eps;
            let got = stationary_phase_integral(&|u| u * (1.0 - u), eps, a, 1.0).unwrap();
            let exact = I * eps / 2.0 + eps * eps * (fresnel_h0() - fresnel_h(a).unwrap()) / (2.0 * I);
            assert!((got - exact).norm() < 1e-8 * eps, "eps {eps}: {}", (got - exact).norm() / eps);
        }
    }

    #[test]
    fn phase_check_scales_linearly() {
        let eps: Vec<f64> = (0..8).map(|j| 1e-1 / 2f64.powi(j)).collect();
        let r = stationary_phase_check(&|u| u * (1.0 - u), &eps, 1.0, 2.0).unwrap();
        assert!(r.pass);
        for (e, q) in eps.iter().zip(r.successive_ratios()) {
            if *e <= 1e-2 {
                assert!((q - 2.0).abs() < 0.4, "eps {e}: ratio {q}");
            }
        }
        let zero = stationary_phase_check(&|_| 0.0, &eps, 1.0, 2.0).unwrap();
        assert_eq!(zero.max_ratio, 0.0);
    }

    #[test]
    fn phase_preconditions() {
        assert!(matches!(stationary_phase_integral(&|u| u, 0.1, 20.0, 1.0), Err(Error::Precondition(_))));
        assert!(matches!(stationary_phase_integral(&|u| 1.0 + u, 0.1, 5.0, 1.0), Err(Error::Precondition(_))));
    }

    fn gaussian_line(c: f64) -> LineProfile {
        let grid = SpectralGrid::new(1500.0, 0.1).unwrap();
        LineProfile::from_fn(grid, |x| Complex64::new(c * (-0.5 * x * x).exp(), 0.0))
    }

    #[test]
    fn line_propagation_matches_gaussian_closed_form() {
        let h = gaussian_line(1.0);
        for t in [1.0, 10.0] {
            let u = free_line_propagate(&h, t).unwrap();
            let z = Complex64::new(1.0, 2.0 * t);
            let exact = LineProfile::from_fn(*h.grid(), |x| (-(x * x) / (2.0 * z)).exp() / z.sqrt());
            assert!(u.distance(&exact).unwrap() < 1e-10);
        }
    }

    #[test]
    fn comparison_profile_keeps_the_norm() {
        let h = gaussian_line(1.0);
        for t in [1.0, 10.0, 100.0] {
            let p = comparison_profile(&h, t).unwrap();
            assert!((p.l2_norm() - h.l2_norm()).abs() < 1e-6);
        }
    }

    #[test]
    fn gaussian_defect_decays() {
        let h = gaussian_line(1.0);
        let d: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|&t| free_asymptotic_defect(&h, t).unwrap()).collect();
        assert!(d[0] / d[2] > 10.0, "{d:?}");
        assert!(d[0] >= d[1] && d[1] >= d[2]);
        let scaled = free_asymptotic_defect(&gaussian_line(3.0), 10.0).unwrap();
        assert!((scaled - 3.0 * d[1]).abs() < 1e-9);
    }

    #[test]
    fn wrap_around_is_detected() {
        let grid = SpectralGrid::new(30.0, 0.1).unwrap();
        let h = LineProfile::from_fn(grid, |x| Complex64::new((-0.5 * x * x).exp(), 0.0));
        assert!(matches!(free_line_propagate(&h, 100.0), Err(Error::DomainTooSmall(_))));
    }

    fn uniform_cfg(times: Vec<f64>) -> UniformBoundConfig {
        UniformBoundConfig {
            times,
            alphas: vec![-1.0, 0.0, 6.0, 22.0],
            betas: vec![6.0, 10.0, 23.0],
            k_grid: SpectralGrid::new(12.0, 0.05).unwrap(),
            ceiling: 10.0,
            flatness: 0.25,
        }
    }

    #[test]
    fn uniform_bound_is_flat_in_time() {
        let packet = BandPacket { amplitude: 1.0, center: 3.0, width: 1.0 };
        let r = uniform_bound_check(&packet, &uniform_cfg(vec![1.0, 4.0, 16.0, 64.0])).unwrap();
        assert!(r.pass, "{r:?}");
        // Full-range integrals tend to 2 sqrt(pi) sup h^.
        assert!((r.sup_per_time[3] - 2.0 * PI.sqrt()).abs() < 0.2 * r.sup);
    }

    #[test]
    fn uniform_bound_is_linear() {
        let packet = BandPacket { amplitude: 1.0, center: 3.0, width: 1.0 };
        let cfg = uniform_cfg(vec![1.0, 2.0]);
        let r = uniform_bound_check(&packet, &cfg).unwrap();
        let doubled = uniform_bound_check(&BandPacket { amplitude: 2.0, ..packet }, &cfg).unwrap();
        assert!((doubled.sup - 2.0 * r.sup).abs() < 1e-9 * r.sup);
        let zero = uniform_bound_check(&BandPacket { amplitude: 0.0, ..packet }, &cfg).unwrap();
        assert_eq!(zero.sup, 0.0);
    }
}
