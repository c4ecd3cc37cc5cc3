//! Dyadic block decompositions and maximal functions of partial generalized
//! Fourier integrals `int_0^t f P dr`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    cumulative_with_support, interpolate_nodes, inverse_kappa, log_weight_functional, norm_sq_sigma, quad_radial,
    RadialGrid, SampledProfile, SpectralMeasure,
};
use crate::krein::{normalization_constant, KreinSolution};
use crate::transforms::{forward_p, SpectralFunction};

/// Head block `int_0^1 f P` plus blocks `int_{2^{j-1}}^{2^j} f P`, `j = 1..=J`.
#[derive(Debug, Clone)]
pub struct DyadicDecomposition {
    pub head: SpectralFunction,
    pub blocks: Vec<SpectralFunction>,
    /// `max_k |head + sum blocks - int_0^{2^J} f P|`.
    pub telescoping_defect: f64,
}

impl DyadicDecomposition {
    pub fn depth(&self) -> usize {
        self.blocks.len()
    }
}

fn check_data(f: &SampledProfile, sol: &KreinSolution) -> Result<()> {
    if f.grid() != sol.r_grid() {
        return Err(Error::Shape("data and solution use different radial grids".into()));
    }
    Ok(())
}

pub fn decompose_dyadic(f: &SampledProfile, sol: &KreinSolution, depth: u32) -> Result<DyadicDecomposition> {
    check_data(f, sol)?;
    let top = 2f64.powi(depth as i32);
    if top > sol.r_grid().last() + 1e-9 {
        return Err(Error::Range(format!("2^{depth} = {top} exceeds the radial grid {}", sol.r_grid().last())));
    }
    let block = |a: f64, b: f64| -> Result<SpectralFunction> {
        let values = (0..sol.k_grid().len())
            .into_par_iter()
            .map(|i| {
                let prod = f.values().iter().zip(sol.p_column(i)).map(|(x, y)| x * y).collect();
                quad_radial(&SampledProfile::new(*f.grid(), prod, f.declared_support())?, a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        SpectralFunction::new(*sol.k_grid(), values)
    };
    let head = block(0.0, 1.0)?;
    let blocks = (1..=depth)
        .map(|j| block(2f64.powi(j as i32 - 1), 2f64.powi(j as i32)))
        .collect::<Result<Vec<_>>>()?;
    let full = forward_p(f, sol, top)?;
    let telescoping_defect = (0..sol.k_grid().len())
        .map(|i| {
            let sum = blocks.iter().fold(head.values()[i], |acc, b| acc + b.values()[i]);
            (sum - full.values()[i]).norm()
        })
        .fold(0.0, f64::max);
    Ok(DyadicDecomposition { head, blocks, telescoping_defect })
}

/// Which supremum a maximal function takes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Variant {
    /// `sup_{n = 1..n_max}` over integer endpoints.
    Integer { n_max: usize },
    /// `sup_t` over every grid node, optionally against `dsigma / (1 + k^2)`.
    Continuous { kappa_weight: bool },
    /// `sup_{rho < r1 < r2} |P*(r2) - P*(r1)|`.
    Tail { rho: f64 },
}

#[derive(Debug, Clone)]
pub struct MaximalReport {
    pub variant: Variant,
    /// `M(k) >= 0`.
    pub m: Vec<f64>,
    /// Denominator of the ratio.
    pub l: f64,
    pub norm_m_sq: f64,
    pub ratio: f64,
}

impl MaximalReport {
    pub fn as_spectral_function(&self, sol: &KreinSolution) -> SpectralFunction {
        let values = self.m.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        SpectralFunction::new(*sol.k_grid(), values).expect("one value per k node")
    }
}

/// Partial integral `int_0^r` from cumulative values at nodes.
fn cumulative_at(cum: &[Complex64], values: &[Complex64], grid: &RadialGrid, r: f64) -> Complex64 {
    let h = grid.step();
    let u = r / h;
    let j = ((u + 1e-9).floor() as usize).min(grid.count());
    let rj = grid.node(j);
    if r - rj <= 1e-9 * h {
        return cum[j];
    }
    cum[j] + (values[j] + interpolate_nodes(values, h, r)) * (0.5 * (r - rj))
}

fn running_sup(
    f: &SampledProfile,
    sol: &KreinSolution,
    pick: impl Fn(&[Complex64], &[Complex64]) -> f64 + Sync,
) -> Vec<f64> {
    let h = f.grid().step();
    (0..sol.k_grid().len())
        .into_par_iter()
        .map(|i| {
            let prod: Vec<Complex64> = f.values().iter().zip(sol.p_column(i)).map(|(x, y)| x * y).collect();
            let cum = cumulative_with_support(&prod, h, f.declared_support());
            pick(&cum, &prod)
        })
        .collect()
}

fn data_weight(f: &SampledProfile) -> Result<f64> {
    let l = log_weight_functional(f);
    if !(l > 0.0) {
        return Err(Error::Degenerate("log-weighted norm L of the data is zero".into()));
    }
    Ok(l)
}

/// `M(k) = max_{n = 1..n_max} |int_0^n f P dr|` and `||M||^2_sigma / L`.
pub fn maximal_integer(f: &SampledProfile, sol: &KreinSolution, m: &SpectralMeasure, n_max: usize) -> Result<MaximalReport> {
    check_data(f, sol)?;
    let grid = *sol.r_grid();
    if n_max == 0 || n_max as f64 > grid.last() + 1e-9 {
        return Err(Error::Range(format!("n_max = {n_max} must lie in [1, {}]", grid.last())));
    }
    let l = data_weight(f)?;
    let mv = running_sup(f, sol, |cum, prod| {
        (1..=n_max).map(|n| cumulative_at(cum, prod, &grid, n as f64).norm()).fold(0.0, f64::max)
    });
    let norm_m_sq = norm_sq_sigma(&to_complex(&mv), m, None)?;
    Ok(MaximalReport { variant: Variant::Integer { n_max }, m: mv, l, norm_m_sq, ratio: norm_m_sq / l })
}

/// `M(k) = sup_t |int_0^t f P dr|` over all grid nodes. With `kappa_weight`
/// the norm is taken against `dsigma / (1+k^2)` and the ratio against
/// `(||1/kappa||_inf + K) L`; otherwise the ratio is `||M||^2_sigma / L`.
pub fn maximal_continuous(
    f: &SampledProfile,
    sol: &KreinSolution,
    m: &SpectralMeasure,
    kappa_weight: bool,
) -> Result<MaximalReport> {
    check_data(f, sol)?;
    let l = data_weight(f)?;
    let mv = running_sup(f, sol, |cum, _| cum.iter().map(|c| c.norm()).fold(0.0, f64::max));
    let (norm_m_sq, denom) = if kappa_weight {
        let k = normalization_constant(sol, m)?.constant;
        (norm_sq_sigma(&to_complex(&mv), m, Some(&inverse_kappa))?, (1.0 + k) * l)
    } else {
        (norm_sq_sigma(&to_complex(&mv), m, None)?, l)
    };
    Ok(MaximalReport { variant: Variant::Continuous { kappa_weight }, m: mv, l: denom, norm_m_sq, ratio: norm_m_sq / denom })
}

fn to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

fn cross(o: Complex64, a: Complex64, b: Complex64) -> f64 {
    (a.re - o.re) * (b.im - o.im) - (a.im - o.im) * (b.re - o.re)
}

/// Vertices of the convex hull in counter-clockwise order (monotone chain).
fn convex_hull(points: &[Complex64]) -> Vec<Complex64> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Complex64> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Complex64>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Largest distance between two points of the set.
pub fn diameter(points: &[Complex64]) -> f64 {
    let hull = convex_hull(points);
    let n = hull.len();
    if n < 2 {
        return 0.0;
    }
    if n <= 64 {
        let mut best: f64 = 0.0;
        for a in 0..n {
            for b in a + 1..n {
                best = best.max((hull[a] - hull[b]).norm());
            }
        }
        return best;
    }
    // rotating calipers over antipodal pairs
    let mut best: f64 = 0.0;
    let mut j = 1;
    for i in 0..n {
        let ni = (i + 1) % n;
        while cross(hull[i], hull[ni], hull[(j + 1) % n]).abs() > cross(hull[i], hull[ni], hull[j]).abs() {
            j = (j + 1) % n;
        }
        best = best.max((hull[i] - hull[j]).norm()).max((hull[ni] - hull[j]).norm());
    }
    best
}

/// `D(k) = sup_{rho <= r1 < r2} |P*(r2,k) - P*(r1,k)|` over grid nodes, its
/// norm in `L^2(sigma / (1+k^2))` and the ratio against
/// `(1 + ||A||_2^2) int_rho^inf |A|^2 log^2(2+r) dr`.
pub fn tail_oscillation(sol: &KreinSolution, m: &SpectralMeasure, rho: f64) -> Result<MaximalReport> {
    let grid = sol.r_grid();
    if !(rho >= 0.0 && rho <= grid.last()) {
        return Err(Error::Range(format!("rho = {rho} lies outside [0, {}]", grid.last())));
    }
    let j0 = grid.ceil_index(rho);
    let dv: Vec<f64> = (0..sol.k_grid().len())
        .into_par_iter()
        .map(|i| diameter(&sol.p_star_column(i)[j0..]))
        .collect();
    let norm_m_sq = norm_sq_sigma(&to_complex(&dv), m, Some(&inverse_kappa))?;
    let a = sol.coefficient().sample(*grid);
    let a_sq = a.map(|_, v| Complex64::new(v.norm_sqr(), 0.0));
    let a_norm_sq = quad_radial(&a_sq, 0.0, grid.last())?.re;
    let tail_weight = if grid.last() - rho <= 0.0 {
        0.0
    } else {
        let w = a.map(|r, v| {
            let lg = (2.0 + r).ln();
            Complex64::new(v.norm_sqr() * lg * lg, 0.0)
        });
        quad_radial(&w, rho, grid.last())?.re
    };
    let denom = (1.0 + a_norm_sq) * tail_weight;
    let ratio = if norm_m_sq == 0.0 { 0.0 } else { norm_m_sq / denom };
    Ok(MaximalReport { variant: Variant::Tail { rho }, m: dv, l: denom, norm_m_sq, ratio })
}

/// Seeded piecewise-linear real data supported in `[0, support]` and
/// normalized to `L = 1`. Draw `index` uses the stream `seed + index`.
pub fn random_profile(grid: RadialGrid, support: f64, seed: u64, index: u64) -> Result<SampledProfile> {
    if !(support > 0.0 && support <= grid.last() + 1e-9) {
        return Err(Error::Range(format!("support {support} must lie in (0, {}]", grid.last())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index));
    let pieces: usize = rng.gen_range(4..=16);
    let mut knots: Vec<f64> = (0..pieces).map(|_| rng.gen_range(-1.0..1.0)).collect();
    knots.push(0.0);
    let width = support / pieces as f64;
    let raw = SampledProfile::from_real_fn(grid, Some(support), |r| {
        if r > support {
            return 0.0;
        }
        let u = (r / width).min(pieces as f64);
        let j = (u.floor() as usize).min(pieces - 1);
        let t = u - j as f64;
        knots[j] * (1.0 - t) + knots[j + 1] * t
    });
    let l = log_weight_functional(&raw);
    if !(l > 0.0) {
        return Err(Error::Degenerate("random profile vanished".into()));
    }
    Ok(raw.scaled(Complex64::new(1.0 / l.sqrt(), 0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::Coefficient;
    use crate::grid::SpectralGrid;
    use crate::krein::{integrate_krein, spectral_density, szego, DEFAULT_OSC_FACTOR};
    use proptest::prelude::*;

    fn setup(a: impl Fn(RadialGrid) -> Coefficient, extent: f64, kmax: f64, dk: f64) -> (KreinSolution, SpectralMeasure) {
        let rg = RadialGrid::with_extent(0.01, extent).unwrap();
        let kg = SpectralGrid::new(kmax, dk).unwrap();
        let sol = integrate_krein(&a(rg), rg, kg, DEFAULT_OSC_FACTOR).unwrap();
        let pi = szego(&sol, None).unwrap();
        let m = spectral_density(&pi, 1e-3).unwrap();
        (sol, m)
    }

    #[test]
    fn dyadic_blocks_at_zero_frequency() {
        let (sol, _) = setup(Coefficient::zero, 8.0, 2.0, 0.5);
        let f = SampledProfile::from_real_fn(*sol.r_grid(), Some(4.0), |_| 1.0);
        let d = decompose_dyadic(&f, &sol, 3).unwrap();
        let z = sol.k_grid().zero_index();
        assert!((d.head.values()[z].re - 1.0).abs() < 1e-12);
        assert!((d.blocks[0].values()[z].re - 1.0).abs() < 1e-12);
        assert!((d.blocks[1].values()[z].re - 2.0).abs() < 1e-12);
        assert!(d.blocks[2].values()[z].norm() < 1e-12);
        assert!(d.telescoping_defect < 1e-10);
        assert!(decompose_dyadic(&f, &sol, 4).is_err());
        let zero = decompose_dyadic(&SampledProfile::zeros(*sol.r_grid()), &sol, 2).unwrap();
        assert!(zero.blocks.iter().all(|b| b.values().iter().all(|v| v.norm() == 0.0)));
    }

    #[test]
    fn free_integer_maximal_of_indicator() {
        let (sol, m) = setup(Coefficient::zero, 6.0, 10.0, 0.25);
        let f = SampledProfile::from_real_fn(*sol.r_grid(), Some(1.0), |_| 1.0);
        let rep = maximal_integer(&f, &sol, &m, 5).unwrap();
        for (i, v) in rep.m.iter().enumerate() {
            let k = sol.k_grid().node(i);
            let exact = if k == 0.0 { 1.0 } else { (2.0 * (k / 2.0).sin() / k).abs() };
            // Simpson error bound (hk)^4 / 180
            assert!((v - exact).abs() < 6e-7, "k = {k}");
        }
        let cont = maximal_continuous(&f, &sol, &m, false).unwrap();
        let z = sol.k_grid().zero_index();
        assert!((cont.m[z] - 1.0).abs() < 1e-12);
        for (c, i) in cont.m.iter().zip(&rep.m) {
            assert!(c + 1e-12 >= *i);
        }
    }

    #[test]
    fn zero_data_is_degenerate() {
        let (sol, m) = setup(Coefficient::zero, 4.0, 2.0, 0.5);
        let f = SampledProfile::zeros(*sol.r_grid());
        assert!(matches!(maximal_integer(&f, &sol, &m, 2), Err(Error::Degenerate(_))));
    }

    #[test]
    fn integer_maximal_dominates_last_partial_integral() {
        let (sol, m) = setup(|g| Coefficient::gaussian(0.3, 2.0, 1.0, g).unwrap(), 9.0, 10.0, 0.25);
        let f = random_profile(*sol.r_grid(), 8.0, 7, 0).unwrap();
        let rep = maximal_integer(&f, &sol, &m, 8).unwrap();
        let last = forward_p(&f, &sol, 8.0).unwrap();
        for (mv, v) in rep.m.iter().zip(last.values()) {
            assert!(*mv + 1e-12 >= v.norm());
        }
        let fewer = maximal_integer(&f, &sol, &m, 4).unwrap();
        for (a, b) in rep.m.iter().zip(&fewer.m) {
            assert!(a >= b);
        }
        let scaled = maximal_integer(&f.scaled(Complex64::new(-2.5, 0.0)), &sol, &m, 8).unwrap();
        assert!((scaled.ratio - rep.ratio).abs() < 1e-10 * rep.ratio);
    }

    #[test]
    fn random_profiles_are_normalized_and_reproducible() {
        let g = RadialGrid::with_extent(0.01, 16.0).unwrap();
        let a = random_profile(g, 16.0, 42, 3).unwrap();
        let b = random_profile(g, 16.0, 42, 3).unwrap();
        let c = random_profile(g, 16.0, 42, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((log_weight_functional(&a) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tail_oscillation_free_and_past_support() {
        let (sol, m) = setup(Coefficient::zero, 4.0, 2.0, 0.5);
        let rep = tail_oscillation(&sol, &m, 0.0).unwrap();
        assert!(rep.m.iter().all(|&v| v == 0.0));
        let (sol, m) = setup(|g| Coefficient::boxcar(0.3, 0.0, 1.0, g).unwrap(), 4.0, 5.0, 0.25);
        let inside = tail_oscillation(&sol, &m, 0.5).unwrap();
        assert!(inside.norm_m_sq > 0.0);
        let past = tail_oscillation(&sol, &m, 1.0).unwrap();
        assert_eq!(past.norm_m_sq, 0.0);
        assert_eq!(past.ratio, 0.0);
        assert!(tail_oscillation(&sol, &m, 10.0).is_err());
    }

    fn brute_diameter(p: &[Complex64]) -> f64 {
        let mut best: f64 = 0.0;
        for a in 0..p.len() {
            for b in a + 1..p.len() {
                best = best.max((p[a] - p[b]).norm());
            }
        }
        best
    }

    #[test]
    fn diameter_of_spiral_matches_brute_force() {
        let pts: Vec<Complex64> = (0..3000)
            .map(|j| {
                let t = j as f64 * 0.01;
                Complex64::from_polar(1.0 + 0.1 * t, 3.0 * t)
            })
            .collect();
        assert!((diameter(&pts) - brute_diameter(&pts)).abs() < 1e-12);
        let circle: Vec<Complex64> = (0..500).map(|j| Complex64::from_polar(1.0, j as f64 * 0.0125)).collect();
        assert!((diameter(&circle) - brute_diameter(&circle)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn diameter_matches_brute_force(pts in proptest::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..300)) {
            let p: Vec<Complex64> = pts.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            prop_assert!((diameter(&p) - brute_diameter(&p)).abs() < 1e-12);
        }
    }
}
