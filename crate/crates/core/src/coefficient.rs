//! Krein-system coefficients `A(r)`.

use num_complex::Complex64;
use num_traits::Zero;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{interpolate_nodes, RadialGrid, SampledProfile};

/// Relative amplitude below which a Gaussian coefficient is cut to zero.
pub const GAUSSIAN_CUTOFF: f64 = 1e-16;

/// Functional form of a coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Zero,
    Constant { value: Complex64 },
    /// `amplitude` on `[start, end]`, zero elsewhere.
    Box { amplitude: Complex64, start: f64, end: f64 },
    /// `amplitude * exp(-((r - center) / width)^2)`, cut to zero where it
    /// falls below [`GAUSSIAN_CUTOFF`].
    Gaussian { amplitude: Complex64, center: f64, width: f64 },
    /// Samples at `j * step`, linearly interpolated and zero past the last sample.
    Sampled { step: f64, values: Vec<Complex64> },
}

impl Shape {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Shape(m));
        match self {
            Shape::Zero => Ok(()),
            Shape::Constant { value } if !(value.re.is_finite() && value.im.is_finite()) => {
                bad(format!("constant coefficient {value} is not finite"))
            }
            Shape::Box { start, end, .. } if !(*start >= 0.0 && start < end && end.is_finite()) => {
                bad(format!("box coefficient needs 0 <= start < end, got [{start}, {end}]"))
            }
            Shape::Gaussian { width, center, .. } if !(*width > 0.0 && center.is_finite()) => {
                bad(format!("gaussian coefficient needs a positive width, got {width}"))
            }
            Shape::Sampled { step, values } if !(*step > 0.0) || values.len() < 2 => {
                bad("sampled coefficient needs a positive step and at least two samples".into())
            }
            _ => Ok(()),
        }
    }

    /// Radius beyond which the shape is identically zero.
    pub fn support_bound(&self) -> Option<f64> {
        match self {
            Shape::Zero => Some(0.0),
            Shape::Constant { value } if value.is_zero() => Some(0.0),
            Shape::Constant { .. } => None,
            Shape::Box { amplitude, end, .. } => Some(if amplitude.is_zero() { 0.0 } else { *end }),
            Shape::Gaussian { amplitude, center, width } => Some(gaussian_reach(amplitude.norm(), *center, *width)),
            Shape::Sampled { step, values } => {
                let last = values.iter().rposition(|v| !v.is_zero());
                Some(match last {
                    None => 0.0,
                    Some(j) => ((j + 1).min(values.len() - 1)) as f64 * step,
                })
            }
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Shape::Zero => true,
            Shape::Constant { value } => value.im == 0.0,
            Shape::Box { amplitude, .. } | Shape::Gaussian { amplitude, .. } => amplitude.im == 0.0,
            Shape::Sampled { values, .. } => values.iter().all(|v| v.im == 0.0),
        }
    }

    /// Value at `r`. At a box edge this is the value of the closed box.
    pub fn value(&self, r: f64) -> Complex64 {
        match self {
            Shape::Box { amplitude, start, end } => {
                if r >= *start && r <= *end {
                    *amplitude
                } else {
                    Complex64::zero()
                }
            }
            _ => self.value_right(r),
        }
    }

    /// Limit from the right.
    pub fn value_right(&self, r: f64) -> Complex64 {
        match self {
            Shape::Box { amplitude, start, end } => {
                if r >= *start && r < *end {
                    *amplitude
                } else {
                    Complex64::zero()
                }
            }
            _ => self.smooth_value(r),
        }
    }

    /// Limit from the left.
    pub fn value_left(&self, r: f64) -> Complex64 {
        match self {
            Shape::Box { amplitude, start, end } => {
                if r > *start && r <= *end {
                    *amplitude
                } else {
                    Complex64::zero()
                }
            }
            _ => self.smooth_value(r),
        }
    }

    fn smooth_value(&self, r: f64) -> Complex64 {
        match self {
            Shape::Zero => Complex64::zero(),
            Shape::Constant { value } => *value,
            Shape::Gaussian { amplitude, center, width } => {
                if r > gaussian_reach(amplitude.norm(), *center, *width) {
                    Complex64::zero()
                } else {
                    let u = (r - center) / width;
                    amplitude * (-u * u).exp()
                }
            }
            Shape::Sampled { step, values } => {
                if r > (values.len() - 1) as f64 * step {
                    Complex64::zero()
                } else {
                    interpolate_nodes(values, *step, r)
                }
            }
            Shape::Box { .. } => unreachable!("box is handled by the one-sided evaluators"),
        }
    }
}

fn gaussian_reach(amp: f64, center: f64, width: f64) -> f64 {
    if amp <= GAUSSIAN_CUTOFF {
        0.0
    } else {
        (center + width * (amp / GAUSSIAN_CUTOFF).ln().sqrt()).max(0.0)
    }
}

/// A coefficient together with its samples on a working grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficient {
    shape: Shape,
    profile: SampledProfile,
    support_bound: Option<f64>,
    is_real: bool,
}

impl Coefficient {
    pub fn new(shape: Shape, grid: RadialGrid) -> Result<Self> {
        shape.validate()?;
        let support_bound = shape.support_bound();
        let profile = SampledProfile::from_fn(grid, support_bound, |r| shape.value(r));
        let is_real = shape.is_real();
        Ok(Self { shape, profile, support_bound, is_real })
    }

    pub fn zero(grid: RadialGrid) -> Self {
        Self::new(Shape::Zero, grid).expect("zero shape is valid")
    }

    pub fn constant(value: f64, grid: RadialGrid) -> Result<Self> {
        Self::new(Shape::Constant { value: Complex64::new(value, 0.0) }, grid)
    }

    pub fn boxcar(amplitude: f64, start: f64, end: f64, grid: RadialGrid) -> Result<Self> {
        Self::new(Shape::Box { amplitude: Complex64::new(amplitude, 0.0), start, end }, grid)
    }

    pub fn gaussian(amplitude: f64, center: f64, width: f64, grid: RadialGrid) -> Result<Self> {
        Self::new(Shape::Gaussian { amplitude: Complex64::new(amplitude, 0.0), center, width }, grid)
    }

    /// Coefficient defined by samples on a uniform grid starting at 0.
    pub fn from_profile(profile: &SampledProfile) -> Result<Self> {
        let shape = Shape::Sampled { step: profile.grid().step(), values: profile.values().to_vec() };
        Self::new(shape, *profile.grid())
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn profile(&self) -> &SampledProfile {
        &self.profile
    }

    pub fn support_bound(&self) -> Option<f64> {
        self.support_bound
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn value(&self, r: f64) -> Complex64 {
        self.shape.value(r)
    }

    /// Samples of the same coefficient on another grid.
    pub fn sample(&self, grid: RadialGrid) -> SampledProfile {
        if grid == *self.profile.grid() {
            return self.profile.clone();
        }
        SampledProfile::from_fn(grid, self.support_bound, |r| self.shape.value(r))
    }

    /// Hex SHA-256 of the canonical JSON form of the shape.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(&self.shape).expect("shape serializes");
        Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> RadialGrid {
        RadialGrid::new(0.01, 1000).unwrap()
    }

    #[test]
    fn box_has_one_sided_limits() {
        let s = Shape::Box { amplitude: Complex64::new(0.3, 0.0), start: 0.0, end: 1.0 };
        assert_eq!(s.value(1.0).re, 0.3);
        assert_eq!(s.value_left(1.0).re, 0.3);
        assert_eq!(s.value_right(1.0).re, 0.0);
        assert_eq!(s.value_right(0.0).re, 0.3);
        assert_eq!(s.support_bound(), Some(1.0));
    }

    #[test]
    fn gaussian_support_bound() {
        let c = Coefficient::gaussian(0.3, 2.0, 1.0, grid()).unwrap();
        let r0 = c.support_bound().unwrap();
        let expected = 2.0 + (0.3f64 / 1e-16).ln().sqrt();
        assert!((r0 - expected).abs() < 1e-12);
        assert!((r0 - 7.9697).abs() < 1e-3);
        assert_eq!(c.value(r0 + 1e-9), Complex64::zero());
        assert!(c.value(r0 - 1e-3).norm() > 0.0);
        assert!(c.is_real());
    }

    #[test]
    fn constant_has_no_support_bound() {
        let c = Coefficient::constant(1.0, grid()).unwrap();
        assert_eq!(c.support_bound(), None);
        assert!(c.profile().values().iter().all(|v| v.re == 1.0));
    }

    #[test]
    fn sampled_shape_interpolates() {
        let g = RadialGrid::new(0.5, 4).unwrap();
        let p = SampledProfile::from_real_fn(g, None, |r| if r <= 1.0 { r } else { 0.0 });
        let c = Coefficient::from_profile(&p).unwrap();
        assert!((c.value(0.25).re - 0.25).abs() < 1e-15);
        assert_eq!(c.support_bound(), Some(1.5));
        assert_eq!(c.value(3.0), Complex64::zero());
    }

    #[test]
    fn invalid_shapes_are_rejected() {
        assert!(Coefficient::boxcar(1.0, 2.0, 1.0, grid()).is_err());
        assert!(Coefficient::gaussian(1.0, 0.0, -1.0, grid()).is_err());
    }

    #[test]
    fn hash_is_stable_and_discriminating() {
        let a = Coefficient::gaussian(0.3, 2.0, 1.0, grid()).unwrap();
        let b = Coefficient::gaussian(0.3, 2.0, 1.0, RadialGrid::new(0.02, 10).unwrap()).unwrap();
        let c = Coefficient::gaussian(0.31, 2.0, 1.0, grid()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn complex_coefficient_is_not_real() {
        let c = Coefficient::new(Shape::Constant { value: Complex64::new(0.0, 1.0) }, grid()).unwrap();
        assert!(!c.is_real());
    }
}
