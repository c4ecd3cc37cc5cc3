//! Numerical toolkit for Krein systems: grids and spectral measures, the
//! Krein ODE solver, generalized Fourier transforms, maximal functions,
//! half-line Schrödinger scattering and Fresnel-type oscillatory integrals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod coefficient;
pub mod error;
pub mod grid;
pub mod io;
pub mod krein;
pub mod maximal;
pub mod scattering;
pub mod transforms;

pub use coefficient::{Coefficient, Shape};
pub use error::{Error, Result};
pub use grid::{RadialGrid, SampledProfile, SpectralGrid, SpectralMeasure};
pub use krein::{integrate_krein, KreinSolution, SzegoFunction};
