use krein_core::krein::{spectral_density, szego, DiracEigenfunctions, DEFAULT_OSC_FACTOR, DEFAULT_ZERO_THRESHOLD};
use krein_core::scattering::{fd_extrapolated, perturbed_propagate_spectral, FdHamiltonian};
use krein_core::{integrate_krein, Coefficient, RadialGrid, SampledProfile, SpectralGrid};
use num_complex::Complex64;

fn packet(x: f64) -> Complex64 {
    let u = (x - 10.0) / 2.0;
    Complex64::new((5.0 * x).sin() * (-0.5 * u * u).exp(), 0.0)
}

#[test]
fn gaussian_coefficient_spectral_matches_finite_differences_at_t5() {
    let rg = RadialGrid::with_extent(0.0125, 10.0).unwrap();
    let kg = SpectralGrid::new(12.0, 0.016).unwrap();
    let a = Coefficient::gaussian(0.3, 2.0, 1.0, rg).unwrap();
    let sol = integrate_krein(&a, rg, kg, DEFAULT_OSC_FACTOR).unwrap();
    let pi = szego(&sol, None).unwrap();
    let m2 = spectral_density(&pi, DEFAULT_ZERO_THRESHOLD).unwrap().doubled();
    let x_grid = RadialGrid::with_extent(0.00625, 80.0).unwrap();
    let view = DiracEigenfunctions::new(&sol, &pi, x_grid).unwrap();
    let f = SampledProfile::from_fn(x_grid, None, packet);

    let spectral = perturbed_propagate_spectral(&f, 5.0, &view, &m2, 1e-3).unwrap();
    let fd = fd_extrapolated(&packet, x_grid, 5.0, 1e-3, &|g| FdHamiltonian::from_coefficient(&a, g)).unwrap();
    let diff = spectral.combine(1.0.into(), &fd, (-1.0).into()).unwrap().discrete_l2_norm();
    assert!(diff < 1e-3, "L2 difference {diff:.3e}");
    // both are unitary, so the norm is kept
    assert!((spectral.discrete_l2_norm() - f.discrete_l2_norm()).abs() < 1e-6);
}
