use magweyl_core::bessel::{bessel_kernel, reconstruct_check, AxisLattice, BaseSpace};
use magweyl_core::exec::{self, Mode};
use magweyl_core::geometry::{
    gauge_shift, line_phase, poincare_gauge, triangle_flux, GaugeFunction, MagneticField, VectorPotential,
    DEFAULT_QUAD_ORDER,
};
use magweyl_core::moyal::{moyal_kernel_route, PhaseLattice};
use magweyl_core::schatten::{
    hs_identity_check, kato_average, kato_bound_rows, matrix_singular_values, schatten_from_values, singular_values,
    values_deviation,
};
use magweyl_core::weyl::{op_matrix, op_matrix_field, OperatorMatrix};
use magweyl_core::{make_grid, ProductSymbol, SymbolField};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn potential(kind: u8, b: f64) -> VectorPotential {
    match kind % 3 {
        0 => VectorPotential::symmetric(b),
        1 => VectorPotential::landau(b),
        _ => poincare_gauge(&MagneticField::constant(b), DEFAULT_QUAD_ORDER).unwrap(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn schatten_norms_decrease_in_p(entries in proptest::collection::vec(-1.0f64..1.0, 2 * 36)) {
        let m = DMatrix::from_fn(6, 6, |i, j| Complex64::new(entries[2 * (6 * i + j)], entries[2 * (6 * i + j) + 1]));
        let sv = matrix_singular_values(&m).unwrap();
        let ps = [1.0, 1.5, 2.0, 3.0, 8.0, f64::INFINITY];
        let norms: Vec<f64> = ps.iter().map(|&p| schatten_from_values(&sv, p).unwrap()).collect();
        for w in norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn stokes_identity_random_fields(
        b0 in -2.0f64..2.0,
        b1 in -1.0f64..1.0,
        pts in proptest::collection::vec(-2.0f64..2.0, 6),
    ) {
        let field = MagneticField::oscillatory(b0, b1);
        let a = poincare_gauge(&field, DEFAULT_QUAD_ORDER).unwrap();
        let (x, y, z) = (&pts[0..2], &pts[2..4], &pts[4..6]);
        let omega = triangle_flux(&field, x, y, z, DEFAULT_QUAD_ORDER).unwrap();
        let lam = line_phase(&a, x, y, DEFAULT_QUAD_ORDER).unwrap()
            * line_phase(&a, y, z, DEFAULT_QUAD_ORDER).unwrap()
            * line_phase(&a, z, x, DEFAULT_QUAD_ORDER).unwrap();
        prop_assert!((omega.value() - lam.value()).norm() < 1e-8);
    }

    #[test]
    fn bessel_kernels_have_unit_mass(order in 0.3f64..6.0, dim in 1usize..=2) {
        let lat = AxisLattice::with_extent(dim, 64, 8.0).unwrap();
        let k = bessel_kernel(order, &lat, BaseSpace::Momentum).unwrap();
        prop_assert!((k.mass() - 1.0).abs() < 1e-10);
        prop_assert!(k.imag_residual < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn hs_identity_is_an_equality(
        rx in 0.4f64..1.0,
        rxi in 0.4f64..1.0,
        b in -1.5f64..1.5,
        kind in 0u8..3,
        cx in -0.5f64..0.5,
    ) {
        let g = make_grid(2, 12, 5.0).unwrap();
        let f = ProductSymbol::gaussian_at(2, &[cx, 0.0], &[0.0, -cx], rx, rxi);
        let hs = hs_identity_check(&f, &potential(kind, b), &g).unwrap();
        prop_assert!(hs.rel_err < 1e-5, "{hs:?}");
    }

    #[test]
    fn gauge_transforms_preserve_singular_values(
        c in proptest::collection::vec(-1.0f64..1.0, 7),
        kind in 0u8..3,
    ) {
        let g = make_grid(2, 8, 4.0).unwrap();
        let a = potential(kind, 1.0);
        let phi = GaugeFunction::quadratic(2, c[0], [c[1], c[2]], [[c[3], c[4]], [c[5], c[6]]]);
        let f = ProductSymbol::gaussian(2, 0.7, 0.7);
        let s1 = singular_values(&op_matrix(&f, &a, &g).unwrap()).unwrap();
        let s2 = singular_values(&op_matrix(&f, &gauge_shift(&a, &phi).unwrap(), &g).unwrap()).unwrap();
        prop_assert!(values_deviation(&s1, &s2) < 1e-10);
    }

    #[test]
    fn kernel_route_is_a_homomorphism(
        r in proptest::collection::vec(0.6f64..1.4, 4),
        b in -1.0f64..1.0,
    ) {
        let g = make_grid(2, 8, 3.5).unwrap();
        let a = VectorPotential::symmetric(b);
        let f = ProductSymbol::gaussian(2, r[0], r[1]);
        let h = ProductSymbol::gaussian_at(2, &[0.3, 0.0], &[0.0, 0.2], r[2], r[3]);
        let prod = op_matrix(&f, &a, &g).unwrap().compose(&op_matrix(&h, &a, &g).unwrap());
        let star = op_matrix_field(&moyal_kernel_route(&f, &h, &a, &g).unwrap(), &a).unwrap();
        prop_assert!(star.max_abs_diff(&prod) < 1e-12 * prod.max_abs().max(1.0));
    }

    #[test]
    fn factorization_reconstructs(s in 0.5f64..6.0, t in 0.5f64..6.0, rate in 0.3f64..1.5) {
        let g = make_grid(1, 16, 4.0).unwrap();
        let f = SymbolField::sample(&ProductSymbol::gaussian(1, rate, rate), &g).unwrap();
        prop_assert!(reconstruct_check(&f, s, t).unwrap() < 1e-10);
    }

    #[test]
    fn kato_ratios_stay_below_one(rate in 0.3f64..0.9, state in 0.5f64..2.0) {
        let g = make_grid(2, 8, 4.0).unwrap();
        let a = VectorPotential::symmetric(1.0);
        let len = g.config_len();
        let u = DMatrix::from_fn(len, 1, |i, _| {
            let x = g.config_point(i);
            Complex64::new((-state * (x[0] * x[0] + x[1] * x[1])).exp(), 0.0)
        });
        let u = u.unscale(u.norm());
        let t = OperatorMatrix::from_matrix(&g, &u * u.adjoint()).unwrap();
        let lat = PhaseLattice::box_lattice(&g, 3, g.k(), 3).unwrap();
        let phi = ProductSymbol::gaussian(2, rate, rate);
        let avg = kato_average(&phi, &t, &a, &lat, u64::MAX).unwrap();
        for row in kato_bound_rows(&phi, &t, &avg, &lat, &[1.0, 2.0, f64::INFINITY]).unwrap() {
            prop_assert!(row.ratio <= 1.05, "{row:?}");
        }
    }
}

#[test]
fn execution_modes_agree() {
    let g = make_grid(2, 8, 4.0).unwrap();
    let a = VectorPotential::landau(0.8);
    let f = ProductSymbol::gaussian_at(2, &[0.2, 0.0], &[0.0, 0.4], 0.9, 0.6);
    let par = op_matrix(&f, &a, &g).unwrap();
    exec::set_mode(Mode::Sequential);
    let seq = op_matrix(&f, &a, &g).unwrap();
    exec::set_mode(Mode::Parallel);
    assert_eq!(par, seq);
}
