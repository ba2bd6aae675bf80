use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use qtransport::classical::{
    classical_max, independent_coupling, threshold_dual_bound, Density, MarginalPair, SweepConfig,
};
use qtransport::grid::UniformGrid;
use qtransport::number_basis::{half_line_overlaps, theta_halfplane, wigner_state, DensityMatrix, WignerGrid};
use qtransport::phi_alpha::{linear_upper_bound, phi, DEFAULT_DELTA};
use qtransport::restricted::{project_to_density, simplex_projection};
use qtransport::scenarios::{
    classify, reduce_coefficients, reduce_projectile, rocket_reduce, verify_reduction, AffineSymplecticMap, Burn,
    MapKind, ProblemDescriptor, ProjectileScenario, RocketSchedule, Variant, CBM_UPPER,
};
use qtransport::Precision;

fn hermitian(dim: usize) -> impl Strategy<Value = DMatrix<Complex64>> {
    prop::collection::vec(-2.0f64..2.0, 2 * dim * dim).prop_map(move |v| {
        let a = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1])
        });
        (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
    })
}

fn density(dim: usize) -> impl Strategy<Value = DensityMatrix> {
    prop::collection::vec(-1.0f64..1.0, 2 * dim * dim).prop_map(move |v| {
        let a = DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(v[2 * (i * dim + j)], v[2 * (i * dim + j) + 1])
        });
        let m = &a * a.adjoint() + DMatrix::identity(dim, dim) * Complex64::new(1e-3, 0.0);
        let tr = m.trace();
        DensityMatrix::new(m / tr, 1e-10).unwrap()
    })
}

fn frobenius(m: &DMatrix<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maps with `|det| = 1`: a shear, a squeeze and an optional reflection.
fn symplectic_map() -> impl Strategy<Value = AffineSymplecticMap> {
    (
        -3.0f64..3.0,
        0.25f64..4.0,
        -3.0f64..3.0,
        any::<bool>(),
        -5.0f64..5.0,
        -5.0f64..5.0,
    )
        .prop_map(|(shear, squeeze, shear2, flip, ox, op)| {
            let s = if flip { -1.0 } else { 1.0 };
            let a = [[squeeze, 0.0], [0.0, 1.0 / squeeze]];
            let b = [[1.0, shear], [0.0, 1.0]];
            let c = [[1.0, 0.0], [shear2, 1.0]];
            let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
                [
                    [
                        x[0][0] * y[0][0] + x[0][1] * y[1][0],
                        x[0][0] * y[0][1] + x[0][1] * y[1][1],
                    ],
                    [
                        x[1][0] * y[0][0] + x[1][1] * y[1][0],
                        x[1][0] * y[0][1] + x[1][1] * y[1][1],
                    ],
                ]
            };
            let mut l = mul(mul(a, b), c);
            l[1][0] *= s;
            l[1][1] *= s;
            AffineSymplecticMap {
                linear: l,
                offset: [ox, op],
            }
        })
}

fn schedule() -> impl Strategy<Value = RocketSchedule> {
    (
        1.0f64..10.0,
        0.1f64..5.0,
        0.0f64..2.0,
        prop::collection::vec((0.01f64..2.0, 0.05f64..0.6), 0..5),
        0.0f64..3.0,
    )
        .prop_map(|(mass, l, lambda, steps, tail)| {
            let mut left = mass;
            let mut t = 0.0;
            let mut burns = Vec::new();
            for (dt, frac) in steps {
                let m = frac * left;
                left -= m;
                burns.push(Burn { t, m });
                t += dt;
            }
            RocketSchedule {
                mass,
                l,
                lambda,
                burns,
                t_final: t + tail,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn projection_is_idempotent_and_non_expansive(a in hermitian(5), b in hermitian(5)) {
        let pa = project_to_density(&a).unwrap();
        let pb = project_to_density(&b).unwrap();
        let ppa = project_to_density(pa.matrix()).unwrap();
        prop_assert!(frobenius(&(ppa.matrix() - pa.matrix())) <= 1e-10);
        prop_assert!(frobenius(&(pa.matrix() - pb.matrix())) <= frobenius(&(&a - &b)) + 1e-12);
        prop_assert!((pa.trace() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn simplex_projection_lands_on_simplex(v in prop::collection::vec(-5.0f64..5.0, 1..20)) {
        let w = simplex_projection(&v);
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(simplex_projection(&w).len(), w.len());
    }

    #[test]
    fn half_plane_and_its_complement_sum_to_identity(phi in -4.0f64..4.0) {
        let a = theta_halfplane(phi, 25, Precision::Double);
        let b = theta_halfplane(phi + std::f64::consts::PI, 25, Precision::Double);
        for n in 0..=25 {
            for m in 0..=25 {
                let expected = if n == m { 1.0 } else { 0.0 };
                prop_assert!((a.entry(n, m) + b.entry(n, m) - Complex64::new(expected, 0.0)).norm() <= 1e-14);
            }
        }
    }

    #[test]
    fn rotation_is_a_phase(phi in -4.0f64..4.0, n in 0usize..30, m in 0usize..30) {
        let o = half_line_overlaps(30, Precision::Double);
        let t = theta_halfplane(phi, 30, Precision::Double);
        let expected = Complex64::from_polar(o[(n, m)], phi * (n as f64 - m as f64));
        prop_assert!((t.entry(n, m) - expected).norm() <= 1e-14);
        prop_assert_eq!(o[(n, m)], o[(m, n)]);
    }

    #[test]
    fn wigner_function_is_normalized(rho in density(5)) {
        let field = wigner_state(&rho, &WignerGrid::default_for(4));
        prop_assert!((field.integral() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn composition_multiplies_determinants(a in symplectic_map(), b in symplectic_map()) {
        let ka = classify(&a).unwrap();
        let kb = classify(&b).unwrap();
        let ab = a.compose(&b);
        let expected = if ka == kb { MapKind::Metaplectic } else { MapKind::AntiMetaplectic };
        prop_assert_eq!(classify(&ab).unwrap(), expected);
        let (x, p) = (0.3, -1.7);
        let (bx, bp) = b.apply(x, p);
        let direct = a.apply(bx, bp);
        let composed = ab.apply(x, p);
        prop_assert!((direct.0 - composed.0).abs() <= 1e-9 && (direct.1 - composed.1).abs() <= 1e-9);
        let id = a.compose(&a.inverse());
        prop_assert!((id.apply(x, p).0 - x).abs() <= 1e-9 && (id.apply(x, p).1 - p).abs() <= 1e-9);
    }

    #[test]
    fn projectile_maps_reduce_to_standard(
        mass in 0.1f64..10.0,
        length in 0.1f64..5.0,
        extra in 0.0f64..5.0,
        flight_time in 0.1f64..10.0,
        which in 0usize..3,
        b in 0.0f64..2.0,
    ) {
        let variant = [Variant::Ultrafast, Variant::Ultraslow, Variant::Handicapped { b }][which];
        let s = ProjectileScenario { mass, length, target: length + extra, flight_time, variant };
        let r = reduce_projectile(&s).unwrap();
        prop_assert!((r.alpha - mass * length * length / flight_time).abs() <= 1e-12 * r.alpha);
        let std = ProblemDescriptor::standard(r.alpha, r.beta);
        prop_assert!(verify_reduction(&r.map, &std, &s.descriptor(), 1e-12).is_ok());
    }

    #[test]
    fn rocket_bound_is_capped_and_time_symmetric(s in schedule()) {
        let r = rocket_reduce(&s).unwrap();
        prop_assert!(r.bound <= CBM_UPPER);
        prop_assert!(r.bound >= 0.0);
        let d: Vec<f64> = r.d.iter().map(|v| -v).collect();
        let rev = reduce_coefficients(r.c.clone(), d, s.l, s.lambda).unwrap();
        prop_assert_eq!(rev.beta, -r.beta);
        prop_assert_eq!(rev.alpha_eff, r.alpha_eff);
        prop_assert_eq!(rev.bound, r.bound);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn phi_respects_linear_bound(alpha in 0.01f64..60.0) {
        let v = phi(alpha, DEFAULT_DELTA).unwrap();
        prop_assert!(v.phi <= linear_upper_bound(alpha) + v.delta);
        prop_assert!(v.phi > 0.0);
    }

    #[test]
    fn classical_value_lies_between_coupling_bounds(
        c1 in -2.0f64..2.0,
        s1 in 0.3f64..1.5,
        c2 in -2.0f64..2.0,
        s2 in 0.3f64..1.5,
        a in -2.0f64..2.0,
    ) {
        let grid = UniformGrid::spanning(-12.0, 12.0, 2401).unwrap();
        let gauss = |c: f64, s: f64| {
            Density::from_fn(grid, move |x| {
                let z = (x - c) / s;
                (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            })
            .unwrap()
        };
        let pair = MarginalPair::new(gauss(c1, s1), gauss(c2, s2), 1.0, 1.0, a).unwrap();
        let v = classical_max(&pair, &SweepConfig::with_dx(1e-3)).unwrap().p_star;
        prop_assert!(v >= independent_coupling(&pair) - 2e-3);
        prop_assert!(v <= threshold_dual_bound(&pair) + 2e-3);
    }
}
