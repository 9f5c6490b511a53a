use needle_core::curvature::{sigma, tau};
use needle_core::mmspace::MMSpace;
use needle_core::monge1d::{atoms_from_masses, cdf_distance, monotone_rearrangement};
use needle_core::w1solve::solve_w1;
use proptest::prelude::*;

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn masses(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|v| normalize(&v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sigma_endpoints(k in -5.0f64..5.0, n in 1.5f64..6.0, theta in 0.01f64..1.0) {
        prop_assume!(k * theta * theta < n * std::f64::consts::PI.powi(2) * 0.9);
        prop_assert!(sigma(k, n, 0.0, theta).abs() < 1e-12);
        prop_assert!((sigma(k, n, 1.0, theta) - 1.0).abs() < 1e-12);
        prop_assert!((tau(k, n, 1.0, theta) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn monotone_cost_is_symmetric_and_matches_cdf(
        xs in prop::collection::vec(-10.0f64..10.0, 6),
        ys in prop::collection::vec(-10.0f64..10.0, 5),
        a in masses(6),
        b in masses(5),
    ) {
        let src = atoms_from_masses(&xs, &a);
        let dst = atoms_from_masses(&ys, &b);
        let fwd = monotone_rearrangement(&src, &dst).unwrap().cost();
        let back = monotone_rearrangement(&dst, &src).unwrap().cost();
        let oracle = cdf_distance(&src, &dst);
        prop_assert!((fwd - back).abs() <= 1e-12 * (1.0 + oracle));
        prop_assert!((fwd - oracle).abs() <= 1e-12 * (1.0 + oracle));
    }

    #[test]
    fn line_w1_equals_cdf_distance(
        coords in prop::collection::vec(0.0f64..5.0, 7),
        a in masses(7),
        b in masses(7),
    ) {
        let space = MMSpace::line(coords.clone(), vec![1.0; 7]).unwrap();
        let sol = solve_w1(&space, &a, &b).unwrap();
        let oracle = cdf_distance(&atoms_from_masses(&coords, &a), &atoms_from_masses(&coords, &b));
        prop_assert!((sol.primal_value - oracle).abs() <= 1e-9 * (1.0 + oracle));
        prop_assert!(sol.duality_gap.abs() <= 1e-9 * (1.0 + oracle));
        prop_assert!(sol.lipschitz_residual <= 1e-9);
    }

    #[test]
    fn planar_duality(
        pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 12),
        a in masses(12),
        b in masses(12),
    ) {
        let pts: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
        let space = MMSpace::planar(&pts, None).unwrap();
        let sol = solve_w1(&space, &a, &b).unwrap();
        let dual: f64 = (0..12).map(|i| sol.potential[i] * (a[i] - b[i])).sum();
        prop_assert!((sol.primal_value - dual).abs() <= 1e-9 * (1.0 + sol.primal_value));
        prop_assert!(sol.lipschitz_residual <= 1e-9);
    }
}
