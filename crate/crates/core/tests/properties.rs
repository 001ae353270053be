use edg::dualbasis::{f_omega, r_omega, r_omega_star, universe, v_basis, w_basis, IndexPair, SampleSet};
use edg::experiment::format_g6;
use edg::geometry::{dist_from_gram, gram_from_dist, gram_from_points, PointConfig};
use edg::linalg::{double_center, frob_inner, gaussian_matrix, symmetrize};
use edg::manifold::{hard_threshold, project_tangent, retract_structured, LowRankFactor};
use edg::sampling::{sample_structured, sample_uniform_replacement, StructuredSpec};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn points(dim: usize, n: usize, seed: u64) -> PointConfig {
    PointConfig::new(gaussian_matrix(dim, n, seed)).unwrap().centered()
}

fn sym_centered(n: usize, seed: u64) -> DMatrix<f64> {
    double_center(&symmetrize(&gaussian_matrix(n, n, seed)))
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 64,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn gram_distance_round_trip(n in 2usize..14, dim in 1usize..5, seed in any::<u64>()) {
        let x = gram_from_points(&points(dim, n, seed));
        let back = gram_from_dist(&dist_from_gram(&x));
        let scale = 1.0 + x.entries().amax();
        prop_assert!((back.entries() - x.entries()).amax() <= 1e-12 * scale);
    }

    #[test]
    fn r_omega_matches_explicit_sum(n in 3usize..10, m in 1usize..40, seed in any::<u64>()) {
        let x = sym_centered(n, seed);
        let omega = sample_uniform_replacement(n, m, seed ^ 1).unwrap();
        let mut slow = DMatrix::zeros(n, n);
        for &a in omega.pairs() {
            slow += v_basis(a, n) * frob_inner(&x, &w_basis(a, n));
        }
        prop_assert!((r_omega(&x, &omega).unwrap() - slow).amax() <= 1e-11);
    }

    #[test]
    fn r_omega_adjoint_identity(n in 3usize..10, m in 1usize..40, seed in any::<u64>()) {
        let a = symmetrize(&gaussian_matrix(n, n, seed));
        let b = symmetrize(&gaussian_matrix(n, n, seed ^ 2));
        let omega = sample_uniform_replacement(n, m, seed ^ 3).unwrap();
        let lhs = frob_inner(&r_omega(&a, &omega).unwrap(), &b);
        let rhs = frob_inner(&a, &r_omega_star(&b, &omega).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn f_omega_is_self_adjoint_and_psd(n in 3usize..10, m in 1usize..40, seed in any::<u64>()) {
        let a = symmetrize(&gaussian_matrix(n, n, seed));
        let b = symmetrize(&gaussian_matrix(n, n, seed ^ 4));
        let omega = sample_uniform_replacement(n, m, seed ^ 5).unwrap();
        let fa = f_omega(&a, &omega).unwrap();
        let ab = frob_inner(&fa, &b);
        let ba = frob_inner(&a, &f_omega(&b, &omega).unwrap());
        prop_assert!((ab - ba).abs() <= 1e-10 * (1.0 + ab.abs()));
        prop_assert!(frob_inner(&fa, &a) >= -1e-10);
    }

    #[test]
    fn duplicate_free_r_omega_is_idempotent(n in 3usize..10, frac in 0.1f64..1.0, seed in any::<u64>()) {
        let all: Vec<IndexPair> = universe(n).collect();
        let keep: Vec<IndexPair> = all
            .iter()
            .enumerate()
            .filter(|(k, _)| (((*k as u64).wrapping_mul(2654435761) ^ seed) % 1000) as f64 / 1000.0 < frac)
            .map(|(_, &p)| p)
            .collect();
        prop_assume!(!keep.is_empty());
        let omega = SampleSet::new(n, keep).unwrap();
        let x = sym_centered(n, seed);
        let once = r_omega(&x, &omega).unwrap();
        let twice = r_omega(&once, &omega).unwrap();
        prop_assert!((twice - &once).amax() <= 1e-10 * (1.0 + once.amax()));
    }

    #[test]
    fn tangent_projection_is_idempotent(n in 4usize..14, r in 1usize..4, seed in any::<u64>()) {
        let f = LowRankFactor::from_points(&points(r, n, seed)).unwrap();
        let y = symmetrize(&gaussian_matrix(n, n, seed ^ 6));
        let once = project_tangent(&f, &y).unwrap().densify();
        let twice = project_tangent(&f, &once).unwrap().densify();
        prop_assert!((twice - &once).amax() <= 1e-10 * (1.0 + once.amax()));
    }

    #[test]
    fn structured_retraction_matches_dense(n in 5usize..16, r in 1usize..4, step in 0.1f64..3.0, seed in any::<u64>()) {
        let f = LowRankFactor::from_points(&points(r, n, seed)).unwrap();
        let g = project_tangent(&f, &symmetrize(&gaussian_matrix(n, n, seed ^ 7))).unwrap();
        let fast = retract_structured(&g, step, r).unwrap().densify();
        let slow = hard_threshold(&(f.densify() + g.densify() * step), r).unwrap().densify();
        prop_assert!((fast - &slow).amax() <= 1e-9 * (1.0 + slow.amax()));
    }

    #[test]
    fn sample_set_text_round_trip(n in 2usize..30, m in 1usize..60, seed in any::<u64>()) {
        let omega = sample_uniform_replacement(n, m, seed).unwrap();
        let mut buf = Vec::new();
        omega.write_to(&mut buf).unwrap();
        let back = SampleSet::read_from(std::io::Cursor::new(buf), "memory").unwrap();
        prop_assert_eq!(back.counts(), omega.counts());
        prop_assert_eq!(back.n(), n);
    }

    #[test]
    fn partition_is_a_disjoint_cover(n in 3usize..20, m in 1usize..80, groups in 1usize..8, seed in any::<u64>()) {
        prop_assume!(groups <= m);
        let omega = sample_uniform_replacement(n, m, seed).unwrap();
        let parts = omega.partition(groups).unwrap();
        prop_assert_eq!(parts.len(), groups);
        let joined: Vec<IndexPair> = parts.iter().flat_map(|p| p.pairs().to_vec()).collect();
        prop_assert_eq!(joined.as_slice(), omega.pairs());
        let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn structured_samples_respect_blocks(
        n in 12usize..80,
        anchors in 2usize..10,
        e_rate in 0.0f64..1.0,
        k_frac in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let k = 1 + ((anchors - 1) as f64 * k_frac) as usize;
        let spec = StructuredSpec { anchors, central: None, e_rate, k };
        let layout = spec.layout(n).unwrap();
        let omega = sample_structured(n, &spec, seed).unwrap();
        prop_assert!(omega.is_duplicate_free());

        let is_anchor = |i: usize| layout.pseudoanchors.contains(&i);
        let mut partners = vec![0usize; n];
        let mut central_hits = 0;
        for p in omega.pairs() {
            let (i, j) = (p.i(), p.j());
            if i == layout.central || j == layout.central {
                central_hits += 1;
                continue;
            }
            prop_assert!(is_anchor(i) || is_anchor(j), "mobile-mobile pair ({i}, {j})");
            if !is_anchor(i) {
                partners[i] += 1;
            }
            if !is_anchor(j) {
                partners[j] += 1;
            }
        }
        prop_assert_eq!(central_hits, n - 1);
        for &i in &layout.mobile {
            prop_assert_eq!(partners[i], k);
        }
    }

    #[test]
    fn g6_keeps_six_significant_digits(x in -1e12f64..1e12) {
        let back: f64 = format_g6(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-6 * x.abs() + 1e-300);
    }
}
