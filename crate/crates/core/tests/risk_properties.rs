use invrisk::attack::{empirical_invloss, tier_weights};
use invrisk::io::{decode_tensor, encode_tensor};
use invrisk::linalg::{self, Matrix, Tensor};
use invrisk::risk::{
    bound_dnp, bound_gnp, bound_rank_k, feasibility_weights, invre, tau_sequence, weighted_bound, BoundKind,
    Calibration, SpectralProfile,
};
use invrisk::shared_map::{Jacobian, MapKind};
use proptest::prelude::*;

/// A random `p × m` map with an input and one noise vector per space.
fn linear_case() -> impl Strategy<Value = (Matrix, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=12, 2usize..=12).prop_flat_map(|(p, m)| {
        (
            prop::collection::vec(-1.0f64..1.0, p * m).prop_map(move |v| Matrix::from_vec(p, m, v).unwrap()),
            prop::collection::vec(-1.0f64..1.0, m),
            prop::collection::vec(-0.3f64..0.3, m),
            prop::collection::vec(-0.3f64..0.3, p),
        )
    })
}

fn profile(g: &Matrix, x: &[f64], noise: Option<&[f64]>) -> SpectralProfile {
    SpectralProfile::from_svd(&linalg::svd(g).unwrap(), x, noise).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn rank_k_bound_equals_attacker_error((g, x, _, _) in linear_case()) {
        let j = Jacobian::from_matrix(g.clone(), MapKind::Vfl).unwrap();
        let prof = profile(&g, &x, None);
        for k in 0..=prof.rank {
            let bound = bound_rank_k(&prof, k).unwrap();
            let err = empirical_invloss(&j, &x, k).unwrap();
            prop_assert!((bound - err).abs() <= 1e-9 * (1.0 + err), "k={k}: {bound} vs {err}");
        }
    }

    #[test]
    fn tau_is_non_increasing((g, x, _, _) in linear_case()) {
        let tau = tau_sequence(&profile(&g, &x, None), BoundKind::Plain).unwrap();
        prop_assert!((tau[0] - linalg::norm_sq(&x)).abs() <= 1e-12 * (1.0 + tau[0]));
        prop_assert!(tau.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn noise_bounds_dominate_the_clean_bound((g, x, e_data, e_shared) in linear_case()) {
        let dnp = profile(&g, &x, Some(&e_data));
        let gnp = profile(&g, &x, Some(&e_shared));
        for k in 0..=dnp.rank {
            let clean = bound_rank_k(&dnp, k).unwrap();
            prop_assert!(bound_dnp(&dnp, k).unwrap() >= clean - 1e-12);
            prop_assert!(bound_gnp(&gnp, k).unwrap() >= clean - 1e-12);
        }
    }

    #[test]
    fn shared_noise_outside_top_k_adds_nothing((g, x, _, e_shared) in linear_case()) {
        let s = linalg::svd(&g).unwrap();
        let prof = SpectralProfile::from_svd(&s, &x, None).unwrap();
        for k in 1..=prof.rank {
            // Remove the components along U_1..U_k.
            let mut outside = e_shared.clone();
            for i in 0..k {
                let c: f64 = (0..s.p()).map(|r| s.u[(r, i)] * e_shared[r]).sum();
                for (r, o) in outside.iter_mut().enumerate() {
                    *o -= c * s.u[(r, i)];
                }
            }
            let noisy = SpectralProfile::from_svd(&s, &x, Some(&outside)).unwrap();
            let gain = bound_gnp(&noisy, k).unwrap() - bound_rank_k(&prof, k).unwrap();
            prop_assert!(gain.abs() <= 1e-10, "k={k}: {gain}");
        }
    }

    #[test]
    fn feasibility_weights_form_a_distribution(mut sigma in prop::collection::vec(0.0f64..5.0, 1..16)) {
        sigma.sort_by(|a, b| b.total_cmp(a));
        prop_assume!(sigma[0] > 0.0);
        let w = feasibility_weights(&sigma).unwrap();
        prop_assert_eq!(w.len(), sigma.len());
        prop_assert!(w.iter().all(|&v| v >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invre_ranks_instances_independently_of_beta(
        (g, x, _, _) in linear_case(),
        scales in prop::collection::vec(0.2f64..3.0, 3..8),
        alpha in 0.0f64..2.0,
        beta_a in 0.1f64..20.0,
        beta_b in 0.1f64..20.0,
    ) {
        let profs: Vec<SpectralProfile> = scales
            .iter()
            .map(|c| profile(&g, &x.iter().map(|v| v * c).collect::<Vec<_>>(), None))
            .collect();
        let order = |beta: f64| {
            let cal = Calibration::new(alpha, beta).unwrap();
            let scores: Vec<(f64, f64)> = profs
                .iter()
                .map(|p| {
                    let r = invre(p, &cal).unwrap();
                    (r.weighted_bound, r.invre)
                })
                .collect();
            let mut idx: Vec<usize> = (0..scores.len()).collect();
            idx.sort_by(|&a, &b| scores[a].1.total_cmp(&scores[b].1).then(a.cmp(&b)));
            (idx, scores)
        };
        let (order_a, scores) = order(beta_a);
        let (order_b, _) = order(beta_b);
        prop_assert_eq!(order_a, order_b);
        for a in &scores {
            for b in &scores {
                if a.0 < b.0 - 1e-9 {
                    prop_assert!(a.1 >= b.1);
                }
            }
        }
    }

    #[test]
    fn tier_weights_sum_to_one(tiers in prop::collection::vec(1usize..5000, 1..6)) {
        let w = tier_weights(&tiers).unwrap();
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn tensor_round_trip_is_bitwise(
        shape in prop::collection::vec(1usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        let len: usize = shape.iter().product();
        let data: Vec<f64> = (0..len as u64).map(|i| f64::from_bits(seed.rotate_left(i as u32) ^ i) ).collect();
        let t = Tensor::new(shape, data).unwrap();
        let back = decode_tensor(&encode_tensor(&t)).unwrap();
        prop_assert_eq!(back.shape(), t.shape());
        let same = back.data().iter().zip(t.data()).all(|(a, b)| a.to_bits() == b.to_bits());
        prop_assert!(same);
    }
}

#[test]
fn sigmoid_is_strictly_decreasing_in_the_bound() {
    let cal = Calibration::new(0.7, 5.0).unwrap();
    let g = Matrix::from_diag(&[3.0, 2.0, 1.0]);
    let mut last = f64::INFINITY;
    for c in [0.1, 0.5, 1.0, 1.5, 2.0] {
        let prof = profile(&g, &[c, c, c], None);
        let (_, _, wb) = weighted_bound(&prof, BoundKind::Plain).unwrap();
        let score = invre(&prof, &cal).unwrap().invre;
        assert!(score < last, "wb {wb}");
        last = score;
    }
}
