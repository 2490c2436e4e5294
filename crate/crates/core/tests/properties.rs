//! Randomized invariant checks across the library.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use covest_core::acquisition::{draw_combiner, measure};
use covest_core::als::{cpd_als, AlsOptions};
use covest_core::aoa::{aoa_polynomial_coeffs, recover_aoa};
use covest_core::channel::{channel_tensor, draw_scene, ChannelScene, SceneConfig, SceneKind};
use covest_core::covariance::{aoa_mse, reconstruct_covariance, rpe, true_covariance, CovarianceMatrix};
use covest_core::crlb::fim_blocks;
use covest_core::linalg::hermitian_eig_desc;
use covest_core::tensor::{fold, from_factors, khatri_rao, ComplexTensor3, FactorTriple, Mode};

type C64 = Complex<f64>;

fn cx() -> impl Strategy<Value = C64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex::new(re, im))
}

fn small_tensor() -> impl Strategy<Value = ComplexTensor3<f64>> {
    (1usize..=5, 1usize..=5, 1usize..=5)
        .prop_flat_map(|(i1, i2, i3)| {
            proptest::collection::vec(cx(), i1 * i2 * i3)
                .prop_map(move |data| ComplexTensor3::new((i1, i2, i3), data).unwrap())
        })
}

fn small_factors() -> impl Strategy<Value = FactorTriple<f64>> {
    (1usize..=4, 1usize..=4, 1usize..=4, 1usize..=3)
        .prop_flat_map(|(i1, i2, i3, r)| {
            let m1 = proptest::collection::vec(cx(), i1 * r);
            let m2 = proptest::collection::vec(cx(), i2 * r);
            let m3 = proptest::collection::vec(cx(), i3 * r);
            (m1, m2, m3).prop_map(move |(v1, v2, v3)| {
                FactorTriple::new(
                    DMatrix::from_vec(i1, r, v1),
                    DMatrix::from_vec(i2, r, v2),
                    DMatrix::from_vec(i3, r, v3),
                )
                .unwrap()
            })
        })
}

fn random_scene(seed: u64, n_paths: usize) -> (ChannelScene<f64>, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = SceneConfig {
        n_ant: 6,
        k_sbcr: 5,
        t_frm: 3,
        n_cp: 2,
        spacing_ratio: 0.5,
        kind: SceneKind::Discrete { n_paths },
    };
    (draw_scene(&cfg, &mut rng).unwrap(), seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn unfold_then_fold_is_identity(t in small_tensor()) {
        for mode in [Mode::One, Mode::Two, Mode::Three] {
            let m = t.unfold(mode);
            let back = fold(&m, mode, t.dims()).unwrap();
            prop_assert_eq!(back.dims(), t.dims());
            for (a, b) in back.data().iter().zip(t.data().iter()) {
                prop_assert!((a - b).norm() == 0.0, "round trip must be exact");
            }
        }
    }

    #[test]
    fn unfoldings_preserve_the_norm(t in small_tensor()) {
        let n = t.norm();
        for mode in [Mode::One, Mode::Two, Mode::Three] {
            let m = t.unfold(mode).norm();
            prop_assert!((m - n).abs() <= 1e-12 * n.max(1.0));
        }
    }

    #[test]
    fn khatri_rao_columns_are_kroneckers(f in small_factors()) {
        let kr = khatri_rao(f.f2(), f.f3()).unwrap();
        for j in 0..f.rank() {
            let a = f.f2().column(j);
            let b = f.f3().column(j);
            let col = kr.column(j);
            for (ia, av) in a.iter().enumerate() {
                for (ib, bv) in b.iter().enumerate() {
                    // Second operand runs fastest along a Khatri-Rao column.
                    let got = col[ia * b.len() + ib];
                    prop_assert!((got - av * bv).norm() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn factor_scalings_with_unit_product_cancel(
        f in small_factors(),
        scales in proptest::collection::vec((0.1f64..2.0, -3.0f64..3.0, 0.1f64..2.0, -3.0f64..3.0), 3),
    ) {
        let t0 = from_factors(&f);
        let r = f.rank();
        let mut f1 = f.f1().clone();
        let mut f2 = f.f2().clone();
        let mut f3 = f.f3().clone();
        for j in 0..r {
            let (m1, a1, m2, a2) = scales[j % scales.len()];
            let d1 = Complex::from_polar(m1, a1);
            let d2 = Complex::from_polar(m2, a2);
            let d3 = (d1 * d2).inv();
            for i in 0..f1.nrows() { f1[(i, j)] *= d1; }
            for i in 0..f2.nrows() { f2[(i, j)] *= d2; }
            for i in 0..f3.nrows() { f3[(i, j)] *= d3; }
        }
        let t1 = from_factors(&FactorTriple::new(f1, f2, f3).unwrap());
        let mut diff = 0.0f64;
        let mut scale = 0.0f64;
        for (a, b) in t0.data().iter().zip(t1.data().iter()) {
            diff += (a - b).norm_sqr();
            scale += a.norm_sqr();
        }
        prop_assert!(diff.sqrt() <= 1e-12 * scale.sqrt().max(1.0));
    }

    #[test]
    fn permuting_paths_leaves_the_tensor_unchanged(f in small_factors()) {
        let t0 = from_factors(&f);
        let r = f.rank();
        let perm: Vec<usize> = (0..r).rev().collect();
        let pick = |m: &DMatrix<C64>| {
            DMatrix::from_fn(m.nrows(), r, |i, j| m[(i, perm[j])])
        };
        let t1 = from_factors(
            &FactorTriple::new(pick(f.f1()), pick(f.f2()), pick(f.f3())).unwrap(),
        );
        for (a, b) in t0.data().iter().zip(t1.data().iter()) {
            prop_assert!((a - b).norm() <= 1e-12);
        }
    }

    #[test]
    fn als_fit_history_never_increases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = ComplexTensor3::from_fn((4, 4, 3), |_, _, _| {
            Complex::new(
                rand::Rng::random::<f64>(&mut rng) - 0.5,
                rand::Rng::random::<f64>(&mut rng) - 0.5,
            )
        });
        let mut opts = AlsOptions::new(2);
        opts.max_iters = 30;
        opts.n_restarts = 1;
        let (_, diag) = cpd_als(&y, &opts, &mut rng).unwrap();
        for w in diag.fit_history.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9, "fit went from {} to {}", w[0], w[1]);
        }
    }

    #[test]
    fn aoa_polynomial_roots_pair_across_the_unit_circle(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comb = draw_combiner::<f64>(6, 3, &mut rng).unwrap();
        let b_hat = DVector::from_fn(3, |_, _| {
            Complex::new(
                rand::Rng::random::<f64>(&mut rng) - 0.5,
                rand::Rng::random::<f64>(&mut rng) - 0.5,
            )
        });
        let coeffs = aoa_polynomial_coeffs(&b_hat, comb.w()).unwrap();
        // Conjugate symmetry of the coefficients.
        let n = coeffs.len();
        for k in 0..n {
            prop_assert!(
                (coeffs[k] - coeffs[n - 1 - k].conj()).norm() <= 1e-10,
                "coefficient {k} breaks conjugate symmetry"
            );
        }
        let roots = covest_core::linalg::polynomial_roots(&coeffs).unwrap();
        // Each root is mirrored by a conjugate-reciprocal partner.
        for z in &roots {
            if z.norm() < 1e-8 { continue; }
            let mirror = z.conj().inv();
            let closest = roots
                .iter()
                .map(|w| (w - mirror).norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(
                closest <= 1e-6 * mirror.norm().max(1.0),
                "root {z} lacks a conjugate-reciprocal partner"
            );
        }
    }

    #[test]
    fn aoa_recovery_ignores_column_scaling(
        seed in any::<u64>(),
        mag in 0.2f64..3.0,
        angle in -3.0f64..3.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comb = draw_combiner::<f64>(8, 4, &mut rng).unwrap();
        let phi = 0.9 * (rand::Rng::random::<f64>(&mut rng) - 0.5) * std::f64::consts::PI;
        let alpha = Complex::from_polar(mag, angle);
        let b = comb.w().adjoint() * covest_core::channel::array_response(phi, 8, 0.5);
        let scaled = b.map(|v| v * alpha);
        let e1 = recover_aoa(&b, &comb, 0.5).unwrap();
        let e2 = recover_aoa(&scaled, &comb, 0.5).unwrap();
        prop_assert!((e1.z_hat - e2.z_hat).norm() <= 1e-6);
        prop_assert!((e2.delta_hat - e1.delta_hat * alpha).norm() <= 1e-6 * alpha.norm());
    }

    #[test]
    fn reconstructed_covariance_is_hermitian_psd(
        f in small_factors(),
        deltas in proptest::collection::vec(cx(), 3),
    ) {
        let r = f.rank();
        let delta = DVector::from_fn(r, |i, _| deltas[i % deltas.len()]);
        let cov = reconstruct_covariance(f.f1(), &delta, f.f2(), f.f3()).unwrap();
        let m = cov.matrix();
        prop_assert!((m - m.adjoint()).norm() <= 1e-10 * m.norm().max(1e-12));
        let eig = hermitian_eig_desc(m);
        let lead = eig.values[0].max(1e-12);
        prop_assert!(eig.values[m.nrows() - 1] >= -1e-10 * lead);
    }

    #[test]
    fn projection_efficiency_stays_in_range(seed in any::<u64>(), m_rf in 1usize..=3) {
        let (scene, _) = random_scene(seed, 2);
        let (_, factors) = channel_tensor(&scene);
        let r_true = true_covariance(&factors);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let b = DMatrix::from_fn(6, 6, |_, _| {
            Complex::new(
                rand::Rng::random::<f64>(&mut rng) - 0.5,
                rand::Rng::random::<f64>(&mut rng) - 0.5,
            )
        });
        let r_est = CovarianceMatrix::new({
            let q = &b * b.adjoint();
            (&q + q.adjoint()) * Complex::new(0.5, 0.0)
        }).unwrap();
        let res = rpe(&r_true, &r_est, m_rf).unwrap();
        prop_assert!(res.eta >= 0.0);
        prop_assert!(res.eta <= 1.0 + 1e-10);
        prop_assert!(res.trace_den > 0.0);
    }

    #[test]
    fn angle_mse_is_permutation_invariant(
        angles in proptest::collection::vec(-1.5f64..1.5, 1..5),
        noise in proptest::collection::vec(-0.05f64..0.05, 5),
    ) {
        let est: Vec<f64> = angles
            .iter()
            .enumerate()
            .map(|(i, a)| a + noise[i % noise.len()])
            .collect();
        let direct = aoa_mse(&angles, &est).unwrap();
        let mut reversed = est.clone();
        reversed.reverse();
        let permuted = aoa_mse(&angles, &reversed).unwrap();
        prop_assert!((direct - permuted).abs() <= 1e-12 * direct.max(1e-12));
        prop_assert!(direct >= 0.0);
    }

    #[test]
    fn fisher_information_is_psd(seed in any::<u64>(), n_paths in 1usize..=2) {
        let (scene, _) = random_scene(seed, n_paths);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        let comb = draw_combiner::<f64>(6, 4, &mut rng).unwrap();
        let blocks = fim_blocks(&scene, &comb, 0.5).unwrap();
        let fim = blocks.full_fim();
        prop_assert!((&fim - fim.adjoint()).norm() <= 1e-10 * fim.norm());
        let eig = hermitian_eig_desc(&fim);
        let lead = eig.values[0];
        prop_assert!(
            eig.values[eig.values.len() - 1] >= -1e-8 * lead,
            "information matrix must be positive semidefinite"
        );
    }

    #[test]
    fn whitened_measurements_keep_noise_white(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comb = draw_combiner::<f64>(6, 3, &mut rng).unwrap();
        let w = comb.w();
        let gram = w.adjoint() * w;
        let id = DMatrix::<C64>::identity(3, 3);
        prop_assert!((&gram - &id).norm() <= 1e-10, "combined gram must be identity");
        // A zero channel measured at sigma = 0 stays exactly zero.
        let h = ComplexTensor3::<f64>::zeros((6, 2, 2));
        let y = measure(&h, &comb, 0.0, &mut rng).unwrap();
        prop_assert!(y.norm() == 0.0);
    }
}
