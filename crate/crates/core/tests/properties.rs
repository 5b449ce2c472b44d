use gzsl_core::calib::{
    argmax, route_with_threshold, seen_entropy, softmax_in_place, EntropyMode, GeneralOutputs,
    Route,
};
use gzsl_core::datakit::{load_dataset, make_synthetic, save_dataset, SyntheticSpec};
use gzsl_core::evalkit::{
    confusion_matrix, entropy_histogram, harmonic_mean, per_class_top1, retrieval_map,
    MetricsReport,
};
use gzsl_core::gml::{
    kl_to_standard_normal, triplet_loss, wasserstein2_diag, DualVae, DualVaeConfig, GaussianParams,
    LatentBatch, Modality, ModelBundle,
};
use gzsl_core::numkit::Matrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn matrix(rows: usize, cols: usize, range: f64) -> impl Strategy<Value = Matrix<f64>> {
    prop::collection::vec(-range..range, rows * cols)
        .prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

fn gaussian(rows: usize, cols: usize) -> impl Strategy<Value = GaussianParams<f64>> {
    (matrix(rows, cols, 3.0), matrix(rows, cols, 3.0))
        .prop_map(|(m, lv)| GaussianParams::new(m, lv).unwrap())
}

fn probs(k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-30.0..30.0f64, k).prop_map(|mut v| {
        softmax_in_place(&mut v);
        v
    })
}

proptest! {
    #[test]
    fn kl_is_non_negative(gp in gaussian(3, 4)) {
        prop_assert!(kl_to_standard_normal(&gp) >= 0.0);
    }

    #[test]
    fn kl_vanishes_only_at_the_prior(gp in gaussian(2, 3)) {
        let zero = GaussianParams::<f64>::new(Matrix::zeros(2, 3), Matrix::zeros(2, 3)).unwrap();
        prop_assert_eq!(kl_to_standard_normal(&zero), 0.0);
        let at_prior = gp.mean.as_slice().iter().chain(gp.log_variance.as_slice()).all(|&v| v == 0.0);
        if !at_prior {
            prop_assert!(kl_to_standard_normal(&gp) > 0.0);
        }
    }

    #[test]
    fn wasserstein_is_a_symmetric_divergence(a in gaussian(2, 3), b in gaussian(2, 3)) {
        let ab = wasserstein2_diag(&a, &b).unwrap();
        let ba = wasserstein2_diag(&b, &a).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(wasserstein2_diag(&a, &a).unwrap(), 0.0);
        if a != b {
            prop_assert!(ab > 0.0);
        }
    }

    #[test]
    fn triplet_is_translation_invariant(
        a in matrix(3, 2, 3.0), p in matrix(3, 2, 3.0), n in matrix(3, 2, 3.0),
        shift in prop::collection::vec(-5.0..5.0f64, 2), alpha in 0.0..6.0f64,
    ) {
        let lb = |m: &Matrix<f64>| LatentBatch::new(m.clone(), Modality::Visual);
        let moved = |m: &Matrix<f64>| {
            let mut m = m.clone();
            m.add_row_vector(&shift).unwrap();
            LatentBatch::new(m, Modality::Visual)
        };
        let before = triplet_loss(&lb(&a), &lb(&p), &lb(&n), alpha).unwrap();
        let after = triplet_loss(&moved(&a), &moved(&p), &moved(&n), alpha).unwrap();
        prop_assert!((before - after).abs() <= 1e-9 * (1.0 + before.abs()));
        prop_assert!(before >= 0.0);
    }

    #[test]
    fn satisfied_margins_cost_nothing(a in matrix(4, 3, 2.0), alpha in 0.0..5.0f64) {
        // Negatives are pushed far along the first axis.
        let mut n = a.clone();
        for r in 0..4 {
            n[(r, 0)] += alpha.sqrt() + 0.5;
        }
        let lb = |m: &Matrix<f64>| LatentBatch::new(m.clone(), Modality::Semantic);
        prop_assert_eq!(triplet_loss(&lb(&a), &lb(&a), &lb(&n), alpha).unwrap(), 0.0);
    }

    #[test]
    fn semantic_encoding_is_deterministic(seed in 0u64..1000, row in prop::collection::vec(-2.0..2.0f32, 3)) {
        let vae = DualVae::init(&DualVaeConfig::uniform(4, 3, 2, 5), &mut ChaCha8Rng::seed_from_u64(seed));
        let s = Matrix::from_vec(1, 3, row).unwrap();
        prop_assert_eq!(vae.encode(Modality::Semantic, &s).unwrap(), vae.encode(Modality::Semantic, &s).unwrap());
    }

    #[test]
    fn softmax_sums_to_one_and_ignores_shifts(
        logits in prop::collection::vec(-500.0..500.0f64, 1..12), shift in -1e3..1e3f64,
    ) {
        let mut p = logits.clone();
        softmax_in_place(&mut p);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        let mut q: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        softmax_in_place(&mut q);
        prop_assert_eq!(argmax(&p), argmax(&logits));
        prop_assert_eq!(argmax(&q), argmax(&logits));
    }

    #[test]
    fn entropy_stays_in_bounds(p in probs(9), n_seen in 1usize..=9) {
        let seen: Vec<usize> = (0..n_seen).collect();
        let r = seen_entropy(&p, &seen, EntropyMode::RenormalizedSeen).unwrap();
        let f = seen_entropy(&p, &seen, EntropyMode::FullDistribution).unwrap();
        prop_assert!((0.0..=(n_seen as f64).ln()).contains(&r));
        prop_assert!((0.0..=9f64.ln()).contains(&f));
    }

    #[test]
    fn raising_tau_never_returns_samples_to_the_general_route(
        entropies in prop::collection::vec(0.0..3.0f64, 1..40), t1 in 0.0..3.5f64, dt in 0.0..3.5f64,
    ) {
        let n = entropies.len();
        let g = GeneralOutputs { classes: vec![7; n], entropies };
        let seen_preds = vec![1; n];
        let low = route_with_threshold(&g, &seen_preds, t1);
        let high = route_with_threshold(&g, &seen_preds, t1 + dt);
        for (l, h) in low.iter().zip(&high) {
            if l.route == Route::SeenClassifier {
                prop_assert_eq!(h.route, Route::SeenClassifier);
            }
            if h.route == Route::SeenClassifier {
                prop_assert_eq!(h.class_id, 1);
            }
        }
    }

    #[test]
    fn harmonic_is_at_most_the_arithmetic_mean(a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let h = harmonic_mean(a, b);
        prop_assert!(h <= (a + b) / 2.0 + 1e-15);
        if (a - b).abs() > 1e-9 {
            prop_assert!(h < (a + b) / 2.0);
        }
    }

    #[test]
    fn per_class_accuracy_ignores_order_and_duplication(
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..60), dup in 1usize..4, rot in 0usize..60,
    ) {
        let mut labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        // Make sure every class is present.
        labels.extend(0..4);
        preds.extend(0..4);
        let classes = [0, 1, 2, 3];
        let base = per_class_top1(&preds, &labels, &classes).unwrap();
        let k = rot % labels.len();
        labels.rotate_left(k);
        preds.rotate_left(k);
        prop_assert!((per_class_top1(&preds, &labels, &classes).unwrap() - base).abs() < 1e-12);
        let l2: Vec<usize> = labels.iter().flat_map(|&l| std::iter::repeat_n(l, dup)).collect();
        let p2: Vec<usize> = preds.iter().flat_map(|&p| std::iter::repeat_n(p, dup)).collect();
        prop_assert!((per_class_top1(&p2, &l2, &classes).unwrap() - base).abs() < 1e-12);
    }

    #[test]
    fn report_harmonic_matches_its_fields(pairs in prop::collection::vec((0usize..4, 0usize..4), 0..40)) {
        let mut labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let mut preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        labels.extend(0..4);
        preds.extend([1, 1, 3, 2]);
        let r = MetricsReport::from_predictions(&preds, &labels, &[0, 1], &[2, 3]).unwrap();
        prop_assert_eq!(r.harmonic, harmonic_mean(r.acc_seen, r.acc_unseen));
        prop_assert!([r.acc_seen, r.acc_unseen, r.harmonic].iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn confusion_rows_are_distributions(pairs in prop::collection::vec((0usize..5, 0usize..5), 0..50)) {
        let labels: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let preds: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let cm = confusion_matrix(&preds, &labels, &[0, 1, 2, 3, 4]).unwrap();
        for (c, row) in cm.rows.iter().enumerate() {
            let total: f64 = row.iter().sum();
            if labels.contains(&c) {
                prop_assert!((total - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(total, 0.0);
            }
            let hits = pairs.iter().filter(|p| p.0 == c && p.1 == c).count();
            let n = labels.iter().filter(|&&l| l == c).count();
            if n > 0 {
                prop_assert!((row[c] - hits as f64 / n as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn histograms_conserve_counts(
        samples in prop::collection::vec((0.0..4.0f64, any::<bool>()), 0..80), bins in 1usize..12,
    ) {
        let e: Vec<f64> = samples.iter().map(|s| s.0).collect();
        let seen: Vec<bool> = samples.iter().map(|s| s.1).collect();
        let h = entropy_histogram(&e, &seen, bins, Some(1.0)).unwrap();
        prop_assert_eq!(h.seen.iter().sum::<usize>(), seen.iter().filter(|&&s| s).count());
        prop_assert_eq!(h.unseen.iter().sum::<usize>(), seen.iter().filter(|&&s| !s).count());
        prop_assert_eq!(h.edges.len(), bins + 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn model_files_round_trip(seed in 0u64..10_000, latent in 1usize..4, hidden in 1usize..6) {
        let vae = DualVae::init(&DualVaeConfig::uniform(3, 2, latent, hidden), &mut ChaCha8Rng::seed_from_u64(seed));
        let bundle = ModelBundle::new(vae);
        prop_assert_eq!(ModelBundle::from_bytes(&bundle.to_bytes()).unwrap(), bundle);
    }

    #[test]
    fn datasets_round_trip(seed in 0u64..10_000, seen in 2usize..5, unseen in 1usize..3) {
        let spec = SyntheticSpec {
            seen_count: seen,
            unseen_count: unseen,
            visual_dim: 3,
            attribute_dim: 2,
            samples_per_class: 6,
            cluster_spread: 1.0,
            overlap: 0.5,
            test_fraction: 0.3,
            seed,
        };
        let ds = make_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        prop_assert_eq!(load_dataset(dir.path()).unwrap(), ds);
    }

    #[test]
    fn retrieval_ap_ignores_labels_of_irrelevant_items(seed in 0u64..10_000) {
        let spec = SyntheticSpec {
            seen_count: 2,
            unseen_count: 3,
            visual_dim: 4,
            attribute_dim: 3,
            samples_per_class: 10,
            cluster_spread: 1.0,
            overlap: 0.2,
            test_fraction: 0.5,
            seed,
        };
        let ds = make_synthetic(&spec).unwrap();
        let vae = DualVae::init(&DualVaeConfig::uniform(4, 3, 2, 6), &mut ChaCha8Rng::seed_from_u64(seed));
        let target = ds.unseen_classes[0];
        let others: Vec<usize> = ds.unseen_classes[1..].to_vec();
        let mut relabelled = ds.clone();
        for l in relabelled.labels.iter_mut() {
            if *l == others[0] {
                *l = others[1];
            } else if *l == others[1] {
                *l = others[0];
            }
        }
        let a = retrieval_map(&vae, &ds, &[target], 20, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let b = retrieval_map(&vae, &relabelled, &[target], 20, 100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        prop_assert_eq!(a.per_class_ap, b.per_class_ap);
    }
}
