use num_complex::Complex64;
use proptest::prelude::*;
use ris_fingerprint::channel::{scene_channel, CsiSample, GridSpec, RadioConfig, Scene};
use ris_fingerprint::codebook::RisConfiguration;
use ris_fingerprint::dataset::enumerate_cases;
use ris_fingerprint::eval::{cdf, matched_distances};
use ris_fingerprint::geometry::Point2;
use ris_fingerprint::model::transformer::{decode_logits, scaled_dot_attention};
use ris_fingerprint::model::{ModelConfig, ModelParams, Profile, Tensor};
use ris_fingerprint::preprocess::{concat_features, maxmin_normalize};
use ris_fingerprint::tokens::{TokenVocab, SOS};

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Tensor> {
    prop::collection::vec(-4.0..4.0f64, rows * cols).prop_map(move |d| Tensor::matrix(rows, cols, d).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn case_count_is_sum_of_binomials(s in 1usize..12, i in 1usize..5) {
        let i = i.min(s);
        let cases = enumerate_cases(s, i).unwrap();
        let expected: usize = (1..=i).map(|k| binomial(s, k)).sum();
        prop_assert_eq!(cases.len(), expected);
        let distinct: std::collections::BTreeSet<_> = cases.iter().map(|c| c.occupied.clone()).collect();
        prop_assert_eq!(distinct.len(), cases.len());
        for c in &cases {
            prop_assert!(c.occupied.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(c.occupied.iter().all(|&p| p < s));
        }
    }

    #[test]
    fn normalisation_spans_unit_interval(x in prop::collection::vec(0.0..10.0f64, 2..64)) {
        let y = maxmin_normalize(&x).unwrap();
        prop_assert!(y.iter().all(|v| (0.0..=1.0).contains(v)));
        let constant = x.iter().all(|&v| v == x[0]);
        if constant {
            prop_assert!(y.iter().all(|&v| v == 0.0));
        } else {
            prop_assert!(y.contains(&0.0) && y.contains(&1.0));
        }
    }

    #[test]
    fn normalisation_ignores_positive_affine_maps(
        x in prop::collection::vec(0.0..10.0f64, 2..64),
        a in 0.01..100.0f64,
        b in -50.0..50.0f64,
    ) {
        let y = maxmin_normalize(&x).unwrap();
        let z = maxmin_normalize(&x.iter().map(|v| a * v + b).collect::<Vec<_>>()).unwrap();
        let range = x.iter().copied().fold(f64::NEG_INFINITY, f64::max) - x.iter().copied().fold(f64::INFINITY, f64::min);
        prop_assume!(range > 1e-6);
        for (p, q) in y.iter().zip(&z) {
            prop_assert!((p - q).abs() <= 1e-9, "{} vs {}", p, q);
        }
    }

    #[test]
    fn concatenation_index_is_a_bijection(pairs in 1usize..4, beams in 1usize..7, k in 2usize..24, seed in any::<u64>()) {
        let samples: Vec<CsiSample> = (0..beams)
            .map(|r| CsiSample {
                case_id: 0,
                beam_index: r,
                repetition: 0,
                noise_seed: seed,
                amplitudes: (0..pairs)
                    .map(|p| (0..k).map(|i| ((seed ^ (r * 31 + p * 7 + i) as u64) % 1000) as f64).collect())
                    .collect(),
            })
            .collect();
        let refs: Vec<_> = samples.iter().collect();
        let f = concat_features(&refs).unwrap();
        prop_assert_eq!(f.len(), pairs * beams * k);
        let mut hits = vec![0u8; f.len()];
        for p in 0..pairs {
            for r in 0..beams {
                let norm = maxmin_normalize(&samples[r].amplitudes[p]).unwrap();
                for kk in 0..k {
                    hits[f.index(p, r, kk)] += 1;
                    prop_assert_eq!(f.get(p, r, kk), norm[kk]);
                }
            }
        }
        prop_assert!(hits.iter().all(|&h| h == 1));
    }

    #[test]
    fn optimal_matching_never_beats_identity_order(
        pts in prop::collection::vec((0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64, 0.0..5.0f64), 1..6),
    ) {
        let pred: Vec<Point2> = pts.iter().map(|p| Point2::new(p.0, p.1)).collect();
        let truth: Vec<Point2> = pts.iter().map(|p| Point2::new(p.2, p.3)).collect();
        let matched: f64 = matched_distances(&pred, &truth).unwrap().iter().sum();
        let identity: f64 = pred.iter().zip(&truth).map(|(a, b)| a.distance(*b)).sum();
        prop_assert!(matched <= identity + 1e-12);
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one(e in prop::collection::vec(0.0..3.0f64, 1..200)) {
        let c = cdf(&e);
        prop_assert_eq!(c.last().unwrap().1, 1.0);
        for w in c.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
    }

    #[test]
    fn softmax_rows_sum_to_one(q in matrix(7, 4), k in matrix(7, 4), v in matrix(7, 4), causal in any::<bool>()) {
        let (_, w) = scaled_dot_attention(&q, &k, &v, causal).unwrap();
        for i in 0..w.rows() {
            prop_assert!((w.row(i).iter().sum::<f64>() - 1.0).abs() <= 1e-6);
            if causal {
                prop_assert!(w.row(i)[i + 1..].iter().all(|&x| x == 0.0));
            }
        }
    }

    #[test]
    fn people_round_trip_through_tokens(idx in prop::collection::btree_set(0usize..16, 1..4)) {
        let pts = GridSpec::simulation().points();
        let vocab = TokenVocab::from_points(&pts).unwrap();
        let people: Vec<Point2> = idx.iter().map(|&i| pts[i]).collect();
        let seq = vocab.encode_people(&people).unwrap();
        prop_assert_eq!(seq.len(), 2 * people.len() + 2);
        let mut back = vocab.decode_people(&seq).unwrap();
        let mut want = people.clone();
        let key = |p: &Point2| (p.x, p.y);
        back.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        prop_assert_eq!(back, want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn later_tokens_never_reach_earlier_logits(
        seed in 0u64..1000,
        prefix in prop::collection::vec(3u32..9, 6),
        replacement in prop::collection::vec(3u32..9, 6),
        cut in 0usize..6,
    ) {
        let params = ModelParams::init(&ModelConfig::profile(Profile::Tiny, 5, 9, 3, seed)).unwrap();
        let memory = Tensor::matrix(5, 8, (0..40).map(|i| ((i * 7 + seed as usize) % 11) as f64 / 11.0).collect()).unwrap();
        let mut a = vec![SOS];
        a.extend(&prefix);
        let mut b = a.clone();
        for (j, t) in replacement.iter().enumerate() {
            if j + 1 > cut {
                b[j + 1] = *t;
            }
        }
        let la = decode_logits(&memory, &a, &params).unwrap();
        let lb = decode_logits(&memory, &b, &params).unwrap();
        for i in 0..=cut {
            prop_assert_eq!(la.row(i), lb.row(i));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn ris_contribution_is_linear_over_element_partitions(
        mask in prop::collection::vec(any::<bool>(), 100),
        phases in prop::collection::vec(0.0..6.28f64, 100),
        person in 0usize..4,
    ) {
        let radio = RadioConfig::experiment();
        let scene = Scene::whiteboard_room(&radio, GridSpec::experiment()).unwrap();
        let people = [scene.reference_points[person]];
        let config = |keep: Option<bool>| RisConfiguration {
            beam_label: 0.0,
            amplitudes: mask.iter().map(|&m| if keep.is_none_or(|k| k == m) { 1.0 } else { 0.0 }).collect(),
            phases: phases.clone(),
        };
        let h = |c: &RisConfiguration| scene_channel(&scene, &radio, c, &people).unwrap().values;
        let d = h(&RisConfiguration::off(100));
        let full = h(&config(None));
        let a = h(&config(Some(true)));
        let b = h(&config(Some(false)));
        let lhs: Vec<Complex64> = full.iter().zip(&d).map(|(f, d)| f - d).collect();
        let scale = lhs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        for i in 0..lhs.len() {
            let rhs = (a[i] - d[i]) + (b[i] - d[i]);
            prop_assert!((lhs[i] - rhs).norm() <= 1e-12 * scale);
        }
    }
}
