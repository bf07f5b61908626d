use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ris_fingerprint::eval::min_cost_assignment;
use ris_fingerprint::model::gradcheck::{gradient_check, random_batch};
use ris_fingerprint::model::train::{batch_gradients, mean_batch_gradients, TrainConfig};
use ris_fingerprint::model::transformer::{multi_head, AttentionWeights};
use ris_fingerprint::model::{predict, train, Checkpoint, ModelConfig, ModelParams, Profile, Tensor};
use ris_fingerprint::preprocess::FeatureVector;
use ris_fingerprint::tokens::TokenVocab;

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

fn naive_matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| (0..b[0].len()).map(|j| row.iter().zip(b).map(|(x, br)| x * br[j]).sum()).collect())
        .collect()
}

fn rows(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

/// Textbook multi-head attention with nested loops.
fn reference_multi_head(xq: &Tensor, xk: &Tensor, xv: &Tensor, w: &AttentionWeights, causal: bool) -> Vec<Vec<f64>> {
    let mut concat: Vec<Vec<f64>> = vec![Vec::new(); xq.rows()];
    for h in 0..w.query.len() {
        let q = naive_matmul(&rows(xq), &rows(&w.query[h]));
        let k = naive_matmul(&rows(xk), &rows(&w.key[h]));
        let v = naive_matmul(&rows(xv), &rows(&w.value[h]));
        let d = q[0].len() as f64;
        for (i, qi) in q.iter().enumerate() {
            let visible = if causal { i + 1 } else { k.len() };
            let scores: Vec<f64> = k[..visible]
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt())
                .collect();
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let z: f64 = e.iter().sum();
            for c in 0..v[0].len() {
                concat[i].push(e.iter().zip(&v).map(|(p, vj)| p / z * vj[c]).sum());
            }
        }
    }
    naive_matmul(&concat, &rows(&w.output))
}

#[test]
fn multi_head_matches_nested_loop_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for (n, m, d_in, heads, dh) in [(5, 5, 8, 2, 4), (3, 7, 6, 3, 2), (9, 9, 16, 4, 4)] {
        let xq = random(&mut rng, n, d_in);
        let xk = random(&mut rng, m, d_in);
        let xv = random(&mut rng, m, d_in);
        let w = AttentionWeights {
            query: (0..heads).map(|_| random(&mut rng, d_in, dh)).collect(),
            key: (0..heads).map(|_| random(&mut rng, d_in, dh)).collect(),
            value: (0..heads).map(|_| random(&mut rng, d_in, dh)).collect(),
            output: random(&mut rng, heads * dh, d_in),
        };
        for causal in [false, true] {
            if causal && n != m {
                continue;
            }
            let got = multi_head(&xq, &xk, &xv, &w, causal).unwrap();
            let want = reference_multi_head(&xq, &xk, &xv, &w, causal);
            for (i, row) in want.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    assert!((got.at(i, j) - x).abs() <= 1e-12, "({i}, {j}) {} vs {x}", got.at(i, j));
                }
            }
        }
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn assignment_matches_exhaustive_search_up_to_six() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=6 {
        let perms = permutations(n);
        for _ in 0..200 {
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..4.0)).collect()).collect();
            let a = min_cost_assignment(&cost).unwrap();
            let mut seen = vec![false; n];
            for &j in &a {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let got: f64 = a.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
            let best = perms
                .iter()
                .map(|p| p.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            assert!((got - best).abs() <= 1e-12, "n {n}: {got} vs {best}");
        }
    }
}

fn tiny() -> ModelParams {
    ModelParams::init(&ModelConfig::profile(Profile::Tiny, 6, 9, 3, 31)).unwrap()
}

#[test]
fn tiny_profile_gradients_match_central_differences() {
    let params = tiny();
    let batch = random_batch(&params, 2, 32);
    let report = gradient_check(&params, &batch, 300, 33).unwrap();
    assert!(report.max_relative_error < 1e-4, "{:?}", report.worst());
}

#[test]
fn doubling_loss_scale_doubles_gradients() {
    let params = tiny();
    let batch = random_batch(&params, 3, 34);
    let (l1, g1) = batch_gradients(&params, &batch, 1.0).unwrap();
    let (l2, g2) = batch_gradients(&params, &batch, 2.0).unwrap();
    assert_eq!(l2, 2.0 * l1);
    for (a, b) in g1.iter().flatten().zip(g2.iter().flatten()) {
        assert_eq!(*b, 2.0 * a);
    }
}

#[test]
fn dropout_masks_follow_the_seed() {
    let mut cfg = ModelConfig::profile(Profile::Tiny, 6, 9, 3, 31);
    cfg.dropout = 0.3;
    let params = ModelParams::init(&cfg).unwrap();
    let batch = random_batch(&params, 3, 37);
    let plain = mean_batch_gradients(&params, &batch, None).unwrap();
    let a = mean_batch_gradients(&params, &batch, Some(5)).unwrap();
    assert_eq!(a, mean_batch_gradients(&params, &batch, Some(5)).unwrap());
    assert_ne!(a, plain);
    assert_ne!(a, mean_batch_gradients(&params, &batch, Some(6)).unwrap());

    // without dropout the seed is irrelevant
    let params = tiny();
    let none = mean_batch_gradients(&params, &batch, None).unwrap();
    assert_eq!(none, mean_batch_gradients(&params, &batch, Some(5)).unwrap());
}

#[test]
fn same_seed_replays_bit_identical_losses() {
    let params = tiny();
    let data = random_batch(&params, 8, 35);
    let vocab = TokenVocab::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 3,
        max_epochs: 4,
        seed: 36,
        ..TrainConfig::default()
    };
    let run = || {
        let mut p = params.clone();
        let log = train(&mut p, &vocab, &data[..6], &data[6..], &cfg, |_| {}).unwrap();
        (log, p)
    };
    let (a, pa) = run();
    let (b, pb) = run();
    assert_eq!(a, b);
    assert_eq!(pa, pb);
}

#[test]
fn checkpoint_round_trip_preserves_predictions() {
    let params = tiny();
    let vocab = TokenVocab::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 2.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    Checkpoint::new(&params, &vocab, None).save(&path).unwrap();
    let loaded = Checkpoint::load(&path).unwrap();
    assert_eq!(loaded.vocab, vocab);
    let restored = loaded.params().unwrap();
    assert_eq!(restored, params);
    let features = FeatureVector {
        values: (0..6).map(|i| i as f64 / 6.0).collect(),
        antenna_pairs: 1,
        beams: 1,
        subcarriers: 6,
    };
    let seq = predict(&features, &restored, &vocab).unwrap();
    assert_eq!(seq, predict(&features, &params, &vocab).unwrap());
    assert!(vocab.decode_people(&seq).is_some());
    assert!(seq.len() <= params.config.max_decode_len);
}

#[test]
fn checkpoint_with_other_schema_is_rejected() {
    let params = tiny();
    let vocab = TokenVocab::new(vec![0.0], vec![0.0]).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("checkpoint.json");
    let mut ckpt = Checkpoint::new(&params, &vocab, None);
    ckpt.schema_version += 1;
    ckpt.save(&path).unwrap();
    let err = Checkpoint::load(&path).unwrap_err();
    assert!(matches!(err, ris_fingerprint::Error::SchemaMismatch { .. }), "{err}");
}
