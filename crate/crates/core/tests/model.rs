//! Attention and model-level properties.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use songattn::ingest::{EmbeddedSequence, Modality};
use songattn::model::{attention_forward, bilstm_forward, init_params, Model, ModelConfig};
use songattn::{ModelParams, Tensor2};

fn config(seq_len: usize) -> ModelConfig {
    ModelConfig {
        seq_len,
        input_dim: 5,
        hidden: 3,
        attention_dim: 4,
        hops: 3,
        n_classes: 4,
    }
}

fn random_h(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor2 {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Tensor2::from_vec(rows, cols, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn attention_rows_are_stochastic_and_masked(seed in 0u64..5000, len in 1usize..12, pad in 0usize..6) {
        let cfg = config(len + pad);
        let params: ModelParams = init_params(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_h(&mut rng, len + pad, 2 * cfg.hidden);
        let (a, m) = attention_forward(&h, len, &params).unwrap();
        prop_assert_eq!(a.shape(), (cfg.hops, len + pad));
        prop_assert_eq!(m.shape(), (cfg.hops, 2 * cfg.hidden));
        for r in 0..cfg.hops {
            let row = a.row(r);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(row[len..].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn padding_rows_never_reach_m(seed in 0u64..5000, len in 1usize..8) {
        let cfg = config(len + 3);
        let params: ModelParams = init_params(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 1);
        let h = random_h(&mut rng, len + 3, 2 * cfg.hidden);
        let mut noisy = h.clone();
        for i in len..len + 3 {
            for j in 0..h.cols() {
                noisy.set(i, j, rng.gen_range(-50.0..50.0));
            }
        }
        let (a1, m1) = attention_forward(&h, len, &params).unwrap();
        let (a2, m2) = attention_forward(&noisy, len, &params).unwrap();
        prop_assert_eq!(a1, a2);
        prop_assert_eq!(m1, m2);
    }

    #[test]
    fn m_is_invariant_to_permuting_valid_steps(seed in 0u64..5000, len in 2usize..10) {
        let cfg = config(len + 2);
        let params: ModelParams = init_params(&cfg, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 2);
        let h = random_h(&mut rng, len + 2, 2 * cfg.hidden);
        let mut order: Vec<usize> = (0..len).collect();
        order.rotate_left(seed as usize % len);
        order.swap(0, len - 1);
        let mut permuted = h.clone();
        for (dst, &src) in order.iter().enumerate() {
            permuted.row_mut(dst).copy_from_slice(h.row(src));
        }
        let (a1, m1) = attention_forward(&h, len, &params).unwrap();
        let (a2, m2) = attention_forward(&permuted, len, &params).unwrap();
        for (x, y) in m1.data().iter().zip(m2.data()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
        for r in 0..cfg.hops {
            for (dst, &src) in order.iter().enumerate() {
                prop_assert!((a2.get(r, dst) - a1.get(r, src)).abs() < 1e-12);
            }
        }
    }
}

fn toy_input(cfg: &ModelConfig, valid_len: usize, seed: u64) -> EmbeddedSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = Tensor2::zeros(cfg.seq_len, cfg.input_dim);
    for i in 0..valid_len {
        for j in 0..cfg.input_dim {
            m.set(i, j, rng.gen_range(-1.0..1.0));
        }
    }
    EmbeddedSequence::new(m, valid_len, Modality::Lyric).unwrap()
}

#[test]
fn forward_shapes_and_probabilities() {
    let cfg = config(9);
    let model = Model::init(cfg, 4).unwrap();
    let out = model.forward(&toy_input(&cfg, 6, 1)).unwrap();
    assert_eq!(out.h.shape(), (9, 6));
    assert_eq!(out.a.shape(), (3, 9));
    assert_eq!(out.m.shape(), (3, 6));
    assert_eq!(out.content.shape(), (1, 18));
    assert_eq!(out.logits.shape(), (1, 4));
    let p = out.probabilities();
    assert!((p.sum() - 1.0).abs() < 1e-12);
    assert!(out.predicted_class() < 4);
}

#[test]
fn forward_is_deterministic_and_seed_sensitive() {
    let cfg = config(7);
    let x = toy_input(&cfg, 7, 2);
    let a = Model::init(cfg, 1).unwrap().forward(&x).unwrap();
    let b = Model::init(cfg, 1).unwrap().forward(&x).unwrap();
    let c = Model::init(cfg, 2).unwrap().forward(&x).unwrap();
    assert_eq!(a.logits, b.logits);
    assert_ne!(a.logits, c.logits);
}

#[test]
fn backward_lstm_sees_the_suffix() {
    let cfg = config(6);
    let model = Model::init(cfg, 3).unwrap();
    let x = toy_input(&cfg, 6, 5);
    let mut y = x.clone();
    for j in 0..cfg.input_dim {
        y.matrix.set(5, j, 0.9);
    }
    let h1 = bilstm_forward(&x, &model).unwrap();
    let h2 = bilstm_forward(&y, &model).unwrap();
    let u = cfg.hidden;
    // Step 0's forward half cannot see step 5; its backward half can.
    assert_eq!(&h1.row(0)[..u], &h2.row(0)[..u]);
    assert_ne!(&h1.row(0)[u..], &h2.row(0)[u..]);
}

#[test]
fn valid_len_contract() {
    let cfg = config(5);
    let model = Model::init(cfg, 0).unwrap();
    let mut x = toy_input(&cfg, 5, 0);
    x.valid_len = 6;
    assert!(model.forward(&x).is_err());
    x.valid_len = 0;
    assert!(model.forward(&x).is_err());
}
