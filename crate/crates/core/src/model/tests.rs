use super::*;
use crate::data::{GaussianMixture, LabeledDataset};
use crate::metrics::compute_margin;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn blobs(n: usize, seed: u64) -> LabeledDataset {
    GaussianMixture {
        n_train: n,
        n_val: 2,
        dim: 4,
        classes: 2,
        separation: 8.0,
        label_noise: 0.0,
        seed,
    }
    .generate()
    .unwrap()
    .0
}

/// Central finite differences of the mean loss; independent of the
/// backward pass.
fn finite_difference_grad(
    params: &ModelParams,
    ds: &LabeledDataset,
    batch: &[usize],
    h: f64,
) -> Vec<f64> {
    (0..params.values().len())
        .map(|k| {
            let mut plus = params.values().to_vec();
            let mut minus = params.values().to_vec();
            plus[k] += h;
            minus[k] -= h;
            let p = ModelParams::from_values(params.arch().clone(), 0, plus).unwrap();
            let m = ModelParams::from_values(params.arch().clone(), 0, minus).unwrap();
            (mean_loss(&p, ds, batch).unwrap() - mean_loss(&m, ds, batch).unwrap()) / (2.0 * h)
        })
        .collect()
}

pub(crate) fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-4))
        .fold(0.0, f64::max)
}

#[test]
fn init_is_deterministic_and_seed_dependent() {
    let arch = Architecture::classifier(vec![4, 8, 3]).unwrap();
    let a = init_params(&arch, 7).unwrap();
    let b = init_params(&arch, 7).unwrap();
    let c = init_params(&arch, 8).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.values(), c.values());
}

#[test]
fn layer_shapes_follow_widths() {
    let arch = Architecture::classifier(vec![4, 8, 3]).unwrap();
    let p = init_params(&arch, 0).unwrap();
    let (w0, b0) = p.layer(0);
    let (w1, b1) = p.layer(1);
    assert_eq!((w0.len(), b0.len()), (8 * 4, 8));
    assert_eq!((w1.len(), b1.len()), (3 * 8, 3));
    assert_eq!(arch.n_params(), 32 + 8 + 24 + 3);
    assert!(Architecture::classifier(vec![4, 0, 3]).is_err());
    assert!(Architecture::classifier(vec![4]).is_err());
}

#[test]
fn zero_params_give_zero_logits() {
    let arch = Architecture::classifier(vec![3, 5, 4]).unwrap();
    let p = ModelParams::zeros(arch).unwrap();
    assert_eq!(forward_logits(&p, &[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 4]);
    assert!(forward_logits(&p, &[1.0]).is_err());
}

#[test]
fn linear_layer_on_one_hot_selects_a_column() {
    let arch = Architecture::classifier(vec![3, 2]).unwrap();
    // W is 2x3 row-major, then two biases.
    let p =
        ModelParams::from_values(arch, 0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.0, 0.0]).unwrap();
    assert_eq!(
        forward_logits(&p, &[0.0, 1.0, 0.0]).unwrap(),
        vec![2.0, 5.0]
    );
}

#[test]
fn uniform_logits_loss_is_log_k() {
    for k in [2usize, 3, 7] {
        let arch = Architecture::classifier(vec![2, k]).unwrap();
        let p = ModelParams::zeros(arch).unwrap();
        let ds = LabeledDataset::new(vec![0.3, 1.0, -2.0, 0.5], vec![0, k - 1], 2, k).unwrap();
        let (loss, _) = loss_and_grad(&p, &ds, &[0, 1]).unwrap();
        assert!((loss - (k as f64).ln()).abs() < 1e-12);
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let archs = [
        Architecture::classifier(vec![4, 2]).unwrap(),
        Architecture::classifier(vec![4, 6, 3]).unwrap(),
        Architecture::classifier(vec![4, 5, 4, 2]).unwrap(),
        Architecture::autoregressive(3, 2, &[5]).unwrap(),
    ];
    for arch in &archs {
        for trial in 0..5 {
            let p = init_params(arch, rng.random()).unwrap();
            let n = 6;
            let k = arch.n_outputs();
            let features: Vec<f64> = (0..n * arch.input_dim())
                .map(|_| rng.random_range(-2.0..2.0))
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let ds = LabeledDataset::new(features, labels, arch.input_dim(), k).unwrap();
            let batch: Vec<usize> = (0..n).collect();
            let (_, g) = loss_and_grad(&p, &ds, &batch).unwrap();
            let fd = finite_difference_grad(&p, &ds, &batch, 1e-3);
            let err = max_relative_error(&g, &fd);
            assert!(
                err <= 1e-4,
                "arch {:?} trial {trial}: rel err {err}",
                arch.widths()
            );
        }
    }
}

#[test]
fn duplicated_batch_has_same_loss_and_grads() {
    let ds = blobs(10, 3);
    let arch = Architecture::classifier(vec![4, 6, 2]).unwrap();
    let p = init_params(&arch, 1).unwrap();
    let once: Vec<usize> = (0..10).collect();
    let twice: Vec<usize> = (0..10).flat_map(|i| [i, i]).collect();
    let (l1, g1) = loss_and_grad(&p, &ds, &once).unwrap();
    let (l2, g2) = loss_and_grad(&p, &ds, &twice).unwrap();
    assert!((l1 - l2).abs() < 1e-12);
    assert!(g1.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
    assert!(loss_and_grad(&p, &ds, &[]).is_err());
}

#[test]
fn separable_blobs_are_learned() {
    let ds = blobs(400, 11);
    let arch = Architecture::classifier(vec![4, 8, 2]).unwrap();
    let config = TrainConfig {
        seed: 5,
        ..Default::default()
    };
    let all: Vec<usize> = (0..ds.len()).collect();
    let init = init_params(&arch, 5).unwrap();
    let trained = train(&arch, &ds, &config).unwrap();
    assert!(accuracy(&trained, &ds, &all).unwrap() >= 0.99);
    assert!(mean_loss(&trained, &ds, &all).unwrap() < mean_loss(&init, &ds, &all).unwrap());
    assert_eq!(trained, train(&arch, &ds, &config).unwrap());
}

#[test]
fn zero_learning_rate_leaves_init_unchanged() {
    let ds = blobs(50, 2);
    let arch = Architecture::classifier(vec![4, 8, 2]).unwrap();
    let config = TrainConfig {
        learning_rate: 0.0,
        seed: 9,
        epochs: 2,
        ..Default::default()
    };
    assert_eq!(
        train(&arch, &ds, &config).unwrap(),
        init_params(&arch, 9).unwrap()
    );
}

#[test]
fn divergence_is_reported() {
    let ds = blobs(50, 2).scaled(1e3);
    let arch = Architecture::classifier(vec![4, 2]).unwrap();
    let config = TrainConfig {
        learning_rate: 1e300,
        momentum: 0.9,
        epochs: 5,
        ..Default::default()
    };
    match train(&arch, &ds, &config) {
        Err(crate::Error::TrainingDiverged { .. }) => {}
        other => panic!("expected divergence, got {other:?}"),
    }
}

#[test]
fn margins_compose_forward_and_compute_margin() {
    let ds = blobs(20, 4);
    let arch = Architecture::classifier(vec![4, 6, 2]).unwrap();
    let p = init_params(&arch, 3).unwrap();
    let margins = compute_all_margins(&p, &ds).unwrap();
    for (i, &m) in margins.iter().enumerate() {
        let direct = compute_margin(&forward_logits(&p, ds.row(i)).unwrap(), ds.label(i)).unwrap();
        assert_eq!(m, direct);
    }
    let zero = ModelParams::zeros(arch).unwrap();
    assert!(compute_all_margins(&zero, &ds)
        .unwrap()
        .iter()
        .all(|&m| m == 0.0));
}

#[test]
fn confident_model_has_large_positive_margins() {
    let ds = blobs(200, 8);
    let arch = Architecture::classifier(vec![4, 8, 2]).unwrap();
    let trained = train(
        &arch,
        &ds,
        &TrainConfig {
            seed: 2,
            ..Default::default()
        },
    )
    .unwrap();
    let margins = compute_all_margins(&trained, &ds).unwrap();
    let mean = margins.iter().sum::<f64>() / margins.len() as f64;
    assert!(mean > 3.0, "mean margin {mean}");
}

#[test]
fn binary_loss_is_softplus_of_negative_margin() {
    let ds = blobs(30, 6);
    let arch = Architecture::classifier(vec![4, 5, 2]).unwrap();
    let p = init_params(&arch, 12).unwrap();
    let margins = compute_all_margins(&p, &ds).unwrap();
    for (i, m) in margins.iter().enumerate() {
        let loss = mean_loss(&p, &ds, &[i]).unwrap();
        let softplus = (-m).max(0.0) + (-m.abs()).exp().ln_1p();
        assert!((loss - softplus).abs() < 1e-9);
    }
}

#[test]
fn context_features_left_pad() {
    let arch = Architecture::autoregressive(3, 2, &[4]).unwrap();
    // slots of width 4; pad id 3
    assert_eq!(
        context_features(&arch, &[1]).unwrap(),
        vec![0.0, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0]
    );
    assert_eq!(
        context_features(&arch, &[2, 0, 1]).unwrap(),
        vec![1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]
    );
    assert!(context_features(&arch, &[3]).is_err());
}

#[test]
fn uniform_autoregressive_model_has_zero_margins() {
    let arch = Architecture::autoregressive(2, 3, &[4]).unwrap();
    let p = ModelParams::zeros(arch).unwrap();
    assert_eq!(
        next_token_margins(&p, &[0, 1, 1, 0, 1]).unwrap(),
        vec![0.0; 4]
    );
    assert!(next_token_margins(&p, &[0]).is_err());
    assert!(next_token_margins(&p, &[0, 2]).is_err());
}

#[test]
fn two_token_sequence_is_one_classification_step() {
    let arch = Architecture::autoregressive(4, 2, &[6]).unwrap();
    let p = init_params(&arch, 21).unwrap();
    let m = next_token_margins(&p, &[2, 3]).unwrap();
    let logits = forward_logits(&p, &context_features(&arch, &[2]).unwrap()).unwrap();
    assert_eq!(m, vec![compute_margin(&logits, 3).unwrap()]);
}

#[test]
fn bigram_model_learns_alternation() {
    let arch = Architecture::autoregressive(2, 2, &[8]).unwrap();
    let seqs: Vec<Vec<usize>> = (0..20)
        .map(|s| (0..12).map(|t| (t + s) % 2).collect())
        .collect();
    let ds = sequences_to_dataset(&arch, &seqs).unwrap();
    let trained = train(
        &arch,
        &ds,
        &TrainConfig {
            seed: 4,
            epochs: 40,
            ..Default::default()
        },
    )
    .unwrap();
    let probe: Vec<usize> = (0..10).map(|t| t % 2).collect();
    let margins = next_token_margins(&trained, &probe).unwrap();
    // After the first token the next one is fully determined.
    for (t, m) in margins.iter().enumerate() {
        if probe[t + 1] == 1 {
            assert!(*m > 0.0, "position {t}: margin {m}");
        }
    }
    assert!(margins.iter().all(|&m| m > 0.0));
}
