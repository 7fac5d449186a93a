use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soma_core::linalg::Matrix;
use soma_core::train::{
    adamw_update, apply_freeze_policy, awd_coefficient, loss_and_grad, train_loop, AwdSchedule, BlockModel,
    DecayReference, GradEntry, Gradients, LayerId, ModelDims, OptimizerState, TrainConfig, BETA1, BETA2, EPS,
};
use soma_core::{AdapterKind, Error};

fn dims() -> ModelDims {
    ModelDims { d_in: 6, d_model: 8, d_hidden: 12, n_blocks: 4, n_classes: 3 }
}

/// Three well-separated Gaussian blobs.
fn blobs(n_per: usize, seed: u64) -> (Matrix, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 3 * n_per;
    let x = Matrix::from_fn(6, n, |r, c| if r == c % 3 { 3.0 } else { 0.0 } + rng.random_range(-0.5..0.5));
    (x, (0..n).map(|c| c % 3).collect())
}

#[test]
fn adamw_matches_hand_rolled_oracle_over_several_steps() {
    let grads = [[0.5, -1.0], [0.2, 0.3], [-0.7, 0.0]];
    let (lr, wd) = (0.05, 0.1);
    let mut p = [1.0, -1.0];
    let (mut m, mut v) = ([0.0; 2], [0.0; 2]);
    let mut q = p;
    let (mut qm, mut qv) = ([0.0f64; 2], [0.0f64; 2]);
    for (t, g) in grads.iter().enumerate() {
        adamw_update(&mut p, g, &mut m, &mut v, t as u64 + 1, lr, wd, None);
        for i in 0..2 {
            q[i] *= 1.0 - lr * wd;
            qm[i] = BETA1 * qm[i] + (1.0 - BETA1) * g[i];
            qv[i] = BETA2 * qv[i] + (1.0 - BETA2) * g[i] * g[i];
            let mh = qm[i] / (1.0 - BETA1.powi(t as i32 + 1));
            let vh = qv[i] / (1.0 - BETA2.powi(t as i32 + 1));
            q[i] -= lr * mh / (vh.sqrt() + EPS);
        }
    }
    for i in 0..2 {
        assert!((p[i] - q[i]).abs() < 1e-15, "{} vs {}", p[i], q[i]);
    }
}

#[test]
fn awd_is_monotone_on_a_fine_grid() {
    let total = 10_000;
    let mut prev = f64::INFINITY;
    for t in 0..=total {
        let wd = awd_coefficient(t, total, 0.3, AwdSchedule::Cosine);
        assert!(wd <= prev && wd >= 0.0);
        prev = wd;
    }
    assert_eq!(awd_coefficient(total / 2, total, 0.3, AwdSchedule::Cosine), 0.15);
}

#[test]
fn head_and_backbone_use_their_own_learning_rates() {
    let base = BlockModel::init(dims(), 3).unwrap();
    let cfg = TrainConfig {
        kind: AdapterKind::None,
        lr: 0.01,
        backbone_lr_mult: 0.25,
        awd: AwdSchedule::Off,
        ..TrainConfig::default()
    };
    let mut model = apply_freeze_policy(&base, &cfg).unwrap();
    let (x, y) = blobs(4, 0);
    let (logits, cache) = model.forward(&x).unwrap();
    let (_, d) = loss_and_grad(&logits, &y).unwrap();
    let grads = model.backward(&cache, &d).unwrap();
    let before = model.clone();
    OptimizerState::new().step(&mut model, &grads, &cfg, 0).unwrap();
    for e in &grads.entries {
        let lr = if e.name.starts_with("head") { 0.01 } else { 0.0025 };
        let old = before.clone().with_param_mut(&e.name, |v| v.to_vec()).unwrap();
        let new = model.with_param_mut(&e.name, |v| v.to_vec()).unwrap();
        for ((o, n), g) in old.iter().zip(&new).zip(e.values.as_slice()) {
            let expect = o - lr * g / (g.abs() + EPS);
            assert!((n - expect).abs() < 1e-15, "{}", e.name);
        }
    }
}

#[test]
fn decay_toward_init_leaves_zero_gradient_params_fixed() {
    let base = BlockModel::init(dims(), 5).unwrap();
    let cfg = TrainConfig {
        kind: AdapterKind::None,
        wd0: 0.5,
        awd: AwdSchedule::Constant,
        decay_reference: DecayReference::Init,
        ..TrainConfig::default()
    };
    let mut model = apply_freeze_policy(&base, &cfg).unwrap();
    let names = model.trainable_names();
    let mut entries = Vec::new();
    for n in &names {
        let len = model.with_param_mut(n, |v| v.len()).unwrap();
        entries.push(GradEntry::new(n.clone(), Matrix::zeros(len, 1)));
    }
    let before = model.raw_values();
    OptimizerState::new().step(&mut model, &Gradients { entries }, &cfg, 0).unwrap();
    assert_eq!(model.raw_values(), before);
}

#[test]
fn non_finite_gradient_aborts_before_any_update() {
    let base = BlockModel::init(dims(), 1).unwrap();
    let cfg = TrainConfig { kind: AdapterKind::None, ..TrainConfig::default() };
    let mut model = apply_freeze_policy(&base, &cfg).unwrap();
    let (x, y) = blobs(2, 1);
    let (logits, cache) = model.forward(&x).unwrap();
    let (_, d) = loss_and_grad(&logits, &y).unwrap();
    let mut grads = model.backward(&cache, &d).unwrap();
    let last = grads.entries.len() - 1;
    grads.entries[last].values.as_mut_slice()[0] = f64::NAN;
    let before = model.raw_values();
    let err = OptimizerState::new().step(&mut model, &grads, &cfg, 0).unwrap_err();
    assert_eq!(err, Error::NonFiniteGradient { param: "head.bias".into() });
    assert_eq!(model.raw_values(), before);
}

#[test]
fn overflowing_inputs_stop_training_with_an_error() {
    let base = BlockModel::init(dims(), 1).unwrap();
    let cfg = TrainConfig { kind: AdapterKind::None, steps: 5, ..TrainConfig::default() };
    let mut model = apply_freeze_policy(&base, &cfg).unwrap();
    let x = Matrix::from_fn(6, 4, |r, c| if (r + c) % 2 == 0 { 1e300 } else { -1e300 });
    let before = model.raw_values();
    let err = train_loop(&mut model, &x, &[0, 1, 2, 0], &cfg).unwrap_err();
    assert!(matches!(err, Error::Diverged { step: 0 } | Error::NonFiniteGradient { .. }), "{err:?}");
    assert_eq!(model.raw_values(), before);
}

#[test]
fn frozen_blocks_are_untouched_and_runs_repeat() {
    let base = BlockModel::init(dims(), 8).unwrap();
    let (x, y) = blobs(10, 2);
    for kind in [AdapterKind::Soma, AdapterKind::Pissa, AdapterKind::Lora, AdapterKind::None] {
        let cfg = TrainConfig { kind, rank: 2, nfeb: 2, steps: 40, batch: 8, seed: 3, ..TrainConfig::default() };
        let mut a = apply_freeze_policy(&base, &cfg).unwrap();
        let frozen = |m: &BlockModel| {
            [LayerId::Embed, LayerId::Lin1(0), LayerId::Lin2(0), LayerId::Lin1(1), LayerId::Lin2(1)]
                .map(|id| m.layer(id).unwrap().clone())
        };
        let snapshot = frozen(&a);
        let out_a = train_loop(&mut a, &x, &y, &cfg).unwrap();
        assert_eq!(frozen(&a), snapshot, "{kind}");
        assert_ne!(a.raw_values(), apply_freeze_policy(&base, &cfg).unwrap().raw_values());

        let mut b = apply_freeze_policy(&base, &cfg).unwrap();
        let out_b = train_loop(&mut b, &x, &y, &cfg).unwrap();
        assert_eq!(out_a, out_b);
        assert_eq!(a, b);
    }
}

#[test]
fn separable_data_is_learned_by_every_kind() {
    let base = BlockModel::init(dims(), 4).unwrap();
    let (x, y) = blobs(30, 4);
    for kind in [AdapterKind::None, AdapterKind::Soma, AdapterKind::Pissa, AdapterKind::Lora] {
        let cfg = TrainConfig { kind, rank: 4, nfeb: 0, lr: 1e-2, steps: 500, batch: 16, ..TrainConfig::default() };
        let mut m = apply_freeze_policy(&base, &cfg).unwrap();
        train_loop(&mut m, &x, &y, &cfg).unwrap();
        let acc = m.accuracy(&x, &y).unwrap();
        assert!(acc >= 0.99, "{kind}: {acc}");
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let base = BlockModel::init(dims(), 0).unwrap();
    let bad = [
        TrainConfig { nfeb: 5, ..TrainConfig::default() },
        TrainConfig { steps: 0, ..TrainConfig::default() },
        TrainConfig { lr: 0.0, ..TrainConfig::default() },
        TrainConfig { wd0: -1.0, ..TrainConfig::default() },
        TrainConfig { rank: 0, ..TrainConfig::default() },
    ];
    for cfg in bad {
        assert!(matches!(apply_freeze_policy(&base, &cfg), Err(Error::InvalidConfig(_))), "{cfg:?}");
    }
}
