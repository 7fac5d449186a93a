use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use soma_core::linalg::Matrix;
use soma_core::train::{apply_freeze_policy, loss_and_grad, BlockModel, Linear, LayerWeight, ModelDims, TrainConfig};
use soma_core::{AdapterKind, LinearAdapter};

const H: f64 = 1e-5;

fn loss(model: &BlockModel, x: &Matrix, y: &[usize]) -> f64 {
    loss_and_grad(&model.logits(x).unwrap(), y).unwrap().0
}

/// Worst relative disagreement between analytic and central-difference
/// gradients over `coords` random coordinates of every trainable tensor.
fn worst_gradient_error(model: &mut BlockModel, x: &Matrix, y: &[usize], coords: usize, seed: u64) -> f64 {
    let (logits, cache) = model.forward(x).unwrap();
    let (_, dlogits) = loss_and_grad(&logits, y).unwrap();
    let grads = model.backward(&cache, &dlogits).unwrap();
    assert_eq!(grads.entries.iter().map(|e| e.name.clone()).collect::<Vec<_>>(), model.trainable_names());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for entry in &grads.entries {
        let len = entry.values.as_slice().len();
        for _ in 0..coords.min(len) {
            let i = rng.random_range(0..len);
            let orig = model.with_param_mut(&entry.name, |v| v[i]).unwrap();
            model.with_param_mut(&entry.name, |v| v[i] = orig + H);
            let up = loss(model, x, y);
            model.with_param_mut(&entry.name, |v| v[i] = orig - H);
            let down = loss(model, x, y);
            model.with_param_mut(&entry.name, |v| v[i] = orig);
            let fd = (up - down) / (2.0 * H);
            let g = entry.values.as_slice()[i];
            let err = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            worst = worst.max(err);
        }
    }
    worst
}

fn setup(kind: AdapterKind, nfeb: usize, seed: u64) -> (BlockModel, Matrix, Vec<usize>) {
    let dims = ModelDims { d_in: 5, d_model: 6, d_hidden: 8, n_blocks: 3, n_classes: 4 };
    let base = BlockModel::init(dims, seed).unwrap();
    let cfg = TrainConfig { kind, rank: 3, nfeb, seed, ..TrainConfig::default() };
    let mut model = apply_freeze_policy(&base, &cfg).unwrap();
    // Move adapters off their init so every factor carries signal.
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xfeed);
    for name in model.trainable_names() {
        model.with_param_mut(&name, |v| v.iter_mut().for_each(|p| *p += rng.random_range(-0.3..0.3)));
    }
    let x = Matrix::from_fn(5, 7, |_, _| rng.random_range(-1.5..1.5));
    let y = (0..7).map(|i| i % 4).collect();
    (model, x, y)
}

#[test]
fn finite_differences_agree_for_every_kind() {
    for kind in [AdapterKind::None, AdapterKind::Soma, AdapterKind::Pissa, AdapterKind::Lora] {
        for nfeb in [0, 1, 3] {
            for seed in 0..3 {
                let (mut m, x, y) = setup(kind, nfeb, seed);
                let err = worst_gradient_error(&mut m, &x, &y, 30, seed);
                assert!(err <= 1e-6, "{kind} nfeb={nfeb} seed={seed}: {err:e}");
            }
        }
    }
}

#[test]
fn frozen_layers_produce_no_gradients() {
    let (mut m, x, y) = setup(AdapterKind::Soma, 2, 4);
    let names = m.trainable_names();
    assert!(names.iter().all(|n| !n.starts_with("embed") && !n.starts_with("blocks.0") && !n.starts_with("blocks.1")));
    assert!(names.contains(&"blocks.2.lin1.weight.b".to_string()));
    let (logits, cache) = m.forward(&x).unwrap();
    let (_, d) = loss_and_grad(&logits, &y).unwrap();
    assert_eq!(m.backward(&cache, &d).unwrap().len(), names.len());
}

fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum())
}

#[test]
fn adapter_factor_gradients_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (d_in, d_model, classes, batch, r, s) = (6, 5, 3, 9, 2, 1.7);
    let w = Matrix::from_fn(d_model, d_in, |_, _| rng.random_range(-1.0..1.0));
    let mut ad = LinearAdapter::new(AdapterKind::Soma, &w, r, 0, s).unwrap();
    ad.b_mut().as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
    ad.a_mut().as_mut_slice().iter_mut().for_each(|v| *v += rng.random_range(-0.5..0.5));
    let head = Matrix::from_fn(classes, d_model, |_, _| rng.random_range(-1.0..1.0));
    let model = BlockModel {
        embed: Linear::new(LayerWeight::Adapter(ad.clone()), vec![0.1; d_model], false).unwrap(),
        blocks: Vec::new(),
        head: Linear::frozen(head.clone(), vec![0.0; classes]).unwrap(),
    };
    let x = Matrix::from_fn(d_in, batch, |_, _| rng.random_range(-2.0..2.0));
    let y: Vec<usize> = (0..batch).map(|i| i % classes).collect();
    let (logits, cache) = model.forward(&x).unwrap();
    let (_, dlogits) = loss_and_grad(&logits, &y).unwrap();
    let grads = model.backward(&cache, &dlogits).unwrap();

    // G = headᵀ·dL/dlogits; ∂L/∂B = s·G(AX)ᵀ, ∂L/∂A = s·(BᵀG)Xᵀ.
    let g = naive_matmul(&head.transpose(), &dlogits);
    let ax = naive_matmul(ad.a(), &x);
    let gb = naive_matmul(&g, &ax.transpose()).scale(s);
    let btg = naive_matmul(&ad.b().transpose(), &g);
    let ga = naive_matmul(&btg, &x.transpose()).scale(s);
    for (name, oracle) in [("embed.weight.b", gb), ("embed.weight.a", ga)] {
        let got = grads.get(name).unwrap();
        let err = got.sub(&oracle).unwrap().max_abs() / oracle.max_abs();
        assert!(err <= 1e-12, "{name}: {err:e}");
    }
}
